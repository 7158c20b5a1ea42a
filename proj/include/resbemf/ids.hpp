#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace resbemf {

/// Bidirectional map between external identifiers and dense row indices.
class IdIndex
{
public:
    IdIndex() = default;
    explicit IdIndex(std::vector<std::string> ids);

    std::size_t add(const std::string& id);
    std::optional<std::size_t> find(const std::string& id) const;
    const std::string& id(std::size_t row) const { return ids_.at(row); }
    std::size_t size() const { return ids_.size(); }
    std::span<const std::string> ids() const { return ids_; }

private:
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::size_t> rows_;
};

} // namespace resbemf
