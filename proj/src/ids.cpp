#include "resbemf/ids.hpp"

#include <stdexcept>

namespace resbemf {

IdIndex::IdIndex(std::vector<std::string> ids) {
    for (auto& id : ids) {
        if (!rows_.emplace(id, ids_.size()).second) {
            throw std::invalid_argument("duplicate identifier '" + id + "'");
        }
        ids_.push_back(std::move(id));
    }
}

std::size_t IdIndex::add(const std::string& id) {
    auto [it, inserted] = rows_.emplace(id, ids_.size());
    if (inserted) {
        ids_.push_back(id);
    }
    return it->second;
}

std::optional<std::size_t> IdIndex::find(const std::string& id) const {
    auto it = rows_.find(id);
    if (it == rows_.end()) {
        return std::nullopt;
    }
    return it->second;
}

} // namespace resbemf
