#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace resbemf {

/// The ordered, discrete rating vocabulary. Values are strictly increasing
/// and there are at least two of them.
class ScoreSet
{
public:
    explicit ScoreSet(std::vector<double> values);

    std::size_t size() const { return values_.size(); }
    std::span<const double> values() const { return values_; }

    double value(std::size_t index) const { return values_.at(index); }

    /// Index of an exact score value, or nullopt when the value is not a score.
    std::optional<std::size_t> find(double value) const;

    /// Like find(), but throws std::domain_error for unknown values.
    std::size_t index(double value) const;

    /// Index of the score closest to `x`; a tie between two neighbours goes up.
    std::size_t nearest(double x) const;

    double min() const { return values_.front(); }
    double max() const { return values_.back(); }
    double range() const { return max() - min(); }

    bool operator==(const ScoreSet&) const = default;

private:
    std::vector<double> values_;
};

} // namespace resbemf
