#include "resbemf/score_set.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace resbemf {

ScoreSet::ScoreSet(std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() < 2) {
        throw std::invalid_argument("score set needs at least two values");
    }
    for (std::size_t j = 0; j < values_.size(); ++j) {
        if (!std::isfinite(values_[j])) {
            throw std::invalid_argument("score set values must be finite");
        }
        if (j > 0 && !(values_[j - 1] < values_[j])) {
            throw std::invalid_argument("score set values must be strictly increasing");
        }
    }
}

std::optional<std::size_t> ScoreSet::find(double value) const {
    auto it = std::lower_bound(values_.begin(), values_.end(), value);
    if (it == values_.end() || *it != value) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - values_.begin());
}

std::size_t ScoreSet::index(double value) const {
    if (auto idx = find(value)) {
        return *idx;
    }
    throw std::domain_error("rating value " + std::to_string(value) + " is not in the score set");
}

std::size_t ScoreSet::nearest(double x) const {
    auto it = std::lower_bound(values_.begin(), values_.end(), x);
    if (it == values_.begin()) {
        return 0;
    }
    if (it == values_.end()) {
        return values_.size() - 1;
    }
    const auto hi = static_cast<std::size_t>(it - values_.begin());
    const double below = x - values_[hi - 1];
    const double above = values_[hi] - x;
    return above <= below ? hi : hi - 1;
}

} // namespace resbemf
