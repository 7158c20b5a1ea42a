#pragma once

#include <random>
#include <string>
#include <vector>

#include "resbemf/dataset.hpp"
#include "resbemf/model.hpp"

namespace fixtures {

inline resbemf::ScoreSet stars(int d = 5) {
    std::vector<double> v;
    for (int s = 1; s <= d; ++s) {
        v.push_back(s);
    }
    return resbemf::ScoreSet(v);
}

inline resbemf::IdIndex ids(const std::string& prefix, std::size_t n) {
    resbemf::IdIndex index;
    for (std::size_t j = 0; j < n; ++j) {
        index.add(prefix + std::to_string(j));
    }
    return index;
}

// Model with entries drawn from U(lo, hi).
inline resbemf::FactorModel random_model(std::mt19937_64& gen, std::size_t users, std::size_t items,
                                         std::size_t d, std::size_t k, double gamma = 0.0, double lo = -1.0,
                                         double hi = 1.0) {
    resbemf::Hyperparams hp;
    hp.k = k;
    hp.gamma = gamma;
    resbemf::FactorModel model(stars(static_cast<int>(d)), hp, ids("u", users), ids("i", items));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : model.P.data()) {
        v = dist(gen);
    }
    for (auto& v : model.Q.data()) {
        v = dist(gen);
    }
    return model;
}

// Every (user, item) pair rated, ratings uniform over 1..d.
inline std::vector<resbemf::RowRating> dense_ratings(std::mt19937_64& gen, std::size_t users, std::size_t items,
                                                     int d = 5) {
    std::uniform_int_distribution<int> score(1, d);
    std::vector<resbemf::RowRating> out;
    for (std::size_t u = 0; u < users; ++u) {
        for (std::size_t i = 0; i < items; ++i) {
            out.push_back({u, i, static_cast<double>(score(gen))});
        }
    }
    return out;
}

// Synthetic dataset with a low-rank taste structure so models have signal.
inline resbemf::RatingsDataset synthetic_dataset(std::size_t users, std::size_t items, double density,
                                                 std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> user_taste(users), item_quality(items);
    for (auto& v : user_taste) {
        v = unit(gen);
    }
    for (auto& v : item_quality) {
        v = unit(gen);
    }
    resbemf::RatingsDataset data;
    for (std::size_t u = 0; u < users; ++u) {
        for (std::size_t i = 0; i < items; ++i) {
            if (unit(gen) > density) {
                continue;
            }
            const double raw = 1.0 + 4.0 * (0.6 * item_quality[i] + 0.4 * user_taste[u]) + (unit(gen) - 0.5);
            const double value = std::min(5.0, std::max(1.0, std::round(raw)));
            data.ratings.push_back(
                {data.users.add("u" + std::to_string(u)), data.items.add("i" + std::to_string(i)), value});
            data.partition.push_back(resbemf::Partition::train);
        }
    }
    data.score_set = stars();
    return data;
}

} // namespace fixtures
