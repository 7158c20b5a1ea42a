#pragma once

// Brute-force reference computations used only by the tests. They address
// the raw parameter arrays directly and follow the textbook formulas without
// any of the library's numerical shortcuts.

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "resbemf/metrics.hpp"
#include "resbemf/model.hpp"
#include "resbemf/search.hpp"

namespace oracle {

inline std::vector<double> softmax(const std::vector<double>& x) {
    long double total = 0.0L;
    for (double v : x) {
        total += std::exp(static_cast<long double>(v));
    }
    std::vector<double> out;
    for (double v : x) {
        out.push_back(static_cast<double>(std::exp(static_cast<long double>(v)) / total));
    }
    return out;
}

inline std::vector<double> logits(const resbemf::FactorModel& m, std::size_t u, std::size_t i) {
    const std::size_t d = m.score_set.size();
    const std::size_t k = m.hyperparams.k;
    std::vector<double> out(d, 0.0);
    for (std::size_t s = 0; s < d; ++s) {
        for (std::size_t f = 0; f < k; ++f) {
            out[s] += m.P.data()[(u * d + s) * k + f] * m.Q.data()[(i * d + s) * k + f];
        }
    }
    return out;
}

inline double log_likelihood(const resbemf::FactorModel& m, const std::vector<resbemf::RowRating>& ratings) {
    const std::size_t d = m.score_set.size();
    const std::size_t k = m.hyperparams.k;
    double total = 0.0;
    for (const auto& r : ratings) {
        const auto p = softmax(logits(m, r.user, r.item));
        std::size_t target = 0;
        while (m.score_set.value(target) != r.value) {
            ++target;
        }
        total += std::log(p[target]);
        double norm = 0.0;
        for (std::size_t j = 0; j < d * k; ++j) {
            norm += m.P.data()[r.user * d * k + j] * m.P.data()[r.user * d * k + j];
            norm += m.Q.data()[r.item * d * k + j] * m.Q.data()[r.item * d * k + j];
        }
        total -= 0.5 * m.hyperparams.gamma * norm;
    }
    return total;
}

// Central difference of f with respect to `param`, restoring it afterwards.
inline double central_difference(double& param, double h, const std::function<double()>& f) {
    const double saved = param;
    param = saved + h;
    const double up = f();
    param = saved - h;
    const double down = f();
    param = saved;
    return (up - down) / (2.0 * h);
}

// ||a - b|| / max(||a||, ||b||), or the absolute difference when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        diff += (a[j] - b[j]) * (a[j] - b[j]);
        na += a[j] * a[j];
        nb += b[j] * b[j];
    }
    const double scale = std::max(std::sqrt(na), std::sqrt(nb));
    return scale < 1e-12 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

struct MetricValues
{
    std::optional<double> mae, accuracy, coverage, map;
};

// Direct enumeration of every metric for one threshold.
inline MetricValues metrics(const std::vector<resbemf::ScoredRating>& scored, double score_min, double score_max,
                            double theta, double tau, std::size_t n_top) {
    std::set<std::size_t> users;
    for (const auto& s : scored) {
        users.insert(s.user);
    }
    MetricValues out;
    double mae_sum = 0, acc_sum = 0, cov_sum = 0, ap_sum = 0;
    std::size_t mae_users = 0, ap_users = 0;
    for (std::size_t u : users) {
        std::vector<resbemf::ScoredRating> all, kept;
        for (const auto& s : scored) {
            if (s.user == u) {
                all.push_back(s);
                if (s.reliability >= theta) {
                    kept.push_back(s);
                }
            }
        }
        cov_sum += double(kept.size()) / double(all.size());
        if (kept.empty()) {
            continue;
        }
        double err = 0, hits = 0;
        for (const auto& s : kept) {
            err += std::fabs(s.rating - s.predicted) / (score_max - score_min);
            hits += s.predicted_class == s.rating ? 1 : 0;
        }
        mae_sum += err / double(kept.size());
        acc_sum += hits / double(kept.size());
        ++mae_users;

        // Selection sort by (mode desc, mean desc, item asc).
        for (std::size_t a = 0; a < kept.size(); ++a) {
            for (std::size_t b = a + 1; b < kept.size(); ++b) {
                const auto& x = kept[a];
                const auto& y = kept[b];
                const bool y_first = y.predicted > x.predicted
                    || (y.predicted == x.predicted && (y.mean > x.mean || (y.mean == x.mean && y.item < x.item)));
                if (y_first) {
                    std::swap(kept[a], kept[b]);
                }
            }
        }
        const std::size_t n = std::min(n_top, kept.size());
        double relevant = 0, ap = 0;
        for (std::size_t rank = 1; rank <= n; ++rank) {
            double rel_upto = 0;
            for (std::size_t q = 0; q < rank; ++q) {
                rel_upto += kept[q].rating >= tau ? 1 : 0;
            }
            if (kept[rank - 1].rating >= tau) {
                ap += rel_upto / double(rank);
                relevant += 1;
            }
        }
        ap_sum += relevant > 0 ? ap / relevant : 0.0;
        ++ap_users;
    }
    if (!users.empty()) {
        out.coverage = cov_sum / double(users.size());
    }
    if (mae_users > 0) {
        out.mae = mae_sum / double(mae_users);
        out.accuracy = acc_sum / double(mae_users);
    }
    if (ap_users > 0) {
        out.map = ap_sum / double(ap_users);
    }
    return out;
}

// O(n^2) dominance filter; returns input positions of non-dominated points.
inline std::set<std::size_t> pareto_positions(const std::vector<resbemf::Objectives>& points) {
    std::set<std::size_t> keep;
    for (std::size_t q = 0; q < points.size(); ++q) {
        bool dominated = false;
        for (std::size_t p = 0; p < points.size() && !dominated; ++p) {
            const auto& a = points[p];
            const auto& b = points[q];
            dominated = a.coverage >= b.coverage && a.one_minus_mae >= b.one_minus_mae
                && (a.coverage > b.coverage || a.one_minus_mae > b.one_minus_mae);
        }
        if (!dominated) {
            keep.insert(q);
        }
    }
    return keep;
}

} // namespace oracle
