#include "resbemf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>

#include "resbemf/error.hpp"

namespace resbemf {

namespace {

// Dataset index -> model row, or nullopt for entities the model never saw.
std::vector<std::optional<std::size_t>> rows_for(const IdIndex& dataset_ids, const IdIndex& model_ids) {
    std::vector<std::optional<std::size_t>> rows(dataset_ids.size());
    for (std::size_t j = 0; j < dataset_ids.size(); ++j) {
        rows[j] = model_ids.find(dataset_ids.id(j));
    }
    return rows;
}

} // namespace

std::vector<ScoredRating> score_ratings(const FactorModel& model, const RatingsDataset& data,
                                        std::span<const Rating> ratings) {
    const auto user_rows = rows_for(data.users, model.users);
    const auto item_rows = rows_for(data.items, model.items);
    const auto& scores = model.score_set;
    std::vector<ScoredRating> out;
    out.reserve(ratings.size());
    for (const auto& r : ratings) {
        const auto u = user_rows[r.user];
        const auto i = item_rows[r.item];
        const bool cold = !u || !i;
        const auto dist = cold ? PredictionDistribution::uniform(scores) : predict_distribution(model, *u, *i);
        const double mode = scores.value(dist.mode_index);
        out.push_back({r.user, r.item, r.value, mode, mode, dist.reliability, dist.mean, cold});
    }
    return out;
}

std::vector<ScoredRating> score_ratings(const PmfModel& model, const RatingsDataset& data,
                                        std::span<const Rating> ratings) {
    const auto user_rows = rows_for(data.users, model.users);
    const auto item_rows = rows_for(data.items, model.items);
    const auto& scores = model.score_set;
    std::vector<ScoredRating> out;
    out.reserve(ratings.size());
    for (const auto& r : ratings) {
        const auto u = user_rows[r.user];
        const auto i = item_rows[r.item];
        const bool cold = !u || !i;
        const double value = cold ? std::clamp(model.global_mean, scores.min(), scores.max())
                                  : pmf_predict(model, *u, *i);
        out.push_back({r.user, r.item, r.value, value, pmf_class(model, value), 1.0, value, cold});
    }
    return out;
}

ThresholdGrid::ThresholdGrid(std::size_t n_points) {
    if (n_points < 2) {
        throw std::invalid_argument("threshold grid needs at least two points");
    }
    thetas_.resize(n_points);
    for (std::size_t k = 0; k < n_points; ++k) {
        thetas_[k] = static_cast<double>(k) / static_cast<double>(n_points - 1);
    }
}

namespace {

struct UserTally
{
    std::size_t total = 0;
    std::size_t passed = 0;
    double error_sum = 0.0;
    std::size_t exact = 0;
};

std::map<std::size_t, UserTally> tally(std::span<const ScoredRating> scored, const ScoreSet* scores, double theta) {
    std::map<std::size_t, UserTally> users;
    for (const auto& s : scored) {
        auto& t = users[s.user];
        ++t.total;
        if (s.reliability >= theta) {
            ++t.passed;
            if (scores) {
                t.error_sum += std::abs(s.rating - s.predicted) / scores->range();
            }
            if (s.predicted_class == s.rating) {
                ++t.exact;
            }
        }
    }
    return users;
}

template<typename PerUser>
std::optional<double> mean_over_predicting_users(const std::map<std::size_t, UserTally>& users, PerUser per_user) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [user, t] : users) {
        if (t.passed > 0) {
            sum += per_user(t);
            ++n;
        }
    }
    if (n == 0) {
        return std::nullopt;
    }
    return sum / static_cast<double>(n);
}

} // namespace

std::optional<double> mae_at(std::span<const ScoredRating> scored, const ScoreSet& scores, double theta) {
    return mean_over_predicting_users(tally(scored, &scores, theta), [](const UserTally& t) {
        return t.error_sum / static_cast<double>(t.passed);
    });
}

std::optional<double> accuracy_at(std::span<const ScoredRating> scored, double theta) {
    return mean_over_predicting_users(tally(scored, nullptr, theta), [](const UserTally& t) {
        return static_cast<double>(t.exact) / static_cast<double>(t.passed);
    });
}

std::optional<double> coverage_at(std::span<const ScoredRating> scored, double theta) {
    const auto users = tally(scored, nullptr, theta);
    if (users.empty()) {
        return std::nullopt;
    }
    double sum = 0.0;
    for (const auto& [user, t] : users) {
        sum += static_cast<double>(t.passed) / static_cast<double>(t.total);
    }
    return sum / static_cast<double>(users.size());
}

std::size_t predicted_count(std::span<const ScoredRating> scored, double theta) {
    return static_cast<std::size_t>(
        std::count_if(scored.begin(), scored.end(), [theta](const auto& s) { return s.reliability >= theta; }));
}

RankingKey ranking_key(const PredictionDistribution& dist, const ScoreSet& scores, std::size_t item) {
    return {scores.value(dist.mode_index), dist.mean, item};
}

RankingKey ranking_key(const ScoredRating& scored) {
    return {scored.predicted, scored.mean, scored.item};
}

bool ranks_before(const RankingKey& a, const RankingKey& b) {
    if (a.mode != b.mode) {
        return a.mode > b.mode;
    }
    if (a.mean != b.mean) {
        return a.mean > b.mean;
    }
    return a.item < b.item;
}

std::optional<double> map_at(std::span<const ScoredRating> scored, double tau, std::size_t n_top, double theta) {
    if (n_top < 1) {
        throw std::invalid_argument("n_top must be at least 1");
    }
    std::map<std::size_t, std::vector<const ScoredRating*>> candidates;
    for (const auto& s : scored) {
        if (s.reliability >= theta) {
            candidates[s.user].push_back(&s);
        }
    }
    if (candidates.empty()) {
        return std::nullopt;
    }
    double sum = 0.0;
    for (auto& [user, list] : candidates) {
        std::sort(list.begin(), list.end(), [](const ScoredRating* a, const ScoredRating* b) {
            return ranks_before(ranking_key(*a), ranking_key(*b));
        });
        const std::size_t top = std::min(n_top, list.size());
        std::size_t hits = 0;
        double precision_sum = 0.0;
        for (std::size_t rank = 1; rank <= top; ++rank) {
            if (list[rank - 1]->rating >= tau) {
                ++hits;
                precision_sum += static_cast<double>(hits) / static_cast<double>(rank);
            }
        }
        sum += hits == 0 ? 0.0 : precision_sum / static_cast<double>(hits);
    }
    return sum / static_cast<double>(candidates.size());
}

AggregateObjectives aggregate(std::span<const ScoredRating> scored, const ScoreSet& scores,
                              const ThresholdGrid& grid) {
    if (scored.empty()) {
        throw std::invalid_argument("cannot aggregate metrics over an empty test set");
    }
    std::optional<double> last_mae;
    double quality = 0.0;
    double coverage = 0.0;
    for (double theta : grid.thetas()) {
        if (auto mae = mae_at(scored, scores, theta)) {
            last_mae = mae;
        }
        // theta = 0 always has predictions, so last_mae is set from the first point on.
        quality += 1.0 - last_mae.value();
        coverage += coverage_at(scored, theta).value();
    }
    const auto n = static_cast<double>(grid.size());
    return {quality / n, coverage / n};
}

EvaluationReport evaluate(std::span<const ScoredRating> scored, const ScoreSet& scores, const ThresholdGrid& grid,
                          const MapParams& map_params) {
    EvaluationReport report;
    for (double theta : grid.thetas()) {
        report.rows.push_back({theta, mae_at(scored, scores, theta), accuracy_at(scored, theta),
                               coverage_at(scored, theta), predicted_count(scored, theta)});
    }
    report.aggregate = aggregate(scored, scores, grid);
    report.map = map_at(scored, map_params.tau, map_params.n_top, map_params.theta);
    report.map_params = map_params;
    report.n_ratings = scored.size();
    report.n_cold_start = static_cast<std::size_t>(
        std::count_if(scored.begin(), scored.end(), [](const auto& s) { return s.cold_start; }));
    return report;
}

namespace {

std::string fixed6(const std::optional<double>& v) {
    if (!v) {
        return {};
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
}

} // namespace

void write_metrics_csv(std::ostream& out, const EvaluationReport& report) {
    out << "theta,mae,accuracy,coverage,n_predicted\n";
    for (const auto& row : report.rows) {
        out << fixed6(row.theta) << ',' << fixed6(row.mae) << ',' << fixed6(row.accuracy) << ','
            << fixed6(row.coverage) << ',' << row.n_predicted << '\n';
    }
}

nlohmann::ordered_json summary_json(const EvaluationReport& report) {
    nlohmann::ordered_json j;
    j["n_ratings"] = report.n_ratings;
    j["n_cold_start"] = report.n_cold_start;
    j["grid_n"] = report.rows.size();
    j["one_minus_mae"] = report.aggregate.one_minus_mae;
    j["coverage"] = report.aggregate.coverage;
    j["map"] = report.map ? nlohmann::ordered_json(*report.map) : nlohmann::ordered_json(nullptr);
    j["map_n_top"] = report.map_params.n_top;
    j["map_tau"] = report.map_params.tau;
    j["map_theta"] = report.map_params.theta;
    return j;
}

} // namespace resbemf
