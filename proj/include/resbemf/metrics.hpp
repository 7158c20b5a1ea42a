#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "resbemf/dataset.hpp"
#include "resbemf/model.hpp"
#include "resbemf/pmf.hpp"
#include "resbemf/score_set.hpp"

namespace resbemf {

/// One test rating together with what a model says about it. Every metric
/// below is a pure function of a list of these.
struct ScoredRating
{
    std::size_t user = 0;  // dataset indices
    std::size_t item = 0;
    double rating = 0.0;
    double predicted = 0.0;        // value used for error and ranking
    double predicted_class = 0.0;  // score used for accuracy
    double reliability = 0.0;
    double mean = 0.0;             // probability-weighted mean, tie-break for ranking
    bool cold_start = false;
};

/// ResBeMF scoring by the mode criterion. Users or items without factors get
/// the uniform distribution (lowest score, reliability 1/d) and are flagged.
std::vector<ScoredRating> score_ratings(const FactorModel& model, const RatingsDataset& data,
                                        std::span<const Rating> ratings);

/// PMF scoring: clamped dot product, rounded to the nearest score for
/// accuracy, reliability fixed at 1. Cold start falls back to the training mean.
std::vector<ScoredRating> score_ratings(const PmfModel& model, const RatingsDataset& data,
                                        std::span<const Rating> ratings);

/// theta_k = k / (N - 1), k = 0..N-1.
class ThresholdGrid
{
public:
    explicit ThresholdGrid(std::size_t n_points);

    std::size_t size() const { return thetas_.size(); }
    std::span<const double> thetas() const& { return thetas_; }
    // A span into a temporary grid would dangle, e.g. in a range-for.
    std::span<const double> thetas() const&& = delete;

private:
    std::vector<double> thetas_;
};

// Per-user means over predictions with reliability >= theta, then the mean
// over users that have at least one such prediction. Absent when no user does.
std::optional<double> mae_at(std::span<const ScoredRating> scored, const ScoreSet& scores, double theta);
std::optional<double> accuracy_at(std::span<const ScoredRating> scored, double theta);

// Mean over users of the fraction of their test ratings that pass theta.
// Absent only for an empty list.
std::optional<double> coverage_at(std::span<const ScoredRating> scored, double theta);

std::size_t predicted_count(std::span<const ScoredRating> scored, double theta);

struct RankingKey
{
    double mode;
    double mean;
    std::size_t item;
};

RankingKey ranking_key(const PredictionDistribution& dist, const ScoreSet& scores, std::size_t item);
RankingKey ranking_key(const ScoredRating& scored);

/// Higher mode first, then higher mean, then lower item index.
bool ranks_before(const RankingKey& a, const RankingKey& b);

/// Mean average precision over each user's top `n_top` test items passing
/// theta; an item is relevant when its rating is at least `tau`. Precision is
/// taken at each relevant rank. Absent when no user has a rankable item.
std::optional<double> map_at(std::span<const ScoredRating> scored, double tau, std::size_t n_top, double theta);

struct AggregateObjectives
{
    double one_minus_mae = 0.0;
    double coverage = 0.0;
};

/// Plain means over the grid of (1 - MAE^theta) and coverage^theta. A grid point
/// with no predictions reuses the MAE of the previous point.
AggregateObjectives aggregate(std::span<const ScoredRating> scored, const ScoreSet& scores,
                              const ThresholdGrid& grid);

struct MapParams
{
    std::size_t n_top = 10;
    double tau = 0.0;
    double theta = 0.0;
};

struct EvaluationRow
{
    double theta;
    std::optional<double> mae;
    std::optional<double> accuracy;
    std::optional<double> coverage;
    std::size_t n_predicted;
};

struct EvaluationReport
{
    std::vector<EvaluationRow> rows;
    AggregateObjectives aggregate;
    std::optional<double> map;
    MapParams map_params;
    std::size_t n_ratings = 0;
    std::size_t n_cold_start = 0;
};

EvaluationReport evaluate(std::span<const ScoredRating> scored, const ScoreSet& scores, const ThresholdGrid& grid,
                          const MapParams& map_params);

/// theta,mae,accuracy,coverage,n_predicted with six decimals; absent values are empty.
void write_metrics_csv(std::ostream& out, const EvaluationReport& report);
nlohmann::ordered_json summary_json(const EvaluationReport& report);

} // namespace resbemf
