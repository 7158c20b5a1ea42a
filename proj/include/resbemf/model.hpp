#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "resbemf/ids.hpp"
#include "resbemf/score_set.hpp"

namespace resbemf {

struct Hyperparams
{
    std::size_t k = 2;     // latent dimensionality
    double gamma = 0.0;    // L2 regularization
    double eta = 0.001;    // learning rate
    std::size_t m = 1;     // epochs
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument unless k >= 1, m >= 1, eta > 0, gamma >= 0.
    void validate() const;

    bool operator==(const Hyperparams&) const = default;
};

/// Row-major rows x scores x factors tensor.
class FactorTensor
{
public:
    FactorTensor() = default;
    FactorTensor(std::size_t rows, std::size_t scores, std::size_t factors)
        : rows_(rows), scores_(scores), factors_(factors), data_(rows * scores * factors, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t scores() const { return scores_; }
    std::size_t factors() const { return factors_; }

    std::span<double> row(std::size_t r) {
        return std::span{data_}.subspan(r * scores_ * factors_, scores_ * factors_);
    }
    std::span<const double> row(std::size_t r) const {
        return std::span{data_}.subspan(r * scores_ * factors_, scores_ * factors_);
    }
    std::span<double> vec(std::size_t r, std::size_t s) {
        return std::span{data_}.subspan((r * scores_ + s) * factors_, factors_);
    }
    std::span<const double> vec(std::size_t r, std::size_t s) const {
        return std::span{data_}.subspan((r * scores_ + s) * factors_, factors_);
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const FactorTensor&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t scores_ = 0;
    std::size_t factors_ = 0;
    std::vector<double> data_;
};

/// A fitted ResBeMF model: one latent vector per (user, score) in P and per
/// (item, score) in Q.
struct FactorModel
{
    ScoreSet score_set;
    Hyperparams hyperparams;
    IdIndex users;
    IdIndex items;
    FactorTensor P;
    FactorTensor Q;

    /// Zero-initialised model with the given identifiers.
    FactorModel(ScoreSet scores, Hyperparams hp, IdIndex user_ids, IdIndex item_ids);

    /// Throws std::invalid_argument when shapes disagree or an entry is non-finite.
    void check() const;
};

struct PredictionDistribution
{
    std::vector<double> probs;
    std::size_t mode_index = 0;
    double reliability = 0.0;
    double mean = 0.0;

    /// Derives mode, reliability and mean from `probs`. Ties go to the lowest index.
    static PredictionDistribution from_probs(std::vector<double> probs, const ScoreSet& scores);
    static PredictionDistribution uniform(const ScoreSet& scores);
};

/// A rating addressed by model row indices.
struct RowRating
{
    std::size_t user;
    std::size_t item;
    double value;
};

/// Max-shifted softmax. Throws std::domain_error on non-finite input.
std::vector<double> softmax(std::span<const double> x);

/// Per-score dot products P_u^s . Q_i^s, accumulated in long double.
std::vector<double> score_logits(const FactorModel& model, std::size_t user, std::size_t item);

/// Throws ColdStartError when a row is out of range.
PredictionDistribution predict_distribution(const FactorModel& model, std::size_t user, std::size_t item);

/// Looks users and items up by external identifier.
PredictionDistribution predict_distribution(const FactorModel& model, const std::string& user_id,
                                            const std::string& item_id);

struct PointPrediction
{
    double value;
    double reliability;
};

/// Mode-criterion prediction. Absent when the reliability falls below `theta`.
std::optional<PointPrediction> predict(const FactorModel& model, std::size_t user, std::size_t item, double theta);

/// Penalized log-likelihood of `ratings`:
///
///   sum log softmax_r(P_u . Q_i)  -  gamma/2 * sum_(u,i,r) (|P_u|^2 + |Q_i|^2)
///
/// The penalty is charged once per rating, so a user with n ratings pays n
/// times its squared norm. This is the objective whose gradient the trainer
/// follows, since the trainer also accumulates the decay once per rating.
double log_likelihood(const FactorModel& model, std::span<const RowRating> ratings);

/// Gradient of one rating's term of log_likelihood() with respect to P_u and Q_i.
struct RatingGradient
{
    std::vector<double> user;  // d x k, score-major
    std::vector<double> item;  // d x k
};

RatingGradient rating_gradient(const FactorModel& model, std::size_t user, std::size_t item, double rating);

struct EpochReport
{
    std::size_t epoch;               // 0 for the initial parameters
    std::size_t user_updates;        // ratings accumulated in the user phase
    std::size_t item_updates;        // ratings accumulated in the item phase
};

struct FitOptions
{
    std::size_t threads = 1;
    /// Called with the initial parameters (epoch 0) and after every epoch.
    std::function<void(const EpochReport&, const FactorModel&)> on_epoch;
};

/// Semi-batch gradient ascent on log_likelihood(). Each epoch first updates
/// every user against frozen item factors, then every item against the
/// freshly updated user factors. Factors start from U(0, 1) drawn from
/// `hp.seed`, users before items, in row order.
///
/// Throws std::invalid_argument for empty input or bad hyperparameters and
/// TrainingError when a parameter becomes non-finite.
FactorModel fit(const ScoreSet& scores, const IdIndex& users, const IdIndex& items,
                std::span<const RowRating> train, const Hyperparams& hp, const FitOptions& options = {});

} // namespace resbemf
