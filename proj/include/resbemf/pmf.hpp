#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "resbemf/ids.hpp"
#include "resbemf/model.hpp"
#include "resbemf/score_set.hpp"

namespace resbemf {

// Probabilistic matrix factorization: r_ui ~ P_u . Q_i, fit by per-rating
// SGD on the L2-regularized squared error. Used as the regression baseline.
struct PmfModel
{
    ScoreSet score_set;
    Hyperparams hyperparams;
    IdIndex users;
    IdIndex items;
    std::vector<double> P;  // users x k
    std::vector<double> Q;  // items x k
    double global_mean = 0.0;  // cold-start fallback

    PmfModel(ScoreSet scores, Hyperparams hp, IdIndex user_ids, IdIndex item_ids);

    std::span<const double> user_vec(std::size_t u) const {
        return std::span{P}.subspan(u * hyperparams.k, hyperparams.k);
    }
    std::span<const double> item_vec(std::size_t i) const {
        return std::span{Q}.subspan(i * hyperparams.k, hyperparams.k);
    }
};

struct PmfFitOptions
{
    std::function<void(std::size_t epoch, const PmfModel&)> on_epoch;
};

PmfModel pmf_fit(const ScoreSet& scores, const IdIndex& users, const IdIndex& items,
                 std::span<const RowRating> train, const Hyperparams& hp, const PmfFitOptions& options = {});

// sum (r - P_u.Q_i)^2 + gamma * (|P|^2 + |Q|^2)
double pmf_loss(const PmfModel& model, std::span<const RowRating> ratings);

struct PmfGradient
{
    std::vector<double> P;
    std::vector<double> Q;
};

// Full gradient of pmf_loss() with respect to every entry of P and Q.
PmfGradient pmf_loss_gradient(const PmfModel& model, std::span<const RowRating> ratings);

// Raw dot product; throws ColdStartError for unknown rows.
double pmf_dot(const PmfModel& model, std::size_t user, std::size_t item);

// Dot product clamped to [min S, max S].
double pmf_predict(const PmfModel& model, std::size_t user, std::size_t item);

// The score nearest to a real-valued prediction, ties rounding up.
double pmf_class(const PmfModel& model, double prediction);

} // namespace resbemf
