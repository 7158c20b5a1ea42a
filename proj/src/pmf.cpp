#include "resbemf/pmf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "resbemf/error.hpp"
#include "resbemf/random.hpp"

namespace resbemf {

PmfModel::PmfModel(ScoreSet scores, Hyperparams hp, IdIndex user_ids, IdIndex item_ids)
    : score_set(std::move(scores)),
      hyperparams(hp),
      users(std::move(user_ids)),
      items(std::move(item_ids)),
      P(users.size() * hp.k, 0.0),
      Q(items.size() * hp.k, 0.0) {}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    long double sum = 0.0L;
    for (std::size_t f = 0; f < a.size(); ++f) {
        sum += static_cast<long double>(a[f]) * b[f];
    }
    return static_cast<double>(sum);
}

} // namespace

PmfModel pmf_fit(const ScoreSet& scores, const IdIndex& users, const IdIndex& items,
                 std::span<const RowRating> train, const Hyperparams& hp, const PmfFitOptions& options) {
    hp.validate();
    if (train.empty()) {
        throw std::invalid_argument("training partition is empty");
    }
    PmfModel model(scores, hp, users, items);
    const std::size_t k = hp.k;

    // Start with dot products near the mean rating rather than near zero.
    long double total = 0.0L;
    for (const auto& r : train) {
        if (r.user >= users.size() || r.item >= items.size()) {
            throw std::invalid_argument("training rating refers to an unknown user or item row");
        }
        total += r.value;
    }
    model.global_mean = static_cast<double>(total / static_cast<long double>(train.size()));
    const double scale = 2.0 * std::sqrt(std::max(model.global_mean, 0.0) / static_cast<double>(k));
    Rng rng(hp.seed);
    for (auto& v : model.P) {
        v = scale * rng.uniform01();
    }
    for (auto& v : model.Q) {
        v = scale * rng.uniform01();
    }

    std::vector<double> p_old(k);
    for (std::size_t epoch = 1; epoch <= hp.m; ++epoch) {
        for (const auto& r : train) {
            auto pu = std::span{model.P}.subspan(r.user * k, k);
            auto qi = std::span{model.Q}.subspan(r.item * k, k);
            const double err = r.value - dot(pu, qi);
            std::copy(pu.begin(), pu.end(), p_old.begin());
            for (std::size_t f = 0; f < k; ++f) {
                pu[f] += hp.eta * (err * qi[f] - hp.gamma * pu[f]);
                qi[f] += hp.eta * (err * p_old[f] - hp.gamma * qi[f]);
            }
        }
        const auto finite = [](double v) { return std::isfinite(v); };
        if (!std::all_of(model.P.begin(), model.P.end(), finite)
            || !std::all_of(model.Q.begin(), model.Q.end(), finite)) {
            throw TrainingError("PMF factors became non-finite in epoch " + std::to_string(epoch));
        }
        if (options.on_epoch) {
            options.on_epoch(epoch, model);
        }
    }
    return model;
}

double pmf_loss(const PmfModel& model, std::span<const RowRating> ratings) {
    long double loss = 0.0L;
    for (const auto& r : ratings) {
        const long double err = r.value - pmf_dot(model, r.user, r.item);
        loss += err * err;
    }
    long double norm = 0.0L;
    for (double v : model.P) {
        norm += static_cast<long double>(v) * v;
    }
    for (double v : model.Q) {
        norm += static_cast<long double>(v) * v;
    }
    return static_cast<double>(loss + model.hyperparams.gamma * norm);
}

PmfGradient pmf_loss_gradient(const PmfModel& model, std::span<const RowRating> ratings) {
    const std::size_t k = model.hyperparams.k;
    const double gamma = model.hyperparams.gamma;
    PmfGradient grad{std::vector<double>(model.P.size()), std::vector<double>(model.Q.size())};
    for (std::size_t j = 0; j < model.P.size(); ++j) {
        grad.P[j] = 2.0 * gamma * model.P[j];
    }
    for (std::size_t j = 0; j < model.Q.size(); ++j) {
        grad.Q[j] = 2.0 * gamma * model.Q[j];
    }
    for (const auto& r : ratings) {
        const double err = r.value - pmf_dot(model, r.user, r.item);
        for (std::size_t f = 0; f < k; ++f) {
            grad.P[r.user * k + f] -= 2.0 * err * model.Q[r.item * k + f];
            grad.Q[r.item * k + f] -= 2.0 * err * model.P[r.user * k + f];
        }
    }
    return grad;
}

double pmf_dot(const PmfModel& model, std::size_t user, std::size_t item) {
    if (user >= model.users.size()) {
        throw ColdStartError("user row " + std::to_string(user) + " has no factors");
    }
    if (item >= model.items.size()) {
        throw ColdStartError("item row " + std::to_string(item) + " has no factors");
    }
    return dot(model.user_vec(user), model.item_vec(item));
}

double pmf_predict(const PmfModel& model, std::size_t user, std::size_t item) {
    return std::clamp(pmf_dot(model, user, item), model.score_set.min(), model.score_set.max());
}

double pmf_class(const PmfModel& model, double prediction) {
    return model.score_set.value(model.score_set.nearest(prediction));
}

} // namespace resbemf
