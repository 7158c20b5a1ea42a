#include "resbemf/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "resbemf/error.hpp"
#include "resbemf/parallel.hpp"
#include "resbemf/random.hpp"

namespace resbemf {

void Hyperparams::validate() const {
    if (k < 1) {
        throw std::invalid_argument("k must be at least 1");
    }
    if (m < 1) {
        throw std::invalid_argument("m (epochs) must be at least 1");
    }
    if (!(eta > 0.0) || !std::isfinite(eta)) {
        throw std::invalid_argument("eta must be positive");
    }
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw std::invalid_argument("gamma must be non-negative");
    }
}

FactorModel::FactorModel(ScoreSet scores, Hyperparams hp, IdIndex user_ids, IdIndex item_ids)
    : score_set(std::move(scores)),
      hyperparams(hp),
      users(std::move(user_ids)),
      items(std::move(item_ids)),
      P(users.size(), score_set.size(), hp.k),
      Q(items.size(), score_set.size(), hp.k) {}

void FactorModel::check() const {
    const std::size_t d = score_set.size();
    const std::size_t k = hyperparams.k;
    if (P.rows() != users.size() || Q.rows() != items.size()) {
        throw std::invalid_argument("factor row counts do not match the identifier lists");
    }
    if (P.scores() != d || Q.scores() != d || P.factors() != k || Q.factors() != k) {
        throw std::invalid_argument("factor tensor shapes disagree on d or k");
    }
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(P.data().begin(), P.data().end(), finite)
        || !std::all_of(Q.data().begin(), Q.data().end(), finite)) {
        throw std::invalid_argument("factor tensors contain non-finite entries");
    }
}

PredictionDistribution PredictionDistribution::from_probs(std::vector<double> probs, const ScoreSet& scores) {
    PredictionDistribution dist;
    dist.probs = std::move(probs);
    double mean = 0.0;
    for (std::size_t s = 0; s < dist.probs.size(); ++s) {
        if (dist.probs[s] > dist.probs[dist.mode_index]) {
            dist.mode_index = s;
        }
        mean += dist.probs[s] * scores.value(s);
    }
    dist.reliability = dist.probs[dist.mode_index];
    dist.mean = mean;
    return dist;
}

PredictionDistribution PredictionDistribution::uniform(const ScoreSet& scores) {
    const double p = 1.0 / static_cast<double>(scores.size());
    return from_probs(std::vector<double>(scores.size(), p), scores);
}

std::vector<double> softmax(std::span<const double> x) {
    if (x.empty()) {
        throw std::invalid_argument("softmax of an empty vector");
    }
    double top = -std::numeric_limits<double>::infinity();
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw std::domain_error("softmax input is not finite");
        }
        top = std::max(top, v);
    }
    std::vector<double> out(x.size());
    double total = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        out[j] = std::exp(x[j] - top);
        total += out[j];
    }
    for (auto& v : out) {
        v /= total;
    }
    return out;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    long double sum = 0.0L;
    for (std::size_t f = 0; f < a.size(); ++f) {
        sum += static_cast<long double>(a[f]) * b[f];
    }
    return static_cast<double>(sum);
}

void check_rows(const FactorModel& model, std::size_t user, std::size_t item) {
    if (user >= model.P.rows()) {
        throw ColdStartError("user row " + std::to_string(user) + " has no factors");
    }
    if (item >= model.Q.rows()) {
        throw ColdStartError("item row " + std::to_string(item) + " has no factors");
    }
}

// Logits from raw rows, without bounds checks. Used by the trainer.
void logits_into(std::span<const double> p_row, std::span<const double> q_row, std::size_t d, std::size_t k,
                 std::span<double> out) {
    for (std::size_t s = 0; s < d; ++s) {
        out[s] = dot(p_row.subspan(s * k, k), q_row.subspan(s * k, k));
    }
}

} // namespace

std::vector<double> score_logits(const FactorModel& model, std::size_t user, std::size_t item) {
    check_rows(model, user, item);
    const std::size_t d = model.score_set.size();
    std::vector<double> out(d);
    logits_into(model.P.row(user), model.Q.row(item), d, model.hyperparams.k, out);
    return out;
}

PredictionDistribution predict_distribution(const FactorModel& model, std::size_t user, std::size_t item) {
    return PredictionDistribution::from_probs(softmax(score_logits(model, user, item)), model.score_set);
}

PredictionDistribution predict_distribution(const FactorModel& model, const std::string& user_id,
                                            const std::string& item_id) {
    auto user = model.users.find(user_id);
    if (!user) {
        throw ColdStartError("unknown user '" + user_id + "'");
    }
    auto item = model.items.find(item_id);
    if (!item) {
        throw ColdStartError("unknown item '" + item_id + "'");
    }
    return predict_distribution(model, *user, *item);
}

std::optional<PointPrediction> predict(const FactorModel& model, std::size_t user, std::size_t item, double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw std::invalid_argument("theta must lie in [0, 1]");
    }
    const auto dist = predict_distribution(model, user, item);
    if (dist.reliability < theta) {
        return std::nullopt;
    }
    return PointPrediction{model.score_set.value(dist.mode_index), dist.reliability};
}

double log_likelihood(const FactorModel& model, std::span<const RowRating> ratings) {
    const double gamma = model.hyperparams.gamma;
    long double total = 0.0L;
    for (const auto& r : ratings) {
        const std::size_t target = model.score_set.index(r.value);
        const auto logits = score_logits(model, r.user, r.item);
        const double top = *std::max_element(logits.begin(), logits.end());
        long double sum = 0.0L;
        for (double x : logits) {
            sum += std::exp(static_cast<long double>(x - top));
        }
        total += static_cast<long double>(logits[target] - top) - std::log(sum);
        if (gamma > 0.0) {
            long double norm = 0.0L;
            for (double v : model.P.row(r.user)) {
                norm += static_cast<long double>(v) * v;
            }
            for (double v : model.Q.row(r.item)) {
                norm += static_cast<long double>(v) * v;
            }
            total -= 0.5L * gamma * norm;
        }
    }
    return static_cast<double>(total);
}

RatingGradient rating_gradient(const FactorModel& model, std::size_t user, std::size_t item, double rating) {
    const std::size_t target = model.score_set.index(rating);
    const std::size_t d = model.score_set.size();
    const std::size_t k = model.hyperparams.k;
    const double gamma = model.hyperparams.gamma;
    const auto probs = softmax(score_logits(model, user, item));
    const auto p_row = model.P.row(user);
    const auto q_row = model.Q.row(item);

    RatingGradient grad{std::vector<double>(d * k), std::vector<double>(d * k)};
    for (std::size_t s = 0; s < d; ++s) {
        const double coef = (s == target ? 1.0 : 0.0) - probs[s];
        for (std::size_t f = 0; f < k; ++f) {
            const std::size_t at = s * k + f;
            grad.user[at] = coef * q_row[at] - gamma * p_row[at];
            grad.item[at] = coef * p_row[at] - gamma * q_row[at];
        }
    }
    return grad;
}

namespace {

// Compressed adjacency: for each row, the (other row, score index) pairs.
struct Adjacency
{
    std::vector<std::size_t> offsets;
    std::vector<std::size_t> other;
    std::vector<std::size_t> score;
};

Adjacency build_adjacency(std::size_t rows, std::span<const RowRating> ratings, const ScoreSet& scores,
                          bool by_user) {
    Adjacency adj;
    adj.offsets.assign(rows + 1, 0);
    for (const auto& r : ratings) {
        ++adj.offsets[(by_user ? r.user : r.item) + 1];
    }
    for (std::size_t j = 0; j < rows; ++j) {
        adj.offsets[j + 1] += adj.offsets[j];
    }
    adj.other.resize(ratings.size());
    adj.score.resize(ratings.size());
    std::vector<std::size_t> cursor(adj.offsets.begin(), adj.offsets.end() - 1);
    for (const auto& r : ratings) {
        const std::size_t row = by_user ? r.user : r.item;
        const std::size_t at = cursor[row]++;
        adj.other[at] = by_user ? r.item : r.user;
        adj.score[at] = scores.index(r.value);
    }
    return adj;
}

// One half-epoch: every row of `updated` takes a gradient step against the
// frozen `fixed` tensor. Returns the number of ratings accumulated.
std::size_t ascend(FactorTensor& updated, const FactorTensor& fixed, const Adjacency& adj, double gamma,
                   double eta, std::size_t threads) {
    const std::size_t d = updated.scores();
    const std::size_t k = updated.factors();
    parallel_for(updated.rows(), threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> delta(d * k);
        std::vector<double> logits(d);
        for (std::size_t row = begin; row < end; ++row) {
            std::fill(delta.begin(), delta.end(), 0.0);
            auto own = updated.row(row);
            for (std::size_t at = adj.offsets[row]; at < adj.offsets[row + 1]; ++at) {
                const auto other = fixed.row(adj.other[at]);
                logits_into(own, other, d, k, logits);
                const auto probs = softmax(logits);
                for (std::size_t s = 0; s < d; ++s) {
                    const double coef = (s == adj.score[at] ? 1.0 : 0.0) - probs[s];
                    for (std::size_t f = 0; f < k; ++f) {
                        delta[s * k + f] += coef * other[s * k + f] - gamma * own[s * k + f];
                    }
                }
            }
            for (std::size_t j = 0; j < d * k; ++j) {
                own[j] += eta * delta[j];
            }
        }
    });
    return adj.other.size();
}

bool all_finite(const FactorTensor& t) {
    return std::all_of(t.data().begin(), t.data().end(), [](double v) { return std::isfinite(v); });
}

} // namespace

FactorModel fit(const ScoreSet& scores, const IdIndex& users, const IdIndex& items,
                std::span<const RowRating> train, const Hyperparams& hp, const FitOptions& options) {
    hp.validate();
    if (train.empty()) {
        throw std::invalid_argument("training partition is empty");
    }
    for (const auto& r : train) {
        if (r.user >= users.size() || r.item >= items.size()) {
            throw std::invalid_argument("training rating refers to an unknown user or item row");
        }
        scores.index(r.value);
    }

    FactorModel model(scores, hp, users, items);
    Rng rng(hp.seed);
    for (auto& v : model.P.data()) {
        v = rng.uniform01();
    }
    for (auto& v : model.Q.data()) {
        v = rng.uniform01();
    }

    const auto by_user = build_adjacency(users.size(), train, scores, true);
    const auto by_item = build_adjacency(items.size(), train, scores, false);
    if (options.on_epoch) {
        options.on_epoch(EpochReport{0, 0, 0}, model);
    }

    for (std::size_t epoch = 1; epoch <= hp.m; ++epoch) {
        EpochReport report{epoch, 0, 0};
        const auto diverged = [epoch](const char* what) {
            return TrainingError(std::string(what) + " factors became non-finite in epoch " + std::to_string(epoch));
        };
        try {
            report.user_updates = ascend(model.P, model.Q, by_user, hp.gamma, hp.eta, options.threads);
        } catch (const std::domain_error&) {
            throw diverged("user");
        }
        if (!all_finite(model.P)) {
            throw diverged("user");
        }
        try {
            report.item_updates = ascend(model.Q, model.P, by_item, hp.gamma, hp.eta, options.threads);
        } catch (const std::domain_error&) {
            throw diverged("item");
        }
        if (!all_finite(model.Q)) {
            throw diverged("item");
        }
        if (options.on_epoch) {
            options.on_epoch(report, model);
        }
    }
    return model;
}

} // namespace resbemf
