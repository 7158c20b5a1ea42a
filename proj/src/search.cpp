#include "resbemf/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>

#include "resbemf/error.hpp"
#include "resbemf/parallel.hpp"
#include "resbemf/pmf.hpp"
#include "resbemf/random.hpp"

namespace resbemf {

Hyperparams SearchSpace::at(std::size_t index) const {
    Hyperparams hp;
    hp.m = m.at(index % m.size());
    index /= m.size();
    hp.eta = eta.at(index % eta.size());
    index /= eta.size();
    hp.gamma = gamma.at(index % gamma.size());
    index /= gamma.size();
    hp.k = k.at(index);
    return hp;
}

void SearchSpace::validate() const {
    if (k.empty() || gamma.empty() || eta.empty() || m.empty()) {
        throw InputError("search space grids must all be non-empty");
    }
    if (!(search_fraction > 0.0 && search_fraction <= 1.0)) {
        throw InputError("search_fraction must lie in (0, 1]");
    }
    for (std::size_t j = 0; j < size(); ++j) {
        try {
            at(j).validate();
        } catch (const std::invalid_argument& e) {
            throw InputError(std::string("search space: ") + e.what());
        }
    }
}

SearchSpace SearchSpace::from_json(const nlohmann::json& j) {
    SearchSpace space;
    try {
        space.k = j.at("k").get<std::vector<std::size_t>>();
        space.gamma = j.at("gamma").get<std::vector<double>>();
        space.eta = j.at("eta").get<std::vector<double>>();
        space.m = j.at("m").get<std::vector<std::size_t>>();
        space.search_fraction = j.value("search_fraction", 1.0);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("invalid search space: ") + e.what());
    }
    space.validate();
    return space;
}

bool dominates(const Objectives& a, const Objectives& b) {
    return a.coverage >= b.coverage && a.one_minus_mae >= b.one_minus_mae
        && (a.coverage > b.coverage || a.one_minus_mae > b.one_minus_mae);
}

std::vector<Hyperparams> sample_candidates(const SearchSpace& space, std::uint64_t seed) {
    space.validate();
    const std::size_t total = space.size();
    const auto wanted = static_cast<std::size_t>(std::ceil(space.search_fraction * static_cast<double>(total) - 1e-9));
    const std::size_t count = std::clamp<std::size_t>(wanted, 1, total);
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    if (count < total) {
        Rng rng(seed);
        rng.shuffle(std::span{order});
        order.resize(count);
        std::sort(order.begin(), order.end());
    }
    std::vector<Hyperparams> out;
    out.reserve(count);
    for (std::size_t index : order) {
        out.push_back(space.at(index));
    }
    return out;
}

Trainer resbemf_trainer(std::size_t threads) {
    return [threads](const RatingsDataset& data, std::span<const Rating> fit_on, std::span<const Rating> eval_on,
                     const Hyperparams& hp) {
        const auto view = training_view(data, fit_on);
        FitOptions options;
        options.threads = threads;
        const auto model = fit(data.scores(), view.users, view.items, view.ratings, hp, options);
        return score_ratings(model, data, eval_on);
    };
}

Trainer pmf_trainer() {
    return [](const RatingsDataset& data, std::span<const Rating> fit_on, std::span<const Rating> eval_on,
              const Hyperparams& hp) {
        const auto view = training_view(data, fit_on);
        const auto model = pmf_fit(data.scores(), view.users, view.items, view.ratings, hp);
        return score_ratings(model, data, eval_on);
    };
}

EvaluatedCandidate cross_validate(const Hyperparams& hp, const RatingsDataset& data, std::span<const Rating> train,
                                  const FoldAssignment& folds, const ThresholdGrid& grid, const Trainer& trainer) {
    EvaluatedCandidate result;
    result.hyperparams = hp;
    try {
        if (folds.fold_of.size() != train.size()) {
            throw std::invalid_argument("fold assignment does not match the training partition");
        }
        for (std::size_t j = 0; j < folds.n_folds; ++j) {
            const auto held_out = folds.fold(train, j);
            const auto fit_on = folds.complement(train, j);
            const auto scored = trainer(data, fit_on, held_out, hp);
            const auto agg = aggregate(scored, data.scores(), grid);
            result.per_fold.push_back({agg.coverage, agg.one_minus_mae});
        }
        for (const auto& o : result.per_fold) {
            result.objectives.coverage += o.coverage;
            result.objectives.one_minus_mae += o.one_minus_mae;
        }
        const auto n = static_cast<double>(result.per_fold.size());
        result.objectives.coverage /= n;
        result.objectives.one_minus_mae /= n;
    } catch (const std::exception& e) {
        result.failed = true;
        result.error = e.what();
        result.per_fold.clear();
        result.objectives = {};
    }
    return result;
}

std::vector<EvaluatedCandidate> pareto_front(std::span<const EvaluatedCandidate> points) {
    std::vector<const EvaluatedCandidate*> order;
    for (const auto& p : points) {
        if (!p.failed) {
            order.push_back(&p);
        }
    }
    std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
        if (a->objectives.coverage != b->objectives.coverage) {
            return a->objectives.coverage > b->objectives.coverage;
        }
        return a->objectives.one_minus_mae > b->objectives.one_minus_mae;
    });

    // Sweep by decreasing coverage. Within a group of equal coverage only the
    // best quality survives; across groups a point must beat every quality seen
    // at strictly higher coverage.
    std::vector<EvaluatedCandidate> front;
    double best_above = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < order.size();) {
        std::size_t end = g;
        while (end < order.size() && order[end]->objectives.coverage == order[g]->objectives.coverage) {
            ++end;
        }
        const double group_best = order[g]->objectives.one_minus_mae;
        for (std::size_t j = g; j < end && order[j]->objectives.one_minus_mae == group_best; ++j) {
            if (group_best > best_above) {
                front.push_back(*order[j]);
            }
        }
        best_above = std::max(best_above, group_best);
        g = end;
    }
    std::sort(front.begin(), front.end(), [](const auto& a, const auto& b) {
        if (a.objectives.coverage != b.objectives.coverage) {
            return a.objectives.coverage < b.objectives.coverage;
        }
        return a.index < b.index;
    });
    return front;
}

SearchResult random_search(const SearchSpace& space, const RatingsDataset& data, std::span<const Rating> train,
                           const ThresholdGrid& grid, std::uint64_t seed, const SearchOptions& options) {
    const auto candidates = sample_candidates(space, mix_seed(seed, 0));
    const auto folds = make_folds(train, options.n_folds, mix_seed(seed, 1));
    const Trainer trainer = options.trainer ? options.trainer : resbemf_trainer();
    const std::uint64_t fit_seed_base = mix_seed(seed, 2);

    SearchResult result;
    result.candidates.resize(candidates.size());
    const std::size_t workers = std::max<std::size_t>(1, std::min(options.threads, candidates.size()));
    std::atomic<std::size_t> next{0};
    parallel_for(workers, workers, [&](std::size_t, std::size_t) {
        for (std::size_t j = next++; j < candidates.size(); j = next++) {
            auto hp = candidates[j];
            hp.seed = mix_seed(fit_seed_base, j);
            auto evaluated = cross_validate(hp, data, train, folds, grid, trainer);
            evaluated.index = j;
            result.candidates[j] = std::move(evaluated);
        }
    });

    if (std::all_of(result.candidates.begin(), result.candidates.end(), [](const auto& c) { return c.failed; })) {
        throw TrainingError("every search candidate failed; first error: " + result.candidates.front().error);
    }
    result.front = pareto_front(result.candidates);
    return result;
}

void write_candidates_csv(std::ostream& out, std::span<const EvaluatedCandidate> candidates,
                          std::span<const EvaluatedCandidate> front, std::size_t n_folds) {
    std::set<std::size_t> on_front;
    for (const auto& f : front) {
        on_front.insert(f.index);
    }
    out << "index,k,gamma,eta,m,seed,status";
    for (std::size_t j = 1; j <= n_folds; ++j) {
        out << ",fold" << j << "_coverage,fold" << j << "_one_minus_mae";
    }
    out << ",coverage,one_minus_mae,front\n";
    for (const auto& c : candidates) {
        const auto& hp = c.hyperparams;
        out << c.index << ',' << hp.k << ',' << format_number(hp.gamma) << ',' << format_number(hp.eta) << ','
            << hp.m << ',' << hp.seed << ',' << (c.failed ? "failed" : "ok");
        for (std::size_t j = 0; j < n_folds; ++j) {
            if (j < c.per_fold.size()) {
                out << ',' << format_number(c.per_fold[j].coverage) << ','
                    << format_number(c.per_fold[j].one_minus_mae);
            } else {
                out << ",,";
            }
        }
        if (c.failed) {
            out << ",,";
        } else {
            out << ',' << format_number(c.objectives.coverage) << ',' << format_number(c.objectives.one_minus_mae);
        }
        out << ',' << (on_front.count(c.index) ? 1 : 0) << '\n';
    }
}

void write_scatter_svg(std::ostream& out, const SearchResult& result) {
    constexpr double width = 640, height = 480, margin = 60;
    double lo = 1.0, hi = 0.0;
    for (const auto& c : result.candidates) {
        if (!c.failed) {
            lo = std::min(lo, c.objectives.one_minus_mae);
            hi = std::max(hi, c.objectives.one_minus_mae);
        }
    }
    if (lo > hi) {
        lo = 0.0;
        hi = 1.0;
    }
    const double pad = std::max(0.01, 0.05 * (hi - lo));
    lo = std::max(0.0, lo - pad);
    hi = std::min(1.0, hi + pad);
    if (hi <= lo) {
        hi = lo + 1e-3;
    }
    const auto px = [&](double coverage) { return margin + coverage * (width - 2 * margin); };
    const auto py = [&](double quality) { return height - margin - (quality - lo) / (hi - lo) * (height - 2 * margin); };
    char buf[256];

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" viewBox=\"0 0 640 480\">\n";
    out << "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<path d=\"M%.1f %.1f V%.1f H%.1f\" stroke=\"black\" fill=\"none\"/>\n", margin, margin,
                  height - margin, width - margin);
    out << buf;
    for (int t = 0; t <= 4; ++t) {
        const double c = t / 4.0;
        const double q = lo + (hi - lo) * t / 4.0;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"middle\">%.2f</text>\n", px(c),
                      height - margin + 16, c);
        out << buf;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\">%.3f</text>\n", margin - 6,
                      py(q) + 4, q);
        out << buf;
    }
    out << "<text x=\"320\" y=\"465\" font-size=\"13\" text-anchor=\"middle\">coverage</text>\n";
    out << "<text x=\"16\" y=\"240\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 240)\">"
           "1 - MAE</text>\n";
    for (const auto& c : result.candidates) {
        if (c.failed) {
            continue;
        }
        std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"#9aa5b1\"/>\n",
                      px(c.objectives.coverage), py(c.objectives.one_minus_mae));
        out << buf;
    }
    if (!result.front.empty()) {
        out << "<polyline fill=\"none\" stroke=\"#d1495b\" stroke-width=\"1.5\" points=\"";
        for (const auto& f : result.front) {
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(f.objectives.coverage), py(f.objectives.one_minus_mae));
            out << buf;
        }
        out << "\"/>\n";
        for (const auto& f : result.front) {
            std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"#d1495b\"/>\n",
                          px(f.objectives.coverage), py(f.objectives.one_minus_mae));
            out << buf;
        }
    }
    out << "</svg>\n";
}

} // namespace resbemf
