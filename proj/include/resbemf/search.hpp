#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "resbemf/dataset.hpp"
#include "resbemf/metrics.hpp"
#include "resbemf/model.hpp"

namespace resbemf {

/// Finite grids per hyperparameter; the search space is their cartesian
/// product, of which `search_fraction` is sampled.
struct SearchSpace
{
    std::vector<std::size_t> k;
    std::vector<double> gamma;
    std::vector<double> eta;
    std::vector<std::size_t> m;
    double search_fraction = 1.0;

    std::size_t size() const { return k.size() * gamma.size() * eta.size() * m.size(); }

    /// Candidate at a position of the product (k outermost, m innermost).
    Hyperparams at(std::size_t index) const;

    /// Throws InputError for empty grids, invalid values or a fraction that
    /// selects nothing.
    void validate() const;

    /// {"k": [...], "gamma": [...], "eta": [...], "m": [...], "search_fraction": f}
    static SearchSpace from_json(const nlohmann::json& j);
};

struct Objectives
{
    double coverage = 0.0;
    double one_minus_mae = 0.0;

    bool operator==(const Objectives&) const = default;
};

/// Weak dominance with strict improvement in at least one objective; both maximized.
bool dominates(const Objectives& a, const Objectives& b);

struct EvaluatedCandidate
{
    std::size_t index = 0;  // position in the sampled candidate list
    Hyperparams hyperparams;
    Objectives objectives;
    std::vector<Objectives> per_fold;
    bool failed = false;
    std::string error;
};

/// ceil(search_fraction * |space|) distinct candidates in product order.
/// Every returned Hyperparams has seed 0; seeds are assigned by the caller.
std::vector<Hyperparams> sample_candidates(const SearchSpace& space, std::uint64_t seed);

/// Fits on `fit_on` and scores `eval_on`.
using Trainer = std::function<std::vector<ScoredRating>(const RatingsDataset& data, std::span<const Rating> fit_on,
                                                        std::span<const Rating> eval_on, const Hyperparams& hp)>;

Trainer resbemf_trainer(std::size_t threads = 1);
Trainer pmf_trainer();

/// For every fold j: fit on the other folds, aggregate on fold j. Objectives
/// are the per-fold means. Any exception marks the candidate failed.
EvaluatedCandidate cross_validate(const Hyperparams& hp, const RatingsDataset& data, std::span<const Rating> train,
                                  const FoldAssignment& folds, const ThresholdGrid& grid, const Trainer& trainer);

/// Non-dominated, non-failed candidates sorted by coverage ascending (then by
/// index). Candidates with identical objectives are all kept.
std::vector<EvaluatedCandidate> pareto_front(std::span<const EvaluatedCandidate> points);

struct SearchOptions
{
    std::size_t n_folds = 5;
    std::size_t threads = 1;  // candidates evaluated concurrently
    Trainer trainer;          // defaults to resbemf_trainer()
};

struct SearchResult
{
    std::vector<EvaluatedCandidate> candidates;
    std::vector<EvaluatedCandidate> front;
};

/// Candidate j trains with seed mix_seed(seed', j), so results do not depend
/// on evaluation order or thread count. Throws TrainingError if every
/// candidate fails.
SearchResult random_search(const SearchSpace& space, const RatingsDataset& data, std::span<const Rating> train,
                           const ThresholdGrid& grid, std::uint64_t seed, const SearchOptions& options = {});

void write_candidates_csv(std::ostream& out, std::span<const EvaluatedCandidate> candidates,
                          std::span<const EvaluatedCandidate> front, std::size_t n_folds);

/// Scatter of every evaluated candidate with the front drawn as a polyline.
void write_scatter_svg(std::ostream& out, const SearchResult& result);

} // namespace resbemf
