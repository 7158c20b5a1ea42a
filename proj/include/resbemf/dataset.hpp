#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "resbemf/ids.hpp"
#include "resbemf/model.hpp"
#include "resbemf/score_set.hpp"

namespace resbemf {

/// A rating addressed by dataset indices.
struct Rating
{
    std::size_t user;
    std::size_t item;
    double value;

    bool operator==(const Rating&) const = default;
};

enum class Partition : std::uint8_t { train, test };

/// Column layout of a delimiter-separated rating file.
struct FormatSpec
{
    std::string delimiter = "\t";  // empty: split on runs of blanks
    std::size_t user_column = 0;
    std::size_t item_column = 1;
    std::size_t rating_column = 2;
    bool header = false;

    /// "tsv", "csv", "space" (FilmTrust) or "ml1m" ("::").
    static FormatSpec preset(const std::string& name);
    /// Parses a column order such as "user,item,rating" or "item,user,rating,time".
    void set_columns(const std::string& order);
};

struct ParseOptions
{
    FormatSpec format;
    std::optional<ScoreSet> scores;  // inferred from the data when absent
};

struct RatingsDataset
{
    IdIndex users;
    IdIndex items;
    std::vector<Rating> ratings;
    std::vector<Partition> partition;  // parallel to `ratings`
    std::optional<ScoreSet> score_set; // absent only for an empty dataset
    std::size_t duplicates = 0;        // (user, item) lines overwritten while parsing

    const ScoreSet& scores() const;
    std::vector<Rating> select(Partition p) const;
    std::size_t count(Partition p) const;
};

/// Reads "user item rating [extra...]" lines. Duplicate (user, item) pairs
/// keep the last rating and are counted in `duplicates`. Every rating is
/// tagged as train.
///
/// Throws InputError for an empty stream, a malformed line (with its line
/// number) or a rating outside an explicit score set.
RatingsDataset parse_ratings(std::istream& in, const ParseOptions& options);

/// parse_ratings() on a file; a missing file raises InputError naming the path.
RatingsDataset load_ratings(const std::filesystem::path& path, const ParseOptions& options);

/// Loads two files into one dataset, tagging the second one's ratings as test.
/// A pair present in both files is an error.
RatingsDataset load_train_test(const std::filesystem::path& train, const std::filesystem::path& test,
                               const ParseOptions& options);

/// Writes the given ratings back out as "user<delim>item<delim>rating" lines.
void write_ratings(std::ostream& out, const RatingsDataset& data, std::span<const Rating> ratings,
                   const std::string& delimiter = "\t");

/// Seeded shuffle of all ratings, then the first round(test_fraction * n)
/// become test and the rest train.
RatingsDataset split(RatingsDataset data, double test_fraction, std::uint64_t seed);

struct FoldAssignment
{
    std::size_t n_folds = 0;
    std::vector<std::size_t> fold_of;  // parallel to the partitioned ratings

    std::vector<Rating> fold(std::span<const Rating> ratings, std::size_t j) const;
    std::vector<Rating> complement(std::span<const Rating> ratings, std::size_t j) const;
};

/// Seeded shuffle then round-robin: fold sizes differ by at most one.
FoldAssignment make_folds(std::span<const Rating> train, std::size_t n_folds, std::uint64_t seed);

struct DatasetStats
{
    std::size_t n_users = 0;
    std::size_t n_items = 0;
    std::size_t n_ratings = 0;
    std::size_t n_test_ratings = 0;
    std::optional<std::pair<double, double>> score_range;
};

DatasetStats stats(const RatingsDataset& data);
nlohmann::ordered_json to_json(const DatasetStats& s);

/// CSV with columns user,item,rating,partition.
void write_partition_csv(std::ostream& out, const RatingsDataset& data);
/// CSV with columns user,item,rating,fold.
void write_folds_csv(std::ostream& out, const RatingsDataset& data, std::span<const Rating> train,
                     const FoldAssignment& folds);

/// Ratings re-addressed to a compact model index space that only contains the
/// users and items present in `ratings`, in order of first appearance.
struct TrainingView
{
    IdIndex users;
    IdIndex items;
    std::vector<RowRating> ratings;
};

TrainingView training_view(const RatingsDataset& data, std::span<const Rating> ratings);

/// Renders a double as the shortest decimal that reads back identically.
std::string format_number(double v);

} // namespace resbemf
