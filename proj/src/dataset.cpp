#include "resbemf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string_view>
#include <unordered_map>

#include "resbemf/error.hpp"
#include "resbemf/random.hpp"

namespace resbemf {

FormatSpec FormatSpec::preset(const std::string& name) {
    FormatSpec spec;
    if (name == "tsv") {
        spec.delimiter = "\t";
    } else if (name == "csv") {
        spec.delimiter = ",";
    } else if (name == "space") {
        spec.delimiter = "";
    } else if (name == "ml1m") {
        spec.delimiter = "::";
    } else {
        throw InputError("unknown format '" + name + "' (expected tsv, csv, space or ml1m)");
    }
    return spec;
}

void FormatSpec::set_columns(const std::string& order) {
    std::optional<std::size_t> user, item, rating;
    std::stringstream ss(order);
    std::string name;
    for (std::size_t col = 0; std::getline(ss, name, ','); ++col) {
        if (name == "user") {
            user = col;
        } else if (name == "item") {
            item = col;
        } else if (name == "rating") {
            rating = col;
        }
    }
    if (!user || !item || !rating) {
        throw InputError("column order '" + order + "' must name user, item and rating");
    }
    user_column = *user;
    item_column = *item;
    rating_column = *rating;
}

const ScoreSet& RatingsDataset::scores() const {
    if (!score_set) {
        throw std::logic_error("dataset has no score set");
    }
    return *score_set;
}

std::vector<Rating> RatingsDataset::select(Partition p) const {
    std::vector<Rating> out;
    for (std::size_t j = 0; j < ratings.size(); ++j) {
        if (partition[j] == p) {
            out.push_back(ratings[j]);
        }
    }
    return out;
}

std::size_t RatingsDataset::count(Partition p) const {
    return static_cast<std::size_t>(std::count(partition.begin(), partition.end(), p));
}

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line, const std::string& delimiter) {
    std::vector<std::string_view> fields;
    if (delimiter.empty()) {
        std::size_t pos = 0;
        while (pos < line.size()) {
            const auto start = line.find_first_not_of(" \t", pos);
            if (start == std::string_view::npos) {
                break;
            }
            const auto end = std::min(line.find_first_of(" \t", start), line.size());
            fields.push_back(line.substr(start, end - start));
            pos = end;
        }
        return fields;
    }
    std::size_t pos = 0;
    while (true) {
        const auto end = line.find(delimiter, pos);
        if (end == std::string_view::npos) {
            fields.push_back(trim(line.substr(pos)));
            break;
        }
        fields.push_back(trim(line.substr(pos, end - pos)));
        pos = end + delimiter.size();
    }
    return fields;
}

struct RawRating
{
    std::string user;
    std::string item;
    double value;
};

// Returns ratings in file order with duplicates resolved (last line wins,
// keeping the position of the first occurrence).
std::vector<RawRating> read_raw(std::istream& in, const FormatSpec& format, std::size_t& duplicates) {
    std::vector<RawRating> raw;
    std::map<std::pair<std::string, std::string>, std::size_t> seen;
    const std::size_t needed = std::max({format.user_column, format.item_column, format.rating_column}) + 1;
    std::string line;
    bool header_pending = format.header;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (trim(line).empty()) {
            continue;
        }
        if (header_pending) {
            header_pending = false;
            continue;
        }
        const auto fields = split_fields(line, format.delimiter);
        const auto fail = [&](const std::string& why) {
            return InputError("line " + std::to_string(lineno) + ": " + why);
        };
        if (fields.size() < needed) {
            throw fail("expected at least " + std::to_string(needed) + " fields, found "
                       + std::to_string(fields.size()));
        }
        const auto user = fields[format.user_column];
        const auto item = fields[format.item_column];
        const auto text = fields[format.rating_column];
        if (user.empty() || item.empty()) {
            throw fail("empty user or item identifier");
        }
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
            throw fail("rating '" + std::string(text) + "' is not a number");
        }
        auto key = std::make_pair(std::string(user), std::string(item));
        auto [it, inserted] = seen.emplace(key, raw.size());
        if (inserted) {
            raw.push_back({std::move(key.first), std::move(key.second), value});
        } else {
            raw[it->second].value = value;
            ++duplicates;
        }
    }
    return raw;
}

ScoreSet resolve_scores(const std::vector<RawRating>& raw, const std::optional<ScoreSet>& explicit_scores) {
    if (explicit_scores) {
        for (const auto& r : raw) {
            if (!explicit_scores->find(r.value)) {
                throw InputError("rating " + format_number(r.value) + " for user '" + r.user + "' item '" + r.item
                                 + "' is not in the score set");
            }
        }
        return *explicit_scores;
    }
    std::set<double> distinct;
    for (const auto& r : raw) {
        distinct.insert(r.value);
    }
    if (distinct.size() < 2) {
        throw InputError("ratings use fewer than two distinct values; supply the score set explicitly");
    }
    return ScoreSet(std::vector<double>(distinct.begin(), distinct.end()));
}

void append(RatingsDataset& data, const std::vector<RawRating>& raw, Partition tag) {
    for (const auto& r : raw) {
        data.ratings.push_back({data.users.add(r.user), data.items.add(r.item), r.value});
        data.partition.push_back(tag);
    }
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open rating file '" + path.string() + "'");
    }
    return in;
}

} // namespace

RatingsDataset parse_ratings(std::istream& in, const ParseOptions& options) {
    RatingsDataset data;
    const auto raw = read_raw(in, options.format, data.duplicates);
    if (raw.empty()) {
        throw InputError("no ratings");
    }
    data.score_set = resolve_scores(raw, options.scores);
    append(data, raw, Partition::train);
    return data;
}

RatingsDataset load_ratings(const std::filesystem::path& path, const ParseOptions& options) {
    auto in = open_or_throw(path);
    try {
        return parse_ratings(in, options);
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

RatingsDataset load_train_test(const std::filesystem::path& train, const std::filesystem::path& test,
                               const ParseOptions& options) {
    RatingsDataset data;
    std::vector<RawRating> raw_train, raw_test;
    {
        auto in = open_or_throw(train);
        raw_train = read_raw(in, options.format, data.duplicates);
    }
    {
        auto in = open_or_throw(test);
        raw_test = read_raw(in, options.format, data.duplicates);
    }
    if (raw_train.empty() && raw_test.empty()) {
        throw InputError("no ratings");
    }
    std::set<std::pair<std::string, std::string>> train_pairs;
    for (const auto& r : raw_train) {
        train_pairs.emplace(r.user, r.item);
    }
    for (const auto& r : raw_test) {
        if (train_pairs.count({r.user, r.item})) {
            throw InputError("user '" + r.user + "' item '" + r.item + "' appears in both train and test files");
        }
    }
    std::vector<RawRating> all = raw_train;
    all.insert(all.end(), raw_test.begin(), raw_test.end());
    data.score_set = resolve_scores(all, options.scores);
    append(data, raw_train, Partition::train);
    append(data, raw_test, Partition::test);
    return data;
}

std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void write_ratings(std::ostream& out, const RatingsDataset& data, std::span<const Rating> ratings,
                   const std::string& delimiter) {
    for (const auto& r : ratings) {
        out << data.users.id(r.user) << delimiter << data.items.id(r.item) << delimiter << format_number(r.value)
            << '\n';
    }
}

RatingsDataset split(RatingsDataset data, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("test fraction must lie strictly between 0 and 1");
    }
    if (data.ratings.empty()) {
        throw std::invalid_argument("cannot split an empty dataset");
    }
    std::vector<std::size_t> order(data.ratings.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(std::span{order});
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(order.size())));
    std::fill(data.partition.begin(), data.partition.end(), Partition::train);
    for (std::size_t j = 0; j < n_test; ++j) {
        data.partition[order[j]] = Partition::test;
    }
    return data;
}

std::vector<Rating> FoldAssignment::fold(std::span<const Rating> ratings, std::size_t j) const {
    std::vector<Rating> out;
    for (std::size_t t = 0; t < ratings.size(); ++t) {
        if (fold_of[t] == j) {
            out.push_back(ratings[t]);
        }
    }
    return out;
}

std::vector<Rating> FoldAssignment::complement(std::span<const Rating> ratings, std::size_t j) const {
    std::vector<Rating> out;
    for (std::size_t t = 0; t < ratings.size(); ++t) {
        if (fold_of[t] != j) {
            out.push_back(ratings[t]);
        }
    }
    return out;
}

FoldAssignment make_folds(std::span<const Rating> train, std::size_t n_folds, std::uint64_t seed) {
    if (n_folds < 2) {
        throw std::invalid_argument("need at least two folds");
    }
    if (train.size() < n_folds) {
        throw std::invalid_argument("training partition has fewer ratings than folds");
    }
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(std::span{order});
    FoldAssignment folds{n_folds, std::vector<std::size_t>(train.size())};
    for (std::size_t j = 0; j < order.size(); ++j) {
        folds.fold_of[order[j]] = j % n_folds;
    }
    return folds;
}

DatasetStats stats(const RatingsDataset& data) {
    DatasetStats s;
    s.n_users = data.users.size();
    s.n_items = data.items.size();
    s.n_ratings = data.ratings.size();
    s.n_test_ratings = data.count(Partition::test);
    if (data.score_set) {
        s.score_range = std::make_pair(data.score_set->min(), data.score_set->max());
    }
    return s;
}

nlohmann::ordered_json to_json(const DatasetStats& s) {
    nlohmann::ordered_json j;
    j["n_users"] = s.n_users;
    j["n_items"] = s.n_items;
    j["n_ratings"] = s.n_ratings;
    j["n_train_ratings"] = s.n_ratings - s.n_test_ratings;
    j["n_test_ratings"] = s.n_test_ratings;
    if (s.score_range) {
        j["score_range"] = {s.score_range->first, s.score_range->second};
    } else {
        j["score_range"] = nullptr;
    }
    return j;
}

void write_partition_csv(std::ostream& out, const RatingsDataset& data) {
    out << "user,item,rating,partition\n";
    for (std::size_t j = 0; j < data.ratings.size(); ++j) {
        const auto& r = data.ratings[j];
        out << data.users.id(r.user) << ',' << data.items.id(r.item) << ',' << format_number(r.value) << ','
            << (data.partition[j] == Partition::test ? "test" : "train") << '\n';
    }
}

void write_folds_csv(std::ostream& out, const RatingsDataset& data, std::span<const Rating> train,
                     const FoldAssignment& folds) {
    out << "user,item,rating,fold\n";
    for (std::size_t j = 0; j < train.size(); ++j) {
        const auto& r = train[j];
        out << data.users.id(r.user) << ',' << data.items.id(r.item) << ',' << format_number(r.value) << ','
            << folds.fold_of[j] << '\n';
    }
}

TrainingView training_view(const RatingsDataset& data, std::span<const Rating> ratings) {
    TrainingView view;
    view.ratings.reserve(ratings.size());
    for (const auto& r : ratings) {
        view.ratings.push_back(
            {view.users.add(data.users.id(r.user)), view.items.add(data.items.id(r.item)), r.value});
    }
    return view;
}

} // namespace resbemf
