#include "resbemf/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <variant>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "resbemf/dataset.hpp"
#include "resbemf/error.hpp"
#include "resbemf/metrics.hpp"
#include "resbemf/model.hpp"
#include "resbemf/model_io.hpp"
#include "resbemf/pmf.hpp"
#include "resbemf/search.hpp"

namespace resbemf::cli {

namespace fs = std::filesystem;

namespace {

// Every field can come from the JSON config; command-line flags override.
struct RunConfig
{
    std::string input;
    std::string test_input;
    std::string format = "tsv";
    std::string delimiter;
    std::string columns = "user,item,rating";
    bool header = false;
    std::string scores;  // comma-separated explicit score set
    std::optional<double> test_fraction;
    std::optional<std::uint64_t> split_seed;

    std::string model_type = "resbemf";
    std::size_t k = 6;
    double gamma = 0.10;
    double eta = 0.003;
    std::size_t m = 100;
    std::uint64_t seed = 42;
    std::size_t threads = 1;

    std::string model_path;
    std::string out_dir = ".";
    std::string space;
    std::size_t folds = 5;
    std::size_t grid_n = 20;
    std::size_t top_n = 10;
    std::optional<double> tau;
    double theta = 0.0;

    std::string user;
    std::string item;
    std::string pairs;
};

template<typename T> void take(const nlohmann::json& j, const char* key, T& target) {
    if (j.contains(key) && !j.at(key).is_null()) {
        target = j.at(key).get<T>();
    }
}

template<typename T> void take(const nlohmann::json& j, const char* key, std::optional<T>& target) {
    if (j.contains(key) && !j.at(key).is_null()) {
        target = j.at(key).get<T>();
    }
}

void load_config(const std::string& path, RunConfig& c) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open config file '" + path + "'");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
        if (!j.is_object()) {
            throw InputError("config file '" + path + "' must hold a JSON object");
        }
        static const std::set<std::string> known{
            "input", "test_input", "format", "delimiter", "columns", "header", "scores", "test_fraction",
            "split_seed", "model_type", "k", "gamma", "eta", "m", "seed", "threads", "model", "out_dir", "space",
            "folds", "grid_n", "top_n", "tau", "theta"};
        for (const auto& [key, value] : j.items()) {
            if (!known.count(key)) {
                throw InputError("config file '" + path + "': unknown field '" + key + "'");
            }
        }
        take(j, "input", c.input);
        take(j, "test_input", c.test_input);
        take(j, "format", c.format);
        take(j, "delimiter", c.delimiter);
        take(j, "columns", c.columns);
        take(j, "header", c.header);
        if (j.contains("scores") && j.at("scores").is_array()) {
            std::string joined;
            for (const auto& v : j.at("scores")) {
                joined += (joined.empty() ? "" : ",") + format_number(v.get<double>());
            }
            c.scores = joined;
        } else {
            take(j, "scores", c.scores);
        }
        take(j, "test_fraction", c.test_fraction);
        take(j, "split_seed", c.split_seed);
        take(j, "model_type", c.model_type);
        take(j, "k", c.k);
        take(j, "gamma", c.gamma);
        take(j, "eta", c.eta);
        take(j, "m", c.m);
        take(j, "seed", c.seed);
        take(j, "threads", c.threads);
        take(j, "model", c.model_path);
        take(j, "out_dir", c.out_dir);
        take(j, "space", c.space);
        take(j, "folds", c.folds);
        take(j, "grid_n", c.grid_n);
        take(j, "top_n", c.top_n);
        take(j, "tau", c.tau);
        take(j, "theta", c.theta);
    } catch (const nlohmann::json::exception& e) {
        throw InputError("invalid config file '" + path + "': " + e.what());
    }
}

ParseOptions parse_options(const RunConfig& c, std::optional<ScoreSet> explicit_scores = std::nullopt) {
    ParseOptions opts;
    opts.format = FormatSpec::preset(c.format);
    if (!c.delimiter.empty()) {
        opts.format.delimiter = c.delimiter == "tab" ? "\t" : c.delimiter == "space" ? "" : c.delimiter;
    }
    opts.format.set_columns(c.columns);
    opts.format.header = c.header;
    if (explicit_scores) {
        opts.scores = std::move(explicit_scores);
    } else if (!c.scores.empty()) {
        std::vector<double> values;
        std::stringstream ss(c.scores);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                values.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw InputError("invalid score value '" + item + "'");
            }
        }
        try {
            opts.scores = ScoreSet(values);
        } catch (const std::invalid_argument& e) {
            throw InputError(std::string("invalid score set: ") + e.what());
        }
    }
    return opts;
}

// Train/test partition from either a second file or a seeded split.
RatingsDataset load_dataset(const RunConfig& c, std::optional<ScoreSet> explicit_scores = std::nullopt) {
    if (c.input.empty()) {
        throw InputError("--input is required");
    }
    const auto opts = parse_options(c, std::move(explicit_scores));
    if (!c.test_input.empty()) {
        return load_train_test(c.input, c.test_input, opts);
    }
    auto data = load_ratings(c.input, opts);
    if (c.test_fraction) {
        data = split(std::move(data), *c.test_fraction, c.split_seed.value_or(c.seed));
    }
    return data;
}

Hyperparams hyperparams(const RunConfig& c) {
    Hyperparams hp{c.k, c.gamma, c.eta, c.m, c.seed};
    hp.validate();
    return hp;
}

void warn_duplicates(const RatingsDataset& data, std::ostream& err) {
    if (data.duplicates > 0) {
        err << "warning: " << data.duplicates << " duplicate (user, item) lines; the last rating was kept\n";
    }
}

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot write '" + path.string() + "'");
    }
    return out;
}

double default_tau(const ScoreSet& scores) {
    return 0.5 * (scores.min() + scores.max());
}

int cmd_stats(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const auto data = load_dataset(c);
    warn_duplicates(data, err);
    out << to_json(stats(data)).dump(2) << '\n';
    return ok;
}

int cmd_split(const RunConfig& c, bool write_folds, std::ostream& out, std::ostream& err) {
    if (!c.test_fraction) {
        throw InputError("split needs --test-fraction");
    }
    const auto data = load_dataset(c);
    warn_duplicates(data, err);
    const fs::path dir = c.out_dir;
    const auto train = data.select(Partition::train);
    const auto test = data.select(Partition::test);
    {
        auto f = open_output(dir / "train.tsv");
        write_ratings(f, data, train);
    }
    {
        auto f = open_output(dir / "test.tsv");
        write_ratings(f, data, test);
    }
    {
        auto f = open_output(dir / "partition.csv");
        write_partition_csv(f, data);
    }
    if (write_folds) {
        const auto folds = make_folds(train, c.folds, c.split_seed.value_or(c.seed));
        auto f = open_output(dir / "folds.csv");
        write_folds_csv(f, data, train, folds);
    }
    out << to_json(stats(data)).dump(2) << '\n';
    return ok;
}

int cmd_fit(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const auto hp = hyperparams(c);
    const auto data = load_dataset(c);
    warn_duplicates(data, err);
    const auto train = data.select(Partition::train);
    const auto view = training_view(data, train);
    const fs::path path = c.model_path.empty() ? fs::path(c.out_dir) / "model.json" : fs::path(c.model_path);

    nlohmann::ordered_json summary;
    summary["model_path"] = path.string();
    summary["model_type"] = c.model_type;
    summary["n_train_ratings"] = train.size();
    if (c.model_type == "resbemf") {
        FitOptions options;
        options.threads = c.threads;
        auto model = fit(data.scores(), view.users, view.items, view.ratings, hp, options);
        summary["log_likelihood"] = log_likelihood(model, view.ratings);
        auto f = open_output(path);
        save_model(f, model);
    } else if (c.model_type == "pmf") {
        auto model = pmf_fit(data.scores(), view.users, view.items, view.ratings, hp);
        summary["loss"] = pmf_loss(model, view.ratings);
        auto f = open_output(path);
        save_model(f, model);
    } else {
        throw InputError("unknown model type '" + c.model_type + "' (expected resbemf or pmf)");
    }
    out << summary.dump(2) << '\n';
    return ok;
}

const ScoreSet& model_scores(const AnyModel& model) {
    return std::visit([](const auto& m) -> const ScoreSet& { return m.score_set; }, model);
}

nlohmann::ordered_json prediction_json(const AnyModel& any, const std::string& user, const std::string& item,
                                       double theta) {
    nlohmann::ordered_json j;
    j["user"] = user;
    j["item"] = item;
    if (const auto* model = std::get_if<FactorModel>(&any)) {
        PredictionDistribution dist;
        bool cold = false;
        try {
            dist = predict_distribution(*model, user, item);
        } catch (const ColdStartError&) {
            dist = PredictionDistribution::uniform(model->score_set);
            cold = true;
        }
        j["cold_start"] = cold;
        j["probs"] = dist.probs;
        j["mode"] = model->score_set.value(dist.mode_index);
        j["reliability"] = dist.reliability;
        j["mean"] = dist.mean;
        j["prediction"] = dist.reliability >= theta ? nlohmann::ordered_json(model->score_set.value(dist.mode_index))
                                                    : nlohmann::ordered_json(nullptr);
    } else {
        const auto& pmf = std::get<PmfModel>(any);
        const auto u = pmf.users.find(user);
        const auto i = pmf.items.find(item);
        const bool cold = !u || !i;
        const double value = cold ? std::clamp(pmf.global_mean, pmf.score_set.min(), pmf.score_set.max())
                                  : pmf_predict(pmf, *u, *i);
        j["cold_start"] = cold;
        j["prediction"] = value;
        j["class"] = pmf_class(pmf, value);
        j["reliability"] = 1.0;
    }
    return j;
}

int cmd_predict(const RunConfig& c, std::ostream& out, std::ostream&) {
    if (c.model_path.empty()) {
        throw InputError("predict needs --model");
    }
    if (!(c.theta >= 0.0 && c.theta <= 1.0)) {
        throw InputError("--theta must lie in [0, 1]");
    }
    const auto model = load_model_file(c.model_path);
    if (!c.pairs.empty()) {
        std::ifstream in(c.pairs);
        if (!in) {
            throw InputError("cannot open pairs file '" + c.pairs + "'");
        }
        auto format = parse_options(c).format;
        std::string line;
        nlohmann::ordered_json all = nlohmann::ordered_json::array();
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string user, item;
            if (format.delimiter.empty() || format.delimiter == "\t") {
                ss >> user >> item;
            } else {
                const auto at = line.find(format.delimiter);
                if (at != std::string::npos) {
                    user = line.substr(0, at);
                    item = line.substr(at + format.delimiter.size());
                    item = item.substr(0, item.find(format.delimiter));
                }
            }
            if (user.empty() || item.empty()) {
                continue;
            }
            all.push_back(prediction_json(model, user, item, c.theta));
        }
        out << all.dump(2) << '\n';
        return ok;
    }
    if (c.user.empty() || c.item.empty()) {
        throw InputError("predict needs --user and --item (or --pairs)");
    }
    out << prediction_json(model, c.user, c.item, c.theta).dump(2) << '\n';
    return ok;
}

int cmd_evaluate(const RunConfig& c, std::ostream& out, std::ostream& err) {
    if (c.model_path.empty()) {
        throw InputError("evaluate needs --model");
    }
    const auto model = load_model_file(c.model_path);
    const auto& scores = model_scores(model);

    // With a split the test partition is evaluated; a plain file is all test.
    const auto data = load_dataset(c, scores);
    warn_duplicates(data, err);
    const bool partitioned = data.count(Partition::test) > 0;
    const auto test = partitioned ? data.select(Partition::test) : data.ratings;

    const auto scored = std::visit([&](const auto& m) { return score_ratings(m, data, test); }, model);
    const ThresholdGrid grid(c.grid_n);
    MapParams map{c.top_n, c.tau.value_or(default_tau(scores)), c.theta};
    const auto report = evaluate(scored, scores, grid, map);

    const fs::path dir = c.out_dir;
    {
        auto f = open_output(dir / "metrics.csv");
        write_metrics_csv(f, report);
    }
    const auto summary = summary_json(report);
    {
        auto f = open_output(dir / "summary.json");
        f << summary.dump(2) << '\n';
    }
    out << summary.dump(2) << '\n';
    return ok;
}

int cmd_search(const RunConfig& c, std::ostream& out, std::ostream& err) {
    if (c.space.empty()) {
        throw InputError("search needs --space");
    }
    std::ifstream in(c.space);
    if (!in) {
        throw InputError("cannot open search space '" + c.space + "'");
    }
    SearchSpace space;
    try {
        space = SearchSpace::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw InputError("invalid search space '" + c.space + "': " + e.what());
    }
    const auto data = load_dataset(c);
    warn_duplicates(data, err);
    const auto train = data.select(Partition::train);

    SearchOptions options;
    options.n_folds = c.folds;
    options.threads = c.threads;
    if (c.model_type == "resbemf") {
        options.trainer = resbemf_trainer();
    } else if (c.model_type == "pmf") {
        options.trainer = pmf_trainer();
    } else {
        throw InputError("unknown model type '" + c.model_type + "'");
    }
    if (c.folds < 2) {
        throw InputError("--folds must be at least 2");
    }
    const ThresholdGrid grid(c.grid_n);
    const auto result = random_search(space, data, train, grid, c.seed, options);

    const fs::path dir = c.out_dir;
    {
        auto f = open_output(dir / "candidates.csv");
        write_candidates_csv(f, result.candidates, result.front, c.folds);
    }
    {
        auto f = open_output(dir / "front.csv");
        write_candidates_csv(f, result.front, result.front, c.folds);
    }
    {
        auto f = open_output(dir / "scatter.svg");
        write_scatter_svg(f, result);
    }
    const auto failed = std::count_if(result.candidates.begin(), result.candidates.end(),
                                      [](const auto& cand) { return cand.failed; });
    for (const auto& cand : result.candidates) {
        if (cand.failed) {
            err << "candidate " << cand.index << " failed: " << cand.error << '\n';
        }
    }
    nlohmann::ordered_json summary;
    summary["n_candidates"] = result.candidates.size();
    summary["n_failed"] = failed;
    summary["front_size"] = result.front.size();
    out << summary.dump(2) << '\n';
    return ok;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig c;
    for (std::size_t j = 0; j + 1 < args.size(); ++j) {
        if (args[j] == "--config") {
            try {
                load_config(args[j + 1], c);
            } catch (const InputError& e) {
                err << "error: " << e.what() << '\n';
                return input_error;
            }
        }
    }

    CLI::App app{"Reliability-aware matrix factorization for collaborative filtering"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "JSON config; flags override its fields");

    const auto add_data = [&c](CLI::App* sub) {
        sub->add_option("--input,-i", c.input, "Rating file (user item rating [extra...])");
        sub->add_option("--test-input", c.test_input, "Separate test rating file");
        sub->add_option("--format", c.format, "tsv, csv, space or ml1m");
        sub->add_option("--delimiter", c.delimiter, "Field delimiter (overrides --format; 'tab', 'space' allowed)");
        sub->add_option("--columns", c.columns, "Column order, e.g. user,item,rating");
        sub->add_flag("--header", c.header, "Skip the first line");
        sub->add_option("--scores", c.scores, "Explicit score set, e.g. 0.5,1,1.5,2,2.5,3,3.5,4");
        sub->add_option("--test-fraction", c.test_fraction, "Hold out this fraction as test");
        sub->add_option("--split-seed", c.split_seed, "Seed of the train/test split (defaults to --seed)");
        sub->add_option("--seed", c.seed, "Seed for every random choice");
    };
    const auto add_model = [&c](CLI::App* sub) {
        sub->add_option("--model-type", c.model_type, "resbemf or pmf");
        sub->add_option("-k,--factors", c.k, "Latent dimensionality");
        sub->add_option("--gamma", c.gamma, "L2 regularization");
        sub->add_option("--eta", c.eta, "Learning rate");
        sub->add_option("-m,--iters", c.m, "Epochs");
        sub->add_option("--threads", c.threads, "Worker threads");
    };
    const auto add_eval = [&c](CLI::App* sub) {
        sub->add_option("--grid-n", c.grid_n, "Reliability threshold grid size");
        sub->add_option("--top-n", c.top_n, "Recommendation list length for mAP");
        sub->add_option("--tau", c.tau, "Relevance threshold for mAP (default: score-range midpoint)");
        sub->add_option("--theta", c.theta, "Reliability threshold for mAP and predict");
    };

    auto* stats_cmd = app.add_subcommand("stats", "Dataset statistics as JSON");
    add_data(stats_cmd);

    auto* split_cmd = app.add_subcommand("split", "Seeded train/test split (and optional folds)");
    add_data(split_cmd);
    split_cmd->add_option("--out-dir", c.out_dir, "Output directory");
    auto* folds_opt = split_cmd->add_option("--folds", c.folds, "Also write a fold assignment of the train part");

    auto* fit_cmd = app.add_subcommand("fit", "Train a model and write it as JSON");
    add_data(fit_cmd);
    add_model(fit_cmd);
    fit_cmd->add_option("--out,--model", c.model_path, "Model file (default: <out-dir>/model.json)");
    fit_cmd->add_option("--out-dir", c.out_dir, "Output directory");

    auto* predict_cmd = app.add_subcommand("predict", "Predict one pair or a file of pairs");
    predict_cmd->add_option("--model", c.model_path, "Model file")->required();
    predict_cmd->add_option("--user", c.user, "User identifier");
    predict_cmd->add_option("--item", c.item, "Item identifier");
    predict_cmd->add_option("--pairs", c.pairs, "File of user item pairs");
    predict_cmd->add_option("--format", c.format, "tsv, csv, space or ml1m");
    predict_cmd->add_option("--delimiter", c.delimiter, "Field delimiter");
    predict_cmd->add_option("--theta", c.theta, "Reliability threshold");

    auto* eval_cmd = app.add_subcommand("evaluate", "Per-threshold metrics CSV and summary JSON");
    add_data(eval_cmd);
    add_eval(eval_cmd);
    eval_cmd->add_option("--model", c.model_path, "Model file")->required();
    eval_cmd->add_option("--out-dir", c.out_dir, "Output directory");

    auto* search_cmd = app.add_subcommand("search", "Random hyperparameter search with cross-validation");
    add_data(search_cmd);
    search_cmd->add_option("--model-type", c.model_type, "resbemf or pmf");
    search_cmd->add_option("--space", c.space, "Search space JSON");
    search_cmd->add_option("--folds", c.folds, "Cross-validation folds");
    search_cmd->add_option("--grid-n", c.grid_n, "Reliability threshold grid size");
    search_cmd->add_option("--threads", c.threads, "Candidates evaluated concurrently");
    search_cmd->add_option("--out-dir", c.out_dir, "Output directory");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, e2;
        const int code = app.exit(e, o, e2);
        out << o.str();
        err << e2.str();
        return code == 0 ? ok : input_error;
    }

    try {
        if (*stats_cmd) {
            return cmd_stats(c, out, err);
        }
        if (*split_cmd) {
            return cmd_split(c, folds_opt->count() > 0, out, err);
        }
        if (*fit_cmd) {
            return cmd_fit(c, out, err);
        }
        if (*predict_cmd) {
            return cmd_predict(c, out, err);
        }
        if (*eval_cmd) {
            return cmd_evaluate(c, out, err);
        }
        if (*search_cmd) {
            return cmd_search(c, out, err);
        }
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return input_error;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return input_error;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << '\n';
        return input_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return runtime_error;
    }
    return input_error;
}

} // namespace resbemf::cli
