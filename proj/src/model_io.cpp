#include "resbemf/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "resbemf/error.hpp"

namespace resbemf {

namespace {

std::string real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_reals(std::ostream& out, const char* key, std::span<const double> values, bool last = false) {
    out << "  \"" << key << "\": [";
    for (std::size_t j = 0; j < values.size(); ++j) {
        out << (j ? "," : "") << real(values[j]);
    }
    out << "]" << (last ? "\n" : ",\n");
}

void write_ids(std::ostream& out, const char* key, const IdIndex& ids) {
    out << "  \"" << key << "\": [";
    for (std::size_t j = 0; j < ids.size(); ++j) {
        out << (j ? "," : "") << nlohmann::json(ids.id(j)).dump();
    }
    out << "],\n";
}

void write_header(std::ostream& out, const char* type, const ScoreSet& scores, const Hyperparams& hp) {
    out << "{\n";
    out << "  \"format_version\": " << model_format_version << ",\n";
    out << "  \"model_type\": \"" << type << "\",\n";
    write_reals(out, "score_values", scores.values());
    out << "  \"k\": " << hp.k << ",\n";
    out << "  \"gamma\": " << real(hp.gamma) << ",\n";
    out << "  \"eta\": " << real(hp.eta) << ",\n";
    out << "  \"m\": " << hp.m << ",\n";
    out << "  \"seed\": " << hp.seed << ",\n";
}

} // namespace

void save_model(std::ostream& out, const FactorModel& model) {
    write_header(out, "resbemf", model.score_set, model.hyperparams);
    write_ids(out, "user_ids", model.users);
    write_ids(out, "item_ids", model.items);
    write_reals(out, "P", model.P.data());
    write_reals(out, "Q", model.Q.data(), true);
    out << "}\n";
}

void save_model(std::ostream& out, const PmfModel& model) {
    write_header(out, "pmf", model.score_set, model.hyperparams);
    out << "  \"global_mean\": " << real(model.global_mean) << ",\n";
    write_ids(out, "user_ids", model.users);
    write_ids(out, "item_ids", model.items);
    write_reals(out, "P", model.P);
    write_reals(out, "Q", model.Q, true);
    out << "}\n";
}

namespace {

std::vector<double> reals(const nlohmann::json& doc, const char* key, std::size_t expected) {
    auto values = doc.at(key).get<std::vector<double>>();
    if (values.size() != expected) {
        throw InputError(std::string("model field '") + key + "' has " + std::to_string(values.size())
                         + " entries, expected " + std::to_string(expected));
    }
    return values;
}

} // namespace

AnyModel load_model(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        const int version = doc.at("format_version").get<int>();
        if (version != model_format_version) {
            throw InputError("unsupported model format_version " + std::to_string(version));
        }
        const auto type = doc.value("model_type", std::string("resbemf"));
        ScoreSet scores(doc.at("score_values").get<std::vector<double>>());
        Hyperparams hp;
        hp.k = doc.at("k").get<std::size_t>();
        hp.gamma = doc.at("gamma").get<double>();
        hp.eta = doc.at("eta").get<double>();
        hp.m = doc.at("m").get<std::size_t>();
        hp.seed = doc.at("seed").get<std::uint64_t>();
        hp.validate();
        IdIndex users(doc.at("user_ids").get<std::vector<std::string>>());
        IdIndex items(doc.at("item_ids").get<std::vector<std::string>>());

        if (type == "resbemf") {
            FactorModel model(scores, hp, users, items);
            const std::size_t per_row = scores.size() * hp.k;
            model.P.data() = reals(doc, "P", users.size() * per_row);
            model.Q.data() = reals(doc, "Q", items.size() * per_row);
            model.check();
            return model;
        }
        if (type == "pmf") {
            PmfModel model(scores, hp, users, items);
            model.global_mean = doc.at("global_mean").get<double>();
            model.P = reals(doc, "P", users.size() * hp.k);
            model.Q = reals(doc, "Q", items.size() * hp.k);
            return model;
        }
        throw InputError("unknown model_type '" + type + "'");
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed model file: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw InputError(std::string("invalid model file: ") + e.what());
    }
}

void save_model_file(const std::filesystem::path& path, const AnyModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot write model file '" + path.string() + "'");
    }
    std::visit([&out](const auto& m) { save_model(out, m); }, model);
}

AnyModel load_model_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open model file '" + path.string() + "'");
    }
    return load_model(in);
}

} // namespace resbemf
