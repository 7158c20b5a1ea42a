#pragma once

#include <filesystem>
#include <iosfwd>
#include <variant>

#include "resbemf/model.hpp"
#include "resbemf/pmf.hpp"

namespace resbemf {

inline constexpr int model_format_version = 1;

// JSON envelope shared by both model types:
//
//   {"format_version": 1, "model_type": "resbemf" | "pmf", "score_values": [...],
//    "k", "gamma", "eta", "m", "seed", "user_ids": [...], "item_ids": [...],
//    "P": [...], "Q": [...]}
//
// P and Q are flattened row-major (row, then score, then factor). PMF models
// have no score axis and add "global_mean". Reals are written with 17
// significant digits so a load restores every bit.
void save_model(std::ostream& out, const FactorModel& model);
void save_model(std::ostream& out, const PmfModel& model);

using AnyModel = std::variant<FactorModel, PmfModel>;

/// Throws InputError for malformed documents, unknown format versions or
/// inconsistent shapes.
AnyModel load_model(std::istream& in);

void save_model_file(const std::filesystem::path& path, const AnyModel& model);
AnyModel load_model_file(const std::filesystem::path& path);

} // namespace resbemf
