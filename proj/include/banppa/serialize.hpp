#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include <json.hpp>

#include "banppa/evaluate.hpp"
#include "banppa/optimize.hpp"
#include "banppa/synthgen.hpp"

namespace banppa {

nlohmann::json state_to_json(const ModelState& state);
ModelState state_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const FitConfig& cfg);
FitConfig config_from_json(const nlohmann::json& j);

// Fit artifact. The JSON itself is byte-deterministic for a given fit; the
// wall-clock time goes into `<path>.meta.json` so rerunning an identical fit
// reproduces the main file exactly.
void save_fit(const FitResult& fit, std::uint64_t train_checksum, const std::string& path);

struct LoadedFit {
  FitResult fit;
  std::uint64_t train_checksum = 0;
};
LoadedFit load_fit(const std::string& path);

// Objective value per accepted sweep, flat CSV.
void save_trace_csv(const FitResult& fit, const std::string& path);
// Volume-constraint gaps per outer iteration, tidy CSV (constrained variant).
void save_residuals_csv(const FitResult& fit, const std::string& path);

// report.json plus flat tables (ner, uner, volumes, allocation shares,
// per-sequence intensity curves, per-component second-moment curves) under
// `dir`. Wall time goes to report.meta.json.
void save_report(const EvalReport& report, const ModelState& state, std::uint64_t config_hash,
                 const std::string& dir);

void save_ground_truth(const SynthSpec& spec, const GroundTruth& truth, const std::string& path);
std::pair<SynthSpec, GroundTruth> load_ground_truth(const std::string& path);

}  // namespace banppa
