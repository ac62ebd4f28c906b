#pragma once

#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "vacp/common.hpp"
#include "vacp/dataset.hpp"
#include "vacp/predictor.hpp"
#include "vacp/scenario.hpp"

namespace vacp::eval {

struct EvalReport {
  std::string experiment;  // self_val | cross_val | vehicle_swap
  std::string image_mode;
  std::string target;
  double rmse = 0.0;
  int n_samples = 0;
  std::vector<std::tuple<int, double, double>> per_sample;  // (id, truth, pred)
};

/// sqrt( (1/M) sum (y - yhat)^2 ).
double rmse(std::span<const double> truth, std::span<const double> preds);

EvalReport make_report(const std::string& experiment, const std::string& image_mode,
                       const std::string& target, std::span<const int> ids,
                       std::span<const double> truth, std::span<const double> preds);

/// Everything one scenario's pipeline produced that evaluation needs.
struct ScenarioArtifacts {
  ScenarioConfig config;
  dataset::DatasetManifest manifest;
  std::string mask_path;
  uint64_t scene_key = 0;  // config hash, seeds clutter composition
};

ScenarioArtifacts load_artifacts(const std::string& config_path, const std::string& manifest_path,
                                 const std::string& mask_path);

struct TrainRun {
  predictor::TrainedModel model;
  dataset::Splits splits;
};

/// Trains one model on the scenario's train/val splits (seeded splits and
/// training streams).
TrainRun train_scenario_model(const ScenarioArtifacts& art, vision::ImageMode mode,
                              const std::string& target, uint64_t seed,
                              const predictor::TrainConfig& base = {});

/// Evaluates the model on its own scenario's contiguous test block.
EvalReport run_self_validation(const ScenarioArtifacts& art, const TrainRun& run);

/// Evaluates a model trained elsewhere on a contiguous block of
/// round(0.2 * M) snapshots from the test scenario (seeded start). The model
/// is reused verbatim, no retraining.
EvalReport run_cross_validation(const predictor::TrainedModel& model,
                                const ScenarioArtifacts& test_art, uint64_t seed);

/// Re-renders a contiguous block (min(900, 20% of M), seeded start) with a
/// swapped vehicle footprint and evaluates without retraining. Frames the
/// swapped footprint makes invisible are skipped.
EvalReport run_vehicle_swap(const ScenarioArtifacts& art, const predictor::TrainedModel& model,
                            const VehicleFootprint& footprint, uint64_t seed);

/// Block reused by run_vehicle_swap; exposed so no-op swaps can be compared
/// against direct evaluation on the very same samples.
std::vector<int> swap_block_indices(const ScenarioArtifacts& art, uint64_t seed);
EvalReport evaluate_indices(const ScenarioArtifacts& art, const predictor::TrainedModel& model,
                            std::span<const int> indices, const std::string& experiment);

/// CSV rows: experiment,image_mode,target,rmse,n_samples (contractual order).
/// Leading '#' lines annotate the street-campaign reference RMSE cells.
void emit_table(std::span<const EvalReport> reports, const std::string& path, bool annotate = true);
std::vector<EvalReport> parse_table(const std::string& path);

/// CSV (index,truth,pred) per-sample series for external plotting.
void write_series(const EvalReport& report, const std::string& path);

}  // namespace vacp::eval
