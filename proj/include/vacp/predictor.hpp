#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vacp/common.hpp"
#include "vacp/dataset.hpp"
#include "vacp/predictor_net.hpp"
#include "vacp/vision.hpp"

namespace vacp::predictor {

int target_index(const std::string& target);  // pl_db 0, k_db 1, rms_ds_ns 2
const char* target_name(int index);
double select_label(const dataset::ManifestRecord& r, int target);

struct TrainConfig {
  int batch_size = 64;
  int epochs = 60;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::string target = "pl_db";
  bool label_standardize = true;
  uint64_t rng_seed = 0;
  vision::ImageMode image_mode = vision::ImageMode::single_mask;
};

struct TrainedModel {
  ArchSpec arch;
  vision::ImageMode image_mode = vision::ImageMode::single_mask;
  std::string target = "pl_db";
  double label_mean = 0.0;
  double label_std = 1.0;
  std::vector<float> params;
  std::vector<std::pair<double, double>> curve;  // per-epoch (train, val) loss
  int best_epoch = 0;
};

/// Composed input planes, bit-packed per sample, plus raw-unit labels.
struct SampleSet {
  int channels = 1;
  int height = 0;
  int width = 0;
  std::vector<std::vector<uint8_t>> planes;
  std::vector<double> labels;

  size_t cell_count() const { return static_cast<size_t>(channels) * height * width; }
  void unpack(size_t sample, float* out) const;
};

/// Loads every manifest record's mask, composes the image-mode planes and
/// selects the target label. scene_key seeds the deterministic clutter.
SampleSet build_samples(const dataset::DatasetManifest& manifest, const std::string& mask_path,
                        vision::ImageMode mode, const std::string& target, uint64_t scene_key);

/// Mean square error: (1/M) sum (label - pred)^2.
double loss(std::span<const double> preds, std::span<const double> labels);

/// Adam over shuffled batches; records the loss curve and returns the
/// checkpoint with the lowest validation loss. Deterministic given the seed.
TrainedModel train(const SampleSet& data, const dataset::Splits& splits, const TrainConfig& cfg);

/// De-standardized prediction for one already-composed input.
double forward_input(const TrainedModel& model, std::span<const float> input);

/// Single-channel convenience path for single_mask models.
double forward(const TrainedModel& model, const vision::MaskFrame& mask);

std::vector<double> predict_samples(const TrainedModel& model, const SampleSet& data,
                                    std::span<const int> indices);

/// One prediction per visible frame, order preserved.
std::vector<double> predict_run(const TrainedModel& model, std::span<const vision::MaskFrame> frames,
                                uint64_t scene_key);

void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

}  // namespace vacp::predictor
