#pragma once

#include <span>
#include <string>
#include <vector>

#include "vacp/calib.hpp"
#include "vacp/common.hpp"
#include "vacp/scenario.hpp"

namespace vacp::chparams {

inline constexpr double kKFactorCapDb = 40.0;

/// Per-snapshot labels. Fields are NaN when the snapshot was flagged invalid.
struct ChannelCharacteristics {
  double timestamp = 0.0;
  double pl_db = 0.0;
  double k_db = 0.0;
  double rms_ds_ns = 0.0;
};

struct Pdp {
  double timestamp = 0.0;
  std::vector<double> power;  // |h|^2 per tap
  double tap_spacing = 0.0;
};

struct ValidPaths {
  std::vector<int> indices;
  std::vector<double> powers;
  int los_index = -1;  // tap index of the strongest valid path
};

/// Sliding window spanning forty carrier wavelengths of travel.
struct WindowSpec {
  double span_meters = 0.0;
  int span_snapshots = 1;
};

WindowSpec window_snapshots(const ScenarioConfig& cfg);

/// Centered window [center - W/2, center + W - W/2) truncated to [0, n).
struct WindowBounds {
  int lo = 0;
  int hi = 0;  // exclusive
};
WindowBounds window_bounds(int center, int n, int span);

/// PL = -10 log10( (1/W) sum_window sum_taps |h|^2 ), W = snapshots actually
/// in the (truncated) window.
double path_loss(std::span<const calib::ImpulseResponse> window);

/// Noise floor = median power of the weakest 25% of taps. Valid taps are
/// local power maxima above both floor + validity margin and peak - dynamic
/// range; the strongest tap must additionally clear floor + detection margin
/// or the snapshot has no valid path.
ValidPaths discriminate_paths(const calib::ImpulseResponse& ir, const ExtractionConfig& ex = {});

/// K = P_los / sum of other valid-path powers, in dB; +40 dB cap when the
/// LoS path is the only valid one.
double k_factor(const ValidPaths& vp);

Pdp pdp(const calib::ImpulseResponse& ir);

/// Element-wise mean over the window.
Pdp apdp(std::span<const Pdp> window);

/// sqrt( sum P tau^2 / sum P - (sum P tau / sum P)^2 ) over the valid-path
/// taps of the APDP, tau in ns. Radicands in (-1e-12, 0) clamp to zero.
double rms_delay_spread(const Pdp& apdp, const ValidPaths& vp);

struct ExtractionRecord {
  int index = 0;
  double timestamp = 0.0;
  double pl_db = 0.0;
  double k_db = 0.0;
  double rms_ds_ns = 0.0;
  bool valid = false;
};

/// One record per snapshot; snapshots whose discrimination fails are flagged
/// rather than aborting the stream.
std::vector<ExtractionRecord> extract_all(std::span<const calib::ImpulseResponse> run,
                                          const ScenarioConfig& cfg);

/// CSV with contractual column order:
/// index,timestamp,pl_db,k_db,rms_ds_ns,valid_flag
void write_characteristics_csv(const std::string& path, std::span<const ExtractionRecord> records);
std::vector<ExtractionRecord> read_characteristics_csv(const std::string& path);

}  // namespace vacp::chparams
