#pragma once

#include <functional>
#include <vector>

#include "vacp/common.hpp"
#include "vacp/geometry.hpp"
#include "vacp/rng.hpp"
#include "vacp/scenario.hpp"

namespace vacp::sim {

struct PathComponent {
  double delay_s = 0.0;
  double amplitude = 0.0;  // linear
  double phase = 0.0;      // radians in [0, 2pi)
};

/// Multipath set for one snapshot; paths sorted by delay, first path is the
/// line-of-sight path.
struct PathSet {
  double timestamp = 0.0;
  std::vector<PathComponent> paths;
};

struct FrequencySnapshot {
  double timestamp = 0.0;
  cvec values;  // length N_f over [f_c - B/2, f_c + B/2)
};

double route_length(const ScenarioConfig& cfg);
double route_duration(const ScenarioConfig& cfg);

/// Constant-speed position along the route polyline at time t. z is the
/// receive antenna height. Throws out-of-range past the route end.
Vec3 trajectory_at(const ScenarioConfig& cfg, double t);

/// Ground-plane position (z = 0) of the vehicle reference point at time t.
Vec2 ground_position_at(const ScenarioConfig& cfg, double t);

/// Line-of-sight path plus one single-bounce path per scatterer. Phases are
/// drawn i.i.d. uniform on [0, 2pi). In on_grid mode delays are snapped to
/// the tap grid m/B and coinciding paths are merged coherently.
PathSet synth_paths(const ScenarioConfig& cfg, const Vec3& rx_position, Rng& rng);

/// H(f_k) = sum_l alpha_l e^{-j phi_l} e^{-j 2 pi f_k tau_l}.
FrequencySnapshot paths_to_cfr(const PathSet& paths, const ScenarioConfig& cfg);

/// Y = X . H_tx . H . H_rx (+ complex Gaussian noise, noise_std per
/// component). All vectors must share the channel's length; equipment
/// responses must be nonzero in every bin.
FrequencySnapshot apply_equipment(const FrequencySnapshot& cfr, const cvec& h_tx, const cvec& h_rx,
                                  const cvec& x, double noise_std, Rng& rng);

struct EquipmentResponse {
  cvec h_tx;
  cvec h_rx;
  cvec x;  // transmit spectrum, flat 1 by default
};

/// Smooth deterministic transmit/receive response ripple derived from the
/// seed; stands in for cables, amplifiers and adapters.
EquipmentResponse synth_equipment(const ScenarioConfig& cfg, uint64_t seed);

/// Back-to-back capture through a flat -40 dB reference attenuator.
struct ReferencePair {
  cvec y_ref;
  cvec h_ref;
};
ReferencePair make_reference(const ScenarioConfig& cfg, const EquipmentResponse& eq);

/// Per-component noise std for a given floor; <= -300 dBm means noiseless.
double noise_std_from_floor(double noise_floor_dbm);

struct CampaignRecord {
  uint64_t index = 0;
  FrequencySnapshot raw;  // received spectrum, equipment and noise applied
  Vec3 rx_position;
  PathSet truth;
};

int campaign_snapshot_count(const ScenarioConfig& cfg);

/// Streams snapshots at 1/snapshot_rate spacing over the route. Pure per
/// (config, seed, index); deterministic.
void run_campaign(const ScenarioConfig& cfg, const std::function<void(const CampaignRecord&)>& sink);
std::vector<CampaignRecord> run_campaign(const ScenarioConfig& cfg);

/// Ground-truth sidecar: one line per snapshot: timestamp, L, then
/// (tau_ns, alpha, phi) triples.
void write_paths_file(const std::string& path, const std::vector<PathSet>& sets);
std::vector<PathSet> read_paths_file(const std::string& path);

}  // namespace vacp::sim
