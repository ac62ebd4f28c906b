#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vacp/common.hpp"
#include "vacp/geometry.hpp"

namespace vacp {

/// Point reflector producing one single-bounce path.
struct Scatterer {
  Vec3 position;
  double reflection_gain = 1.0;  // linear amplitude factor in (0, 1]
};

/// Target-vehicle body dimensions used by the mask renderer.
struct VehicleFootprint {
  double length = 4.5;  // m, along world x
  double width = 1.8;   // m
  double height = 1.6;  // m
  std::string label = "sedan";
};

/// Multipath discrimination thresholds. The validity margin classifies taps
/// relative to the estimated noise floor; the detection margin is the bar the
/// strongest tap must clear for the snapshot to contain any path at all; the
/// dynamic range gate drops taps too far below the peak.
struct ExtractionConfig {
  double validity_margin_db = 6.0;
  double detection_margin_db = 20.0;
  double dynamic_range_db = 40.0;
};

enum class DelaySnap { on_grid, off_grid };

struct ScenarioConfig {
  std::string name = "scenario";

  double center_frequency = 5.9e9;  // Hz
  double bandwidth = 30e6;          // Hz
  int num_freq_points = 64;
  double snapshot_rate = 73.0;  // snapshots/s
  double frame_rate = 100.0;    // frames/s

  Vec3 tx_position{0.0, 0.0, 3.0};
  Vec3 camera_position{0.0, 0.0, 1.8};
  std::optional<Vec3> camera_look_at;  // default: route centroid at 1 m height
  double camera_fov_deg = 120.0;       // horizontal
  int camera_width = 1920;
  int camera_height = 1080;
  int mask_downsample = 10;  // grid = resolution / downsample

  double rx_antenna_height = 2.1;  // m
  double vehicle_speed = 4.63;     // m/s

  std::vector<Vec2> route;  // ground-plane waypoints, traversed at constant speed
  std::vector<Scatterer> scatterers;

  double noise_floor_dbm = -300.0;  // <= -300 means noiseless
  uint64_t rng_seed = 1;
  DelaySnap delay_snap = DelaySnap::on_grid;

  ExtractionConfig extraction;
  VehicleFootprint vehicle;

  double wavelength() const { return kSpeedOfLight / center_frequency; }
  double freq_spacing() const { return bandwidth / num_freq_points; }
  double tap_spacing() const { return 1.0 / bandwidth; }
  int grid_width() const { return camera_width / mask_downsample; }
  int grid_height() const { return camera_height / mask_downsample; }

  /// Absolute bin frequencies f_k = f_c - B/2 + k * B/N_f.
  std::vector<double> frequencies() const;

  /// Throws contract errors on invariant violations.
  void validate() const;
};

ScenarioConfig parse_scenario(std::string_view text);
ScenarioConfig load_scenario(const std::string& path);
std::string serialize_scenario(const ScenarioConfig& cfg);

/// Hash of the canonical serialization; recorded in stage manifests.
uint64_t config_hash(const ScenarioConfig& cfg);

}  // namespace vacp
