#include "vacp/sim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include "vacp/io.hpp"

namespace vacp::sim {

double route_length(const ScenarioConfig& cfg) {
  double len = 0.0;
  for (size_t i = 1; i < cfg.route.size(); ++i) len += norm(cfg.route[i] - cfg.route[i - 1]);
  return len;
}

double route_duration(const ScenarioConfig& cfg) { return route_length(cfg) / cfg.vehicle_speed; }

Vec2 ground_position_at(const ScenarioConfig& cfg, double t) {
  require(t >= 0.0, ErrorCode::out_of_range, "t must be >= 0");
  double s = cfg.vehicle_speed * t;
  const double total = route_length(cfg);
  if (s > total * (1.0 + 1e-12))
    fail(ErrorCode::out_of_range,
         "t = " + std::to_string(t) + " s is beyond the route end (" + std::to_string(total) + " m)");
  s = std::min(s, total);
  for (size_t i = 1; i < cfg.route.size(); ++i) {
    const Vec2 a = cfg.route[i - 1];
    const Vec2 b = cfg.route[i];
    const double seg = norm(b - a);
    if (s <= seg || i + 1 == cfg.route.size()) {
      const double f = seg > 0 ? std::min(s / seg, 1.0) : 0.0;
      return a + f * (b - a);
    }
    s -= seg;
  }
  return cfg.route.back();
}

Vec3 trajectory_at(const ScenarioConfig& cfg, double t) {
  const Vec2 p = ground_position_at(cfg, t);
  return {p.x, p.y, cfg.rx_antenna_height};
}

namespace {

double free_space_amplitude(double wavelength, double path_length) {
  return wavelength / (4.0 * kPi * path_length);
}

double wrap_phase(double phi) {
  phi = std::fmod(phi, 2.0 * kPi);
  return phi < 0 ? phi + 2.0 * kPi : phi;
}

}  // namespace

PathSet synth_paths(const ScenarioConfig& cfg, const Vec3& rx_position, Rng& rng) {
  const double d_los = distance(cfg.tx_position, rx_position);
  require(d_los > 1e-9, ErrorCode::degenerate_geometry, "Tx and Rx positions coincide");

  const double lambda = cfg.wavelength();
  PathSet out;
  out.paths.push_back({d_los / kSpeedOfLight, free_space_amplitude(lambda, d_los),
                       rng.uniform(0.0, 2.0 * kPi)});
  for (const auto& s : cfg.scatterers) {
    const double d1 = distance(cfg.tx_position, s.position);
    const double d2 = distance(s.position, rx_position);
    require(d1 > 1e-9 && d2 > 1e-9, ErrorCode::degenerate_geometry,
            "scatterer coincides with Tx or Rx");
    const double total = d1 + d2;
    out.paths.push_back({total / kSpeedOfLight,
                         s.reflection_gain * free_space_amplitude(lambda, total),
                         rng.uniform(0.0, 2.0 * kPi)});
  }

  if (cfg.delay_snap == DelaySnap::on_grid) {
    const double tap = cfg.tap_spacing();
    for (auto& p : out.paths) p.delay_s = std::round(p.delay_s / tap) * tap;
  }
  std::stable_sort(out.paths.begin(), out.paths.end(),
                   [](const PathComponent& a, const PathComponent& b) { return a.delay_s < b.delay_s; });

  // Coherently merge paths that landed on the same delay so the set keeps
  // strictly increasing delays.
  std::vector<PathComponent> merged;
  for (const auto& p : out.paths) {
    if (!merged.empty() && p.delay_s == merged.back().delay_s) {
      const std::complex<double> sum =
          std::polar(merged.back().amplitude, -merged.back().phase) + std::polar(p.amplitude, -p.phase);
      merged.back().amplitude = std::abs(sum);
      merged.back().phase = wrap_phase(-std::arg(sum));
    } else {
      merged.push_back(p);
    }
  }
  out.paths = std::move(merged);
  return out;
}

FrequencySnapshot paths_to_cfr(const PathSet& paths, const ScenarioConfig& cfg) {
  FrequencySnapshot out;
  out.timestamp = paths.timestamp;
  const auto freqs = cfg.frequencies();
  out.values.assign(freqs.size(), {0.0, 0.0});
  for (const auto& p : paths.paths) {
    for (size_t k = 0; k < freqs.size(); ++k) {
      const double arg = p.phase + 2.0 * kPi * freqs[k] * p.delay_s;
      out.values[k] += std::polar(p.amplitude, -arg);
    }
  }
  return out;
}

FrequencySnapshot apply_equipment(const FrequencySnapshot& cfr, const cvec& h_tx, const cvec& h_rx,
                                  const cvec& x, double noise_std, Rng& rng) {
  const size_t n = cfr.values.size();
  require(h_tx.size() == n && h_rx.size() == n && x.size() == n, ErrorCode::contract,
          "equipment vectors must match N_f");
  for (size_t k = 0; k < n; ++k)
    if (h_tx[k] == std::complex<double>{} || h_rx[k] == std::complex<double>{})
      fail(ErrorCode::invalid_equipment_response,
           "equipment response is zero at bin " + std::to_string(k));

  FrequencySnapshot out;
  out.timestamp = cfr.timestamp;
  out.values.resize(n);
  for (size_t k = 0; k < n; ++k) out.values[k] = x[k] * h_tx[k] * cfr.values[k] * h_rx[k];
  if (noise_std > 0.0) {
    for (size_t k = 0; k < n; ++k)
      out.values[k] += std::complex<double>(noise_std * rng.normal(), noise_std * rng.normal());
  }
  return out;
}

EquipmentResponse synth_equipment(const ScenarioConfig& cfg, uint64_t seed) {
  Rng rng(stream_seed(seed, 0xE017));
  const int n = cfg.num_freq_points;
  EquipmentResponse eq;
  eq.h_tx.resize(static_cast<size_t>(n));
  eq.h_rx.resize(static_cast<size_t>(n));
  eq.x.assign(static_cast<size_t>(n), {1.0, 0.0});
  // Gentle amplitude ripple and phase slope; never near zero.
  const double a_tx = rng.uniform(0.02, 0.08), p_tx = rng.uniform(0.0, 2.0 * kPi);
  const double a_rx = rng.uniform(0.02, 0.08), p_rx = rng.uniform(0.0, 2.0 * kPi);
  const double slope_tx = rng.uniform(-0.5, 0.5), slope_rx = rng.uniform(-0.5, 0.5);
  for (int k = 0; k < n; ++k) {
    const double u = static_cast<double>(k) / n;
    eq.h_tx[static_cast<size_t>(k)] =
        std::polar(1.0 + a_tx * std::cos(2.0 * kPi * u + p_tx), slope_tx * u);
    eq.h_rx[static_cast<size_t>(k)] =
        std::polar(1.0 + a_rx * std::cos(4.0 * kPi * u + p_rx), slope_rx * u);
  }
  return eq;
}

ReferencePair make_reference(const ScenarioConfig& cfg, const EquipmentResponse& eq) {
  const int n = cfg.num_freq_points;
  ReferencePair ref;
  ref.h_ref.assign(static_cast<size_t>(n), {std::pow(10.0, -40.0 / 20.0), 0.0});
  ref.y_ref.resize(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    const auto i = static_cast<size_t>(k);
    ref.y_ref[i] = eq.x[i] * eq.h_tx[i] * ref.h_ref[i] * eq.h_rx[i];
  }
  return ref;
}

double noise_std_from_floor(double noise_floor_dbm) {
  if (noise_floor_dbm <= -300.0) return 0.0;
  return std::sqrt(power_from_db(noise_floor_dbm) / 2.0);
}

int campaign_snapshot_count(const ScenarioConfig& cfg) {
  const double duration = route_duration(cfg);
  // Snapshots at t = k / rate for k with t strictly inside the run.
  int count = static_cast<int>(std::ceil(duration * cfg.snapshot_rate - 1e-9));
  return std::max(count, 1);
}

void run_campaign(const ScenarioConfig& cfg, const std::function<void(const CampaignRecord&)>& sink) {
  cfg.validate();
  const EquipmentResponse eq = synth_equipment(cfg, cfg.rng_seed);
  const double noise_std = noise_std_from_floor(cfg.noise_floor_dbm);
  const int count = campaign_snapshot_count(cfg);
  for (int k = 0; k < count; ++k) {
    CampaignRecord rec;
    rec.index = static_cast<uint64_t>(k);
    const double t = static_cast<double>(k) / cfg.snapshot_rate;
    rec.rx_position = trajectory_at(cfg, t);
    Rng rng(stream_seed(cfg.rng_seed, rec.index));
    rec.truth = synth_paths(cfg, rec.rx_position, rng);
    rec.truth.timestamp = t;
    FrequencySnapshot cfr = paths_to_cfr(rec.truth, cfg);
    cfr.timestamp = t;
    rec.raw = apply_equipment(cfr, eq.h_tx, eq.h_rx, eq.x, noise_std, rng);
    sink(rec);
  }
}

std::vector<CampaignRecord> run_campaign(const ScenarioConfig& cfg) {
  std::vector<CampaignRecord> out;
  out.reserve(static_cast<size_t>(campaign_snapshot_count(cfg)));
  run_campaign(cfg, [&out](const CampaignRecord& r) { out.push_back(r); });
  return out;
}

void write_paths_file(const std::string& path, const std::vector<PathSet>& sets) {
  std::string out;
  for (const auto& ps : sets) {
    out += io::format_double(ps.timestamp);
    out += ' ';
    out += std::to_string(ps.paths.size());
    for (const auto& p : ps.paths) {
      out += ' ';
      out += io::format_double(p.delay_s * 1e9);
      out += ' ';
      out += io::format_double(p.amplitude);
      out += ' ';
      out += io::format_double(p.phase);
    }
    out += '\n';
  }
  io::write_file(path, out);
}

std::vector<PathSet> read_paths_file(const std::string& path) {
  std::vector<PathSet> out;
  std::istringstream in(io::read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    PathSet ps;
    size_t count = 0;
    if (!(ls >> ps.timestamp >> count))
      fail(ErrorCode::parse, path + ": bad path record at line " + std::to_string(lineno));
    ps.paths.resize(count);
    for (auto& p : ps.paths) {
      double tau_ns = 0.0;
      if (!(ls >> tau_ns >> p.amplitude >> p.phase))
        fail(ErrorCode::parse, path + ": truncated path record at line " + std::to_string(lineno));
      p.delay_s = tau_ns * 1e-9;
    }
    out.push_back(std::move(ps));
  }
  return out;
}

}  // namespace vacp::sim
