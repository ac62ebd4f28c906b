#include <doctest.h>

#include <cmath>
#include <complex>

#include "test_helpers.hpp"
#include "vacp/io.hpp"
#include "vacp/sim.hpp"

using namespace vacp;
using namespace vacp::sim;

namespace {

// Arc-length oracle: walk the polyline in tiny steps until the target
// distance is covered.
Vec2 brute_force_position(const std::vector<Vec2>& route, double target_s) {
  double remaining = target_s;
  for (size_t i = 1; i < route.size(); ++i) {
    const double seg = norm(route[i] - route[i - 1]);
    const int steps = 200000;
    for (int k = 0; k < steps; ++k) {
      const double ds = seg / steps;
      if (remaining <= ds) {
        const double f = (k + remaining / ds) / steps;
        return route[i - 1] + f * (route[i] - route[i - 1]);
      }
      remaining -= ds;
    }
  }
  return route.back();
}

}  // namespace

TEST_CASE("trajectory: constant-speed traversal") {
  ScenarioConfig cfg = testing::straight_scenario();
  cfg.route = {{0.0, 0.0}, {100.0, 0.0}};
  cfg.vehicle_speed = 5.0;

  const Vec3 p = trajectory_at(cfg, 10.0);
  CHECK(p.x == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(p.y == doctest::Approx(0.0));
  CHECK(p.z == doctest::Approx(cfg.rx_antenna_height));

  const Vec3 p0 = trajectory_at(cfg, 0.0);
  CHECK(p0.x == doctest::Approx(0.0));
  CHECK(p0.y == doctest::Approx(0.0));
}

TEST_CASE("trajectory: L-shaped route against arc-length oracle") {
  ScenarioConfig cfg = testing::straight_scenario();
  cfg.route = {{0.0, 0.0}, {60.0, 0.0}, {60.0, 40.0}};
  cfg.vehicle_speed = 4.0;

  const Vec3 p = trajectory_at(cfg, 20.0);  // 80 m in: 20 m into the second leg
  CHECK(p.x == doctest::Approx(60.0).epsilon(1e-9));
  CHECK(p.y == doctest::Approx(20.0).epsilon(1e-9));

  const Vec2 oracle = brute_force_position(cfg.route, 4.0 * 20.0);
  CHECK(p.x == doctest::Approx(oracle.x).epsilon(1e-4));
  CHECK(p.y == doctest::Approx(oracle.y).epsilon(1e-4));
}

TEST_CASE("trajectory: beyond route end is out of range") {
  ScenarioConfig cfg = testing::straight_scenario();
  cfg.route = {{0.0, 0.0}, {10.0, 0.0}};
  cfg.vehicle_speed = 1.0;
  CHECK_THROWS_AS(trajectory_at(cfg, 10.5), Error);
  try {
    trajectory_at(cfg, 10.5);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::out_of_range);
  }
}

TEST_CASE("synth_paths: LoS delay and free-space amplitude") {
  ScenarioConfig cfg = testing::straight_scenario();
  cfg.delay_snap = DelaySnap::off_grid;
  cfg.tx_position = {0.0, 0.0, 2.1};
  Rng rng(1);

  const Vec3 rx{50.0, 0.0, 2.1};
  const PathSet ps = synth_paths(cfg, rx, rng);
  REQUIRE(ps.paths.size() == 1);
  CHECK(ps.paths[0].delay_s * 1e9 == doctest::Approx(166.78).epsilon(1e-4));
  CHECK(ps.paths[0].amplitude == doctest::Approx(cfg.wavelength() / (4.0 * kPi * 50.0)).epsilon(1e-12));
  CHECK(ps.paths[0].phase >= 0.0);
  CHECK(ps.paths[0].phase < 2.0 * kPi);
}

TEST_CASE("synth_paths: collinear scatterer adds 10 m excess path") {
  ScenarioConfig cfg = testing::straight_scenario();
  cfg.delay_snap = DelaySnap::off_grid;
  cfg.tx_position = {0.0, 0.0, 2.1};
  cfg.scatterers = {{{55.0, 0.0, 2.1}, 0.6}};  // 5 m behind Rx: excess = 2*5 m
  Rng rng(2);

  const PathSet ps = synth_paths(cfg, {50.0, 0.0, 2.1}, rng);
  REQUIRE(ps.paths.size() == 2);
  const double delta_ns = (ps.paths[1].delay_s - ps.paths[0].delay_s) * 1e9;
  CHECK(delta_ns == doctest::Approx(10.0 / kSpeedOfLight * 1e9).epsilon(1e-9));
  CHECK(delta_ns == doctest::Approx(33.36).epsilon(1e-3));
}

TEST_CASE("synth_paths: coincident Tx/Rx is degenerate") {
  ScenarioConfig cfg = testing::straight_scenario();
  Rng rng(3);
  CHECK_THROWS_AS(synth_paths(cfg, cfg.tx_position, rng), Error);
}

TEST_CASE("synth_paths: delays sorted strictly increasing, on-grid snap") {
  ScenarioConfig cfg = testing::straight_scenario();
  cfg.scatterers = {{{20.0, 30.0, 4.0}, 0.5}, {{-25.0, 18.0, 4.0}, 0.8}};
  Rng rng(4);
  const PathSet ps = synth_paths(cfg, {10.0, 10.0, 2.1}, rng);
  const double tap = cfg.tap_spacing();
  for (size_t i = 0; i < ps.paths.size(); ++i) {
    if (i > 0) CHECK(ps.paths[i].delay_s > ps.paths[i - 1].delay_s);
    const double cells = ps.paths[i].delay_s / tap;
    CHECK(cells == doctest::Approx(std::round(cells)).epsilon(1e-9));
  }
}

TEST_CASE("paths_to_cfr: identity and analytic phase winding") {
  ScenarioConfig cfg = testing::straight_scenario();
  PathSet ps;
  ps.paths = {{0.0, 1.0, 0.0}};
  const FrequencySnapshot snap = paths_to_cfr(ps, cfg);
  for (const auto& v : snap.values) {
    CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v.imag() == doctest::Approx(0.0).epsilon(1e-12));
  }

  // tau = 1/B: winding rate is one full turn per bandwidth, 2pi/N per bin.
  PathSet ps2;
  ps2.paths = {{1.0 / cfg.bandwidth, 1.0, 0.0}};
  const FrequencySnapshot s2 = paths_to_cfr(ps2, cfg);
  double total = 0.0;
  for (size_t k = 1; k < s2.values.size(); ++k) {
    double d = std::arg(s2.values[k] / s2.values[k - 1]);
    total += d;
    CHECK(std::abs(d + 2.0 * kPi / cfg.num_freq_points) < 1e-9);
  }
  const double n = cfg.num_freq_points;
  CHECK(std::abs(total * n / (n - 1.0)) == doctest::Approx(2.0 * kPi).epsilon(1e-9));
}

TEST_CASE("paths_to_cfr: equals independent per-frequency summation") {
  ScenarioConfig cfg = testing::straight_scenario();
  PathSet ps;
  ps.paths = {{100e-9, 0.7, 1.1}, {233.33e-9, 0.2, 4.0}};
  const FrequencySnapshot snap = paths_to_cfr(ps, cfg);
  const auto freqs = cfg.frequencies();
  for (size_t k = 0; k < freqs.size(); ++k) {
    std::complex<double> expect{0.0, 0.0};
    for (const auto& p : ps.paths)
      expect += p.amplitude *
                std::exp(std::complex<double>(0.0, -(p.phase + 2.0 * kPi * freqs[k] * p.delay_s)));
    CHECK(std::abs(snap.values[k] - expect) <= 1e-12 * std::abs(expect));
  }
}

TEST_CASE("apply_equipment: element-wise product and errors") {
  ScenarioConfig cfg = testing::straight_scenario();
  const size_t n = static_cast<size_t>(cfg.num_freq_points);
  FrequencySnapshot h;
  h.values.assign(n, {0.5, 0.0});
  const cvec ones(n, {1.0, 0.0});
  const cvec twos(n, {2.0, 0.0});
  const cvec threes(n, {3.0, 0.0});
  Rng rng(5);

  const FrequencySnapshot y = apply_equipment(h, twos, threes, ones, 0.0, rng);
  for (const auto& v : y.values) CHECK(v.real() == doctest::Approx(3.0).epsilon(1e-12));

  cvec bad = twos;
  bad[7] = {0.0, 0.0};
  CHECK_THROWS_AS(apply_equipment(h, bad, threes, ones, 0.0, rng), Error);
}

TEST_CASE("apply_equipment: Monte-Carlo noise power") {
  ScenarioConfig cfg = testing::straight_scenario();
  const size_t n = static_cast<size_t>(cfg.num_freq_points);
  FrequencySnapshot h;
  h.values.assign(n, {1.0, 0.0});
  const cvec ones(n, {1.0, 0.0});
  Rng rng(6);

  const double noise_std = 1e-3;
  double acc = 0.0;
  const int draws = 10000;
  for (int d = 0; d < draws; ++d) {
    const FrequencySnapshot y = apply_equipment(h, ones, ones, ones, noise_std, rng);
    for (size_t k = 0; k < n; ++k) acc += std::norm(y.values[k] - h.values[k]);
  }
  const double mean = acc / (static_cast<double>(draws) * n);
  CHECK(mean > 1e-6);  // 2e-6 within 50%
  CHECK(mean < 3e-6);
}

TEST_CASE("run_campaign: count, timestamps, determinism") {
  ScenarioConfig cfg = testing::straight_scenario();
  cfg.route = {{-23.15, 10.0}, {23.15, 10.0}};  // 46.3 m at 4.63 m/s = 10 s
  const auto records = run_campaign(cfg);
  CHECK(records.size() == 730);
  for (size_t k = 0; k < records.size(); ++k)
    CHECK(records[k].raw.timestamp == static_cast<double>(k) / cfg.snapshot_rate);

  const auto again = run_campaign(cfg);
  REQUIRE(again.size() == records.size());
  bool identical = true;
  for (size_t k = 0; k < records.size(); ++k) {
    if (records[k].raw.values != again[k].raw.values) identical = false;
    if (records[k].truth.paths.size() != again[k].truth.paths.size()) identical = false;
  }
  CHECK(identical);

  ScenarioConfig other = cfg;
  other.rng_seed = cfg.rng_seed + 1;
  const auto different = run_campaign(other);
  bool phases_differ = false;
  for (size_t k = 0; k < records.size() && !phases_differ; ++k)
    if (records[k].truth.paths[0].phase != different[k].truth.paths[0].phase) phases_differ = true;
  CHECK(phases_differ);
}

TEST_CASE("paths sidecar file round-trips") {
  testing::TempDir tmp("paths");
  std::vector<PathSet> sets(3);
  for (size_t i = 0; i < sets.size(); ++i) {
    sets[i].timestamp = static_cast<double>(i) / 73.0;
    sets[i].paths = {{100e-9 * (i + 1.0), 0.25 + 0.1 * i, 1.0 + 0.2 * i},
                     {300e-9, 0.125, 2.5}};
  }
  write_paths_file(tmp.path("paths.txt"), sets);
  const auto loaded = read_paths_file(tmp.path("paths.txt"));
  REQUIRE(loaded.size() == sets.size());
  for (size_t i = 0; i < sets.size(); ++i) {
    CHECK(loaded[i].timestamp == sets[i].timestamp);
    REQUIRE(loaded[i].paths.size() == sets[i].paths.size());
    for (size_t j = 0; j < sets[i].paths.size(); ++j) {
      CHECK(loaded[i].paths[j].delay_s == doctest::Approx(sets[i].paths[j].delay_s).epsilon(1e-15));
      CHECK(loaded[i].paths[j].amplitude == sets[i].paths[j].amplitude);
      CHECK(loaded[i].paths[j].phase == sets[i].paths[j].phase);
    }
  }
}
