#include <doctest.h>

#include <cmath>
#include <complex>

#include "test_helpers.hpp"
#include "vacp/calib.hpp"
#include "vacp/rng.hpp"

using namespace vacp;
using namespace vacp::calib;

TEST_CASE("calibrate: identity and simple ratio") {
  const size_t n = 64;
  sim::FrequencySnapshot y;
  y.values.assign(n, {6.0, 0.0});
  ReferenceCapture ref;
  ref.y_ref.assign(n, {6.0, 0.0});
  ref.h_ref.assign(n, {1.0, 0.0});

  const auto ident = calibrate(y, ref);
  for (const auto& v : ident.values) CHECK(std::abs(v - std::complex<double>{1.0, 0.0}) < 1e-15);

  y.values.assign(n, {3.0, 0.0});
  const auto half = calibrate(y, ref);
  for (const auto& v : half.values) CHECK(v.real() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("calibrate: degenerate reference bin names the bin") {
  const size_t n = 16;
  sim::FrequencySnapshot y;
  y.values.assign(n, {1.0, 0.0});
  ReferenceCapture ref;
  ref.y_ref.assign(n, {1.0, 0.0});
  ref.h_ref.assign(n, {1.0, 0.0});
  ref.y_ref[9] = {0.0, 0.0};
  try {
    calibrate(y, ref);
    FAIL("expected division-degenerate error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::division_degenerate);
    CHECK(std::string(e.what()).find("9") != std::string::npos);
  }
}

TEST_CASE("calibrate inverts apply_equipment exactly when noiseless") {
  ScenarioConfig cfg = testing::straight_scenario();
  const auto eq = sim::synth_equipment(cfg, 99);
  const auto pair = sim::make_reference(cfg, eq);
  Rng rng(7);

  for (int trial = 0; trial < 20; ++trial) {
    sim::PathSet ps;
    const int paths = 1 + static_cast<int>(rng.below(4));
    for (int p = 0; p < paths; ++p)
      ps.paths.push_back({rng.uniform(0.0, 1e-6), rng.uniform(0.01, 1.0), rng.uniform(0.0, 2.0 * kPi)});
    const auto h = sim::paths_to_cfr(ps, cfg);
    const auto y = sim::apply_equipment(h, eq.h_tx, eq.h_rx, eq.x, 0.0, rng);
    const auto recovered = calibrate(y, {pair.y_ref, pair.h_ref});
    for (size_t k = 0; k < h.values.size(); ++k) {
      const double rel = std::abs(recovered.values[k] - h.values[k]) / std::abs(h.values[k]);
      CHECK(rel <= 1e-9);
    }
  }
}

TEST_CASE("calibrate is linear in the received spectrum") {
  const size_t n = 32;
  Rng rng(8);
  ReferenceCapture ref;
  ref.y_ref.resize(n);
  ref.h_ref.resize(n);
  sim::FrequencySnapshot y1, y2;
  y1.values.resize(n);
  y2.values.resize(n);
  for (size_t k = 0; k < n; ++k) {
    ref.y_ref[k] = std::polar(rng.uniform(0.5, 2.0), rng.uniform(0.0, 2.0 * kPi));
    ref.h_ref[k] = std::polar(rng.uniform(0.5, 2.0), rng.uniform(0.0, 2.0 * kPi));
    y1.values[k] = std::polar(rng.uniform(0.1, 1.0), rng.uniform(0.0, 2.0 * kPi));
    y2.values[k] = std::polar(rng.uniform(0.1, 1.0), rng.uniform(0.0, 2.0 * kPi));
  }
  const std::complex<double> a{1.7, -0.3}, b{-0.4, 2.2};
  sim::FrequencySnapshot combo;
  combo.values.resize(n);
  for (size_t k = 0; k < n; ++k) combo.values[k] = a * y1.values[k] + b * y2.values[k];

  const auto c1 = calibrate(y1, ref);
  const auto c2 = calibrate(y2, ref);
  const auto cc = calibrate(combo, ref);
  for (size_t k = 0; k < n; ++k) {
    const auto expect = a * c1.values[k] + b * c2.values[k];
    CHECK(std::abs(cc.values[k] - expect) <= 1e-12 * std::abs(expect));
  }
}

TEST_CASE("to_impulse_response: delta, analytic tap placement, Parseval") {
  ScenarioConfig cfg = testing::straight_scenario();
  const size_t n = static_cast<size_t>(cfg.num_freq_points);

  sim::FrequencySnapshot flat;
  flat.values.assign(n, {1.0, 0.0});
  const auto ir = to_impulse_response(flat, cfg.bandwidth);
  CHECK(ir.tap_spacing == doctest::Approx(1.0 / cfg.bandwidth));
  CHECK(std::abs(ir.taps[0] - std::complex<double>{1.0, 0.0}) < 1e-12);
  for (size_t m = 1; m < n; ++m) CHECK(std::abs(ir.taps[m]) < 1e-12);

  // Single path at tau = m/B lands on tap m with magnitude alpha; checked
  // against a direct DFT-pair summation oracle.
  for (const int m : {3, 17, 40}) {
    sim::PathSet ps;
    const double alpha = 0.42;
    ps.paths = {{m / cfg.bandwidth, alpha, 1.3}};
    const auto cfr = sim::paths_to_cfr(ps, cfg);
    const auto taps = to_impulse_response(cfr, cfg.bandwidth);
    for (size_t i = 0; i < n; ++i) {
      std::complex<double> oracle{0.0, 0.0};
      for (size_t k = 0; k < n; ++k)
        oracle += cfr.values[k] *
                  std::exp(std::complex<double>(0.0, 2.0 * kPi * static_cast<double>(k * i) / n));
      oracle /= static_cast<double>(n);
      CHECK(std::abs(taps.taps[i] - oracle) < 1e-12);
    }
    CHECK(std::abs(taps.taps[static_cast<size_t>(m)]) == doctest::Approx(alpha).epsilon(1e-12));
    double off_energy = 0.0;
    for (size_t i = 0; i < n; ++i)
      if (i != static_cast<size_t>(m)) off_energy += std::norm(taps.taps[i]);
    CHECK(off_energy < 1e-20);
  }

  // Parseval: sum |taps|^2 = (1/N) sum |H|^2.
  Rng rng(9);
  sim::FrequencySnapshot rand_snap;
  rand_snap.values.resize(n);
  for (auto& v : rand_snap.values) v = std::polar(rng.uniform(0.1, 1.0), rng.uniform(0.0, 2.0 * kPi));
  const auto rir = to_impulse_response(rand_snap, cfg.bandwidth);
  double tap_e = 0.0, bin_e = 0.0;
  for (const auto& t : rir.taps) tap_e += std::norm(t);
  for (const auto& v : rand_snap.values) bin_e += std::norm(v);
  CHECK(tap_e == doctest::Approx(bin_e / static_cast<double>(n)).epsilon(1e-12));
}

TEST_CASE("forward transform inverts to_impulse_response to 1e-12") {
  ScenarioConfig cfg = testing::straight_scenario();
  const size_t n = static_cast<size_t>(cfg.num_freq_points);
  Rng rng(10);
  sim::FrequencySnapshot snap;
  snap.values.resize(n);
  for (auto& v : snap.values) v = std::polar(rng.uniform(0.1, 2.0), rng.uniform(0.0, 2.0 * kPi));
  const auto ir = to_impulse_response(snap, cfg.bandwidth);
  const cvec back = forward_cfr(ir.taps);
  for (size_t k = 0; k < n; ++k) CHECK(std::abs(back[k] - snap.values[k]) <= 1e-12);
}

TEST_CASE("tap energy equals path energy for on-grid path sets") {
  ScenarioConfig cfg = testing::straight_scenario();
  cfg.scatterers = {{{20.0, 30.0, 4.0}, 0.5}, {{-25.0, 18.0, 4.0}, 0.8}};
  Rng rng(11);
  const auto ps = sim::synth_paths(cfg, {10.0, 10.0, 2.1}, rng);
  const auto cfr = sim::paths_to_cfr(ps, cfg);
  const auto ir = to_impulse_response(cfr, cfg.bandwidth);
  double tap_e = 0.0, path_e = 0.0;
  for (const auto& t : ir.taps) tap_e += std::norm(t);
  for (const auto& p : ps.paths) path_e += p.amplitude * p.amplitude;
  CHECK(tap_e == doctest::Approx(path_e).epsilon(1e-9));
}

TEST_CASE("reference file round-trips") {
  testing::TempDir tmp("ref");
  ScenarioConfig cfg = testing::straight_scenario();
  const auto eq = sim::synth_equipment(cfg, 5);
  const auto pair = sim::make_reference(cfg, eq);
  write_reference_file(tmp.path("ref.bin"), {pair.y_ref, pair.h_ref}, 0xABCD);
  const auto loaded = read_reference_file(tmp.path("ref.bin"));
  CHECK(loaded.y_ref == pair.y_ref);
  CHECK(loaded.h_ref == pair.h_ref);
}
