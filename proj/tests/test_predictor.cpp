#include <doctest.h>

#include <chrono>
#include <cmath>

#include "gradient_check.hpp"
#include "test_helpers.hpp"
#include "vacp/predictor.hpp"

using namespace vacp;
using namespace vacp::predictor;

namespace {

// Masks whose box position encodes the label: learnable by construction.
SampleSet synthetic_set(int n, int h = 48, int w = 64, uint64_t seed = 1) {
  SampleSet s;
  s.channels = 1;
  s.height = h;
  s.width = w;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const int bx = 2 + static_cast<int>(rng.below(static_cast<uint64_t>(w - 12)));
    const int by = 2 + static_cast<int>(rng.below(static_cast<uint64_t>(h - 8)));
    std::vector<uint8_t> bits((static_cast<size_t>(h) * w + 7) / 8, 0);
    for (int y = by; y < by + 5; ++y)
      for (int x = bx; x < bx + 9; ++x) {
        const size_t cell = static_cast<size_t>(y) * w + x;
        bits[cell >> 3] |= static_cast<uint8_t>(1u << (cell & 7));
      }
    s.planes.push_back(std::move(bits));
    s.labels.push_back(70.0 + 25.0 * bx / w + 8.0 * by / h);
  }
  return s;
}

dataset::Splits simple_splits(int n, int n_val, int n_test) {
  dataset::Splits sp;
  for (int i = 0; i < n - n_val - n_test; ++i) sp.train.push_back(i);
  for (int i = n - n_val - n_test; i < n - n_test; ++i) sp.val.push_back(i);
  for (int i = n - n_test; i < n; ++i) sp.test.push_back(i);
  return sp;
}

TrainedModel random_model(const ArchSpec& arch, uint64_t seed) {
  Network<float> net(arch);
  TrainedModel m;
  m.arch = arch;
  m.params = net.init_params(seed);
  m.target = "pl_db";
  m.label_mean = 0.0;
  m.label_std = 1.0;
  return m;
}

}  // namespace

TEST_CASE("plan: documented geometry and parameter count") {
  const Plan p = Plan::make({1, 108, 192});
  CHECK(p.stem.oh == 54);
  CHECK(p.stem.ow == 96);
  CHECK(p.b1c2.oh == 27);
  CHECK(p.b1c2.ow == 48);
  CHECK(p.b2c2.oh == 14);
  CHECK(p.b2c2.ow == 24);
  CHECK(p.pool_features == 512);
  // stem 80, block1 1168+2320+144, block2 4640+9248+544, fc 513
  CHECK(p.param_count == 18657);

  const Plan p3 = Plan::make({3, 108, 192});
  CHECK(p3.param_count == 18657 + 2 * 8 * 9);

  CHECK_THROWS_AS(Plan::make({2, 108, 192}), Error);
  CHECK_THROWS_AS(Plan::make({1, 16, 16}), Error);
}

TEST_CASE("forward: zero parameters emit the label mean") {
  const ArchSpec arch{1, 48, 64};
  Network<float> net(arch);
  TrainedModel m;
  m.arch = arch;
  m.params.assign(net.num_params(), 0.0f);
  m.label_mean = 77.5;
  m.label_std = 3.0;
  std::vector<float> input(net.input_stride(), 1.0f);
  CHECK(forward_input(m, input) == doctest::Approx(77.5));
}

TEST_CASE("forward: deterministic and dimension-checked") {
  const ArchSpec arch{1, 48, 64};
  TrainedModel m = random_model(arch, 5);
  std::vector<float> input(Network<float>(arch).input_stride(), 0.0f);
  for (size_t i = 0; i < input.size(); i += 7) input[i] = 1.0f;
  const double a = forward_input(m, input);
  const double b = forward_input(m, input);
  CHECK(a == b);

  vision::MaskFrame wrong;
  wrong.grid = vision::BitGrid(10, 10);
  CHECK_THROWS_AS(forward(m, wrong), Error);
}

TEST_CASE("loss: exact values and loop oracle") {
  CHECK(loss(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 0.0);
  CHECK(loss(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == doctest::Approx(12.5));

  Rng rng(17);
  std::vector<double> p(33), y(33);
  for (size_t i = 0; i < p.size(); ++i) {
    p[i] = rng.uniform(-5, 5);
    y[i] = rng.uniform(-5, 5);
  }
  double acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) acc += (y[i] - p[i]) * (y[i] - p[i]);
  CHECK(std::abs(loss(p, y) - acc / 33.0) <= 1e-12);

  CHECK_THROWS_AS(loss(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
}

TEST_CASE("backward: finite differences on a parameter subset") {
  const double err = testing::gradient_max_rel_error<double>({1, 32, 32}, 11, 2, 1e-4, 47);
  CHECK(err < 1e-3);
}

TEST_CASE("backward: zero residual zeroes the FC gradient") {
  const ArchSpec arch{1, 32, 32};
  Network<double> net(arch);
  std::vector<double> params = net.init_params(3);
  std::vector<double> input(net.input_stride() * 2, 0.0);
  for (size_t i = 0; i < input.size(); i += 5) input[i] = 1.0;
  Workspace<double> ws;
  std::vector<double> preds(2);
  net.forward(params, input.data(), 2, ws, preds.data());
  std::vector<double> dpred{0.0, 0.0};  // preds forced equal to labels
  std::vector<double> grads;
  net.backward(params, input.data(), 2, ws, dpred, grads);
  for (const double g : grads) CHECK(g == 0.0);
}

TEST_CASE("backward: gradients scale linearly with the loss scale") {
  const ArchSpec arch{1, 32, 32};
  Network<double> net(arch);
  std::vector<double> params = net.init_params(9);
  std::vector<double> input(net.input_stride(), 0.0);
  for (size_t i = 0; i < input.size(); i += 3) input[i] = 1.0;
  Workspace<double> ws;
  double pred = 0.0;
  net.forward(params, input.data(), 1, ws, &pred);
  std::vector<double> g1, g2;
  std::vector<double> d1{1.7};
  std::vector<double> d2{3.4};
  net.backward(params, input.data(), 1, ws, d1, g1);
  net.backward(params, input.data(), 1, ws, d2, g2);
  for (size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-12));
}

TEST_CASE("train: loss decreases, determinism, lr=0 is a null step") {
  const SampleSet data = synthetic_set(40);
  const dataset::Splits splits = simple_splits(40, 5, 5);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 8;
  cfg.rng_seed = 21;

  const TrainedModel m = train(data, splits, cfg);
  REQUIRE(m.curve.size() == 10);
  CHECK(m.curve.back().first < m.curve.front().first);
  CHECK(m.label_std > 0.0);

  const TrainedModel m2 = train(data, splits, cfg);
  CHECK(m.params == m2.params);
  CHECK(m.curve == m2.curve);

  TrainConfig frozen = cfg;
  frozen.learning_rate = 0.0;
  frozen.epochs = 3;
  const TrainedModel f = train(data, splits, frozen);
  const std::vector<float> init = Network<float>({1, 48, 64}).init_params(frozen.rng_seed);
  CHECK(f.params == init);
  for (const auto& [t, v] : f.curve) {
    CHECK(t == doctest::Approx(f.curve[0].first));
    CHECK(v == doctest::Approx(f.curve[0].second));
  }
}

TEST_CASE("train: reported val loss is the curve minimum") {
  const SampleSet data = synthetic_set(36);
  const dataset::Splits splits = simple_splits(36, 6, 6);
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 8;
  cfg.rng_seed = 2;
  const TrainedModel m = train(data, splits, cfg);
  double min_val = 1e300;
  for (const auto& [t, v] : m.curve) min_val = std::min(min_val, v);
  CHECK(m.curve[static_cast<size_t>(m.best_epoch)].second == doctest::Approx(min_val));
}

TEST_CASE("train: single-sample overfit within 500 steps") {
  const SampleSet data = synthetic_set(1, 48, 64, 77);
  dataset::Splits splits;
  splits.train = {0};
  splits.val = {0};
  TrainConfig cfg;
  cfg.epochs = 500;
  cfg.batch_size = 1;
  cfg.rng_seed = 4;
  const TrainedModel m = train(data, splits, cfg);
  const std::vector<double> preds = predict_samples(m, data, splits.train);
  CHECK(std::abs(preds[0] - data.labels[0]) < 0.01 * m.label_std);
}

TEST_CASE("train: divergence aborts with location") {
  SampleSet data = synthetic_set(12);
  data.labels[0] = std::numeric_limits<double>::infinity();
  dataset::Splits splits = simple_splits(12, 1, 1);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  try {
    train(data, splits, cfg);
    FAIL("expected divergence error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::divergence);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("model checkpoints round-trip bit-exactly") {
  testing::TempDir tmp("model");
  const SampleSet data = synthetic_set(24);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.target = "k_db";
  const TrainedModel m = train(data, simple_splits(24, 4, 4), cfg);
  save_model(m, tmp.path("m.bin"));
  const TrainedModel loaded = load_model(tmp.path("m.bin"));
  CHECK(loaded.params == m.params);
  CHECK(loaded.label_mean == m.label_mean);
  CHECK(loaded.label_std == m.label_std);
  CHECK(loaded.target == m.target);
  CHECK(loaded.curve == m.curve);
  CHECK(loaded.best_epoch == m.best_epoch);

  save_model(loaded, tmp.path("m2.bin"));
  CHECK(io::file_hash(tmp.path("m.bin")) == io::file_hash(tmp.path("m2.bin")));

  const auto p1 = predict_samples(m, data, std::vector<int>{0, 1, 2});
  const auto p2 = predict_samples(loaded, data, std::vector<int>{0, 1, 2});
  CHECK(p1 == p2);
}

TEST_CASE("predict_run: order, equivalence with forward, throughput") {
  const ArchSpec arch{1, 108, 192};
  const TrainedModel m = random_model(arch, 13);
  Rng rng(14);
  std::vector<vision::MaskFrame> frames;
  for (int i = 0; i < 150; ++i) {
    vision::MaskFrame f;
    f.timestamp = i / 100.0;
    f.grid = vision::BitGrid(192, 108);
    const int bx = static_cast<int>(rng.below(180));
    const int by = static_cast<int>(rng.below(96));
    for (int y = by; y < by + 10; ++y)
      for (int x = bx; x < bx + 12; ++x) f.grid.set(x, y, true);
    f.visible = i % 10 != 3;  // some invisible frames interleaved
    frames.push_back(std::move(f));
  }

  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> preds = predict_run(m, frames, 42);
  const auto t1 = std::chrono::steady_clock::now();

  size_t expected = 0;
  for (const auto& f : frames)
    if (f.visible) ++expected;
  REQUIRE(preds.size() == expected);

  size_t pi = 0;
  for (const auto& f : frames) {
    if (!f.visible) continue;
    CHECK(preds[pi] == doctest::Approx(forward(m, f)).epsilon(1e-9));
    ++pi;
  }

  const double seconds = std::chrono::duration<double>(t1 - t0).count();
  CHECK(static_cast<double>(expected) / seconds >= 100.0);

  std::vector<vision::MaskFrame> singleton{frames[0]};
  CHECK(predict_run(m, singleton, 42).size() == 1);
}

TEST_CASE("translation sensitivity: shifted masks change predictions") {
  const ArchSpec arch{1, 108, 192};
  const TrainedModel m = random_model(arch, 31);
  Rng rng(32);
  int changed = 0;
  const int trials = 30;
  for (int t = 0; t < trials; ++t) {
    vision::MaskFrame f;
    f.grid = vision::BitGrid(192, 108);
    const int bx = 4 + static_cast<int>(rng.below(150));
    const int by = 4 + static_cast<int>(rng.below(90));
    for (int y = by; y < by + 10; ++y)
      for (int x = bx; x < bx + 14; ++x) f.grid.set(x, y, true);
    vision::MaskFrame shifted;
    shifted.grid = vision::BitGrid(192, 108);
    for (int y = 0; y < 108; ++y)
      for (int x = 0; x < 192; ++x)
        if (f.grid.get(x, y) && x + 16 < 192) shifted.grid.set(x + 16, y, true);
    if (std::abs(forward(m, f) - forward(m, shifted)) > 1e-6) ++changed;
  }
  CHECK(static_cast<double>(changed) / trials >= 0.9);
}
