#include "vacp/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vacp/io.hpp"

namespace vacp::predictor {

Plan Plan::make(const ArchSpec& arch) {
  require(arch.in_channels == 1 || arch.in_channels == 3, ErrorCode::contract,
          "input must have 1 or 3 channels");
  require(arch.in_h >= 32 && arch.in_w >= 32, ErrorCode::contract,
          "input must be at least 32x32 for the 4x4 pooling grid");
  Plan p;
  p.arch = arch;

  auto conv = [](int cin, int cout, int k, int stride, int pad, int ih, int iw) {
    ConvShape c;
    c.cin = cin;
    c.cout = cout;
    c.k = k;
    c.stride = stride;
    c.pad = pad;
    c.ih = ih;
    c.iw = iw;
    c.oh = detail::conv_out(ih, k, stride, pad);
    c.ow = detail::conv_out(iw, k, stride, pad);
    return c;
  };

  p.stem = conv(arch.in_channels, kStemFilters, 3, 2, 1, arch.in_h, arch.in_w);
  p.b1c1 = conv(kStemFilters, kBlock1Filters, 3, 2, 1, p.stem.oh, p.stem.ow);
  p.b1c2 = conv(kBlock1Filters, kBlock1Filters, 3, 1, 1, p.b1c1.oh, p.b1c1.ow);
  p.b1sk = conv(kStemFilters, kBlock1Filters, 1, 2, 0, p.stem.oh, p.stem.ow);
  p.b2c1 = conv(kBlock1Filters, kBlock2Filters, 3, 2, 1, p.b1c2.oh, p.b1c2.ow);
  p.b2c2 = conv(kBlock2Filters, kBlock2Filters, 3, 1, 1, p.b2c1.oh, p.b2c1.ow);
  p.b2sk = conv(kBlock1Filters, kBlock2Filters, 1, 2, 0, p.b1c2.oh, p.b1c2.ow);
  require(p.b1sk.oh == p.b1c2.oh && p.b1sk.ow == p.b1c2.ow, ErrorCode::contract,
          "block 1 skip/main shape mismatch");
  require(p.b2sk.oh == p.b2c2.oh && p.b2sk.ow == p.b2c2.ow, ErrorCode::contract,
          "block 2 skip/main shape mismatch");
  require(p.b2c2.oh >= kPoolGrid && p.b2c2.ow >= kPoolGrid, ErrorCode::contract,
          "feature map smaller than the pooling grid");

  size_t off = 0;
  for (ConvShape* c : {&p.stem, &p.b1c1, &p.b1c2, &p.b1sk, &p.b2c1, &p.b2c2, &p.b2sk}) {
    c->w_off = off;
    off += c->weight_count();
    c->b_off = off;
    off += static_cast<size_t>(c->cout);
  }
  p.pool_features = kBlock2Filters * kPoolGrid * kPoolGrid;
  p.fc_w_off = off;
  off += static_cast<size_t>(p.pool_features);
  p.fc_b_off = off;
  p.param_count = off + 1;

  size_t act = 0;
  auto place = [&act](size_t count) {
    const size_t o = act;
    act += count;
    return o;
  };
  p.a_stem = place(p.stem.out_count());
  p.y1 = place(p.b1c1.out_count());
  p.a1 = place(p.b1c2.out_count());
  p.y3 = place(p.b2c1.out_count());
  p.a2 = place(p.b2c2.out_count());
  p.pooled = place(static_cast<size_t>(p.pool_features));
  p.act_count = act;

  p.max_col = 0;
  for (const ConvShape* c : {&p.stem, &p.b1c1, &p.b1c2, &p.b1sk, &p.b2c1, &p.b2c2, &p.b2sk})
    p.max_col = std::max(p.max_col, c->col_rows() * c->out_pixels());

  for (int i = 0; i <= kPoolGrid; ++i) {
    p.pool_rows[static_cast<size_t>(i)] = i * p.b2c2.oh / kPoolGrid;
    p.pool_cols[static_cast<size_t>(i)] = i * p.b2c2.ow / kPoolGrid;
  }
  return p;
}

uint64_t arch_hash(const ArchSpec& arch) {
  const int fields[] = {arch.in_channels, arch.in_h,       arch.in_w,  kStemFilters,
                        kBlock1Filters,   kBlock2Filters,  kPoolGrid,  1};
  return io::fnv1a64(fields, sizeof(fields));
}

int target_index(const std::string& target) {
  if (target == "pl_db") return 0;
  if (target == "k_db") return 1;
  if (target == "rms_ds_ns") return 2;
  fail(ErrorCode::contract, "unknown target '" + target + "'");
}

const char* target_name(int index) {
  switch (index) {
    case 0: return "pl_db";
    case 1: return "k_db";
    case 2: return "rms_ds_ns";
  }
  fail(ErrorCode::contract, "bad target index");
}

double select_label(const dataset::ManifestRecord& r, int target) {
  switch (target) {
    case 0: return r.pl_db;
    case 1: return r.k_db;
    case 2: return r.rms_ds_ns;
  }
  fail(ErrorCode::contract, "bad target index");
}

void SampleSet::unpack(size_t sample, float* out) const {
  const auto& bits = planes[sample];
  const size_t cells = cell_count();
  for (size_t i = 0; i < cells; ++i)
    out[i] = (bits[i >> 3] >> (i & 7)) & 1 ? 1.0f : 0.0f;
}

SampleSet build_samples(const dataset::DatasetManifest& manifest, const std::string& mask_path,
                        vision::ImageMode mode, const std::string& target, uint64_t scene_key) {
  const int t = target_index(target);
  const std::string data = io::read_file(mask_path);
  io::ByteReader header(data, mask_path);
  require(header.u32() == vision::kMaskFileMagic, ErrorCode::parse, mask_path + ": bad magic");
  const int gw = static_cast<int>(header.u32());
  const int gh = static_cast<int>(header.u32());

  SampleSet out;
  out.channels = vision::mode_channels(mode);
  out.height = gh;
  out.width = gw;
  const size_t cells = out.cell_count();
  std::vector<float> composed(cells);
  vision::SceneComposer composer(mode, scene_key, gw, gh);

  out.planes.reserve(manifest.records.size());
  out.labels.reserve(manifest.records.size());
  for (const auto& rec : manifest.records) {
    require(rec.mask_offset < data.size(), ErrorCode::parse, "mask offset beyond file");
    io::ByteReader r(std::string_view(data).substr(rec.mask_offset), mask_path);
    vision::MaskFrame frame;
    frame.timestamp = r.f64();
    const uint8_t vis = r.u8();
    require(vis == 1, ErrorCode::contract, "dataset references an invisible mask frame");
    frame.visible = true;
    r.f32();
    r.f32();
    r.f32();
    r.f32();
    frame.grid = vision::BitGrid(gw, gh);
    r.bytes(frame.grid.bytes().data(), frame.grid.bytes().size());

    // Frame identity for clutter seeding is the byte offset itself; it is
    // stable across re-reads of the same file.
    composer.compose(frame, rec.mask_offset, composed.data());
    std::vector<uint8_t> packed((cells + 7) / 8, 0);
    for (size_t i = 0; i < cells; ++i)
      if (composed[i] != 0.0f) packed[i >> 3] |= static_cast<uint8_t>(1u << (i & 7));
    out.planes.push_back(std::move(packed));
    out.labels.push_back(select_label(rec, t));
  }
  return out;
}

double loss(std::span<const double> preds, std::span<const double> labels) {
  require(preds.size() == labels.size(), ErrorCode::contract, "loss length mismatch");
  require(!preds.empty(), ErrorCode::contract, "loss needs at least one element");
  double acc = 0.0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const double d = labels[i] - preds[i];
    acc += d * d;
  }
  return acc / static_cast<double>(preds.size());
}

namespace {

struct Adam {
  std::vector<float> m, v;
  double beta1, beta2, eps, lr;
  long step = 0;

  Adam(size_t n, const TrainConfig& cfg)
      : m(n, 0.0f), v(n, 0.0f), beta1(cfg.beta1), beta2(cfg.beta2), eps(cfg.epsilon),
        lr(cfg.learning_rate) {}

  void update(std::vector<float>& params, const std::vector<float>& grads) {
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (size_t i = 0; i < params.size(); ++i) {
      const double g = grads[i];
      m[i] = static_cast<float>(beta1 * m[i] + (1.0 - beta1) * g);
      v[i] = static_cast<float>(beta2 * v[i] + (1.0 - beta2) * g * g);
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      params[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
};

double eval_standardized_mse(const Network<float>& net, const std::vector<float>& params,
                             const SampleSet& data, std::span<const int> indices,
                             double label_mean, double label_std, Workspace<float>& ws,
                             std::vector<float>& input, int batch_size) {
  double acc = 0.0;
  size_t done = 0;
  const size_t stride = net.input_stride();
  std::vector<float> preds(static_cast<size_t>(batch_size));
  while (done < indices.size()) {
    const int n = static_cast<int>(std::min<size_t>(static_cast<size_t>(batch_size), indices.size() - done));
    input.resize(static_cast<size_t>(n) * stride);
    for (int b = 0; b < n; ++b)
      data.unpack(static_cast<size_t>(indices[done + static_cast<size_t>(b)]),
                  input.data() + static_cast<size_t>(b) * stride);
    net.forward(params, input.data(), n, ws, preds.data());
    for (int b = 0; b < n; ++b) {
      const double y =
          (data.labels[static_cast<size_t>(indices[done + static_cast<size_t>(b)])] - label_mean) /
          label_std;
      const double d = static_cast<double>(preds[static_cast<size_t>(b)]) - y;
      acc += d * d;
    }
    done += static_cast<size_t>(n);
  }
  return acc / static_cast<double>(indices.size());
}

}  // namespace

TrainedModel train(const SampleSet& data, const dataset::Splits& splits, const TrainConfig& cfg) {
  require(!splits.train.empty() && !splits.val.empty(), ErrorCode::contract,
          "train and val splits must be nonempty");
  require(cfg.batch_size >= 1, ErrorCode::contract, "batch_size must be >= 1");
  require(cfg.learning_rate >= 0.0, ErrorCode::contract, "learning_rate must be >= 0");
  require(vision::mode_channels(cfg.image_mode) == data.channels, ErrorCode::contract,
          "image mode does not match sample channels");

  ArchSpec arch{data.channels, data.height, data.width};
  Network<float> net(arch);

  TrainedModel model;
  model.arch = arch;
  model.image_mode = cfg.image_mode;
  model.target = cfg.target;
  target_index(cfg.target);

  // Label standardization over the training split only.
  if (cfg.label_standardize) {
    double mean = 0.0;
    for (const int i : splits.train) mean += data.labels[static_cast<size_t>(i)];
    mean /= static_cast<double>(splits.train.size());
    double var = 0.0;
    for (const int i : splits.train) {
      const double d = data.labels[static_cast<size_t>(i)] - mean;
      var += d * d;
    }
    var /= static_cast<double>(splits.train.size());
    model.label_mean = mean;
    model.label_std = var > 1e-24 ? std::sqrt(var) : 1.0;
  }

  std::vector<float> params = net.init_params(cfg.rng_seed);
  Adam adam(params.size(), cfg);
  Workspace<float> ws;
  std::vector<float> input;
  std::vector<float> preds(static_cast<size_t>(cfg.batch_size));
  std::vector<float> dpred(static_cast<size_t>(cfg.batch_size));
  std::vector<float> grads;

  std::vector<int> order = splits.train;
  std::sort(order.begin(), order.end());
  const size_t stride = net.input_stride();

  std::vector<float> best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(stream_seed(cfg.rng_seed, 0xE90C ^ static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    size_t batches = 0;
    for (size_t pos = 0; pos < order.size(); pos += static_cast<size_t>(cfg.batch_size)) {
      const int n = static_cast<int>(std::min<size_t>(static_cast<size_t>(cfg.batch_size),
                                                      order.size() - pos));
      input.resize(static_cast<size_t>(n) * stride);
      for (int b = 0; b < n; ++b)
        data.unpack(static_cast<size_t>(order[pos + static_cast<size_t>(b)]),
                    input.data() + static_cast<size_t>(b) * stride);

      net.forward(params, input.data(), n, ws, preds.data());

      double batch_loss = 0.0;
      for (int b = 0; b < n; ++b) {
        const double y =
            (data.labels[static_cast<size_t>(order[pos + static_cast<size_t>(b)])] - model.label_mean) /
            model.label_std;
        const double r = static_cast<double>(preds[static_cast<size_t>(b)]) - y;
        batch_loss += r * r;
        dpred[static_cast<size_t>(b)] = static_cast<float>(2.0 * r / static_cast<double>(n));
      }
      batch_loss /= static_cast<double>(n);
      if (!std::isfinite(batch_loss))
        fail(ErrorCode::divergence, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                        std::to_string(batches));
      epoch_loss += batch_loss;
      ++batches;

      net.backward(params, input.data(), n, ws,
                   std::span<const float>(dpred.data(), static_cast<size_t>(n)), grads);
      adam.update(params, grads);
    }

    const double train_loss = epoch_loss / static_cast<double>(batches);
    const double val_loss = eval_standardized_mse(net, params, data, splits.val, model.label_mean,
                                                  model.label_std, ws, input, cfg.batch_size);
    model.curve.emplace_back(train_loss, val_loss);
    if (val_loss < best_val) {
      best_val = val_loss;
      best_params = params;
      best_epoch = epoch;
    }
  }

  model.params = std::move(best_params);
  model.best_epoch = best_epoch;
  return model;
}

double forward_input(const TrainedModel& model, std::span<const float> input) {
  Network<float> net(model.arch);
  require(input.size() == net.input_stride(), ErrorCode::contract, "input size mismatch");
  require(model.params.size() == net.num_params(), ErrorCode::contract, "parameter size mismatch");
  Workspace<float> ws;
  float pred = 0.0f;
  net.forward(model.params, input.data(), 1, ws, &pred);
  return static_cast<double>(pred) * model.label_std + model.label_mean;
}

double forward(const TrainedModel& model, const vision::MaskFrame& mask) {
  require(model.image_mode == vision::ImageMode::single_mask, ErrorCode::contract,
          "forward(mask) requires a single_mask model");
  require(mask.grid.width() == model.arch.in_w && mask.grid.height() == model.arch.in_h,
          ErrorCode::contract, "mask grid does not match the model input size");
  std::vector<float> input(static_cast<size_t>(model.arch.in_h) * model.arch.in_w);
  size_t i = 0;
  for (int y = 0; y < model.arch.in_h; ++y)
    for (int x = 0; x < model.arch.in_w; ++x, ++i) input[i] = mask.grid.get(x, y) ? 1.0f : 0.0f;
  return forward_input(model, input);
}

std::vector<double> predict_samples(const TrainedModel& model, const SampleSet& data,
                                    std::span<const int> indices) {
  ArchSpec arch{data.channels, data.height, data.width};
  require(arch == model.arch, ErrorCode::contract, "sample set does not match the model input size");
  Network<float> net(model.arch);
  Workspace<float> ws;
  const size_t stride = net.input_stride();
  constexpr int kBatch = 64;
  std::vector<float> input;
  std::vector<float> preds(kBatch);
  std::vector<double> out;
  out.reserve(indices.size());
  size_t done = 0;
  while (done < indices.size()) {
    const int n = static_cast<int>(std::min<size_t>(kBatch, indices.size() - done));
    input.resize(static_cast<size_t>(n) * stride);
    for (int b = 0; b < n; ++b)
      data.unpack(static_cast<size_t>(indices[done + static_cast<size_t>(b)]),
                  input.data() + static_cast<size_t>(b) * stride);
    net.forward(model.params, input.data(), n, ws, preds.data());
    for (int b = 0; b < n; ++b)
      out.push_back(static_cast<double>(preds[static_cast<size_t>(b)]) * model.label_std +
                    model.label_mean);
    done += static_cast<size_t>(n);
  }
  return out;
}

std::vector<double> predict_run(const TrainedModel& model, std::span<const vision::MaskFrame> frames,
                                uint64_t scene_key) {
  vision::SceneComposer composer(model.image_mode, scene_key, model.arch.in_w, model.arch.in_h);
  Network<float> net(model.arch);
  Workspace<float> ws;
  const size_t stride = net.input_stride();
  constexpr int kBatch = 64;
  std::vector<float> input(static_cast<size_t>(kBatch) * stride);
  std::vector<float> preds(kBatch);
  std::vector<double> out;
  std::vector<size_t> pending;
  auto flush = [&](std::span<const size_t> idx) {
    if (idx.empty()) return;
    net.forward(model.params, input.data(), static_cast<int>(idx.size()), ws, preds.data());
    for (size_t b = 0; b < idx.size(); ++b)
      out.push_back(static_cast<double>(preds[b]) * model.label_std + model.label_mean);
  };
  for (size_t i = 0; i < frames.size(); ++i) {
    if (!frames[i].visible) continue;
    composer.compose(frames[i], i, input.data() + pending.size() * stride);
    pending.push_back(i);
    if (pending.size() == kBatch) {
      flush(pending);
      pending.clear();
    }
  }
  flush(pending);
  return out;
}

namespace {
constexpr uint32_t kModelMagic = 0x54454E56;  // "VNET"
}

void save_model(const TrainedModel& model, const std::string& path) {
  io::ByteWriter w;
  w.u32(kModelMagic);
  w.u32(1);
  w.u64(arch_hash(model.arch));
  w.u32(static_cast<uint32_t>(model.arch.in_channels));
  w.u32(static_cast<uint32_t>(model.arch.in_h));
  w.u32(static_cast<uint32_t>(model.arch.in_w));
  w.u8(static_cast<uint8_t>(model.image_mode));
  w.u8(static_cast<uint8_t>(target_index(model.target)));
  w.f64(model.label_mean);
  w.f64(model.label_std);
  w.u32(static_cast<uint32_t>(model.best_epoch));
  w.u32(static_cast<uint32_t>(model.curve.size()));
  for (const auto& [t, v] : model.curve) {
    w.f64(t);
    w.f64(v);
  }
  w.u64(model.params.size());
  for (const float p : model.params) w.f32(p);
  io::write_file(path, w.buf);
}

TrainedModel load_model(const std::string& path) {
  const std::string data = io::read_file(path);
  io::ByteReader r(data, path);
  if (r.u32() != kModelMagic) fail(ErrorCode::parse, path + ": not a model checkpoint");
  if (r.u32() != 1) fail(ErrorCode::parse, path + ": unsupported checkpoint version");
  const uint64_t hash = r.u64();
  TrainedModel m;
  m.arch.in_channels = static_cast<int>(r.u32());
  m.arch.in_h = static_cast<int>(r.u32());
  m.arch.in_w = static_cast<int>(r.u32());
  if (hash != arch_hash(m.arch)) fail(ErrorCode::parse, path + ": architecture hash mismatch");
  m.image_mode = static_cast<vision::ImageMode>(r.u8());
  m.target = target_name(static_cast<int>(r.u8()));
  m.label_mean = r.f64();
  m.label_std = r.f64();
  require(m.label_std > 0, ErrorCode::parse, path + ": label_std must be positive");
  m.best_epoch = static_cast<int>(r.u32());
  const uint32_t curve_len = r.u32();
  m.curve.reserve(curve_len);
  for (uint32_t i = 0; i < curve_len; ++i) {
    const double t = r.f64();
    const double v = r.f64();
    m.curve.emplace_back(t, v);
  }
  const uint64_t n = r.u64();
  Network<float> net(m.arch);
  if (n != net.num_params()) fail(ErrorCode::parse, path + ": parameter count mismatch");
  m.params.resize(n);
  for (uint64_t i = 0; i < n; ++i) m.params[static_cast<size_t>(i)] = r.f32();
  if (r.remaining() != 0) fail(ErrorCode::parse, path + ": trailing bytes");
  return m;
}

}  // namespace vacp::predictor
