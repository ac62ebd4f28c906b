#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "vacp/common.hpp"
#include "vacp/io.hpp"
#include "vacp/rng.hpp"

namespace vacp::predictor {

/// Input geometry; the filter stack is fixed (stem 8, residual blocks 16 and
/// 32, 4x4 average-pool grid, single-output head).
struct ArchSpec {
  int in_channels = 1;
  int in_h = 108;
  int in_w = 192;

  bool operator==(const ArchSpec&) const = default;
};

inline constexpr int kStemFilters = 8;
inline constexpr int kBlock1Filters = 16;
inline constexpr int kBlock2Filters = 32;
inline constexpr int kPoolGrid = 4;

struct ConvShape {
  int cin = 0, cout = 0, k = 0, stride = 1, pad = 0;
  int ih = 0, iw = 0, oh = 0, ow = 0;
  size_t w_off = 0, b_off = 0;

  size_t weight_count() const { return static_cast<size_t>(cout) * cin * k * k; }
  size_t col_rows() const { return static_cast<size_t>(cin) * k * k; }
  size_t out_pixels() const { return static_cast<size_t>(oh) * ow; }
  size_t in_count() const { return static_cast<size_t>(cin) * ih * iw; }
  size_t out_count() const { return static_cast<size_t>(cout) * oh * ow; }
};

/// Fixed parameter and activation layout shared by training, checkpoints and
/// the finite-difference harness.
struct Plan {
  ArchSpec arch;
  ConvShape stem, b1c1, b1c2, b1sk, b2c1, b2c2, b2sk;
  int pool_features = 0;
  size_t fc_w_off = 0, fc_b_off = 0;
  size_t param_count = 0;

  // Per-sample activation buffer offsets (saved for backward).
  size_t a_stem = 0, y1 = 0, a1 = 0, y3 = 0, a2 = 0, pooled = 0;
  size_t act_count = 0;
  size_t max_col = 0;

  std::array<int, kPoolGrid + 1> pool_rows{}, pool_cols{};

  static Plan make(const ArchSpec& arch);
};

uint64_t arch_hash(const ArchSpec& arch);

namespace detail {

inline int conv_out(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

template <typename S>
void im2col(const ConvShape& c, const S* in, S* col) {
  const size_t n = c.out_pixels();
  for (int ci = 0; ci < c.cin; ++ci) {
    const S* plane = in + static_cast<size_t>(ci) * c.ih * c.iw;
    for (int ky = 0; ky < c.k; ++ky) {
      for (int kx = 0; kx < c.k; ++kx) {
        S* row = col + (static_cast<size_t>(ci) * c.k * c.k + static_cast<size_t>(ky) * c.k + kx) * n;
        for (int oy = 0; oy < c.oh; ++oy) {
          const int iy = oy * c.stride - c.pad + ky;
          S* dst = row + static_cast<size_t>(oy) * c.ow;
          if (iy < 0 || iy >= c.ih) {
            for (int ox = 0; ox < c.ow; ++ox) dst[ox] = S(0);
            continue;
          }
          const S* src = plane + static_cast<size_t>(iy) * c.iw;
          for (int ox = 0; ox < c.ow; ++ox) {
            const int ix = ox * c.stride - c.pad + kx;
            dst[ox] = (ix >= 0 && ix < c.iw) ? src[ix] : S(0);
          }
        }
      }
    }
  }
}

template <typename S>
void col2im_add(const ConvShape& c, const S* col, S* din) {
  const size_t n = c.out_pixels();
  for (int ci = 0; ci < c.cin; ++ci) {
    S* plane = din + static_cast<size_t>(ci) * c.ih * c.iw;
    for (int ky = 0; ky < c.k; ++ky) {
      for (int kx = 0; kx < c.k; ++kx) {
        const S* row = col + (static_cast<size_t>(ci) * c.k * c.k + static_cast<size_t>(ky) * c.k + kx) * n;
        for (int oy = 0; oy < c.oh; ++oy) {
          const int iy = oy * c.stride - c.pad + ky;
          if (iy < 0 || iy >= c.ih) continue;
          S* dst = plane + static_cast<size_t>(iy) * c.iw;
          const S* src = row + static_cast<size_t>(oy) * c.ow;
          for (int ox = 0; ox < c.ow; ++ox) {
            const int ix = ox * c.stride - c.pad + kx;
            if (ix >= 0 && ix < c.iw) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using ConstMatMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace detail

template <typename S>
struct Workspace {
  int batch = 0;
  int threads = 1;
  std::vector<S> acts;             // batch * act_count
  std::vector<S> col;              // threads * max_col
  std::vector<S> dcol;             // threads * max_col
  std::vector<S> dacts;            // threads * act_count
  std::vector<S> grad_per_sample;  // batch * param_count (backward only)
};

template <typename S>
class Network {
 public:
  explicit Network(const ArchSpec& arch) : plan_(Plan::make(arch)) {
    // Per-sample GEMMs stay single-threaded; parallelism is over samples,
    // with gradients reduced in fixed sample order.
    Eigen::setNbThreads(1);
  }

  const Plan& plan() const { return plan_; }
  size_t num_params() const { return plan_.param_count; }

  /// Fan-in-scaled uniform init, zero biases, fixed draw order.
  std::vector<S> init_params(uint64_t seed) const {
    std::vector<S> p(plan_.param_count, S(0));
    Rng rng(stream_seed(seed, 0x1217ull));
    for (const ConvShape* c : {&plan_.stem, &plan_.b1c1, &plan_.b1c2, &plan_.b1sk, &plan_.b2c1,
                               &plan_.b2c2, &plan_.b2sk}) {
      const double bound = std::sqrt(6.0 / (static_cast<double>(c->cin) * c->k * c->k));
      for (size_t i = 0; i < c->weight_count(); ++i)
        p[c->w_off + i] = static_cast<S>(rng.uniform(-bound, bound));
    }
    const double fc_bound = std::sqrt(6.0 / plan_.pool_features);
    for (int i = 0; i < plan_.pool_features; ++i)
      p[plan_.fc_w_off + static_cast<size_t>(i)] = static_cast<S>(rng.uniform(-fc_bound, fc_bound));
    return p;
  }

  void prepare(Workspace<S>& ws, int batch, bool for_backward) const {
    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    ws.batch = batch;
    ws.threads = threads;
    ws.acts.resize(static_cast<size_t>(batch) * plan_.act_count);
    ws.col.resize(static_cast<size_t>(threads) * plan_.max_col);
    if (for_backward) {
      ws.dcol.resize(static_cast<size_t>(threads) * plan_.max_col);
      ws.dacts.resize(static_cast<size_t>(threads) * plan_.act_count);
      ws.grad_per_sample.resize(static_cast<size_t>(batch) * plan_.param_count);
    }
  }

  /// input: batch * (C*H*W), preds: batch raw (standardized-scale) outputs.
  void forward(std::span<const S> params, const S* input, int batch, Workspace<S>& ws,
               S* preds) const {
    check_params(params);
    prepare(ws, batch, false);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int b = 0; b < batch; ++b) {
      int tid = 0;
#ifdef _OPENMP
      tid = omp_get_thread_num();
#endif
      preds[b] = forward_sample(params.data(), input + static_cast<size_t>(b) * input_stride(),
                                ws.acts.data() + static_cast<size_t>(b) * plan_.act_count,
                                ws.col.data() + static_cast<size_t>(tid) * plan_.max_col);
    }
  }

  /// Gradients of sum_b dpred[b] * pred[b] w.r.t. params, accumulated in
  /// fixed sample order regardless of thread count. forward() must have run
  /// on the same workspace/input.
  void backward(std::span<const S> params, const S* input, int batch, Workspace<S>& ws,
                std::span<const S> dpred, std::vector<S>& grads) const {
    check_params(params);
    require(static_cast<int>(dpred.size()) == batch, ErrorCode::contract, "dpred size != batch");
    ws.grad_per_sample.assign(static_cast<size_t>(batch) * plan_.param_count, S(0));
    if (ws.dcol.size() < static_cast<size_t>(ws.threads) * plan_.max_col ||
        ws.dacts.size() < static_cast<size_t>(ws.threads) * plan_.act_count) {
      ws.dcol.resize(static_cast<size_t>(ws.threads) * plan_.max_col);
      ws.dacts.resize(static_cast<size_t>(ws.threads) * plan_.act_count);
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int b = 0; b < batch; ++b) {
      int tid = 0;
#ifdef _OPENMP
      tid = omp_get_thread_num();
#endif
      backward_sample(params.data(), input + static_cast<size_t>(b) * input_stride(),
                      ws.acts.data() + static_cast<size_t>(b) * plan_.act_count,
                      ws.col.data() + static_cast<size_t>(tid) * plan_.max_col,
                      ws.dcol.data() + static_cast<size_t>(tid) * plan_.max_col,
                      ws.dacts.data() + static_cast<size_t>(tid) * plan_.act_count, dpred[b],
                      ws.grad_per_sample.data() + static_cast<size_t>(b) * plan_.param_count);
    }
    grads.assign(plan_.param_count, S(0));
    for (int b = 0; b < batch; ++b) {
      const S* g = ws.grad_per_sample.data() + static_cast<size_t>(b) * plan_.param_count;
      for (size_t i = 0; i < plan_.param_count; ++i) grads[i] += g[i];
    }
  }

  size_t input_stride() const {
    return static_cast<size_t>(plan_.arch.in_channels) * plan_.arch.in_h * plan_.arch.in_w;
  }

 private:
  void check_params(std::span<const S> params) const {
    require(params.size() == plan_.param_count, ErrorCode::contract, "parameter vector size mismatch");
  }

  void conv_forward(const ConvShape& c, const S* params, const S* in, S* col, S* out,
                    bool relu) const {
    detail::im2col(c, in, col);
    const Eigen::Index k = static_cast<Eigen::Index>(c.col_rows());
    const Eigen::Index n = static_cast<Eigen::Index>(c.out_pixels());
    detail::ConstMatMap<S> w(params + c.w_off, c.cout, k);
    detail::ConstMatMap<S> cm(col, k, n);
    detail::MatMap<S> om(out, c.cout, n);
    om.noalias() = w * cm;
    const S* bias = params + c.b_off;
    for (int oc = 0; oc < c.cout; ++oc) {
      S* row = out + static_cast<size_t>(oc) * n;
      const S bv = bias[oc];
      if (relu) {
        for (Eigen::Index i = 0; i < n; ++i) {
          const S v = row[i] + bv;
          row[i] = v > S(0) ? v : S(0);
        }
      } else {
        for (Eigen::Index i = 0; i < n; ++i) row[i] += bv;
      }
    }
  }

  /// dout: gradient at conv output (pre-activation). Accumulates weight/bias
  /// grads; when din != nullptr adds the input gradient into din.
  void conv_backward(const ConvShape& c, const S* params, const S* in, S* col, S* dcol,
                     const S* dout, S* grad, S* din) const {
    detail::im2col(c, in, col);
    const Eigen::Index k = static_cast<Eigen::Index>(c.col_rows());
    const Eigen::Index n = static_cast<Eigen::Index>(c.out_pixels());
    detail::ConstMatMap<S> dom(dout, c.cout, n);
    detail::ConstMatMap<S> cm(col, k, n);
    detail::MatMap<S> gw(grad + c.w_off, c.cout, k);
    gw.noalias() += dom * cm.transpose();
    S* gb = grad + c.b_off;
    for (int oc = 0; oc < c.cout; ++oc) gb[oc] += dom.row(oc).sum();
    if (din != nullptr) {
      detail::ConstMatMap<S> w(params + c.w_off, c.cout, k);
      detail::MatMap<S> dcm(dcol, k, n);
      dcm.noalias() = w.transpose() * dom;
      detail::col2im_add(c, dcol, din);
    }
  }

  void pool_forward(const S* in, S* out) const {
    const ConvShape& c = plan_.b2c2;  // final feature map geometry
    for (int ch = 0; ch < c.cout; ++ch) {
      const S* plane = in + static_cast<size_t>(ch) * c.oh * c.ow;
      for (int ry = 0; ry < kPoolGrid; ++ry) {
        for (int rx = 0; rx < kPoolGrid; ++rx) {
          const int y0 = plan_.pool_rows[static_cast<size_t>(ry)];
          const int y1 = plan_.pool_rows[static_cast<size_t>(ry) + 1];
          const int x0 = plan_.pool_cols[static_cast<size_t>(rx)];
          const int x1 = plan_.pool_cols[static_cast<size_t>(rx) + 1];
          S acc = S(0);
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) acc += plane[static_cast<size_t>(y) * c.ow + x];
          out[(static_cast<size_t>(ch) * kPoolGrid + ry) * kPoolGrid + rx] =
              acc / static_cast<S>((y1 - y0) * (x1 - x0));
        }
      }
    }
  }

  void pool_backward(const S* dpooled, S* din) const {
    const ConvShape& c = plan_.b2c2;
    for (int ch = 0; ch < c.cout; ++ch) {
      S* plane = din + static_cast<size_t>(ch) * c.oh * c.ow;
      for (int ry = 0; ry < kPoolGrid; ++ry) {
        for (int rx = 0; rx < kPoolGrid; ++rx) {
          const int y0 = plan_.pool_rows[static_cast<size_t>(ry)];
          const int y1 = plan_.pool_rows[static_cast<size_t>(ry) + 1];
          const int x0 = plan_.pool_cols[static_cast<size_t>(rx)];
          const int x1 = plan_.pool_cols[static_cast<size_t>(rx) + 1];
          const S g = dpooled[(static_cast<size_t>(ch) * kPoolGrid + ry) * kPoolGrid + rx] /
                      static_cast<S>((y1 - y0) * (x1 - x0));
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) plane[static_cast<size_t>(y) * c.ow + x] = g;
        }
      }
    }
  }

  S forward_sample(const S* params, const S* input, S* acts, S* col) const {
    const Plan& p = plan_;
    S* a_stem = acts + p.a_stem;
    S* y1 = acts + p.y1;
    S* a1 = acts + p.a1;
    S* y3 = acts + p.y3;
    S* a2 = acts + p.a2;
    S* pooled = acts + p.pooled;

    conv_forward(p.stem, params, input, col, a_stem, true);

    // Block 1: relu(conv2(relu(conv1(x))) + proj(x))
    conv_forward(p.b1c1, params, a_stem, col, y1, true);
    conv_forward(p.b1c2, params, y1, col, a1, false);
    {
      std::vector<S> sk(p.b1sk.out_count());
      conv_forward(p.b1sk, params, a_stem, col, sk.data(), false);
      for (size_t i = 0; i < sk.size(); ++i) {
        const S v = a1[i] + sk[i];
        a1[i] = v > S(0) ? v : S(0);
      }
    }

    // Block 2
    conv_forward(p.b2c1, params, a1, col, y3, true);
    conv_forward(p.b2c2, params, y3, col, a2, false);
    {
      std::vector<S> sk(p.b2sk.out_count());
      conv_forward(p.b2sk, params, a1, col, sk.data(), false);
      for (size_t i = 0; i < sk.size(); ++i) {
        const S v = a2[i] + sk[i];
        a2[i] = v > S(0) ? v : S(0);
      }
    }

    pool_forward(a2, pooled);
    S out = params[p.fc_b_off];
    const S* w = params + p.fc_w_off;
    for (int i = 0; i < p.pool_features; ++i) out += w[i] * pooled[i];
    return out;
  }

  void backward_sample(const S* params, const S* input, const S* acts, S* col, S* dcol, S* dacts,
                       S dpred, S* grad) const {
    const Plan& p = plan_;
    const S* a_stem = acts + p.a_stem;
    const S* y1 = acts + p.y1;
    const S* a1 = acts + p.a1;
    const S* y3 = acts + p.y3;
    const S* a2 = acts + p.a2;
    const S* pooled = acts + p.pooled;

    S* d_stem = dacts + p.a_stem;
    S* d_y1 = dacts + p.y1;
    S* d_a1 = dacts + p.a1;
    S* d_y3 = dacts + p.y3;
    S* d_a2 = dacts + p.a2;
    S* d_pooled = dacts + p.pooled;

    // FC
    grad[p.fc_b_off] += dpred;
    const S* w = params + p.fc_w_off;
    for (int i = 0; i < p.pool_features; ++i) {
      grad[p.fc_w_off + static_cast<size_t>(i)] += dpred * pooled[i];
      d_pooled[i] = dpred * w[i];
    }
    pool_backward(d_pooled, d_a2);

    // Block 2 backward. d_a2 is the grad at relu output; mask by a2 > 0.
    for (size_t i = 0; i < p.b2c2.out_count(); ++i)
      if (a2[i] <= S(0)) d_a2[i] = S(0);
    std::fill(d_a1, d_a1 + p.b1c2.out_count(), S(0));
    conv_backward(p.b2sk, params, a1, col, dcol, d_a2, grad, d_a1);
    std::fill(d_y3, d_y3 + p.b2c1.out_count(), S(0));
    conv_backward(p.b2c2, params, y3, col, dcol, d_a2, grad, d_y3);
    for (size_t i = 0; i < p.b2c1.out_count(); ++i)
      if (y3[i] <= S(0)) d_y3[i] = S(0);
    conv_backward(p.b2c1, params, a1, col, dcol, d_y3, grad, d_a1);

    // Block 1 backward.
    for (size_t i = 0; i < p.b1c2.out_count(); ++i)
      if (a1[i] <= S(0)) d_a1[i] = S(0);
    std::fill(d_stem, d_stem + p.stem.out_count(), S(0));
    conv_backward(p.b1sk, params, a_stem, col, dcol, d_a1, grad, d_stem);
    std::fill(d_y1, d_y1 + p.b1c1.out_count(), S(0));
    conv_backward(p.b1c2, params, y1, col, dcol, d_a1, grad, d_y1);
    for (size_t i = 0; i < p.b1c1.out_count(); ++i)
      if (y1[i] <= S(0)) d_y1[i] = S(0);
    conv_backward(p.b1c1, params, a_stem, col, dcol, d_y1, grad, d_stem);

    // Stem backward (input gradient not needed).
    for (size_t i = 0; i < p.stem.out_count(); ++i)
      if (a_stem[i] <= S(0)) d_stem[i] = S(0);
    conv_backward(p.stem, params, input, col, dcol, d_stem, grad, nullptr);
  }

  Plan plan_;
};

}  // namespace vacp::predictor
