// diarkit/nnet.hpp
//
// Copyright 2026 The diarkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.
//
// Minimal neural substrate with exact analytic gradients: dense, time-delay
// (frame splicing + affine), statistics pooling, LSTM (uni/bidirectional,
// full BPTT), ReLU, sigmoid, softmax and batchnorm layers, plain SGD, and a
// central-finite-difference gradient checker. Inputs are time-major
// matrices (T x dim); statistics pooling collapses T to 1.

#ifndef DIARKIT_NNET_HPP
#define DIARKIT_NNET_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "diarkit/binio.hpp"
#include "diarkit/common.hpp"
#include "diarkit/matrix.hpp"

namespace diarkit {

enum class LayerKind : std::uint32_t {
  kDense = 0,
  kRelu = 1,
  kSigmoid = 2,
  kSoftmax = 3,
  kBatchNorm = 4,
  kTdnn = 5,
  kStatsPool = 6,
  kLstm = 7,
};

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kSigmoid: return "sigmoid";
    case LayerKind::kSoftmax: return "softmax";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kTdnn: return "tdnn";
    case LayerKind::kStatsPool: return "stats_pool";
    case LayerKind::kLstm: return "lstm";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  int in_dim = 0;
  int out_dim = 0;
  std::vector<int> offsets;   // tdnn context, sorted ascending
  int hidden = 0;             // lstm hidden units per direction
  bool bidirectional = false; // lstm

  static LayerSpec dense(int in, int out) { return {LayerKind::kDense, in, out, {}, 0, false}; }
  static LayerSpec relu(int dim) { return {LayerKind::kRelu, dim, dim, {}, 0, false}; }
  static LayerSpec sigmoid(int dim) { return {LayerKind::kSigmoid, dim, dim, {}, 0, false}; }
  static LayerSpec softmax(int dim) { return {LayerKind::kSoftmax, dim, dim, {}, 0, false}; }
  static LayerSpec batchnorm(int dim) { return {LayerKind::kBatchNorm, dim, dim, {}, 0, false}; }
  static LayerSpec tdnn(std::vector<int> ctx, int in, int out) {
    return {LayerKind::kTdnn, in, out, std::move(ctx), 0, false};
  }
  static LayerSpec stats_pool(int dim) {
    return {LayerKind::kStatsPool, dim, 2 * dim, {}, 0, false};
  }
  static LayerSpec lstm(int in, int hidden, bool bidirectional) {
    return {LayerKind::kLstm, in, bidirectional ? 2 * hidden : hidden, {}, hidden,
            bidirectional};
  }

  // affine input width after frame splicing
  int spliced_dim() const {
    return kind == LayerKind::kTdnn
               ? in_dim * static_cast<int>(std::max<std::size_t>(1, offsets.size()))
               : in_dim;
  }
};

struct NetworkSpec {
  int input_dim = 0;
  std::vector<LayerSpec> layers;

  int output_dim() const { return layers.empty() ? input_dim : layers.back().out_dim; }

  void validate() const {
    int dim = input_dim;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const LayerSpec& l = layers[i];
      if (l.in_dim != dim)
        throw ContractError(format("layer %zu (%s): expects input %d, got %d", i,
                                   layer_kind_name(l.kind), l.in_dim, dim));
      if (l.kind == LayerKind::kTdnn) {
        if (l.offsets.empty()) throw ContractError("tdnn layer with no offsets");
        if (!std::is_sorted(l.offsets.begin(), l.offsets.end()))
          throw ContractError("tdnn offsets must be sorted ascending");
      }
      if (l.kind == LayerKind::kStatsPool && l.out_dim != 2 * l.in_dim)
        throw ContractError("stats_pool output must be twice its input");
      if (l.kind == LayerKind::kLstm &&
          l.out_dim != (l.bidirectional ? 2 * l.hidden : l.hidden))
        throw ContractError("lstm output size inconsistent with hidden size");
      dim = l.out_dim;
    }
  }

  std::uint64_t digest() const {
    Fnv64 h;
    h.update_pod(input_dim);
    for (const auto& l : layers) {
      h.update_pod(static_cast<std::uint32_t>(l.kind));
      h.update_pod(l.in_dim);
      h.update_pod(l.out_dim);
      h.update_pod(l.hidden);
      h.update_pod(static_cast<std::uint32_t>(l.bidirectional ? 1 : 0));
      for (int o : l.offsets) h.update_pod(o);
    }
    return h.digest();
  }
};

// Trainable weights plus non-trainable state (batchnorm running stats).
struct LayerParams {
  std::vector<Matrix> weights;
  std::vector<Matrix> state;
};

struct NetworkParams {
  std::uint64_t spec_digest = 0;
  std::uint64_t init_seed = 0;
  std::vector<LayerParams> layers;
};

// Gradients mirror the trainable weights layer by layer.
struct NetworkGrads {
  std::vector<std::vector<Matrix>> layers;

  void accumulate(const NetworkGrads& other, double scale = 1.0) {
    if (layers.size() != other.layers.size())
      throw ContractError("gradient accumulate: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l)
      for (std::size_t w = 0; w < layers[l].size(); ++w)
        add_scaled(layers[l][w], other.layers[l][w], scale);
  }
};

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr double kStatsPoolEpsilon = 1e-10;

// ---------------------------------------------------------------------------
// Initialization: uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
// ---------------------------------------------------------------------------

namespace nnet_detail {

inline Matrix init_weight(std::size_t rows, std::size_t cols, std::size_t fan_in,
                          std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-a, a);
  return m;
}

}  // namespace nnet_detail

inline NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(mix_seed(seed, 0x11171ULL));
  NetworkParams params;
  params.spec_digest = spec.digest();
  params.init_seed = seed;
  params.layers.resize(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    LayerParams& p = params.layers[i];
    switch (l.kind) {
      case LayerKind::kDense:
      case LayerKind::kTdnn: {
        const int in = l.spliced_dim();
        p.weights.push_back(nnet_detail::init_weight(
            static_cast<std::size_t>(l.out_dim), static_cast<std::size_t>(in),
            static_cast<std::size_t>(in), static_cast<std::size_t>(l.out_dim), rng));
        p.weights.emplace_back(1, static_cast<std::size_t>(l.out_dim));
        break;
      }
      case LayerKind::kBatchNorm: {
        p.state.emplace_back(1, static_cast<std::size_t>(l.in_dim));  // running mean
        Matrix sq(1, static_cast<std::size_t>(l.in_dim), 1.0);  // running mean square
        p.state.push_back(std::move(sq));
        break;
      }
      case LayerKind::kLstm: {
        const int dirs = l.bidirectional ? 2 : 1;
        for (int d = 0; d < dirs; ++d) {
          p.weights.push_back(nnet_detail::init_weight(
              static_cast<std::size_t>(4 * l.hidden),
              static_cast<std::size_t>(l.in_dim), static_cast<std::size_t>(l.in_dim),
              static_cast<std::size_t>(l.hidden), rng));
          p.weights.push_back(nnet_detail::init_weight(
              static_cast<std::size_t>(4 * l.hidden),
              static_cast<std::size_t>(l.hidden), static_cast<std::size_t>(l.hidden),
              static_cast<std::size_t>(l.hidden), rng));
          p.weights.emplace_back(1, static_cast<std::size_t>(4 * l.hidden));
        }
        break;
      }
      default:
        break;
    }
  }
  return params;
}

inline NetworkGrads zero_grads(const NetworkParams& params) {
  NetworkGrads g;
  g.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    g.layers[l].reserve(params.layers[l].weights.size());
    for (const auto& w : params.layers[l].weights)
      g.layers[l].emplace_back(w.rows(), w.cols());
  }
  return g;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

enum class Mode { kTrain, kInfer };

struct LayerCache {
  Matrix input;
  Matrix output;
  Matrix aux1, aux2;               // layer-specific intermediates
  std::vector<Matrix> lstm;        // per direction: gates (T x 4H), c, h, tanh_c
};

struct ForwardCache {
  std::vector<LayerCache> layers;
};

namespace nnet_detail {

inline double sigmoid_fn(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Matrix splice(const Matrix& x, const std::vector<int>& offsets) {
  const std::size_t t = x.rows();
  const std::size_t d = x.cols();
  Matrix out(t, d * offsets.size());
  for (std::size_t r = 0; r < t; ++r) {
    double* dst = out.row(r);
    for (std::size_t j = 0; j < offsets.size(); ++j) {
      long src = static_cast<long>(r) + offsets[j];
      src = std::clamp(src, 0L, static_cast<long>(t) - 1);  // edge clamping
      const double* srow = x.row(static_cast<std::size_t>(src));
      std::copy(srow, srow + d, dst + j * d);
    }
  }
  return out;
}

// One LSTM direction. When reverse, time runs T-1..0 but outputs stay
// aligned with input rows. Results go into out columns [col0, col0+H).
inline void lstm_direction(const Matrix& x, const Matrix& wx, const Matrix& wh,
                           const Matrix& bias, bool reverse, Matrix& out,
                           std::size_t col0, Matrix& gates, Matrix& cells,
                           Matrix& hidden, Matrix& tanh_c) {
  const std::size_t t_len = x.rows();
  const std::size_t h_dim = wh.cols();
  std::vector<double> h_prev(h_dim, 0.0), c_prev(h_dim, 0.0);
  for (std::size_t step = 0; step < t_len; ++step) {
    const std::size_t t = reverse ? t_len - 1 - step : step;
    double* g = gates.row(t);
    const double* xt = x.row(t);
    for (std::size_t u = 0; u < 4 * h_dim; ++u)
      g[u] = bias(0, u) + dot(wx.row(u), xt, x.cols()) +
             dot(wh.row(u), h_prev.data(), h_dim);
    double* c = cells.row(t);
    double* h = hidden.row(t);
    double* tc = tanh_c.row(t);
    for (std::size_t u = 0; u < h_dim; ++u) {
      const double i_g = sigmoid_fn(g[u]);
      const double f_g = sigmoid_fn(g[h_dim + u]);
      const double g_g = std::tanh(g[2 * h_dim + u]);
      const double o_g = sigmoid_fn(g[3 * h_dim + u]);
      g[u] = i_g;
      g[h_dim + u] = f_g;
      g[2 * h_dim + u] = g_g;
      g[3 * h_dim + u] = o_g;
      c[u] = f_g * c_prev[u] + i_g * g_g;
      tc[u] = std::tanh(c[u]);
      h[u] = o_g * tc[u];
      out(t, col0 + u) = h[u];
    }
    std::copy(c, c + h_dim, c_prev.data());
    std::copy(h, h + h_dim, h_prev.data());
  }
}

// BPTT through one direction; returns input gradient contribution in dx.
inline void lstm_direction_backward(const Matrix& x, const Matrix& wx,
                                    const Matrix& wh, bool reverse,
                                    const Matrix& gates, const Matrix& cells,
                                    const Matrix& hidden, const Matrix& tanh_c,
                                    const Matrix& dout, std::size_t col0, Matrix& dx,
                                    Matrix& dwx, Matrix& dwh, Matrix& dbias) {
  const std::size_t t_len = x.rows();
  const std::size_t h_dim = wh.cols();
  std::vector<double> dh_carry(h_dim, 0.0), dc_carry(h_dim, 0.0);
  std::vector<double> dz(4 * h_dim);
  for (std::size_t step = t_len; step-- > 0;) {
    // walk opposite to the forward processing order
    const std::size_t t = reverse ? t_len - 1 - step : step;
    const double* g = gates.row(t);
    const double* tc = tanh_c.row(t);

    const bool has_prev = step > 0;
    const std::size_t t_prev = reverse ? t + 1 : t - 1;

    for (std::size_t u = 0; u < h_dim; ++u) {
      const double i_g = g[u];
      const double f_g = g[h_dim + u];
      const double g_g = g[2 * h_dim + u];
      const double o_g = g[3 * h_dim + u];
      const double c_prev = has_prev ? cells(t_prev, u) : 0.0;

      const double dh = dout(t, col0 + u) + dh_carry[u];
      const double dc = dc_carry[u] + dh * o_g * (1.0 - tc[u] * tc[u]);
      const double d_o = dh * tc[u];
      const double d_i = dc * g_g;
      const double d_f = dc * c_prev;
      const double d_g = dc * i_g;
      dc_carry[u] = dc * f_g;

      dz[u] = d_i * i_g * (1.0 - i_g);
      dz[h_dim + u] = d_f * f_g * (1.0 - f_g);
      dz[2 * h_dim + u] = d_g * (1.0 - g_g * g_g);
      dz[3 * h_dim + u] = d_o * o_g * (1.0 - o_g);
    }

    const double* xt = x.row(t);
    const double* h_prev = has_prev ? hidden.row(t_prev) : nullptr;
    double* dxt = dx.row(t);
    std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
    for (std::size_t u = 0; u < 4 * h_dim; ++u) {
      const double dzu = dz[u];
      if (dzu == 0.0) continue;
      dbias(0, u) += dzu;
      double* dwx_row = dwx.row(u);
      const double* wx_row = wx.row(u);
      for (std::size_t d = 0; d < x.cols(); ++d) {
        dwx_row[d] += dzu * xt[d];
        dxt[d] += dzu * wx_row[d];
      }
      double* dwh_row = dwh.row(u);
      const double* wh_row = wh.row(u);
      for (std::size_t d = 0; d < h_dim; ++d) {
        if (has_prev) dwh_row[d] += dzu * h_prev[d];
        dh_carry[d] += dzu * wh_row[d];
      }
    }
  }
}

}  // namespace nnet_detail

inline Matrix forward(const NetworkSpec& spec, NetworkParams& params,
                      const Matrix& input, Mode mode,
                      ForwardCache* cache = nullptr) {
  if (static_cast<int>(input.cols()) != spec.input_dim)
    throw ContractError(format("forward: input dim %zu, spec expects %d",
                               input.cols(), spec.input_dim));
  if (params.spec_digest != spec.digest())
    throw ContractError("forward: params built for a different spec");
  if (cache) {
    cache->layers.clear();
    cache->layers.resize(spec.layers.size());
  }

  Matrix x = input;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerSpec& l = spec.layers[li];
    LayerParams& p = params.layers[li];
    LayerCache* lc = cache ? &cache->layers[li] : nullptr;
    const std::size_t t = x.rows();

    switch (l.kind) {
      case LayerKind::kDense: {
        const Matrix& w = p.weights[0];
        const Matrix& b = p.weights[1];
        Matrix y = matmul_nt(x, w);
        for (std::size_t r = 0; r < y.rows(); ++r)
          for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += b(0, c);
        if (lc) lc->input = std::move(x);
        x = std::move(y);
        break;
      }
      case LayerKind::kTdnn: {
        Matrix spliced = nnet_detail::splice(x, l.offsets);
        const Matrix& w = p.weights[0];
        const Matrix& b = p.weights[1];
        Matrix y = matmul_nt(spliced, w);
        for (std::size_t r = 0; r < y.rows(); ++r)
          for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += b(0, c);
        if (lc) {
          lc->input = std::move(x);
          lc->aux1 = std::move(spliced);
        }
        x = std::move(y);
        break;
      }
      case LayerKind::kRelu: {
        Matrix y = x;
        for (std::size_t i = 0; i < y.size(); ++i)
          if (y.data()[i] < 0.0) y.data()[i] = 0.0;
        if (lc) lc->input = std::move(x);
        x = std::move(y);
        break;
      }
      case LayerKind::kSigmoid: {
        Matrix y = x;
        for (std::size_t i = 0; i < y.size(); ++i)
          y.data()[i] = nnet_detail::sigmoid_fn(y.data()[i]);
        if (lc) lc->output = y;
        x = std::move(y);
        break;
      }
      case LayerKind::kSoftmax: {
        Matrix y = x;
        for (std::size_t r = 0; r < y.rows(); ++r) {
          double* row = y.row(r);
          double mx = row[0];
          for (std::size_t c = 1; c < y.cols(); ++c) mx = std::max(mx, row[c]);
          double sum = 0.0;
          for (std::size_t c = 0; c < y.cols(); ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
          }
          for (std::size_t c = 0; c < y.cols(); ++c) row[c] /= sum;
        }
        if (lc) lc->output = y;
        x = std::move(y);
        break;
      }
      case LayerKind::kBatchNorm: {
        // Normalization always uses the stored running statistics, so the
        // layer is an affine map within any single step and statistics
        // pooling downstream still sees per-sequence variation (per-chunk
        // batch statistics would normalize it away under single-example
        // SGD). The running estimates track the first and second moments
        // with EMA updates, which also works for one-row segment-level
        // inputs; variance is derived as E[x^2] - E[x]^2.
        Matrix& running_mean = p.state[0];
        Matrix& running_sq = p.state[1];
        const std::size_t d = x.cols();
        Matrix y(t, d);
        Matrix inv_std(1, d);
        for (std::size_t c = 0; c < d; ++c) {
          const double var = std::max(
              running_sq(0, c) - running_mean(0, c) * running_mean(0, c), 0.0);
          const double inv = 1.0 / std::sqrt(var + kBatchNormEpsilon);
          inv_std(0, c) = inv;
          for (std::size_t r = 0; r < t; ++r)
            y(r, c) = (x(r, c) - running_mean(0, c)) * inv;
        }
        if (mode == Mode::kTrain && t >= 1) {
          for (std::size_t c = 0; c < d; ++c) {
            double mean = 0.0, mean_sq = 0.0;
            for (std::size_t r = 0; r < t; ++r) {
              mean += x(r, c);
              mean_sq += x(r, c) * x(r, c);
            }
            mean /= static_cast<double>(t);
            mean_sq /= static_cast<double>(t);
            running_mean(0, c) = (1.0 - kBatchNormMomentum) * running_mean(0, c) +
                                 kBatchNormMomentum * mean;
            running_sq(0, c) = (1.0 - kBatchNormMomentum) * running_sq(0, c) +
                               kBatchNormMomentum * mean_sq;
          }
        }
        if (lc) lc->aux2 = std::move(inv_std);
        x = std::move(y);
        break;
      }
      case LayerKind::kStatsPool: {
        if (t == 0) throw ContractError("stats_pool: empty input");
        const std::size_t d = x.cols();
        Matrix y(1, 2 * d);
        Matrix mean(1, d), sdev(1, d);
        for (std::size_t c = 0; c < d; ++c) {
          double mu = 0.0;
          for (std::size_t r = 0; r < t; ++r) mu += x(r, c);
          mu /= static_cast<double>(t);
          double var = 0.0;
          for (std::size_t r = 0; r < t; ++r) {
            const double dev = x(r, c) - mu;
            var += dev * dev;
          }
          var /= static_cast<double>(t);
          const double s = std::sqrt(var + kStatsPoolEpsilon);
          mean(0, c) = mu;
          sdev(0, c) = s;
          y(0, c) = mu;
          y(0, d + c) = s;
        }
        if (lc) {
          lc->input = std::move(x);
          lc->aux1 = std::move(mean);
          lc->aux2 = std::move(sdev);
        }
        x = std::move(y);
        break;
      }
      case LayerKind::kLstm: {
        const std::size_t h = static_cast<std::size_t>(l.hidden);
        const int dirs = l.bidirectional ? 2 : 1;
        Matrix y(t, static_cast<std::size_t>(l.out_dim));
        std::vector<Matrix> lstm_cache;
        lstm_cache.reserve(static_cast<std::size_t>(dirs) * 4);
        for (int dir = 0; dir < dirs; ++dir) {
          Matrix gates(t, 4 * h), cells(t, h), hidden(t, h), tanh_c(t, h);
          nnet_detail::lstm_direction(x, p.weights[3 * dir], p.weights[3 * dir + 1],
                                      p.weights[3 * dir + 2], dir == 1, y, dir * h,
                                      gates, cells, hidden, tanh_c);
          lstm_cache.push_back(std::move(gates));
          lstm_cache.push_back(std::move(cells));
          lstm_cache.push_back(std::move(hidden));
          lstm_cache.push_back(std::move(tanh_c));
        }
        if (lc) {
          lc->input = std::move(x);
          lc->lstm = std::move(lstm_cache);
        }
        x = std::move(y);
        break;
      }
    }
  }
  if (!x.all_finite())
    throw NumericalError("forward: non-finite activation (divergence?)");
  return x;
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

struct BackwardResult {
  NetworkGrads grads;
  Matrix input_grad;
};

inline BackwardResult backward(const NetworkSpec& spec, const NetworkParams& params,
                               const ForwardCache& cache, const Matrix& output_grad) {
  if (cache.layers.size() != spec.layers.size())
    throw ContractError("backward: cache does not match spec");

  BackwardResult res;
  res.grads.layers.resize(spec.layers.size());

  Matrix dy = output_grad;
  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const LayerSpec& l = spec.layers[li];
    const LayerParams& p = params.layers[li];
    const LayerCache& lc = cache.layers[li];
    std::vector<Matrix>& g = res.grads.layers[li];

    switch (l.kind) {
      case LayerKind::kDense: {
        const Matrix& w = p.weights[0];
        Matrix dw = matmul_tn(dy, lc.input);
        Matrix db(1, dy.cols());
        for (std::size_t r = 0; r < dy.rows(); ++r)
          for (std::size_t c = 0; c < dy.cols(); ++c) db(0, c) += dy(r, c);
        Matrix dx = matmul(dy, w);
        g.push_back(std::move(dw));
        g.push_back(std::move(db));
        dy = std::move(dx);
        break;
      }
      case LayerKind::kTdnn: {
        const Matrix& w = p.weights[0];
        Matrix dw = matmul_tn(dy, lc.aux1);
        Matrix db(1, dy.cols());
        for (std::size_t r = 0; r < dy.rows(); ++r)
          for (std::size_t c = 0; c < dy.cols(); ++c) db(0, c) += dy(r, c);
        Matrix dspliced = matmul(dy, w);
        const std::size_t t = lc.input.rows();
        const std::size_t d = lc.input.cols();
        Matrix dx(t, d);
        for (std::size_t r = 0; r < t; ++r) {
          const double* srow = dspliced.row(r);
          for (std::size_t j = 0; j < l.offsets.size(); ++j) {
            long src = static_cast<long>(r) + l.offsets[j];
            src = std::clamp(src, 0L, static_cast<long>(t) - 1);
            double* drow = dx.row(static_cast<std::size_t>(src));
            for (std::size_t c = 0; c < d; ++c) drow[c] += srow[j * d + c];
          }
        }
        g.push_back(std::move(dw));
        g.push_back(std::move(db));
        dy = std::move(dx);
        break;
      }
      case LayerKind::kRelu: {
        Matrix dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i)
          if (lc.input.data()[i] <= 0.0) dx.data()[i] = 0.0;
        dy = std::move(dx);
        break;
      }
      case LayerKind::kSigmoid: {
        Matrix dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i) {
          const double y = lc.output.data()[i];
          dx.data()[i] *= y * (1.0 - y);
        }
        dy = std::move(dx);
        break;
      }
      case LayerKind::kSoftmax: {
        Matrix dx(dy.rows(), dy.cols());
        for (std::size_t r = 0; r < dy.rows(); ++r) {
          double inner = 0.0;
          for (std::size_t c = 0; c < dy.cols(); ++c)
            inner += dy(r, c) * lc.output(r, c);
          for (std::size_t c = 0; c < dy.cols(); ++c)
            dx(r, c) = lc.output(r, c) * (dy(r, c) - inner);
        }
        dy = std::move(dx);
        break;
      }
      case LayerKind::kBatchNorm: {
        // running statistics are constants within a step
        const std::size_t t = dy.rows();
        const std::size_t d = dy.cols();
        Matrix dx(t, d);
        for (std::size_t c = 0; c < d; ++c) {
          const double inv = lc.aux2(0, c);
          for (std::size_t r = 0; r < t; ++r) dx(r, c) = dy(r, c) * inv;
        }
        dy = std::move(dx);
        break;
      }
      case LayerKind::kStatsPool: {
        const std::size_t t = lc.input.rows();
        const std::size_t d = lc.input.cols();
        Matrix dx(t, d);
        for (std::size_t c = 0; c < d; ++c) {
          const double dmu = dy(0, c);
          const double ds = dy(0, d + c);
          const double mu = lc.aux1(0, c);
          const double s = lc.aux2(0, c);
          for (std::size_t r = 0; r < t; ++r)
            dx(r, c) = dmu / static_cast<double>(t) +
                       ds * (lc.input(r, c) - mu) / (static_cast<double>(t) * s);
        }
        dy = std::move(dx);
        break;
      }
      case LayerKind::kLstm: {
        const std::size_t h = static_cast<std::size_t>(l.hidden);
        const int dirs = l.bidirectional ? 2 : 1;
        Matrix dx(lc.input.rows(), lc.input.cols());
        for (int dir = 0; dir < dirs; ++dir) {
          Matrix dwx(p.weights[3 * dir].rows(), p.weights[3 * dir].cols());
          Matrix dwh(p.weights[3 * dir + 1].rows(), p.weights[3 * dir + 1].cols());
          Matrix db(1, 4 * h);
          nnet_detail::lstm_direction_backward(
              lc.input, p.weights[3 * dir], p.weights[3 * dir + 1], dir == 1,
              lc.lstm[4 * dir], lc.lstm[4 * dir + 1], lc.lstm[4 * dir + 2],
              lc.lstm[4 * dir + 3], dy, dir * h, dx, dwx, dwh, db);
          g.push_back(std::move(dwx));
          g.push_back(std::move(dwh));
          g.push_back(std::move(db));
        }
        dy = std::move(dx);
        break;
      }
    }
  }
  res.input_grad = std::move(dy);
  return res;
}

// ---------------------------------------------------------------------------
// SGD
// ---------------------------------------------------------------------------

inline void sgd_step(NetworkParams& params, const NetworkGrads& grads,
                     double learning_rate) {
  if (grads.layers.size() != params.layers.size())
    throw ContractError("sgd_step: gradient/param layer count mismatch");
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& weights = params.layers[l].weights;
    const auto& gl = grads.layers[l];
    if (gl.size() != weights.size())
      throw ContractError("sgd_step: gradient/param shape mismatch");
    for (std::size_t w = 0; w < weights.size(); ++w) {
      if (!gl[w].all_finite())
        throw NumericalError(
            format("sgd_step: non-finite gradient in layer %zu (training divergence)", l));
      add_scaled(weights[w], gl[w], -learning_rate);
    }
  }
}

// ---------------------------------------------------------------------------
// Gradient checker: central differences on sampled parameter coordinates.
// ---------------------------------------------------------------------------

using LossFn = std::function<std::pair<double, Matrix>(const Matrix& output)>;

inline double gradient_check(const NetworkSpec& spec, NetworkParams params,
                             const Matrix& input, const LossFn& loss,
                             std::size_t max_coords = 500, double h = 1e-5,
                             std::uint64_t seed = 0) {
  // Inference mode: normalization math is identical to a training step but
  // running statistics stay frozen across the finite-difference evaluations.
  ForwardCache cache;
  const Matrix out = forward(spec, params, input, Mode::kInfer, &cache);
  auto [loss0, dout] = loss(out);
  (void)loss0;
  const BackwardResult back = backward(spec, params, cache, dout);

  struct Coord {
    std::size_t layer, weight, index;
  };
  std::vector<Coord> coords;
  for (std::size_t l = 0; l < params.layers.size(); ++l)
    for (std::size_t w = 0; w < params.layers[l].weights.size(); ++w)
      for (std::size_t i = 0; i < params.layers[l].weights[w].size(); ++i)
        coords.push_back({l, w, i});

  Rng rng(mix_seed(seed, 0x6c0deULL));
  if (coords.size() > max_coords) {
    rng.shuffle(coords);
    coords.resize(max_coords);
  }

  double max_rel = 0.0;
  for (const Coord& c : coords) {
    double& theta = params.layers[c.layer].weights[c.weight].data()[c.index];
    const double saved = theta;
    theta = saved + h;
    const double lp = loss(forward(spec, params, input, Mode::kInfer)).first;
    theta = saved - h;
    const double lm = loss(forward(spec, params, input, Mode::kInfer)).first;
    theta = saved;
    const double numeric = (lp - lm) / (2.0 * h);
    const double analytic = back.grads.layers[c.layer][c.weight].data()[c.index];
    const double rel = std::fabs(analytic - numeric) /
                       std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

// ---------------------------------------------------------------------------
// Parameter file: magic "DKNN", spec digest, per-layer little-endian f64.
// ---------------------------------------------------------------------------

inline void write_params(const std::string& path, const NetworkParams& params) {
  BinaryWriter w(path);
  w.magic("DKNN");
  w.u64(params.spec_digest);
  w.u64(params.init_seed);
  w.u32(static_cast<std::uint32_t>(params.layers.size()));
  for (const auto& layer : params.layers) {
    w.u32(static_cast<std::uint32_t>(layer.weights.size()));
    for (const auto& m : layer.weights) w.matrix_f64(m);
    w.u32(static_cast<std::uint32_t>(layer.state.size()));
    for (const auto& m : layer.state) w.matrix_f64(m);
  }
  w.close();
}

inline NetworkParams read_params(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("DKNN");
  NetworkParams params;
  params.spec_digest = r.u64();
  params.init_seed = r.u64();
  const std::uint32_t num_layers = r.u32();
  params.layers.resize(num_layers);
  for (auto& layer : params.layers) {
    const std::uint32_t nw = r.u32();
    for (std::uint32_t i = 0; i < nw; ++i) layer.weights.push_back(r.matrix_f64());
    const std::uint32_t ns = r.u32();
    for (std::uint32_t i = 0; i < ns; ++i) layer.state.push_back(r.matrix_f64());
  }
  return params;
}

}  // namespace diarkit

#endif  // DIARKIT_NNET_HPP
