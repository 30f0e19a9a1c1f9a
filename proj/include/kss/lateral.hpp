#pragma once

// Lateral connection (LC): injects label embeddings into a backbone feature
// map.
//
//   m = reshape(x)ᵀ-per-position · σ(E)ᵀ      (positions × labels)
//   y = g(m) + x                              (g: pointwise labels → channels)
//
// x is C×H×W (2D) or C×T×H×W (3D), E is N×C, g has a C×N weight and a
// C-vector bias. σ is applied to E only; x enters the product raw.

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "kss/activation.hpp"
#include "kss/error.hpp"
#include "kss/tensor.hpp"

namespace kss {

template <typename T>
struct LcParams {
  Matrix<T> weight;      // C × N
  std::vector<T> bias;   // C
  Activation activation = Activation::tanh();
  bool use_bias = true;

  std::size_t channels() const noexcept { return weight.rows(); }
  std::size_t labels() const noexcept { return weight.cols(); }

  static LcParams zeros(std::size_t channels, std::size_t labels,
                        Activation act = Activation::tanh()) {
    return {Matrix<T>(channels, labels), std::vector<T>(channels, T{}), act, true};
  }

  /// Uniform(-1/sqrt(N), 1/sqrt(N)) weights and zero bias.
  static LcParams random(std::size_t channels, std::size_t labels, std::mt19937_64& rng,
                         Activation act = Activation::tanh()) {
    auto p = zeros(channels, labels, act);
    const double bound = 1.0 / std::sqrt(static_cast<double>(labels));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : p.weight.values()) v = static_cast<T>(dist(rng));
    return p;
  }
};

template <typename T>
struct LcGrads {
  FeatureMap<T> input;   // dL/dx
  Matrix<T> embedding;   // dL/dE
  Matrix<T> weight;      // dL/dW_g
  std::vector<T> bias;   // dL/db_g
};

namespace detail {

template <typename T>
void check_lc_shapes(const FeatureMap<T>& x, const Matrix<T>& e, const LcParams<T>& p) {
  require_shape(e.cols() == x.channels(),
                "lc: embedding width " + std::to_string(e.cols()) +
                    " does not match feature channels " + std::to_string(x.channels()));
  require_shape(p.weight.rows() == x.channels() && p.weight.cols() == e.rows(),
                "lc: g weight must be " + std::to_string(x.channels()) + "x" +
                    std::to_string(e.rows()) + ", got " + std::to_string(p.weight.rows()) + "x" +
                    std::to_string(p.weight.cols()));
  require_shape(p.bias.size() == x.channels(), "lc: g bias length differs from channel count");
}

template <typename T>
Matrix<T> activate(const Matrix<T>& e, const Activation& act) {
  Matrix<T> s = e;
  for (auto& v : s.values()) v = act(v);
  return s;
}

}  // namespace detail

/// LC on a C×T×H×W feature map.
template <typename T>
FeatureMap<T> lc_forward_3d(const FeatureMap<T>& x, const Matrix<T>& e, const LcParams<T>& p) {
  detail::require_shape(x.temporal(), "lc_forward_3d: feature map has no frame axis");
  detail::check_lc_shapes(x, e, p);
  const std::size_t C = x.channels(), N = e.rows();
  const std::size_t TT = x.frames(), H = x.height(), W = x.width();
  const auto s = detail::activate(e, p.activation);

  // correlation, laid out N × T × H × W
  std::vector<T> m(N * TT * H * W, T{});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const T snc = s(n, c);
      for (std::size_t t = 0; t < TT; ++t)
        for (std::size_t h = 0; h < H; ++h)
          for (std::size_t w = 0; w < W; ++w)
            m[((n * TT + t) * H + h) * W + w] += x.at(c, t, h, w) * snc;
    }

  FeatureMap<T> y = x;
  for (std::size_t c = 0; c < C; ++c) {
    const T b = p.use_bias ? p.bias[c] : T{};
    for (std::size_t t = 0; t < TT; ++t)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) {
          T acc{};
          for (std::size_t n = 0; n < N; ++n) acc += p.weight(c, n) * m[((n * TT + t) * H + h) * W + w];
          y.at(c, t, h, w) = acc + b + x.at(c, t, h, w);
        }
  }
  return y;
}

/// LC on a C×H×W feature map.
template <typename T>
FeatureMap<T> lc_forward_2d(const FeatureMap<T>& x, const Matrix<T>& e, const LcParams<T>& p) {
  detail::require_shape(!x.temporal(), "lc_forward_2d: feature map has a frame axis");
  detail::check_lc_shapes(x, e, p);
  const std::size_t C = x.channels(), N = e.rows(), H = x.height(), W = x.width();
  const auto s = detail::activate(e, p.activation);

  std::vector<T> m(N * H * W, T{});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const T snc = s(n, c);
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) m[(n * H + h) * W + w] += x.at(c, h, w) * snc;
    }

  FeatureMap<T> y = x;
  for (std::size_t c = 0; c < C; ++c) {
    const T b = p.use_bias ? p.bias[c] : T{};
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w) {
        T acc{};
        for (std::size_t n = 0; n < N; ++n) acc += p.weight(c, n) * m[(n * H + h) * W + w];
        y.at(c, h, w) = acc + b + x.at(c, h, w);
      }
  }
  return y;
}

/// Dispatches on whether the feature map carries a frame axis.
template <typename T>
FeatureMap<T> lc_forward(const FeatureMap<T>& x, const Matrix<T>& e, const LcParams<T>& p) {
  return x.temporal() ? lc_forward_3d(x, e, p) : lc_forward_2d(x, e, p);
}

/// Reverse-mode gradients of lc_forward for an upstream gradient `dy`.
/// Works for both layouts since every term is per-position.
template <typename T>
LcGrads<T> lc_backward(const FeatureMap<T>& x, const Matrix<T>& e, const LcParams<T>& p,
                       const FeatureMap<T>& dy) {
  detail::check_lc_shapes(x, e, p);
  detail::require_shape(dy.same_shape(x), "lc_backward: upstream gradient shape " +
                                              dy.shape_string() + " differs from input " +
                                              x.shape_string());
  const std::size_t C = x.channels(), N = e.rows(), P = x.positions();
  const auto s = detail::activate(e, p.activation);

  // recompute the correlation m (N × P)
  std::vector<T> m(N * P, T{});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const T snc = s(n, c);
      auto xc = x.channel(c);
      T* mn = m.data() + n * P;
      for (std::size_t q = 0; q < P; ++q) mn[q] += xc[q] * snc;
    }

  LcGrads<T> g{dy, Matrix<T>(N, C), Matrix<T>(C, N), std::vector<T>(C, T{})};

  // dm[n][q] = Σ_c W[c][n] dy[c][q]
  std::vector<T> dm(N * P, T{});
  for (std::size_t c = 0; c < C; ++c) {
    auto dyc = dy.channel(c);
    for (std::size_t n = 0; n < N; ++n) {
      const T wcn = p.weight(c, n);
      T* dmn = dm.data() + n * P;
      const T* mn = m.data() + n * P;
      T acc{};
      for (std::size_t q = 0; q < P; ++q) {
        dmn[q] += wcn * dyc[q];
        acc += dyc[q] * mn[q];
      }
      g.weight(c, n) = acc;
    }
    if (p.use_bias) {
      T acc{};
      for (std::size_t q = 0; q < P; ++q) acc += dyc[q];
      g.bias[c] = acc;
    }
  }

  // dx[c][q] += Σ_n s[n][c] dm[n][q];  ds[n][c] = Σ_q dm[n][q] x[c][q]
  for (std::size_t c = 0; c < C; ++c) {
    auto xc = x.channel(c);
    auto dxc = g.input.channel(c);
    for (std::size_t n = 0; n < N; ++n) {
      const T snc = s(n, c);
      const T* dmn = dm.data() + n * P;
      T acc{};
      for (std::size_t q = 0; q < P; ++q) {
        dxc[q] += snc * dmn[q];
        acc += dmn[q] * xc[q];
      }
      g.embedding(n, c) = acc * p.activation.derivative(e(n, c), s(n, c));
    }
  }
  return g;
}

}  // namespace kss
