#pragma once

// Small convolutional backbone: each stage is a 3×3 same-padding
// convolution, a pointwise nonlinearity and an optional 2×2 average pool.

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
struct ConvStage {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::vector<T> weight;  // [out][in][3][3]
  std::vector<T> bias;    // [out]
  Activation activation = Activation::relu();
  bool downsample = true;

  static ConvStage make(std::size_t in, std::size_t out, Activation act, bool downsample,
                        std::mt19937_64& rng) {
    ConvStage s{in, out, std::vector<T>(out * in * 9), std::vector<T>(out, T{}), act, downsample};
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(in * 9)));
    for (auto& v : s.weight) v = static_cast<T>(dist(rng));
    return s;
  }

  T& w(std::size_t o, std::size_t i, std::size_t kh, std::size_t kw) {
    return weight[((o * in_channels + i) * 3 + kh) * 3 + kw];
  }
  const T& w(std::size_t o, std::size_t i, std::size_t kh, std::size_t kw) const {
    return weight[((o * in_channels + i) * 3 + kh) * 3 + kw];
  }
};

template <typename T>
struct ConvStageCache {
  FeatureMap<T> input;
  FeatureMap<T> pre;        // convolution output
  FeatureMap<T> activated;  // σ(pre)
  FeatureMap<T> output;     // pooled (or activated when no downsample)
};

template <typename T>
struct ConvStageGrads {
  FeatureMap<T> input;
  std::vector<T> weight;
  std::vector<T> bias;
};

namespace detail {

/// Patch matrix [position][in * 9] with zero padding, matching the weight
/// layout [out][in][3][3].
template <typename T>
std::vector<T> im2col3x3(const FeatureMap<T>& x) {
  const std::size_t C = x.channels(), H = x.height(), W = x.width(), K = C * 9;
  std::vector<T> cols(H * W * K, T{});
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t w = 0; w < W; ++w) {
      T* row = cols.data() + (h * W + w) * K;
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t kh = 0; kh < 3; ++kh) {
          if (h + kh < 1 || h + kh > H) continue;
          for (std::size_t kw = 0; kw < 3; ++kw) {
            if (w + kw < 1 || w + kw > W) continue;
            row[c * 9 + kh * 3 + kw] = x.at(c, h + kh - 1, w + kw - 1);
          }
        }
    }
  return cols;
}

}  // namespace detail

template <typename T>
FeatureMap<T> conv3x3(const FeatureMap<T>& x, const ConvStage<T>& s) {
  detail::require_shape(!x.temporal() && x.channels() == s.in_channels,
                        "conv stage: expected " + std::to_string(s.in_channels) +
                            " input channels, got " + x.shape_string());
  const std::size_t H = x.height(), W = x.width(), P = H * W;
  const std::size_t K = s.in_channels * 9, O = s.out_channels;
  const auto cols = detail::im2col3x3(x);
  std::vector<T> wt(K * O);
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t k = 0; k < K; ++k) wt[k * O + o] = s.weight[o * K + k];
  std::vector<T> yt(P * O);
  for (std::size_t p = 0; p < P; ++p) {
    T* dst = yt.data() + p * O;
    for (std::size_t o = 0; o < O; ++o) dst[o] = s.bias[o];
    const T* src = cols.data() + p * K;
    for (std::size_t k = 0; k < K; ++k) {
      const T v = src[k];
      if (v == T{}) continue;
      const T* wk = wt.data() + k * O;
      for (std::size_t o = 0; o < O; ++o) dst[o] += v * wk[o];
    }
  }
  FeatureMap<T> y(O, H, W);
  for (std::size_t o = 0; o < O; ++o) {
    auto yo = y.channel(o);
    for (std::size_t p = 0; p < P; ++p) yo[p] = yt[p * O + o];
  }
  return y;
}

template <typename T>
FeatureMap<T> avg_pool2(const FeatureMap<T>& x) {
  detail::require_shape(x.height() % 2 == 0 && x.width() % 2 == 0,
                        "avg_pool2: spatial size must be even, got " + x.shape_string());
  const std::size_t H = x.height() / 2, W = x.width() / 2;
  FeatureMap<T> y(x.channels(), H, W);
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w)
        y.at(c, h, w) = (x.at(c, 2 * h, 2 * w) + x.at(c, 2 * h, 2 * w + 1) +
                         x.at(c, 2 * h + 1, 2 * w) + x.at(c, 2 * h + 1, 2 * w + 1)) /
                        T{4};
  return y;
}

template <typename T>
ConvStageCache<T> stage_forward_cached(const FeatureMap<T>& x, const ConvStage<T>& s) {
  ConvStageCache<T> c;
  c.input = x;
  c.pre = conv3x3(x, s);
  c.activated = c.pre;
  for (auto& v : c.activated.values()) v = s.activation(v);
  c.output = s.downsample ? avg_pool2(c.activated) : c.activated;
  return c;
}

template <typename T>
FeatureMap<T> stage_forward(const FeatureMap<T>& x, const ConvStage<T>& s) {
  FeatureMap<T> a = conv3x3(x, s);
  for (auto& v : a.values()) v = s.activation(v);
  return s.downsample ? avg_pool2(a) : a;
}

template <typename T>
ConvStageGrads<T> stage_backward(const ConvStageCache<T>& c, const ConvStage<T>& s,
                                 const FeatureMap<T>& d_output) {
  detail::require_shape(d_output.same_shape(c.output), "stage backward: gradient shape mismatch");
  const std::size_t H = c.pre.height(), W = c.pre.width();
  FeatureMap<T> d_pre(s.out_channels, H, W);
  for (std::size_t o = 0; o < s.out_channels; ++o)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w) {
        const T up = s.downsample ? d_output.at(o, h / 2, w / 2) / T{4} : d_output.at(o, h, w);
        d_pre.at(o, h, w) = up * s.activation.derivative(c.pre.at(o, h, w), c.activated.at(o, h, w));
      }

  const std::size_t P = H * W, K = s.in_channels * 9, O = s.out_channels;
  ConvStageGrads<T> g{FeatureMap<T>(s.in_channels, H, W), std::vector<T>(s.weight.size(), T{}),
                      std::vector<T>(O, T{})};
  std::vector<T> dyt(P * O);
  for (std::size_t o = 0; o < O; ++o) {
    auto dpo = d_pre.channel(o);
    T bsum{};
    for (std::size_t p = 0; p < P; ++p) {
      bsum += dpo[p];
      dyt[p * O + o] = dpo[p];
    }
    g.bias[o] = bsum;
  }
  const auto cols = detail::im2col3x3(c.input);
  std::vector<T> dwt(K * O, T{});
  std::vector<T> dcols(P * K, T{});
  for (std::size_t p = 0; p < P; ++p) {
    const T* dy = dyt.data() + p * O;
    const T* src = cols.data() + p * K;
    for (std::size_t k = 0; k < K; ++k) {
      const T v = src[k];
      if (v == T{}) continue;
      T* dst = dwt.data() + k * O;
      for (std::size_t o = 0; o < O; ++o) dst[o] += v * dy[o];
    }
    T* dcol = dcols.data() + p * K;
    for (std::size_t o = 0; o < O; ++o) {
      const T d = dy[o];
      if (d == T{}) continue;
      const T* wo = s.weight.data() + o * K;
      for (std::size_t k = 0; k < K; ++k) dcol[k] += d * wo[k];
    }
  }
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t k = 0; k < K; ++k) g.weight[o * K + k] = dwt[k * O + o];
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t w = 0; w < W; ++w) {
      const T* row = dcols.data() + (h * W + w) * K;
      for (std::size_t ch = 0; ch < s.in_channels; ++ch)
        for (std::size_t kh = 0; kh < 3; ++kh) {
          if (h + kh < 1 || h + kh > H) continue;
          for (std::size_t kw = 0; kw < 3; ++kw) {
            if (w + kw < 1 || w + kw > W) continue;
            g.input.at(ch, h + kh - 1, w + kw - 1) += row[ch * 9 + kh * 3 + kw];
          }
        }
    }
  return g;
}

}  // namespace kss
