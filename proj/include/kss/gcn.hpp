#pragma once

// Stacked graph convolutions E^(l+1) = σ(A' E^(l) W^(l)) over a fixed label
// graph, with reverse-mode gradients and a central-difference checker.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kss/activation.hpp"
#include "kss/error.hpp"
#include "kss/tensor.hpp"

namespace kss {

template <typename To, typename From>
Matrix<To> matrix_cast(const Matrix<From>& m) {
  Matrix<To> out(m.rows(), m.cols());
  std::transform(m.values().begin(), m.values().end(), out.values().begin(),
                 [](From v) { return static_cast<To>(v); });
  return out;
}

/// Zero-mean Gaussian with variance 2 / fan_in.
template <typename T>
Matrix<T> he_normal(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  Matrix<T> w(fan_in, fan_out);
  for (auto& v : w.values()) v = static_cast<T>(dist(rng));
  return w;
}

template <typename T>
struct GcnLayer {
  Matrix<T> weight;  // C_in × C_out
  Activation activation = Activation::leaky_relu(0.2);

  std::size_t in_channels() const noexcept { return weight.rows(); }
  std::size_t out_channels() const noexcept { return weight.cols(); }
};

/// Intermediates of one layer kept for the backward pass.
template <typename T>
struct GcnLayerCache {
  Matrix<T> input;       // E^(l)
  Matrix<T> propagated;  // A' E^(l)
  Matrix<T> pre;         // A' E^(l) W
  Matrix<T> output;      // σ(pre)
};

template <typename T>
struct GcnLayerGrads {
  Matrix<T> input;   // dL/dE^(l)
  Matrix<T> weight;  // dL/dW^(l)
};

template <typename T>
GcnLayerCache<T> gcn_layer_forward_cached(const Matrix<T>& adj, const Matrix<T>& e,
                                          const GcnLayer<T>& layer) {
  detail::require_shape(adj.is_square() && adj.rows() == e.rows(),
                        "gcn layer: adjacency is " + std::to_string(adj.rows()) + "x" +
                            std::to_string(adj.cols()) + " but embeddings have " +
                            std::to_string(e.rows()) + " rows");
  detail::require_shape(e.cols() == layer.in_channels(),
                        "gcn layer: embedding width " + std::to_string(e.cols()) +
                            " does not match weight input width " +
                            std::to_string(layer.in_channels()));
  GcnLayerCache<T> c;
  c.input = e;
  c.propagated = matmul(adj, e);
  c.pre = matmul(c.propagated, layer.weight);
  c.output = c.pre;
  for (auto& v : c.output.values()) v = layer.activation(v);
  return c;
}

/// σ(A' E W). No bias term.
template <typename T>
Matrix<T> gcn_layer_forward(const Matrix<T>& adj, const Matrix<T>& e, const GcnLayer<T>& layer) {
  return gcn_layer_forward_cached(adj, e, layer).output;
}

template <typename T>
GcnLayerGrads<T> gcn_layer_backward(const Matrix<T>& adj, const GcnLayerCache<T>& cache,
                                    const GcnLayer<T>& layer, const Matrix<T>& d_output) {
  detail::require_shape(d_output.rows() == cache.output.rows() &&
                            d_output.cols() == cache.output.cols(),
                        "gcn layer backward: upstream gradient shape mismatch");
  Matrix<T> d_pre = d_output;
  auto dp = d_pre.values();
  auto pre = cache.pre.values();
  auto out = cache.output.values();
  for (std::size_t i = 0; i < dp.size(); ++i) dp[i] *= layer.activation.derivative(pre[i], out[i]);
  GcnLayerGrads<T> g;
  g.weight = matmul_tn(cache.propagated, d_pre);
  // dL/d(A'E) = d_pre Wᵀ, then dL/dE = A'ᵀ (d_pre Wᵀ)
  g.input = matmul_tn(adj, matmul_nt(d_pre, layer.weight));
  return g;
}

template <typename T>
class GcnStack {
 public:
  GcnStack() = default;
  GcnStack(Matrix<T> adjacency, std::vector<GcnLayer<T>> layers)
      : adjacency_(std::move(adjacency)), layers_(std::move(layers)) {
    validate();
  }

  /// Layers with the given channel schedule, He-initialized.
  static GcnStack make(Matrix<T> adjacency, std::size_t input_channels,
                       const std::vector<std::size_t>& channels, Activation activation,
                       std::mt19937_64& rng) {
    std::vector<GcnLayer<T>> layers;
    std::size_t in = input_channels;
    for (auto c : channels) {
      layers.push_back({he_normal<T>(in, c, rng), activation});
      in = c;
    }
    return GcnStack(std::move(adjacency), std::move(layers));
  }

  void validate() const {
    detail::require_shape(adjacency_.is_square(), "gcn stack: adjacency is not square");
    for (std::size_t l = 1; l < layers_.size(); ++l)
      detail::require_shape(layers_[l].in_channels() == layers_[l - 1].out_channels(),
                            "gcn stack: layer " + std::to_string(l) + " expects " +
                                std::to_string(layers_[l].in_channels()) +
                                " input channels but previous layer produces " +
                                std::to_string(layers_[l - 1].out_channels()));
  }

  std::size_t depth() const noexcept { return layers_.size(); }
  std::size_t nodes() const noexcept { return adjacency_.rows(); }
  const Matrix<T>& adjacency() const noexcept { return adjacency_; }
  void set_adjacency(Matrix<T> a) {
    detail::require_shape(a.is_square() && (layers_.empty() || a.rows() == adjacency_.rows() ||
                                            adjacency_.empty()),
                          "gcn stack: replacement adjacency has a different size");
    adjacency_ = std::move(a);
  }
  std::vector<GcnLayer<T>>& layers() noexcept { return layers_; }
  const std::vector<GcnLayer<T>>& layers() const noexcept { return layers_; }

  /// E^(1) .. E^(L); empty for a stack without layers.
  std::vector<Matrix<T>> forward(const Matrix<T>& e0) const {
    std::vector<Matrix<T>> outs;
    const Matrix<T>* cur = &e0;
    for (const auto& layer : layers_) {
      outs.push_back(gcn_layer_forward(adjacency_, *cur, layer));
      cur = &outs.back();
    }
    return outs;
  }

  std::vector<GcnLayerCache<T>> forward_cached(const Matrix<T>& e0) const {
    std::vector<GcnLayerCache<T>> caches;
    caches.reserve(layers_.size());
    for (const auto& layer : layers_)
      caches.push_back(gcn_layer_forward_cached(adjacency_,
                                                caches.empty() ? e0 : caches.back().output, layer));
    return caches;
  }

  /// `d_outputs[l]` is dL/dE^(l+1) from consumers outside the stack (LC
  /// connections, the classifier head); an empty matrix means no direct
  /// consumer. Returns dL/dW per layer and dL/dE^(0) as the last element.
  std::pair<std::vector<Matrix<T>>, Matrix<T>> backward(
      const std::vector<GcnLayerCache<T>>& caches, const std::vector<Matrix<T>>& d_outputs) const {
    detail::require_shape(caches.size() == layers_.size() && d_outputs.size() == layers_.size(),
                          "gcn stack backward: cache/gradient count mismatch");
    std::vector<Matrix<T>> d_weights(layers_.size());
    Matrix<T> carry;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const auto& out = caches[l].output;
      Matrix<T> d_out(out.rows(), out.cols());
      if (!d_outputs[l].empty()) d_out = d_outputs[l];
      if (!carry.empty()) {
        auto dst = d_out.values();
        auto src = carry.values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
      auto g = gcn_layer_backward(adjacency_, caches[l], layers_[l], d_out);
      d_weights[l] = std::move(g.weight);
      carry = std::move(g.input);
    }
    return {std::move(d_weights), std::move(carry)};
  }

 private:
  Matrix<T> adjacency_;
  std::vector<GcnLayer<T>> layers_;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
};

/// Compares an analytic gradient against central differences of `value` at
/// `params`. The per-coordinate error is |g_ad − g_fd| / max(1, |g_ad|, |g_fd|).
template <typename ValueFn>
GradCheckResult grad_check(ValueFn&& value, std::vector<double> params,
                           std::span<const double> analytic, double step) {
  detail::require_shape(params.size() == analytic.size(),
                        "grad_check: gradient and parameter counts differ");
  if (!all_finite<double>(analytic)) throw NumericError("grad_check: non-finite analytic gradient");
  GradCheckResult res;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = value(std::span<const double>(params));
    params[i] = saved - step;
    const double down = value(std::span<const double>(params));
    params[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("grad_check: non-finite value at coordinate " + std::to_string(i));
    const double fd = (up - down) / (2.0 * step);
    const double ad = analytic[i];
    const double err =
        std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
    if (err > res.max_relative_error) {
      res.max_relative_error = err;
      res.worst_index = i;
    }
  }
  return res;
}

/// Same as above with the gradient supplied as a callable.
template <typename ValueFn, typename GradFn>
  requires std::invocable<GradFn&, std::span<const double>>
GradCheckResult grad_check(ValueFn&& value, GradFn&& gradient, std::vector<double> params,
                           double step) {
  const std::vector<double> analytic = gradient(std::span<const double>(params));
  return grad_check(std::forward<ValueFn>(value), std::move(params), analytic, step);
}

}  // namespace kss
