#pragma once

// Seeded finite-difference checks of every hand-written backward pass.
// Used by `kss gradcheck`.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "kss/gcn.hpp"
#include "kss/graph.hpp"
#include "kss/lateral.hpp"
#include "kss/model.hpp"

namespace kss {

struct GradcheckConfig {
  std::size_t trials = 20;
  double step = 1e-6;
  double tolerance = 1e-5;
  double model_tolerance = 1e-4;
  /// Negative control: perturbs the analytic gradients before comparison.
  bool corrupt_backward = false;
};

struct GradcheckReport {
  double gcn_layer = 0.0;
  double lc_2d = 0.0;
  double lc_3d = 0.0;
  double full_model = 0.0;

  bool passed(const GradcheckConfig& cfg) const {
    return gcn_layer <= cfg.tolerance && lc_2d <= cfg.tolerance && lc_3d <= cfg.tolerance &&
           full_model <= cfg.model_tolerance;
  }
};

namespace detail {

inline Matrix<double> random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng,
                                    double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix<double> m(r, c);
  for (auto& v : m.values()) v = u(rng);
  return m;
}

inline void corrupt(std::vector<double>& g) {
  if (!g.empty()) g[g.size() / 2] = 2.0 * g[g.size() / 2] + 1.0;
}

/// Random symmetric nonnegative graph with self loops, normalized.
inline Matrix<double> random_normalized_graph(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix<double> a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) a(i, j) = a(j, i) = u(rng) < 0.5 || i == j ? u(rng) + 0.1 : 0.0;
  return normalize(a);
}

template <typename T>
void append(std::vector<double>& out, std::span<const T> v) {
  out.insert(out.end(), v.begin(), v.end());
}

}  // namespace detail

/// Loss Σ R∘σ(A'EW) differentiated with respect to W and E.
inline double gradcheck_gcn_layer(std::mt19937_64& rng, const GradcheckConfig& cfg) {
  std::uniform_int_distribution<std::size_t> dim(2, 5);
  const std::size_t n = dim(rng) + 2, cin = dim(rng), cout = dim(rng);
  const auto adj = detail::random_normalized_graph(n, rng);
  const auto e = detail::random_matrix(n, cin, rng);
  const GcnLayer<double> layer{detail::random_matrix(cin, cout, rng), Activation::leaky_relu(0.2)};
  const auto r = detail::random_matrix(n, cout, rng);

  auto loss = [&](std::span<const double> p) {
    GcnLayer<double> l{Matrix<double>(cin, cout, std::vector<double>(p.begin(), p.begin() + cin * cout)),
                       layer.activation};
    Matrix<double> ee(n, cin, std::vector<double>(p.begin() + cin * cout, p.end()));
    const auto out = gcn_layer_forward(adj, ee, l);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += r.values()[i] * out.values()[i];
    return s;
  };
  std::vector<double> params;
  detail::append<double>(params, layer.weight.values());
  detail::append<double>(params, e.values());

  const auto cache = gcn_layer_forward_cached(adj, e, layer);
  const auto g = gcn_layer_backward(adj, cache, layer, r);
  std::vector<double> analytic;
  detail::append<double>(analytic, g.weight.values());
  detail::append<double>(analytic, g.input.values());
  if (cfg.corrupt_backward) detail::corrupt(analytic);
  return grad_check(loss, params, analytic, cfg.step).max_relative_error;
}

/// Loss Σ R∘LC(x, E) differentiated with respect to x, E, the g weights and bias.
inline double gradcheck_lc(std::mt19937_64& rng, bool temporal, const GradcheckConfig& cfg) {
  std::uniform_int_distribution<std::size_t> dim(1, 3);
  const std::size_t c = dim(rng) + 1, n = dim(rng) + 1, t = temporal ? dim(rng) + 1 : 1;
  const std::size_t h = dim(rng) + 1, w = dim(rng) + 1;
  FeatureMap<double> x = temporal ? FeatureMap<double>(c, t, h, w) : FeatureMap<double>(c, h, w);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : x.values()) v = u(rng);
  const auto e = detail::random_matrix(n, c, rng);
  auto params0 = LcParams<double>::random(c, n, rng);
  for (auto& b : params0.bias) b = u(rng);
  FeatureMap<double> r = x;
  for (auto& v : r.values()) v = u(rng);

  const std::size_t nx = x.size(), ne = e.size(), nw = params0.weight.size();
  auto unpack = [&](std::span<const double> p, FeatureMap<double>& xx, Matrix<double>& ee,
                    LcParams<double>& pp) {
    std::copy(p.begin(), p.begin() + nx, xx.values().begin());
    std::copy(p.begin() + nx, p.begin() + nx + ne, ee.values().begin());
    std::copy(p.begin() + nx + ne, p.begin() + nx + ne + nw, pp.weight.values().begin());
    std::copy(p.begin() + nx + ne + nw, p.end(), pp.bias.begin());
  };
  auto loss = [&](std::span<const double> p) {
    FeatureMap<double> xx = x;
    Matrix<double> ee = e;
    LcParams<double> pp = params0;
    unpack(p, xx, ee, pp);
    const auto y = lc_forward(xx, ee, pp);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r.values()[i] * y.values()[i];
    return s;
  };
  std::vector<double> params;
  detail::append<double>(params, x.values());
  detail::append<double>(params, e.values());
  detail::append<double>(params, params0.weight.values());
  detail::append<double>(params, std::span<const double>(params0.bias));

  const auto g = lc_backward(x, e, params0, r);
  std::vector<double> analytic;
  detail::append<double>(analytic, g.input.values());
  detail::append<double>(analytic, g.embedding.values());
  detail::append<double>(analytic, g.weight.values());
  detail::append<double>(analytic, std::span<const double>(g.bias));
  if (cfg.corrupt_backward) detail::corrupt(analytic);
  return grad_check(loss, params, analytic, cfg.step).max_relative_error;
}

/// Tiny model (2 stages, 4 labels, 8×8 inputs): BCE loss with respect to
/// every parameter.
inline double gradcheck_full_model(std::mt19937_64& rng, const GradcheckConfig& cfg) {
  ModelConfig mc;
  mc.labels = 4;
  mc.embedding_dim = 3;
  mc.channels = {3, 4};
  mc.lc_init_scale = 1.0;
  mc.dropout = 0.0;
  auto adj = detail::random_normalized_graph(mc.labels, rng);
  auto model = KssModel<double>::make(mc, adj, rng);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& lc : model.lcs())
    if (lc)
      for (auto& b : lc->bias) b = 0.1 * u(rng);
  for (auto& st : model.stages())
    for (auto& b : st.bias) b = 0.1 * u(rng);
  const auto e0 = detail::random_matrix(mc.labels, mc.embedding_dim, rng);
  std::vector<FeatureMap<double>> batch;
  Matrix<int> targets(2, mc.labels);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t b = 0; b < 2; ++b) {
    FeatureMap<double> x(3, 8, 8);
    for (auto& v : x.values()) v = u(rng);
    batch.push_back(std::move(x));
    for (std::size_t n = 0; n < mc.labels; ++n) targets(b, n) = coin(rng) ? 1 : 0;
  }
  auto loss = [&](std::span<const double> p) {
    KssModel<double> m = model;
    m.unflatten(p);
    return bce_loss(model_forward(m, batch, e0), targets);
  };
  const auto [l, grads] = model_loss_and_grad(model, batch, targets, e0);
  auto analytic = grads.flatten();
  if (cfg.corrupt_backward) detail::corrupt(analytic);
  return grad_check(loss, model.flatten(), analytic, cfg.step).max_relative_error;
}

/// Worst error per component over `cfg.trials` trials drawn from `seed`.
inline GradcheckReport run_gradchecks(std::uint64_t seed, const GradcheckConfig& cfg) {
  GradcheckReport rep;
  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    rep.gcn_layer = std::max(rep.gcn_layer, gradcheck_gcn_layer(rng, cfg));
    rep.lc_2d = std::max(rep.lc_2d, gradcheck_lc(rng, false, cfg));
    rep.lc_3d = std::max(rep.lc_3d, gradcheck_lc(rng, true, cfg));
    rep.full_model = std::max(rep.full_model, gradcheck_full_model(rng, cfg));
  }
  return rep;
}

}  // namespace kss
