#pragma once

// Small label-graph classifier: backbone stages, a GCN over the label
// graph, lateral connections from GCN layers into backbone stages, and a classifier head
// that scores each label by the dot product of the pooled feature with the
// label's final embedding.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kss/activation.hpp"
#include "kss/backbone.hpp"
#include "kss/error.hpp"
#include "kss/gcn.hpp"
#include "kss/lateral.hpp"
#include "kss/tensor.hpp"

namespace kss {

/// Output widths of the four GCN layers / backbone stages at full scale.
inline constexpr std::size_t kFullChannelSchedule[4] = {256, 512, 1024, 2048};

inline std::vector<std::size_t> scaled_channel_schedule(std::size_t divisor,
                                                        std::size_t stages = 4) {
  detail::require(divisor >= 1, "channel divisor must be >= 1");
  detail::require(stages >= 1 && stages <= 4, "stage count must lie in [1, 4]");
  std::vector<std::size_t> out;
  for (std::size_t s = 4 - stages; s < 4; ++s) {
    detail::require(kFullChannelSchedule[s] % divisor == 0,
                    "channel divisor must divide " + std::to_string(kFullChannelSchedule[s]));
    out.push_back(kFullChannelSchedule[s] / divisor);
  }
  return out;
}

struct ModelConfig {
  std::size_t input_channels = 3;
  std::size_t labels = 8;
  std::size_t embedding_dim = 16;
  /// Output channels per backbone stage; GCN layer l is paired with stage l.
  std::vector<std::size_t> channels = {16, 32, 64, 128};
  Activation backbone_activation = Activation::relu();
  Activation gcn_activation = Activation::leaky_relu(0.2);
  /// Overrides the activation of the last GCN layer (the classifier).
  std::optional<Activation> final_gcn_activation;
  Activation lc_activation = Activation::tanh();
  bool lc_bias = true;
  /// LC g-weights start uniform in ±scale/sqrt(N).
  double lc_init_scale = 0.1;
  double dropout = 0.5;

  void validate() const {
    detail::require(!channels.empty(), "model: at least one stage is required");
    detail::require(labels >= 1 && embedding_dim >= 1 && input_channels >= 1,
                    "model: labels, embedding_dim and input_channels must be >= 1");
    detail::require(dropout >= 0.0 && dropout < 1.0, "model: dropout must lie in [0, 1)");
  }
};

enum class ParamGroup { kGcn, kOther };

template <typename T>
class KssModel {
 public:
  KssModel() = default;

  /// Fresh model with He-initialized backbone and GCN and small random LC
  /// weights. `adjacency` is the normalized label graph.
  static KssModel make(const ModelConfig& cfg, const Matrix<double>& adjacency,
                       std::mt19937_64& rng) {
    cfg.validate();
    detail::require_shape(adjacency.is_square() && adjacency.rows() == cfg.labels,
                          "model: adjacency size differs from label count");
    KssModel m;
    m.dropout_ = cfg.dropout;
    std::size_t in = cfg.input_channels;
    for (auto c : cfg.channels) {
      m.stages_.push_back(ConvStage<T>::make(in, c, cfg.backbone_activation, true, rng));
      in = c;
    }
    m.gcn_ = GcnStack<T>::make(matrix_cast<T>(adjacency), cfg.embedding_dim, cfg.channels,
                               cfg.gcn_activation, rng);
    if (cfg.final_gcn_activation) m.gcn_.layers().back().activation = *cfg.final_gcn_activation;
    m.first_gcn_stage_ = 0;
    m.lcs_.resize(m.stages_.size());
    for (std::size_t s = 0; s + 1 < m.stages_.size(); ++s) {
      auto lc = LcParams<T>::zeros(cfg.channels[s], cfg.labels, cfg.lc_activation);
      lc.use_bias = cfg.lc_bias;
      const double bound = cfg.lc_init_scale / std::sqrt(static_cast<double>(cfg.labels));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : lc.weight.values()) v = static_cast<T>(dist(rng));
      m.lcs_[s] = std::move(lc);
    }
    m.validate();
    return m;
  }

  void validate() const {
    detail::require_shape(!stages_.empty(), "model: no stages");
    detail::require_shape(gcn_.depth() >= 1, "model: no GCN layers");
    detail::require_shape(first_gcn_stage_ + gcn_.depth() == stages_.size(),
                          "model: GCN layers must pair with the trailing stages");
    gcn_.validate();
    for (std::size_t l = 0; l < gcn_.depth(); ++l)
      detail::require_shape(gcn_.layers()[l].out_channels() ==
                                stages_[first_gcn_stage_ + l].out_channels,
                            "model: GCN layer " + std::to_string(l) +
                                " width differs from its paired stage");
    detail::require_shape(lcs_.size() == stages_.size(), "model: LC table size mismatch");
    for (std::size_t s = 0; s < stages_.size(); ++s) {
      if (!lcs_[s]) continue;
      detail::require_shape(s >= first_gcn_stage_ && s + 1 < stages_.size(),
                            "model: LC at stage " + std::to_string(s) + " has no non-final GCN pair");
      detail::require_shape(lcs_[s]->channels() == stages_[s].out_channels &&
                                lcs_[s]->labels() == labels(),
                            "model: LC shape mismatch at stage " + std::to_string(s));
    }
    detail::require(dropout_ >= 0.0 && dropout_ < 1.0, "model: dropout must lie in [0, 1)");
  }

  std::size_t labels() const noexcept { return gcn_.nodes(); }
  std::size_t embedding_dim() const { return gcn_.layers().front().in_channels(); }
  std::size_t lc_count() const {
    return static_cast<std::size_t>(std::count_if(lcs_.begin(), lcs_.end(),
                                                  [](const auto& l) { return l.has_value(); }));
  }
  /// Stage paired with GCN layer 0.
  std::size_t first_gcn_stage() const noexcept { return first_gcn_stage_; }
  double dropout() const noexcept { return dropout_; }
  void set_dropout(double p) {
    detail::require(p >= 0.0 && p < 1.0, "dropout must lie in [0, 1)");
    dropout_ = p;
  }

  std::vector<ConvStage<T>>& stages() noexcept { return stages_; }
  const std::vector<ConvStage<T>>& stages() const noexcept { return stages_; }
  GcnStack<T>& gcn() noexcept { return gcn_; }
  const GcnStack<T>& gcn() const noexcept { return gcn_; }
  std::vector<std::optional<LcParams<T>>>& lcs() noexcept { return lcs_; }
  const std::vector<std::optional<LcParams<T>>>& lcs() const noexcept { return lcs_; }

  /// GCN layer whose output feeds the LC after stage s.
  std::size_t gcn_layer_for_stage(std::size_t s) const { return s - first_gcn_stage_; }

  /// Visits every learnable tensor in a fixed order with its checkpoint
  /// name, values, group and whether it is a bias.
  template <typename F>
  void for_each_parameter(F&& fn) {
    for_each_impl(*this, fn);
  }
  template <typename F>
  void for_each_parameter(F&& fn) const {
    for_each_impl(*this, fn);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_parameter([&](const std::string&, std::span<const T> v, ParamGroup, bool) { n += v.size(); });
    return n;
  }

  std::vector<T> flatten() const {
    std::vector<T> out;
    for_each_parameter([&](const std::string&, std::span<const T> v, ParamGroup, bool) {
      out.insert(out.end(), v.begin(), v.end());
    });
    return out;
  }

  void unflatten(std::span<const T> flat) {
    detail::require_shape(flat.size() == parameter_count(), "unflatten: parameter count mismatch");
    std::size_t off = 0;
    for_each_parameter([&](const std::string&, std::span<T> v, ParamGroup, bool) {
      std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                flat.begin() + static_cast<std::ptrdiff_t>(off + v.size()), v.begin());
      off += v.size();
    });
  }

  /// Same architecture with every parameter set to zero; used as a gradient
  /// accumulator.
  KssModel zeros_like() const {
    KssModel z = *this;
    z.for_each_parameter([](const std::string&, std::span<T> v, ParamGroup, bool) {
      std::fill(v.begin(), v.end(), T{});
    });
    return z;
  }

  /// Removes the leading GCN layers (and the LCs paired with them) so that
  /// `depth` layers remain; the new first layer is re-initialized to read
  /// the initial embeddings directly.
  KssModel depth_variant(std::size_t depth, std::mt19937_64& rng) const {
    detail::require(depth >= 2, "depth variant: at least 2 GCN layers are required");
    detail::require(depth <= gcn_.depth(), "depth variant: cannot exceed the current depth " +
                                               std::to_string(gcn_.depth()));
    if (depth == gcn_.depth()) return *this;
    const std::size_t drop = gcn_.depth() - depth;
    KssModel v = *this;
    auto& layers = v.gcn_.layers();
    const std::size_t f = layers.front().in_channels();
    layers.erase(layers.begin(), layers.begin() + static_cast<std::ptrdiff_t>(drop));
    layers.front().weight = he_normal<T>(f, layers.front().out_channels(), rng);
    v.first_gcn_stage_ += drop;
    for (std::size_t s = 0; s < v.first_gcn_stage_; ++s) v.lcs_[s].reset();
    v.validate();
    return v;
  }

 private:
  template <typename Self, typename F>
  static void for_each_impl(Self& self, F& fn) {
    for (std::size_t s = 0; s < self.stages_.size(); ++s) {
      auto& st = self.stages_[s];
      const std::string p = "backbone.stage" + std::to_string(s) + ".conv.";
      fn(p + "weight", std::span(st.weight), ParamGroup::kOther, false);
      fn(p + "bias", std::span(st.bias), ParamGroup::kOther, true);
    }
    for (std::size_t l = 0; l < self.gcn_.layers().size(); ++l)
      fn("gcn.layer" + std::to_string(l) + ".W", self.gcn_.layers()[l].weight.values(),
         ParamGroup::kGcn, false);
    for (std::size_t s = 0; s < self.lcs_.size(); ++s) {
      if (!self.lcs_[s]) continue;
      const std::string p = "lc." + std::to_string(s) + ".g.";
      fn(p + "weight", self.lcs_[s]->weight.values(), ParamGroup::kOther, false);
      if (self.lcs_[s]->use_bias) fn(p + "bias", std::span(self.lcs_[s]->bias), ParamGroup::kOther, true);
    }
  }

  std::vector<ConvStage<T>> stages_;
  GcnStack<T> gcn_;
  std::vector<std::optional<LcParams<T>>> lcs_;
  std::size_t first_gcn_stage_ = 0;
  double dropout_ = 0.5;
};

/// Shape of every parameter tensor, keyed like for_each_parameter.
template <typename T>
std::vector<std::size_t> parameter_shape(const KssModel<T>& m, const std::string& name) {
  for (std::size_t s = 0; s < m.stages().size(); ++s) {
    const auto& st = m.stages()[s];
    const std::string p = "backbone.stage" + std::to_string(s) + ".conv.";
    if (name == p + "weight") return {st.out_channels, st.in_channels, 3, 3};
    if (name == p + "bias") return {st.out_channels};
  }
  for (std::size_t l = 0; l < m.gcn().layers().size(); ++l)
    if (name == "gcn.layer" + std::to_string(l) + ".W")
      return {m.gcn().layers()[l].in_channels(), m.gcn().layers()[l].out_channels()};
  for (std::size_t s = 0; s < m.lcs().size(); ++s) {
    if (!m.lcs()[s]) continue;
    const std::string p = "lc." + std::to_string(s) + ".g.";
    if (name == p + "weight") return {m.lcs()[s]->channels(), m.lcs()[s]->labels()};
    if (name == p + "bias") return {m.lcs()[s]->channels()};
  }
  throw ValidationError("unknown parameter '" + name + "'");
}

struct ForwardOptions {
  bool use_lc = true;
  /// Dropout is applied only when an RNG is supplied.
  std::mt19937_64* dropout_rng = nullptr;
};

/// Logits (batch × N). The GCN runs once per call.
template <typename T>
Matrix<T> model_forward(const KssModel<T>& model, const std::vector<FeatureMap<T>>& batch,
                        const Matrix<T>& e0, const ForwardOptions& opt = {}) {
  detail::require_shape(e0.rows() == model.labels() && e0.cols() == model.embedding_dim(),
                        "model_forward: initial embeddings must be " +
                            std::to_string(model.labels()) + "x" +
                            std::to_string(model.embedding_dim()));
  const auto emb = model.gcn().forward(e0);
  const auto& cls = emb.back();
  Matrix<T> logits(batch.size(), model.labels());
  std::bernoulli_distribution keep(1.0 - model.dropout());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    FeatureMap<T> x = batch[b];
    for (std::size_t s = 0; s < model.stages().size(); ++s) {
      x = stage_forward(x, model.stages()[s]);
      if (opt.use_lc && model.lcs()[s])
        x = lc_forward(x, emb[model.gcn_layer_for_stage(s)], *model.lcs()[s]);
    }
    std::vector<T> f(x.channels(), T{});
    for (std::size_t c = 0; c < x.channels(); ++c) {
      T acc{};
      for (auto v : x.channel(c)) acc += v;
      f[c] = acc / static_cast<T>(x.positions());
    }
    if (opt.dropout_rng && model.dropout() > 0.0) {
      const T scale = T{1} / static_cast<T>(1.0 - model.dropout());
      for (auto& v : f) v = keep(*opt.dropout_rng) ? v * scale : T{0};
    }
    for (std::size_t n = 0; n < model.labels(); ++n) {
      T acc{};
      for (std::size_t c = 0; c < f.size(); ++c) acc += f[c] * cls(n, c);
      logits(b, n) = acc;
    }
  }
  return logits;
}

/// Mean sigmoid binary cross-entropy, log-sum-exp stable.
template <typename T>
T bce_loss(const Matrix<T>& logits, const Matrix<int>& targets) {
  detail::require_shape(logits.rows() == targets.rows() && logits.cols() == targets.cols(),
                        "bce_loss: logits and targets differ in shape");
  T sum{};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const int t = targets.values()[i];
    detail::require(t == 0 || t == 1, "bce_loss: targets must be 0 or 1");
    const T z = logits.values()[i];
    sum += std::max(z, T{0}) - z * static_cast<T>(t) + std::log1p(std::exp(-std::abs(z)));
  }
  return logits.size() == 0 ? T{0} : sum / static_cast<T>(logits.size());
}

/// dL/dlogits of bce_loss.
template <typename T>
Matrix<T> bce_gradient(const Matrix<T>& logits, const Matrix<int>& targets) {
  Matrix<T> g(logits.rows(), logits.cols());
  const T inv = T{1} / static_cast<T>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const T z = logits.values()[i];
    const T p = z >= T{0} ? T{1} / (T{1} + std::exp(-z)) : std::exp(z) / (T{1} + std::exp(z));
    g.values()[i] = (p - static_cast<T>(targets.values()[i])) * inv;
  }
  return g;
}

/// Loss and full parameter gradient for one batch. Gradients are returned
/// in a zero-initialized model of the same architecture.
template <typename T>
std::pair<T, KssModel<T>> model_loss_and_grad(const KssModel<T>& model,
                                              const std::vector<FeatureMap<T>>& batch,
                                              const Matrix<int>& targets, const Matrix<T>& e0,
                                              const ForwardOptions& opt = {}) {
  detail::require_shape(targets.rows() == batch.size() && targets.cols() == model.labels(),
                        "model_loss_and_grad: targets shape mismatch");
  detail::require_shape(e0.rows() == model.labels() && e0.cols() == model.embedding_dim(),
                        "model_loss_and_grad: initial embeddings shape mismatch");
  const auto& stages = model.stages();
  const std::size_t S = stages.size(), N = model.labels();
  const auto gcn_caches = model.gcn().forward_cached(e0);
  const auto& cls = gcn_caches.back().output;

  KssModel<T> grads = model.zeros_like();
  std::vector<Matrix<T>> d_emb(model.gcn().depth());
  for (std::size_t l = 0; l < d_emb.size(); ++l)
    d_emb[l] = Matrix<T>(gcn_caches[l].output.rows(), gcn_caches[l].output.cols());

  std::bernoulli_distribution keep(1.0 - model.dropout());
  const bool drop = opt.dropout_rng && model.dropout() > 0.0;
  const T drop_scale = drop ? T{1} / static_cast<T>(1.0 - model.dropout()) : T{1};

  Matrix<T> logits(batch.size(), N);
  struct SampleTrace {
    std::vector<ConvStageCache<T>> stages;
    std::vector<FeatureMap<T>> lc_inputs;
    std::vector<T> pooled;
    std::vector<T> mask;
    std::size_t positions = 1;
  };
  std::vector<SampleTrace> traces(batch.size());

  for (std::size_t b = 0; b < batch.size(); ++b) {
    auto& tr = traces[b];
    tr.lc_inputs.resize(S);
    FeatureMap<T> x = batch[b];
    for (std::size_t s = 0; s < S; ++s) {
      tr.stages.push_back(stage_forward_cached(x, stages[s]));
      x = tr.stages.back().output;
      if (opt.use_lc && model.lcs()[s]) {
        tr.lc_inputs[s] = x;
        x = lc_forward(x, gcn_caches[model.gcn_layer_for_stage(s)].output, *model.lcs()[s]);
      }
    }
    tr.positions = x.positions();
    tr.pooled.assign(x.channels(), T{});
    tr.mask.assign(x.channels(), T{1});
    for (std::size_t c = 0; c < x.channels(); ++c) {
      T acc{};
      for (auto v : x.channel(c)) acc += v;
      tr.pooled[c] = acc / static_cast<T>(x.positions());
      if (drop) tr.mask[c] = keep(*opt.dropout_rng) ? drop_scale : T{0};
    }
    for (std::size_t n = 0; n < N; ++n) {
      T acc{};
      for (std::size_t c = 0; c < tr.pooled.size(); ++c) acc += tr.pooled[c] * tr.mask[c] * cls(n, c);
      logits(b, n) = acc;
    }
  }

  const T loss = bce_loss(logits, targets);
  const Matrix<T> d_logits = bce_gradient(logits, targets);

  for (std::size_t b = 0; b < batch.size(); ++b) {
    auto& tr = traces[b];
    const std::size_t C = tr.pooled.size();
    std::vector<T> d_pooled(C, T{});
    auto& d_cls = d_emb.back();
    for (std::size_t n = 0; n < N; ++n) {
      const T dz = d_logits(b, n);
      for (std::size_t c = 0; c < C; ++c) {
        d_cls(n, c) += dz * tr.pooled[c] * tr.mask[c];
        d_pooled[c] += dz * cls(n, c);
      }
    }
    const auto& last = tr.stages.back().output;
    FeatureMap<T> dx(last.channels(), last.height(), last.width());
    for (std::size_t c = 0; c < C; ++c) {
      const T v = d_pooled[c] * tr.mask[c] / static_cast<T>(tr.positions);
      for (auto& d : dx.channel(c)) d = v;
    }
    for (std::size_t s = S; s-- > 0;) {
      if (opt.use_lc && model.lcs()[s]) {
        const std::size_t l = model.gcn_layer_for_stage(s);
        auto g = lc_backward(tr.lc_inputs[s], gcn_caches[l].output, *model.lcs()[s], dx);
        auto& lg = *grads.lcs()[s];
        for (std::size_t i = 0; i < g.weight.size(); ++i) lg.weight.values()[i] += g.weight.values()[i];
        for (std::size_t i = 0; i < g.bias.size(); ++i) lg.bias[i] += g.bias[i];
        for (std::size_t i = 0; i < g.embedding.size(); ++i)
          d_emb[l].values()[i] += g.embedding.values()[i];
        dx = std::move(g.input);
      }
      auto g = stage_backward(tr.stages[s], stages[s], dx);
      auto& sg = grads.stages()[s];
      for (std::size_t i = 0; i < g.weight.size(); ++i) sg.weight[i] += g.weight[i];
      for (std::size_t i = 0; i < g.bias.size(); ++i) sg.bias[i] += g.bias[i];
      dx = std::move(g.input);
    }
  }

  auto [d_w, d_e0] = model.gcn().backward(gcn_caches, d_emb);
  for (std::size_t l = 0; l < d_w.size(); ++l) grads.gcn().layers()[l].weight = std::move(d_w[l]);
  return {loss, std::move(grads)};
}

struct AdamConfig {
  double lr_gcn = 1e-3;
  double lr_other = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Decoupled weight decay; never applied to biases.
  double weight_decay = 1e-4;
};

/// Adaptive-moment optimizer over the parameters of a KssModel, with
/// separate learning rates for the GCN and everything else.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(KssModel<T>& model, const KssModel<T>& grads) {
    std::vector<std::span<const T>> gs;
    grads.for_each_parameter(
        [&](const std::string&, std::span<const T> g, ParamGroup, bool) { gs.push_back(g); });
    if (m_.empty()) {
      for (auto g : gs) {
        m_.emplace_back(g.size(), 0.0);
        v_.emplace_back(g.size(), 0.0);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::size_t k = 0;
    model.for_each_parameter([&](const std::string& name, std::span<T> p, ParamGroup group,
                                 bool is_bias) {
      detail::require_shape(k < gs.size() && gs[k].size() == p.size(),
                            "adam: gradient layout differs at " + name);
      const double lr = group == ParamGroup::kGcn ? cfg_.lr_gcn : cfg_.lr_other;
      auto& m = m_[k];
      auto& v = v_[k];
      const auto g = gs[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
        double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
        if (!is_bias) update += cfg_.weight_decay * static_cast<double>(p[i]);
        p[i] = static_cast<T>(static_cast<double>(p[i]) - lr * update);
      }
      ++k;
    });
  }

  std::size_t steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace kss
