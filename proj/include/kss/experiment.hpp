#pragma once

// End-to-end toy experiment: synthetic data → KS graph → model → training.
// Shared by the command-line tool and the acceptance suite.

#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kss/config.hpp"
#include "kss/graph.hpp"
#include "kss/ingest.hpp"
#include "kss/model.hpp"
#include "kss/synthetic.hpp"
#include "kss/train.hpp"

namespace kss {

enum class GraphKind { kKs, kIdentity };

struct ToyExperimentConfig {
  std::uint64_t seed = 1;
  SyntheticConfig data;
  std::size_t validation_samples = 500;
  GraphPipelineConfig graph;
  GraphKind graph_kind = GraphKind::kKs;
  ModelConfig model;
  std::size_t channel_divisor = 64;
  std::size_t stages = 4;
  std::size_t gcn_depth = 4;
  double leaky_slope = 0.2;
  TrainConfig train;

  ToyExperimentConfig() {
    train.adam.lr_gcn = 3e-3;
    train.adam.lr_other = 1e-2;
    model.final_gcn_activation = Activation::identity();
    model.dropout = 0.1;
    data.seed = default_data_seed(seed);
    sync();
  }

  static std::uint64_t default_data_seed(std::uint64_t seed) { return seed * 7919 + 17; }

  void set_seed(std::uint64_t s) {
    seed = s;
    data.seed = default_data_seed(s);
    train.seed = s;
  }

  /// Derives dependent fields (channel schedule, label count, seeds).
  void sync() {
    model.channels = scaled_channel_schedule(channel_divisor, stages);
    model.labels = data.labels();
    model.embedding_dim = data.embedding_dim;
    train.seed = seed;
  }

  void validate() const {
    data.validate();
    graph.validate();
    model.validate();
    train.validate();
    detail::require(gcn_depth >= 2 && gcn_depth <= stages,
                    "gcn_depth must lie in [2, stages]");
  }

  /// "16,32,64,128"
  static std::string channel_list(const std::vector<std::size_t>& channels) {
    std::string out;
    for (auto c : channels) out += (out.empty() ? "" : ",") + std::to_string(c);
    return out;
  }

  static const std::set<std::string>& keys() {
    static const std::set<std::string> k = {
        "seed", "data_seed", "samples", "validation_samples", "pairs", "image_size", "p_anchor",
        "p_partner_given_anchor", "p_partner_given_absent", "anchor_contrast",
        "partner_contrast", "noise", "embedding_dim", "lambda", "tau", "eta",
        "binarize_threshold", "normalization", "graph", "channel_divisor", "stages",
        "gcn_depth", "backbone_activation", "gcn_activation", "final_gcn_activation",
        "leaky_slope", "lc_activation", "lc_bias", "lc_init_scale", "dropout", "epochs",
        "batch_size", "lr_gcn", "lr_other", "beta1", "beta2", "epsilon", "weight_decay",
        "use_lc", "eval_every", "channels"};
    return k;
  }

  static ToyExperimentConfig from_kv(const KeyValueConfig& kv) {
    kv.check_keys(keys());
    ToyExperimentConfig c;
    if (auto v = kv.get_int<std::uint64_t>("seed")) c.seed = *v;
    c.data.seed = kv.get_int<std::uint64_t>("data_seed").value_or(default_data_seed(c.seed));
    if (auto v = kv.get_int("samples")) c.data.samples = *v;
    if (auto v = kv.get_int("validation_samples")) c.validation_samples = *v;
    if (auto v = kv.get_int("pairs")) c.data.pairs = *v;
    if (auto v = kv.get_int("image_size")) c.data.height = c.data.width = *v;
    if (auto v = kv.get_double("p_anchor")) c.data.p_anchor = *v;
    if (auto v = kv.get_double("p_partner_given_anchor")) c.data.p_partner_given_anchor = *v;
    if (auto v = kv.get_double("p_partner_given_absent")) c.data.p_partner_given_absent = *v;
    if (auto v = kv.get_double("anchor_contrast")) c.data.anchor_contrast = *v;
    if (auto v = kv.get_double("partner_contrast")) c.data.partner_contrast = *v;
    if (auto v = kv.get_double("noise")) c.data.noise = *v;
    if (auto v = kv.get_int("embedding_dim")) c.data.embedding_dim = *v;
    if (auto v = kv.get_double("lambda")) c.graph.lambda = *v;
    if (auto v = kv.get_double("tau")) c.graph.tau = *v;
    if (auto v = kv.get_double("eta")) c.graph.eta = *v;
    if (auto v = kv.get_double("binarize_threshold")) c.graph.binarize_threshold = *v;
    if (auto v = kv.get_string("normalization")) {
      if (*v == "after_identity_mix")
        c.graph.placement = NormalizationPlacement::kAfterIdentityMix;
      else if (*v == "after_superimpose")
        c.graph.placement = NormalizationPlacement::kAfterSuperimpose;
      else
        throw ValidationError("config: normalization must be after_identity_mix or after_superimpose");
    }
    if (auto v = kv.get_string("graph")) {
      if (*v == "ks")
        c.graph_kind = GraphKind::kKs;
      else if (*v == "identity")
        c.graph_kind = GraphKind::kIdentity;
      else
        throw ValidationError("config: graph must be ks or identity");
    }
    if (auto v = kv.get_int("channel_divisor")) c.channel_divisor = *v;
    if (auto v = kv.get_int("stages")) c.stages = *v;
    c.gcn_depth = kv.get_int("gcn_depth").value_or(c.stages);
    const double slope = c.leaky_slope = kv.get_double("leaky_slope").value_or(0.2);
    if (auto v = kv.get_string("backbone_activation")) c.model.backbone_activation = parse_activation(*v, slope);
    c.model.gcn_activation = parse_activation(kv.get_string("gcn_activation").value_or("leaky_relu"), slope);
    if (auto v = kv.get_string("final_gcn_activation")) c.model.final_gcn_activation = parse_activation(*v, slope);
    if (auto v = kv.get_string("lc_activation")) c.model.lc_activation = parse_activation(*v, slope);
    if (auto v = kv.get_bool("lc_bias")) c.model.lc_bias = *v;
    if (auto v = kv.get_double("lc_init_scale")) c.model.lc_init_scale = *v;
    if (auto v = kv.get_double("dropout")) c.model.dropout = *v;
    if (auto v = kv.get_int("epochs")) c.train.epochs = *v;
    if (auto v = kv.get_int("batch_size")) c.train.batch_size = *v;
    if (auto v = kv.get_double("lr_gcn")) c.train.adam.lr_gcn = *v;
    if (auto v = kv.get_double("lr_other")) c.train.adam.lr_other = *v;
    if (auto v = kv.get_double("beta1")) c.train.adam.beta1 = *v;
    if (auto v = kv.get_double("beta2")) c.train.adam.beta2 = *v;
    if (auto v = kv.get_double("epsilon")) c.train.adam.epsilon = *v;
    if (auto v = kv.get_double("weight_decay")) c.train.adam.weight_decay = *v;
    if (auto v = kv.get_bool("use_lc")) c.train.use_lc = *v;
    if (auto v = kv.get_int("eval_every")) c.train.eval_every = *v;
    c.sync();
    if (auto v = kv.get_string("channels"); v && *v != channel_list(c.model.channels))
      throw ValidationError("config: channels = " + *v + " disagrees with channel_divisor " +
                            std::to_string(c.channel_divisor) + " (" +
                            channel_list(c.model.channels) + "); the schedule is derived");
    c.validate();
    return c;
  }

  /// Every key with its resolved value; from_kv(to_kv()) reproduces *this.
  KeyValueConfig to_kv() const {
    KeyValueConfig kv;
    const auto d = [](double v) { return text::format_shortest(v); };
    kv.set("seed", std::to_string(seed));
    kv.set("data_seed", std::to_string(data.seed));
    kv.set("samples", std::to_string(data.samples));
    kv.set("validation_samples", std::to_string(validation_samples));
    kv.set("pairs", std::to_string(data.pairs));
    kv.set("image_size", std::to_string(data.height));
    kv.set("p_anchor", d(data.p_anchor));
    kv.set("p_partner_given_anchor", d(data.p_partner_given_anchor));
    kv.set("p_partner_given_absent", d(data.p_partner_given_absent));
    kv.set("anchor_contrast", d(data.anchor_contrast));
    kv.set("partner_contrast", d(data.partner_contrast));
    kv.set("noise", d(data.noise));
    kv.set("embedding_dim", std::to_string(data.embedding_dim));
    kv.set("lambda", d(graph.lambda));
    kv.set("tau", d(graph.tau));
    kv.set("eta", d(graph.eta));
    kv.set("binarize_threshold", d(graph.binarize_threshold));
    kv.set("normalization", graph.placement == NormalizationPlacement::kAfterIdentityMix
                                ? "after_identity_mix"
                                : "after_superimpose");
    kv.set("graph", graph_kind == GraphKind::kKs ? "ks" : "identity");
    kv.set("channel_divisor", std::to_string(channel_divisor));
    kv.set("channels", channel_list(model.channels));
    kv.set("stages", std::to_string(stages));
    kv.set("gcn_depth", std::to_string(gcn_depth));
    kv.set("leaky_slope", d(leaky_slope));
    kv.set("backbone_activation", to_string(model.backbone_activation));
    kv.set("gcn_activation", to_string(model.gcn_activation));
    if (model.final_gcn_activation) kv.set("final_gcn_activation", to_string(*model.final_gcn_activation));
    kv.set("lc_activation", to_string(model.lc_activation));
    kv.set("lc_bias", model.lc_bias ? "true" : "false");
    kv.set("lc_init_scale", d(model.lc_init_scale));
    kv.set("dropout", d(model.dropout));
    kv.set("epochs", std::to_string(train.epochs));
    kv.set("batch_size", std::to_string(train.batch_size));
    kv.set("lr_gcn", d(train.adam.lr_gcn));
    kv.set("lr_other", d(train.adam.lr_other));
    kv.set("beta1", d(train.adam.beta1));
    kv.set("beta2", d(train.adam.beta2));
    kv.set("epsilon", d(train.adam.epsilon));
    kv.set("weight_decay", d(train.adam.weight_decay));
    kv.set("use_lc", train.use_lc ? "true" : "false");
    kv.set("eval_every", std::to_string(train.eval_every));
    return kv;
  }
};

struct ToyExperiment {
  SyntheticDataset dataset;
  LabeledImages<double> validation;
  Matrix<double> e0;
  KsGraph graph;
  Matrix<double> adjacency;  // what the GCN propagates over
  KssModel<double> model;    // untrained
};

/// Builds data, graph and the untrained model for a configuration.
inline ToyExperiment prepare_toy_experiment(const ToyExperimentConfig& cfg) {
  cfg.validate();
  ToyExperiment ex;
  ex.dataset = make_synthetic_dataset(cfg.data);
  std::mt19937_64 val_rng(cfg.data.seed ^ 0x5851f42d4c957f2dULL);
  ex.validation = draw_synthetic_images(cfg.data, cfg.validation_samples, val_rng);
  ex.e0 = build_initial_embeddings(ex.dataset.words, ex.dataset.vocab);
  ex.graph = build_ks_graph(ex.dataset.annotations, ex.dataset.knowledge, cfg.data.labels(),
                            cfg.graph);
  ex.adjacency = cfg.graph_kind == GraphKind::kKs ? ex.graph.ks_normalized
                                                  : Matrix<double>::identity(cfg.data.labels());
  std::mt19937_64 init_rng(cfg.seed);
  ex.model = KssModel<double>::make(cfg.model, ex.adjacency, init_rng);
  if (cfg.gcn_depth < cfg.stages) ex.model = ex.model.depth_variant(cfg.gcn_depth, init_rng);
  return ex;
}

inline TrainResult<double> run_toy_experiment(
    const ToyExperimentConfig& cfg, ToyExperiment* prepared = nullptr,
    const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  ToyExperiment local;
  ToyExperiment& ex = prepared ? *prepared : local;
  ex = prepare_toy_experiment(cfg);
  return train_toy(ex.model, ex.dataset.data, ex.e0, cfg.train, &ex.validation, on_epoch);
}

}  // namespace kss
