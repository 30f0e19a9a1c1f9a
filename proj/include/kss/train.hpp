#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "kss/error.hpp"
#include "kss/metrics.hpp"
#include "kss/model.hpp"
#include "kss/synthetic.hpp"

namespace kss {

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  bool use_lc = true;
  /// Evaluate mAP every this many epochs; 0 evaluates after the last epoch only.
  std::size_t eval_every = 1;

  void validate() const {
    detail::require(adam.lr_gcn > 0.0 && adam.lr_other > 0.0, "train: learning rates must be > 0");
    detail::require(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0,
                    "train: Adam betas must lie in [0, 1)");
    detail::require(adam.weight_decay >= 0.0, "train: weight decay must be >= 0");
    detail::require(batch_size >= 1, "train: batch size must be >= 1");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;       // mean training loss over the epoch's batches
  std::optional<double> train_map;  // evaluated without dropout after the epoch
  std::optional<double> val_map;
};

template <typename T>
struct TrainResult {
  KssModel<T> model;
  std::vector<EpochRecord> history;
};

/// Logits for every image, without dropout.
template <typename T>
Matrix<double> predict_scores(const KssModel<T>& model, const LabeledImages<T>& data,
                              const Matrix<T>& e0, bool use_lc = true,
                              std::size_t chunk = 64) {
  Matrix<double> scores(data.size(), model.labels());
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const std::size_t end = std::min(data.size(), start + chunk);
    std::vector<FeatureMap<T>> batch(data.images.begin() + static_cast<std::ptrdiff_t>(start),
                                     data.images.begin() + static_cast<std::ptrdiff_t>(end));
    const auto logits = model_forward(model, batch, e0, ForwardOptions{use_lc, nullptr});
    for (std::size_t i = start; i < end; ++i)
      for (std::size_t n = 0; n < model.labels(); ++n)
        scores(i, n) = static_cast<double>(logits(i - start, n));
  }
  return scores;
}

template <typename T>
double evaluate_map(const KssModel<T>& model, const LabeledImages<T>& data, const Matrix<T>& e0,
                    bool use_lc = true) {
  return map_score(ScoreMatrix{predict_scores(model, data, e0, use_lc), data.targets}).map;
}

/// Mini-batch training with per-group Adam learning rates and dropout on the
/// pooled features. Deterministic given `cfg.seed`. `on_epoch` (optional)
/// sees each record as soon as it is complete.
template <typename T>
TrainResult<T> train_toy(KssModel<T> model, const LabeledImages<T>& train, const Matrix<T>& e0,
                         const TrainConfig& cfg, const LabeledImages<T>* validation = nullptr,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  detail::require(train.size() > 0, "train: dataset is empty");
  detail::require_shape(train.targets.rows() == train.size() &&
                            train.targets.cols() == model.labels(),
                        "train: targets shape mismatch");
  std::mt19937_64 order_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0xd1b54a32d192ed03ULL);
  Adam<T> opt(cfg.adam);
  TrainResult<T> result{std::move(model), {}};
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(order_rng)]);
    }
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<FeatureMap<T>> batch;
      Matrix<int> targets(end - start, result.model.labels());
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(train.images[order[k]]);
        for (std::size_t n = 0; n < targets.cols(); ++n)
          targets(k - start, n) = train.targets(order[k], n);
      }
      auto [loss, grads] = model_loss_and_grad(result.model, batch, targets, e0,
                                               ForwardOptions{cfg.use_lc, &dropout_rng});
      if (!std::isfinite(static_cast<double>(loss)))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batches + 1) +
                           "; lower the learning rates");
      opt.step(result.model, grads);
      loss_sum += static_cast<double>(loss);
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(batches);
    const bool eval = epoch == cfg.epochs || (cfg.eval_every > 0 && epoch % cfg.eval_every == 0);
    if (eval) {
      rec.train_map = evaluate_map(result.model, train, e0, cfg.use_lc);
      if (validation) rec.val_map = evaluate_map(result.model, *validation, e0, cfg.use_lc);
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

}  // namespace kss
