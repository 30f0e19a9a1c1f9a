#pragma once

// Multi-label evaluation: mAP plus per-class and overall precision, recall
// and F1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "kss/error.hpp"
#include "kss/tensor.hpp"

namespace kss {

/// Scores (samples × labels) and aligned binary targets.
struct ScoreMatrix {
  Matrix<double> scores;
  Matrix<int> targets;

  void validate() const {
    detail::require_shape(scores.rows() == targets.rows() && scores.cols() == targets.cols(),
                          "score matrix: scores are " + std::to_string(scores.rows()) + "x" +
                              std::to_string(scores.cols()) + " but targets are " +
                              std::to_string(targets.rows()) + "x" +
                              std::to_string(targets.cols()));
    detail::require(all_finite<double>(scores.values()), "score matrix: non-finite score");
    for (int t : targets.values())
      detail::require(t == 0 || t == 1, "score matrix: targets must be 0 or 1");
  }

  std::vector<double> class_scores(std::size_t c) const {
    std::vector<double> v(scores.rows());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = scores(i, c);
    return v;
  }
  std::vector<int> class_targets(std::size_t c) const {
    std::vector<int> v(targets.rows());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = targets(i, c);
    return v;
  }
};

/// Non-interpolated average precision: mean of precision@k over the ranks k
/// of the positives, ranking by descending score with ties kept in input
/// order. nullopt when there are no positives.
inline std::optional<double> average_precision(std::span<const double> scores,
                                               std::span<const int> targets) {
  detail::require_shape(scores.size() == targets.size(), "average_precision: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (targets[order[k]] != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

struct MapResult {
  double map = 0.0;
  std::vector<std::optional<double>> per_class;
  std::size_t excluded = 0;  // classes without positives
};

inline MapResult map_score(const ScoreMatrix& sm) {
  sm.validate();
  MapResult r;
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < sm.scores.cols(); ++c) {
    const auto s = sm.class_scores(c);
    const auto t = sm.class_targets(c);
    auto ap = average_precision(s, t);
    r.per_class.push_back(ap);
    if (ap) {
      sum += *ap;
      ++used;
    } else {
      ++r.excluded;
    }
  }
  if (used == 0) throw ValidationError("map_score: no class has a positive target");
  r.map = sum / static_cast<double>(used);
  return r;
}

struct DecisionRule {
  enum class Kind { kThreshold, kTopK };
  Kind kind = Kind::kThreshold;
  /// Positive when sigmoid(score) >= threshold (or score >= threshold when
  /// apply_sigmoid is false).
  double threshold = 0.5;
  bool apply_sigmoid = true;
  std::size_t k = 3;

  static DecisionRule top_k(std::size_t k) { return {Kind::kTopK, 0.5, true, k}; }
};

/// Binary predictions under a decision rule.
inline Matrix<int> decide(const Matrix<double>& scores, const DecisionRule& rule) {
  Matrix<int> pred(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    if (rule.kind == DecisionRule::Kind::kThreshold) {
      for (std::size_t c = 0; c < scores.cols(); ++c) {
        const double v = rule.apply_sigmoid ? 1.0 / (1.0 + std::exp(-scores(i, c))) : scores(i, c);
        pred(i, c) = v >= rule.threshold ? 1 : 0;
      }
    } else {
      std::vector<std::size_t> order(scores.cols());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return scores(i, a) > scores(i, b); });
      for (std::size_t r = 0; r < std::min(rule.k, order.size()); ++r) pred(i, order[r]) = 1;
    }
  }
  return pred;
}

struct PrfResult {
  double cp = 0.0, cr = 0.0, cf1 = 0.0;
  double op = 0.0, orc = 0.0, of1 = 0.0;
  std::size_t excluded_classes = 0;      // no positive targets, left out of CP/CR
  std::size_t empty_precision_classes = 0;  // included classes with no positive prediction
  bool overall_precision_empty = false;
  bool overall_recall_empty = false;
};

inline double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

/// CP/CR average per-class precision and recall over classes with at least
/// one positive target; CF1 is the harmonic mean of CP and CR. OP/OR pool
/// true/false positives and false negatives over all classes.
inline PrfResult prf_suite(const ScoreMatrix& sm, const DecisionRule& rule = {}) {
  sm.validate();
  const auto pred = decide(sm.scores, rule);
  PrfResult r;
  std::size_t tp_all = 0, fp_all = 0, fn_all = 0, used = 0;
  double p_sum = 0.0, r_sum = 0.0;
  for (std::size_t c = 0; c < sm.scores.cols(); ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < sm.scores.rows(); ++i) {
      const bool t = sm.targets(i, c) != 0;
      const bool p = pred(i, c) != 0;
      tp += (t && p);
      fp += (!t && p);
      fn += (t && !p);
    }
    tp_all += tp;
    fp_all += fp;
    fn_all += fn;
    if (tp + fn == 0) {
      ++r.excluded_classes;
      continue;
    }
    ++used;
    if (tp + fp == 0)
      ++r.empty_precision_classes;
    else
      p_sum += static_cast<double>(tp) / static_cast<double>(tp + fp);
    r_sum += static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  if (used > 0) {
    r.cp = p_sum / static_cast<double>(used);
    r.cr = r_sum / static_cast<double>(used);
  }
  r.cf1 = harmonic(r.cp, r.cr);
  r.overall_precision_empty = tp_all + fp_all == 0;
  r.overall_recall_empty = tp_all + fn_all == 0;
  if (!r.overall_precision_empty) r.op = static_cast<double>(tp_all) / static_cast<double>(tp_all + fp_all);
  if (!r.overall_recall_empty) r.orc = static_cast<double>(tp_all) / static_cast<double>(tp_all + fn_all);
  r.of1 = harmonic(r.op, r.orc);
  return r;
}

}  // namespace kss
