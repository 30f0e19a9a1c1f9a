#pragma once

// Synthetic multi-label images with planted label co-occurrence.
//
// Labels come in (anchor, partner) pairs sharing a shape; anchors are drawn
// in one colour, partners in another. Anchors appear
// independently with probability p_anchor; a partner appears with
// probability p_partner_given_anchor when its anchor is present and
// p_partner_given_absent otherwise, so every conditional probability of the
// statistical graph is known in closed form.

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kss/error.hpp"
#include "kss/ingest.hpp"
#include "kss/tensor.hpp"

namespace kss {

struct SyntheticConfig {
  std::size_t samples = 2000;
  std::size_t pairs = 4;  // labels = 2 * pairs, at most 4 pairs (one per shape)
  std::size_t height = 16;
  std::size_t width = 16;
  double p_anchor = 0.3;
  double p_partner_given_anchor = 0.8;
  double p_partner_given_absent = 0.05;
  double anchor_contrast = 1.0;
  double partner_contrast = 1.0;
  double noise = 0.1;
  std::size_t embedding_dim = 16;
  std::uint64_t seed = 7;

  std::size_t labels() const noexcept { return 2 * pairs; }

  void validate() const {
    detail::require(pairs >= 1 && pairs <= 4, "synthetic: pairs must lie in [1, 4]");
    detail::require(height >= 6 && width >= 6, "synthetic: images must be at least 6x6");
    for (double p : {p_anchor, p_partner_given_anchor, p_partner_given_absent})
      detail::require(p >= 0.0 && p <= 1.0, "synthetic: probabilities must lie in [0, 1]");
    detail::require(noise >= 0.0, "synthetic: noise must be >= 0");
    detail::require(embedding_dim >= 1, "synthetic: embedding_dim must be >= 1");
  }

  /// P(label j present | label i present) under the generator.
  double conditional(std::size_t i, std::size_t j) const {
    if (i == j) return 1.0;
    const double pa = p_anchor;
    const double pp = pa * p_partner_given_anchor + (1.0 - pa) * p_partner_given_absent;
    const bool i_anchor = i % 2 == 0, j_anchor = j % 2 == 0;
    if (i / 2 != j / 2) return j_anchor ? pa : pp;  // independent pairs
    if (i_anchor) return p_partner_given_anchor;    // P(partner | anchor)
    return pa * p_partner_given_anchor / pp;        // P(anchor | partner)
  }
};

/// Images with aligned binary targets.
template <typename T>
struct LabeledImages {
  std::vector<FeatureMap<T>> images;
  Matrix<int> targets;

  std::size_t size() const noexcept { return images.size(); }
};

struct SyntheticDataset {
  LabelVocabulary vocab{std::vector<std::string>{"_"}};
  AnnotationSet annotations;
  LabeledImages<double> data;
  KnowledgeEdgeList knowledge;
  EmbeddingTable words{1};
};

namespace detail {

inline constexpr std::array<const char*, 4> kShapeWords = {"square", "cross", "ring", "saltire"};
inline constexpr std::array<const char*, 2> kColourWords = {"crimson", "azure"};

/// 5×5 stencils, row-major.
inline bool shape_pixel(std::size_t shape, std::size_t r, std::size_t c) {
  switch (shape) {
    case 0: return r >= 1 && r <= 3 && c >= 1 && c <= 3;
    case 1: return r == 2 || c == 2;
    case 2: return r == 0 || r == 4 || c == 0 || c == 4;
    default: return r == c || r + c == 4;
  }
}

inline constexpr std::array<std::array<double, 3>, 2> kColours = {{{1.0, 0.15, 0.1},
                                                                   {0.1, 0.45, 1.0}}};

}  // namespace detail

inline std::vector<std::string> synthetic_label_names(std::size_t pairs) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < pairs; ++k)
    for (const char* colour : detail::kColourWords)
      names.push_back(std::string(colour) + " " + detail::kShapeWords[k]);
  return names;
}

/// Draws `count` labelled images; label sets follow the planted model.
inline LabeledImages<double> draw_synthetic_images(const SyntheticConfig& cfg, std::size_t count,
                                                   std::mt19937_64& rng,
                                                   AnnotationSet* annotations = nullptr,
                                                   const std::string& id_prefix = "s") {
  cfg.validate();
  const std::size_t L = cfg.labels();
  LabeledImages<double> out;
  out.targets = Matrix<int>(count, L);
  std::bernoulli_distribution anchor(cfg.p_anchor), with(cfg.p_partner_given_anchor),
      without(cfg.p_partner_given_absent);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> row(0, cfg.height - 5), col(0, cfg.width - 5);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<std::size_t> present;
    for (std::size_t k = 0; k < cfg.pairs; ++k) {
      const bool a = anchor(rng);
      const bool p = a ? with(rng) : without(rng);
      if (a) present.push_back(2 * k);
      if (p) present.push_back(2 * k + 1);
    }
    FeatureMap<double> img(3, cfg.height, cfg.width);
    for (auto& v : img.values()) v = cfg.noise * noise(rng);
    for (auto l : present) {
      out.targets(i, l) = 1;
      const std::size_t shape = l / 2, colour = l % 2;
      const double contrast = colour == 0 ? cfg.anchor_contrast : cfg.partner_contrast;
      const std::size_t r0 = row(rng), c0 = col(rng);
      for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 5; ++c)
          if (detail::shape_pixel(shape, r, c))
            for (std::size_t ch = 0; ch < 3; ++ch)
              img.at(ch, r0 + r, c0 + c) += contrast * detail::kColours[colour][ch];
    }
    out.images.push_back(std::move(img));
    if (annotations) annotations->add(id_prefix + std::to_string(i), present);
  }
  return out;
}

/// Training images plus the side information the pipeline needs: a
/// vocabulary, annotations, a small knowledge graph (pair relations plus
/// weaker same-colour relations) and a word-embedding table for the label
/// words.
inline SyntheticDataset make_synthetic_dataset(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  SyntheticDataset ds;
  ds.vocab = LabelVocabulary(synthetic_label_names(cfg.pairs));
  ds.annotations = AnnotationSet(cfg.labels());
  ds.data = draw_synthetic_images(cfg, cfg.samples, rng, &ds.annotations);

  for (std::size_t k = 0; k < cfg.pairs; ++k) {
    ds.knowledge.triples.push_back({2 * k, 2 * k + 1, "RelatedTo", 1.0});
    ds.knowledge.triples.push_back({2 * k, 2 * k + 1, "SimilarTo", 0.5});
    if (k + 1 < cfg.pairs) {
      ds.knowledge.triples.push_back({2 * k, 2 * k + 2, "RelatedTo", 0.3});
      ds.knowledge.triples.push_back({2 * k + 1, 2 * k + 3, "RelatedTo", 0.3});
    }
  }

  std::mt19937_64 word_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> g(0.0, 1.0);
  ds.words = EmbeddingTable(cfg.embedding_dim);
  auto add_word = [&](const char* w) {
    std::vector<double> v(cfg.embedding_dim);
    for (auto& x : v) x = g(word_rng);
    ds.words.add(w, std::move(v));
  };
  for (const char* w : detail::kColourWords) add_word(w);
  for (std::size_t k = 0; k < cfg.pairs; ++k) add_word(detail::kShapeWords[k]);
  return ds;
}

}  // namespace kss
