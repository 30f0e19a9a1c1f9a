#pragma once

// Loading of label vocabularies, multi-label annotations, knowledge-graph
// edges and word-embedding tables. Every loader has a matching writer so a
// structure can be serialized and read back unchanged.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kss/error.hpp"
#include "kss/tensor.hpp"
#include "kss/text.hpp"

namespace kss {

/// Ordered, duplicate-free label names. The position of a name is its index.
class LabelVocabulary {
 public:
  explicit LabelVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw FormatError("vocabulary: no labels");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i].empty()) throw FormatError("vocabulary: empty label at line " + std::to_string(i + 1));
      if (!index_.emplace(names_[i], i).second)
        throw FormatError("vocabulary: duplicate label '" + names_[i] + "'");
    }
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Looks up `token` as written, then with underscores read as spaces
  /// ("sports_ball" → "sports ball").
  std::optional<std::size_t> resolve_token(std::string_view token) const {
    if (auto i = find(token)) return i;
    std::string spaced(token);
    std::replace(spaced.begin(), spaced.end(), '_', ' ');
    return find(spaced);
  }

  bool operator==(const LabelVocabulary& o) const { return names_ == o.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct AnnotatedSample {
  std::string id;
  std::vector<std::size_t> labels;  // sorted, unique

  bool operator==(const AnnotatedSample&) const = default;
};

/// Multi-label annotations over a vocabulary of `label_count` labels.
class AnnotationSet {
 public:
  AnnotationSet() = default;
  explicit AnnotationSet(std::size_t label_count) : label_count_(label_count) {}

  void add(std::string id, std::vector<std::size_t> labels) {
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    if (!labels.empty() && labels.back() >= label_count_)
      throw ValidationError("annotations: label index " + std::to_string(labels.back()) +
                            " out of range for " + std::to_string(label_count_) + " labels");
    if (!ids_.insert(id).second) throw FormatError("annotations: duplicate sample id '" + id + "'");
    if (labels.empty()) ++empty_count_;
    samples_.push_back({std::move(id), std::move(labels)});
  }

  std::size_t label_count() const noexcept { return label_count_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  const std::vector<AnnotatedSample>& samples() const noexcept { return samples_; }
  const AnnotatedSample& operator[](std::size_t i) const { return samples_[i]; }

  /// Samples carrying no label at all. They are kept and contribute nothing
  /// to co-occurrence counts.
  std::size_t empty_count() const noexcept { return empty_count_; }

  double mean_labels_per_sample() const {
    if (samples_.empty()) return 0.0;
    std::size_t total = 0;
    for (const auto& s : samples_) total += s.labels.size();
    return static_cast<double>(total) / static_cast<double>(samples_.size());
  }

  bool operator==(const AnnotationSet& o) const {
    return label_count_ == o.label_count_ && samples_ == o.samples_;
  }

 private:
  std::size_t label_count_ = 0;
  std::vector<AnnotatedSample> samples_;
  std::unordered_set<std::string> ids_;
  std::size_t empty_count_ = 0;
};

struct KnowledgeTriple {
  std::size_t head = 0;
  std::size_t tail = 0;
  std::string relation;
  double weight = 0.0;

  bool operator==(const KnowledgeTriple&) const = default;
};

struct KnowledgeEdgeList {
  std::vector<KnowledgeTriple> triples;
  /// Records skipped because an endpoint is not in the vocabulary.
  std::size_t dropped = 0;
};

/// Word-embedding lookup table, rows of a fixed dimension.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {
    if (dim_ == 0) throw FormatError("embedding table: dimension must be >= 1");
  }

  /// Returns false (and keeps the existing row) when the token is already present.
  bool add(std::string token, std::vector<double> row) {
    if (row.size() != dim_)
      throw FormatError("embedding table: row for '" + token + "' has " +
                        std::to_string(row.size()) + " values, expected " + std::to_string(dim_));
    if (rows_.contains(token)) return false;
    order_.push_back(token);
    rows_.emplace(std::move(token), std::move(row));
    return true;
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return order_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return order_; }

  const std::vector<double>* find(const std::string& token) const {
    auto it = rows_.find(token);
    return it == rows_.end() ? nullptr : &it->second;
  }

  bool operator==(const EmbeddingTable& o) const {
    return dim_ == o.dim_ && order_ == o.order_ && rows_ == o.rows_;
  }

 private:
  std::size_t dim_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::vector<double>> rows_;
};

// ---------------------------------------------------------------------------
// Vocabulary

inline LabelVocabulary parse_vocabulary(const std::vector<std::string>& lines) {
  std::vector<std::string> names;
  std::size_t last = lines.size();
  while (last > 0 && text::trim(lines[last - 1]).empty()) --last;
  for (std::size_t i = 0; i < last; ++i) names.emplace_back(text::trim(lines[i]));
  return LabelVocabulary(std::move(names));
}

inline LabelVocabulary load_vocabulary(const std::string& path) {
  return parse_vocabulary(text::read_lines(path));
}

inline void save_vocabulary(const LabelVocabulary& vocab, const std::string& path) {
  auto out = text::open_out(path);
  for (const auto& n : vocab.names()) out << n << '\n';
}

// ---------------------------------------------------------------------------
// Annotations: `sample_id label label ...`, multi-word labels use underscores.

inline AnnotationSet parse_annotations(const std::vector<std::string>& lines,
                                       const LabelVocabulary& vocab) {
  AnnotationSet set(vocab.size());
  std::vector<std::string> unknown;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto tokens = text::split_ws(lines[ln]);
    if (tokens.empty()) continue;
    std::vector<std::size_t> labels;
    for (std::size_t k = 1; k < tokens.size(); ++k) {
      if (auto idx = vocab.resolve_token(tokens[k])) {
        labels.push_back(*idx);
      } else {
        unknown.push_back(std::string(tokens[k]) + " (line " + std::to_string(ln + 1) + ")");
      }
    }
    if (unknown.empty()) set.add(std::string(tokens[0]), std::move(labels));
  }
  if (!unknown.empty()) {
    std::string msg = "annotations: unknown label(s):";
    for (const auto& u : unknown) msg += " " + u;
    throw ValidationError(msg);
  }
  return set;
}

inline AnnotationSet load_annotations(const std::string& path, const LabelVocabulary& vocab) {
  return parse_annotations(text::read_lines(path), vocab);
}

inline void save_annotations(const AnnotationSet& set, const LabelVocabulary& vocab,
                             const std::string& path) {
  auto out = text::open_out(path);
  for (const auto& s : set.samples()) {
    out << s.id;
    for (auto l : s.labels) {
      std::string name = vocab.name(l);
      std::replace(name.begin(), name.end(), ' ', '_');
      out << ' ' << name;
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Knowledge edges: `head <TAB> relation <TAB> tail <TAB> weight`.

inline KnowledgeEdgeList parse_knowledge_edges(const std::vector<std::string>& lines,
                                               const LabelVocabulary& vocab) {
  KnowledgeEdgeList list;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (text::trim(lines[ln]).empty()) continue;
    const auto where = " at line " + std::to_string(ln + 1);
    const auto fields = text::split(lines[ln], '\t');
    if (fields.size() != 4) throw FormatError("knowledge edges: expected 4 tab-separated fields" + where);
    const auto weight = text::parse_double(text::trim(fields[3]));
    if (!weight || !std::isfinite(*weight))
      throw FormatError("knowledge edges: bad weight '" + std::string(fields[3]) + "'" + where);
    if (*weight < 0.0) throw FormatError("knowledge edges: negative weight" + where);
    const auto head = vocab.resolve_token(text::trim(fields[0]));
    const auto tail = vocab.resolve_token(text::trim(fields[2]));
    if (!head || !tail) {
      ++list.dropped;
      continue;
    }
    list.triples.push_back({*head, *tail, std::string(text::trim(fields[1])), *weight});
  }
  return list;
}

inline KnowledgeEdgeList load_knowledge_edges(const std::string& path,
                                              const LabelVocabulary& vocab) {
  return parse_knowledge_edges(text::read_lines(path), vocab);
}

inline void save_knowledge_edges(const KnowledgeEdgeList& edges, const LabelVocabulary& vocab,
                                 const std::string& path) {
  auto out = text::open_out(path);
  for (const auto& t : edges.triples)
    out << vocab.name(t.head) << '\t' << t.relation << '\t' << vocab.name(t.tail) << '\t'
        << text::format_double(t.weight) << '\n';
}

// ---------------------------------------------------------------------------
// Embedding tables: `token v1 ... vF` per line. A leading word2vec-style
// `count dim` header line is skipped.

inline EmbeddingTable parse_embedding_table(const std::vector<std::string>& lines) {
  std::optional<EmbeddingTable> table;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto tokens = text::split_ws(lines[ln]);
    if (tokens.empty()) continue;
    if (!table && tokens.size() == 2 && text::parse_int<std::size_t>(tokens[0]) &&
        text::parse_int<std::size_t>(tokens[1]))
      continue;
    if (tokens.size() < 2)
      throw FormatError("embedding table: line " + std::to_string(ln + 1) + " has no values");
    std::vector<double> row;
    row.reserve(tokens.size() - 1);
    for (std::size_t k = 1; k < tokens.size(); ++k) {
      auto v = text::parse_double(tokens[k]);
      if (!v || !std::isfinite(*v))
        throw FormatError("embedding table: bad value '" + std::string(tokens[k]) + "' at line " +
                          std::to_string(ln + 1));
      row.push_back(*v);
    }
    if (!table) table.emplace(row.size());
    table->add(std::string(tokens[0]), std::move(row));
  }
  if (!table) throw FormatError("embedding table: no rows");
  return std::move(*table);
}

inline EmbeddingTable load_embedding_table(const std::string& path) {
  return parse_embedding_table(text::read_lines(path));
}

inline void save_embedding_table(const EmbeddingTable& table, const std::string& path) {
  auto out = text::open_out(path);
  for (const auto& tok : table.tokens()) {
    out << tok;
    for (double v : *table.find(tok)) out << ' ' << text::format_double(v);
    out << '\n';
  }
}

/// Lowercases a label name and splits it on whitespace and hyphens.
inline std::vector<std::string> label_words(std::string_view label) {
  std::string lowered = text::to_lower(label);
  std::replace(lowered.begin(), lowered.end(), '-', ' ');
  std::vector<std::string> words;
  for (auto w : text::split_ws(lowered)) words.emplace_back(w);
  return words;
}

/// Initial label embeddings, one row per vocabulary entry. A label found in
/// the table as a whole (lowercased) takes that row; otherwise its row is the
/// mean of the rows of its resolvable words. Words are summed in sorted order
/// so the result does not depend on word order.
inline Matrix<double> build_initial_embeddings(const EmbeddingTable& table,
                                               const LabelVocabulary& vocab) {
  Matrix<double> out(vocab.size(), table.dim());
  std::vector<std::string> unresolved;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    auto dst = out.row(i);
    if (const auto* whole = table.find(text::to_lower(vocab.name(i)))) {
      std::copy(whole->begin(), whole->end(), dst.begin());
      continue;
    }
    auto words = label_words(vocab.name(i));
    std::sort(words.begin(), words.end());
    std::size_t found = 0;
    for (const auto& w : words) {
      if (const auto* row = table.find(w)) {
        for (std::size_t c = 0; c < table.dim(); ++c) dst[c] += (*row)[c];
        ++found;
      }
    }
    if (found == 0) {
      unresolved.push_back(vocab.name(i));
      continue;
    }
    for (auto& v : dst) v /= static_cast<double>(found);
  }
  if (!unresolved.empty()) {
    std::string msg = "embeddings: no resolvable words for label(s):";
    for (const auto& u : unresolved) msg += " '" + u + "'";
    throw ValidationError(msg);
  }
  return out;
}

}  // namespace kss
