#pragma once

// Label-graph construction: statistical (co-occurrence) graph, knowledge
// graph, their normalized superposition, thresholding and identity mixing.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "kss/error.hpp"
#include "kss/ingest.hpp"
#include "kss/tensor.hpp"
#include "kss/text.hpp"

namespace kss {

using AdjacencyMatrix = Matrix<double>;

/// Where the normalization between superimposing and the GCN happens.
enum class NormalizationPlacement {
  /// A_KS' = normalize(A_KS); thresholding acts on the raw convex combination.
  kAfterIdentityMix,
  /// A is normalized right after superimposing; A_KS' = A_KS.
  kAfterSuperimpose,
};

struct GraphPipelineConfig {
  double lambda = 0.4;
  double tau = 0.02;
  double eta = 0.4;
  /// Conditional-probability cut for the statistical graph.
  double binarize_threshold = 0.4;
  NormalizationPlacement placement = NormalizationPlacement::kAfterIdentityMix;

  void validate() const {
    detail::require(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0, 1]");
    detail::require(tau >= 0.0 && std::isfinite(tau), "tau must be >= 0");
    detail::require(eta >= 0.0 && eta <= 1.0, "eta must lie in [0, 1]");
    detail::require(binarize_threshold >= 0.0 && binarize_threshold <= 1.0,
                    "binarize threshold must lie in [0, 1]");
  }
};

struct CooccurrenceCounts {
  Matrix<std::size_t> pair;          // samples containing both i and j, zero diagonal
  std::vector<std::size_t> single;   // samples containing i
};

inline CooccurrenceCounts cooccurrence_counts(const AnnotationSet& ann, std::size_t n) {
  CooccurrenceCounts counts{Matrix<std::size_t>(n, n), std::vector<std::size_t>(n, 0)};
  for (const auto& s : ann.samples()) {
    for (std::size_t a = 0; a < s.labels.size(); ++a) {
      const auto i = s.labels[a];
      detail::require(i < n, "cooccurrence_counts: label index out of range");
      ++counts.single[i];
      for (std::size_t b = a + 1; b < s.labels.size(); ++b) {
        ++counts.pair(i, s.labels[b]);
        ++counts.pair(s.labels[b], i);
      }
    }
  }
  return counts;
}

/// Conditional probabilities P[i][j] = M[i][j] / Ncount[i] (0 when label i
/// never occurs).
inline Matrix<double> conditional_probabilities(const CooccurrenceCounts& counts) {
  const std::size_t n = counts.single.size();
  Matrix<double> p(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (counts.single[i] == 0) continue;
    const double denom = static_cast<double>(counts.single[i]);
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) p(i, j) = static_cast<double>(counts.pair(i, j)) / denom;
  }
  return p;
}

/// A_S[i][j] = 1 when P(j | i) >= t, with an empty diagonal.
inline AdjacencyMatrix statistical_adjacency(const CooccurrenceCounts& counts, double t) {
  const auto p = conditional_probabilities(counts);
  const std::size_t n = p.rows();
  AdjacencyMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && counts.single[i] > 0 && p(i, j) >= t) a(i, j) = 1.0;
  return a;
}

/// [A_K]_ij = max weight over the relations linking i and j, 0 if none.
/// Relations are read as undirected: a triple contributes to both (i, j)
/// and (j, i).
inline AdjacencyMatrix knowledge_adjacency(const KnowledgeEdgeList& edges, std::size_t n) {
  AdjacencyMatrix a(n, n);
  for (const auto& t : edges.triples) {
    detail::require(t.head < n && t.tail < n, "knowledge_adjacency: label index out of range");
    detail::require(t.weight >= 0.0, "knowledge_adjacency: negative weight");
    a(t.head, t.tail) = std::max(a(t.head, t.tail), t.weight);
    a(t.tail, t.head) = std::max(a(t.tail, t.head), t.weight);
  }
  return a;
}

/// D^{-1/2} A D^{-1/2} with D_ii the row sum. Zero-degree rows and columns
/// stay zero.
inline AdjacencyMatrix normalize(const AdjacencyMatrix& a) {
  detail::require_shape(a.is_square(), "normalize: matrix is not square");
  const std::size_t n = a.rows();
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (double v : a.row(i)) d += v;
    if (d > 0.0) inv_sqrt[i] = 1.0 / std::sqrt(d);
  }
  AdjacencyMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = (inv_sqrt[i] * inv_sqrt[j]) * a(i, j);
  return out;
}

/// λ·A_S' + (1 − λ)·A_K'
inline AdjacencyMatrix superimpose(const AdjacencyMatrix& stat, const AdjacencyMatrix& know,
                                   double lambda) {
  detail::require_shape(stat.rows() == know.rows() && stat.cols() == know.cols(),
                        "superimpose: shape mismatch");
  detail::require(lambda >= 0.0 && lambda <= 1.0, "superimpose: lambda must lie in [0, 1]");
  AdjacencyMatrix out(stat.rows(), stat.cols());
  auto dst = out.values();
  auto s = stat.values();
  auto k = know.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = lambda * s[i] + (1.0 - lambda) * k[i];
  return out;
}

/// Entries below τ are zeroed; entries at or above τ are kept.
inline AdjacencyMatrix threshold_filter(const AdjacencyMatrix& a, double tau) {
  detail::require(tau >= 0.0, "threshold_filter: tau must be >= 0");
  AdjacencyMatrix out = a;
  for (auto& v : out.values())
    if (v < tau) v = 0.0;
  return out;
}

/// η·A_τ + (1 − η)·I
inline AdjacencyMatrix identity_mix(const AdjacencyMatrix& a, double eta) {
  detail::require_shape(a.is_square(), "identity_mix: matrix is not square");
  detail::require(eta >= 0.0 && eta <= 1.0, "identity_mix: eta must lie in [0, 1]");
  AdjacencyMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      out(i, j) = eta * a(i, j) + (i == j ? 1.0 - eta : 0.0);
  return out;
}

/// Ordered pairs (i, j) with a nonzero entry, row-major order.
inline std::vector<std::pair<std::size_t, std::size_t>> edge_set(const AdjacencyMatrix& a) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0) edges.emplace_back(i, j);
  return edges;
}

/// Every intermediate of the KS-graph pipeline.
struct KsGraph {
  AdjacencyMatrix statistical;             // A_S
  AdjacencyMatrix knowledge;               // A_K
  AdjacencyMatrix statistical_normalized;  // A_S'
  AdjacencyMatrix knowledge_normalized;    // A_K'
  AdjacencyMatrix superimposed;            // A
  AdjacencyMatrix filtered;                // A_τ
  AdjacencyMatrix ks;                      // A_KS
  AdjacencyMatrix ks_normalized;           // A_KS', the GCN propagation matrix
};

inline KsGraph build_ks_graph(const AnnotationSet& ann, const KnowledgeEdgeList& edges,
                              std::size_t n, const GraphPipelineConfig& cfg) {
  cfg.validate();
  detail::require(ann.label_count() == 0 || ann.label_count() == n,
                  "build_ks_graph: annotation label count differs from graph size");
  KsGraph g;
  g.statistical = statistical_adjacency(cooccurrence_counts(ann, n), cfg.binarize_threshold);
  g.knowledge = knowledge_adjacency(edges, n);
  g.statistical_normalized = normalize(g.statistical);
  g.knowledge_normalized = normalize(g.knowledge);
  g.superimposed = superimpose(g.statistical_normalized, g.knowledge_normalized, cfg.lambda);
  if (cfg.placement == NormalizationPlacement::kAfterSuperimpose) {
    g.superimposed = normalize(g.superimposed);
  }
  g.filtered = threshold_filter(g.superimposed, cfg.tau);
  g.ks = identity_mix(g.filtered, cfg.eta);
  g.ks_normalized =
      cfg.placement == NormalizationPlacement::kAfterIdentityMix ? normalize(g.ks) : g.ks;
  return g;
}

struct AdjacencySummary {
  std::size_t n = 0;
  std::size_t nnz = 0;
  std::size_t edges = 0;          // includes self loops
  std::size_t off_diagonal_edges = 0;
  bool symmetric = true;
  double min_degree = 0.0;
  double max_degree = 0.0;
  double mean_degree = 0.0;
};

inline AdjacencySummary summarize(const AdjacencyMatrix& a) {
  AdjacencySummary s;
  s.n = a.rows();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      d += a(i, j);
      if (a(i, j) != 0.0) {
        ++s.nnz;
        if (i != j) ++s.off_diagonal_edges;
      }
      if (a(i, j) != a(j, i)) s.symmetric = false;
    }
    if (i == 0 || d < s.min_degree) s.min_degree = d;
    if (i == 0 || d > s.max_degree) s.max_degree = d;
    s.mean_degree += d;
  }
  if (s.n > 0) s.mean_degree /= static_cast<double>(s.n);
  s.edges = s.nnz;
  return s;
}

// ---------------------------------------------------------------------------
// Serialization. Text: a header line (`N` for square matrices, `R C`
// otherwise) followed by rows of space-separated 17-significant-digit values.
// Binary: magic, version, N, then N*N little-endian doubles row-major.

inline constexpr char kAdjacencyMagic[8] = {'K', 'S', 'S', 'A', 'D', 'J', '\0', '\0'};
inline constexpr std::uint32_t kAdjacencyVersion = 1;

inline void save_matrix_text(const Matrix<double>& m, const std::string& path) {
  auto out = text::open_out(path);
  if (m.is_square())
    out << m.rows() << '\n';
  else
    out << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << text::format_double(m(i, j));
    }
    out << '\n';
  }
}

inline Matrix<double> parse_matrix_text(const std::vector<std::string>& lines) {
  std::size_t ln = 0;
  while (ln < lines.size() && text::trim(lines[ln]).empty()) ++ln;
  if (ln == lines.size()) throw FormatError("matrix: empty file");
  const auto header = text::split_ws(lines[ln++]);
  if (header.empty() || header.size() > 2) throw FormatError("matrix: bad header");
  const auto rows = text::parse_int<std::size_t>(header[0]);
  const auto cols = header.size() == 2 ? text::parse_int<std::size_t>(header[1]) : rows;
  if (!rows || !cols) throw FormatError("matrix: bad header");
  Matrix<double> m(*rows, *cols);
  std::size_t r = 0;
  for (; ln < lines.size(); ++ln) {
    const auto tokens = text::split_ws(lines[ln]);
    if (tokens.empty()) continue;
    if (r == *rows) throw FormatError("matrix: more than " + std::to_string(*rows) + " rows");
    if (tokens.size() != *cols)
      throw FormatError("matrix: row " + std::to_string(r + 1) + " has " +
                        std::to_string(tokens.size()) + " values, expected " +
                        std::to_string(*cols));
    for (std::size_t c = 0; c < *cols; ++c) {
      auto v = text::parse_double(tokens[c]);
      if (!v) throw FormatError("matrix: bad value '" + std::string(tokens[c]) + "'");
      m(r, c) = *v;
    }
    ++r;
  }
  if (r != *rows)
    throw FormatError("matrix: expected " + std::to_string(*rows) + " rows, got " +
                      std::to_string(r));
  return m;
}

inline Matrix<double> load_matrix_text(const std::string& path) {
  return parse_matrix_text(text::read_lines(path));
}

namespace detail {

template <typename V>
void write_le(std::ostream& out, V v) {
  unsigned char bytes[sizeof(V)];
  std::memcpy(bytes, &v, sizeof(V));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(V));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(V));
}

template <typename V>
V read_le(std::istream& in) {
  unsigned char bytes[sizeof(V)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(V))) throw FormatError("unexpected end of file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(V));
  V v;
  std::memcpy(&v, bytes, sizeof(V));
  return v;
}

}  // namespace detail

inline void save_adjacency_binary(const AdjacencyMatrix& a, const std::string& path) {
  detail::require_shape(a.is_square(), "adjacency must be square");
  auto out = text::open_out(path, true);
  out.write(kAdjacencyMagic, sizeof(kAdjacencyMagic));
  detail::write_le<std::uint32_t>(out, kAdjacencyVersion);
  detail::write_le<std::uint64_t>(out, a.rows());
  for (double v : a.values()) detail::write_le<double>(out, v);
}

inline bool has_adjacency_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[sizeof(kAdjacencyMagic)] = {};
  return in.read(magic, sizeof(magic)) && std::memcmp(magic, kAdjacencyMagic, sizeof(magic)) == 0;
}

inline AdjacencyMatrix load_adjacency_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  char magic[sizeof(kAdjacencyMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kAdjacencyMagic, sizeof(magic)) != 0)
    throw FormatError("'" + path + "' is not a binary adjacency file");
  const auto version = detail::read_le<std::uint32_t>(in);
  if (version != kAdjacencyVersion)
    throw FormatError("unsupported adjacency version " + std::to_string(version));
  const auto n = detail::read_le<std::uint64_t>(in);
  AdjacencyMatrix a(n, n);
  for (auto& v : a.values()) v = detail::read_le<double>(in);
  return a;
}

/// Reads either serialization, picking by the binary magic.
inline AdjacencyMatrix load_adjacency(const std::string& path) {
  return has_adjacency_magic(path) ? load_adjacency_binary(path) : load_matrix_text(path);
}

}  // namespace kss
