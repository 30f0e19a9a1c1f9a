#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "kss/graph.hpp"
#include "kss/synthetic.hpp"
#include "oracles.hpp"
#include "support.hpp"

using kss::AdjacencyMatrix;
using kss::Matrix;

namespace {

AdjacencyMatrix mat2(double a, double b, double c, double d) { return AdjacencyMatrix(2, 2, {a, b, c, d}); }

AdjacencyMatrix random_symmetric(std::mt19937_64& rng, std::size_t n, double density = 0.5) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AdjacencyMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      if (u(rng) < density) a(i, j) = a(j, i) = u(rng);
  return a;
}

bool symmetric(const AdjacencyMatrix& a) { return kss::summarize(a).symmetric; }

AdjacencyMatrix conjugate(const AdjacencyMatrix& a, const std::vector<std::size_t>& perm) {
  // new index perm[i] holds old index i
  AdjacencyMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(perm[i], perm[j]) = a(i, j);
  return out;
}

double max_diff(const AdjacencyMatrix& a, const AdjacencyMatrix& b) {
  return oracle::max_abs_diff(a, oracle::dense(b));
}

}  // namespace

TEST(Cooccurrence, TwoSamples) {
  const auto c = kss::cooccurrence_counts(oracle::to_annotations({{0, 1}, {0}}, 2), 2);
  EXPECT_EQ(c.pair(0, 1), 1u);
  EXPECT_EQ(c.pair(1, 0), 1u);
  EXPECT_EQ(c.pair(0, 0), 0u);
  EXPECT_EQ(c.single, (std::vector<std::size_t>{2, 1}));
}

TEST(Cooccurrence, EmptySet) {
  const auto c = kss::cooccurrence_counts(kss::AnnotationSet(3), 3);
  EXPECT_EQ(c.pair, Matrix<std::size_t>(3, 3));
  EXPECT_EQ(c.single, (std::vector<std::size_t>(3, 0)));
}

TEST(Cooccurrence, RepeatedPair) {
  const auto c = kss::cooccurrence_counts(oracle::to_annotations({{0, 1}, {0, 1}, {0, 1}}, 2), 2);
  EXPECT_EQ(c.pair(0, 1), 3u);
  EXPECT_EQ(c.single, (std::vector<std::size_t>{3, 3}));
}

TEST(Cooccurrence, MatchesBruteForce) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 9;
    const auto samples = oracle::random_label_sets(rng, n, 1 + trial * 3);
    const auto c = kss::cooccurrence_counts(oracle::to_annotations(samples, n), n);
    const auto [m, count] = oracle::cooccurrence(samples, n);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(c.single[i], static_cast<std::size_t>(count[i]));
      for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(c.pair(i, j), static_cast<std::size_t>(m[i][j]));
    }
  }
}

TEST(StatisticalAdjacency, DirectionalProbabilities) {
  kss::CooccurrenceCounts c{Matrix<std::size_t>(2, 2, {0, 1, 1, 0}), {1, 2}};
  const auto p = kss::conditional_probabilities(c);
  EXPECT_EQ(p(0, 1), 1.0);
  EXPECT_EQ(p(1, 0), 0.5);
  EXPECT_EQ(kss::statistical_adjacency(c, 0.4), mat2(0, 1, 1, 0));
  EXPECT_EQ(kss::statistical_adjacency(c, 0.6), mat2(0, 1, 0, 0));
}

TEST(StatisticalAdjacency, ZeroCounts) {
  kss::CooccurrenceCounts c{Matrix<std::size_t>(3, 3), {0, 4, 0}};
  EXPECT_EQ(kss::statistical_adjacency(c, 0.4), AdjacencyMatrix(3, 3));
}

TEST(StatisticalAdjacency, ProbabilityEqualToThresholdIsKept) {
  kss::CooccurrenceCounts c{Matrix<std::size_t>(2, 2, {0, 2, 2, 0}), {5, 2}};
  EXPECT_EQ(kss::statistical_adjacency(c, 0.4)(0, 1), 1.0);
  EXPECT_EQ(kss::statistical_adjacency(c, 0.41)(0, 1), 0.0);
}

TEST(StatisticalAdjacency, MatchesBruteForce) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + trial % 10;
    const double t = 0.1 * (trial % 8);
    const auto samples = oracle::random_label_sets(rng, n, 5 + trial);
    const auto a = kss::statistical_adjacency(kss::cooccurrence_counts(oracle::to_annotations(samples, n), n), t);
    EXPECT_TRUE(oracle::bitwise_equal(a, oracle::statistical(samples, n, t)));
  }
}

TEST(StatisticalAdjacency, SyntheticConditionalsMatchGenerator) {
  kss::SyntheticConfig cfg;
  cfg.samples = 20000;
  cfg.height = cfg.width = 6;
  cfg.seed = 3;
  const auto ds = kss::make_synthetic_dataset(cfg);
  const auto p = kss::conditional_probabilities(kss::cooccurrence_counts(ds.annotations, cfg.labels()));
  for (std::size_t i = 0; i < cfg.labels(); ++i)
    for (std::size_t j = 0; j < cfg.labels(); ++j)
      if (i != j) EXPECT_NEAR(p(i, j), cfg.conditional(i, j), 0.03) << i << "," << j;
}

TEST(KnowledgeAdjacency, MaxOverRelations) {
  kss::KnowledgeEdgeList e;
  e.triples = {{0, 1, "UsedFor", 0.5}, {0, 1, "IsA", 1.0}};
  EXPECT_EQ(kss::knowledge_adjacency(e, 2), mat2(0, 1, 1, 0));
}

TEST(KnowledgeAdjacency, NoRelation) {
  EXPECT_EQ(kss::knowledge_adjacency({}, 2), AdjacencyMatrix(2, 2));
}

TEST(KnowledgeAdjacency, SingleRelation) {
  kss::KnowledgeEdgeList e;
  e.triples = {{1, 0, "RelatedTo", 0.7}};
  EXPECT_EQ(kss::knowledge_adjacency(e, 2), mat2(0, 0.7, 0.7, 0));
}

TEST(KnowledgeAdjacency, ReverseDirectionJoinsTheMax) {
  kss::KnowledgeEdgeList e;
  e.triples = {{0, 1, "a", 0.2}, {1, 0, "b", 0.9}};
  EXPECT_EQ(kss::knowledge_adjacency(e, 2), mat2(0, 0.9, 0.9, 0));
}

TEST(KnowledgeAdjacency, Errors) {
  kss::KnowledgeEdgeList e;
  e.triples = {{0, 2, "a", 0.2}};
  EXPECT_THROW(kss::knowledge_adjacency(e, 2), kss::ValidationError);
  e.triples = {{0, 1, "a", -0.2}};
  EXPECT_THROW(kss::knowledge_adjacency(e, 2), kss::ValidationError);
}

TEST(KnowledgeAdjacency, MatchesBruteForce) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + trial % 8;
    const auto triples = oracle::random_triples(rng, n, trial);
    EXPECT_TRUE(oracle::bitwise_equal(kss::knowledge_adjacency(oracle::to_edges(triples), n),
                                      oracle::knowledge(triples, n)));
  }
}

TEST(Normalize, Identity) { EXPECT_EQ(kss::normalize(AdjacencyMatrix::identity(2)), AdjacencyMatrix::identity(2)); }

TEST(Normalize, HandComputed) { EXPECT_LE(max_diff(kss::normalize(mat2(0, 2, 2, 0)), mat2(0, 1, 1, 0)), 1e-15); }

TEST(Normalize, ZeroDegreeRowStaysZero) {
  AdjacencyMatrix a(3, 3, {1, 0, 1, 0, 0, 0, 1, 0, 1});
  const auto n = kss::normalize(a);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(n(1, k), 0.0);
    EXPECT_EQ(n(k, 1), 0.0);
  }
  EXPECT_DOUBLE_EQ(n(0, 2), 0.5);
}

TEST(Normalize, NonSquareIsShapeError) { EXPECT_THROW(kss::normalize(AdjacencyMatrix(2, 3)), kss::ShapeError); }

TEST(Normalize, MatchesOracle) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_symmetric(rng, 1 + trial % 12);
    EXPECT_LE(oracle::max_abs_diff(kss::normalize(a), oracle::normalize(oracle::dense(a))), 1e-15);
  }
}

TEST(Normalize, EigenvaluesInUnitInterval) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 12;
    auto a = random_symmetric(rng, n);
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 0.01;  // positive degrees
    const auto an = kss::normalize(a);
    Eigen::MatrixXd m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) = an(i, j);
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues();
    EXPECT_GE(ev.minCoeff(), -1.0 - 1e-9);
    EXPECT_LE(ev.maxCoeff(), 1.0 + 1e-9);
  }
}

TEST(Superimpose, Endpoints) {
  const auto s = mat2(0, 1, 1, 0), k = mat2(0, 0.5, 0.5, 0);
  EXPECT_EQ(kss::superimpose(s, k, 1.0), s);
  EXPECT_EQ(kss::superimpose(s, k, 0.0), k);
}

TEST(Superimpose, HandComputed) {
  const auto a = kss::superimpose(mat2(0, 1, 1, 0), mat2(0, 0.5, 0.5, 0), 0.4);
  EXPECT_DOUBLE_EQ(a(0, 1), 0.7);
  EXPECT_DOUBLE_EQ(a(1, 0), 0.7);
  EXPECT_EQ(a(0, 0), 0.0);
}

TEST(Superimpose, Errors) {
  EXPECT_THROW(kss::superimpose(AdjacencyMatrix(2, 2), AdjacencyMatrix(3, 3), 0.5), kss::ShapeError);
  EXPECT_THROW(kss::superimpose(AdjacencyMatrix(2, 2), AdjacencyMatrix(2, 2), 1.5), kss::ValidationError);
  EXPECT_THROW(kss::superimpose(AdjacencyMatrix(2, 2), AdjacencyMatrix(2, 2), -0.1), kss::ValidationError);
}

TEST(Superimpose, ConvexAndSymmetric) {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 9;
    const auto s = random_symmetric(rng, n), k = random_symmetric(rng, n);
    const auto a = kss::superimpose(s, k, u(rng));
    EXPECT_TRUE(symmetric(a));
    for (std::size_t i = 0; i < n * n; ++i) {
      EXPECT_GE(a.values()[i], std::min(s.values()[i], k.values()[i]));
      EXPECT_LE(a.values()[i], std::max(s.values()[i], k.values()[i]));
    }
  }
}

TEST(ThresholdFilter, ZeroTauIsIdentity) {
  std::mt19937_64 rng(41);
  const auto a = random_symmetric(rng, 6);
  EXPECT_EQ(kss::threshold_filter(a, 0.0), a);
}

TEST(ThresholdFilter, BelowAndAtTau) {
  EXPECT_EQ(kss::threshold_filter(mat2(0, 0.15, 0.15, 0), 0.2), AdjacencyMatrix(2, 2));
  EXPECT_EQ(kss::threshold_filter(mat2(0, 0.2, 0.2, 0), 0.2), mat2(0, 0.2, 0.2, 0));
}

TEST(ThresholdFilter, NegativeTauRejected) {
  EXPECT_THROW(kss::threshold_filter(AdjacencyMatrix(2, 2), -0.1), kss::ValidationError);
}

TEST(ThresholdFilter, IdempotentMonotoneSymmetric) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_symmetric(rng, 2 + trial % 9, 0.8);
    std::size_t previous = a.size() + 1;
    for (double tau = 0.0; tau <= 1.0; tau += 0.05) {
      const auto f = kss::threshold_filter(a, tau);
      EXPECT_EQ(kss::threshold_filter(f, tau), f);
      EXPECT_TRUE(symmetric(f));
      const auto nnz = kss::summarize(f).nnz;
      EXPECT_LE(nnz, previous);
      previous = nnz;
    }
  }
}

TEST(IdentityMix, Endpoints) {
  const auto a = mat2(0, 1, 1, 0);
  EXPECT_EQ(kss::identity_mix(a, 1.0), a);
  EXPECT_EQ(kss::identity_mix(a, 0.0), AdjacencyMatrix::identity(2));
}

TEST(IdentityMix, HandComputed) {
  const auto a = kss::identity_mix(mat2(0, 1, 1, 0), 0.4);
  EXPECT_DOUBLE_EQ(a(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(a(0, 1), 0.4);
  EXPECT_DOUBLE_EQ(a(1, 0), 0.4);
  EXPECT_DOUBLE_EQ(a(1, 1), 0.6);
}

TEST(IdentityMix, DiagonalAndOffDiagonal) {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 8;
    const auto a = random_symmetric(rng, n);
    const double eta = u(rng);
    const auto m = kss::identity_mix(a, eta);
    EXPECT_TRUE(symmetric(m));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        EXPECT_EQ(m(i, j), i == j ? eta * a(i, i) + (1.0 - eta) : eta * a(i, j));
  }
}

TEST(IdentityMix, Errors) {
  EXPECT_THROW(kss::identity_mix(AdjacencyMatrix(2, 3), 0.5), kss::ShapeError);
  EXPECT_THROW(kss::identity_mix(AdjacencyMatrix(2, 2), 1.1), kss::ValidationError);
}

TEST(EdgeSet, Examples) {
  using Edges = std::vector<std::pair<std::size_t, std::size_t>>;
  EXPECT_EQ(kss::edge_set(AdjacencyMatrix::identity(2)), (Edges{{0, 0}, {1, 1}}));
  EXPECT_TRUE(kss::edge_set(AdjacencyMatrix(2, 2)).empty());
  EXPECT_EQ(kss::edge_set(mat2(0.6, 0.4, 0, 0.6)), (Edges{{0, 0}, {0, 1}, {1, 1}}));
  const auto s = kss::summarize(mat2(0.6, 0.4, 0, 0.6));
  EXPECT_EQ(s.off_diagonal_edges, 1u);
  EXPECT_EQ(s.edges, 3u);
  EXPECT_FALSE(s.symmetric);
}

TEST(Summarize, Degrees) {
  const auto s = kss::summarize(AdjacencyMatrix(3, 3, {1, 1, 0, 1, 1, 1, 0, 1, 0}));
  EXPECT_EQ(s.n, 3u);
  EXPECT_EQ(s.nnz, 6u);
  EXPECT_EQ(s.off_diagonal_edges, 4u);
  EXPECT_TRUE(s.symmetric);
  EXPECT_EQ(s.min_degree, 1.0);
  EXPECT_EQ(s.max_degree, 3.0);
  EXPECT_DOUBLE_EQ(s.mean_degree, 2.0);
}

TEST(Pipeline, PureStatisticalPath) {
  std::mt19937_64 rng(53);
  const auto samples = oracle::random_label_sets(rng, 6, 40);
  const auto ann = oracle::to_annotations(samples, 6);
  const auto edges = oracle::to_edges(oracle::random_triples(rng, 6, 8));
  kss::GraphPipelineConfig cfg{1.0, 0.0, 1.0};
  const auto g = kss::build_ks_graph(ann, edges, 6, cfg);
  EXPECT_EQ(g.ks, kss::normalize(kss::statistical_adjacency(kss::cooccurrence_counts(ann, 6), 0.4)));
}

TEST(Pipeline, IdentityEndpoint) {
  std::mt19937_64 rng(59);
  const auto ann = oracle::to_annotations(oracle::random_label_sets(rng, 5, 30), 5);
  const auto edges = oracle::to_edges(oracle::random_triples(rng, 5, 8));
  const auto g = kss::build_ks_graph(ann, edges, 5, {0.0, 0.0, 0.0});
  EXPECT_EQ(g.ks, AdjacencyMatrix::identity(5));
  EXPECT_EQ(g.ks_normalized, AdjacencyMatrix::identity(5));
}

TEST(Pipeline, SyntheticFiveLabelsMatchesOracle) {
  std::mt19937_64 rng(61);
  const auto samples = oracle::random_label_sets(rng, 5, 200);
  const auto triples = oracle::random_triples(rng, 5, 12);
  const auto g = kss::build_ks_graph(oracle::to_annotations(samples, 5), oracle::to_edges(triples), 5, {});
  const auto ref = oracle::ks_pipeline(samples, triples, 5, 0.4, 0.02, 0.4, 0.4);
  EXPECT_LE(oracle::max_abs_diff(g.ks, ref.ks), 1e-12);
  EXPECT_LE(oracle::max_abs_diff(g.ks_normalized, ref.ks_normalized), 1e-12);
}

TEST(Pipeline, RandomMatchesOracleBothPlacements) {
  std::mt19937_64 rng(67);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 10;
    const auto samples = oracle::random_label_sets(rng, n, 10 + trial % 30);
    const auto triples = oracle::random_triples(rng, n, trial % 12);
    kss::GraphPipelineConfig cfg{u(rng), 0.1 * u(rng), u(rng), u(rng)};
    const bool after = trial % 2 == 1;
    if (after) cfg.placement = kss::NormalizationPlacement::kAfterSuperimpose;
    const auto g = kss::build_ks_graph(oracle::to_annotations(samples, n), oracle::to_edges(triples), n, cfg);
    const auto ref = oracle::ks_pipeline(samples, triples, n, cfg.lambda, cfg.tau, cfg.eta, cfg.binarize_threshold,
                                         after);
    EXPECT_LE(oracle::max_abs_diff(g.ks, ref.ks), 1e-12);
    EXPECT_LE(oracle::max_abs_diff(g.ks_normalized, ref.ks_normalized), 1e-12);
  }
}

TEST(Pipeline, KnowledgeOnlyGraphIsSymmetricThroughout) {
  std::mt19937_64 rng(71);
  const auto triples = oracle::random_triples(rng, 7, 15);
  const auto g = kss::build_ks_graph(kss::AnnotationSet(7), oracle::to_edges(triples), 7, {});
  for (const auto* m : {&g.knowledge, &g.knowledge_normalized, &g.superimposed, &g.filtered, &g.ks,
                        &g.ks_normalized})
    EXPECT_TRUE(symmetric(*m));
}

TEST(Pipeline, PermutationConjugates) {
  std::mt19937_64 rng(73);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + trial % 9;
    const auto samples = oracle::random_label_sets(rng, n, 30);
    const auto triples = oracle::random_triples(rng, n, 10);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    oracle::LabelSets ps;
    for (const auto& s : samples) {
      std::set<std::size_t> t;
      for (auto l : s) t.insert(perm[l]);
      ps.push_back(t);
    }
    auto pt = triples;
    for (auto& t : pt) {
      t.head = perm[t.head];
      t.tail = perm[t.tail];
    }
    const auto g = kss::build_ks_graph(oracle::to_annotations(samples, n), oracle::to_edges(triples), n, {});
    const auto gp = kss::build_ks_graph(oracle::to_annotations(ps, n), oracle::to_edges(pt), n, {});
    EXPECT_EQ(gp.statistical, conjugate(g.statistical, perm));
    EXPECT_EQ(gp.knowledge, conjugate(g.knowledge, perm));
    EXPECT_LE(max_diff(gp.ks, conjugate(g.ks, perm)), 1e-12);
    EXPECT_LE(max_diff(gp.ks_normalized, conjugate(g.ks_normalized, perm)), 1e-12);
  }
}

TEST(Pipeline, ConfigValidation) {
  kss::AnnotationSet ann(2);
  EXPECT_THROW(kss::build_ks_graph(ann, {}, 2, {1.5, 0.0, 0.5}), kss::ValidationError);
  EXPECT_THROW(kss::build_ks_graph(ann, {}, 2, {0.5, -1.0, 0.5}), kss::ValidationError);
  EXPECT_THROW(kss::build_ks_graph(ann, {}, 2, {0.5, 0.0, 2.0}), kss::ValidationError);
  EXPECT_THROW(kss::build_ks_graph(ann, {}, 3, {}), kss::ValidationError);
}

TEST(Serialization, TextRoundTripIsExact) {
  support::TempDir dir;
  std::mt19937_64 rng(79);
  const auto a = kss::normalize(random_symmetric(rng, 9));
  kss::save_matrix_text(a, dir.file("a.txt"));
  EXPECT_EQ(kss::load_matrix_text(dir.file("a.txt")), a);
  EXPECT_EQ(kss::load_adjacency(dir.file("a.txt")), a);
  const auto first = support::read_file(dir.file("a.txt"));
  EXPECT_EQ(first.substr(0, 2), "9\n");
}

TEST(Serialization, RectangularText) {
  support::TempDir dir;
  const Matrix<double> m(2, 3, {1, 2, 3, 4, 5, 6.5});
  kss::save_matrix_text(m, dir.file("m.txt"));
  EXPECT_EQ(support::read_file(dir.file("m.txt")).substr(0, 4), "2 3\n");
  EXPECT_EQ(kss::load_matrix_text(dir.file("m.txt")), m);
}

TEST(Serialization, BinaryRoundTrip) {
  support::TempDir dir;
  std::mt19937_64 rng(83);
  const auto a = kss::normalize(random_symmetric(rng, 7));
  kss::save_adjacency_binary(a, dir.file("a.bin"));
  EXPECT_TRUE(kss::has_adjacency_magic(dir.file("a.bin")));
  EXPECT_EQ(kss::load_adjacency_binary(dir.file("a.bin")), a);
  EXPECT_EQ(kss::load_adjacency(dir.file("a.bin")), a);
  EXPECT_EQ(support::read_file(dir.file("a.bin")).size(), 8u + 4u + 8u + 49u * 8u);
}

TEST(Serialization, TextErrors) {
  EXPECT_THROW(kss::parse_matrix_text({}), kss::FormatError);
  EXPECT_THROW(kss::parse_matrix_text({"2", "1 0", "0"}), kss::FormatError);
  EXPECT_THROW(kss::parse_matrix_text({"2", "1 0"}), kss::FormatError);
  EXPECT_THROW(kss::parse_matrix_text({"1", "1", "2"}), kss::FormatError);
  EXPECT_THROW(kss::parse_matrix_text({"1", "abc"}), kss::FormatError);
  EXPECT_THROW(kss::parse_matrix_text({"x"}), kss::FormatError);
}

TEST(Serialization, BinaryErrors) {
  support::TempDir dir;
  support::write_file(dir.file("bad.bin"), "NOTMAGIC1234");
  EXPECT_THROW(kss::load_adjacency_binary(dir.file("bad.bin")), kss::FormatError);
  kss::save_adjacency_binary(AdjacencyMatrix::identity(3), dir.file("ok.bin"));
  auto bytes = support::read_file(dir.file("ok.bin"));
  support::write_file(dir.file("short.bin"), bytes.substr(0, bytes.size() - 4));
  EXPECT_THROW(kss::load_adjacency_binary(dir.file("short.bin")), kss::FormatError);
  bytes[8] = 9;
  support::write_file(dir.file("version.bin"), bytes);
  EXPECT_THROW(kss::load_adjacency_binary(dir.file("version.bin")), kss::FormatError);
  EXPECT_THROW(kss::save_adjacency_binary(AdjacencyMatrix(2, 3), dir.file("x.bin")), kss::ShapeError);
  EXPECT_THROW(kss::load_adjacency(dir.file("missing.txt")), kss::FormatError);
}
