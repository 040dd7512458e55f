#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <numeric>

#include "support.hpp"

using namespace ancka;
using namespace ancka::testing;

namespace {

struct Prepared {
  KnnGraph knn;
  WalkOperator op;
};

Prepared prepare(const AttributedNetwork& net, Index K, double beta, double alpha = 0.2, int gamma = 3) {
  KnnGraph kg = build_knn_graph(net.attributes(), K, KnnMode::Exact);
  WalkOperator op(net, knn_transition(kg), beta, alpha, gamma);
  return {std::move(kg), std::move(op)};
}

double residual(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  return (p * q - q * (q.transpose() * p * q)).norm();
}

// Two 4-cliques on interleaved ids so that the two lowest ids (the
// degree-tie winners) fall in different cliques.
AttributedNetwork interleaved_cliques(bool block_attributes) {
  std::vector<Edge> e;
  const std::array<std::array<NodeId, 4>, 2> cl{{{0, 2, 4, 6}, {1, 3, 5, 7}}};
  for (const auto& c : cl) {
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) e.emplace_back(c[a], c[b]);
    }
  }
  if (!block_attributes) return graph(8, e);
  std::vector<std::vector<double>> x(8);
  for (Index i = 0; i < 8; ++i) x[i] = i % 2 ? std::vector<double>{0, 1} : std::vector<double>{1, 0};
  return graph(8, e, false, attrs(x));
}

}  // namespace

// normalize_bcm -------------------------------------------------------------

TEST(NormalizeBcm, Examples) {
  const DenseBlock y = normalize_bcm(BcmMatrix({0, 0, 1, 1}, 2));
  EXPECT_DOUBLE_EQ(y(0, 0), 1 / std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(y(3, 1), 1 / std::sqrt(2.0));
  EXPECT_EQ(y(0, 1), 0.0);
  EXPECT_LT((y.transpose() * y - Eigen::MatrixXd::Identity(2, 2)).norm(), 1e-15);

  const DenseBlock one = normalize_bcm(BcmMatrix({0, 0, 0, 0, 0}, 1));
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(one(i, 0), 1 / std::sqrt(5.0));

  const DenseBlock single = normalize_bcm(BcmMatrix({0, 1, 0}, 2));
  EXPECT_EQ(single(1, 1), 1.0);
}

TEST(NormalizeBcm, EmptyClusterIsAnError) {
  EXPECT_THROW(normalize_bcm(BcmMatrix({0, 0, 2}, 3)), RuntimeFailure);
}

// calc_mhc ------------------------------------------------------------------

TEST(CalcMhc, SingleClusterIsGeometricTail) {
  Gen g(1);
  auto net = g.network(NetworkKind::Graph, 15);
  auto p = prepare(net, 3, 0.5);
  // Every row of P sums to one, so F = (1 - 0.8^4) Yhat.
  EXPECT_NEAR(calc_mhc(p.op, BcmMatrix(std::vector<NodeId>(15, 0), 1)), 0.4096, 1e-12);
}

TEST(CalcMhc, IsolatedCliquesWithoutAttributeWalk) {
  auto net = interleaved_cliques(false);
  auto p = prepare(net, 3, 0.0);
  EXPECT_NEAR(calc_mhc(p.op, BcmMatrix({0, 1, 0, 1, 0, 1, 0, 1}, 2)), 0.4096, 1e-12);
  // Any split that cuts a clique leaks mass.
  EXPECT_GT(calc_mhc(p.op, BcmMatrix({0, 0, 0, 0, 1, 1, 1, 1}, 2)), 0.5);
}

TEST(CalcMhc, MatchesBruteOracle) {
  for (int s = 0; s < 30; ++s) {
    Gen g(100 + s);
    const NetworkKind kind = kind_of(s);
    auto net = g.network(kind, 20, s % 4 == 1);
    const double beta = std::array<double, 3>{0.0, 0.5, 1.0}[s % 3];
    const int gamma = 1 + s % 3;
    auto p = prepare(net, 4, beta, 0.2, gamma);
    const Eigen::MatrixXd S = dense_S_oracle(dense_transition_oracle(net, p.knn.adjacency, beta), 0.2, gamma);
    const BcmMatrix y = g.assignment(20, 1 + s % 4);
    EXPECT_NEAR(calc_mhc(p.op, y), brute_mhc_oracle(S, y), 1e-9) << "seed " << s;
  }
}

TEST(CalcMhc, EmptyClusterIsAnError) {
  auto p = prepare(interleaved_cliques(false), 3, 0.5);
  EXPECT_THROW(calc_mhc(p.op, BcmMatrix({0, 0, 0, 0, 0, 0, 0, 0}, 2)), RuntimeFailure);
}

// init_bcm ------------------------------------------------------------------

TEST(InitBcm, StarHypergraphSingleCenter) {
  auto net = hypergraph(6, {{0, 1, 2}, {0, 3}, {0, 4, 5}});
  auto p = prepare(net, 2, 0.5);
  const BcmMatrix y = init_bcm(p.op, 1, 25, 0.2);
  EXPECT_EQ(y.assignment, std::vector<NodeId>(6, 0));
}

TEST(InitBcm, CliquesMatchDenseRwr) {
  auto net = interleaved_cliques(false);
  auto p = prepare(net, 3, 0.5);
  const BcmMatrix y = init_bcm(p.op, 2, 25, 0.2);

  // Independent dense RWR on the clique walk: each neighbor gets 1/3.
  Eigen::MatrixXd pn = Eigen::MatrixXd::Zero(8, 8);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      if (i != j && i % 2 == j % 2) pn(i, j) = 1.0 / 3.0;
    }
  }
  Eigen::MatrixXd pi0 = Eigen::MatrixXd::Zero(2, 8);
  pi0(0, 0) = 0.2;
  pi0(1, 1) = 0.2;
  Eigen::MatrixXd pi = pi0;
  for (int t = 0; t < 25; ++t) pi = 0.8 * pi * pn + pi0;
  for (int j = 0; j < 8; ++j) {
    const NodeId expect = pi(1, j) > pi(0, j) ? 1 : 0;
    EXPECT_EQ(y.assignment[j], expect) << j;
    EXPECT_EQ(y.assignment[j], static_cast<NodeId>(j % 2)) << j;
  }
}

TEST(InitBcm, UnreachedNodeGoesToFirstCenter) {
  // Centers 0 and 3 (degree 2); node 6 is isolated.
  auto net = graph(7, {{0, 1}, {0, 2}, {3, 4}, {3, 5}});
  auto p = prepare(net, 2, 0.5);
  const BcmMatrix y = init_bcm(p.op, 2, 25, 0.2);
  EXPECT_EQ(y.assignment, (std::vector<NodeId>{0, 0, 0, 1, 1, 1, 0}));
}

TEST(InitBcm, TooFewDegreeNodesFallsBackToIndexOrder) {
  auto net = graph(4, {{2, 3}});
  auto p = prepare(net, 2, 0.5);
  WarningLog log;
  const BcmMatrix y = init_bcm(p.op, 3, 25, 0.2);
  EXPECT_TRUE(log.contains("nonzero degree"));
  EXPECT_FALSE(y.has_empty_cluster());
  EXPECT_EQ(pick_centers(p.op.degrees(), 3), (std::vector<NodeId>{0, 2, 3}));
}

TEST(InitBcm, KAboveNIsRejected) {
  auto p = prepare(interleaved_cliques(false), 3, 0.5);
  EXPECT_THROW(init_bcm(p.op, 9, 25, 0.2), ValidationError);
}

// orthogonal_step -----------------------------------------------------------

TEST(OrthogonalStep, IdentityWalkKeepsSubspace) {
  // No edges and no attributes: every node self-loops, so P = I.
  RawNetwork r;
  r.kind = NetworkKind::Graph;
  r.n = 6;
  r.layers = {{}};
  r.attributes = AttributeMatrix::from_triplets(6, 2, {});
  ScopedWarningSink quiet(nullptr);
  auto net = build_network(r);
  auto p = prepare(net, 2, 0.5);
  Gen g(3);
  std::mt19937_64 rng(0);
  const DenseBlock q = thin_qr(g.block(6, 3), rng).q;
  const DenseBlock next = orthogonal_step(p.op, q, rng).q;
  EXPECT_LT((next * next.transpose() - q * q.transpose()).norm(), 1e-10);
}

TEST(OrthogonalStep, PathConvergesToInvariantSubspace) {
  std::vector<std::vector<double>> x{{1, 0.1}, {0.9, 0.5}, {0.4, 0.8}, {0.2, 1}, {0.7, 0.3}};
  auto net = graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}, false, attrs(x));
  auto p = prepare(net, 2, 0.5);
  const Eigen::MatrixXd P = dense_transition_oracle(net, p.knn.adjacency, 0.5);

  // The residual bound needs a gap after the third eigenvalue.
  Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(P).eigenvalues();
  std::vector<double> mag(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) mag[i] = std::abs(ev[i]);
  std::sort(mag.rbegin(), mag.rend());
  ASSERT_LT(std::pow(mag[3] / mag[2], 500), 1e-8);

  Gen g(5);
  std::mt19937_64 rng(1);
  DenseBlock q = thin_qr(g.block(5, 3), rng).q;
  for (int t = 0; t < 500; ++t) q = orthogonal_step(p.op, q, rng).q;
  EXPECT_LT(residual(P, q), 1e-6);
}

TEST(OrthogonalStep, OnesColumnStaysPut) {
  Gen g(6);
  auto net = g.network(NetworkKind::Hypergraph, 25);
  auto p = prepare(net, 4, 0.5);
  std::mt19937_64 rng(2);
  DenseBlock z = g.block(25, 4);
  z.col(0).setConstant(1.0);
  DenseBlock q = thin_qr(z, rng).q;
  for (int t = 0; t < 20; ++t) {
    q = orthogonal_step(p.op, q, rng).q;
    EXPECT_LT((q.col(0).array() - 1.0 / 5.0).abs().maxCoeff(), 1e-12);
  }
}

TEST(OrthogonalStep, StaysOrthonormal) {
  for (int s = 0; s < 20; ++s) {
    Gen g(200 + s);
    auto net = g.network(kind_of(s), 40, s % 2 == 1);
    auto p = prepare(net, 5, 0.5);
    std::mt19937_64 rng(s);
    DenseBlock q = thin_qr(g.block(40, 4), rng).q;
    for (int t = 0; t < 50; ++t) {
      QrStep st = orthogonal_step(p.op, q, rng);
      q = st.q;
      ASSERT_LT((q.transpose() * q - Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-8) << s << " " << t;
      for (Eigen::Index j = 0; j < 4; ++j) ASSERT_GE(st.r(j, j), 0.0);
    }
  }
}

TEST(OrthogonalStep, DependentColumnIsPerturbed) {
  Gen g(9);
  std::mt19937_64 rng(3);
  DenseBlock z = g.block(10, 3);
  z.col(2) = z.col(0);
  const QrStep st = thin_qr(z, rng);
  EXPECT_GE(st.perturbed_columns, 1);
  EXPECT_LT((st.q.transpose() * st.q - Eigen::MatrixXd::Identity(3, 3)).norm(), 1e-8);

  auto p = prepare(interleaved_cliques(false), 3, 0.5);
  DenseBlock q(8, 2);
  q.col(0).setConstant(1 / std::sqrt(8.0));
  q.col(1) = q.col(0);
  WarningLog log;
  orthogonal_step(p.op, q, rng);
  EXPECT_TRUE(log.contains("perturbed"));
}

// discretize ----------------------------------------------------------------

TEST(Discretize, OneHotInputIsFixedPoint) {
  DenseBlock q = DenseBlock::Zero(9, 3);
  for (Eigen::Index i = 0; i < 9; ++i) q(i, i % 3) = 1.0;
  const DiscretizeResult d = discretize(q);
  for (Index i = 0; i < 9; ++i) EXPECT_EQ(d.y.assignment[i], i % 3);
  EXPECT_TRUE(d.converged);
  EXPECT_EQ(d.iterations, 1);
  // ||Y - QR||^2 = 2n - 2 trace(Omega) = 0 at a perfect match.
  EXPECT_NEAR(d.objective.back(), -9.0, 1e-12);
}

TEST(Discretize, RecoversRotatedPlantedPartition) {
  int recovered = 0;
  for (int s = 0; s < 50; ++s) {
    Gen g(300 + s);
    std::vector<NodeId> y0(12);
    for (Index i = 0; i < 12; ++i) y0[i] = static_cast<NodeId>(i % 3);
    std::shuffle(y0.begin(), y0.end(), g.engine());
    DenseBlock onehot = DenseBlock::Zero(12, 3);
    for (Index i = 0; i < 12; ++i) onehot(i, y0[i]) = 1.0;
    const DenseBlock q = onehot * g.orthogonal(3);
    const DiscretizeResult d = discretize(q);
    // Permutation search.
    std::array<NodeId, 3> perm{0, 1, 2};
    bool hit = false;
    do {
      bool all = true;
      for (Index i = 0; i < 12 && all; ++i) all = perm[d.y.assignment[i]] == y0[i];
      hit = hit || all;
    } while (std::next_permutation(perm.begin(), perm.end()));
    recovered += hit;
  }
  EXPECT_GE(recovered, 48);
}

TEST(Discretize, SingleCluster) {
  Gen g(11);
  const DiscretizeResult d = discretize(g.block(7, 1));
  EXPECT_EQ(d.y.assignment, std::vector<NodeId>(7, 0));
}

TEST(Discretize, ZeroRowGoesToClusterZero) {
  Gen g(12);
  DenseBlock q = g.block(8, 2);
  q.row(3).setZero();
  WarningLog log;
  const DiscretizeResult d = discretize(q, {.repair_empty = false});
  EXPECT_EQ(d.zero_rows, 1u);
  EXPECT_TRUE(log.contains("all-zero row"));
  // The zero row scores 0 everywhere and the argmax tie goes to column 0.
  EXPECT_EQ(d.y.assignment[3], 0u);
}

TEST(Discretize, ObjectiveNeverIncreases) {
  for (int s = 0; s < 200; ++s) {
    Gen g(400 + s);
    const Index n = g.range(5, 60);
    const Index k = g.range(2, std::min<Index>(6, n));
    const DiscretizeResult d = discretize(g.block(n, k));
    for (std::size_t i = 1; i < d.objective.size(); ++i) {
      ASSERT_LE(d.objective[i], d.objective[i - 1] + 1e-9) << "seed " << s << " step " << i;
    }
    EXPECT_FALSE(d.y.has_empty_cluster()) << s;
  }
}

// run_ancka -----------------------------------------------------------------

TEST(RunAncka, TwoCliquesPerfectClustering) {
  auto net = interleaved_cliques(true);
  ClusterParams params;
  params.k = 2;
  params.knn_k = 3;
  const ClusterResult r = run_ancka(net, params);
  ASSERT_FALSE(r.error);
  std::vector<Label> truth{0, 1, 0, 1, 0, 1, 0, 1};
  EXPECT_DOUBLE_EQ(evaluate(r.y.assignment, truth).acc, 1.0);
}

TEST(RunAncka, KEqualsNIsDegenerateButFine) {
  auto net = interleaved_cliques(true);
  ClusterParams params;
  params.k = 8;
  params.knn_k = 3;
  const ClusterResult r = run_ancka(net, params);
  EXPECT_FALSE(r.error);
  EXPECT_EQ(r.termination, Termination::Degenerate);
  EXPECT_EQ(r.y.cluster_sizes(), std::vector<Index>(8, 1));
}

TEST(RunAncka, InvalidParamsAreRejected) {
  auto net = interleaved_cliques(true);
  ClusterParams params;
  params.knn_k = 3;
  params.alpha = 1.0;
  EXPECT_THROW(run_ancka(net, params), ValidationError);
  params.alpha = 0.2;
  params.k = 9;
  EXPECT_THROW(run_ancka(net, params), ValidationError);
}

TEST(RunAncka, ReturnsBestSample) {
  for (int s = 0; s < 15; ++s) {
    Gen g(500 + s);
    auto net = g.network(kind_of(s), 40);
    auto p = prepare(net, 5, 0.5);
    ClusterParams params;
    params.k = 3;
    params.knn_k = 5;
    params.t_a = 60;
    params.seed = s;
    const ClusterResult r = run_ancka(p.op, params);
    ASSERT_FALSE(r.error) << r.error_message;
    EXPECT_LE(r.mhc, r.init_mhc);
    for (const auto& h : r.mhc_history) EXPECT_LE(r.mhc, h.mhc);
    EXPECT_NEAR(r.mhc, calc_mhc(p.op, r.y), 1e-12);
    EXPECT_FALSE(r.y.has_empty_cluster());
  }
}

TEST(RunAncka, SameSeedSameAnswer) {
  Gen g(13);
  auto net = g.network(NetworkKind::Hypergraph, 50);
  ClusterParams params;
  params.k = 3;
  params.knn_k = 5;
  params.seed = 7;
  const ClusterResult a = run_ancka(net, params);
  const ClusterResult b = run_ancka(net, params);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.mhc_history.size(), b.mhc_history.size());
}

TEST(RunAncka, ConvergedBlockIsNearlyInvariant) {
  // Only instances where the stopping rule actually fires say anything.
  int fired = 0;
  for (int s = 0; s < 40; ++s) {
    Gen g(600 + s);
    auto net = g.network(kind_of(s), 30);
    auto p = prepare(net, 5, 0.5);
    const Eigen::MatrixXd P = dense_transition_oracle(net, p.knn.adjacency, 0.5);
    ClusterParams params;
    params.k = 2;
    params.knn_k = 5;
    params.eps_q = 1e-6;
    params.t_a = 5000;
    params.tau = 1;
    params.seed = s;
    DenseBlock last;
    EngineOptions eo;
    eo.on_step = [&](int, const DenseBlock& q) { last = q; };
    ScopedWarningSink quiet(nullptr);
    const ClusterResult r = run_ancka(p.op, params, eo);
    if (r.termination != Termination::Converged) continue;
    ++fired;
    EXPECT_LT(residual(P, last), 10 * params.eps_q) << "seed " << s;
  }
  EXPECT_GT(fired, 0);
}
