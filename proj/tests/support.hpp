#pragma once

// Hand-rolled random instance generators and small helpers shared by the
// test binaries.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ancka/ancka.hpp"

namespace ancka::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
  Index range(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng_); }
  bool coin(double p) { return uniform() < p; }
  std::mt19937_64& engine() { return rng_; }

  // n x d attributes: each row nonzero with probability 1 - p_zero; entries
  // are nonnegative (or signed) and sparse with density `density`.
  AttributeMatrix attributes(Index n, Index d, double p_zero = 0.1, double density = 0.6, bool signed_values = false) {
    std::vector<Triplet<double>> t;
    for (Index i = 0; i < n; ++i) {
      if (coin(p_zero)) continue;
      bool any = false;
      for (Index j = 0; j < d; ++j) {
        if (coin(density) || (j + 1 == d && !any)) {
          double v = signed_values ? normal() : 0.05 + uniform();
          if (v == 0.0) v = 0.5;
          t.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j), v});
          any = true;
        }
      }
    }
    return AttributeMatrix::from_triplets(n, d, std::move(t), DuplicatePolicy::Error);
  }

  std::vector<Edge> edges(Index n, double p, bool directed) {
    std::vector<Edge> e;
    for (Index u = 0; u < n; ++u) {
      for (Index v = directed ? 0 : u + 1; v < n; ++v) {
        if (u != v && coin(p)) e.emplace_back(u, v);
      }
    }
    return e;
  }

  std::vector<std::vector<NodeId>> hyperedges(Index n, Index m, Index max_size) {
    std::vector<std::vector<NodeId>> out;
    for (Index e = 0; e < m; ++e) {
      const Index s = range(2, std::min(max_size, n));
      std::vector<NodeId> nodes(n);
      for (Index i = 0; i < n; ++i) nodes[i] = static_cast<NodeId>(i);
      std::shuffle(nodes.begin(), nodes.end(), rng_);
      nodes.resize(s);
      out.push_back(std::move(nodes));
    }
    return out;
  }

  // A random cleaned network of the given kind. Sparse enough that some
  // nodes end up isolated, with a few zero attribute rows.
  AttributedNetwork network(NetworkKind kind, Index n, bool directed = false) {
    RawNetwork raw;
    raw.kind = kind;
    raw.directed = directed;
    raw.n = n;
    switch (kind) {
      case NetworkKind::Hypergraph:
        raw.hyperedges = hyperedges(n, range(1, n), 5);
        break;
      case NetworkKind::Graph:
        raw.layers.push_back(edges(n, 2.5 / double(n), directed));
        break;
      case NetworkKind::Multiplex: {
        const Index layers = range(2, 3);
        for (Index l = 0; l < layers; ++l) raw.layers.push_back(edges(n, 2.0 / double(n), false));
        break;
      }
    }
    raw.attributes = attributes(n, range(2, 8), 0.1);
    ScopedWarningSink quiet(nullptr);
    return build_network(raw);
  }

  BcmMatrix assignment(Index n, Index k) {
    std::vector<NodeId> a(n);
    for (Index i = 0; i < n; ++i) a[i] = static_cast<NodeId>(i < k ? i : range(0, k - 1));
    std::shuffle(a.begin(), a.end(), rng_);
    return BcmMatrix(std::move(a), k);
  }

  DenseBlock block(Index rows, Index cols) {
    DenseBlock m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = normal();
    }
    return m;
  }

  Eigen::MatrixXd orthogonal(Index k) {
    Eigen::MatrixXd a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    return qr.householderQ();
  }

 private:
  std::mt19937_64 rng_;
};

inline NetworkKind kind_of(int i) {
  switch (i % 3) {
    case 0: return NetworkKind::Hypergraph;
    case 1: return NetworkKind::Graph;
    default: return NetworkKind::Multiplex;
  }
}

// Dense row-stochastic check on every nonzero row.
inline double worst_row_sum_error(const SparseRowMatrix& m) {
  double worst = 0.0;
  for (Index i = 0; i < m.rows(); ++i) {
    if (m.row_nnz(i) == 0) continue;
    worst = std::max(worst, std::abs(m.row_sum(i) - 1.0));
  }
  return worst;
}

// True when a and b are the same partition up to relabelling.
inline bool same_partition(const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
  if (a.size() != b.size()) return false;
  std::vector<long> fwd, bwd;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (fwd.size() <= a[i]) fwd.resize(a[i] + 1, -1);
    if (bwd.size() <= b[i]) bwd.resize(b[i] + 1, -1);
    if (fwd[a[i]] < 0) fwd[a[i]] = b[i];
    if (bwd[b[i]] < 0) bwd[b[i]] = a[i];
    if (fwd[a[i]] != long(b[i]) || bwd[b[i]] != long(a[i])) return false;
  }
  return true;
}

inline std::vector<NodeId> to_ids(const std::vector<Label>& l) { return {l.begin(), l.end()}; }

// Small hand-built networks.
inline AttributeMatrix attrs(const std::vector<std::vector<double>>& rows) {
  std::vector<Triplet<double>> t;
  for (Index i = 0; i < rows.size(); ++i) {
    for (Index j = 0; j < rows[i].size(); ++j) {
      if (rows[i][j] != 0.0) t.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j), rows[i][j]});
    }
  }
  return AttributeMatrix::from_triplets(rows.size(), rows[0].size(), t);
}

inline AttributeMatrix const_attrs(Index n) { return attrs(std::vector<std::vector<double>>(n, {1.0, 0.0})); }

inline AttributedNetwork graph(Index n, std::vector<Edge> e, bool directed = false, AttributeMatrix x = {}) {
  RawNetwork r;
  r.kind = NetworkKind::Graph;
  r.directed = directed;
  r.n = n;
  r.layers = {std::move(e)};
  r.attributes = x.rows() ? x : const_attrs(n);
  return build_network(r);
}

inline AttributedNetwork hypergraph(Index n, std::vector<std::vector<NodeId>> e, AttributeMatrix x = {}) {
  RawNetwork r;
  r.kind = NetworkKind::Hypergraph;
  r.n = n;
  r.hyperedges = std::move(e);
  r.attributes = x.rows() ? x : const_attrs(n);
  return build_network(r);
}

inline AttributedNetwork multiplex(Index n, std::vector<std::vector<Edge>> layers) {
  RawNetwork r;
  r.kind = NetworkKind::Multiplex;
  r.n = n;
  r.layers = std::move(layers);
  r.attributes = const_attrs(n);
  return build_network(r);
}

inline KnnTransition knn_of(const AttributedNetwork& net, Index k) {
  return knn_transition(build_knn_graph(net.attributes(), k, KnnMode::Exact));
}

inline Eigen::MatrixXd identity_block(Index n) { return Eigen::MatrixXd::Identity(Eigen::Index(n), Eigen::Index(n)); }

// Collects warnings for inspection.
struct WarningLog {
  std::vector<std::string> messages;
  ScopedWarningSink sink{[this](const std::string& m) { messages.push_back(m); }};
  bool contains(const std::string& needle) const {
    return std::any_of(messages.begin(), messages.end(),
                       [&](const std::string& m) { return m.find(needle) != std::string::npos; });
  }
};

}  // namespace ancka::testing
