#pragma once

// Attributed hypergraphs, graphs and multiplex graphs, plus load-time
// cleanup and degree statistics.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ancka/error.hpp"
#include "ancka/sparse.hpp"

namespace ancka {

// n x d node attributes. Values may be any finite real; stored sparsely so
// bag-of-words inputs stay small.
using AttributeMatrix = CsrMatrix<double>;

enum class NetworkKind { Hypergraph, Graph, Multiplex };

inline std::string to_string(NetworkKind k) {
  switch (k) {
    case NetworkKind::Hypergraph: return "hypergraph";
    case NetworkKind::Graph: return "graph";
    case NetworkKind::Multiplex: return "multiplex";
  }
  return "unknown";
}

using Edge = std::pair<NodeId, NodeId>;

// Network as read from disk, before cleanup.
struct RawNetwork {
  NetworkKind kind = NetworkKind::Hypergraph;
  bool directed = false;
  Index n = 0;
  std::vector<std::vector<NodeId>> hyperedges;  // hypergraph only
  std::vector<std::vector<Edge>> layers;        // one for graphs, L for multiplex
  AttributeMatrix attributes;
};

struct ValidationReport {
  Index n = 0;
  Index structure_count = 0;  // hyperedges or edges kept, summed over layers
  Index dropped_hyperedges = 0;
  Index repeated_nodes_in_hyperedges = 0;
  Index duplicate_edges_merged = 0;
  Index self_loops_dropped = 0;
  std::vector<NodeId> isolated_nodes;
  std::vector<NodeId> zero_attr_nodes;

  std::string summary() const {
    std::ostringstream os;
    os << "n=" << n << " kept=" << structure_count << " dropped_hyperedges=" << dropped_hyperedges
       << " duplicate_edges_merged=" << duplicate_edges_merged << " self_loops_dropped=" << self_loops_dropped
       << " isolated=" << isolated_nodes.size() << " zero_attr=" << zero_attr_nodes.size();
    return os.str();
  }
};

// Cleaned network. Immutable once built.
class AttributedNetwork {
 public:
  static AttributedNetwork hypergraph(SparseRowMatrix incidence, AttributeMatrix attributes) {
    AttributedNetwork net;
    net.kind_ = NetworkKind::Hypergraph;
    net.n_ = incidence.cols();
    for (Index e = 0; e < incidence.rows(); ++e) {
      if (incidence.row_nnz(e) < 2) {
        throw ValidationError("hyperedge " + std::to_string(e) + " has fewer than 2 nodes");
      }
    }
    net.incidence_ = std::move(incidence);
    net.attributes_ = std::move(attributes);
    net.check_common();
    return net;
  }

  static AttributedNetwork graph(SparseRowMatrix adjacency, bool directed, AttributeMatrix attributes) {
    AttributedNetwork net;
    net.kind_ = NetworkKind::Graph;
    net.directed_ = directed;
    net.n_ = adjacency.rows();
    if (!directed && !adjacency.structurally_symmetric_equal()) {
      throw ValidationError("undirected adjacency is not symmetric");
    }
    net.layers_.push_back(std::move(adjacency));
    net.attributes_ = std::move(attributes);
    net.check_common();
    return net;
  }

  static AttributedNetwork multiplex(std::vector<SparseRowMatrix> layers, AttributeMatrix attributes) {
    if (layers.empty()) throw ValidationError("multiplex network needs at least one layer");
    AttributedNetwork net;
    net.kind_ = NetworkKind::Multiplex;
    net.n_ = layers.front().rows();
    for (const auto& l : layers) {
      if (l.rows() != net.n_ || l.cols() != net.n_) throw ValidationError("multiplex layers disagree on n");
      if (!l.structurally_symmetric_equal()) throw ValidationError("multiplex layer is not symmetric");
    }
    net.layers_ = std::move(layers);
    net.attributes_ = std::move(attributes);
    net.check_common();
    return net;
  }

  NetworkKind kind() const { return kind_; }
  bool directed() const { return directed_; }
  Index n() const { return n_; }
  Index d() const { return attributes_.cols(); }
  // Hyperedge count for hypergraphs, stored (directed or symmetric) entries
  // otherwise.
  Index m() const {
    if (kind_ == NetworkKind::Hypergraph) return incidence_.rows();
    Index s = 0;
    for (const auto& l : layers_) s += l.nnz();
    return s;
  }
  const SparseRowMatrix& incidence() const { return incidence_; }
  const std::vector<SparseRowMatrix>& layers() const { return layers_; }
  const SparseRowMatrix& adjacency() const { return layers_.front(); }
  const AttributeMatrix& attributes() const { return attributes_; }

 private:
  AttributedNetwork() = default;

  void check_common() const {
    if (attributes_.rows() != n_) {
      throw ValidationError("attribute matrix has " + std::to_string(attributes_.rows()) + " rows, network has " +
                            std::to_string(n_) + " nodes");
    }
    if (!attributes_.all_finite()) throw ValidationError("attribute matrix contains non-finite values");
    if (kind_ == NetworkKind::Hypergraph && !incidence_.all_nonnegative_finite()) {
      throw ValidationError("incidence matrix has negative or non-finite entries");
    }
    for (const auto& l : layers_) {
      if (!l.all_nonnegative_finite()) throw ValidationError("adjacency has negative or non-finite entries");
    }
  }

  NetworkKind kind_ = NetworkKind::Hypergraph;
  bool directed_ = false;
  Index n_ = 0;
  SparseRowMatrix incidence_;
  std::vector<SparseRowMatrix> layers_;
  AttributeMatrix attributes_;
};

// max(A, A^T) on the sparsity pattern, unit weights.
inline SparseRowMatrix symmetrized_pattern(const SparseRowMatrix& a) {
  std::vector<Triplet<double>> t;
  t.reserve(2 * a.nnz());
  for (Index i = 0; i < a.rows(); ++i) {
    for (NodeId j : a.row(i).cols) {
      t.push_back({static_cast<NodeId>(i), j, 1.0});
      t.push_back({j, static_cast<NodeId>(i), 1.0});
    }
  }
  return SparseRowMatrix::from_triplets(a.rows(), a.cols(), std::move(t), DuplicatePolicy::Max);
}

struct DegreeVectors {
  std::vector<std::vector<double>> per_layer;  // empty for hypergraphs and graphs
  std::vector<double> total;
};

// Hypergraph: incident hyperedge count. Graph: degree of the symmetrized
// pattern. Multiplex: per-layer degrees and their sum.
inline DegreeVectors node_degrees(const AttributedNetwork& net) {
  DegreeVectors deg;
  deg.total.assign(net.n(), 0.0);
  switch (net.kind()) {
    case NetworkKind::Hypergraph:
      for (NodeId v : net.incidence().col_idx()) deg.total[v] += 1.0;
      break;
    case NetworkKind::Graph: {
      const SparseRowMatrix a = net.directed() ? symmetrized_pattern(net.adjacency()) : net.adjacency();
      for (Index i = 0; i < net.n(); ++i) deg.total[i] = static_cast<double>(a.row_nnz(i));
      break;
    }
    case NetworkKind::Multiplex:
      for (const auto& layer : net.layers()) {
        std::vector<double> d(net.n());
        for (Index i = 0; i < net.n(); ++i) {
          d[i] = static_cast<double>(layer.row_nnz(i));
          deg.total[i] += d[i];
        }
        deg.per_layer.push_back(std::move(d));
      }
      break;
  }
  return deg;
}

inline std::vector<NodeId> zero_attribute_rows(const AttributeMatrix& x) {
  std::vector<NodeId> z;
  for (Index i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    if (std::all_of(r.values.begin(), r.values.end(), [](double v) { return v == 0.0; })) {
      z.push_back(static_cast<NodeId>(i));
    }
  }
  return z;
}

namespace detail {

struct CleanedStructure {
  std::vector<std::vector<NodeId>> hyperedges;
  std::vector<std::vector<Edge>> layers;
};

inline CleanedStructure clean(const RawNetwork& raw, ValidationReport& rep) {
  CleanedStructure out;
  auto check_id = [&](NodeId v, const std::string& where) {
    if (v >= raw.n) {
      throw ValidationError(where + ": node id " + std::to_string(v) + " out of range for n=" + std::to_string(raw.n));
    }
  };
  if (raw.kind == NetworkKind::Hypergraph) {
    for (std::size_t e = 0; e < raw.hyperedges.size(); ++e) {
      std::vector<NodeId> nodes = raw.hyperedges[e];
      for (NodeId v : nodes) check_id(v, "hyperedge " + std::to_string(e));
      std::sort(nodes.begin(), nodes.end());
      const auto before = nodes.size();
      nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
      rep.repeated_nodes_in_hyperedges += before - nodes.size();
      if (nodes.size() < 2) {
        ++rep.dropped_hyperedges;
        continue;
      }
      out.hyperedges.push_back(std::move(nodes));
    }
    rep.structure_count = out.hyperedges.size();
    return out;
  }
  if (raw.kind == NetworkKind::Multiplex && raw.layers.size() < 2) {
    throw ValidationError("multiplex network needs at least 2 layers, got " + std::to_string(raw.layers.size()));
  }
  if (raw.kind == NetworkKind::Graph && raw.layers.size() != 1) {
    throw ValidationError("graph network needs exactly 1 edge list");
  }
  const bool directed = raw.kind == NetworkKind::Graph && raw.directed;
  for (std::size_t l = 0; l < raw.layers.size(); ++l) {
    std::vector<Edge> edges;
    edges.reserve(raw.layers[l].size());
    for (auto [u, v] : raw.layers[l]) {
      check_id(u, "layer " + std::to_string(l));
      check_id(v, "layer " + std::to_string(l));
      if (u == v) {
        ++rep.self_loops_dropped;
        continue;
      }
      if (!directed && u > v) std::swap(u, v);
      edges.emplace_back(u, v);
    }
    std::sort(edges.begin(), edges.end());
    const auto before = edges.size();
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    rep.duplicate_edges_merged += before - edges.size();
    rep.structure_count += edges.size();
    out.layers.push_back(std::move(edges));
  }
  return out;
}

inline SparseRowMatrix adjacency_from_edges(Index n, const std::vector<Edge>& edges, bool directed) {
  std::vector<Triplet<double>> t;
  t.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    t.push_back({u, v, 1.0});
    if (!directed) t.push_back({v, u, 1.0});
  }
  return SparseRowMatrix::from_triplets(n, n, std::move(t), DuplicatePolicy::Max);
}

inline SparseRowMatrix incidence_from_hyperedges(Index n, const std::vector<std::vector<NodeId>>& hyperedges) {
  std::vector<Index> row_ptr{0};
  std::vector<NodeId> cols;
  for (const auto& e : hyperedges) {
    cols.insert(cols.end(), e.begin(), e.end());
    row_ptr.push_back(cols.size());
  }
  std::vector<double> vals(cols.size(), 1.0);
  return SparseRowMatrix(hyperedges.size(), n, std::move(row_ptr), std::move(cols), std::move(vals));
}

}  // namespace detail

// Cleans the raw structure and returns the network; fills `report` when
// given. Out-of-range ids and shape mismatches throw ValidationError.
inline AttributedNetwork build_network(const RawNetwork& raw, ValidationReport* report = nullptr) {
  ValidationReport rep;
  rep.n = raw.n;
  auto cleaned = detail::clean(raw, rep);
  std::optional<AttributedNetwork> net;
  switch (raw.kind) {
    case NetworkKind::Hypergraph:
      if (cleaned.hyperedges.empty()) throw ValidationError("no hyperedges");
      net = AttributedNetwork::hypergraph(detail::incidence_from_hyperedges(raw.n, cleaned.hyperedges), raw.attributes);
      break;
    case NetworkKind::Graph:
      net = AttributedNetwork::graph(detail::adjacency_from_edges(raw.n, cleaned.layers[0], raw.directed),
                                     raw.directed, raw.attributes);
      break;
    case NetworkKind::Multiplex: {
      std::vector<SparseRowMatrix> layers;
      for (const auto& edges : cleaned.layers) layers.push_back(detail::adjacency_from_edges(raw.n, edges, false));
      net = AttributedNetwork::multiplex(std::move(layers), raw.attributes);
      break;
    }
  }
  const auto deg = node_degrees(*net);
  for (Index i = 0; i < raw.n; ++i) {
    if (deg.total[i] == 0.0) rep.isolated_nodes.push_back(static_cast<NodeId>(i));
  }
  rep.zero_attr_nodes = zero_attribute_rows(net->attributes());
  if (rep.dropped_hyperedges > 0) {
    warn("dropped " + std::to_string(rep.dropped_hyperedges) + " hyperedge(s) with fewer than 2 distinct nodes");
  }
  if (rep.self_loops_dropped > 0) warn("dropped " + std::to_string(rep.self_loops_dropped) + " self-loop(s)");
  if (report) *report = std::move(rep);
  return std::move(*net);
}

// Reports what build_network would clean up, without building.
inline ValidationReport validate_network(const RawNetwork& raw) {
  ValidationReport rep;
  ScopedWarningSink quiet(nullptr);
  build_network(raw, &rep);
  return rep;
}

// Statistics of an already-cleaned network.
inline ValidationReport validate_network(const AttributedNetwork& net) {
  ValidationReport rep;
  rep.n = net.n();
  rep.structure_count = net.m();
  const auto deg = node_degrees(net);
  for (Index i = 0; i < net.n(); ++i) {
    if (deg.total[i] == 0.0) rep.isolated_nodes.push_back(static_cast<NodeId>(i));
  }
  rep.zero_attr_nodes = zero_attribute_rows(net.attributes());
  return rep;
}

// One cluster id per node; the one-hot matrix Y is implicit.
struct BcmMatrix {
  std::vector<NodeId> assignment;
  Index k = 0;

  BcmMatrix() = default;
  BcmMatrix(std::vector<NodeId> a, Index clusters) : assignment(std::move(a)), k(clusters) {
    for (NodeId c : assignment) {
      if (c >= k) throw ValidationError("cluster id " + std::to_string(c) + " outside [0," + std::to_string(k) + ")");
    }
  }

  Index n() const { return assignment.size(); }

  std::vector<Index> cluster_sizes() const {
    std::vector<Index> s(k, 0);
    for (NodeId c : assignment) ++s[c];
    return s;
  }

  bool has_empty_cluster() const {
    const auto s = cluster_sizes();
    return std::find(s.begin(), s.end(), Index{0}) != s.end();
  }

  friend bool operator==(const BcmMatrix&, const BcmMatrix&) = default;
};

enum class KnnMode { Exact, Approx, Auto };

inline std::string to_string(KnnMode m) {
  switch (m) {
    case KnnMode::Exact: return "exact";
    case KnnMode::Approx: return "approx";
    case KnnMode::Auto: return "auto";
  }
  return "unknown";
}

struct ClusterParams {
  double alpha = 0.2;
  double beta = 0.5;
  int gamma = 3;
  Index knn_k = 10;
  Index k = 2;
  double eps_q = 0.005;
  int t_a = 1000;
  int t_i = 25;
  int tau = 5;
  std::uint64_t seed = 0;
  KnnMode knn_mode = KnnMode::Auto;
  double recall_target = 0.9;

  void validate(Index n) const {
    auto fail = [](const std::string& m) { throw ValidationError("invalid parameter: " + m); };
    if (!(alpha > 0.0 && alpha < 1.0)) fail("alpha must lie in (0,1)");
    if (!(beta >= 0.0 && beta <= 1.0)) fail("beta must lie in [0,1]");
    if (gamma < 1) fail("gamma must be >= 1");
    if (k < 1 || k > n) fail("k must lie in [1,n]");
    if (knn_k < 1 || knn_k >= n) fail("K must lie in [1,n)");
    if (!(eps_q >= 0.0)) fail("eps_q must be nonnegative");
    if (t_a < 1) fail("t_a must be >= 1");
    if (t_i < 0) fail("t_i must be >= 0");
    if (tau < 1) fail("tau must be >= 1");
    if (!(recall_target > 0.0 && recall_target <= 1.0)) fail("recall target must lie in (0,1]");
  }
};

// Neighbor count used when the caller does not pick one: 10 for hypergraphs
// and for anything above 100k nodes, 50 for graphs and multiplex graphs.
// Small inputs are capped at n - 1.
inline Index default_knn_k(NetworkKind kind, Index n) {
  const Index k = (n > 100000 || kind == NetworkKind::Hypergraph) ? 10 : 50;
  return std::max<Index>(1, std::min(k, n > 0 ? n - 1 : 1));
}

}  // namespace ancka
