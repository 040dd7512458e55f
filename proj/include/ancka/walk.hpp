#pragma once

// Transition operators of the (alpha, beta, gamma)-random walk over a
// KNN-augmented network. The joint matrix
//
//   P = (I - B) P_N + B P_K
//
// is never formed: products with a dense block go through the sparse
// factors, and for hypergraphs P_N M is evaluated as P_V (P_E M).

#include <algorithm>
#include <string>
#include <vector>

#include "ancka/error.hpp"
#include "ancka/knn.hpp"
#include "ancka/network.hpp"
#include "ancka/sparse.hpp"

namespace ancka {

// beta_i = 0 when node i has no attribute route (zero attribute row or empty
// KNN row), else 1 when it has no structural edge, else beta.
inline std::vector<double> beta_vector(const AttributedNetwork& net, const std::vector<bool>& knn_empty_row,
                                       double beta) {
  if (knn_empty_row.size() != net.n()) throw ValidationError("KNN flags do not match node count");
  const auto deg = node_degrees(net);
  std::vector<double> b(net.n());
  for (Index i = 0; i < net.n(); ++i) {
    const bool zero_attr = net.attributes().row(i).empty() ||
                           std::all_of(net.attributes().row(i).values.begin(), net.attributes().row(i).values.end(),
                                       [](double v) { return v == 0.0; });
    if (zero_attr || knn_empty_row[i]) {
      b[i] = 0.0;
    } else if (deg.total[i] == 0.0) {
      b[i] = 1.0;
    } else {
      b[i] = beta;
    }
  }
  return b;
}

struct HypergraphFactors {
  SparseRowMatrix p_v;  // n x m, D_V^{-1} H^T
  SparseRowMatrix p_e;  // m x n, D_E^{-1} H
};

inline HypergraphFactors hypergraph_factors(const AttributedNetwork& net) {
  if (net.kind() != NetworkKind::Hypergraph) throw ValidationError("hypergraph_factors needs a hypergraph");
  return {row_normalized(net.incidence().transpose()), row_normalized(net.incidence())};
}

// D^{-1} A on the symmetrized pattern for directed input.
inline SparseRowMatrix graph_transition(const AttributedNetwork& net) {
  if (net.kind() != NetworkKind::Graph) throw ValidationError("graph_transition needs a graph");
  const SparseRowMatrix a = net.directed() ? symmetrized_pattern(net.adjacency()) : net.adjacency();
  return row_normalized(a);
}

// Per-layer D_l^{-1} A_l. Averaging happens when the operator is applied.
inline std::vector<SparseRowMatrix> multiplex_transition(const AttributedNetwork& net) {
  if (net.kind() != NetworkKind::Multiplex) throw ValidationError("multiplex_transition needs a multiplex graph");
  std::vector<SparseRowMatrix> out;
  out.reserve(net.layers().size());
  for (const auto& layer : net.layers()) out.push_back(row_normalized(layer));
  return out;
}

class WalkOperator {
 public:
  // `knn` supplies P_K and the empty-row flags; `beta` is the global weight
  // that beta_vector specializes per node. Nodes with neither a structural
  // nor an attribute route get a self-loop in P_N.
  WalkOperator(const AttributedNetwork& net, const KnnTransition& knn, double beta, double alpha, int gamma)
      : kind_(net.kind()), n_(net.n()), alpha_(alpha), gamma_(gamma) {
    if (knn.transition.rows() != n_ || knn.transition.cols() != n_) {
      throw ValidationError("P_K dimensions do not match network");
    }
    beta_ = beta_vector(net, knn.empty_row, beta);
    p_k_ = knn.transition;
    p_k_t_ = p_k_.transpose();
    switch (kind_) {
      case NetworkKind::Hypergraph: {
        auto f = hypergraph_factors(net);
        p_v_ = std::move(f.p_v);
        p_e_ = std::move(f.p_e);
        p_v_t_ = p_v_.transpose();
        p_e_t_ = p_e_.transpose();
        break;
      }
      case NetworkKind::Graph:
        layers_.push_back(graph_transition(net));
        break;
      case NetworkKind::Multiplex:
        layers_ = multiplex_transition(net);
        break;
    }
    for (const auto& l : layers_) layers_t_.push_back(l.transpose());
    const auto deg = node_degrees(net);
    self_loop_.assign(n_, false);
    for (Index i = 0; i < n_; ++i) self_loop_[i] = deg.total[i] == 0.0 && beta_[i] == 0.0;
    degrees_ = deg.total;
  }

  NetworkKind kind() const { return kind_; }
  Index n() const { return n_; }
  double alpha() const { return alpha_; }
  int gamma() const { return gamma_; }
  const std::vector<double>& beta() const { return beta_; }
  const std::vector<double>& degrees() const { return degrees_; }
  const std::vector<bool>& self_loops() const { return self_loop_; }
  const SparseRowMatrix& p_k() const { return p_k_; }
  const SparseRowMatrix& p_v() const { return p_v_; }
  const SparseRowMatrix& p_e() const { return p_e_; }
  const std::vector<SparseRowMatrix>& layer_transitions() const { return layers_; }

  // P_N M.
  DenseBlock apply_structure(const DenseBlock& m) const {
    check_rows(m);
    DenseBlock out;
    if (kind_ == NetworkKind::Hypergraph) {
      const DenseBlock edge_side = spmm(p_e_, m);
      spmm(p_v_, edge_side, out);
    } else {
      average_layers(layers_, m, out);
    }
    add_self_loops(m, out);
    return out;
  }

  // P_N^T M, used by the row-vector walks of the initializer.
  DenseBlock apply_structure_transposed(const DenseBlock& m) const {
    check_rows(m);
    DenseBlock out;
    if (kind_ == NetworkKind::Hypergraph) {
      const DenseBlock edge_side = spmm(p_v_t_, m);
      spmm(p_e_t_, edge_side, out);
    } else {
      average_layers(layers_t_, m, out);
    }
    add_self_loops(m, out);
    return out;
  }

  // (I - B) P_N M + B P_K M.
  DenseBlock apply(const DenseBlock& m) const {
    DenseBlock out = apply_structure(m);
    const DenseBlock attr = spmm(p_k_, m);
    for (Index i = 0; i < n_; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      out.row(r) = (1.0 - beta_[i]) * out.row(r) + beta_[i] * attr.row(r);
    }
    return out;
  }

  // P^T M = P_N^T (I - B) M + P_K^T B M.
  DenseBlock apply_transposed(const DenseBlock& m) const {
    check_rows(m);
    DenseBlock scaled_n = m;
    DenseBlock scaled_k = m;
    for (Index i = 0; i < n_; ++i) {
      scaled_n.row(static_cast<Eigen::Index>(i)) *= 1.0 - beta_[i];
      scaled_k.row(static_cast<Eigen::Index>(i)) *= beta_[i];
    }
    DenseBlock out = apply_structure_transposed(scaled_n);
    out += spmm(p_k_t_, scaled_k);
    return out;
  }

 private:
  void check_rows(const DenseBlock& m) const {
    if (static_cast<Index>(m.rows()) != n_) {
      throw ValidationError("walk operator expects " + std::to_string(n_) + " rows, got " + std::to_string(m.rows()));
    }
  }

  void average_layers(const std::vector<SparseRowMatrix>& layers, const DenseBlock& m, DenseBlock& out) const {
    spmm(layers.front(), m, out);
    if (layers.size() == 1) return;
    DenseBlock tmp;
    for (std::size_t l = 1; l < layers.size(); ++l) {
      spmm(layers[l], m, tmp);
      out += tmp;
    }
    out /= static_cast<double>(layers.size());
  }

  void add_self_loops(const DenseBlock& m, DenseBlock& out) const {
    for (Index i = 0; i < n_; ++i) {
      if (self_loop_[i]) out.row(static_cast<Eigen::Index>(i)) += m.row(static_cast<Eigen::Index>(i));
    }
  }

  NetworkKind kind_;
  Index n_;
  double alpha_;
  int gamma_;
  std::vector<double> beta_;
  std::vector<double> degrees_;
  std::vector<bool> self_loop_;
  SparseRowMatrix p_k_, p_k_t_;
  SparseRowMatrix p_v_, p_e_, p_v_t_, p_e_t_;
  std::vector<SparseRowMatrix> layers_, layers_t_;
};

inline DenseBlock apply_joint_transition(const WalkOperator& op, const DenseBlock& m) { return op.apply(m); }

}  // namespace ancka
