#pragma once

// Dense brute-force reference for small networks. Everything here is built
// from the network definition with plain loops over dense matrices and never
// goes through the sparse factors of WalkOperator, so it can be used to
// check them.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "ancka/error.hpp"
#include "ancka/network.hpp"
#include "ancka/sparse.hpp"

namespace ancka {

inline constexpr Index kDenseOracleMaxNodes = 2000;

inline void check_oracle_size(Index n) {
  if (n > kDenseOracleMaxNodes) {
    throw ValidationError("dense oracle limited to " + std::to_string(kDenseOracleMaxNodes) + " nodes, got " +
                          std::to_string(n));
  }
}

// Dense joint transition matrix P = (I - B) P_N + B P_K, with B, P_N and
// P_K all derived here from the raw structure, the KNN adjacency and beta.
inline Eigen::MatrixXd dense_transition_oracle(const AttributedNetwork& net, const SparseRowMatrix& knn_adjacency,
                                               double beta) {
  const Index n = net.n();
  check_oracle_size(n);
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd pn = Eigen::MatrixXd::Zero(N, N);
  Eigen::VectorXd deg = Eigen::VectorXd::Zero(N);

  auto dense_walk = [&](const Eigen::MatrixXd& adj) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
      const double s = adj.row(i).sum();
      if (s > 0) p.row(i) = adj.row(i) / s;
    }
    return p;
  };

  switch (net.kind()) {
    case NetworkKind::Hypergraph: {
      const Eigen::MatrixXd h = net.incidence().to_dense();  // m x n
      for (Eigen::Index e = 0; e < h.rows(); ++e) {
        const double size = h.row(e).sum();
        for (Eigen::Index i = 0; i < N; ++i) {
          if (h(e, i) == 0) continue;
          deg[i] += 1;
          for (Eigen::Index j = 0; j < N; ++j) {
            if (h(e, j) != 0) pn(i, j) += 1.0 / size;
          }
        }
      }
      for (Eigen::Index i = 0; i < N; ++i) {
        if (deg[i] > 0) pn.row(i) /= deg[i];
      }
      break;
    }
    case NetworkKind::Graph: {
      Eigen::MatrixXd a = net.adjacency().to_dense();
      for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = 0; j < N; ++j) {
          if (a(i, j) != 0 || a(j, i) != 0) a(i, j) = 1.0;
        }
      }
      pn = dense_walk(a);
      deg = a.rowwise().sum();
      break;
    }
    case NetworkKind::Multiplex: {
      for (const auto& layer : net.layers()) {
        const Eigen::MatrixXd a = layer.to_dense();
        pn += dense_walk(a);
        deg += a.rowwise().sum();
      }
      pn /= static_cast<double>(net.layers().size());
      break;
    }
  }

  const Eigen::MatrixXd ak = knn_adjacency.to_dense();
  const Eigen::MatrixXd x = net.attributes().to_dense();
  Eigen::MatrixXd pk = Eigen::MatrixXd::Zero(N, N);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(N, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const double ks = ak.row(i).sum();
    if (ks > 0) pk.row(i) = ak.row(i) / ks;
    double b = beta;
    if (x.row(i).isZero(0.0) || ks == 0) {
      b = 0.0;
    } else if (deg[i] == 0) {
      b = 1.0;
    }
    if (deg[i] == 0 && b == 0.0) pn(i, i) = 1.0;
    p.row(i) = (1.0 - b) * pn.row(i) + b * pk.row(i);
  }
  return p;
}

// S = alpha * sum_{l=0}^{gamma} (1 - alpha)^l P^l.
inline Eigen::MatrixXd dense_S_oracle(const Eigen::MatrixXd& p, double alpha, int gamma) {
  check_oracle_size(static_cast<Index>(p.rows()));
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(p.rows(), p.cols());
  Eigen::MatrixXd s = alpha * term;
  double w = alpha;
  for (int l = 1; l <= gamma; ++l) {
    term = term * p;
    w *= 1.0 - alpha;
    s += w * term;
  }
  return s;
}

// 1 - (1/k) trace(Yhat^T S Yhat) with Yhat formed densely.
inline double brute_mhc_oracle(const Eigen::MatrixXd& s, const BcmMatrix& y) {
  const auto n = static_cast<Eigen::Index>(y.n());
  if (s.rows() != n) throw ValidationError("oracle S does not match assignment length");
  Eigen::MatrixXd yhat = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(y.k));
  const auto sizes = y.cluster_sizes();
  for (Index c = 0; c < y.k; ++c) {
    if (sizes[c] == 0) throw ValidationError("empty cluster " + std::to_string(c) + " in oracle MHC");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = y.assignment[static_cast<Index>(i)];
    yhat(i, c) = 1.0 / std::sqrt(static_cast<double>(sizes[c]));
  }
  return 1.0 - (yhat.transpose() * s * yhat).trace() / static_cast<double>(y.k);
}

// Escape-probability form: mean over clusters of the average S-mass that
// leaves the cluster.
inline double escape_mhc_oracle(const Eigen::MatrixXd& s, const BcmMatrix& y) {
  const auto sizes = y.cluster_sizes();
  double total = 0.0;
  for (Index c = 0; c < y.k; ++c) {
    if (sizes[c] == 0) throw ValidationError("empty cluster in oracle MHC");
    double out = 0.0;
    for (Index i = 0; i < y.n(); ++i) {
      if (y.assignment[i] != c) continue;
      for (Index j = 0; j < y.n(); ++j) {
        if (y.assignment[j] != c) out += s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
    total += out / static_cast<double>(sizes[c]);
  }
  return total / static_cast<double>(y.k);
}

}  // namespace ancka
