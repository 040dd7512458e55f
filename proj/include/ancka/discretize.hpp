#pragma once

// Rounding of a continuous n x k eigenvector block to a one-hot cluster
// matrix by alternating between a row-wise argmax (rotation fixed) and an
// orthogonal Procrustes update of the rotation (assignment fixed).

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ancka/error.hpp"
#include "ancka/network.hpp"
#include "ancka/sparse.hpp"

namespace ancka {

// How Y is scaled column-wise before the rotation update.
enum class ColumnScaling {
  None,      // Y itself: the Procrustes step then minimizes ||Y - Q~R||_F exactly
  UnitSum,   // divide each column by its size
  UnitNorm,  // divide each column by the square root of its size
};

struct DiscretizeOptions {
  int max_iter = 100;
  double tol = 1e-10;
  ColumnScaling scaling = ColumnScaling::None;
  // Re-seed empty clusters from the nodes scoring highest on them.
  bool repair_empty = true;
};

struct DiscretizeResult {
  BcmMatrix y;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective;  // n - 2 trace(Omega), one entry per update
  Index zero_rows = 0;
  Index repaired_clusters = 0;
};

namespace detail {

inline std::vector<NodeId> row_argmax(const DenseBlock& s) {
  std::vector<NodeId> a(static_cast<Index>(s.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < s.cols(); ++c) {
      if (s(i, c) > s(i, best)) best = c;
    }
    a[static_cast<Index>(i)] = static_cast<NodeId>(best);
  }
  return a;
}

// Moves nodes into empty clusters: for each empty cluster c, the node with the
// highest score on c whose own cluster keeps at least one other member.
inline Index repair_empty_clusters(std::vector<NodeId>& assign, const DenseBlock& scores) {
  const auto k = static_cast<Index>(scores.cols());
  std::vector<Index> sizes(k, 0);
  for (NodeId c : assign) ++sizes[c];
  Index repaired = 0;
  for (Index c = 0; c < k; ++c) {
    if (sizes[c] != 0) continue;
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      if (sizes[assign[static_cast<Index>(i)]] < 2) continue;
      if (best < 0 || scores(i, static_cast<Eigen::Index>(c)) > scores(best, static_cast<Eigen::Index>(c))) best = i;
    }
    if (best < 0) break;
    --sizes[assign[static_cast<Index>(best)]];
    assign[static_cast<Index>(best)] = static_cast<NodeId>(c);
    ++sizes[c];
    ++repaired;
  }
  return repaired;
}

}  // namespace detail

inline DiscretizeResult discretize(const DenseBlock& q, const DiscretizeOptions& opt = {}) {
  const auto n = q.rows();
  const auto k = q.cols();
  if (k < 1) throw ValidationError("discretize needs at least one column");
  DiscretizeResult res;

  DenseBlock qt = q;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double nr = qt.row(i).norm();
    if (nr > 0.0) {
      qt.row(i) /= nr;
    } else {
      ++res.zero_rows;
    }
  }
  if (res.zero_rows > 0) warn(std::to_string(res.zero_rows) + " all-zero row(s) in eigenvector block; assigned to cluster 0");

  // Procrustes update for a fixed assignment: returns obj, sets rot.
  auto rotate = [&](const std::vector<NodeId>& a, Eigen::MatrixXd& rot_out) {
    std::vector<double> sizes(static_cast<Index>(k), 0.0);
    for (NodeId c : a) sizes[c] += 1.0;
    // Ytilde^T Qtilde accumulated row by row.
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      const NodeId c = a[static_cast<Index>(i)];
      double w = 1.0;
      if (opt.scaling == ColumnScaling::UnitSum) w = 1.0 / sizes[c];
      if (opt.scaling == ColumnScaling::UnitNorm) w = 1.0 / std::sqrt(sizes[c]);
      m.row(c) += w * qt.row(i);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    rot_out = svd.matrixV() * svd.matrixU().transpose();
    return static_cast<double>(n) - 2.0 * svd.singularValues().sum();
  };

  Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(k, k);
  std::vector<NodeId> assign;
  DenseBlock scores;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opt.max_iter; ++it) {
    scores = qt * rot;
    assign = detail::row_argmax(scores);
    Eigen::MatrixXd next_rot;
    double obj = rotate(assign, next_rot);
    if (opt.repair_empty) {
      // An empty cluster leaves a null direction in the SVD and the
      // iteration can stall at a saddle; re-seeding gets it moving. The
      // repaired assignment is kept only if it does not raise the objective.
      std::vector<NodeId> repaired = assign;
      const Index moved = detail::repair_empty_clusters(repaired, scores);
      if (moved > 0) {
        Eigen::MatrixXd alt_rot;
        const double alt = rotate(repaired, alt_rot);
        if (alt <= prev) {
          assign = std::move(repaired);
          next_rot = std::move(alt_rot);
          obj = alt;
          res.repaired_clusters += moved;
        }
      }
    }
    rot = std::move(next_rot);
    res.objective.push_back(obj);
    if (std::abs(prev - obj) < opt.tol) {
      res.converged = true;
      break;
    }
    prev = obj;
  }
  res.iterations = static_cast<int>(res.objective.size()) - (res.converged ? 1 : 0);
  if (opt.repair_empty) {
    // Whatever is still empty at the end is filled without regard to obj.
    const Index late = detail::repair_empty_clusters(assign, scores);
    res.repaired_clusters += late;
  }
  if (res.repaired_clusters > 0) {
    warn("re-seeded " + std::to_string(res.repaired_clusters) + " empty cluster(s) during discretization");
  }
  res.y = BcmMatrix(std::move(assign), static_cast<Index>(k));
  return res;
}

}  // namespace ancka
