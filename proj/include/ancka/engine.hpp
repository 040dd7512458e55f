#pragma once

// The clustering loop: greedy initialization from random-walk-with-restart
// scores, orthogonal iteration on the joint walk operator, periodic rounding
// of the eigenvector block and multi-hop conductance (MHC) bookkeeping.

#include <Eigen/Dense>
#include <Eigen/QR>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ancka/discretize.hpp"
#include "ancka/error.hpp"
#include "ancka/knn.hpp"
#include "ancka/network.hpp"
#include "ancka/sparse.hpp"
#include "ancka/walk.hpp"

namespace ancka {

// Column c holds 1/sqrt(|C_c|) on the members of cluster c.
inline DenseBlock normalize_bcm(const BcmMatrix& y) {
  const auto sizes = y.cluster_sizes();
  for (Index c = 0; c < y.k; ++c) {
    if (sizes[c] == 0) throw RuntimeFailure("cluster " + std::to_string(c) + " is empty");
  }
  DenseBlock out = DenseBlock::Zero(static_cast<Eigen::Index>(y.n()), static_cast<Eigen::Index>(y.k));
  for (Index i = 0; i < y.n(); ++i) {
    const auto c = y.assignment[i];
    out(static_cast<Eigen::Index>(i), c) = 1.0 / std::sqrt(static_cast<double>(sizes[c]));
  }
  return out;
}

// phi = 1 - (1/k) trace(Yhat^T F) with F = alpha sum_{l<=gamma} ((1-alpha) P)^l Yhat,
// evaluated by gamma applications of the joint operator.
inline double calc_mhc(const WalkOperator& op, const BcmMatrix& y) {
  const DenseBlock yhat = normalize_bcm(y);
  const DenseBlock f0 = op.alpha() * yhat;
  DenseBlock f = f0;
  for (int l = 1; l <= op.gamma(); ++l) f = (1.0 - op.alpha()) * op.apply(f) + f0;
  double trace = 0.0;
  for (Index i = 0; i < y.n(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const auto c = static_cast<Eigen::Index>(y.assignment[i]);
    trace += yhat(r, c) * f(r, c);
  }
  return 1.0 - trace / static_cast<double>(y.k);
}

// k nodes of largest degree (ties to the smaller id), returned sorted by id.
inline std::vector<NodeId> pick_centers(const std::vector<double>& degrees, Index k) {
  std::vector<NodeId> order(degrees.size());
  std::iota(order.begin(), order.end(), NodeId{0});
  std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return degrees[a] > degrees[b]; });
  order.resize(k);
  const auto positive = static_cast<Index>(std::count_if(degrees.begin(), degrees.end(), [](double d) { return d > 0; }));
  if (positive < k) {
    warn("only " + std::to_string(positive) + " nodes have nonzero degree; " + std::to_string(k - positive) +
         " initial center(s) taken in index order");
  }
  std::sort(order.begin(), order.end());
  return order;
}

// Greedy initial assignment: t_i steps of the structure-only walk with
// restart from each center, then every node joins the center that reaches
// it with the highest score (ties to the lower center rank).
inline BcmMatrix init_bcm(const WalkOperator& op, Index k, int t_i, double alpha) {
  const Index n = op.n();
  if (k > n) throw ValidationError("k exceeds node count");
  const auto centers = pick_centers(op.degrees(), k);
  // Pi is kept transposed (n x k) so the row-vector walk Pi P_N becomes P_N^T Pi^T.
  DenseBlock pi0 = DenseBlock::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (Index l = 0; l < k; ++l) pi0(centers[l], static_cast<Eigen::Index>(l)) = alpha;
  DenseBlock pi = pi0;
  for (int t = 0; t < t_i; ++t) pi = (1.0 - alpha) * op.apply_structure_transposed(pi) + pi0;
  std::vector<NodeId> assign = detail::row_argmax(pi);
  // A center always keeps its own cluster alive.
  std::vector<Index> sizes(k, 0);
  for (NodeId c : assign) ++sizes[c];
  for (Index l = 0; l < k; ++l) {
    if (sizes[l] == 0) {
      --sizes[assign[centers[l]]];
      assign[centers[l]] = static_cast<NodeId>(l);
      ++sizes[l];
    }
  }
  return BcmMatrix(std::move(assign), k);
}

struct QrStep {
  DenseBlock q;
  Eigen::MatrixXd r;
  int perturbed_columns = 0;
};

// Thin QR with diag(R) >= 0. Columns whose R diagonal vanishes (linearly
// dependent on the earlier ones) get seeded noise of size 1e-8 and the
// factorization is redone.
inline QrStep thin_qr(DenseBlock z, std::mt19937_64& rng) {
  const auto rows = z.rows();
  const auto cols = z.cols();
  if (cols > rows) throw RuntimeFailure("thin QR needs at least as many rows as columns");
  QrStep out;
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int attempt = 0;; ++attempt) {
    const Eigen::MatrixXd zd = z;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(zd);
    Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
    const double scale = std::max(1.0, r.diagonal().cwiseAbs().maxCoeff());
    std::vector<Eigen::Index> bad;
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (std::abs(r(j, j)) <= 1e-10 * scale) bad.push_back(j);
    }
    if (!bad.empty() && attempt < 3) {
      for (Eigen::Index j : bad) {
        Eigen::VectorXd v(rows);
        for (Eigen::Index i = 0; i < rows; ++i) v[i] = noise(rng);
        z.col(j) += 1e-8 * v / v.norm();
      }
      out.perturbed_columns += static_cast<int>(bad.size());
      continue;
    }
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (r(j, j) < 0) {
        q.col(j) = -q.col(j);
        r.row(j) = -r.row(j);
      }
    }
    out.q = q;
    out.r = std::move(r);
    return out;
  }
}

// Z = P Q_prev followed by the sign-normalized thin QR.
inline QrStep orthogonal_step(const WalkOperator& op, const DenseBlock& q_prev, std::mt19937_64& rng) {
  QrStep s = thin_qr(op.apply(q_prev), rng);
  if (s.perturbed_columns > 0) {
    warn("rank-deficient block in orthogonal iteration; perturbed " + std::to_string(s.perturbed_columns) +
         " column(s)");
  }
  return s;
}

struct Timings {
  double knn_ms = 0;
  double init_ms = 0;
  double ortho_ms = 0;
  double discretize_ms = 0;
  double mhc_ms = 0;
  double total_ms = 0;
};

enum class Termination { Converged, EarlyStop, MaxIterations, Degenerate, Error };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::EarlyStop: return "early_stop";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::Degenerate: return "degenerate";
    case Termination::Error: return "error";
  }
  return "unknown";
}

struct MhcSample {
  int iteration;
  double mhc;
};

struct ClusterResult {
  BcmMatrix y;
  double mhc = std::numeric_limits<double>::infinity();
  int iterations = 0;
  Timings timings;
  Termination termination = Termination::MaxIterations;
  std::vector<MhcSample> mhc_history;  // every tau-th iteration
  double init_mhc = std::numeric_limits<double>::infinity();
  double last_q_delta = std::numeric_limits<double>::infinity();
  KnnMode knn_mode_used = KnnMode::Exact;
  bool error = false;
  std::string error_message;
};

namespace detail {
class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// phi_{t-2tau} < phi_{t-tau} < phi_t over the last three samples.
inline bool rising_three(const std::vector<MhcSample>& h) {
  if (h.size() < 3) return false;
  const auto n = h.size();
  return h[n - 3].mhc < h[n - 2].mhc && h[n - 2].mhc < h[n - 1].mhc;
}
}  // namespace detail

struct EngineOptions {
  DiscretizeOptions discretize{.max_iter = 100, .tol = 1e-10, .scaling = ColumnScaling::None, .repair_empty = true};
  // Invoked after every orthogonal step with (t, Q); for diagnostics.
  std::function<void(int, const DenseBlock&)> on_step;
};

// Main loop on a prepared operator. Returns the lowest-MHC assignment seen.
inline ClusterResult run_ancka(const WalkOperator& op, const ClusterParams& params, const EngineOptions& eopt = {}) {
  params.validate(op.n());
  const Index n = op.n();
  const Index k = params.k;
  ClusterResult res;
  detail::Stopwatch total;
  std::mt19937_64 rng(params.seed);

  if (k == n) {
    std::vector<NodeId> id(n);
    std::iota(id.begin(), id.end(), NodeId{0});
    res.y = BcmMatrix(std::move(id), k);
    res.mhc = calc_mhc(op, res.y);
    res.init_mhc = res.mhc;
    res.termination = Termination::Degenerate;
    res.timings.total_ms = total.ms();
    return res;
  }

  try {
    detail::Stopwatch sw;
    BcmMatrix y0 = init_bcm(op, k, params.t_i, params.alpha);
    res.timings.init_ms = sw.ms();

    detail::Stopwatch mw;
    res.y = y0;
    res.mhc = calc_mhc(op, y0);
    res.init_mhc = res.mhc;
    res.timings.mhc_ms += mw.ms();

    DenseBlock q(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k + 1));
    q.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
    q.rightCols(static_cast<Eigen::Index>(k)) = normalize_bcm(y0);

    res.termination = Termination::MaxIterations;
    for (int t = 1; t <= params.t_a; ++t) {
      detail::Stopwatch ow;
      QrStep step = orthogonal_step(op, q, rng);
      res.last_q_delta = (step.q - q).norm();
      q = std::move(step.q);
      res.timings.ortho_ms += ow.ms();
      res.iterations = t;
      if (eopt.on_step) eopt.on_step(t, q);
      if (t % params.tau != 0) continue;

      detail::Stopwatch dw;
      DiscretizeResult d = discretize(q.rightCols(static_cast<Eigen::Index>(k)), eopt.discretize);
      res.timings.discretize_ms += dw.ms();
      if (d.y.has_empty_cluster()) {
        warn("discretization left an empty cluster at iteration " + std::to_string(t) + "; sample skipped");
        continue;
      }
      detail::Stopwatch hw;
      const double phi = calc_mhc(op, d.y);
      res.timings.mhc_ms += hw.ms();
      res.mhc_history.push_back({t, phi});
      if (phi < res.mhc) {
        res.mhc = phi;
        res.y = std::move(d.y);
      }
      if (res.last_q_delta < params.eps_q) {
        res.termination = Termination::Converged;
        break;
      }
      if (detail::rising_three(res.mhc_history)) {
        res.termination = Termination::EarlyStop;
        break;
      }
    }
  } catch (const RuntimeFailure& e) {
    res.error = true;
    res.error_message = e.what();
    res.termination = Termination::Error;
  }
  res.timings.total_ms = total.ms();
  return res;
}

struct PreparedWalk {
  KnnGraph knn;
  std::optional<WalkOperator> op;
  double knn_ms = 0;
};

// Builds the KNN graph and the walk operator for `net`.
inline PreparedWalk prepare_walk(const AttributedNetwork& net, const ClusterParams& params) {
  PreparedWalk p;
  detail::Stopwatch sw;
  p.knn = build_knn_graph(net.attributes(), params.knn_k, params.knn_mode, params.recall_target, params.seed);
  p.knn_ms = sw.ms();
  p.op.emplace(net, knn_transition(p.knn), params.beta, params.alpha, params.gamma);
  return p;
}

// End-to-end run on a network.
inline ClusterResult run_ancka(const AttributedNetwork& net, const ClusterParams& params,
                               const EngineOptions& eopt = {}) {
  params.validate(net.n());
  detail::Stopwatch total;
  PreparedWalk prep;
  try {
    prep = prepare_walk(net, params);
  } catch (const RuntimeFailure& e) {
    ClusterResult r;
    r.error = true;
    r.error_message = std::string("KNN construction failed: ") + e.what();
    r.termination = Termination::Error;
    return r;
  }
  ClusterResult res = run_ancka(*prep.op, params, eopt);
  res.timings.knn_ms = prep.knn_ms;
  res.knn_mode_used = prep.knn.mode_used;
  res.timings.total_ms = total.ms();
  return res;
}

}  // namespace ancka
