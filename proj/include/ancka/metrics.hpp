#pragma once

// Clustering quality: accuracy and macro-F1 under the best one-to-one
// cluster/class matching, NMI and ARI.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ancka/error.hpp"
#include "ancka/network.hpp"

namespace ancka {

using Label = std::uint32_t;

// counts[p][t]: number of nodes with predicted cluster p and true class t.
struct ContingencyTable {
  std::vector<std::vector<std::int64_t>> counts;
  std::vector<std::int64_t> pred_marginal;
  std::vector<std::int64_t> true_marginal;
  std::int64_t total = 0;

  Index k_pred() const { return counts.size(); }
  Index k_true() const { return true_marginal.size(); }

  static ContingencyTable from_counts(std::vector<std::vector<std::int64_t>> c) {
    ContingencyTable t;
    const Index kt = c.empty() ? 0 : c.front().size();
    t.pred_marginal.assign(c.size(), 0);
    t.true_marginal.assign(kt, 0);
    for (Index p = 0; p < c.size(); ++p) {
      if (c[p].size() != kt) throw ValidationError("ragged contingency table");
      for (Index q = 0; q < kt; ++q) {
        if (c[p][q] < 0) throw ValidationError("negative contingency count");
        t.pred_marginal[p] += c[p][q];
        t.true_marginal[q] += c[p][q];
        t.total += c[p][q];
      }
    }
    t.counts = std::move(c);
    return t;
  }
};

inline ContingencyTable contingency(std::span<const Label> pred, std::span<const Label> truth) {
  if (pred.size() != truth.size()) {
    throw ValidationError("prediction has " + std::to_string(pred.size()) + " labels, truth has " +
                          std::to_string(truth.size()));
  }
  const Index kp = pred.empty() ? 0 : *std::max_element(pred.begin(), pred.end()) + Index{1};
  const Index kt = truth.empty() ? 0 : *std::max_element(truth.begin(), truth.end()) + Index{1};
  std::vector<std::vector<std::int64_t>> c(kp, std::vector<std::int64_t>(kt, 0));
  for (Index i = 0; i < pred.size(); ++i) ++c[pred[i]][truth[i]];
  return ContingencyTable::from_counts(std::move(c));
}

inline ContingencyTable contingency(const BcmMatrix& y, std::span<const Label> truth) {
  return contingency(std::span<const Label>(y.assignment), truth);
}

// Minimum-cost assignment on an r x c cost matrix with r <= c (shortest
// augmenting path with potentials). Returns, for every row, its column.
inline std::vector<Index> hungarian_min(const std::vector<std::vector<double>>& cost) {
  const Index r = cost.size();
  if (r == 0) return {};
  const Index c = cost.front().size();
  if (c < r) throw ValidationError("hungarian_min needs rows <= cols");
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based internals; column 0 is the virtual start.
  std::vector<double> u(r + 1, 0.0), v(c + 1, 0.0);
  std::vector<Index> p(c + 1, 0), way(c + 1, 0);
  for (Index i = 1; i <= r; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(c + 1, inf);
    std::vector<char> used(c + 1, 0);
    do {
      used[j0] = 1;
      const Index i0 = p[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= c; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= c; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> row_to_col(r, 0);
  for (Index j = 1; j <= c; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

// Best one-to-one matching of predicted clusters to true classes: most
// agreeing nodes first, then the largest F1 sum among the tied matchings so
// that F1 does not depend on label order.
// match[p] is the class of cluster p, or -1 when p is left unmatched.
inline std::vector<long> best_matching(const ContingencyTable& t) {
  const Index kp = t.k_pred();
  const Index kt = t.k_true();
  std::vector<long> match(kp, -1);
  if (kp == 0 || kt == 0) return match;
  const bool pred_rows = kp <= kt;
  const Index rows = pred_rows ? kp : kt;
  const Index cols = pred_rows ? kt : kp;
  // The F1 term sums to less than one, so it only breaks ties.
  const double tie_weight = 1.0 / static_cast<double>(rows + 1);
  std::vector<std::vector<double>> cost(rows, std::vector<double>(cols));
  for (Index a = 0; a < rows; ++a) {
    for (Index b = 0; b < cols; ++b) {
      const Index p = pred_rows ? a : b;
      const Index q = pred_rows ? b : a;
      const double c = static_cast<double>(t.counts[p][q]);
      const double f1 = c == 0 ? 0.0 : 2.0 * c / static_cast<double>(t.pred_marginal[p] + t.true_marginal[q]);
      cost[a][b] = -(c + tie_weight * f1);
    }
  }
  const auto m = hungarian_min(cost);
  for (Index a = 0; a < rows; ++a) {
    if (pred_rows) {
      match[a] = static_cast<long>(m[a]);
    } else {
      match[m[a]] = static_cast<long>(a);
    }
  }
  return match;
}

inline double accuracy(const ContingencyTable& t) {
  if (t.total == 0) throw ValidationError("accuracy of an empty labelling");
  const auto match = best_matching(t);
  std::int64_t hit = 0;
  for (Index p = 0; p < match.size(); ++p) {
    if (match[p] >= 0) hit += t.counts[p][static_cast<Index>(match[p])];
  }
  return static_cast<double>(hit) / static_cast<double>(t.total);
}

// Per-class F1 against the matched cluster, averaged over true classes.
inline double macro_f1(const ContingencyTable& t) {
  if (t.total == 0) throw ValidationError("F1 of an empty labelling");
  const auto match = best_matching(t);
  std::vector<double> f1(t.k_true(), 0.0);
  for (Index p = 0; p < match.size(); ++p) {
    if (match[p] < 0) continue;
    const auto q = static_cast<Index>(match[p]);
    const double tp = static_cast<double>(t.counts[p][q]);
    if (tp == 0) continue;
    const double prec = tp / static_cast<double>(t.pred_marginal[p]);
    const double rec = tp / static_cast<double>(t.true_marginal[q]);
    f1[q] = 2.0 * prec * rec / (prec + rec);
  }
  double s = 0.0;
  Index classes = 0;
  for (Index q = 0; q < t.k_true(); ++q) {
    if (t.true_marginal[q] == 0) continue;  // label id never used
    s += f1[q];
    ++classes;
  }
  return classes == 0 ? 0.0 : s / static_cast<double>(classes);
}

enum class NmiNorm { Geometric, Arithmetic };

namespace detail {
inline double entropy(const std::vector<std::int64_t>& marginal, double n) {
  double h = 0.0;
  for (auto c : marginal) {
    if (c > 0) {
      const double p = static_cast<double>(c) / n;
      h -= p * std::log(p);
    }
  }
  return h;
}
}  // namespace detail

inline double nmi(const ContingencyTable& t, NmiNorm norm = NmiNorm::Geometric) {
  if (t.total == 0) throw ValidationError("NMI of an empty labelling");
  const double n = static_cast<double>(t.total);
  const double hp = detail::entropy(t.pred_marginal, n);
  const double ht = detail::entropy(t.true_marginal, n);
  if (hp == 0.0 && ht == 0.0) return 1.0;
  if (hp == 0.0 || ht == 0.0) return 0.0;
  double mi = 0.0;
  for (Index p = 0; p < t.k_pred(); ++p) {
    for (Index q = 0; q < t.k_true(); ++q) {
      const auto c = t.counts[p][q];
      if (c == 0) continue;
      const double cd = static_cast<double>(c);
      mi += cd / n *
            std::log(cd * n / (static_cast<double>(t.pred_marginal[p]) * static_cast<double>(t.true_marginal[q])));
    }
  }
  const double denom = norm == NmiNorm::Geometric ? std::sqrt(hp * ht) : 0.5 * (hp + ht);
  return std::clamp(mi / denom, 0.0, 1.0);
}

inline double ari(const ContingencyTable& t) {
  auto pairs = [](std::int64_t x) { return static_cast<double>(x) * static_cast<double>(x - 1) / 2.0; };
  double index = 0.0;
  for (const auto& row : t.counts) {
    for (auto c : row) index += pairs(c);
  }
  double sp = 0.0, st = 0.0;
  for (auto c : t.pred_marginal) sp += pairs(c);
  for (auto c : t.true_marginal) st += pairs(c);
  const double all = pairs(t.total);
  if (all == 0.0) return 1.0;
  const double expected = sp * st / all;
  const double max_index = 0.5 * (sp + st);
  if (max_index == expected) return 1.0;  // both partitions trivial in the same way
  return (index - expected) / (max_index - expected);
}

struct MetricSet {
  double acc = 0, f1 = 0, nmi = 0, ari = 0;
};

inline MetricSet evaluate(std::span<const Label> pred, std::span<const Label> truth,
                          NmiNorm norm = NmiNorm::Geometric) {
  const auto t = contingency(pred, truth);
  return {accuracy(t), macro_f1(t), nmi(t, norm), ari(t)};
}

inline double accuracy(std::span<const Label> pred, std::span<const Label> truth) {
  return accuracy(contingency(pred, truth));
}
inline double macro_f1(std::span<const Label> pred, std::span<const Label> truth) {
  return macro_f1(contingency(pred, truth));
}
inline double nmi(std::span<const Label> pred, std::span<const Label> truth, NmiNorm norm = NmiNorm::Geometric) {
  return nmi(contingency(pred, truth), norm);
}
inline double ari(std::span<const Label> pred, std::span<const Label> truth) {
  return ari(contingency(pred, truth));
}

}  // namespace ancka
