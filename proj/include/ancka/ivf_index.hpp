#pragma once

// Inverted-file index over unit-normalized rows for approximate cosine
// nearest-neighbor search. A spherical k-means coarse quantizer partitions
// the rows into `nlist` cells; a query scans the `nprobe` cells whose
// centroids are most similar to it and ranks the candidates exactly.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "ancka/sparse.hpp"

namespace ancka {

struct Neighbor {
  NodeId id;
  double score;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

using NeighborLists = std::vector<std::vector<Neighbor>>;

// Higher score first, then smaller id.
inline bool better_neighbor(const Neighbor& a, const Neighbor& b) {
  return a.score > b.score || (a.score == b.score && a.id < b.id);
}

// Keeps the best `k` candidates seen so far.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k + 1); }

  void push(Neighbor c) {
    if (k_ == 0) return;
    if (heap_.size() < k_) {
      heap_.push_back(c);
      std::push_heap(heap_.begin(), heap_.end(), better_neighbor);
    } else if (better_neighbor(c, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), better_neighbor);
      heap_.back() = c;
      std::push_heap(heap_.begin(), heap_.end(), better_neighbor);
    }
  }

  std::vector<Neighbor> take_sorted() {
    std::sort(heap_.begin(), heap_.end(), better_neighbor);
    return std::move(heap_);
  }

 private:
  std::size_t k_;
  std::vector<Neighbor> heap_;  // worst candidate at front
};

// Dot product of sparse row `r` with a dense scatter of the query.
inline double dot_with_scatter(RowView<double> r, const std::vector<double>& query_dense) {
  double s = 0.0;
  for (std::size_t p = 0; p < r.size(); ++p) s += r.values[p] * query_dense[r.cols[p]];
  return s;
}

class IvfIndex {
 public:
  struct Options {
    Index nlist = 0;         // 0: round(sqrt(n))
    int train_iters = 20;
    Index train_sample = 0;  // 0: min(n, 64 * nlist)
    std::uint64_t seed = 0;
  };

  // `rows` must be unit-normalized (zero rows allowed; they are never
  // returned as neighbors because their dot products are 0).
  IvfIndex(const CsrMatrix<double>& rows, Options opt) : rows_(&rows) {
    const Index n = rows.rows();
    nlist_ = opt.nlist ? opt.nlist : std::max<Index>(1, static_cast<Index>(std::llround(std::sqrt(double(n)))));
    nlist_ = std::min(nlist_, std::max<Index>(1, n));
    train(opt);
    assign_all();
  }

  Index nlist() const { return nlist_; }
  const std::vector<std::vector<NodeId>>& lists() const { return lists_; }

  // Top-k neighbors of row `query` (excluding itself), scanning `nprobe`
  // cells. Candidates with score <= 0 are skipped. `scratch` must have size
  // d and be all-zero on entry; it is restored before returning.
  std::vector<Neighbor> search(Index query, Index k, Index nprobe, std::vector<double>& scratch) const {
    const auto q = rows_->row(query);
    if (q.empty()) return {};
    const Eigen::VectorXd cd = centroid_dots(q);
    std::vector<NodeId> order(nlist_);
    std::iota(order.begin(), order.end(), NodeId{0});
    const Index probe = std::min(nprobe, nlist_);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(probe), order.end(),
                      [&](NodeId a, NodeId b) { return cd[a] > cd[b] || (cd[a] == cd[b] && a < b); });
    for (std::size_t p = 0; p < q.size(); ++p) scratch[q.cols[p]] = q.values[p];
    TopK top(k);
    for (Index c = 0; c < probe; ++c) {
      for (NodeId j : lists_[order[c]]) {
        if (j == query) continue;
        const double s = dot_with_scatter(rows_->row(j), scratch);
        if (s > 0.0) top.push({j, s});
      }
    }
    for (std::size_t p = 0; p < q.size(); ++p) scratch[q.cols[p]] = 0.0;
    return top.take_sorted();
  }

 private:
  Eigen::VectorXd centroid_dots(RowView<double> x) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nlist_));
    for (std::size_t p = 0; p < x.size(); ++p) out.noalias() += x.values[p] * centroids_.col(x.cols[p]);
    return out;
  }

  Index nearest_centroid(RowView<double> x) const {
    const Eigen::VectorXd cd = centroid_dots(x);
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < cd.size(); ++c) {
      if (cd[c] > cd[best]) best = c;
    }
    return static_cast<Index>(best);
  }

  void set_centroid_from_row(Index c, Index row) {
    centroids_.row(static_cast<Eigen::Index>(c)).setZero();
    auto r = rows_->row(row);
    for (std::size_t p = 0; p < r.size(); ++p) centroids_(static_cast<Eigen::Index>(c), r.cols[p]) = r.values[p];
  }

  void train(const Options& opt) {
    const Index n = rows_->rows();
    const Index d = rows_->cols();
    centroids_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nlist_), static_cast<Eigen::Index>(d));
    std::vector<NodeId> nonzero;
    for (Index i = 0; i < n; ++i) {
      if (!rows_->row(i).empty()) nonzero.push_back(static_cast<NodeId>(i));
    }
    if (nonzero.empty()) return;
    std::mt19937_64 rng(opt.seed);
    std::shuffle(nonzero.begin(), nonzero.end(), rng);
    const Index sample_size =
        std::min<Index>(nonzero.size(), opt.train_sample ? opt.train_sample : std::max<Index>(64 * nlist_, 1));
    std::vector<NodeId> sample(nonzero.begin(), nonzero.begin() + static_cast<std::ptrdiff_t>(sample_size));
    for (Index c = 0; c < nlist_; ++c) set_centroid_from_row(c, sample[c % sample.size()]);

    std::vector<Index> assign(sample.size());
    std::uniform_int_distribution<std::size_t> pick(0, sample.size() - 1);
    for (int it = 0; it < opt.train_iters; ++it) {
      for (std::size_t s = 0; s < sample.size(); ++s) assign[s] = nearest_centroid(rows_->row(sample[s]));
      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(centroids_.rows(), centroids_.cols());
      std::vector<Index> counts(nlist_, 0);
      for (std::size_t s = 0; s < sample.size(); ++s) {
        auto r = rows_->row(sample[s]);
        for (std::size_t p = 0; p < r.size(); ++p) sums(static_cast<Eigen::Index>(assign[s]), r.cols[p]) += r.values[p];
        ++counts[assign[s]];
      }
      for (Index c = 0; c < nlist_; ++c) {
        const double norm = sums.row(static_cast<Eigen::Index>(c)).norm();
        if (counts[c] == 0 || norm == 0.0) {
          set_centroid_from_row(c, sample[pick(rng)]);
        } else {
          centroids_.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / norm;
        }
      }
    }
  }

  void assign_all() {
    const Index n = rows_->rows();
    lists_.assign(nlist_, {});
    std::vector<Index> cell(n, 0);
    const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < sn; ++i) cell[static_cast<Index>(i)] = nearest_centroid(rows_->row(static_cast<Index>(i)));
    for (Index i = 0; i < n; ++i) lists_[cell[i]].push_back(static_cast<NodeId>(i));
  }

  const CsrMatrix<double>* rows_;
  Index nlist_ = 1;
  Eigen::MatrixXd centroids_;  // nlist x d, column-major so a column spans all cells
  std::vector<std::vector<NodeId>> lists_;
};

}  // namespace ancka
