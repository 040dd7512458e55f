#pragma once

// Attribute KNN augmentation: neighbor search (exact or IVF-approximate),
// the symmetric weighted adjacency A_K and its transition matrix P_K.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ancka/error.hpp"
#include "ancka/ivf_index.hpp"
#include "ancka/network.hpp"
#include "ancka/sparse.hpp"

namespace ancka {

// Nodes at or above this count use the approximate index in Auto mode.
inline constexpr Index kApproxKnnThreshold = 100000;

inline double row_norm(RowView<double> r) {
  double s = 0.0;
  for (double v : r.values) s += v * v;
  return std::sqrt(s);
}

// Cosine similarity of two sparse rows; 0 when either row is all-zero.
inline double cosine_sim(RowView<double> a, RowView<double> b) {
  const double na = row_norm(a);
  const double nb = row_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  double dot = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (a.cols[i] < b.cols[j]) {
      ++i;
    } else if (a.cols[i] > b.cols[j]) {
      ++j;
    } else {
      dot += a.values[i++] * b.values[j++];
    }
  }
  return dot / (na * nb);
}

inline double cosine_sim(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Rows scaled to unit L2 norm; zero rows and explicit zeros dropped.
inline CsrMatrix<double> normalize_rows(const AttributeMatrix& x) {
  std::vector<Index> rp{0};
  std::vector<NodeId> cols;
  std::vector<double> vals;
  cols.reserve(x.nnz());
  vals.reserve(x.nnz());
  for (Index i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    const double nr = row_norm(r);
    if (nr > 0.0) {
      for (std::size_t p = 0; p < r.size(); ++p) {
        if (r.values[p] == 0.0) continue;
        cols.push_back(r.cols[p]);
        vals.push_back(r.values[p] / nr);
      }
    }
    rp.push_back(cols.size());
  }
  return CsrMatrix<double>(x.rows(), x.cols(), std::move(rp), std::move(cols), std::move(vals));
}

namespace detail {

// Dense route: blocks of X_n X_n^T through Eigen's GEMM.
inline NeighborLists knn_exact_dense(const CsrMatrix<double>& xn, Index k) {
  const Index n = xn.rows();
  const auto d = static_cast<Eigen::Index>(xn.cols());
  DenseBlock dense = DenseBlock::Zero(static_cast<Eigen::Index>(n), d);
  for (Index i = 0; i < n; ++i) {
    auto r = xn.row(i);
    for (std::size_t p = 0; p < r.size(); ++p) dense(static_cast<Eigen::Index>(i), r.cols[p]) = r.values[p];
  }
  NeighborLists out(n);
  const Index block = std::max<Index>(1, (Index{1} << 22) / std::max<Index>(n, 1));
  for (Index b = 0; b < n; b += block) {
    const Index rows = std::min(block, n - b);
    const DenseBlock sims = dense.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(rows)) *
                            dense.transpose();
    const auto sr = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < sr; ++r) {
      const Index i = b + static_cast<Index>(r);
      if (xn.row(i).empty()) continue;
      TopK top(k);
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double s = sims(r, static_cast<Eigen::Index>(j));
        if (s > 0.0) top.push({static_cast<NodeId>(j), s});
      }
      out[i] = top.take_sorted();
    }
  }
  return out;
}

// Sparse route: per-query accumulation through a column-inverted index.
inline NeighborLists knn_exact_sparse(const CsrMatrix<double>& xn, Index k) {
  const Index n = xn.rows();
  const CsrMatrix<double> by_col = xn.transpose();
  NeighborLists out(n);
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel
  {
    std::vector<double> acc(n, 0.0);
    std::vector<char> seen(n, 0);
    std::vector<NodeId> touched;
#pragma omp for schedule(dynamic, 64)
    for (std::ptrdiff_t si = 0; si < sn; ++si) {
      const auto i = static_cast<Index>(si);
      auto q = xn.row(i);
      if (q.empty()) continue;
      touched.clear();
      for (std::size_t p = 0; p < q.size(); ++p) {
        auto col = by_col.row(q.cols[p]);
        for (std::size_t t = 0; t < col.size(); ++t) {
          const NodeId j = col.cols[t];
          if (!seen[j]) {
            seen[j] = 1;
            touched.push_back(j);
          }
          acc[j] += q.values[p] * col.values[t];
        }
      }
      TopK top(k);
      for (NodeId j : touched) {
        if (j != i && acc[j] > 0.0) top.push({j, acc[j]});
        acc[j] = 0.0;
        seen[j] = 0;
      }
      out[i] = top.take_sorted();
    }
  }
  return out;
}

}  // namespace detail

// For every row, the K rows with the largest cosine similarity (self
// excluded, ties to the smaller index). Only strictly positive similarities
// qualify, so lists can be shorter than K; all-zero rows get empty lists.
inline NeighborLists knn_search_exact(const AttributeMatrix& x, Index k) {
  if (k >= x.rows() && x.rows() > 0) throw ValidationError("K must be smaller than n");
  const CsrMatrix<double> xn = normalize_rows(x);
  const double cells = double(xn.rows()) * double(xn.cols());
  const double density = cells > 0 ? double(xn.nnz()) / cells : 0.0;
  if (cells <= 32.0e6 && density >= 0.05) return detail::knn_exact_dense(xn, k);
  return detail::knn_exact_sparse(xn, k);
}

struct ApproxKnnOptions {
  Index nlist = 0;           // 0: sqrt(n)
  Index nprobe = 8;
  Index audit_sample = 1000; // clamped to n
  int max_escalations = 16;
  std::uint64_t seed = 0;
};

struct ApproxKnnResult {
  NeighborLists lists;
  double recall = 0.0;  // measured on the audit sample
  Index nprobe_used = 0;
  Index nlist = 0;
  int escalations = 0;
};

// Mean over the audited nodes of |approx ∩ exact| / |exact|; nodes with an
// empty exact list are skipped.
inline double neighbor_recall(const NeighborLists& approx, const NeighborLists& exact,
                              const std::vector<NodeId>& sample) {
  double total = 0.0;
  Index counted = 0;
  for (NodeId i : sample) {
    if (exact[i].empty()) continue;
    Index hit = 0;
    for (const auto& e : exact[i]) {
      for (const auto& a : approx[i]) {
        if (a.id == e.id) {
          ++hit;
          break;
        }
      }
    }
    total += double(hit) / double(exact[i].size());
    ++counted;
  }
  return counted ? total / double(counted) : 1.0;
}

// IVF search followed by a recall audit against brute force on a sample of
// nodes. When the audit misses `recall_target`, nprobe doubles (with a
// warning) until it passes or every cell is probed.
inline ApproxKnnResult knn_search_approx(const AttributeMatrix& x, Index k, double recall_target,
                                         ApproxKnnOptions opt = {}) {
  const Index n = x.rows();
  if (k >= n) throw ValidationError("K must be smaller than n");
  const CsrMatrix<double> xn = normalize_rows(x);
  IvfIndex index(xn, {.nlist = opt.nlist, .train_iters = 20, .train_sample = 0, .seed = opt.seed});

  std::vector<NodeId> sample(n);
  std::iota(sample.begin(), sample.end(), NodeId{0});
  std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(sample.begin(), sample.end(), rng);
  sample.resize(std::min(n, opt.audit_sample));
  std::sort(sample.begin(), sample.end());

  // Brute-force reference on the sample, scored with the same dot routine
  // the index uses so that exhaustive probing reproduces it exactly.
  NeighborLists exact(n);
  {
    std::vector<double> scratch(xn.cols(), 0.0);
    for (NodeId i : sample) {
      auto q = xn.row(i);
      if (q.empty()) continue;
      for (std::size_t p = 0; p < q.size(); ++p) scratch[q.cols[p]] = q.values[p];
      TopK top(k);
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double s = dot_with_scatter(xn.row(j), scratch);
        if (s > 0.0) top.push({static_cast<NodeId>(j), s});
      }
      exact[i] = top.take_sorted();
      for (std::size_t p = 0; p < q.size(); ++p) scratch[q.cols[p]] = 0.0;
    }
  }

  ApproxKnnResult res;
  res.nlist = index.nlist();
  Index nprobe = std::max<Index>(1, std::min(opt.nprobe, index.nlist()));
  for (int round = 0;; ++round) {
    NeighborLists sample_lists(n);
    {
      std::vector<double> scratch(xn.cols(), 0.0);
      for (NodeId i : sample) sample_lists[i] = index.search(i, k, nprobe, scratch);
    }
    res.recall = neighbor_recall(sample_lists, exact, sample);
    if (res.recall >= recall_target || nprobe >= index.nlist() || round >= opt.max_escalations) break;
    std::ostringstream msg;
    msg << "approximate KNN recall " << res.recall << " below target " << recall_target << " at nprobe=" << nprobe
        << "; escalating";
    warn(msg.str());
    nprobe = std::min(index.nlist(), nprobe * 2);
    ++res.escalations;
  }
  res.nprobe_used = nprobe;

  res.lists.assign(n, {});
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel
  {
    std::vector<double> scratch(xn.cols(), 0.0);
#pragma omp for schedule(dynamic, 256)
    for (std::ptrdiff_t i = 0; i < sn; ++i) res.lists[static_cast<Index>(i)] = index.search(static_cast<Index>(i), k, nprobe, scratch);
  }
  if (res.recall < recall_target) {
    std::ostringstream msg;
    msg << "approximate KNN recall " << res.recall << " still below target " << recall_target;
    warn(msg.str());
  }
  return res;
}

struct KnnGraph {
  SparseRowMatrix adjacency;  // A_K, symmetric, zero diagonal
  NeighborLists neighbor_lists;
  KnnMode mode_used = KnnMode::Exact;
  double audited_recall = 1.0;
};

// A_K[i,j] = 2f if i and j select each other, f if only one does, 0
// otherwise, with f recomputed once per unordered pair so both triangles
// hold identical values.
inline KnnGraph build_knn_adjacency(NeighborLists lists, const AttributeMatrix& x) {
  const Index n = x.rows();
  if (lists.size() != n) throw ValidationError("neighbor lists do not match attribute rows");
  struct Pair {
    NodeId lo;
    NodeId hi;
    bool operator<(const Pair& o) const { return lo < o.lo || (lo == o.lo && hi < o.hi); }
    bool operator==(const Pair& o) const { return lo == o.lo && hi == o.hi; }
  };
  std::vector<Pair> pairs;
  for (Index i = 0; i < n; ++i) {
    for (const auto& nb : lists[i]) {
      if (nb.id >= n) throw ValidationError("neighbor id out of range");
      if (nb.id == i) continue;
      pairs.push_back({static_cast<NodeId>(std::min<Index>(i, nb.id)), static_cast<NodeId>(std::max<Index>(i, nb.id))});
    }
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<Triplet<double>> t;
  t.reserve(pairs.size() * 2);
  for (std::size_t p = 0; p < pairs.size();) {
    std::size_t q = p;
    while (q < pairs.size() && pairs[q] == pairs[p]) ++q;
    const double f = cosine_sim(x.row(pairs[p].lo), x.row(pairs[p].hi));
    const double w = (q - p >= 2 ? 2.0 : 1.0) * f;
    if (w > 0.0) {
      t.push_back({pairs[p].lo, pairs[p].hi, w});
      t.push_back({pairs[p].hi, pairs[p].lo, w});
    }
    p = q;
  }
  KnnGraph g;
  g.adjacency = SparseRowMatrix::from_triplets(n, n, std::move(t), DuplicatePolicy::Error);
  g.neighbor_lists = std::move(lists);
  return g;
}

struct KnnTransition {
  SparseRowMatrix transition;      // P_K = D_K^{-1} A_K
  std::vector<bool> empty_row;     // row of A_K is all-zero
};

inline KnnTransition knn_transition(const KnnGraph& g) {
  KnnTransition out;
  out.transition = row_normalized(g.adjacency);
  out.empty_row.resize(g.adjacency.rows());
  for (Index i = 0; i < g.adjacency.rows(); ++i) out.empty_row[i] = g.adjacency.row_nnz(i) == 0;
  return out;
}

// Runs the search selected by `mode` (Auto: exact below 100k nodes) and
// assembles A_K.
inline KnnGraph build_knn_graph(const AttributeMatrix& x, Index k, KnnMode mode, double recall_target = 0.9,
                                std::uint64_t seed = 0) {
  const bool approx = mode == KnnMode::Approx || (mode == KnnMode::Auto && x.rows() >= kApproxKnnThreshold);
  if (!approx) {
    KnnGraph g = build_knn_adjacency(knn_search_exact(x, k), x);
    g.mode_used = KnnMode::Exact;
    return g;
  }
  ApproxKnnOptions opt;
  opt.seed = seed;
  auto res = knn_search_approx(x, k, recall_target, opt);
  KnnGraph g = build_knn_adjacency(std::move(res.lists), x);
  g.mode_used = KnnMode::Approx;
  g.audited_recall = res.recall;
  return g;
}

// ---------------------------------------------------------------------------
// Neighbor-list cache.
//
// Layout, all little-endian:
//   u32 magic ('A','N','K','C' = 0x434B4E41), u32 n, u32 K, u32 mode
//   (0 exact, 1 approx), then n records of K pairs (u32 id, f32 score).
// Lists shorter than K are padded with id 0xFFFFFFFF and score 0.

inline constexpr std::uint32_t kNeighborCacheMagic = 0x434B4E41u;
inline constexpr std::uint32_t kNoNeighbor = 0xFFFFFFFFu;

namespace detail {
inline void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                              static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b.data(), 4);
}
inline std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  is.read(reinterpret_cast<char*>(b.data()), 4);
  if (!is) throw ValidationError("truncated neighbor cache");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}
}  // namespace detail

struct NeighborCache {
  NeighborLists lists;
  Index k = 0;
  KnnMode mode = KnnMode::Exact;
};

inline void write_neighbor_cache(const std::string& path, const NeighborLists& lists, Index k, KnnMode mode) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw RuntimeFailure("cannot write neighbor cache " + path);
  detail::put_u32(os, kNeighborCacheMagic);
  detail::put_u32(os, static_cast<std::uint32_t>(lists.size()));
  detail::put_u32(os, static_cast<std::uint32_t>(k));
  detail::put_u32(os, mode == KnnMode::Approx ? 1u : 0u);
  for (const auto& l : lists) {
    for (Index j = 0; j < k; ++j) {
      if (j < l.size()) {
        detail::put_u32(os, l[j].id);
        detail::put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(l[j].score)));
      } else {
        detail::put_u32(os, kNoNeighbor);
        detail::put_u32(os, std::bit_cast<std::uint32_t>(0.0f));
      }
    }
  }
  if (!os) throw RuntimeFailure("failed writing neighbor cache " + path);
}

inline NeighborCache read_neighbor_cache(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open neighbor cache " + path);
  if (detail::get_u32(is) != kNeighborCacheMagic) throw ValidationError("bad neighbor cache magic in " + path);
  NeighborCache c;
  const std::uint32_t n = detail::get_u32(is);
  c.k = detail::get_u32(is);
  c.mode = detail::get_u32(is) == 1u ? KnnMode::Approx : KnnMode::Exact;
  c.lists.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (Index j = 0; j < c.k; ++j) {
      const std::uint32_t id = detail::get_u32(is);
      const float score = std::bit_cast<float>(detail::get_u32(is));
      if (id == kNoNeighbor) continue;
      if (id >= n) throw ValidationError("neighbor cache id out of range");
      c.lists[i].push_back({id, score});
    }
  }
  return c;
}

// FNV-1a over the attribute matrix contents.
inline std::uint64_t attribute_hash(const AttributeMatrix& x) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xFF;
      h *= 1099511628211ULL;
    }
  };
  mix(x.rows());
  mix(x.cols());
  for (Index p : x.row_ptr()) mix(p);
  for (NodeId c : x.col_idx()) mix(c);
  for (double v : x.values()) mix(std::bit_cast<std::uint64_t>(v));
  return h;
}

inline std::string neighbor_cache_path(const std::string& dir, std::uint64_t hash, Index k, KnnMode mode) {
  std::ostringstream os;
  os << dir << "/" << std::hex << std::setw(16) << std::setfill('0') << hash << std::dec << "_K" << k << "_"
     << to_string(mode) << ".knn";
  return os.str();
}

}  // namespace ancka
