#pragma once

// Text loaders, the planted-partition generator with its on-disk dump, and
// JSON result emission.
//
// File formats (0-based node ids throughout):
//   hypergraph   one hyperedge per line, whitespace-separated ids;
//                optional first line "#n <count>"
//   edge list    "u v" per line; optional "#n <count>"
//   dense attrs  n lines of d tab/space separated reals
//   sparse attrs "#shape n d" then "i j value" lines
//   labels       one integer per line, line i is node i
// Blank lines and lines starting with "%" or "//" are skipped.

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ancka/engine.hpp"
#include "ancka/error.hpp"
#include "ancka/metrics.hpp"
#include "ancka/network.hpp"
#include "ancka/sparse.hpp"

namespace ancka {

inline constexpr const char* kVersion = "1.0.0";

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return in;
}

inline std::string where(const std::string& path, std::size_t line) { return path + ":" + std::to_string(line); }

inline std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == ',' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != ',' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool skippable(std::string_view s) {
  const auto t = tokens(s);
  if (t.empty()) return true;
  return t.front().starts_with("%") || t.front().starts_with("//");
}

inline NodeId parse_id(std::string_view tok, const std::string& loc) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec == std::errc::result_out_of_range || (ec == std::errc{} && v >= kNoNeighbor)) {
    throw ValidationError(loc + ": node id overflow '" + std::string(tok) + "'");
  }
  if (ec != std::errc{} || p != tok.data() + tok.size()) {
    throw ValidationError(loc + ": expected a non-negative integer, got '" + std::string(tok) + "'");
  }
  return static_cast<NodeId>(v);
}

inline double parse_real(std::string_view tok, const std::string& loc) {
  double v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size() || !std::isfinite(v)) {
    throw ValidationError(loc + ": expected a finite real, got '" + std::string(tok) + "'");
  }
  return v;
}

// "#n 123" or "#shape 3 4": returns the numbers after the keyword.
inline std::optional<std::vector<Index>> header(std::string_view line, std::string_view key, const std::string& loc) {
  const auto t = tokens(line);
  if (t.empty() || t.front() != key) return std::nullopt;
  std::vector<Index> v;
  for (std::size_t i = 1; i < t.size(); ++i) v.push_back(parse_id(t[i], loc));
  return v;
}

}  // namespace detail

struct HypergraphFile {
  Index n = 0;
  std::vector<std::vector<NodeId>> hyperedges;
};

// Raw hyperedges; size-<2 cleanup happens in build_network. Use
// load_hypergraph for a ready incidence matrix.
inline HypergraphFile read_hypergraph(const std::string& path) {
  auto in = detail::open_input(path);
  HypergraphFile f;
  std::optional<Index> declared;
  Index max_id_plus_one = 0;
  std::string line;
  for (std::size_t ln = 1; std::getline(in, line); ++ln) {
    const auto loc = detail::where(path, ln);
    if (auto h = detail::header(line, "#n", loc)) {
      if (h->size() != 1) throw ValidationError(loc + ": malformed #n header");
      declared = h->front();
      continue;
    }
    if (detail::skippable(line) || line.starts_with("#")) continue;
    std::vector<NodeId> e;
    for (auto tok : detail::tokens(line)) {
      e.push_back(detail::parse_id(tok, loc));
      max_id_plus_one = std::max<Index>(max_id_plus_one, e.back() + Index{1});
    }
    f.hyperedges.push_back(std::move(e));
  }
  if (declared && *declared < max_id_plus_one) {
    throw ValidationError(path + ": node id " + std::to_string(max_id_plus_one - 1) + " exceeds #n " +
                          std::to_string(*declared));
  }
  f.n = declared.value_or(max_id_plus_one);
  return f;
}

// Incidence matrix H (m x n) after dropping hyperedges with fewer than two
// distinct nodes.
inline SparseRowMatrix load_hypergraph(const std::string& path, ValidationReport* report = nullptr) {
  auto f = read_hypergraph(path);
  RawNetwork raw;
  raw.kind = NetworkKind::Hypergraph;
  raw.n = f.n;
  raw.hyperedges = std::move(f.hyperedges);
  ValidationReport rep;
  rep.n = raw.n;
  auto cleaned = detail::clean(raw, rep);
  if (cleaned.hyperedges.empty()) throw ValidationError(path + ": no hyperedges");
  if (rep.dropped_hyperedges > 0) {
    warn(path + ": dropped " + std::to_string(rep.dropped_hyperedges) + " hyperedge(s) with fewer than 2 nodes");
  }
  if (report) *report = rep;
  return detail::incidence_from_hyperedges(raw.n, cleaned.hyperedges);
}

struct EdgeListFile {
  Index n = 0;
  std::vector<Edge> edges;
};

inline EdgeListFile read_edge_list(const std::string& path) {
  auto in = detail::open_input(path);
  EdgeListFile f;
  std::optional<Index> declared;
  Index max_id_plus_one = 0;
  std::string line;
  for (std::size_t ln = 1; std::getline(in, line); ++ln) {
    const auto loc = detail::where(path, ln);
    if (auto h = detail::header(line, "#n", loc)) {
      if (h->size() != 1) throw ValidationError(loc + ": malformed #n header");
      declared = h->front();
      continue;
    }
    if (detail::skippable(line) || line.starts_with("#")) continue;
    const auto t = detail::tokens(line);
    if (t.size() < 2) throw ValidationError(loc + ": expected 'u v'");
    // A third column (weight) is tolerated and ignored.
    const NodeId u = detail::parse_id(t[0], loc);
    const NodeId v = detail::parse_id(t[1], loc);
    max_id_plus_one = std::max<Index>({max_id_plus_one, u + Index{1}, v + Index{1}});
    f.edges.emplace_back(u, v);
  }
  if (declared && *declared < max_id_plus_one) throw ValidationError(path + ": node id exceeds #n header");
  f.n = declared.value_or(max_id_plus_one);
  return f;
}

// Adjacency of one edge list; undirected input comes back symmetric.
// Self-loops are dropped with a warning and duplicates merged to weight 1.
inline SparseRowMatrix load_edge_list(const std::string& path, bool directed, Index n = 0,
                                      ValidationReport* report = nullptr) {
  auto f = read_edge_list(path);
  RawNetwork raw;
  raw.kind = NetworkKind::Graph;
  raw.directed = directed;
  raw.n = std::max(n, f.n);
  raw.layers.push_back(std::move(f.edges));
  ValidationReport rep;
  auto cleaned = detail::clean(raw, rep);
  if (rep.self_loops_dropped > 0) warn(path + ": dropped " + std::to_string(rep.self_loops_dropped) + " self-loop(s)");
  if (report) *report = rep;
  return detail::adjacency_from_edges(raw.n, cleaned.layers[0], directed);
}

// Layers share the node space n = max over files.
inline std::vector<SparseRowMatrix> load_multiplex(const std::vector<std::string>& paths) {
  if (paths.size() < 2) throw ValidationError("multiplex input needs at least 2 layer files");
  std::vector<EdgeListFile> files;
  Index n = 0;
  for (const auto& p : paths) {
    files.push_back(read_edge_list(p));
    if (files.back().edges.empty()) throw ValidationError(p + ": empty layer");
    n = std::max(n, files.back().n);
  }
  std::vector<SparseRowMatrix> layers;
  for (std::size_t l = 0; l < paths.size(); ++l) layers.push_back(load_edge_list(paths[l], false, n));
  return layers;
}

enum class AttrFormat { DenseTsv, SparseCoo };

inline AttributeMatrix load_attributes(const std::string& path, AttrFormat format,
                                       std::optional<Index> expected_rows = std::nullopt) {
  auto in = detail::open_input(path);
  std::vector<Triplet<double>> t;
  Index rows = 0, cols = 0;
  std::string line;
  if (format == AttrFormat::DenseTsv) {
    std::optional<Index> width;
    for (std::size_t ln = 1; std::getline(in, line); ++ln) {
      if (detail::skippable(line) || line.starts_with("#")) continue;
      const auto loc = detail::where(path, ln);
      const auto tok = detail::tokens(line);
      if (width && tok.size() != *width) {
        throw ValidationError(loc + ": expected " + std::to_string(*width) + " columns, got " +
                              std::to_string(tok.size()));
      }
      width = tok.size();
      for (Index j = 0; j < tok.size(); ++j) {
        const double v = detail::parse_real(tok[j], loc);
        if (v != 0.0) t.push_back({static_cast<NodeId>(rows), static_cast<NodeId>(j), v});
      }
      ++rows;
    }
    cols = width.value_or(0);
  } else {
    std::optional<std::vector<Index>> shape;
    for (std::size_t ln = 1; std::getline(in, line); ++ln) {
      const auto loc = detail::where(path, ln);
      if (auto h = detail::header(line, "#shape", loc)) {
        if (h->size() != 2) throw ValidationError(loc + ": '#shape n d' expected");
        shape = h;
        continue;
      }
      if (detail::skippable(line) || line.starts_with("#")) continue;
      if (!shape) throw ValidationError(loc + ": sparse attribute file must start with '#shape n d'");
      const auto tok = detail::tokens(line);
      if (tok.size() != 3) throw ValidationError(loc + ": expected 'i j value'");
      const NodeId i = detail::parse_id(tok[0], loc);
      const NodeId j = detail::parse_id(tok[1], loc);
      if (i >= (*shape)[0] || j >= (*shape)[1]) throw ValidationError(loc + ": entry outside declared shape");
      const double v = detail::parse_real(tok[2], loc);
      if (v != 0.0) t.push_back({i, j, v});
    }
    if (!shape) throw ValidationError(path + ": missing '#shape n d' header");
    rows = (*shape)[0];
    cols = (*shape)[1];
  }
  if (expected_rows && rows != *expected_rows) {
    throw ValidationError(path + ": attribute matrix has " + std::to_string(rows) + " rows, network has " +
                          std::to_string(*expected_rows) + " nodes");
  }
  return AttributeMatrix::from_triplets(rows, cols, std::move(t), DuplicatePolicy::Sum);
}

inline std::vector<Label> load_labels(const std::string& path, std::optional<Index> expected = std::nullopt) {
  auto in = detail::open_input(path);
  std::vector<Label> y;
  std::string line;
  for (std::size_t ln = 1; std::getline(in, line); ++ln) {
    if (detail::skippable(line) || line.starts_with("#")) continue;
    const auto tok = detail::tokens(line);
    const auto loc = detail::where(path, ln);
    if (tok.size() != 1) throw ValidationError(loc + ": expected one label per line");
    y.push_back(detail::parse_id(tok[0], loc));
  }
  if (expected && y.size() != *expected) {
    throw ValidationError(path + ": " + std::to_string(y.size()) + " labels for " + std::to_string(*expected) +
                          " nodes");
  }
  return y;
}

// ---------------------------------------------------------------------------
// Planted-partition generator.

struct SyntheticSpec {
  NetworkKind kind = NetworkKind::Hypergraph;
  bool directed = false;
  Index n = 60;
  Index k = 2;
  double intra_p = 0.3;
  double inter_p = 0.0;
  Index attr_dim = 8;
  double attr_noise = 0.0;
  std::uint64_t seed = 0;
  Index layers = 2;  // multiplex only
};

struct SyntheticData {
  RawNetwork raw;
  std::vector<Label> labels;
};

namespace detail {
// Uniform [0,1) and standard normal from raw 64-bit draws, so dumps do not
// depend on the standard library's distribution implementations.
struct PortableRng {
  std::mt19937_64 eng;
  explicit PortableRng(std::uint64_t s) : eng(s) {}
  double uniform() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return p > 0.0 && uniform() < p; }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }
};

inline std::vector<Edge> block_model_edges(const std::vector<Label>& lab, double pin, double pout, bool directed,
                                           PortableRng& rng) {
  std::vector<Edge> edges;
  const Index n = lab.size();
  for (Index u = 0; u < n; ++u) {
    for (Index v = directed ? 0 : u + 1; v < n; ++v) {
      if (u == v) continue;
      if (rng.bernoulli(lab[u] == lab[v] ? pin : pout)) edges.emplace_back(u, v);
    }
  }
  return edges;
}
}  // namespace detail

// Nodes are split into k contiguous balanced blocks. Graph layers follow a
// stochastic block model; each node v of a hypergraph spawns one hyperedge
// {v} plus every other node drawn with probability intra_p (same block) or
// inter_p (other block). Attributes are block indicators over attr_dim
// dimensions (dimension j belongs to block j mod k) plus Gaussian noise.
inline SyntheticData generate_synthetic(const SyntheticSpec& s) {
  if (!(s.intra_p >= 0 && s.intra_p <= 1 && s.inter_p >= 0 && s.inter_p <= 1)) {
    throw ValidationError("probabilities must lie in [0,1]");
  }
  if (s.k < 1 || s.k > s.n) throw ValidationError("k must lie in [1,n]");
  if (s.attr_dim < s.k) throw ValidationError("attr_dim must be at least k");
  if (!(s.attr_noise >= 0)) throw ValidationError("attr_noise must be nonnegative");
  if (s.kind == NetworkKind::Multiplex && s.layers < 2) throw ValidationError("multiplex needs at least 2 layers");
  const double block = static_cast<double>(s.n) / static_cast<double>(s.k);
  if (s.intra_p * (block - 1.0) <= 0.0) warn("expected intra-block degree is 0");

  detail::PortableRng rng(s.seed);
  SyntheticData out;
  out.labels.resize(s.n);
  for (Index i = 0; i < s.n; ++i) out.labels[i] = static_cast<Label>(i * s.k / s.n);

  RawNetwork& raw = out.raw;
  raw.kind = s.kind;
  raw.directed = s.kind == NetworkKind::Graph && s.directed;
  raw.n = s.n;
  switch (s.kind) {
    case NetworkKind::Hypergraph:
      for (Index v = 0; v < s.n; ++v) {
        std::vector<NodeId> e{static_cast<NodeId>(v)};
        for (Index u = 0; u < s.n; ++u) {
          if (u != v && rng.bernoulli(out.labels[u] == out.labels[v] ? s.intra_p : s.inter_p)) {
            e.push_back(static_cast<NodeId>(u));
          }
        }
        if (e.size() >= 2) raw.hyperedges.push_back(std::move(e));
      }
      break;
    case NetworkKind::Graph:
      raw.layers.push_back(detail::block_model_edges(out.labels, s.intra_p, s.inter_p, raw.directed, rng));
      break;
    case NetworkKind::Multiplex:
      for (Index l = 0; l < s.layers; ++l) {
        raw.layers.push_back(detail::block_model_edges(out.labels, s.intra_p, s.inter_p, false, rng));
      }
      break;
  }

  std::vector<Triplet<double>> t;
  for (Index i = 0; i < s.n; ++i) {
    for (Index j = 0; j < s.attr_dim; ++j) {
      double v = (j % s.k == out.labels[i]) ? 1.0 : 0.0;
      if (s.attr_noise > 0) v += s.attr_noise * rng.normal();
      if (v != 0.0) t.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j), v});
    }
  }
  raw.attributes = AttributeMatrix::from_triplets(s.n, s.attr_dim, std::move(t), DuplicatePolicy::Error);
  return out;
}

namespace detail {
inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path);
  out.precision(17);
  return out;
}
}  // namespace detail

inline void write_hypergraph(const std::string& path, Index n, const std::vector<std::vector<NodeId>>& hyperedges) {
  auto out = detail::open_output(path);
  out << "#n " << n << '\n';
  for (const auto& e : hyperedges) {
    for (std::size_t i = 0; i < e.size(); ++i) out << (i ? " " : "") << e[i];
    out << '\n';
  }
}

inline void write_edge_list(const std::string& path, Index n, const std::vector<Edge>& edges) {
  auto out = detail::open_output(path);
  out << "#n " << n << '\n';
  for (auto [u, v] : edges) out << u << ' ' << v << '\n';
}

inline void write_attributes(const std::string& path, const AttributeMatrix& x, AttrFormat format) {
  auto out = detail::open_output(path);
  if (format == AttrFormat::SparseCoo) {
    out << "#shape " << x.rows() << ' ' << x.cols() << '\n';
    for (Index i = 0; i < x.rows(); ++i) {
      const auto r = x.row(i);
      for (std::size_t p = 0; p < r.cols.size(); ++p) out << i << ' ' << r.cols[p] << ' ' << r.values[p] << '\n';
    }
    return;
  }
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) out << (j ? "\t" : "") << x.at(i, j);
    out << '\n';
  }
}

inline void write_labels(const std::string& path, const std::vector<Label>& y) {
  auto out = detail::open_output(path);
  for (Label l : y) out << l << '\n';
}

struct DumpedFiles {
  std::vector<std::string> net;
  std::string attr;
  std::string labels;
};

// Writes `data` under `prefix` as <prefix>.hg / .edges / .layerN, .attr, .labels.
inline DumpedFiles dump_synthetic(const SyntheticData& data, const std::string& prefix,
                                  AttrFormat format = AttrFormat::SparseCoo) {
  DumpedFiles f;
  const auto& raw = data.raw;
  if (raw.kind == NetworkKind::Hypergraph) {
    f.net.push_back(prefix + ".hg");
    write_hypergraph(f.net.back(), raw.n, raw.hyperedges);
  } else if (raw.kind == NetworkKind::Graph) {
    f.net.push_back(prefix + ".edges");
    write_edge_list(f.net.back(), raw.n, raw.layers[0]);
  } else {
    for (std::size_t l = 0; l < raw.layers.size(); ++l) {
      f.net.push_back(prefix + ".layer" + std::to_string(l));
      write_edge_list(f.net.back(), raw.n, raw.layers[l]);
    }
  }
  f.attr = prefix + ".attr";
  write_attributes(f.attr, raw.attributes, format);
  f.labels = prefix + ".labels";
  write_labels(f.labels, data.labels);
  return f;
}

// Reads a network back from disk in the same shape build_network expects.
inline RawNetwork load_raw_network(NetworkKind kind, bool directed, const std::vector<std::string>& net_paths,
                                   const std::string& attr_path, AttrFormat format) {
  if (net_paths.empty()) throw ValidationError("no network file given");
  RawNetwork raw;
  raw.kind = kind;
  raw.directed = directed;
  switch (kind) {
    case NetworkKind::Hypergraph: {
      if (net_paths.size() != 1) throw ValidationError("hypergraph input takes exactly one file");
      auto f = read_hypergraph(net_paths[0]);
      raw.n = f.n;
      raw.hyperedges = std::move(f.hyperedges);
      if (raw.hyperedges.empty()) throw ValidationError(net_paths[0] + ": no hyperedges");
      break;
    }
    case NetworkKind::Graph: {
      if (net_paths.size() != 1) throw ValidationError("graph input takes exactly one edge list");
      auto f = read_edge_list(net_paths[0]);
      raw.n = f.n;
      raw.layers.push_back(std::move(f.edges));
      break;
    }
    case NetworkKind::Multiplex: {
      if (net_paths.size() < 2) throw ValidationError("multiplex input needs at least 2 layer files");
      for (const auto& p : net_paths) {
        auto f = read_edge_list(p);
        if (f.edges.empty()) throw ValidationError(p + ": empty layer");
        raw.n = std::max(raw.n, f.n);
        raw.layers.push_back(std::move(f.edges));
      }
      break;
    }
  }
  raw.attributes = load_attributes(attr_path, format, raw.n);
  return raw;
}

// ---------------------------------------------------------------------------
// Result emission.

struct RunConfig {
  std::string kind = "hg";
  std::vector<std::string> net_paths;
  std::string attr_path;
  AttrFormat attr_format = AttrFormat::SparseCoo;
  std::string labels_path;
  ClusterParams params;
  std::string output_path;
  bool deterministic = false;
  NmiNorm nmi_norm = NmiNorm::Geometric;
  std::string knn_cache_dir;
};

inline nlohmann::json config_json(const RunConfig& c) {
  const auto& p = c.params;
  return {{"kind", c.kind},
          {"net", c.net_paths},
          {"attr", c.attr_path},
          {"attr_format", c.attr_format == AttrFormat::DenseTsv ? "dense" : "sparse"},
          {"labels", c.labels_path},
          {"k", p.k},
          {"knn_k", p.knn_k},
          {"alpha", p.alpha},
          {"beta", p.beta},
          {"gamma", p.gamma},
          {"eps_q", p.eps_q},
          {"t_a", p.t_a},
          {"t_i", p.t_i},
          {"tau", p.tau},
          {"seed", p.seed},
          {"knn_mode", to_string(p.knn_mode)},
          {"deterministic", c.deterministic},
          {"nmi_norm", c.nmi_norm == NmiNorm::Geometric ? "geometric" : "arithmetic"}};
}

inline nlohmann::json result_json(const ClusterResult& r, const RunConfig& c,
                                  const std::optional<MetricSet>& metrics = std::nullopt) {
  nlohmann::json j;
  j["assignment"] = r.y.assignment;
  j["k"] = r.y.k;
  j["mhc"] = r.mhc;
  j["iterations"] = r.iterations;
  j["termination"] = to_string(r.termination);
  j["knn_mode_used"] = to_string(r.knn_mode_used);
  j["timings"] = {{"knn_ms", r.timings.knn_ms},
                  {"init_ms", r.timings.init_ms},
                  {"ortho_ms", r.timings.ortho_ms},
                  {"discretize_ms", r.timings.discretize_ms},
                  {"mhc_ms", r.timings.mhc_ms},
                  {"total_ms", r.timings.total_ms}};
  auto hist = nlohmann::json::array();
  for (const auto& s : r.mhc_history) hist.push_back({{"iteration", s.iteration}, {"mhc", s.mhc}});
  j["mhc_history"] = std::move(hist);
  if (metrics) j["metrics"] = {{"acc", metrics->acc}, {"f1", metrics->f1}, {"nmi", metrics->nmi}, {"ari", metrics->ari}};
  if (r.error) j["error"] = r.error_message;
  j["config"] = config_json(c);
  j["version"] = kVersion;
  return j;
}

inline void emit_result(const ClusterResult& r, const RunConfig& c, const std::optional<MetricSet>& metrics,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path);
  out << result_json(r, c, metrics).dump(2) << '\n';
  if (!out) throw RuntimeFailure("write to " + path + " failed");
}

}  // namespace ancka
