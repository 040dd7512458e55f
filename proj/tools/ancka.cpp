// ancka: command-line driver.
//
//   ancka run    --kind hg --net g.hg --attr g.attr -k 3 -o out.json
//   ancka gen    --kind ug --n 200 --k 4 -o data/sbm
//   ancka oracle --kind hg --net g.hg --attr g.attr --assignment y.labels
//
// Exit codes: 0 ok, 2 validation error, 3 runtime failure.

#include <CLI11.hpp>
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ancka/ancka.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct KindArg {
  ancka::NetworkKind kind;
  bool directed;
};

KindArg parse_kind(const std::string& s) {
  if (s == "hg") return {ancka::NetworkKind::Hypergraph, false};
  if (s == "ug") return {ancka::NetworkKind::Graph, false};
  if (s == "dg") return {ancka::NetworkKind::Graph, true};
  if (s == "mg") return {ancka::NetworkKind::Multiplex, false};
  throw ancka::ValidationError("unknown --kind '" + s + "' (expected hg, ug, dg or mg)");
}

ancka::KnnMode parse_knn_mode(const std::string& s) {
  if (s == "auto") return ancka::KnnMode::Auto;
  if (s == "exact") return ancka::KnnMode::Exact;
  if (s == "approx") return ancka::KnnMode::Approx;
  throw ancka::ValidationError("unknown --knn-mode '" + s + "'");
}

// "dense", "sparse", or "auto": sparse when the file opens with a #shape line.
ancka::AttrFormat resolve_attr_format(const std::string& flag, const std::string& path) {
  if (flag == "dense") return ancka::AttrFormat::DenseTsv;
  if (flag == "sparse") return ancka::AttrFormat::SparseCoo;
  if (flag != "auto") throw ancka::ValidationError("unknown --attr-format '" + flag + "'");
  std::ifstream in(path);
  if (!in) throw ancka::ValidationError("cannot open " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    return line.starts_with("#shape") ? ancka::AttrFormat::SparseCoo : ancka::AttrFormat::DenseTsv;
  }
  return ancka::AttrFormat::DenseTsv;
}

std::vector<std::string> split_paths(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

struct InputArgs {
  std::string kind = "hg";
  std::string net;
  std::string attr;
  std::string attr_format = "auto";
};

void add_input_options(CLI::App* cmd, InputArgs& in) {
  cmd->add_option("--kind", in.kind, "hg | ug | dg | mg")->required();
  cmd->add_option("--net", in.net, "structure file(s), comma separated for multiplex layers")->required();
  cmd->add_option("--attr", in.attr, "attribute matrix")->required();
  cmd->add_option("--attr-format", in.attr_format, "auto | dense | sparse")->capture_default_str();
}

ancka::AttributedNetwork load_network(const InputArgs& in, ancka::ValidationReport* report) {
  const auto kind = parse_kind(in.kind);
  const auto paths = split_paths(in.net);
  const auto raw =
      ancka::load_raw_network(kind.kind, kind.directed, paths, in.attr, resolve_attr_format(in.attr_format, in.attr));
  return ancka::build_network(raw, report);
}

struct RunArgs {
  InputArgs in;
  std::string labels;
  std::size_t k = 0;
  std::optional<std::size_t> knn_k;
  ancka::ClusterParams p;
  std::string knn_mode = "auto";
  bool deterministic = false;
  bool nmi_arithmetic = false;
  std::string knn_cache;
  std::string output;
  bool quiet = false;
};

ancka::KnnGraph knn_with_cache(const ancka::AttributedNetwork& net, const ancka::ClusterParams& p,
                               const std::string& dir) {
  const auto& x = net.attributes();
  const bool approx = p.knn_mode == ancka::KnnMode::Approx ||
                      (p.knn_mode == ancka::KnnMode::Auto && x.rows() >= ancka::kApproxKnnThreshold);
  const auto mode = approx ? ancka::KnnMode::Approx : ancka::KnnMode::Exact;
  const auto path = ancka::neighbor_cache_path(dir, ancka::attribute_hash(x), p.knn_k, mode);
  if (std::filesystem::exists(path)) {
    auto cache = ancka::read_neighbor_cache(path);
    if (cache.lists.size() != x.rows() || cache.k != p.knn_k) {
      throw ancka::ValidationError("neighbor cache " + path + " does not match the input");
    }
    auto g = ancka::build_knn_adjacency(std::move(cache.lists), x);
    g.mode_used = cache.mode;
    return g;
  }
  auto g = ancka::build_knn_graph(x, p.knn_k, mode, p.recall_target, p.seed);
  std::filesystem::create_directories(dir);
  ancka::write_neighbor_cache(path, g.neighbor_lists, p.knn_k, g.mode_used);
  return g;
}

int cmd_run(RunArgs& a) {
  if (a.deterministic) omp_set_num_threads(1);
  std::optional<ancka::ScopedWarningSink> quiet;
  if (a.quiet) quiet.emplace(nullptr);

  ancka::ValidationReport report;
  const auto net = load_network(a.in, &report);
  ancka::ClusterParams p = a.p;
  p.k = a.k;
  p.knn_k = a.knn_k.value_or(ancka::default_knn_k(net.kind(), net.n()));
  p.knn_mode = parse_knn_mode(a.knn_mode);
  p.validate(net.n());

  std::vector<ancka::Label> labels;
  if (!a.labels.empty()) labels = ancka::load_labels(a.labels, net.n());

  ancka::RunConfig cfg;
  cfg.kind = a.in.kind;
  cfg.net_paths = split_paths(a.in.net);
  cfg.attr_path = a.in.attr;
  cfg.attr_format = resolve_attr_format(a.in.attr_format, a.in.attr);
  cfg.labels_path = a.labels;
  cfg.params = p;
  cfg.output_path = a.output;
  cfg.deterministic = a.deterministic;
  cfg.nmi_norm = a.nmi_arithmetic ? ancka::NmiNorm::Arithmetic : ancka::NmiNorm::Geometric;
  cfg.knn_cache_dir = a.knn_cache;

  const auto t0 = std::chrono::steady_clock::now();
  ancka::ClusterResult res;
  if (a.knn_cache.empty()) {
    res = ancka::run_ancka(net, p);
  } else {
    const auto k0 = std::chrono::steady_clock::now();
    const auto g = knn_with_cache(net, p, a.knn_cache);
    const double knn_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - k0).count();
    const ancka::WalkOperator op(net, ancka::knn_transition(g), p.beta, p.alpha, p.gamma);
    res = ancka::run_ancka(op, p);
    res.timings.knn_ms = knn_ms;
    res.knn_mode_used = g.mode_used;
  }
  res.timings.total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  std::optional<ancka::MetricSet> metrics;
  if (!labels.empty() && res.y.n() == net.n()) metrics = ancka::evaluate(res.y.assignment, labels, cfg.nmi_norm);
  ancka::emit_result(res, cfg, metrics, a.output);

  if (!a.quiet) {
    std::cerr << "ancka: n=" << net.n() << " k=" << p.k << " mhc=" << res.mhc << " iterations=" << res.iterations
              << " (" << ancka::to_string(res.termination) << ")";
    if (metrics) std::cerr << " acc=" << metrics->acc << " nmi=" << metrics->nmi;
    std::cerr << '\n';
  }
  if (res.error) {
    std::cerr << "ancka: run failed: " << res.error_message << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

struct GenArgs {
  std::string kind = "hg";
  ancka::SyntheticSpec spec;
  std::string attr_format = "sparse";
  std::string prefix;
};

int cmd_gen(GenArgs& a) {
  const auto kind = parse_kind(a.kind);
  a.spec.kind = kind.kind;
  a.spec.directed = kind.directed;
  const auto fmt = resolve_attr_format(a.attr_format == "auto" ? "sparse" : a.attr_format, "");
  const auto data = ancka::generate_synthetic(a.spec);
  const auto parent = std::filesystem::path(a.prefix).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  const auto files = ancka::dump_synthetic(data, a.prefix, fmt);
  std::string net;
  for (const auto& f : files.net) net += (net.empty() ? "" : ",") + f;
  std::cout << "--kind " << a.kind << " --net " << net << " --attr " << files.attr << " --labels " << files.labels
            << '\n';
  return kExitOk;
}

struct OracleArgs {
  InputArgs in;
  std::string assignment;
  std::size_t knn_k = 0;
  double alpha = 0.2;
  double beta = 0.5;
  int gamma = 3;
  std::string output;
};

// Dense brute-force MHC of a given assignment next to the factored one.
int cmd_oracle(OracleArgs& a) {
  const auto net = load_network(a.in, nullptr);
  ancka::check_oracle_size(net.n());
  const auto labels = ancka::load_labels(a.assignment, net.n());
  ancka::ClusterParams p;
  p.alpha = a.alpha;
  p.beta = a.beta;
  p.gamma = a.gamma;
  p.knn_k = a.knn_k ? a.knn_k : ancka::default_knn_k(net.kind(), net.n());
  p.knn_mode = ancka::KnnMode::Exact;
  const ancka::Index k = *std::max_element(labels.begin(), labels.end()) + ancka::Index{1};
  p.k = k;
  p.validate(net.n());
  const ancka::BcmMatrix y(std::vector<ancka::NodeId>(labels.begin(), labels.end()), k);
  if (y.has_empty_cluster()) throw ancka::ValidationError("assignment leaves a cluster id unused");

  const auto g = ancka::build_knn_graph(net.attributes(), p.knn_k, ancka::KnnMode::Exact);
  const Eigen::MatrixXd pd = ancka::dense_transition_oracle(net, g.adjacency, p.beta);
  const Eigen::MatrixXd s = ancka::dense_S_oracle(pd, p.alpha, p.gamma);
  const ancka::WalkOperator op(net, ancka::knn_transition(g), p.beta, p.alpha, p.gamma);

  nlohmann::json j{{"n", net.n()},
                   {"k", k},
                   {"mhc_oracle", ancka::brute_mhc_oracle(s, y)},
                   {"mhc_escape", ancka::escape_mhc_oracle(s, y)},
                   {"mhc_engine", ancka::calc_mhc(op, y)}};
  if (a.output.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::ofstream out(a.output);
    if (!out) throw ancka::RuntimeFailure("cannot write " + a.output);
    out << j.dump(2) << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attributed network clustering with KNN-augmented random walks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ancka::kVersion);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "cluster a network");
  add_input_options(run_cmd, run.in);
  run_cmd->add_option("--labels", run.labels, "ground-truth labels, enables metrics");
  run_cmd->add_option("-k", run.k, "number of clusters")->required();
  run_cmd->add_option("--knn-k", run.knn_k, "neighbors per node (default by kind and size)");
  run_cmd->add_option("--alpha", run.p.alpha)->capture_default_str();
  run_cmd->add_option("--beta", run.p.beta)->capture_default_str();
  run_cmd->add_option("--gamma", run.p.gamma)->capture_default_str();
  run_cmd->add_option("--eps-q", run.p.eps_q)->capture_default_str();
  run_cmd->add_option("--t-a", run.p.t_a)->capture_default_str();
  run_cmd->add_option("--t-i", run.p.t_i)->capture_default_str();
  run_cmd->add_option("--tau", run.p.tau)->capture_default_str();
  run_cmd->add_option("--knn-mode", run.knn_mode, "auto | exact | approx")->capture_default_str();
  run_cmd->add_option("--recall-target", run.p.recall_target, "approximate KNN audit target")->capture_default_str();
  run_cmd->add_option("--seed", run.p.seed)->capture_default_str();
  run_cmd->add_flag("--deterministic", run.deterministic, "single-threaded fixed-order reductions");
  run_cmd->add_flag("--nmi-arithmetic", run.nmi_arithmetic, "normalize NMI by the arithmetic mean of entropies");
  run_cmd->add_option("--knn-cache", run.knn_cache, "directory for cached neighbor lists");
  run_cmd->add_flag("-q,--quiet", run.quiet, "suppress warnings and the summary line");
  run_cmd->add_option("-o,--output", run.output, "result JSON")->required();

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "write a planted-partition instance");
  gen_cmd->add_option("--kind", gen.kind, "hg | ug | dg | mg")->capture_default_str();
  gen_cmd->add_option("--n", gen.spec.n)->capture_default_str();
  gen_cmd->add_option("--k", gen.spec.k)->capture_default_str();
  gen_cmd->add_option("--intra-p", gen.spec.intra_p)->capture_default_str();
  gen_cmd->add_option("--inter-p", gen.spec.inter_p)->capture_default_str();
  gen_cmd->add_option("--attr-dim", gen.spec.attr_dim)->capture_default_str();
  gen_cmd->add_option("--attr-noise", gen.spec.attr_noise)->capture_default_str();
  gen_cmd->add_option("--layers", gen.spec.layers, "multiplex layer count")->capture_default_str();
  gen_cmd->add_option("--seed", gen.spec.seed)->capture_default_str();
  gen_cmd->add_option("--attr-format", gen.attr_format, "dense | sparse")->capture_default_str();
  gen_cmd->add_option("-o,--output", gen.prefix, "output path prefix")->required();

  OracleArgs orc;
  auto* orc_cmd = app.add_subcommand("oracle", "dense brute-force MHC of an assignment (n <= 2000)");
  add_input_options(orc_cmd, orc.in);
  orc_cmd->add_option("--assignment", orc.assignment, "cluster id per line")->required();
  orc_cmd->add_option("--knn-k", orc.knn_k);
  orc_cmd->add_option("--alpha", orc.alpha)->capture_default_str();
  orc_cmd->add_option("--beta", orc.beta)->capture_default_str();
  orc_cmd->add_option("--gamma", orc.gamma)->capture_default_str();
  orc_cmd->add_option("-o,--output", orc.output, "write JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*gen_cmd) return cmd_gen(gen);
    if (*orc_cmd) return cmd_oracle(orc);
  } catch (const ancka::ValidationError& e) {
    std::cerr << "ancka: error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "ancka: failure: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}
