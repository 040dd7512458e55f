// Generates a planted-partition hypergraph, clusters it and scores the
// result against the planted labels.

#include <iostream>

#include "ancka/ancka.hpp"

int main() {
  ancka::SyntheticSpec spec;
  spec.kind = ancka::NetworkKind::Hypergraph;
  spec.n = 300;
  spec.k = 3;
  spec.intra_p = 0.05;
  spec.inter_p = 0.005;
  spec.attr_dim = 30;
  spec.attr_noise = 0.6;
  spec.seed = 11;
  const auto data = ancka::generate_synthetic(spec);
  const auto net = ancka::build_network(data.raw);

  ancka::ClusterParams params;
  params.k = spec.k;
  params.knn_k = ancka::default_knn_k(net.kind(), net.n());
  const auto res = ancka::run_ancka(net, params);

  const auto m = ancka::evaluate(res.y.assignment, data.labels);
  std::cout << "iterations " << res.iterations << " (" << ancka::to_string(res.termination) << ")\n"
            << "mhc        " << res.mhc << "  (initial " << res.init_mhc << ")\n"
            << "acc " << m.acc << "  f1 " << m.f1 << "  nmi " << m.nmi << "  ari " << m.ari << '\n';
}
