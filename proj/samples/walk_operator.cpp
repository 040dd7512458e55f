// Builds the joint walk operator of a tiny hypergraph and compares the
// factored MHC with the dense reference.

#include <iostream>

#include "ancka/ancka.hpp"

int main() {
  ancka::RawNetwork raw;
  raw.kind = ancka::NetworkKind::Hypergraph;
  raw.n = 6;
  raw.hyperedges = {{0, 1, 2}, {1, 2}, {3, 4, 5}, {4, 5}, {2, 3}};
  raw.attributes = ancka::AttributeMatrix::from_triplets(
      6, 2, {{0, 0, 1.0}, {1, 0, 1.0}, {2, 0, 0.8}, {2, 1, 0.2}, {3, 1, 0.9}, {4, 1, 1.0}, {5, 1, 1.0}});
  const auto net = ancka::build_network(raw);

  const auto knn = ancka::build_knn_graph(net.attributes(), 2, ancka::KnnMode::Exact);
  const ancka::WalkOperator op(net, ancka::knn_transition(knn), 0.5, 0.2, 3);
  const ancka::BcmMatrix y({0, 0, 0, 1, 1, 1}, 2);

  const Eigen::MatrixXd p = ancka::dense_transition_oracle(net, knn.adjacency, 0.5);
  const Eigen::MatrixXd s = ancka::dense_S_oracle(p, 0.2, 3);
  std::cout << "dense P:\n" << p << "\n\n"
            << "mhc (factored) " << ancka::calc_mhc(op, y) << '\n'
            << "mhc (dense)    " << ancka::brute_mhc_oracle(s, y) << '\n';
}
