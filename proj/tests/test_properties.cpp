#include <gtest/gtest.h>

#include "criteria.hpp"

using namespace ancka;
using namespace ancka::testing;

TEST(Properties, OracleEquivalence) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const OracleTrial t = oracle_trial(s);
    EXPECT_LT(t.mhc_error, 1e-9) << "seed " << s;
    EXPECT_LT(t.apply_error, 1e-10) << "seed " << s;
  }
}

TEST(Properties, RowStochastic) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const OracleTrial t = oracle_trial(s);
    EXPECT_LT(t.row_sum_error, 1e-12) << "seed " << s;
    // Self-loops keep every row of the joint walk alive (multiplex aside).
    EXPECT_LT(t.joint_row_error, 1e-12) << "seed " << s;
  }
}

TEST(Properties, SubspaceResidualWhenStoppingRuleFires) {
  int fired = 0, positive = 0;
  for (std::uint64_t s = 0; s < 40; ++s) {
    const SubspaceTrial t = subspace_trial(s, 1e-8, 20000);
    if (t.positive_leading) {
      ++positive;
      EXPECT_TRUE(t.fired) << "seed " << s;
    }
    if (!t.fired) continue;
    ++fired;
    EXPECT_LT(t.residual, 1e-6) << "seed " << s;
  }
  EXPECT_GT(positive, 0);
  EXPECT_GE(fired, positive);
}

TEST(Properties, DiscretizationDescendsAndRecovers) {
  int recovered = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const DiscretizeTrial t = discretize_trial(s);
    recovered += t.recovered;
    EXPECT_TRUE(t.monotone) << "seed " << s;
  }
  EXPECT_GE(recovered, 48);
  for (std::uint64_t s = 0; s < 200; ++s) EXPECT_TRUE(discretize_descends(1000 + s)) << "seed " << s;
}

TEST(Properties, PlantedPartitionIsRecovered) {
  const std::array<std::pair<NetworkKind, bool>, 4> kinds{
      {{NetworkKind::Hypergraph, false}, {NetworkKind::Graph, false}, {NetworkKind::Graph, true}, {NetworkKind::Multiplex, false}}};
  for (auto [kind, directed] : kinds) {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const MetricSet m = planted_trial(kind, directed, s);
      EXPECT_EQ(m.acc, 1.0) << to_string(kind) << " seed " << s;
      EXPECT_EQ(m.ari, 1.0) << to_string(kind) << " seed " << s;
    }
  }
}
