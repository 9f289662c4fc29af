#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "pdrfe/edge_encoder.hpp"
#include "pdrfe/graph.hpp"
#include "pdrfe/interaction_log.hpp"
#include "support.hpp"

using namespace pdrfe;
using pdrfe::testing::random_tensor;
using pdrfe::testing::uniform_index;

namespace {

IndexedLog fake_log() {
  std::vector<InteractionRow> rows{
      {"10xxxxx", "Help", "What happened to my music", 0},
      {"21xxxxxx", "Help", "What can I do today", 0},
      {"21xxxxxx", "Communication", "No", 1},
      {"89xxxxx", "Help", "Can you do a tutorial", 0},
      {"10xxxxx", "Communication", "Drop in all devices", 1},
  };
  return index_log(rows, HashingEncoder({8, true, 0}));
}

BipartiteGraph graph_of(const IndexedLog& log, std::size_t d = 4) {
  NodeFeatures f{Tensor({log.customers.size(), d}), Tensor({log.skills.size(), d})};
  return build_graph(log.records, std::move(f));
}

BipartiteGraph random_graph(Rng& rng, std::size_t nc, std::size_t ns, std::size_t ne) {
  std::vector<InteractionRecord> recs;
  for (std::size_t e = 0; e < ne; ++e) {
    recs.push_back({uniform_index(rng, 0, nc - 1), uniform_index(rng, 0, ns - 1),
                    random_tensor({2}, rng), static_cast<int>(rng() % 2)});
  }
  return build_graph(recs, {Tensor({nc, 3}), Tensor({ns, 3})});
}

using EdgeKey = std::tuple<std::size_t, std::size_t, int, std::size_t>;

std::multiset<EdgeKey> edge_multiset(const BipartiteGraph& g) {
  std::multiset<EdgeKey> out;
  for (std::size_t e = 0; e < g.num_edges(); ++e)
    out.insert({g.customer_of(e), g.skill_of(e), g.label_of(e), g.edge_id(e)});
  return out;
}

}  // namespace

TEST(BuildGraph, EmptyLog) {
  BipartiteGraph g = build_graph({}, {Tensor({2, 3}), Tensor({1, 3})});
  EXPECT_EQ(g.num_edges(), 0u);
  EXPECT_EQ(g.num_customers(), 2u);
  EXPECT_EQ(g.num_skills(), 1u);
  EXPECT_TRUE(g.incident_edges(NodeId::customer(1)).empty());
  EXPECT_TRUE(g.incident_edges(NodeId::skill(0)).empty());
}

TEST(BuildGraph, FakeLogDegrees) {
  IndexedLog log = fake_log();
  BipartiteGraph g = graph_of(log);
  EXPECT_EQ(g.num_edges(), 5u);
  EXPECT_EQ(g.num_customers(), 3u);
  EXPECT_EQ(g.num_skills(), 2u);
  EXPECT_EQ(g.degree(NodeId::customer(log.customers.at("10xxxxx"))), 2u);
  EXPECT_EQ(g.degree(NodeId::customer(log.customers.at("89xxxxx"))), 1u);
}

TEST(BuildGraph, FakeLogNeighbors) {
  IndexedLog log = fake_log();
  BipartiteGraph g = graph_of(log);
  std::set<std::string> skills;
  for (const Neighbor& n : neighbors(g, NodeId::customer(log.customers.at("21xxxxxx")))) {
    EXPECT_EQ(n.other.kind, NodeKind::skill);
    skills.insert(log.skills.ids()[n.other.index]);
  }
  EXPECT_EQ(skills, (std::set<std::string>{"Help", "Communication"}));
}

TEST(BuildGraph, DanglingIdNamesRow) {
  std::vector<InteractionRecord> recs{{0, 0, Tensor::vector({1}), 0}, {3, 0, Tensor::vector({1}), 0}};
  try {
    build_graph(recs, {Tensor({2, 2}), Tensor({1, 2})});
    FAIL() << "expected invalid_argument";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
  }
}

TEST(BuildGraph, InconsistentFeatureWidth) {
  std::vector<InteractionRecord> recs{{0, 0, Tensor::vector({1, 2}), 0},
                                      {0, 0, Tensor::vector({1}), 0}};
  EXPECT_THROW(build_graph(recs, {Tensor({1, 2}), Tensor({1, 2})}), ShapeError);
  EXPECT_THROW(build_graph({}, {Tensor({2}), Tensor({1, 3})}), ShapeError);
}

TEST(BuildGraph, CsrRoundTripIsMultiset) {
  Rng rng = make_rng(0, 1);
  BipartiteGraph g = random_graph(rng, 25, 25, 200);
  std::multiset<std::pair<std::size_t, std::size_t>> from_list, from_customers, from_skills;
  for (std::size_t e = 0; e < g.num_edges(); ++e) from_list.insert({g.customer_of(e), g.skill_of(e)});
  for (std::size_t u = 0; u < g.num_customers(); ++u)
    for (const Neighbor& n : neighbors(g, NodeId::customer(u))) from_customers.insert({u, n.other.index});
  for (std::size_t s = 0; s < g.num_skills(); ++s)
    for (const Neighbor& n : neighbors(g, NodeId::skill(s))) from_skills.insert({n.other.index, s});
  EXPECT_EQ(from_customers, from_list);
  EXPECT_EQ(from_skills, from_list);
}

TEST(Neighbors, HandshakeAndMutualConsistency) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = make_rng(seed, 2);
    BipartiteGraph g = random_graph(rng, uniform_index(rng, 1, 8), uniform_index(rng, 1, 8),
                                    uniform_index(rng, 0, 30));
    std::size_t total = 0;
    for (std::size_t u = 0; u < g.num_customers(); ++u) {
      for (const Neighbor& n : neighbors(g, NodeId::customer(u))) {
        ++total;
        bool mirrored = false;
        for (const Neighbor& back : neighbors(g, n.other))
          mirrored = mirrored || (back.edge_id == n.edge_id && back.other == NodeId::customer(u));
        EXPECT_TRUE(mirrored);
      }
    }
    EXPECT_EQ(total, g.num_edges());
  }
}

TEST(Neighbors, IsolatedNode) {
  BipartiteGraph g = build_graph({}, {Tensor({1, 1}), Tensor({1, 1})});
  EXPECT_TRUE(neighbors(g, NodeId::customer(0)).empty());
}

TEST(Neighbors, ParallelEdgesListedSeparately) {
  std::vector<InteractionRecord> recs{{0, 0, Tensor::vector({1}), 0}, {0, 0, Tensor::vector({2}), 1}};
  BipartiteGraph g = build_graph(recs, {Tensor({1, 1}), Tensor({1, 1})});
  EXPECT_EQ(neighbors(g, NodeId::customer(0)).size(), 2u);
}

TEST(SplitEdges, HundredEdges) {
  Rng rng = make_rng(1, 3);
  BipartiteGraph g = random_graph(rng, 10, 10, 100);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto [train, test] = split_edges(g, 0.8, seed);
    EXPECT_EQ(train.num_edges(), 80u);
    EXPECT_EQ(test.num_edges(), 20u);
    EXPECT_EQ(train.num_customers(), g.num_customers());
    EXPECT_EQ(test.num_skills(), g.num_skills());
  }
}

TEST(SplitEdges, PartitionForManySeeds) {
  Rng rng = make_rng(2, 3);
  BipartiteGraph g = random_graph(rng, 12, 7, 137);
  const auto all = edge_multiset(g);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto [train, test] = split_edges(g, 0.8, seed);
    auto joined = edge_multiset(train);
    auto rest = edge_multiset(test);
    joined.insert(rest.begin(), rest.end());
    EXPECT_EQ(joined, all);
    std::set<std::size_t> ids(train.edge_ids().begin(), train.edge_ids().end());
    for (std::size_t id : test.edge_ids()) EXPECT_EQ(ids.count(id), 0u);
  }
}

TEST(SplitEdges, Deterministic) {
  Rng rng = make_rng(3, 3);
  BipartiteGraph g = random_graph(rng, 5, 5, 40);
  auto a = split_edges(g, 0.8, 11);
  auto b = split_edges(g, 0.8, 11);
  EXPECT_TRUE(std::ranges::equal(a.first.edge_ids(), b.first.edge_ids()));
  auto c = split_edges(g, 0.8, 12);
  EXPECT_FALSE(std::ranges::equal(a.first.edge_ids(), c.first.edge_ids()));
}

TEST(SplitEdges, FractionOutOfRange) {
  Rng rng = make_rng(4, 3);
  BipartiteGraph g = random_graph(rng, 2, 2, 4);
  EXPECT_THROW(split_edges(g, 0.0, 0), std::invalid_argument);
  EXPECT_THROW(split_edges(g, 1.0, 0), std::invalid_argument);
  EXPECT_THROW(split_edges(g, -0.2, 0), std::invalid_argument);
}

TEST(SplitEdges, PerSkillProportions) {
  Rng rng = make_rng(5, 3);
  BipartiteGraph g = random_graph(rng, 200, 20, 10000);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto [train, test] = split_edges(g, 0.8, seed);
    for (std::size_t s = 0; s < g.num_skills(); ++s) {
      const double total = static_cast<double>(g.degree(NodeId::skill(s)));
      if (total < 100) continue;
      const double share = static_cast<double>(train.degree(NodeId::skill(s))) / total;
      EXPECT_NEAR(share, 0.8, 0.05) << "skill " << s << " seed " << seed;
    }
  }
}

TEST(SampleNegatives, ForcedOutcome) {
  std::vector<InteractionRecord> recs;
  for (std::size_t s = 0; s < 5; ++s)
    if (s != 3) recs.push_back({0, s, Tensor::vector({1}), 0});
  BipartiteGraph g = build_graph(recs, {Tensor({1, 1}), Tensor({5, 1})});
  Rng rng = make_rng(0, 4);
  for (int i = 0; i < 10; ++i) {
    auto neg = sample_negatives(g, NodeId::customer(0), 1, rng);
    ASSERT_EQ(neg.size(), 1u);
    EXPECT_EQ(neg[0], NodeId::skill(3));
  }
}

TEST(SampleNegatives, TooFewNonNeighbors) {
  std::vector<InteractionRecord> recs{{0, 0, Tensor::vector({1}), 0}};
  BipartiteGraph g = build_graph(recs, {Tensor({1, 1}), Tensor({3, 1})});
  Rng rng = make_rng(0, 4);
  EXPECT_THROW(sample_negatives(g, NodeId::customer(0), 3, rng), std::invalid_argument);
  EXPECT_THROW(sample_negatives(g, NodeId::skill(0), 1, rng), std::invalid_argument);
}

TEST(SampleNegatives, NeverReturnsNeighborAndDistinct) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng = make_rng(seed, 5);
    BipartiteGraph g = random_graph(rng, 4, 8, 12);
    for (std::size_t u = 0; u < g.num_customers(); ++u) {
      std::set<std::size_t> adj;
      for (const Neighbor& n : neighbors(g, NodeId::customer(u))) adj.insert(n.other.index);
      const std::size_t free = g.num_skills() - adj.size();
      for (std::size_t k = 1; k <= free; ++k) {
        auto neg = sample_negatives(g, NodeId::customer(u), k, rng);
        std::set<std::size_t> seen;
        for (const NodeId& s : neg) {
          EXPECT_EQ(adj.count(s.index), 0u);
          seen.insert(s.index);
        }
        EXPECT_EQ(seen.size(), k);
      }
    }
  }
}

TEST(SampleNegatives, UniformOverEligible) {
  std::vector<InteractionRecord> recs;
  for (std::size_t s = 0; s < 5; ++s) recs.push_back({0, s, Tensor::vector({1}), 0});
  BipartiteGraph g = build_graph(recs, {Tensor({1, 1}), Tensor({15, 1})});
  Rng rng = make_rng(7, 6);
  std::map<std::size_t, int> counts;
  for (int i = 0; i < 1000; ++i) counts[sample_negatives(g, NodeId::customer(0), 1, rng)[0].index]++;
  EXPECT_EQ(counts.size(), 10u);
  const double sigma = std::sqrt(1000 * 0.1 * 0.9);
  double chi2 = 0.0;
  for (auto [skill, c] : counts) {
    EXPECT_GE(skill, 5u);
    EXPECT_LE(std::abs(c - 100.0), 3 * sigma);
    chi2 += (c - 100.0) * (c - 100.0) / 100.0;
  }
  // 99.9th percentile of chi-square with 9 degrees of freedom.
  EXPECT_LT(chi2, 27.88);
}

TEST(NegativeSampler, UnionExcludesBothGraphs) {
  std::vector<InteractionRecord> a{{0, 0, Tensor::vector({1}), 0}};
  std::vector<InteractionRecord> b{{0, 1, Tensor::vector({1}), 0}};
  BipartiteGraph ga = build_graph(a, {Tensor({1, 1}), Tensor({4, 1})});
  BipartiteGraph gb = build_graph(b, {Tensor({1, 1}), Tensor({4, 1})});
  const BipartiteGraph* both[] = {&ga, &gb};
  NegativeSampler sampler(both);
  EXPECT_EQ(sampler.non_neighbor_count(0), 2u);
  Rng rng = make_rng(0, 7);
  auto picks = sampler.sample(0, 5, rng);
  std::sort(picks.begin(), picks.end());
  EXPECT_EQ(picks, (std::vector<std::size_t>{2, 3}));
}

TEST(Subgraph, KeepsNodesAndIds) {
  Rng rng = make_rng(8, 8);
  BipartiteGraph g = random_graph(rng, 4, 4, 10);
  std::vector<std::size_t> keep{7, 2};
  BipartiteGraph s = g.subgraph(keep);
  ASSERT_EQ(s.num_edges(), 2u);
  EXPECT_EQ(s.edge_id(0), g.edge_id(7));
  EXPECT_EQ(s.customer_of(1), g.customer_of(2));
  EXPECT_EQ(s.num_customers(), 4u);
  EXPECT_EQ(max_abs_diff(take_rows(g.edge_features(), keep), s.edge_features()), 0.0);
}

TEST(NodeFeatureInit, GaussianIsSeeded) {
  EXPECT_EQ(gaussian_features(4, 3, 1), gaussian_features(4, 3, 1));
  EXPECT_NE(gaussian_features(4, 3, 1), gaussian_features(4, 3, 2));
  Tensor p = project_features(Tensor::identity(3), 5, 0);
  EXPECT_EQ(p.shape(), (Shape{3, 5}));
}
