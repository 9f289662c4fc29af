#include <gtest/gtest.h>

#include <cmath>
#include <array>
#include <map>
#include <set>
#include <numbers>

#include <nlohmann/json.hpp>

#include "pdrfe/objectives.hpp"
#include "pdrfe/synthetic.hpp"
#include "support.hpp"

using namespace pdrfe;
using pdrfe::testing::TempDir;

namespace {

SynthConfig small_config(std::uint64_t seed) {
  SynthConfig c;
  c.n_customers = 40;
  c.n_skills = 10;
  c.n_interactions = 2000;
  c.seed = seed;
  return c;
}

// Plug-in estimate of I(cluster; label) in nats.
double mutual_information(const std::vector<std::size_t>& cluster,
                          const std::vector<InteractionRow>& rows, std::size_t clusters) {
  const double n = static_cast<double>(rows.size());
  std::vector<std::array<double, 2>> joint(clusters, {0.0, 0.0});
  for (std::size_t r = 0; r < rows.size(); ++r) joint[cluster[r]][rows[r].defect] += 1.0;
  double py[2] = {0.0, 0.0};
  for (const auto& j : joint) {
    py[0] += j[0];
    py[1] += j[1];
  }
  double mi = 0.0;
  for (const auto& j : joint) {
    const double pc = (j[0] + j[1]) / n;
    for (int y = 0; y < 2; ++y)
      if (j[y] > 0) mi += j[y] / n * std::log((j[y] / n) / (pc * py[y] / n));
  }
  return mi;
}

}  // namespace

TEST(SynthConfig, JsonAndValidation) {
  SynthConfig c = small_config(3);
  c.context_weight = 0.5;
  EXPECT_EQ(to_json(synth_config_from_json(to_json(c))), to_json(c));
  EXPECT_THROW(synth_config_from_json({{"gamma", 2}}), std::invalid_argument);
  c.base_rate = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config(0);
  c.n_skills = 0;
  EXPECT_THROW(generate(c), std::invalid_argument);
  SynthConfig d;
  EXPECT_EQ(d.n_interactions, 50000u);
  EXPECT_EQ(d.n_customers, 500u);
  EXPECT_EQ(d.n_skills, 50u);
  EXPECT_EQ(d.context_weight, 2.0);
}

TEST(Generate, CountsAndIdRanges) {
  SynthConfig c = small_config(1);
  SynthData d = generate(c);
  ASSERT_EQ(d.rows.size(), c.n_interactions);
  ASSERT_EQ(d.truth.cluster.size(), c.n_interactions);
  ASSERT_EQ(d.truth.bayes_p.size(), c.n_interactions);
  EXPECT_EQ(d.customers.ids.size(), c.n_customers);
  EXPECT_EQ(d.skills.ids.size(), c.n_skills);
  std::set<std::string> customers(d.customers.ids.begin(), d.customers.ids.end());
  std::set<std::string> skills(d.skills.ids.begin(), d.skills.ids.end());
  for (std::size_t r = 0; r < d.rows.size(); ++r) {
    const InteractionRow& row = d.rows[r];
    EXPECT_TRUE(customers.count(row.cid));
    EXPECT_TRUE(skills.count(row.sid));
    EXPECT_TRUE(row.defect == 0 || row.defect == 1);
    EXPECT_LT(d.truth.cluster[r], c.n_utterance_clusters);
    EXPECT_EQ(row.utterance.rfind(cluster_token(d.truth.cluster[r], 0).substr(0, 2), 0), 0u);
    EXPECT_GE(d.truth.bayes_p[r], 0.0);
    EXPECT_LE(d.truth.bayes_p[r], 1.0);
  }
}

TEST(Generate, SameSeedSameLog) {
  SynthData a = generate(small_config(7)), b = generate(small_config(7));
  SynthData other = generate(small_config(8));
  ASSERT_EQ(a.rows.size(), b.rows.size());
  bool differs = false;
  for (std::size_t r = 0; r < a.rows.size(); ++r) {
    EXPECT_EQ(a.rows[r].cid, b.rows[r].cid);
    EXPECT_EQ(a.rows[r].sid, b.rows[r].sid);
    EXPECT_EQ(a.rows[r].utterance, b.rows[r].utterance);
    EXPECT_EQ(a.rows[r].defect, b.rows[r].defect);
    EXPECT_EQ(a.truth.bayes_p[r], b.truth.bayes_p[r]);
    differs |= a.rows[r].cid != other.rows[r].cid || a.rows[r].defect != other.rows[r].defect;
  }
  EXPECT_TRUE(differs);
}

TEST(Generate, ClusterVocabulariesAreDisjoint) {
  std::set<std::string> seen;
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_TRUE(seen.insert(cluster_token(c, j)).second);
}

TEST(Generate, DefectRateWithinThreeSigma) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthConfig c = small_config(seed);
    c.n_interactions = 10000;
    SynthData d = generate(c);
    double mean_p = 0.0, var = 0.0, hits = 0.0;
    for (std::size_t r = 0; r < d.rows.size(); ++r) {
      mean_p += d.truth.bayes_p[r];
      var += d.truth.bayes_p[r] * (1.0 - d.truth.bayes_p[r]);
      hits += d.rows[r].defect;
    }
    EXPECT_LE(std::abs(hits - mean_p), 3.0 * std::sqrt(var)) << seed;
  }
}

TEST(Generate, WithoutContextWeightLabelsIgnoreCluster) {
  SynthConfig c;
  c.context_weight = 0.0;
  c.seed = 2;
  SynthData d = generate(c);
  const double mi = mutual_information(d.truth.cluster, d.rows, c.n_utterance_clusters);
  // Plug-in bias is (clusters − 1) / 2n ≈ 3e-5 nats.
  EXPECT_LT(mi, 5e-4);
  for (std::size_t r = 0; r < d.rows.size(); ++r) EXPECT_NEAR(d.truth.bayes_p[r], 0.2, 1e-12);

  SynthConfig ctx = c;
  ctx.context_weight = 2.0;
  SynthData e = generate(ctx);
  EXPECT_GT(mutual_information(e.truth.cluster, e.rows, ctx.n_utterance_clusters), 5e-3);
}

TEST(Generate, BayesPredictorNeedsContext) {
  SynthData d = generate(SynthConfig{});
  const double bayes = truth_ce(d.truth.bayes_p, d.rows);
  const double context_free = truth_ce(d.truth.context_free_p, d.rows);
  EXPECT_LT(bayes, std::numbers::ln2);
  EXPECT_LT(bayes, context_free);

  // Per-pair label averages fitted on even rows, scored on odd rows.
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> counts;
  double pos = 0.0, total = 0.0;
  for (std::size_t r = 0; r < d.rows.size(); r += 2) {
    auto& [hits, n] = counts[{d.rows[r].cid, d.rows[r].sid}];
    hits += d.rows[r].defect;
    n += 1.0;
    pos += d.rows[r].defect;
    total += 1.0;
  }
  const double prior = pos / total, strength = 2.0;
  double averaged = 0.0, bayes_odd = 0.0, n_odd = 0.0;
  for (std::size_t r = 1; r < d.rows.size(); r += 2) {
    const auto it = counts.find({d.rows[r].cid, d.rows[r].sid});
    const double hits = it == counts.end() ? 0.0 : it->second.first;
    const double n = it == counts.end() ? 0.0 : it->second.second;
    const double p = (hits + strength * prior) / (n + strength);
    averaged += defect_ce(p, d.rows[r].defect);
    bayes_odd += defect_ce(d.truth.bayes_p[r], d.rows[r].defect);
    n_odd += 1.0;
  }
  EXPECT_GT(averaged / n_odd, bayes_odd / n_odd);
}

TEST(TruthCe, MatchesHandComputation) {
  std::vector<InteractionRow> rows{{"a", "b", "", 1}, {"a", "b", "", 0}};
  const std::vector<double> p{0.8, 0.3};
  EXPECT_NEAR(truth_ce(p, rows), -(std::log(0.8) + std::log(0.7)) / 2.0, 1e-15);
  const std::vector<std::size_t> second{1};
  EXPECT_NEAR(truth_ce(p, rows, second), -std::log(0.7), 1e-15);
  EXPECT_THROW(truth_ce({0.5}, rows), std::invalid_argument);
}

TEST(WriteSynthetic, RoundTrip) {
  TempDir dir("synth");
  SynthData d = generate(small_config(4));
  SynthPaths paths = write_synthetic(dir.path(), d);
  const auto rows = load_interaction_log(paths.interactions);
  ASSERT_EQ(rows.size(), d.rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    EXPECT_EQ(rows[r].cid, d.rows[r].cid);
    EXPECT_EQ(rows[r].utterance, d.rows[r].utterance);
    EXPECT_EQ(rows[r].defect, d.rows[r].defect);
  }
  GroundTruth t = load_ground_truth(paths.ground_truth);
  EXPECT_EQ(t.bayes_p, d.truth.bayes_p);
  EXPECT_EQ(t.context_free_p, d.truth.context_free_p);
  EXPECT_EQ(t.cluster, d.truth.cluster);
  EXPECT_EQ(t.customer_latent, d.truth.customer_latent);
}
