#include <gtest/gtest.h>

#include <cmath>

#include "pdrfe/grad_check.hpp"
#include "pdrfe/objectives.hpp"
#include "support.hpp"

using namespace pdrfe;
using pdrfe::testing::random_tensor;
using pdrfe::testing::uniform_index;

namespace {

// A skill vector whose inner product with h_u = [1, 0] is `score`.
Tensor scored(double score) { return Tensor::vector({score, 0.0}); }

const Tensor kUser = Tensor::vector({1.0, 0.0});

double single(double pos, double neg, double margin = 1.0) {
  std::vector<Tensor> p{scored(pos)}, n{scored(neg)};
  return margin_loss(kUser, p, n, margin);
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(MarginLoss, SatisfiedMargin) { EXPECT_DOUBLE_EQ(single(5.0, 0.0), 0.0); }

TEST(MarginLoss, ZeroScoresGiveMargin) { EXPECT_DOUBLE_EQ(single(0.0, 0.0), 1.0); }

TEST(MarginLoss, DirectSubstitution) { EXPECT_NEAR(single(0.3, 0.5), 1.2, 1e-15); }

TEST(MarginLoss, SumsOverAllPairs) {
  std::vector<Tensor> p{scored(0.0), scored(2.0)}, n{scored(0.5), scored(-3.0)};
  // (1.5 + 0) + (0 + 0) with the second positive clearing both negatives.
  EXPECT_NEAR(margin_loss(kUser, p, n, 1.0), 1.5, 1e-15);
  EXPECT_NEAR(margin_loss(kUser, p, n, 2.0), 2.5 + 0.0 + 0.5 + 0.0, 1e-15);
}

TEST(MarginLoss, RejectsEmptyListsAndBadDims) {
  std::vector<Tensor> p{scored(0.0)}, none;
  EXPECT_THROW(margin_loss(kUser, p, none, 1.0), std::invalid_argument);
  EXPECT_THROW(margin_loss(kUser, none, p, 1.0), std::invalid_argument);
  std::vector<Tensor> wide{Tensor::vector({1, 2, 3})};
  EXPECT_THROW(margin_loss(kUser, wide, p, 1.0), ShapeError);
}

TEST(MarginLoss, NonNegativeAndZeroExactlyWhenSatisfied) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng = make_rng(seed, 1);
    const std::size_t d = uniform_index(rng, 1, 4);
    Tensor h = random_tensor({d}, rng);
    std::vector<Tensor> pos, neg;
    for (std::size_t i = 0, n = uniform_index(rng, 1, 3); i < n; ++i) pos.push_back(random_tensor({d}, rng));
    for (std::size_t i = 0, n = uniform_index(rng, 1, 5); i < n; ++i) neg.push_back(random_tensor({d}, rng));
    const double m = 0.1 + static_cast<double>(rng() % 20) / 10.0;
    const double loss = margin_loss(h, pos, neg, m);
    bool all_clear = true;
    for (const Tensor& s : pos)
      for (const Tensor& t : neg) all_clear = all_clear && m - dot(h, s) + dot(h, t) <= 0.0;
    EXPECT_GE(loss, 0.0);
    EXPECT_EQ(loss == 0.0, all_clear);
  }
}

TEST(MarginLoss, MonotoneInScores) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng = make_rng(seed, 2);
    std::vector<double> pos_scores(3), neg_scores(4);
    for (double& v : pos_scores) v = random_tensor({1}, rng)[0];
    for (double& v : neg_scores) v = random_tensor({1}, rng)[0];
    auto loss = [&] {
      std::vector<Tensor> p, n;
      for (double v : pos_scores) p.push_back(scored(v));
      for (double v : neg_scores) n.push_back(scored(v));
      return margin_loss(kUser, p, n, 1.0);
    };
    const double base = loss();
    const std::size_t i = uniform_index(rng, 0, 2), j = uniform_index(rng, 0, 3);
    const double bump = std::abs(random_tensor({1}, rng)[0]);
    pos_scores[i] += bump;
    EXPECT_LE(loss(), base);
    pos_scores[i] -= bump;
    neg_scores[j] += bump;
    EXPECT_GE(loss(), base);
  }
}

TEST(MarginLoss, MarginSweep) {
  for (double m : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    EXPECT_DOUBLE_EQ(single(0.0, 0.0, m), m);
    EXPECT_DOUBLE_EQ(single(m, 0.0, m), 0.0);
  }
}

TEST(MarginConfig, Validation) {
  EXPECT_NO_THROW(MarginConfig{}.validate());
  EXPECT_THROW((MarginConfig{0.0, 5}.validate()), std::invalid_argument);
  EXPECT_THROW((MarginConfig{1.0, 0}.validate()), std::invalid_argument);
}

TEST(BatchedMarginLoss, MeanOfScalarSums) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng = make_rng(seed, 3);
    const std::size_t d = 3, ns = 6, b = uniform_index(rng, 1, 4), k = uniform_index(rng, 1, 3);
    Tensor customers = random_tensor({b, d}, rng), skills = random_tensor({ns, d}, rng);
    MarginBatch batch;
    double total = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
      batch.positives.push_back(uniform_index(rng, 0, ns - 1));
      std::vector<Tensor> negs;
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t s = uniform_index(rng, 0, ns - 1);
        batch.pair_row.push_back(r);
        batch.pair_negative.push_back(s);
        negs.push_back(take_rows(skills, std::vector<std::size_t>{s}).reshaped({d}));
      }
      std::vector<Tensor> pos{take_rows(skills, std::vector<std::size_t>{batch.positives[r]}).reshaped({d})};
      total += margin_loss(take_rows(customers, std::vector<std::size_t>{r}).reshaped({d}), pos, negs, 1.0);
    }
    ad::Tape t;
    const double batched =
        margin_loss(t.constant(customers), t.constant(skills), batch, 1.0).value().item();
    EXPECT_NEAR(batched, total / static_cast<double>(batch.pairs()), 1e-13);
  }
}

TEST(BatchedMarginLoss, GradientsAwayFromHinge) {
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 25; ++seed) {
    Rng rng = make_rng(seed, 4);
    const std::size_t d = uniform_index(rng, 1, 5), ns = uniform_index(rng, 2, 6),
                      b = uniform_index(rng, 1, 4), k = uniform_index(rng, 1, 5);
    Tensor customers = random_tensor({b, d}, rng), skills = random_tensor({ns, d}, rng);
    MarginBatch batch;
    for (std::size_t r = 0; r < b; ++r) {
      batch.positives.push_back(uniform_index(rng, 0, ns - 1));
      for (std::size_t j = 0; j < k; ++j) {
        batch.pair_row.push_back(r);
        batch.pair_negative.push_back(uniform_index(rng, 0, ns - 1));
      }
    }
    bool near_hinge = false;
    for (std::size_t p = 0; p < batch.pairs(); ++p) {
      const std::size_t r = batch.pair_row[p];
      double term = 1.0;
      for (std::size_t i = 0; i < d; ++i)
        term += customers.at(r, i) * (skills.at(batch.pair_negative[p], i) - skills.at(batch.positives[r], i));
      near_hinge = near_hinge || std::abs(term) < 1e-3;
    }
    if (near_hinge) continue;
    auto f = [&](ad::Tape&, std::span<const ad::Var> v) { return margin_loss(v[0], v[1], batch, 1.0); };
    EXPECT_LT(grad_check(f, {customers, skills}).max_rel_error, 1e-4) << seed;
    ++checked;
  }
}

TEST(BatchedMarginLoss, TwoNodeToyGraph) {
  // One customer and one skill scored against a second, negative skill.
  Tensor customer = Tensor::matrix({{0.4, -0.3}});
  Tensor skills = Tensor::matrix({{0.2, 0.1}, {-0.5, 0.6}});
  MarginBatch batch{{0}, {0}, {1}};
  auto f = [&](ad::Tape&, std::span<const ad::Var> v) { return margin_loss(v[0], v[1], batch, 1.0); };
  EXPECT_LT(grad_check(f, {customer, skills}).max_rel_error, 1e-4);
}

TEST(DefectCe, Examples) {
  EXPECT_NEAR(defect_ce(1.0 - 1e-12, 1), 0.0, 1e-11);
  EXPECT_NEAR(defect_ce(0.5, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(defect_ce(0.5, 0), std::log(2.0), 1e-15);
  EXPECT_NEAR(defect_ce(0.0, 1), -std::log(1e-12), 1e-9);
  EXPECT_TRUE(std::isfinite(defect_ce(1.0, 0)));
}

TEST(DefectCe, MeanOverRows) {
  std::vector<double> p{0.5, 0.9, 0.2};
  std::vector<int> y{1, 1, 0};
  const double expect = (std::log(2.0) - std::log(0.9) - std::log(0.8)) / 3.0;
  EXPECT_NEAR(mean_defect_ce(p, y), expect, 1e-15);
}

TEST(DefectCe, ConvexInProbability) {
  Rng rng = make_rng(5, 5);
  std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6);
  for (int i = 0; i < 1000; ++i) {
    const double p1 = u(rng), p2 = u(rng);
    const int y = static_cast<int>(rng() % 2);
    EXPECT_LE(defect_ce(0.5 * (p1 + p2), y), 0.5 * (defect_ce(p1, y) + defect_ce(p2, y)) + 1e-12);
  }
}
