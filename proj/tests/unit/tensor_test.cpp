#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "pdrfe/tensor.hpp"
#include "support.hpp"

using namespace pdrfe;

TEST(Tensor, ShapeAndData) {
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.row_width(), 3u);
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
}

TEST(Tensor, ScalarIsRankZero) {
  Tensor s = Tensor::scalar(4.5);
  EXPECT_EQ(s.rank(), 0u);
  EXPECT_EQ(s.size(), 1u);
  EXPECT_DOUBLE_EQ(s.item(), 4.5);
}

TEST(Tensor, MatrixAccess) {
  Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_DOUBLE_EQ(m.at(1, 0), 3.0);
  EXPECT_EQ(m.row(1)[1], 4.0);
  EXPECT_EQ(Tensor::identity(2), Tensor::matrix({{1, 0}, {0, 1}}));
}

TEST(Tensor, RejectsNonFinite) {
  Tensor t = Tensor::vector({1.0, std::numeric_limits<double>::quiet_NaN()});
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(t.require_finite("probe"), NonFiniteError);
  Tensor inf = Tensor::vector({std::numeric_limits<double>::infinity()});
  EXPECT_THROW(inf.require_finite("probe"), NonFiniteError);
}

TEST(Tensor, Reshape) {
  Tensor t = Tensor::vector({1, 2, 3, 4, 5, 6});
  Tensor r = t.reshaped({2, 3});
  EXPECT_DOUBLE_EQ(r.at(1, 0), 4.0);
  EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
}

TEST(Tensor, TakeRowsAndConcat) {
  Tensor m = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}});
  std::vector<std::size_t> pick{2, 0, 2};
  EXPECT_EQ(take_rows(m, pick), Tensor::matrix({{5, 6}, {1, 2}, {5, 6}}));
  Tensor c = concat_cols(Tensor::matrix({{1}, {2}}), Tensor::matrix({{3, 4}, {5, 6}}));
  EXPECT_EQ(c, Tensor::matrix({{1, 3, 4}, {2, 5, 6}}));
  std::vector<Tensor> parts{Tensor::matrix({{1, 2}}), Tensor::matrix({{3, 4}})};
  EXPECT_EQ(concat_rows(parts), Tensor::matrix({{1, 2}, {3, 4}}));
}

TEST(Tensor, MaxAbsDiff) {
  EXPECT_DOUBLE_EQ(max_abs_diff(Tensor::vector({1, 2}), Tensor::vector({1.5, 1})), 1.0);
}
