#include "pdrfe/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pdrfe {

void MarginConfig::validate() const {
  if (!(margin > 0.0) || !std::isfinite(margin)) {
    throw std::invalid_argument("margin must be positive");
  }
  if (negatives == 0) throw std::invalid_argument("negative ratio must be at least 1");
}

namespace {

double dot(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || a.shape() != b.shape()) {
    throw ShapeError("margin_loss: embedding " + shape_to_string(b.shape()) +
                     " does not match customer " + shape_to_string(a.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double margin_loss(const Tensor& h_u, std::span<const Tensor> positives,
                   std::span<const Tensor> negatives, double margin) {
  if (positives.empty() || negatives.empty()) {
    throw std::invalid_argument("margin_loss: positive and negative lists must be nonempty");
  }
  double total = 0.0;
  for (const auto& pos : positives) {
    const double sp = dot(h_u, pos);
    for (const auto& neg : negatives) total += std::max(margin - sp + dot(h_u, neg), 0.0);
  }
  return total;
}

ad::Var margin_loss(const ad::Var& customers, const ad::Var& skills, const MarginBatch& batch,
                    double margin) {
  const std::size_t rows = customers.value().rank() == 2 ? customers.value().dim(0) : 0;
  if (rows != batch.positives.size()) {
    throw ShapeError("margin_loss: " + std::to_string(rows) + " customer rows for " +
                     std::to_string(batch.positives.size()) + " positives");
  }
  if (batch.pair_row.size() != batch.pair_negative.size() || batch.pairs() == 0) {
    throw std::invalid_argument("margin_loss: batch needs matching, nonempty pair lists");
  }
  if (skills.value().rank() != 2 || skills.value().dim(1) != customers.value().dim(1)) {
    throw ShapeError("margin_loss: skill table " + shape_to_string(skills.shape()) +
                     " does not match customers " + shape_to_string(customers.shape()));
  }
  ad::Var pos_score =
      ad::rowwise_dot(customers, ad::gather_rows(skills, ad::make_index(batch.positives)));
  ad::Index pair_row = ad::make_index(batch.pair_row);
  ad::Var neg_score =
      ad::rowwise_dot(ad::gather_rows(customers, pair_row),
                      ad::gather_rows(skills, ad::make_index(batch.pair_negative)));
  ad::Var gap = ad::sub(neg_score, ad::gather_rows(pos_score, pair_row));
  return ad::mean(ad::relu(ad::add_scalar(gap, margin)));
}

double defect_ce(double p, int y) {
  const double q = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return y == 1 ? -std::log(q) : -std::log(1.0 - q);
}

double mean_defect_ce(std::span<const double> p, std::span<const int> y) {
  if (p.size() != y.size()) throw ShapeError("mean_defect_ce: length mismatch");
  if (p.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += defect_ce(p[i], y[i]);
  return total / static_cast<double>(p.size());
}

}  // namespace pdrfe
