#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pdrfe/autodiff.hpp"
#include "pdrfe/tensor.hpp"

namespace pdrfe {

struct MarginConfig {
  double margin = 1.0;
  std::size_t negatives = 5;

  void validate() const;
};

/// Σ over every (positive, negative) pair of max(M − ⟨h_u,h_s⟩ + ⟨h_u,h_ŝ⟩, 0).
double margin_loss(const Tensor& h_u, std::span<const Tensor> positives,
                   std::span<const Tensor> negatives, double margin);

/// Index layout of a minibatch for the batched margin objective. Row b of the
/// customer representation is scored against skill positives[b]; pair p compares
/// row pair_row[p] against skill pair_negative[p].
struct MarginBatch {
  std::vector<std::size_t> positives;
  std::vector<std::size_t> pair_row;
  std::vector<std::size_t> pair_negative;

  std::size_t pairs() const { return pair_row.size(); }
};

/// Mean over the batch's pairs of the hinge term. `customers` is [B×d] (one row per
/// positive edge), `skills` is the full skill table [|S|×d].
ad::Var margin_loss(const ad::Var& customers, const ad::Var& skills, const MarginBatch& batch,
                    double margin);

/// −(y ln p + (1−y) ln(1−p)) with p clamped to [1e-12, 1−1e-12].
double defect_ce(double p, int y);
double mean_defect_ce(std::span<const double> p, std::span<const int> y);

}  // namespace pdrfe
