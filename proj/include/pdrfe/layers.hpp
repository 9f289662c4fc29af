#pragma once

#include <cstddef>
#include <cstdint>

#include "pdrfe/autodiff.hpp"
#include "pdrfe/graph.hpp"
#include "pdrfe/model.hpp"
#include "pdrfe/tensor.hpp"

namespace pdrfe {

/// Per-node embeddings at layer `layer`, as plain tensors.
struct EmbeddingTable {
  Tensor customers;
  Tensor skills;
  std::size_t layer = 0;
};

/// Per-node embeddings recorded on a tape.
struct NodeEmbeddings {
  ad::Var customers;
  ad::Var skills;
  std::size_t layer = 0;
};

/// Attention coefficients of one edge-attention layer, indexed by edge position.
struct AttentionTrace {
  Tensor into_customers;
  Tensor into_skills;
};

/// Running record of the per-target normalization check done inside every
/// attention forward pass.
struct AttentionAudit {
  std::uint64_t passes = 0;
  std::uint64_t segments = 0;
  double max_deviation = 0.0;
};

AttentionAudit attention_audit();
void reset_attention_audit();

// h_i' = h_i + mean_j reshape(W_e e_ij + b_e, d×d) h_j
NodeEmbeddings nnconv_forward(const NnconvParams& p, const BipartiteGraph& g,
                              const NodeEmbeddings& h);

// h_i' = Σ_j α_ij W h_j with α a softmax over the incoming edges of i; nodes with no
// edges keep their embedding. With `p.residual` every node adds h_i to its aggregate. Throws std::logic_error if any α row fails to sum to 1.
NodeEmbeddings edge_attention_forward(const EdgeAttnParams& p, const BipartiteGraph& g,
                                      const NodeEmbeddings& h, AttentionTrace* trace = nullptr);

// h_i' = ReLU(W_self h_i + mean_j W_r h_j)
NodeEmbeddings rgcn_forward(const RgcnParams& p, const BipartiteGraph& g,
                            const NodeEmbeddings& h);

// Row-wise W₂ ReLU(W₁[h ‖ e] + b₁) + b₂ for h[n×d], e[n×d_e].
ad::Var personalize(const PersonalizerParams& p, const ad::Var& h, const ad::Var& e);

NodeEmbeddings layer_forward(const LayerParams& p, const BipartiteGraph& g,
                             const NodeEmbeddings& h);

/// Applies every layer of `model` in order.
NodeEmbeddings stack_forward(const BoundModel& model, const BipartiteGraph& g,
                             const NodeEmbeddings& h0);

/// Embeddings h^L for every node of `g`, without gradients.
EmbeddingTable compute_embeddings(const ModelParams& params, const BipartiteGraph& g);

/// Personalized customer embeddings for rows (h[n×d], e[n×d_e]), without gradients.
Tensor personalize_rows(const ModelParams& params, const Tensor& h, const Tensor& e);

}  // namespace pdrfe
