#include "pdrfe/layers.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>

namespace pdrfe {

namespace {

std::mutex audit_mutex;
AttentionAudit audit_state;

void require_width(const ad::Var& v, std::size_t width, const char* what) {
  if (v.value().rank() != 2 || v.value().dim(1) != width) {
    throw ShapeError(std::string(what) + ": expected width " + std::to_string(width) +
                     ", got " + shape_to_string(v.shape()));
  }
}

void check_inputs(const BipartiteGraph& g, const NodeEmbeddings& h, std::size_t d,
                  const char* op) {
  require_width(h.customers, d, op);
  require_width(h.skills, d, op);
  if (h.customers.value().dim(0) != g.num_customers() || h.skills.value().dim(0) != g.num_skills()) {
    throw ShapeError(std::string(op) + ": embedding rows do not match graph node counts");
  }
}

std::size_t square_side(const ad::Var& w, const char* op) {
  const Tensor& t = w.value();
  if (t.rank() != 2 || t.dim(0) != t.dim(1)) {
    throw ShapeError(std::string(op) + ": expected square weight, got " +
                     shape_to_string(t.shape()));
  }
  return t.dim(0);
}

ad::Var nnconv_relation(const NnconvRelation& p, const MessageIndex& idx,
                        const std::shared_ptr<const Tensor>& edges, const ad::Var& target,
                        const ad::Var& source) {
  const std::size_t d = target.value().dim(1);
  const std::size_t de = edges->rank() == 2 ? edges->dim(1) : 0;
  const Tensor& w = p.edge_weight.value();
  if (w.rank() != 2 || w.dim(0) != d * d || w.dim(1) != de) {
    throw ShapeError("nnconv_forward: edge weight " + shape_to_string(w.shape()) +
                     " does not match hidden " + std::to_string(d) + " and edge dim " +
                     std::to_string(de));
  }
  if (p.edge_bias.value().rank() != 1 || p.edge_bias.value().size() != d * d) {
    throw ShapeError("nnconv_forward: edge bias must have d·d entries");
  }
  // Row i of reshape(W_e e + b_e) applied to h_j is Σ_{j,k} W_e[i·d+j, k] h_j e_k +
  // Σ_j b_e[i·d+j] h_j, so the mean over edges factors through mean(h_j ⊗ e) and mean(h_j).
  ad::Var outer = idx.outer ? ad::segment_outer_mean(source, idx.outer)
                            : ad::segment_outer_mean(source, idx.source, edges, idx.target,
                                                     idx.num_targets);
  ad::Var weight = ad::reshape(p.edge_weight, {d, d * de});
  ad::Var msg = ad::matmul(outer, ad::transpose(weight));
  ad::Var mean_src =
      ad::segment_mean(ad::gather_rows(source, idx.source), idx.target, idx.num_targets);
  ad::Var bias = ad::reshape(p.edge_bias, {d, d});
  msg = ad::add(msg, ad::matmul(mean_src, ad::transpose(bias)));
  return ad::add(target, msg);
}

ad::Var attention_relation(const EdgeAttnRelation& p, double slope, bool residual,
                           const MessageIndex& idx,
                           const std::shared_ptr<const Tensor>& edges, const ad::Var& target,
                           const ad::Var& source, Tensor* trace) {
  const std::size_t d = target.value().dim(1);
  const std::size_t de = edges->rank() == 2 ? edges->dim(1) : 0;
  if (square_side(p.message, "edge_attention_forward") != d) {
    throw ShapeError("edge_attention_forward: message weight does not match hidden dim");
  }
  const Tensor& wa = p.attn_weight.value();
  if (wa.rank() != 2 || wa.dim(1) != d + de) {
    throw ShapeError("edge_attention_forward: attention weight " + shape_to_string(wa.shape()) +
                     " expects inputs of width " + std::to_string(d + de));
  }
  const std::size_t da = wa.dim(0);
  if (p.attn_vector.value().rank() != 1 || p.attn_vector.value().size() != 2 * da) {
    throw ShapeError("edge_attention_forward: attention vector must have 2·d_a entries");
  }

  // a⃗ᵀ[W_a[h_i‖e] ‖ W_a[h_j‖e]] = (W_aᵀa₁)·[h_i‖e] + (W_aᵀa₂)·[h_j‖e]
  ad::Var wa_t = ad::transpose(p.attn_weight);
  ad::Var u_target = ad::matmul(wa_t, ad::slice(p.attn_vector, 0, da));
  ad::Var u_source = ad::matmul(wa_t, ad::slice(p.attn_vector, da, 2 * da));
  ad::Var score_target = ad::matmul(target, ad::slice(u_target, 0, d));
  ad::Var score_source = ad::matmul(source, ad::slice(u_source, 0, d));
  ad::Var edge_dir = ad::add(ad::slice(u_target, d, d + de), ad::slice(u_source, d, d + de));
  ad::Var logits = ad::add(ad::gather_rows(score_target, idx.target),
                           ad::gather_rows(score_source, idx.source));
  if (de > 0) logits = ad::add(logits, ad::matmul_constant(edges, edge_dir));
  ad::Var alpha =
      ad::segment_softmax(ad::leaky_relu(logits, slope), idx.target, idx.num_targets);

  std::vector<double> sums(idx.num_targets, 0.0);
  std::vector<char> present(idx.num_targets, 0);
  const auto& tgt = *idx.target;
  for (std::size_t e = 0; e < tgt.size(); ++e) {
    sums[tgt[e]] += alpha.value()[e];
    present[tgt[e]] = 1;
  }
  double worst = 0.0;
  std::uint64_t segments = 0;
  for (std::size_t i = 0; i < sums.size(); ++i) {
    if (!present[i]) continue;
    ++segments;
    worst = std::max(worst, std::abs(sums[i] - 1.0));
  }
  {
    std::lock_guard lock(audit_mutex);
    ++audit_state.passes;
    audit_state.segments += segments;
    audit_state.max_deviation = std::max(audit_state.max_deviation, worst);
  }
  if (worst > 1e-9) {
    throw std::logic_error("edge_attention_forward: attention weights sum off by " +
                           std::to_string(worst));
  }
  if (trace) *trace = alpha.value();

  ad::Var transformed = ad::matmul(source, ad::transpose(p.message));
  ad::Var weighted = ad::scale_rows(ad::gather_rows(transformed, idx.source), alpha);
  ad::Var out = ad::segment_sum(weighted, idx.target, idx.num_targets);
  ad::Tape& tape = target.tape();
  if (residual) return ad::add(out, target);
  return ad::add(out, ad::scale_rows(target, tape.constant(idx.isolated)));
}

ad::Var rgcn_relation(const ad::Var& w_rel, const ad::Var& w_self, const MessageIndex& idx,
                      const ad::Var& target, const ad::Var& source) {
  ad::Var mean_src =
      ad::segment_mean(ad::gather_rows(source, idx.source), idx.target, idx.num_targets);
  ad::Var pre = ad::add(ad::matmul(target, ad::transpose(w_self)),
                        ad::matmul(mean_src, ad::transpose(w_rel)));
  return ad::relu(pre);
}

}  // namespace

AttentionAudit attention_audit() {
  std::lock_guard lock(audit_mutex);
  return audit_state;
}

void reset_attention_audit() {
  std::lock_guard lock(audit_mutex);
  audit_state = {};
}

NodeEmbeddings nnconv_forward(const NnconvParams& p, const BipartiteGraph& g,
                              const NodeEmbeddings& h) {
  const std::size_t d = h.customers.value().rank() == 2 ? h.customers.value().dim(1) : 0;
  check_inputs(g, h, d, "nnconv_forward");
  const auto& edges = g.shared_edge_features();
  return {nnconv_relation(p.into_customers, g.into_customers(), edges, h.customers, h.skills),
          nnconv_relation(p.into_skills, g.into_skills(), edges, h.skills, h.customers),
          h.layer + 1};
}

NodeEmbeddings edge_attention_forward(const EdgeAttnParams& p, const BipartiteGraph& g,
                                      const NodeEmbeddings& h, AttentionTrace* trace) {
  const std::size_t d = h.customers.value().rank() == 2 ? h.customers.value().dim(1) : 0;
  check_inputs(g, h, d, "edge_attention_forward");
  const auto& edges = g.shared_edge_features();
  ad::Var c = attention_relation(p.into_customers, p.slope, p.residual, g.into_customers(), edges,
                                 h.customers, h.skills,
                                 trace ? &trace->into_customers : nullptr);
  ad::Var s = attention_relation(p.into_skills, p.slope, p.residual, g.into_skills(), edges, h.skills,
                                 h.customers, trace ? &trace->into_skills : nullptr);
  return {c, s, h.layer + 1};
}

NodeEmbeddings rgcn_forward(const RgcnParams& p, const BipartiteGraph& g,
                            const NodeEmbeddings& h) {
  const std::size_t d = square_side(p.self, "rgcn_forward");
  if (square_side(p.into_customers, "rgcn_forward") != d ||
      square_side(p.into_skills, "rgcn_forward") != d) {
    throw ShapeError("rgcn_forward: relation weights disagree with self weight");
  }
  check_inputs(g, h, d, "rgcn_forward");
  return {rgcn_relation(p.into_customers, p.self, g.into_customers(), h.customers, h.skills),
          rgcn_relation(p.into_skills, p.self, g.into_skills(), h.skills, h.customers),
          h.layer + 1};
}

ad::Var personalize(const PersonalizerParams& p, const ad::Var& h, const ad::Var& e) {
  const Tensor& w1 = p.w1.value();
  if (h.value().rank() != 2 || e.value().rank() != 2 || h.value().dim(0) != e.value().dim(0)) {
    throw ShapeError("personalize: expected row-aligned h[n×d] and e[n×d_e], got " +
                     shape_to_string(h.shape()) + " and " + shape_to_string(e.shape()));
  }
  if (w1.rank() != 2 || w1.dim(1) != h.value().dim(1) + e.value().dim(1)) {
    throw ShapeError("personalize: first weight " + shape_to_string(w1.shape()) +
                     " does not accept [h ‖ e] of width " +
                     std::to_string(h.value().dim(1) + e.value().dim(1)));
  }
  if (p.w2.value().rank() != 2 || p.w2.value().dim(0) != h.value().dim(1)) {
    throw ShapeError("personalize: output width must equal embedding width");
  }
  ad::Var hidden =
      ad::relu(ad::add_bias(ad::matmul(ad::concat_cols(h, e), ad::transpose(p.w1)), p.b1));
  return ad::add_bias(ad::matmul(hidden, ad::transpose(p.w2)), p.b2);
}

NodeEmbeddings layer_forward(const LayerParams& p, const BipartiteGraph& g,
                             const NodeEmbeddings& h) {
  return std::visit(
      [&](const auto& lp) -> NodeEmbeddings {
        using T = std::decay_t<decltype(lp)>;
        if constexpr (std::is_same_v<T, RgcnParams>) return rgcn_forward(lp, g, h);
        else if constexpr (std::is_same_v<T, NnconvParams>) return nnconv_forward(lp, g, h);
        else return edge_attention_forward(lp, g, h);
      },
      p);
}

NodeEmbeddings stack_forward(const BoundModel& model, const BipartiteGraph& g,
                             const NodeEmbeddings& h0) {
  if (model.layers.empty()) throw std::invalid_argument("stack_forward: need at least one layer");
  NodeEmbeddings h = h0;
  for (const auto& layer : model.layers) h = layer_forward(layer, g, h);
  return h;
}

EmbeddingTable compute_embeddings(const ModelParams& params, const BipartiteGraph& g) {
  ad::Tape tape;
  BoundModel model = bind_model(tape, params, false);
  const NodeFeatures& f = g.node_features();
  NodeEmbeddings h0{tape.constant(f.customers), tape.constant(f.skills), 0};
  NodeEmbeddings h = stack_forward(model, g, h0);
  return {h.customers.value(), h.skills.value(), h.layer};
}

Tensor personalize_rows(const ModelParams& params, const Tensor& h, const Tensor& e) {
  ad::Tape tape;
  BoundModel model = bind_model(tape, params, false);
  if (!model.personalizer) throw std::invalid_argument("model has no personalizer");
  return personalize(*model.personalizer, tape.constant(h), tape.constant(e)).value();
}

}  // namespace pdrfe
