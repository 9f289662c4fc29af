#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "pdrfe/tensor.hpp"

namespace pdrfe::ad {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

using Index = std::shared_ptr<const std::vector<std::size_t>>;

inline Index make_index(std::vector<std::size_t> idx) {
  return std::make_shared<const std::vector<std::size_t>>(std::move(idx));
}

/// Reverse-mode tape. Nodes are appended in evaluation order, so creation order is a
/// topological order and backward() walks it once in reverse.
///
/// A tape is single-threaded. Separate tapes share nothing and may live on different
/// threads.
class Tape {
 public:
  // Called with the tape and the id of the node whose output gradient is ready.
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var parameter(Tensor value);
  Var constant(Tensor value);

  // Seeds d(output)/d(output) = 1 and propagates. Allowed once per tape.
  void backward(const Var& output);

  // Gradient of the last backward() output with respect to `v`. Zero if `v` does
  // not influence it.
  const Tensor& grad(const Var& v);

  std::size_t size() const { return nodes_.size(); }

  // --- op authoring interface ---
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward,
             const char* op);
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& out_grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient buffer of an input node, allocated as zeros on first use.
  Tensor& grad_buffer(std::size_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool grad_ready = false;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Differentiable operations. Every op validates shapes and rejects non-finite
// results with NonFiniteError.

// C = A·B for A[m×k], B[k×n]. A rank-1 B of length k gives a rank-1 result.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
// C = A·B where A[m×k] is a constant held outside the tape (no copy, no gradient).
Var matmul_constant(std::shared_ptr<const Tensor> a, const Var& b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// Adds bias[m] to every row of a[n×m].
Var add_bias(const Var& a, const Var& bias);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);

Var relu(const Var& a);
// max(x, slope·x); the derivative at 0 is taken as `slope`.
Var leaky_relu(const Var& a, double slope);
Var sigmoid(const Var& a);

Var sum(const Var& a);
Var mean(const Var& a);

// Rows of `a` selected by `index` (rank-1 `a` selects entries).
Var gather_rows(const Var& a, Index index);
// out[s] = Σ_{e : segment[e] = s} a[e]; rows with no members are zero.
Var segment_sum(const Var& a, Index segment, std::size_t num_segments);
// As segment_sum divided by segment size; empty segments yield zero.
Var segment_mean(const Var& a, Index segment, std::size_t num_segments);
// Softmax of scores[E] within each segment, max-subtracted.
Var segment_softmax(const Var& scores, Index segment, std::size_t num_segments);
// For every segment s: mean over members e of outer(h[source[e]], features[e]),
// flattened row-major into width dim(h)·dim(features). Features carry no gradient.
Var segment_outer_mean(const Var& h, Index source,
                       std::shared_ptr<const Tensor> features, Index segment,
                       std::size_t num_segments);

/// Precomputed layout for segment_outer_mean over a fixed edge set: edges sharing
/// (segment, source) are merged and their feature rows summed.
struct OuterPlan {
  std::size_t num_segments = 0;
  std::size_t num_sources = 0;  // one past the largest source row referenced
  std::size_t width = 0;        // feature width
  std::vector<std::size_t> segment;  // per merged group
  std::vector<std::size_t> source;   // per merged group
  std::vector<double> summed;        // [groups × width]
  std::vector<double> weight;        // 1 / segment size, 0 for empty segments
};

std::shared_ptr<const OuterPlan> make_outer_plan(const Index& source, const Tensor& features,
                                                 const Index& segment, std::size_t num_segments);
Var segment_outer_mean(const Var& h, std::shared_ptr<const OuterPlan> plan);

Var rowwise_dot(const Var& a, const Var& b);
Var concat_cols(const Var& a, const Var& b);
// Multiplies row i of a[n×m] by w[i].
Var scale_rows(const Var& a, const Var& w);
Var reshape(const Var& a, Shape shape);
// Entries [begin, end) of a rank-1 value.
Var slice(const Var& a, std::size_t begin, std::size_t end);

// Mean binary cross-entropy of sigmoid(logits) against targets in {0,1}.
Var sigmoid_cross_entropy(const Var& logits, const Tensor& targets);
// Mean binary cross-entropy of probabilities clamped to [1e-12, 1-1e-12].
Var cross_entropy(const Var& probs, const Tensor& targets);

}  // namespace pdrfe::ad
