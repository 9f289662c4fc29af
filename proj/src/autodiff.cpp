#include "pdrfe/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <string>

namespace pdrfe::ad {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::parameter(Tensor value) {
  value.require_finite("parameter");
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  value.require_finite("constant");
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward,
                 const char* op) {
  value.require_finite(op);
  Node node;
  node.value = std::move(value);
  node.requires_grad = std::any_of(inputs.begin(), inputs.end(), [this](std::size_t i) {
    return nodes_[i].requires_grad;
  });
  if (node.requires_grad) {
    node.inputs = std::move(inputs);
    node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad_ready) {
    n.grad = Tensor::zeros(n.value.shape());
    n.grad_ready = true;
  }
  return n.grad;
}

void Tape::backward(const Var& output) {
  if (output.tape_ != this) throw std::invalid_argument("backward: foreign variable");
  if (backward_done_) throw std::logic_error("backward: tape already differentiated");
  if (nodes_[output.id_].value.size() != 1) {
    throw ShapeError("backward: output must hold a single value, got " +
                     shape_to_string(nodes_[output.id_].value.shape()));
  }
  backward_done_ = true;
  grad_buffer(output.id_)[0] = 1.0;
  for (std::size_t id = output.id_ + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.grad_ready || !n.backward) continue;
    n.backward(*this, id);
  }
}

const Tensor& Tape::grad(const Var& v) { return grad_buffer(v.id_); }

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + shape_to_string(a.shape()));
  }
}

Tape& same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("operands on different tapes");
  return a.tape();
}

// C[m×n] (+)= A[m×k]·B[k×n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t t = 0; t < k; ++t) {
      const double av = ai[t];
      if (av == 0.0) continue;
      const double* bt = b + t * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
    }
  }
}

// C[m×k] += A[m×n]·B[k×n]ᵀ, computed as A·(Bᵀ) so the inner loop runs over rows of C.
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
  std::vector<double> bt(n * k);
  for (std::size_t t = 0; t < k; ++t)
    for (std::size_t j = 0; j < n; ++j) bt[j * k + t] = b[t * n + j];
  gemm_nn(a, bt.data(), c, m, n, k);
}

// C[k×n] += A[m×k]ᵀ·B[m×n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t t = 0; t < k; ++t) {
      const double av = ai[t];
      if (av == 0.0) continue;
      double* ct = c + t * n;
      for (std::size_t j = 0; j < n; ++j) ct[j] += av * bi[j];
    }
  }
}

void check_index(const Index& index, std::size_t bound, const char* op) {
  for (std::size_t v : *index) {
    if (v >= bound) {
      throw std::out_of_range(std::string(op) + ": index " + std::to_string(v) +
                              " out of range " + std::to_string(bound));
    }
  }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank(av, 2, "matmul");
  if (bv.rank() != 1 && bv.rank() != 2) {
    throw ShapeError("matmul: right operand must be rank 1 or 2, got " +
                     shape_to_string(bv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1);
  const std::size_t n = bv.rank() == 2 ? bv.dim(1) : 1;
  if (bv.dim(0) != k) {
    throw ShapeError("matmul: inner extents differ, " + shape_to_string(av.shape()) +
                     " x " + shape_to_string(bv.shape()));
  }
  Tensor out(bv.rank() == 2 ? Shape{m, n} : Shape{m});
  gemm_nn(av.data().data(), bv.data().data(), out.mutable_data().data(), m, k, n);
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(
      std::move(out), {ia, ib},
      [ia, ib, m, k, n](Tape& t, std::size_t self) {
        const Tensor& g = t.out_grad(self);
        if (t.requires_grad(ia)) {
          gemm_nt(g.data().data(), t.value(ib).data().data(),
                  t.grad_buffer(ia).mutable_data().data(), m, n, k);
        }
        if (t.requires_grad(ib)) {
          gemm_tn(t.value(ia).data().data(), g.data().data(),
                  t.grad_buffer(ib).mutable_data().data(), m, k, n);
        }
      },
      "matmul");
}

Var matmul_constant(std::shared_ptr<const Tensor> a, const Var& b) {
  const Tensor& av = *a;
  const Tensor& bv = b.value();
  require_rank(av, 2, "matmul_constant");
  if (bv.rank() != 1 && bv.rank() != 2) {
    throw ShapeError("matmul_constant: right operand must be rank 1 or 2, got " +
                     shape_to_string(bv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1);
  const std::size_t n = bv.rank() == 2 ? bv.dim(1) : 1;
  if (bv.dim(0) != k) {
    throw ShapeError("matmul_constant: inner extents differ, " + shape_to_string(av.shape()) +
                     " x " + shape_to_string(bv.shape()));
  }
  Tensor out(bv.rank() == 2 ? Shape{m, n} : Shape{m});
  gemm_nn(av.data().data(), bv.data().data(), out.mutable_data().data(), m, k, n);
  const std::size_t ib = b.id();
  return b.tape().record(
      std::move(out), {ib},
      [a, ib, m, k, n](Tape& t, std::size_t self) {
        gemm_tn(a->data().data(), t.out_grad(self).data().data(),
                t.grad_buffer(ib).mutable_data().data(), m, k, n);
      },
      "matmul_constant");
}

Var transpose(const Var& a) {
  const Tensor& av = a.value();
  require_rank(av, 2, "transpose");
  const std::size_t r = av.dim(0), c = av.dim(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(out), {ia},
      [ia, r, c](Tape& t, std::size_t self) {
        const Tensor& g = t.out_grad(self);
        Tensor& ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
      },
      "transpose");
}

namespace {

template <class Forward, class GradA, class GradB>
Var binary_elementwise(const Var& a, const Var& b, const char* op, Forward f, GradA ga,
                       GradB gb) {
  Tape& tape = same_tape(a, b);
  require_same_shape(a.value(), b.value(), op);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i], bv[i]);
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(
      std::move(out), {ia, ib},
      [ia, ib, ga, gb](Tape& t, std::size_t self) {
        const Tensor& g = t.out_grad(self);
        const Tensor& x = t.value(ia);
        const Tensor& y = t.value(ib);
        if (t.requires_grad(ia)) {
          Tensor& d = t.grad_buffer(ia);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * ga(x[i], y[i]);
        }
        if (t.requires_grad(ib)) {
          Tensor& d = t.grad_buffer(ib);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * gb(x[i], y[i]);
        }
      },
      op);
}

// Elementwise unary op whose derivative is expressed through input x and output y.
template <class Forward, class Deriv>
Var unary_elementwise(const Var& a, const char* op, Forward f, Deriv df) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(out), {ia},
      [ia, df](Tape& t, std::size_t self) {
        const Tensor& g = t.out_grad(self);
        const Tensor& x = t.value(ia);
        const Tensor& y = t.value(self);
        Tensor& d = t.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * df(x[i], y[i]);
      },
      op);
}

}  // namespace

Var add(const Var& a, const Var& b) {
  return binary_elementwise(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary_elementwise(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary_elementwise(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var add_bias(const Var& a, const Var& bias) {
  Tape& tape = same_tape(a, bias);
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  require_rank(av, 2, "add_bias");
  require_rank(bv, 1, "add_bias");
  const std::size_t n = av.dim(0), m = av.dim(1);
  if (bv.dim(0) != m) {
    throw ShapeError("add_bias: bias " + shape_to_string(bv.shape()) + " for rows of " +
                     shape_to_string(av.shape()));
  }
  Tensor out = av;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bv[j];
  const std::size_t ia = a.id(), ib = bias.id();
  return tape.record(
      std::move(out), {ia, ib},
      [ia, ib, n, m](Tape& t, std::size_t self) {
        const Tensor& g = t.out_grad(self);
        if (t.requires_grad(ia)) {
          Tensor& d = t.grad_buffer(ia);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
        }
        if (t.requires_grad(ib)) {
          Tensor& d = t.grad_buffer(ib);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) d[j] += g[i * m + j];
        }
      },
      "add_bias");
}

Var scale(const Var& a, double factor) {
  return unary_elementwise(
      a, "scale", [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var add_scalar(const Var& a, double offset) {
  return unary_elementwise(
      a, "add_scalar", [offset](double x) { return x + offset; },
      [](double, double) { return 1.0; });
}

Var relu(const Var& a) {
  return unary_elementwise(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& a, double slope) {
  if (!(slope >= 0.0 && slope < 1.0)) {
    throw std::invalid_argument("leaky_relu: slope must lie in [0, 1)");
  }
  return unary_elementwise(
      a, "leaky_relu", [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var sigmoid(const Var& a) {
  return unary_elementwise(
      a, "sigmoid",
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var sum(const Var& a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (double v : av.data()) s += v;
  const std::size_t ia = a.id();
  return a.tape().record(
      Tensor::scalar(s), {ia},
      [ia](Tape& t, std::size_t self) {
        const double g = t.out_grad(self)[0];
        Tensor& d = t.grad_buffer(ia);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g;
      },
      "sum");
}

Var mean(const Var& a) {
  if (a.value().empty()) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var gather_rows(const Var& a, Index index) {
  const Tensor& av = a.value();
  if (av.rank() == 0) throw ShapeError("gather_rows on a scalar");
  check_index(index, av.rows(), "gather_rows");
  const std::size_t w = av.row_width();
  Shape shape = av.shape();
  shape[0] = index->size();
  Tensor out(shape);
  for (std::size_t r = 0; r < index->size(); ++r) {
    const double* src = av.data().data() + (*index)[r] * w;
    std::copy(src, src + w, out.mutable_data().data() + r * w);
  }
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(out), {ia},
      [ia, index, w](Tape& t, std::size_t self) {
        const Tensor& g = t.out_grad(self);
        Tensor& d = t.grad_buffer(ia);
        for (std::size_t r = 0; r < index->size(); ++r) {
          double* dst = d.mutable_data().data() + (*index)[r] * w;
          const double* src = g.data().data() + r * w;
          for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
        }
      },
      "gather_rows");
}

namespace {

Var segment_reduce(const Var& a, Index segment, std::size_t num_segments, bool average) {
  const Tensor& av = a.value();
  const char* op = average ? "segment_mean" : "segment_sum";
  if (av.rank() == 0) throw ShapeError(std::string(op) + " on a scalar");
  if (segment->size() != av.rows()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(segment->size()) +
                     " segment ids for " + std::to_string(av.rows()) + " rows");
  }
  check_index(segment, num_segments, op);
  const std::size_t w = av.row_width();
  std::vector<double> weight(num_segments, 1.0);
  if (average) {
    std::vector<std::size_t> count(num_segments, 0);
    for (std::size_t s : *segment) ++count[s];
    for (std::size_t s = 0; s < num_segments; ++s)
      weight[s] = count[s] ? 1.0 / static_cast<double>(count[s]) : 0.0;
  }
  Shape shape = av.shape();
  shape[0] = num_segments;
  Tensor out(shape);
  for (std::size_t e = 0; e < segment->size(); ++e) {
    const std::size_t s = (*segment)[e];
    const double* src = av.data().data() + e * w;
    double* dst = out.mutable_data().data() + s * w;
    for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
  }
  if (average) {
    for (std::size_t s = 0; s < num_segments; ++s)
      for (std::size_t j = 0; j < w; ++j) out[s * w + j] *= weight[s];
  }
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(out), {ia},
      [ia, segment, w, weight = std::move(weight)](Tape& t, std::size_t self) {
        const Tensor& g = t.out_grad(self);
        Tensor& d = t.grad_buffer(ia);
        for (std::size_t e = 0; e < segment->size(); ++e) {
          const std::size_t s = (*segment)[e];
          const double ws = weight[s];
          for (std::size_t j = 0; j < w; ++j) d[e * w + j] += ws * g[s * w + j];
        }
      },
      op);
}

}  // namespace

Var segment_sum(const Var& a, Index segment, std::size_t num_segments) {
  return segment_reduce(a, std::move(segment), num_segments, false);
}

Var segment_mean(const Var& a, Index segment, std::size_t num_segments) {
  return segment_reduce(a, std::move(segment), num_segments, true);
}

Var segment_softmax(const Var& scores, Index segment, std::size_t num_segments) {
  const Tensor& sv = scores.value();
  require_rank(sv, 1, "segment_softmax");
  if (segment->size() != sv.size()) {
    throw ShapeError("segment_softmax: " + std::to_string(segment->size()) +
                     " segment ids for " + std::to_string(sv.size()) + " scores");
  }
  check_index(segment, num_segments, "segment_softmax");
  const std::size_t n = sv.size();
  std::vector<double> peak(num_segments, -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < n; ++e) {
    const std::size_t s = (*segment)[e];
    peak[s] = std::max(peak[s], sv[e]);
  }
  std::vector<double> total(num_segments, 0.0);
  Tensor out({n});
  for (std::size_t e = 0; e < n; ++e) {
    const std::size_t s = (*segment)[e];
    out[e] = std::exp(sv[e] - peak[s]);
    total[s] += out[e];
  }
  for (std::size_t e = 0; e < n; ++e) out[e] /= total[(*segment)[e]];
  const std::size_t ia = scores.id();
  return scores.tape().record(
      std::move(out), {ia},
      [ia, segment, num_segments](Tape& t, std::size_t self) {
        const Tensor& g = t.out_grad(self);
        const Tensor& y = t.value(self);
        // dx_e = y_e (g_e − Σ_{f∈seg} g_f y_f)
        std::vector<double> dot(num_segments, 0.0);
        for (std::size_t e = 0; e < y.size(); ++e) dot[(*segment)[e]] += g[e] * y[e];
        Tensor& d = t.grad_buffer(ia);
        for (std::size_t e = 0; e < y.size(); ++e)
          d[e] += y[e] * (g[e] - dot[(*segment)[e]]);
      },
      "segment_softmax");
}

std::shared_ptr<const OuterPlan> make_outer_plan(const Index& source, const Tensor& features,
                                                 const Index& segment, std::size_t num_segments) {
  require_rank(features, 2, "make_outer_plan");
  const std::size_t edges = features.dim(0);
  if (source->size() != edges || segment->size() != edges) {
    throw ShapeError("make_outer_plan: index lengths disagree with " + std::to_string(edges) +
                     " feature rows");
  }
  check_index(segment, num_segments, "make_outer_plan");
  auto plan = std::make_shared<OuterPlan>();
  plan->num_segments = num_segments;
  plan->width = features.dim(1);
  plan->weight.assign(num_segments, 0.0);
  for (std::size_t s : *segment) plan->weight[s] += 1.0;
  for (double& w : plan->weight) w = w > 0.0 ? 1.0 / w : 0.0;
  plan->num_sources = 0;
  for (std::size_t j : *source) plan->num_sources = std::max(plan->num_sources, j + 1);

  std::vector<std::size_t> order(edges);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const std::size_t sa = (*segment)[a], sb = (*segment)[b];
    if (sa != sb) return sa < sb;
    if ((*source)[a] != (*source)[b]) return (*source)[a] < (*source)[b];
    return a < b;
  });
  const std::size_t f = plan->width;
  for (std::size_t i = 0; i < edges;) {
    const std::size_t s = (*segment)[order[i]], j = (*source)[order[i]];
    plan->segment.push_back(s);
    plan->source.push_back(j);
    plan->summed.resize(plan->summed.size() + f, 0.0);
    double* acc = plan->summed.data() + plan->summed.size() - f;
    for (; i < edges && (*segment)[order[i]] == s && (*source)[order[i]] == j; ++i) {
      const double* fe = features.data().data() + order[i] * f;
      for (std::size_t c = 0; c < f; ++c) acc[c] += fe[c];
    }
  }
  return plan;
}

Var segment_outer_mean(const Var& h, std::shared_ptr<const OuterPlan> plan) {
  const Tensor& hv = h.value();
  require_rank(hv, 2, "segment_outer_mean");
  if (hv.dim(0) < plan->num_sources) {
    throw ShapeError("segment_outer_mean: plan references source row " +
                     std::to_string(plan->num_sources - 1) + " of a " +
                     shape_to_string(hv.shape()) + " input");
  }
  const std::size_t d = hv.dim(1), f = plan->width, groups = plan->segment.size();
  Tensor out({plan->num_segments, d * f});
  for (std::size_t k = 0; k < groups; ++k) {
    const double* hj = hv.data().data() + plan->source[k] * d;
    const double* fk = plan->summed.data() + k * f;
    double* dst = out.mutable_data().data() + plan->segment[k] * d * f;
    for (std::size_t b = 0; b < d; ++b) {
      const double hb = hj[b];
      double* db = dst + b * f;
      for (std::size_t c = 0; c < f; ++c) db[c] += hb * fk[c];
    }
  }
  for (std::size_t s = 0; s < plan->num_segments; ++s)
    for (std::size_t j = 0; j < d * f; ++j) out[s * d * f + j] *= plan->weight[s];
  const std::size_t ih = h.id();
  return h.tape().record(
      std::move(out), {ih},
      [ih, plan, d, f, groups](Tape& t, std::size_t self) {
        const Tensor& g = t.out_grad(self);
        Tensor& dh = t.grad_buffer(ih);
        for (std::size_t k = 0; k < groups; ++k) {
          const std::size_t s = plan->segment[k];
          const double ws = plan->weight[s];
          const double* gs = g.data().data() + s * d * f;
          const double* fk = plan->summed.data() + k * f;
          double* dst = dh.mutable_data().data() + plan->source[k] * d;
          for (std::size_t b = 0; b < d; ++b) {
            double acc = 0.0;
            const double* gb = gs + b * f;
            for (std::size_t c = 0; c < f; ++c) acc += gb[c] * fk[c];
            dst[b] += ws * acc;
          }
        }
      },
      "segment_outer_mean");
}

Var segment_outer_mean(const Var& h, Index source, std::shared_ptr<const Tensor> features,
                       Index segment, std::size_t num_segments) {
  require_rank(h.value(), 2, "segment_outer_mean");
  check_index(source, h.value().dim(0), "segment_outer_mean");
  return segment_outer_mean(h, make_outer_plan(source, *features, segment, num_segments));
}

Var rowwise_dot(const Var& a, const Var& b) {
  Tape& tape = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "rowwise_dot");
  require_rank(a.value(), 2, "rowwise_dot");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t n = av.dim(0), m = av.dim(1);
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += av[i * m + j] * bv[i * m + j];
    out[i] = acc;
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(
      std::move(out), {ia, ib},
      [ia, ib, n, m](Tape& t, std::size_t self) {
        const Tensor& g = t.out_grad(self);
        if (t.requires_grad(ia)) {
          Tensor& d = t.grad_buffer(ia);
          const Tensor& y = t.value(ib);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) d[i * m + j] += g[i] * y[i * m + j];
        }
        if (t.requires_grad(ib)) {
          Tensor& d = t.grad_buffer(ib);
          const Tensor& x = t.value(ia);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) d[i * m + j] += g[i] * x[i * m + j];
        }
      },
      "rowwise_dot");
}

Var concat_cols(const Var& a, const Var& b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank(av, 2, "concat_cols");
  require_rank(bv, 2, "concat_cols");
  if (av.dim(0) != bv.dim(0)) {
    throw ShapeError("concat_cols: row counts differ, " + shape_to_string(av.shape()) +
                     " vs " + shape_to_string(bv.shape()));
  }
  const std::size_t n = av.dim(0), p = av.dim(1), q = bv.dim(1);
  Tensor out({n, p + q});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(av.data().data() + i * p, p, out.mutable_data().data() + i * (p + q));
    std::copy_n(bv.data().data() + i * q, q, out.mutable_data().data() + i * (p + q) + p);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(
      std::move(out), {ia, ib},
      [ia, ib, n, p, q](Tape& t, std::size_t self) {
        const Tensor& g = t.out_grad(self);
        if (t.requires_grad(ia)) {
          Tensor& d = t.grad_buffer(ia);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < p; ++j) d[i * p + j] += g[i * (p + q) + j];
        }
        if (t.requires_grad(ib)) {
          Tensor& d = t.grad_buffer(ib);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < q; ++j) d[i * q + j] += g[i * (p + q) + p + j];
        }
      },
      "concat_cols");
}

Var scale_rows(const Var& a, const Var& w) {
  Tape& tape = same_tape(a, w);
  const Tensor& av = a.value();
  const Tensor& wv = w.value();
  require_rank(av, 2, "scale_rows");
  require_rank(wv, 1, "scale_rows");
  const std::size_t n = av.dim(0), m = av.dim(1);
  if (wv.dim(0) != n) {
    throw ShapeError("scale_rows: " + std::to_string(wv.dim(0)) + " weights for " +
                     std::to_string(n) + " rows");
  }
  Tensor out(av.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = av[i * m + j] * wv[i];
  const std::size_t ia = a.id(), iw = w.id();
  return tape.record(
      std::move(out), {ia, iw},
      [ia, iw, n, m](Tape& t, std::size_t self) {
        const Tensor& g = t.out_grad(self);
        if (t.requires_grad(ia)) {
          Tensor& d = t.grad_buffer(ia);
          const Tensor& wv = t.value(iw);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) d[i * m + j] += g[i * m + j] * wv[i];
        }
        if (t.requires_grad(iw)) {
          Tensor& d = t.grad_buffer(iw);
          const Tensor& av = t.value(ia);
          for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * av[i * m + j];
            d[i] += acc;
          }
        }
      },
      "scale_rows");
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(out), {ia},
      [ia](Tape& t, std::size_t self) {
        const Tensor& g = t.out_grad(self);
        Tensor& d = t.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      },
      "reshape");
}

Var slice(const Var& a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require_rank(av, 1, "slice");
  if (begin > end || end > av.size()) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") outside length " + std::to_string(av.size()));
  }
  Tensor out({end - begin});
  std::copy(av.data().begin() + static_cast<std::ptrdiff_t>(begin),
            av.data().begin() + static_cast<std::ptrdiff_t>(end), out.mutable_data().begin());
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(out), {ia},
      [ia, begin](Tape& t, std::size_t self) {
        const Tensor& g = t.out_grad(self);
        Tensor& d = t.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) d[begin + i] += g[i];
      },
      "slice");
}

namespace {

void require_targets(const Tensor& x, const Tensor& y, const char* op) {
  require_rank(x, 1, op);
  if (y.size() != x.size()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(y.size()) + " targets for " +
                     std::to_string(x.size()) + " predictions");
  }
  if (x.empty()) throw ShapeError(std::string(op) + ": empty batch");
}

constexpr double kProbFloor = 1e-12;

}  // namespace

Var sigmoid_cross_entropy(const Var& logits, const Tensor& targets) {
  const Tensor& z = logits.value();
  require_targets(z, targets, "sigmoid_cross_entropy");
  const std::size_t n = z.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // log(1 + e^z) − y·z, evaluated without overflow
    const double zi = z[i];
    const double softplus = zi > 0.0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi));
    total += softplus - targets[i] * zi;
  }
  const std::size_t iz = logits.id();
  auto y = std::make_shared<const Tensor>(targets);
  return logits.tape().record(
      Tensor::scalar(total / static_cast<double>(n)), {iz},
      [iz, y, n](Tape& t, std::size_t self) {
        const double g = t.out_grad(self)[0] / static_cast<double>(n);
        const Tensor& z = t.value(iz);
        Tensor& d = t.grad_buffer(iz);
        for (std::size_t i = 0; i < n; ++i) {
          const double p = z[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-z[i]))
                                       : std::exp(z[i]) / (1.0 + std::exp(z[i]));
          d[i] += g * (p - (*y)[i]);
        }
      },
      "sigmoid_cross_entropy");
}

Var cross_entropy(const Var& probs, const Tensor& targets) {
  const Tensor& p = probs.value();
  require_targets(p, targets, "cross_entropy");
  const std::size_t n = p.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = std::clamp(p[i], kProbFloor, 1.0 - kProbFloor);
    total -= targets[i] * std::log(q) + (1.0 - targets[i]) * std::log(1.0 - q);
  }
  const std::size_t ip = probs.id();
  auto y = std::make_shared<const Tensor>(targets);
  return probs.tape().record(
      Tensor::scalar(total / static_cast<double>(n)), {ip},
      [ip, y, n](Tape& t, std::size_t self) {
        const double g = t.out_grad(self)[0] / static_cast<double>(n);
        const Tensor& p = t.value(ip);
        Tensor& d = t.grad_buffer(ip);
        for (std::size_t i = 0; i < n; ++i) {
          if (p[i] < kProbFloor || p[i] > 1.0 - kProbFloor) continue;
          d[i] += g * (-(*y)[i] / p[i] + (1.0 - (*y)[i]) / (1.0 - p[i]));
        }
      },
      "cross_entropy");
}

}  // namespace pdrfe::ad
