#pragma once

// Shared helpers for the test suites: seeded random instances and naive loop-based
// reference implementations of the layers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pdrfe/graph.hpp"
#include "pdrfe/model.hpp"
#include "pdrfe/rng.hpp"
#include "pdrfe/tensor.hpp"

namespace pdrfe::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(std::move(shape));
  for (double& v : t.mutable_data()) v = n(rng);
  return t;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("pdrfe-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

struct GraphSpec {
  std::size_t max_customers = 5;
  std::size_t max_skills = 5;
  std::size_t max_edges = 12;
  std::size_t hidden = 3;
  std::size_t edge_dim = 2;
  bool parallel_edges = true;
};

/// Random bipartite graph with Gaussian node and edge features. Node counts are at
/// least 1, so isolated nodes occur regularly, as do parallel edges unless disabled.
inline BipartiteGraph random_graph(Rng& rng, const GraphSpec& spec = {}) {
  const std::size_t nc = uniform_index(rng, 1, spec.max_customers);
  const std::size_t ns = uniform_index(rng, 1, spec.max_skills);
  std::size_t ne = uniform_index(rng, 1, spec.max_edges);
  if (!spec.parallel_edges) ne = std::min(ne, nc * ns);
  std::vector<InteractionRecord> records;
  std::vector<char> used(nc * ns, 0);
  while (records.size() < ne) {
    const std::size_t u = uniform_index(rng, 0, nc - 1), s = uniform_index(rng, 0, ns - 1);
    if (!spec.parallel_edges) {
      if (used[u * ns + s]) continue;
      used[u * ns + s] = 1;
    }
    records.push_back({u, s, random_tensor({spec.edge_dim}, rng), static_cast<int>(rng() % 2)});
  }
  NodeFeatures f{random_tensor({nc, spec.hidden}, rng), random_tensor({ns, spec.hidden}, rng)};
  return build_graph(records, std::move(f));
}

/// Randomizes every tensor of `params`, biases included.
inline void randomize(ModelParams& params, Rng& rng, double scale = 0.5) {
  for (Tensor* t : params.mutable_values()) *t = random_tensor(t->shape(), rng, scale);
}

// ---------------------------------------------------------------------------
// Naive references. They scan the raw edge list instead of using the graph's
// message indexes and write every sum out term by term.

using Matrix = std::vector<std::vector<double>>;

inline Matrix to_matrix(const Tensor& t) {
  Matrix m(t.dim(0), std::vector<double>(t.dim(1)));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m[i][j] = t.at(i, j);
  return m;
}

inline std::vector<double> edge_feature(const BipartiteGraph& g, std::size_t e) {
  std::vector<double> f(g.edge_dim());
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = g.edge_features().at(e, k);
  return f;
}

inline std::vector<double> mat_vec(const Tensor& w, const std::vector<double>& x) {
  std::vector<double> y(w.dim(0), 0.0);
  for (std::size_t i = 0; i < w.dim(0); ++i)
    for (std::size_t j = 0; j < w.dim(1); ++j) y[i] += w.at(i, j) * x[j];
  return y;
}

inline std::vector<double> concat(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

struct NaiveTables {
  Matrix customers;
  Matrix skills;
};

// Edges whose target (customer when `into_customers`) is `i`, with the other endpoint.
inline std::vector<std::pair<std::size_t, std::size_t>> incoming(const BipartiteGraph& g,
                                                                 bool into_customers,
                                                                 std::size_t i) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const std::size_t target = into_customers ? g.customer_of(e) : g.skill_of(e);
    const std::size_t source = into_customers ? g.skill_of(e) : g.customer_of(e);
    if (target == i) out.emplace_back(e, source);
  }
  return out;
}

// h_i' = h_i + mean_j reshape(W_e e + b_e, d×d) h_j
inline Matrix naive_nnconv_side(const Tensor& we, const Tensor& be, const BipartiteGraph& g,
                                bool into_customers, const Matrix& target, const Matrix& source) {
  const std::size_t d = target.empty() ? 0 : target[0].size();
  Matrix out = target;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto edges = incoming(g, into_customers, i);
    if (edges.empty()) continue;
    std::vector<double> acc(d, 0.0);
    for (auto [e, j] : edges) {
      const auto feat = edge_feature(g, e);
      Matrix edge_map(d, std::vector<double>(d, 0.0));
      for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
          double v = be[r * d + c];
          for (std::size_t k = 0; k < feat.size(); ++k) v += we.at(r * d + c, k) * feat[k];
          edge_map[r][c] = v;
        }
      }
      for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) acc[r] += edge_map[r][c] * source[j][c];
    }
    for (std::size_t r = 0; r < d; ++r) out[i][r] += acc[r] / static_cast<double>(edges.size());
  }
  return out;
}

inline NaiveTables naive_nnconv(const ModelParams& p, std::size_t layer, const BipartiteGraph& g,
                                const NaiveTables& h) {
  const std::string pre = "layer" + std::to_string(layer) + ".nnconv.";
  return {naive_nnconv_side(p.at(pre + "into_customers.edge_weight"),
                            p.at(pre + "into_customers.edge_bias"), g, true, h.customers,
                            h.skills),
          naive_nnconv_side(p.at(pre + "into_skills.edge_weight"),
                            p.at(pre + "into_skills.edge_bias"), g, false, h.skills,
                            h.customers)};
}

struct NaiveAttentionSide {
  Matrix out;
  std::vector<double> alpha;  // by edge position
};

// k_ij = LeakyReLU(aᵀ[W_a[h_i‖e_ij] ‖ W_a[h_j‖e_ij]]), α = softmax_j k_ij, h_i' = Σ α W h_j,
// plus h_i when `residual`
inline NaiveAttentionSide naive_attention_side(const Tensor& w, const Tensor& wa, const Tensor& a,
                                               double slope, bool residual,
                                               const BipartiteGraph& g,
                                               bool into_customers, const Matrix& target,
                                               const Matrix& source) {
  NaiveAttentionSide side{target, std::vector<double>(g.num_edges(), 0.0)};
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto edges = incoming(g, into_customers, i);
    if (edges.empty()) continue;
    std::vector<double> k;
    for (auto [e, j] : edges) {
      const auto feat = edge_feature(g, e);
      const auto qi = mat_vec(wa, concat(target[i], feat));
      const auto qj = mat_vec(wa, concat(source[j], feat));
      const auto q = concat(qi, qj);
      double s = 0.0;
      for (std::size_t t = 0; t < q.size(); ++t) s += a[t] * q[t];
      k.push_back(s > 0.0 ? s : slope * s);
    }
    const double top = *std::max_element(k.begin(), k.end());
    double z = 0.0;
    for (double v : k) z += std::exp(v - top);
    std::vector<double> acc(target[i].size(), 0.0);
    for (std::size_t t = 0; t < edges.size(); ++t) {
      const double alpha = std::exp(k[t] - top) / z;
      side.alpha[edges[t].first] = alpha;
      const auto msg = mat_vec(w, source[edges[t].second]);
      for (std::size_t r = 0; r < acc.size(); ++r) acc[r] += alpha * msg[r];
    }
    if (residual)
      for (std::size_t r = 0; r < acc.size(); ++r) acc[r] += target[i][r];
    side.out[i] = acc;
  }
  return side;
}

struct NaiveAttention {
  NaiveTables tables;
  std::vector<double> alpha_into_customers;
  std::vector<double> alpha_into_skills;
};

inline NaiveAttention naive_attention(const ModelParams& p, std::size_t layer,
                                      const BipartiteGraph& g, const NaiveTables& h) {
  const std::string pre = "layer" + std::to_string(layer) + ".eattn.";
  const double slope = p.shape().leaky_slope;
  const bool residual = p.shape().attention_residual;
  auto c = naive_attention_side(p.at(pre + "into_customers.message"),
                                p.at(pre + "into_customers.attn_weight"),
                                p.at(pre + "into_customers.attn_vector"), slope, residual, g, true,
                                h.customers, h.skills);
  auto s = naive_attention_side(p.at(pre + "into_skills.message"),
                                p.at(pre + "into_skills.attn_weight"),
                                p.at(pre + "into_skills.attn_vector"), slope, residual, g, false, h.skills,
                                h.customers);
  return {{c.out, s.out}, c.alpha, s.alpha};
}

// h_i' = ReLU(W_self h_i + mean_j W_r h_j)
inline Matrix naive_rgcn_side(const Tensor& w_rel, const Tensor& w_self, const BipartiteGraph& g,
                              bool into_customers, const Matrix& target, const Matrix& source) {
  Matrix out(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    std::vector<double> pre = mat_vec(w_self, target[i]);
    const auto edges = incoming(g, into_customers, i);
    for (auto [e, j] : edges) {
      const auto msg = mat_vec(w_rel, source[j]);
      for (std::size_t r = 0; r < pre.size(); ++r)
        pre[r] += msg[r] / static_cast<double>(edges.size());
    }
    for (double& v : pre) v = std::max(v, 0.0);
    out[i] = pre;
  }
  return out;
}

inline NaiveTables naive_rgcn(const ModelParams& p, std::size_t layer, const BipartiteGraph& g,
                              const NaiveTables& h) {
  const std::string pre = "layer" + std::to_string(layer) + ".rgcn.";
  return {naive_rgcn_side(p.at(pre + "into_customers"), p.at(pre + "self"), g, true,
                          h.customers, h.skills),
          naive_rgcn_side(p.at(pre + "into_skills"), p.at(pre + "self"), g, false, h.skills,
                          h.customers)};
}

inline NaiveTables naive_input(const BipartiteGraph& g) {
  return {to_matrix(g.node_features().customers), to_matrix(g.node_features().skills)};
}

/// Runs every layer of `p` through the matching naive reference.
inline NaiveTables naive_stack(const ModelParams& p, const BipartiteGraph& g) {
  NaiveTables h = naive_input(g);
  for (std::size_t l = 0; l < p.shape().layers; ++l) {
    switch (p.shape().kind) {
      case LayerKind::rgcn: h = naive_rgcn(p, l, g, h); break;
      case LayerKind::nnconv: h = naive_nnconv(p, l, g, h); break;
      case LayerKind::eattn: h = naive_attention(p, l, g, h).tables; break;
    }
  }
  return h;
}

inline double max_abs_diff(const Matrix& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j)
      worst = std::max(worst, std::abs(a[i][j] - b.at(i, j)));
  return worst;
}

}  // namespace pdrfe::testing
