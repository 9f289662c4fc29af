#include "pdrfe/graph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace pdrfe {

std::size_t BipartiteGraph::num_nodes(NodeKind kind) const {
  return kind == NodeKind::customer ? num_customers_ : num_skills_;
}

EdgeRecord BipartiteGraph::edge(std::size_t e) const {
  const std::size_t w = edge_dim();
  std::vector<double> f(edge_features_->data().begin() + static_cast<std::ptrdiff_t>(e * w),
                        edge_features_->data().begin() + static_cast<std::ptrdiff_t>((e + 1) * w));
  return {NodeId::customer(customer_[e]), NodeId::skill(skill_[e]),
          Tensor::vector(std::move(f)), label_[e], edge_id_[e]};
}

std::span<const std::size_t> BipartiteGraph::incident_edges(NodeId n) const {
  const bool is_customer = n.kind == NodeKind::customer;
  const auto& offsets = is_customer ? customer_offsets_ : skill_offsets_;
  const auto& edges = is_customer ? customer_edges_ : skill_edges_;
  if (n.index + 1 >= offsets.size()) {
    throw std::out_of_range("node index " + std::to_string(n.index) + " out of range");
  }
  return std::span<const std::size_t>(edges).subspan(
      offsets[n.index], offsets[n.index + 1] - offsets[n.index]);
}

namespace {

void build_csr(std::span<const std::size_t> owner, std::size_t nodes,
               std::vector<std::size_t>& offsets, std::vector<std::size_t>& edges) {
  offsets.assign(nodes + 1, 0);
  for (std::size_t v : owner) ++offsets[v + 1];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  edges.assign(owner.size(), 0);
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (std::size_t e = 0; e < owner.size(); ++e) edges[cursor[owner[e]]++] = e;
}

MessageIndex make_message_index(const std::vector<std::size_t>& target,
                                const std::vector<std::size_t>& source,
                                std::size_t num_targets, std::size_t num_sources,
                                const std::vector<std::size_t>& target_offsets) {
  MessageIndex idx;
  idx.target = ad::make_index(target);
  idx.source = ad::make_index(source);
  idx.num_targets = num_targets;
  idx.num_sources = num_sources;
  idx.isolated = Tensor({num_targets});
  for (std::size_t i = 0; i < num_targets; ++i)
    idx.isolated[i] = target_offsets[i + 1] == target_offsets[i] ? 1.0 : 0.0;
  return idx;
}

}  // namespace

void BipartiteGraph::index() {
  build_csr(customer_, num_customers_, customer_offsets_, customer_edges_);
  build_csr(skill_, num_skills_, skill_offsets_, skill_edges_);
  into_customers_ =
      make_message_index(customer_, skill_, num_customers_, num_skills_, customer_offsets_);
  into_skills_ =
      make_message_index(skill_, customer_, num_skills_, num_customers_, skill_offsets_);
  if (edge_features_->rank() == 2) {
    into_customers_.outer = ad::make_outer_plan(into_customers_.source, *edge_features_,
                                                into_customers_.target, num_customers_);
    into_skills_.outer = ad::make_outer_plan(into_skills_.source, *edge_features_,
                                             into_skills_.target, num_skills_);
  }
}

BipartiteGraph build_graph(std::span<const InteractionRecord> records, NodeFeatures features) {
  if (features.customers.rank() != 2 || features.skills.rank() != 2) {
    throw ShapeError("build_graph: node feature tables must be rank 2");
  }
  features.customers.require_finite("build_graph customer features");
  features.skills.require_finite("build_graph skill features");

  BipartiteGraph g;
  g.num_customers_ = features.customers.dim(0);
  g.num_skills_ = features.skills.dim(0);
  const std::size_t width = records.empty() ? 0 : records.front().feature.size();
  std::vector<double> feats;
  feats.reserve(records.size() * width);
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.customer >= g.num_customers_) {
      throw std::invalid_argument("build_graph: row " + std::to_string(r) +
                                  " references unknown customer " +
                                  std::to_string(rec.customer));
    }
    if (rec.skill >= g.num_skills_) {
      throw std::invalid_argument("build_graph: row " + std::to_string(r) +
                                  " references unknown skill " + std::to_string(rec.skill));
    }
    if (rec.feature.rank() != 1 || rec.feature.size() != width) {
      throw ShapeError("build_graph: row " + std::to_string(r) + " has edge feature " +
                       shape_to_string(rec.feature.shape()) + ", expected [" +
                       std::to_string(width) + "]");
    }
    if (rec.defect != 0 && rec.defect != 1) {
      throw std::invalid_argument("build_graph: row " + std::to_string(r) +
                                  " has defect label outside {0,1}");
    }
    rec.feature.require_finite("build_graph row " + std::to_string(r));
    g.customer_.push_back(rec.customer);
    g.skill_.push_back(rec.skill);
    g.label_.push_back(rec.defect);
    g.edge_id_.push_back(r);
    feats.insert(feats.end(), rec.feature.data().begin(), rec.feature.data().end());
  }
  g.edge_features_ = std::make_shared<const Tensor>(Shape{records.size(), width}, std::move(feats));
  g.node_features_ = std::make_shared<const NodeFeatures>(std::move(features));
  g.index();
  return g;
}

BipartiteGraph BipartiteGraph::subgraph(std::span<const std::size_t> positions) const {
  BipartiteGraph g;
  g.num_customers_ = num_customers_;
  g.num_skills_ = num_skills_;
  g.node_features_ = node_features_;
  const std::size_t w = edge_dim();
  std::vector<double> feats;
  feats.reserve(positions.size() * w);
  for (std::size_t e : positions) {
    if (e >= num_edges()) throw std::out_of_range("subgraph: edge position out of range");
    g.customer_.push_back(customer_[e]);
    g.skill_.push_back(skill_[e]);
    g.label_.push_back(label_[e]);
    g.edge_id_.push_back(edge_id_[e]);
    const auto row = edge_features_->data().subspan(e * w, w);
    feats.insert(feats.end(), row.begin(), row.end());
  }
  g.edge_features_ = std::make_shared<const Tensor>(Shape{positions.size(), w}, std::move(feats));
  g.index();
  return g;
}

std::pair<BipartiteGraph, BipartiteGraph> split_edges(const BipartiteGraph& g,
                                                       double train_fraction,
                                                       std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split_edges: train fraction must lie in (0, 1)");
  }
  const std::size_t n = g.num_edges();
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, 0x5011);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {g.subgraph(train), g.subgraph(test)};
}

std::vector<NodeId> sample_negatives(const BipartiteGraph& g, NodeId u, std::size_t k,
                                     Rng& rng) {
  if (u.kind != NodeKind::customer) {
    throw std::invalid_argument("sample_negatives: node must be a customer");
  }
  std::vector<char> adjacent(g.num_skills(), 0);
  for (std::size_t e : g.incident_edges(u)) adjacent[g.skill_of(e)] = 1;
  std::vector<std::size_t> pool;
  for (std::size_t s = 0; s < g.num_skills(); ++s)
    if (!adjacent[s]) pool.push_back(s);
  if (pool.size() < k) {
    throw std::invalid_argument("sample_negatives: customer " + std::to_string(u.index) +
                                " has " + std::to_string(pool.size()) +
                                " non-neighbor skills, fewer than k=" + std::to_string(k));
  }
  std::vector<NodeId> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
    out.push_back(NodeId::skill(pool[i]));
  }
  return out;
}

std::vector<Neighbor> neighbors(const BipartiteGraph& g, NodeId n) {
  std::vector<Neighbor> out;
  for (std::size_t e : g.incident_edges(n)) {
    const NodeId other = n.kind == NodeKind::customer ? NodeId::skill(g.skill_of(e))
                                                      : NodeId::customer(g.customer_of(e));
    out.push_back({g.edge_id(e), other});
  }
  return out;
}

NegativeSampler::NegativeSampler(std::span<const BipartiteGraph* const> graphs) {
  if (graphs.empty()) throw std::invalid_argument("NegativeSampler: no graphs");
  const std::size_t nc = graphs.front()->num_customers();
  const std::size_t ns = graphs.front()->num_skills();
  std::vector<std::vector<char>> adjacent(nc, std::vector<char>(ns, 0));
  for (const BipartiteGraph* g : graphs) {
    if (g->num_customers() != nc || g->num_skills() != ns) {
      throw std::invalid_argument("NegativeSampler: graphs disagree on node counts");
    }
    for (std::size_t e = 0; e < g->num_edges(); ++e) adjacent[g->customer_of(e)][g->skill_of(e)] = 1;
  }
  candidates_.resize(nc);
  for (std::size_t u = 0; u < nc; ++u)
    for (std::size_t s = 0; s < ns; ++s)
      if (!adjacent[u][s]) candidates_[u].push_back(s);
}

NegativeSampler::NegativeSampler(const BipartiteGraph& g)
    : NegativeSampler(std::span<const BipartiteGraph* const>(std::array<const BipartiteGraph*, 1>{&g})) {}

std::vector<std::size_t> NegativeSampler::sample(std::size_t customer, std::size_t k,
                                                 Rng& rng) const {
  std::vector<std::size_t> pool = candidates_.at(customer);
  const std::size_t take = std::min(k, pool.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(take);
  return pool;
}

Tensor gaussian_features(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x6a05);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  Tensor t({rows, dim});
  for (double& v : t.mutable_data()) v = normal(rng);
  return t;
}

Tensor project_features(const Tensor& table, std::size_t dim, std::uint64_t seed) {
  if (table.rank() != 2) throw ShapeError("project_features: table must be rank 2");
  const std::size_t n = table.dim(0), w = table.dim(1);
  const Tensor proj = gaussian_features(w, dim, seed);
  Tensor out({n, dim});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < w; ++t) {
      const double v = table[i * w + t];
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < dim; ++j) out[i * dim + j] += v * proj[t * dim + j];
    }
  return out;
}

}  // namespace pdrfe
