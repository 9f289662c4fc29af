#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "pdrfe/autodiff.hpp"
#include "pdrfe/rng.hpp"
#include "pdrfe/tensor.hpp"

namespace pdrfe {

enum class NodeKind { customer, skill };

struct NodeId {
  NodeKind kind = NodeKind::customer;
  std::size_t index = 0;

  static NodeId customer(std::size_t i) { return {NodeKind::customer, i}; }
  static NodeId skill(std::size_t i) { return {NodeKind::skill, i}; }
  friend bool operator==(const NodeId&, const NodeId&) = default;
};

/// One interaction row with node indices already resolved.
struct InteractionRecord {
  std::size_t customer = 0;
  std::size_t skill = 0;
  Tensor feature;  // utterance feature, rank 1
  int defect = 0;
};

struct EdgeRecord {
  NodeId customer;
  NodeId skill;
  Tensor utterance_feature;
  int defect_label = 0;
  std::size_t edge_id = 0;
};

/// Initial node features h⁰, one row per node.
struct NodeFeatures {
  Tensor customers;
  Tensor skills;
};

/// Index arrays that drive message passing in one direction: messages flow from
/// `source` nodes into `target` nodes, one entry per edge.
struct MessageIndex {
  ad::Index target;
  ad::Index source;
  std::size_t num_targets = 0;
  std::size_t num_sources = 0;
  // 1 for targets with no incident edge, 0 otherwise.
  Tensor isolated;
  // Grouping of the edge features for edge-conditioned aggregation.
  std::shared_ptr<const ad::OuterPlan> outer;
};

/// Customer–skill multigraph. Immutable after construction; parallel edges allowed.
/// Edges are addressed by position 0..num_edges()-1; edge_id() keeps the id assigned
/// by the graph the edge was first built in, so it survives splitting.
class BipartiteGraph {
 public:
  BipartiteGraph() = default;

  std::size_t num_customers() const { return num_customers_; }
  std::size_t num_skills() const { return num_skills_; }
  std::size_t num_nodes(NodeKind kind) const;
  std::size_t num_edges() const { return customer_.size(); }
  std::size_t edge_dim() const { return edge_features_->rank() == 2 ? edge_features_->dim(1) : 0; }

  std::size_t customer_of(std::size_t e) const { return customer_[e]; }
  std::size_t skill_of(std::size_t e) const { return skill_[e]; }
  int label_of(std::size_t e) const { return label_[e]; }
  std::size_t edge_id(std::size_t e) const { return edge_id_[e]; }
  EdgeRecord edge(std::size_t e) const;

  std::span<const std::size_t> edge_customers() const { return customer_; }
  std::span<const std::size_t> edge_skills() const { return skill_; }
  std::span<const int> edge_labels() const { return label_; }
  std::span<const std::size_t> edge_ids() const { return edge_id_; }

  const Tensor& edge_features() const { return *edge_features_; }
  const std::shared_ptr<const Tensor>& shared_edge_features() const { return edge_features_; }
  const NodeFeatures& node_features() const { return *node_features_; }

  // Edge positions incident to `n`, in CSR order.
  std::span<const std::size_t> incident_edges(NodeId n) const;
  std::size_t degree(NodeId n) const { return incident_edges(n).size(); }

  // Message flow skill → customer (targets are customers) and customer → skill.
  const MessageIndex& into_customers() const { return into_customers_; }
  const MessageIndex& into_skills() const { return into_skills_; }

  // Graph over the same nodes keeping only the listed edge positions (in that order).
  BipartiteGraph subgraph(std::span<const std::size_t> positions) const;

 private:
  friend BipartiteGraph build_graph(std::span<const InteractionRecord>, NodeFeatures);
  void index();

  std::size_t num_customers_ = 0;
  std::size_t num_skills_ = 0;
  std::vector<std::size_t> customer_;
  std::vector<std::size_t> skill_;
  std::vector<int> label_;
  std::vector<std::size_t> edge_id_;
  std::shared_ptr<const Tensor> edge_features_ = std::make_shared<const Tensor>();
  std::shared_ptr<const NodeFeatures> node_features_ = std::make_shared<const NodeFeatures>();

  std::vector<std::size_t> customer_offsets_;
  std::vector<std::size_t> customer_edges_;
  std::vector<std::size_t> skill_offsets_;
  std::vector<std::size_t> skill_edges_;
  MessageIndex into_customers_;
  MessageIndex into_skills_;
};

/// Builds the graph; node counts come from the feature tables. Throws
/// std::invalid_argument naming the row for dangling node ids and ShapeError for
/// inconsistent feature widths.
BipartiteGraph build_graph(std::span<const InteractionRecord> records, NodeFeatures features);

/// Uniform random partition of the edges: round(fraction·|E|) go to the first graph.
std::pair<BipartiteGraph, BipartiteGraph> split_edges(const BipartiteGraph& g,
                                                       double train_fraction,
                                                       std::uint64_t seed);

/// `k` distinct skills drawn uniformly from the skills not adjacent to customer `u`.
std::vector<NodeId> sample_negatives(const BipartiteGraph& g, NodeId u, std::size_t k,
                                     Rng& rng);

struct Neighbor {
  std::size_t edge_id;
  NodeId other;
};

std::vector<Neighbor> neighbors(const BipartiteGraph& g, NodeId n);

/// Per-customer skill adjacency, optionally unioned over several graphs. Supports
/// repeated negative sampling without rescanning edges.
class NegativeSampler {
 public:
  explicit NegativeSampler(std::span<const BipartiteGraph* const> graphs);
  explicit NegativeSampler(const BipartiteGraph& g);

  std::size_t non_neighbor_count(std::size_t customer) const {
    return candidates_[customer].size();
  }
  // Up to `k` distinct non-neighbor skills; fewer when fewer exist.
  std::vector<std::size_t> sample(std::size_t customer, std::size_t k, Rng& rng) const;

 private:
  std::vector<std::vector<std::size_t>> candidates_;
};

/// Seeded standard-normal features scaled by 1/sqrt(dim).
Tensor gaussian_features(std::size_t rows, std::size_t dim, std::uint64_t seed);
/// Fixed seeded linear projection of a one-hot table to `dim` columns.
Tensor project_features(const Tensor& table, std::size_t dim, std::uint64_t seed);

}  // namespace pdrfe
