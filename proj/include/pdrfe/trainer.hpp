#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pdrfe/graph.hpp"
#include "pdrfe/layers.hpp"
#include "pdrfe/model.hpp"
#include "pdrfe/rng.hpp"

namespace pdrfe {

struct TrainConfig {
  std::size_t batch_size = 512;
  std::size_t negatives = 5;
  double learning_rate = 1e-4;
  std::size_t hidden = 128;
  std::size_t layers = 2;
  std::size_t max_epochs = 10;
  std::size_t patience = 2;
  double margin = 1.0;
  LayerKind kind = LayerKind::nnconv;
  bool personalizer = false;
  std::size_t personalizer_hidden = 0;  // 0 means `hidden`
  std::size_t attention_dim = 0;        // 0 means `hidden`
  double leaky_slope = 0.2;
  bool attention_residual = true;
  std::uint64_t seed = 0;

  void validate() const;
  ModelShape model_shape(std::size_t edge_dim) const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct TrainHistory {
  std::vector<double> step_loss;
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_validation_loss;  // empty without a validation graph
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;  // 1-based; 0 means the initialization was kept
  bool stopped_early = false;
  bool diverged = false;
  std::string error;
  double wall_seconds = 0.0;
};

void write_history_csv(const std::filesystem::path& path, const TrainHistory& history);
nlohmann::json history_summary(const TrainHistory& history);

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

/// One epoch's minibatches: a uniform shuffle of 0..num_edges-1 cut into consecutive
/// slices of `batch_size` (the last may be shorter).
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t num_edges, std::size_t batch_size,
                                                    Rng& rng);

/// Minibatch training of the margin objective with Adam. Message passing always runs
/// over `train`; each batch only selects which training edges contribute loss. When
/// `validation` is given, its edges are scored after every epoch against a fixed set
/// of negatives, training stops once that loss has not improved for `patience`
/// epochs, and the parameters of the best epoch are returned. A non-finite loss stops
/// training with the last finite parameters and `history.diverged` set.
TrainResult train_representation(const TrainConfig& cfg, const BipartiteGraph& train,
                                 const BipartiteGraph* validation = nullptr);

/// Mean margin loss of `edges` scored with embeddings computed over `message_graph`.
/// Negatives come from `negatives[b]` for edge b.
double evaluate_margin(const ModelParams& params, const BipartiteGraph& message_graph,
                       const BipartiteGraph& edges,
                       const std::vector<std::vector<std::size_t>>& negatives, double margin);

struct ExportedEmbeddings {
  EmbeddingTable nodes;
  std::optional<Tensor> personalized;  // one row per edge of the export graph
};

/// h^L for every node of `g` and, with a personalizer, h^p for every edge of `g`
/// from its customer and utterance feature.
ExportedEmbeddings export_embeddings(const ModelParams& params, const BipartiteGraph& g);

/// JSON-lines: one object per node ({"kind","index","vector"}) followed by one per
/// edge ({"kind":"interaction","edge","vector"}) when personalized rows exist.
void write_embeddings(const std::filesystem::path& path, const ExportedEmbeddings& emb,
                      const BipartiteGraph& g);

}  // namespace pdrfe
