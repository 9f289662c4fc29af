#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pdrfe/interaction_log.hpp"
#include "pdrfe/tensor.hpp"

namespace pdrfe {

/// Generator settings. Defect labels follow
///   p = σ(logit(base_rate) + context_weight · z_uᵀ M_c z_s)
/// where c is the utterance cluster of the interaction.
struct SynthConfig {
  std::size_t n_customers = 500;
  std::size_t n_skills = 50;
  std::size_t n_interactions = 50000;
  std::size_t latent_dim = 2;
  double latent_mean = 1.0;  // every latent coordinate is N(latent_mean, 1)
  std::size_t n_utterance_clusters = 4;
  // Dirichlet concentration of each customer's cluster preferences; 0 draws clusters
  // uniformly and independently of the customer.
  double habit_concentration = 0.5;
  std::size_t vocabulary_per_cluster = 8;
  std::size_t tokens_per_utterance = 3;
  double base_rate = 0.2;
  double context_weight = 2.0;
  std::size_t customer_regions = 8;
  std::size_t skill_types = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const SynthConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
SynthConfig synth_config_from_json(const nlohmann::json& j);

/// What the labels were drawn from. Never consumed by training code.
struct GroundTruth {
  Tensor customer_latent;                  // [n_customers × latent_dim]
  Tensor skill_latent;                     // [n_skills × latent_dim]
  std::vector<std::size_t> cluster;        // per row
  std::vector<double> bayes_p;             // per row, the label probability
  std::vector<double> context_free_p;      // per row, E_c[p | customer, skill]
};

struct SynthData {
  std::vector<InteractionRow> rows;
  CategoricalTable customers;  // columns: region, segment
  CategoricalTable skills;     // columns: category, type
  GroundTruth truth;
};

SynthData generate(const SynthConfig& cfg);

/// Token text of utterance cluster `c`, token `j`.
std::string cluster_token(std::size_t c, std::size_t j);

/// Mean cross-entropy of the stored probabilities `p` against the rows' labels, over
/// all rows or only those listed.
double truth_ce(const std::vector<double>& p, const std::vector<InteractionRow>& rows);
double truth_ce(const std::vector<double>& p, const std::vector<InteractionRow>& rows,
                std::span<const std::size_t> subset);

struct SynthPaths {
  std::filesystem::path interactions;
  std::filesystem::path customers;
  std::filesystem::path skills;
  std::filesystem::path ground_truth;
};

SynthPaths synth_paths(const std::filesystem::path& dir);

/// Writes interactions.csv, customers.csv, skills.csv and ground_truth.jsonl.
SynthPaths write_synthetic(const std::filesystem::path& dir, const SynthData& data);
GroundTruth load_ground_truth(const std::filesystem::path& path);

}  // namespace pdrfe
