#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdrfe/downstream.hpp"
#include "pdrfe/edge_encoder.hpp"
#include "pdrfe/synthetic.hpp"
#include "pdrfe/trainer.hpp"

namespace pdrfe {

/// Artifact version, "<semver>" or "<semver>-g<commit>" when built from a checkout.
std::string artifact_version();

/// A model variant of the comparison: which layer stack, whether the personalizer is
/// on, and whether representation training happens at all.
struct VariantSpec {
  std::string name;
  std::string legend;  // short component label used in reports
  bool trains = true;
  LayerKind kind = LayerKind::rgcn;
  bool personalizer = false;
};

const std::vector<VariantSpec>& known_variants();
const VariantSpec& variant_spec(const std::string& name);

/// Where interactions come from: a synthetic generator or files on disk.
struct DataSource {
  std::optional<SynthConfig> synthetic;
  std::filesystem::path interactions;
  std::filesystem::path customer_metadata;  // optional
  std::filesystem::path skill_metadata;     // optional
  std::filesystem::path ground_truth;       // optional
};

enum class InitialFeatures { gaussian, metadata };

struct ExperimentPlan {
  std::vector<std::string> variants;
  std::vector<ClassifierKind> classifiers;
  std::vector<std::uint64_t> seeds;
  DataSource data;
  TrainConfig train;          // kind, personalizer and seed are set per cell
  ClassifierSpec classifier;  // kind and seed are set per cell
  EncoderSpec encoder;
  InitialFeatures initial_features = InitialFeatures::gaussian;
  double edge_split = 0.8;
  bool save_checkpoints = false;
  nlohmann::json source;  // normalized plan, the input of the config hash

  void validate() const;
};

/// Relative paths inside the plan resolve against `base_dir`.
ExperimentPlan plan_from_json(const nlohmann::json& j,
                              const std::filesystem::path& base_dir = {});
ExperimentPlan load_plan(const std::filesystem::path& path);

/// FNV-1a of the normalized plan, as 16 hex digits.
std::string config_hash(const ExperimentPlan& plan);

struct CellResult {
  std::string variant;
  ClassifierKind classifier = ClassifierKind::logistic;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  MetricsReport metrics;
  double bayes_ce = 0.0;         // NaN without ground truth
  double context_free_ce = 0.0;  // NaN without ground truth
  double train_seconds = 0.0;
};

struct ExperimentResult {
  std::string config_hash;
  std::string version;
  std::vector<CellResult> cells;

  std::size_t failures() const;
  const CellResult* find(const std::string& variant, ClassifierKind kind,
                         std::uint64_t seed) const;
  /// Median test CE over the seeds that succeeded; NaN if none did.
  double median_ce(const std::string& variant, ClassifierKind kind) const;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Runs every (variant, classifier, seed) cell. Per-cell failures are recorded and
/// the run continues. When `out_dir` is set, per-cell JSON and training histories are
/// written beneath it.
ExperimentResult run_cells(const ExperimentPlan& plan,
                           const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                           const ProgressFn& progress = {});

/// One row of the comparison table: medians per classifier, or "not implemented".
struct TableRow {
  std::string model;
  bool implemented = true;
  std::vector<double> median_ce;  // parallel to the plan's classifiers
};

std::vector<TableRow> comparison_table(const ExperimentPlan& plan, const ExperimentResult& r);

struct AblationPair {
  std::string component;  // personalizer, nnconv, edge_attention
  std::string legend;     // Per, EC, EAtt
  std::string with_variant;
  std::string without_variant;
};

const std::vector<AblationPair>& ablation_pairs();

struct AblationRow {
  AblationPair pair;
  ClassifierKind classifier = ClassifierKind::logistic;
  std::vector<std::uint64_t> seeds;
  std::vector<double> with_ce;     // per seed, NaN where the cell failed
  std::vector<double> without_ce;  // per seed
  double median_with = 0.0;
  double median_without = 0.0;
  double relative_improvement = 0.0;  // (without − with) / without
};

std::vector<AblationRow> ablation_summary(const ExperimentPlan& plan, const ExperimentResult& r);

/// Plan restricted to the variants the ablation needs.
ExperimentPlan ablation_plan(ExperimentPlan plan);

/// cells.csv, table.csv and table.svg under `dir`.
void write_comparison_report(const std::filesystem::path& dir, const ExperimentPlan& plan,
                             const ExperimentResult& r);
/// ablation.csv and ablation.svg under `dir`.
void write_ablation_report(const std::filesystem::path& dir, const ExperimentPlan& plan,
                           const ExperimentResult& r);

/// Simple static bar chart.
std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<std::string>& series,
                          const std::vector<std::vector<double>>& values);

// ---------------------------------------------------------------------------
// Pieces shared with the command-line tools.

/// Interactions and metadata resolved to dense indices.
struct LoadedData {
  std::vector<InteractionRow> rows;
  IndexedLog indexed;
  std::optional<CategoricalTable> customer_metadata;
  std::optional<CategoricalTable> skill_metadata;
  std::optional<GroundTruth> truth;
};

LoadedData load_data(const DataSource& source, const EncoderSpec& encoder);

/// Full interaction graph with initial node features of width `hidden`.
BipartiteGraph build_full_graph(const LoadedData& data, InitialFeatures features,
                                std::size_t hidden, std::uint64_t seed);

/// One-hot metadata features per interaction row.
DownstreamRows onehot_rows(const LoadedData& data, const BipartiteGraph& full);

}  // namespace pdrfe
