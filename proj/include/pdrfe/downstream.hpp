#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pdrfe/graph.hpp"
#include "pdrfe/tensor.hpp"
#include "pdrfe/trainer.hpp"

namespace pdrfe {

/// Feature rows with binary labels; `source` holds the interaction each row came from.
struct DownstreamRows {
  Tensor x;
  std::vector<int> y;
  std::vector<std::size_t> source;

  std::size_t size() const { return y.size(); }
};

struct DownstreamSplit {
  DownstreamRows train;
  DownstreamRows validation;
  DownstreamRows test;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

/// 6:2:2 counts for n rows: validation and test are rounded to nearest, train takes
/// the remainder.
SplitCounts split_counts(std::size_t n);

/// Seeded uniform partition of the rows into train/validation/test per split_counts.
DownstreamSplit split_rows(const DownstreamRows& rows, std::uint64_t seed);

/// One row per edge of `g`: [customer feature ‖ skill h^L]. The customer feature is
/// the personalized row for that edge when present, else the customer's h^L.
DownstreamRows downstream_features(const ExportedEmbeddings& emb, const BipartiteGraph& g);

DownstreamSplit assemble_downstream(const ExportedEmbeddings& emb, const BipartiteGraph& g,
                                    std::uint64_t seed);

/// One row per edge of `g`: [customer table row ‖ skill table row].
DownstreamRows table_features(const Tensor& customer_table, const Tensor& skill_table,
                              const BipartiteGraph& g);

enum class ClassifierKind { logistic, mlp2 };

std::string to_string(ClassifierKind kind);
ClassifierKind parse_classifier_kind(const std::string& name);

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::logistic;
  std::size_t hidden = 32;
  double learning_rate = 1e-4;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 100;
  std::size_t patience = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const ClassifierSpec& spec);
ClassifierSpec classifier_spec_from_json(const nlohmann::json& j);

/// Logistic: p = σ(w·x + b). mlp2: p = σ(w₂·ReLU(W₁x + b₁) + b₂).
class Classifier {
 public:
  Classifier() = default;
  Classifier(ClassifierSpec spec, std::size_t input_dim);

  const ClassifierSpec& spec() const { return spec_; }
  std::size_t input_dim() const { return input_dim_; }
  std::vector<Tensor>& weights() { return weights_; }
  const std::vector<Tensor>& weights() const { return weights_; }

  std::vector<double> predict(const Tensor& x) const;

 private:
  ClassifierSpec spec_;
  std::size_t input_dim_ = 0;
  std::vector<Tensor> weights_;  // logistic: w, b; mlp2: W₁, b₁, w₂, b₂
};

/// Logits of `weights` applied to rows `x`, recorded on the tape of `x`.
ad::Var classifier_logits(ClassifierKind kind, const std::vector<ad::Var>& weights,
                          const ad::Var& x);

struct ClassifierHistory {
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_validation_loss;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

/// Minimizes mean cross-entropy with Adam over shuffled minibatches; stops once the
/// validation loss has not improved for `patience` epochs and keeps the best epoch.
/// Throws std::invalid_argument when the training labels hold a single class.
Classifier train_classifier(const ClassifierSpec& spec, const DownstreamRows& train,
                            const DownstreamRows& validation,
                            ClassifierHistory* history = nullptr);

struct MetricsReport {
  std::string model;
  std::string classifier;
  std::uint64_t seed = 0;
  double test_ce = 0.0;
  double test_auc = 0.0;
  double positive_rate = 0.0;
  std::size_t n_test = 0;
};

nlohmann::json to_json(const MetricsReport& report);

/// Area under the ROC curve, ties counted as half. 0.5 when a class is absent.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

MetricsReport evaluate(const Classifier& classifier, const DownstreamRows& test);

}  // namespace pdrfe
