#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pdrfe/autodiff.hpp"
#include "pdrfe/tensor.hpp"

namespace pdrfe {

enum class LayerKind { rgcn, nnconv, eattn };

std::string to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

/// Architecture of a representation model.
struct ModelShape {
  LayerKind kind = LayerKind::nnconv;
  std::size_t hidden = 128;
  std::size_t edge_dim = 32;
  std::size_t layers = 2;
  std::size_t attention_dim = 0;        // 0 means `hidden`
  bool personalizer = false;
  std::size_t personalizer_hidden = 0;  // 0 means `hidden`
  double leaky_slope = 0.2;
  // Attention layers add their aggregate to the incoming embedding.
  bool attention_residual = true;

  std::size_t attention_width() const { return attention_dim ? attention_dim : hidden; }
  std::size_t personalizer_width() const {
    return personalizer_hidden ? personalizer_hidden : hidden;
  }
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Named learnable tensors, kept in a fixed order so optimizers can key state by
/// position.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(ModelShape shape) : shape_(shape) {}

  const ModelShape& shape() const { return shape_; }
  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);

  std::size_t size() const { return values_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Tensor>& values() const { return values_; }
  std::vector<Tensor*> mutable_values();
  std::size_t parameter_count() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  ModelShape shape_;
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

/// Xavier-uniform weights and zero biases for every tensor the shape needs.
ModelParams init_model_params(const ModelShape& shape, std::uint64_t seed);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Tape-bound views of the parameters, one struct per layer kind.

struct RgcnParams {
  ad::Var into_customers;  // W_r for skill → customer messages, d×d
  ad::Var into_skills;     // W_r for customer → skill messages, d×d
  ad::Var self;            // W_self, d×d
};

struct NnconvRelation {
  ad::Var edge_weight;  // W_e, (d·d)×d_e
  ad::Var edge_bias;    // b_e, d·d
};

struct NnconvParams {
  NnconvRelation into_customers;
  NnconvRelation into_skills;
};

struct EdgeAttnRelation {
  ad::Var message;      // W^l, d×d
  ad::Var attn_weight;  // W_a, d_a×(d+d_e)
  ad::Var attn_vector;  // a⃗, 2·d_a
};

struct EdgeAttnParams {
  EdgeAttnRelation into_customers;
  EdgeAttnRelation into_skills;
  double slope = 0.2;
  bool residual = false;
};

struct PersonalizerParams {
  ad::Var w1;  // d_h×(d+d_e)
  ad::Var b1;  // d_h
  ad::Var w2;  // d×d_h
  ad::Var b2;  // d
};

using LayerParams = std::variant<RgcnParams, NnconvParams, EdgeAttnParams>;

struct BoundModel {
  std::vector<LayerParams> layers;
  std::optional<PersonalizerParams> personalizer;
  std::vector<ad::Var> all;  // same order as ModelParams::values()
};

/// Places every tensor on the tape, as parameters when `trainable`, else constants.
BoundModel bind_model(ad::Tape& tape, const ModelParams& params, bool trainable);
/// Uses caller-made variables, one per tensor in ModelParams::values() order.
BoundModel bind_model(const ModelParams& params, std::vector<ad::Var> vars);

}  // namespace pdrfe
