#include "pdrfe/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pdrfe/rng.hpp"

namespace pdrfe {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::rgcn: return "rgcn";
    case LayerKind::nnconv: return "nnconv";
    case LayerKind::eattn: return "eattn";
  }
  return "?";
}

LayerKind parse_layer_kind(std::string_view name) {
  if (name == "rgcn") return LayerKind::rgcn;
  if (name == "nnconv") return LayerKind::nnconv;
  if (name == "eattn") return LayerKind::eattn;
  throw std::invalid_argument("unknown layer kind '" + std::string(name) +
                              "' (expected rgcn, nnconv or eattn)");
}

void ModelParams::add(std::string name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

bool ModelParams::contains(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const Tensor& ModelParams::at(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw std::out_of_range("no parameter named " + std::string(name));
  return values_[static_cast<std::size_t>(it - names_.begin())];
}

Tensor& ModelParams::at(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).at(name));
}

std::vector<Tensor*> ModelParams::mutable_values() {
  std::vector<Tensor*> out;
  for (auto& v : values_) out.push_back(&v);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

namespace {

std::string layer_prefix(std::size_t l, LayerKind kind) {
  return "layer" + std::to_string(l) + "." + to_string(kind) + ".";
}

Tensor xavier(std::size_t fan_out, std::size_t fan_in, Rng& rng, Shape shape) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t(std::move(shape));
  for (double& v : t.mutable_data()) v = u(rng);
  return t;
}

Tensor xavier(std::size_t rows, std::size_t cols, Rng& rng) {
  return xavier(rows, cols, rng, {rows, cols});
}

}  // namespace

ModelParams init_model_params(const ModelShape& shape, std::uint64_t seed) {
  if (shape.hidden == 0 || shape.edge_dim == 0 || shape.layers == 0) {
    throw std::invalid_argument("model shape needs positive hidden, edge_dim and layers");
  }
  ModelParams p(shape);
  Rng rng = make_rng(seed, 0x1417);
  const std::size_t d = shape.hidden, de = shape.edge_dim, da = shape.attention_width();
  for (std::size_t l = 0; l < shape.layers; ++l) {
    const std::string pre = layer_prefix(l, shape.kind);
    switch (shape.kind) {
      case LayerKind::rgcn:
        p.add(pre + "into_customers", xavier(d, d, rng));
        p.add(pre + "into_skills", xavier(d, d, rng));
        p.add(pre + "self", xavier(d, d, rng));
        break;
      case LayerKind::nnconv:
        for (const char* rel : {"into_customers", "into_skills"}) {
          p.add(pre + rel + ".edge_weight", xavier(d * d, de, rng));
          p.add(pre + rel + ".edge_bias", Tensor::zeros({d * d}));
        }
        break;
      case LayerKind::eattn:
        for (const char* rel : {"into_customers", "into_skills"}) {
          p.add(pre + rel + ".message", xavier(d, d, rng));
          p.add(pre + rel + ".attn_weight", xavier(da, d + de, rng));
          p.add(pre + rel + ".attn_vector", xavier(1, 2 * da, rng, {2 * da}));
        }
        break;
    }
  }
  if (shape.personalizer) {
    const std::size_t dh = shape.personalizer_width();
    p.add("personalizer.w1", xavier(dh, d + de, rng));
    p.add("personalizer.b1", Tensor::zeros({dh}));
    p.add("personalizer.w2", xavier(d, dh, rng));
    p.add("personalizer.b2", Tensor::zeros({d}));
  }
  return p;
}

namespace {

nlohmann::json shape_to_json(const ModelShape& s) {
  return {{"kind", to_string(s.kind)},
          {"hidden", s.hidden},
          {"edge_dim", s.edge_dim},
          {"layers", s.layers},
          {"attention_dim", s.attention_dim},
          {"personalizer", s.personalizer},
          {"personalizer_hidden", s.personalizer_hidden},
          {"leaky_slope", s.leaky_slope},
          {"attention_residual", s.attention_residual}};
}

ModelShape shape_from_json(const nlohmann::json& j) {
  ModelShape s;
  s.kind = parse_layer_kind(j.at("kind").get<std::string>());
  s.hidden = j.at("hidden").get<std::size_t>();
  s.edge_dim = j.at("edge_dim").get<std::size_t>();
  s.layers = j.at("layers").get<std::size_t>();
  s.attention_dim = j.at("attention_dim").get<std::size_t>();
  s.personalizer = j.at("personalizer").get<bool>();
  s.personalizer_hidden = j.at("personalizer_hidden").get<std::size_t>();
  s.leaky_slope = j.at("leaky_slope").get<double>();
  s.attention_residual = j.at("attention_residual").get<bool>();
  return s;
}

constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = params.values()[i];
    tensors.push_back({{"name", params.names()[i]},
                       {"shape", t.shape()},
                       {"data", std::vector<double>(t.data().begin(), t.data().end())}});
  }
  nlohmann::json doc = {{"format", "pdrfe-checkpoint"},
                        {"version", kCheckpointVersion},
                        {"shape", shape_to_json(params.shape())},
                        {"tensors", std::move(tensors)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << doc.dump() << '\n';
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "pdrfe-checkpoint") {
    throw std::runtime_error(path.string() + ": not a checkpoint file");
  }
  if (doc.at("version").get<int>() != kCheckpointVersion) {
    throw std::runtime_error(path.string() + ": unsupported checkpoint version");
  }
  const ModelShape shape = shape_from_json(doc.at("shape"));
  const ModelParams expected = init_model_params(shape, 0);
  ModelParams params(shape);
  for (const auto& t : doc.at("tensors")) {
    params.add(t.at("name").get<std::string>(),
               Tensor(t.at("shape").get<Shape>(), t.at("data").get<std::vector<double>>()));
  }
  if (params.names() != expected.names()) {
    throw std::runtime_error(path.string() + ": tensor names do not match the declared shape");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params.values()[i].shape() != expected.values()[i].shape()) {
      throw std::runtime_error(path.string() + ": tensor " + params.names()[i] +
                               " has the wrong shape");
    }
  }
  return params;
}

BoundModel bind_model(ad::Tape& tape, const ModelParams& params, bool trainable) {
  std::vector<ad::Var> vars;
  for (const auto& v : params.values())
    vars.push_back(trainable ? tape.parameter(v) : tape.constant(v));
  return bind_model(params, std::move(vars));
}

BoundModel bind_model(const ModelParams& params, std::vector<ad::Var> vars) {
  if (vars.size() != params.size()) {
    throw std::invalid_argument("bind_model: expected " + std::to_string(params.size()) +
                                " variables, got " + std::to_string(vars.size()));
  }
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i].shape() != params.values()[i].shape()) {
      throw ShapeError("bind_model: variable for " + params.names()[i] + " has shape " +
                       shape_to_string(vars[i].shape()));
    }
  }
  BoundModel m;
  m.all = std::move(vars);
  auto var = [&](const std::string& name) {
    auto it = std::find(params.names().begin(), params.names().end(), name);
    return m.all[static_cast<std::size_t>(it - params.names().begin())];
  };
  const ModelShape& s = params.shape();
  for (std::size_t l = 0; l < s.layers; ++l) {
    const std::string pre = layer_prefix(l, s.kind);
    switch (s.kind) {
      case LayerKind::rgcn:
        m.layers.emplace_back(
            RgcnParams{var(pre + "into_customers"), var(pre + "into_skills"), var(pre + "self")});
        break;
      case LayerKind::nnconv:
        m.layers.emplace_back(NnconvParams{
            {var(pre + "into_customers.edge_weight"), var(pre + "into_customers.edge_bias")},
            {var(pre + "into_skills.edge_weight"), var(pre + "into_skills.edge_bias")}});
        break;
      case LayerKind::eattn:
        m.layers.emplace_back(EdgeAttnParams{
            {var(pre + "into_customers.message"), var(pre + "into_customers.attn_weight"),
             var(pre + "into_customers.attn_vector")},
            {var(pre + "into_skills.message"), var(pre + "into_skills.attn_weight"),
             var(pre + "into_skills.attn_vector")},
            s.leaky_slope, s.attention_residual});
        break;
    }
  }
  if (s.personalizer) {
    m.personalizer = PersonalizerParams{var("personalizer.w1"), var("personalizer.b1"),
                                        var("personalizer.w2"), var("personalizer.b2")};
  }
  return m;
}

}  // namespace pdrfe
