#include "pdrfe/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pdrfe/adam.hpp"
#include "pdrfe/objectives.hpp"
#include "pdrfe/rng.hpp"

namespace pdrfe {

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (negatives == 0) throw std::invalid_argument("negatives must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be a finite non-negative number");
  }
  if (hidden == 0) throw std::invalid_argument("hidden must be positive");
  if (layers == 0) throw std::invalid_argument("layers must be positive");
  if (patience == 0) throw std::invalid_argument("patience must be positive");
  if (!(margin > 0.0) || !std::isfinite(margin)) throw std::invalid_argument("margin must be positive");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
    throw std::invalid_argument("leaky_slope must lie in [0, 1)");
  }
}

ModelShape TrainConfig::model_shape(std::size_t edge_dim) const {
  ModelShape s;
  s.kind = kind;
  s.hidden = hidden;
  s.edge_dim = edge_dim;
  s.layers = layers;
  s.attention_dim = attention_dim;
  s.personalizer = personalizer;
  s.personalizer_hidden = personalizer_hidden;
  s.leaky_slope = leaky_slope;
  s.attention_residual = attention_residual;
  return s;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"negatives", c.negatives},
          {"learning_rate", c.learning_rate},
          {"hidden", c.hidden},
          {"layers", c.layers},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"margin", c.margin},
          {"kind", to_string(c.kind)},
          {"personalizer", c.personalizer},
          {"personalizer_hidden", c.personalizer_hidden},
          {"attention_dim", c.attention_dim},
          {"leaky_slope", c.leaky_slope},
          {"attention_residual", c.attention_residual},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("train config must be a JSON object");
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "batch_size") c.batch_size = value.get<std::size_t>();
    else if (key == "negatives") c.negatives = value.get<std::size_t>();
    else if (key == "learning_rate") c.learning_rate = value.get<double>();
    else if (key == "hidden") c.hidden = value.get<std::size_t>();
    else if (key == "layers") c.layers = value.get<std::size_t>();
    else if (key == "max_epochs") c.max_epochs = value.get<std::size_t>();
    else if (key == "patience") c.patience = value.get<std::size_t>();
    else if (key == "margin") c.margin = value.get<double>();
    else if (key == "kind") c.kind = parse_layer_kind(value.get<std::string>());
    else if (key == "personalizer") c.personalizer = value.get<bool>();
    else if (key == "personalizer_hidden") c.personalizer_hidden = value.get<std::size_t>();
    else if (key == "attention_dim") c.attention_dim = value.get<std::size_t>();
    else if (key == "leaky_slope") c.leaky_slope = value.get<double>();
    else if (key == "attention_residual") c.attention_residual = value.get<bool>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else throw std::invalid_argument("unknown train config key '" + key + "'");
  }
  c.validate();
  return c;
}

void write_history_csv(const std::filesystem::path& path, const TrainHistory& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,loss\n" << std::setprecision(17);
  for (std::size_t i = 0; i < history.step_loss.size(); ++i) {
    out << i + 1 << ',' << history.step_loss[i] << '\n';
  }
}

nlohmann::json history_summary(const TrainHistory& h) {
  return {{"steps", h.step_loss.size()},
          {"epochs_run", h.epochs_run},
          {"best_epoch", h.best_epoch},
          {"epoch_train_loss", h.epoch_train_loss},
          {"epoch_validation_loss", h.epoch_validation_loss},
          {"stopped_early", h.stopped_early},
          {"diverged", h.diverged},
          {"error", h.error},
          {"wall_seconds", h.wall_seconds}};
}

namespace {

NodeEmbeddings initial_embeddings(ad::Tape& tape, const BipartiteGraph& g) {
  const NodeFeatures& f = g.node_features();
  return {tape.constant(f.customers), tape.constant(f.skills), 0};
}

struct Batch {
  std::vector<std::size_t> customers;
  std::vector<std::size_t> edges;
  MarginBatch margin;
};

// Customer rows of a batch, personalized with each edge's utterance when enabled.
ad::Var customer_rows(const BoundModel& model, const NodeEmbeddings& h,
                      const BipartiteGraph& g, const Batch& batch) {
  ad::Var rows = ad::gather_rows(h.customers, ad::make_index(batch.customers));
  if (!model.personalizer) return rows;
  ad::Var utterances = rows.tape().constant(take_rows(g.edge_features(), batch.edges));
  return personalize(*model.personalizer, rows, utterances);
}

Batch make_batch(const BipartiteGraph& g, std::span<const std::size_t> edges,
                 const std::vector<std::vector<std::size_t>>& negatives_of) {
  Batch b;
  for (std::size_t row = 0; row < edges.size(); ++row) {
    const std::size_t e = edges[row];
    b.edges.push_back(e);
    b.customers.push_back(g.customer_of(e));
    b.margin.positives.push_back(g.skill_of(e));
    for (std::size_t neg : negatives_of[row]) {
      b.margin.pair_row.push_back(row);
      b.margin.pair_negative.push_back(neg);
    }
  }
  return b;
}

bool all_finite(const ModelParams& p) {
  return std::all_of(p.values().begin(), p.values().end(),
                     [](const Tensor& t) { return t.all_finite(); });
}

}  // namespace

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t num_edges, std::size_t batch_size,
                                                    Rng& rng) {
  if (batch_size == 0) throw std::invalid_argument("epoch_batches: batch_size must be positive");
  std::vector<std::size_t> order(num_edges);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t begin = 0; begin < num_edges; begin += batch_size) {
    const std::size_t end = std::min(num_edges, begin + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

double evaluate_margin(const ModelParams& params, const BipartiteGraph& message_graph,
                       const BipartiteGraph& edges,
                       const std::vector<std::vector<std::size_t>>& negatives, double margin) {
  if (negatives.size() != edges.num_edges()) {
    throw std::invalid_argument("evaluate_margin: one negative list per edge required");
  }
  std::vector<std::size_t> all(edges.num_edges());
  std::iota(all.begin(), all.end(), 0);
  Batch batch = make_batch(edges, all, negatives);
  if (batch.margin.pairs() == 0) return 0.0;
  ad::Tape tape;
  BoundModel model = bind_model(tape, params, false);
  NodeEmbeddings h = stack_forward(model, message_graph, initial_embeddings(tape, message_graph));
  ad::Var rows = customer_rows(model, h, edges, batch);
  return margin_loss(rows, h.skills, batch.margin, margin).value().item();
}

TrainResult train_representation(const TrainConfig& cfg, const BipartiteGraph& train,
                                 const BipartiteGraph* validation) {
  cfg.validate();
  if (train.num_edges() == 0) throw std::invalid_argument("training graph has no edges");
  if (train.node_features().customers.dim(1) != cfg.hidden) {
    throw ShapeError("initial node features have width " +
                     std::to_string(train.node_features().customers.dim(1)) +
                     " but hidden dim is " + std::to_string(cfg.hidden));
  }
  const auto start = std::chrono::steady_clock::now();
  TrainResult result{init_model_params(cfg.model_shape(train.edge_dim()), cfg.seed), {}};
  TrainHistory& hist = result.history;
  ModelParams& params = result.params;

  const NegativeSampler train_sampler(train);
  std::vector<std::vector<std::size_t>> val_negatives;
  if (validation) {
    const BipartiteGraph* both[] = {&train, validation};
    const NegativeSampler val_sampler{std::span<const BipartiteGraph* const>(both)};
    Rng rng = make_rng(cfg.seed, 0x7a1);
    for (std::size_t e = 0; e < validation->num_edges(); ++e) {
      val_negatives.push_back(val_sampler.sample(validation->customer_of(e), cfg.negatives, rng));
    }
  }

  Adam adam({cfg.learning_rate});
  ModelParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  if (validation) best_val = evaluate_margin(params, train, *validation, val_negatives, cfg.margin);

  Rng rng = make_rng(cfg.seed, 0x7e1);

  try {
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
      double epoch_total = 0.0;
      std::size_t epoch_steps = 0;
      for (const auto& edges : epoch_batches(train.num_edges(), cfg.batch_size, rng)) {
        std::vector<std::vector<std::size_t>> negs;
        negs.reserve(edges.size());
        for (std::size_t e : edges) {
          negs.push_back(train_sampler.sample(train.customer_of(e), cfg.negatives, rng));
        }
        Batch batch = make_batch(train, edges, negs);
        if (batch.margin.pairs() == 0) continue;

        ad::Tape tape;
        BoundModel model = bind_model(tape, params, true);
        NodeEmbeddings h = stack_forward(model, train, initial_embeddings(tape, train));
        ad::Var loss = margin_loss(customer_rows(model, h, train, batch), h.skills,
                                   batch.margin, cfg.margin);
        tape.backward(loss);
        std::vector<Tensor> grads;
        grads.reserve(model.all.size());
        for (const auto& v : model.all) grads.push_back(tape.grad(v));

        ModelParams before = params;
        adam.step(params.mutable_values(), grads);
        if (!all_finite(params)) {
          params = std::move(before);
          throw NonFiniteError("optimizer step produced non-finite parameters");
        }
        const double value = loss.value().item();
        hist.step_loss.push_back(value);
        epoch_total += value;
        ++epoch_steps;
      }
      hist.epoch_train_loss.push_back(epoch_steps ? epoch_total / static_cast<double>(epoch_steps)
                                                  : 0.0);
      hist.epochs_run = epoch + 1;
      if (!validation) continue;
      const double val = evaluate_margin(params, train, *validation, val_negatives, cfg.margin);
      hist.epoch_validation_loss.push_back(val);
      if (val < best_val) {
        best_val = val;
        best = params;
        hist.best_epoch = epoch + 1;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        hist.stopped_early = true;
        break;
      }
    }
    if (validation) params = best;
    else hist.best_epoch = hist.epochs_run;
  } catch (const NonFiniteError& e) {
    hist.diverged = true;
    hist.error = e.what();
  }
  hist.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

ExportedEmbeddings export_embeddings(const ModelParams& params, const BipartiteGraph& g) {
  ExportedEmbeddings out{compute_embeddings(params, g), std::nullopt};
  if (params.shape().personalizer) {
    out.personalized = personalize_rows(
        params, take_rows(out.nodes.customers, g.edge_customers()), g.edge_features());
  }
  return out;
}

void write_embeddings(const std::filesystem::path& path, const ExportedEmbeddings& emb,
                      const BipartiteGraph& g) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  auto emit = [&](const char* kind, const char* key, std::size_t index, std::span<const double> v) {
    nlohmann::json row = {{"kind", kind}, {key, index}, {"vector", std::vector<double>(v.begin(), v.end())}};
    out << row.dump() << '\n';
  };
  for (std::size_t i = 0; i < emb.nodes.customers.dim(0); ++i)
    emit("customer", "index", i, emb.nodes.customers.row(i));
  for (std::size_t i = 0; i < emb.nodes.skills.dim(0); ++i)
    emit("skill", "index", i, emb.nodes.skills.row(i));
  if (emb.personalized) {
    for (std::size_t e = 0; e < emb.personalized->dim(0); ++e)
      emit("interaction", "edge", g.edge_id(e), emb.personalized->row(e));
  }
}

}  // namespace pdrfe
