#include "pdrfe/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pdrfe/adam.hpp"
#include "pdrfe/objectives.hpp"
#include "pdrfe/rng.hpp"

namespace pdrfe {

SplitCounts split_counts(std::size_t n) {
  const auto fifth = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));
  return {n - 2 * fifth, fifth, fifth};
}

namespace {

DownstreamRows subset(const DownstreamRows& rows, std::span<const std::size_t> picks) {
  DownstreamRows out;
  out.x = take_rows(rows.x, picks);
  for (std::size_t i : picks) {
    out.y.push_back(rows.y[i]);
    out.source.push_back(rows.source[i]);
  }
  return out;
}

}  // namespace

DownstreamSplit split_rows(const DownstreamRows& rows, std::uint64_t seed) {
  const std::size_t n = rows.size();
  if (rows.x.rank() != 2 || rows.x.dim(0) != n || rows.source.size() != n) {
    throw ShapeError("split_rows: features, labels and sources disagree in length");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, 0x622);
  std::shuffle(order.begin(), order.end(), rng);
  const SplitCounts c = split_counts(n);
  auto part = [&](std::size_t begin, std::size_t count) {
    std::vector<std::size_t> picks(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                   order.begin() + static_cast<std::ptrdiff_t>(begin + count));
    std::sort(picks.begin(), picks.end());
    return subset(rows, picks);
  };
  return {part(0, c.train), part(c.train, c.validation), part(c.train + c.validation, c.test)};
}

DownstreamRows downstream_features(const ExportedEmbeddings& emb, const BipartiteGraph& g) {
  const Tensor& hc = emb.nodes.customers;
  const Tensor& hs = emb.nodes.skills;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    if (g.customer_of(e) >= hc.dim(0)) {
      throw std::out_of_range("no embedding for customer " + std::to_string(g.customer_of(e)));
    }
    if (g.skill_of(e) >= hs.dim(0)) {
      throw std::out_of_range("no embedding for skill " + std::to_string(g.skill_of(e)));
    }
  }
  Tensor customer;
  if (emb.personalized) {
    if (emb.personalized->dim(0) != g.num_edges()) {
      throw ShapeError("personalized rows do not match the interaction count");
    }
    customer = *emb.personalized;
  } else {
    customer = take_rows(hc, g.edge_customers());
  }
  DownstreamRows rows;
  rows.x = concat_cols(customer, take_rows(hs, g.edge_skills()));
  rows.y.assign(g.edge_labels().begin(), g.edge_labels().end());
  rows.source.assign(g.edge_ids().begin(), g.edge_ids().end());
  return rows;
}

DownstreamSplit assemble_downstream(const ExportedEmbeddings& emb, const BipartiteGraph& g,
                                    std::uint64_t seed) {
  return split_rows(downstream_features(emb, g), seed);
}

DownstreamRows table_features(const Tensor& customer_table, const Tensor& skill_table,
                              const BipartiteGraph& g) {
  DownstreamRows rows;
  rows.x = concat_cols(take_rows(customer_table, g.edge_customers()),
                       take_rows(skill_table, g.edge_skills()));
  rows.y.assign(g.edge_labels().begin(), g.edge_labels().end());
  rows.source.assign(g.edge_ids().begin(), g.edge_ids().end());
  return rows;
}

std::string to_string(ClassifierKind kind) {
  return kind == ClassifierKind::logistic ? "logistic" : "mlp2";
}

ClassifierKind parse_classifier_kind(const std::string& name) {
  if (name == "logistic") return ClassifierKind::logistic;
  if (name == "mlp2") return ClassifierKind::mlp2;
  throw std::invalid_argument("unknown classifier '" + name + "' (expected logistic or mlp2)");
}

void ClassifierSpec::validate() const {
  if (hidden == 0 || batch_size == 0 || patience == 0) {
    throw std::invalid_argument("classifier hidden, batch_size and patience must be positive");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("classifier learning_rate must be finite and non-negative");
  }
}

nlohmann::json to_json(const ClassifierSpec& s) {
  return {{"kind", to_string(s.kind)},         {"hidden", s.hidden},
          {"learning_rate", s.learning_rate},  {"batch_size", s.batch_size},
          {"max_epochs", s.max_epochs},        {"patience", s.patience},
          {"seed", s.seed}};
}

ClassifierSpec classifier_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("classifier spec must be a JSON object");
  ClassifierSpec s;
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") s.kind = parse_classifier_kind(value.get<std::string>());
    else if (key == "hidden") s.hidden = value.get<std::size_t>();
    else if (key == "learning_rate") s.learning_rate = value.get<double>();
    else if (key == "batch_size") s.batch_size = value.get<std::size_t>();
    else if (key == "max_epochs") s.max_epochs = value.get<std::size_t>();
    else if (key == "patience") s.patience = value.get<std::size_t>();
    else if (key == "seed") s.seed = value.get<std::uint64_t>();
    else throw std::invalid_argument("unknown classifier key '" + key + "'");
  }
  s.validate();
  return s;
}

namespace {

Tensor xavier(std::size_t rows, std::size_t cols, std::size_t fan_out, std::size_t fan_in,
              Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t({rows, cols});
  for (double& v : t.mutable_data()) v = u(rng);
  return t;
}

}  // namespace

Classifier::Classifier(ClassifierSpec spec, std::size_t input_dim)
    : spec_(spec), input_dim_(input_dim) {
  spec_.validate();
  if (input_dim == 0) throw std::invalid_argument("classifier input dimension must be positive");
  Rng rng = make_rng(spec_.seed, 0xc1a);
  if (spec_.kind == ClassifierKind::logistic) {
    weights_ = {xavier(input_dim, 1, 1, input_dim, rng), Tensor::zeros({1})};
  } else {
    const std::size_t h = spec_.hidden;
    weights_ = {xavier(h, input_dim, h, input_dim, rng), Tensor::zeros({h}),
                xavier(h, 1, 1, h, rng), Tensor::zeros({1})};
  }
}

ad::Var classifier_logits(ClassifierKind kind, const std::vector<ad::Var>& w, const ad::Var& x) {
  const std::size_t n = x.value().dim(0);
  ad::Var hidden = x;
  std::size_t at = 0;
  if (kind == ClassifierKind::mlp2) {
    hidden = ad::relu(ad::add_bias(ad::matmul(x, ad::transpose(w[0])), w[1]));
    at = 2;
  }
  return ad::reshape(ad::add_bias(ad::matmul(hidden, w[at]), w[at + 1]), {n});
}

std::vector<double> Classifier::predict(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != input_dim_) {
    throw ShapeError("classifier expects rows of width " + std::to_string(input_dim_) +
                     ", got " + shape_to_string(x.shape()));
  }
  if (x.dim(0) == 0) return {};
  ad::Tape tape;
  std::vector<ad::Var> w;
  for (const auto& t : weights_) w.push_back(tape.constant(t));
  ad::Var p = ad::sigmoid(classifier_logits(spec_.kind, w, tape.constant(x)));
  return {p.value().data().begin(), p.value().data().end()};
}

Classifier train_classifier(const ClassifierSpec& spec, const DownstreamRows& train,
                            const DownstreamRows& validation, ClassifierHistory* history) {
  spec.validate();
  if (train.size() == 0) throw std::invalid_argument("empty classifier training set");
  const auto positives = std::count(train.y.begin(), train.y.end(), 1);
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(train.size())) {
    throw std::invalid_argument("classifier training set holds a single class");
  }
  Classifier clf(spec, train.x.dim(1));
  Classifier best = clf;
  ClassifierHistory local;
  ClassifierHistory& hist = history ? *history : local;
  hist = {};

  auto val_loss = [&](const Classifier& c) {
    return validation.size() ? mean_defect_ce(c.predict(validation.x), validation.y) : 0.0;
  };
  double best_val = validation.size() ? val_loss(clf) : std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  Adam adam({spec.learning_rate});
  Rng rng = make_rng(spec.seed, 0xc1b);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < spec.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += spec.batch_size) {
      const std::size_t end = std::min(order.size(), begin + spec.batch_size);
      std::span<const std::size_t> picks(order.data() + begin, end - begin);
      Tensor targets({picks.size()});
      for (std::size_t i = 0; i < picks.size(); ++i) targets[i] = train.y[picks[i]];
      ad::Tape tape;
      std::vector<ad::Var> w;
      for (const auto& t : clf.weights()) w.push_back(tape.parameter(t));
      ad::Var loss = ad::sigmoid_cross_entropy(
          classifier_logits(spec.kind, w, tape.constant(take_rows(train.x, picks))), targets);
      tape.backward(loss);
      std::vector<Tensor> grads;
      for (const auto& v : w) grads.push_back(tape.grad(v));
      std::vector<Tensor*> targets_ptr;
      for (auto& t : clf.weights()) targets_ptr.push_back(&t);
      adam.step(targets_ptr, grads);
      total += loss.value().item();
      ++steps;
    }
    hist.epoch_train_loss.push_back(total / static_cast<double>(steps));
    if (!validation.size()) {
      best = clf;
      hist.best_epoch = epoch + 1;
      continue;
    }
    const double v = val_loss(clf);
    hist.epoch_validation_loss.push_back(v);
    if (v < best_val) {
      best_val = v;
      best = clf;
      hist.best_epoch = epoch + 1;
      since_best = 0;
    } else if (++since_best >= spec.patience) {
      hist.stopped_early = true;
      break;
    }
  }
  return best;
}

nlohmann::json to_json(const MetricsReport& r) {
  return {{"model", r.model},
          {"classifier", r.classifier},
          {"seed", r.seed},
          {"test_ce", r.test_ce},
          {"test_auc", r.test_auc},
          {"positive_rate", r.positive_rate},
          {"n_test", r.n_test}};
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("roc_auc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j + 1);  // 1-based ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) {
        rank_sum += avg_rank;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return 0.5;
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

MetricsReport evaluate(const Classifier& classifier, const DownstreamRows& test) {
  if (test.size() == 0) throw std::invalid_argument("empty test set");
  const std::vector<double> p = classifier.predict(test.x);
  MetricsReport r;
  r.classifier = to_string(classifier.spec().kind);
  r.seed = classifier.spec().seed;
  r.test_ce = mean_defect_ce(p, test.y);
  r.test_auc = roc_auc(p, test.y);
  r.positive_rate = static_cast<double>(std::count(test.y.begin(), test.y.end(), 1)) /
                    static_cast<double>(test.size());
  r.n_test = test.size();
  return r;
}

}  // namespace pdrfe
