#include "pdrfe/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pdrfe/rng.hpp"

#ifndef PDRFE_VERSION
#define PDRFE_VERSION "0.1.0"
#endif

namespace pdrfe {

std::string artifact_version() { return PDRFE_VERSION; }

const std::vector<VariantSpec>& known_variants() {
  static const std::vector<VariantSpec> variants = {
      {"onehot", "Raw One-Hot Encoding", false, LayerKind::rgcn, false},
      {"rgcn", "RGCN", true, LayerKind::rgcn, false},
      {"rgcn+ec", "RGCN+EC", true, LayerKind::nnconv, false},
      {"rgcn+eatt", "RGCN+EAtt", true, LayerKind::eattn, false},
      {"rgcn+per", "RGCN+Per", true, LayerKind::rgcn, true},
      {"pdrfe-nnconv", "PDRFE (NNConv)", true, LayerKind::nnconv, true},
      {"pdrfe-eattn", "PDRFE (edge attention)", true, LayerKind::eattn, true},
  };
  return variants;
}

const VariantSpec& variant_spec(const std::string& name) {
  for (const auto& v : known_variants())
    if (v.name == name) return v;
  std::string known;
  for (const auto& v : known_variants()) known += (known.empty() ? "" : ", ") + v.name;
  throw std::invalid_argument("unknown variant '" + name + "' (known: " + known + ")");
}

void ExperimentPlan::validate() const {
  if (variants.empty()) throw std::invalid_argument("plan needs at least one variant");
  for (const auto& v : variants) variant_spec(v);
  if (classifiers.empty()) throw std::invalid_argument("plan needs at least one classifier");
  if (seeds.empty()) throw std::invalid_argument("at least one seed");
  if (!data.synthetic && data.interactions.empty()) {
    throw std::invalid_argument("plan data needs either a synthetic config or an interactions file");
  }
  if (!(edge_split > 0.0 && edge_split < 1.0)) {
    throw std::invalid_argument("edge_split must lie in (0, 1)");
  }
  train.validate();
  classifier.validate();
  if (encoder.dim == 0) throw std::invalid_argument("encoder dim must be positive");
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

EncoderSpec encoder_from_json(const nlohmann::json& j) {
  EncoderSpec e;
  for (const auto& [key, v] : j.items()) {
    if (key == "dim") e.dim = v.get<std::size_t>();
    else if (key == "lowercase") e.lowercase = v.get<bool>();
    else if (key == "hash_seed") e.hash_seed = v.get<std::uint64_t>();
    else throw std::invalid_argument("unknown encoder key '" + key + "'");
  }
  return e;
}

}  // namespace

ExperimentPlan plan_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw std::invalid_argument("plan must be a JSON object");
  static const std::vector<std::string> allowed = {
      "variants", "classifiers", "seeds",        "data",
      "train",    "classifier",  "encoder",      "initial_features",
      "edge_split", "save_checkpoints"};
  for (const auto& [key, v] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw std::invalid_argument("unknown plan key '" + key + "'");
    }
  }
  ExperimentPlan p;
  p.variants = j.value("variants", std::vector<std::string>{});
  for (const auto& c : j.value("classifiers", std::vector<std::string>{"logistic", "mlp2"}))
    p.classifiers.push_back(parse_classifier_kind(c));
  if (!j.contains("seeds")) throw std::invalid_argument("at least one seed");
  p.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();

  const nlohmann::json data = j.value("data", nlohmann::json::object());
  for (const auto& [key, v] : data.items()) {
    if (key == "synthetic") p.data.synthetic = synth_config_from_json(v);
    else if (key == "interactions") p.data.interactions = resolve(base_dir, v.get<std::string>());
    else if (key == "customer_metadata") p.data.customer_metadata = resolve(base_dir, v.get<std::string>());
    else if (key == "skill_metadata") p.data.skill_metadata = resolve(base_dir, v.get<std::string>());
    else if (key == "ground_truth") p.data.ground_truth = resolve(base_dir, v.get<std::string>());
    else throw std::invalid_argument("unknown data key '" + key + "'");
  }
  if (j.contains("train")) p.train = train_config_from_json(j.at("train"));
  if (j.contains("classifier")) p.classifier = classifier_spec_from_json(j.at("classifier"));
  if (j.contains("encoder")) p.encoder = encoder_from_json(j.at("encoder"));
  const std::string init = j.value("initial_features", p.data.synthetic ? "gaussian" : "metadata");
  if (init == "gaussian") p.initial_features = InitialFeatures::gaussian;
  else if (init == "metadata") p.initial_features = InitialFeatures::metadata;
  else throw std::invalid_argument("initial_features must be gaussian or metadata");
  p.edge_split = j.value("edge_split", 0.8);
  p.save_checkpoints = j.value("save_checkpoints", false);
  p.validate();

  nlohmann::json norm = {{"variants", p.variants},
                         {"seeds", p.seeds},
                         {"train", to_json(p.train)},
                         {"classifier", to_json(p.classifier)},
                         {"encoder",
                          {{"dim", p.encoder.dim},
                           {"lowercase", p.encoder.lowercase},
                           {"hash_seed", p.encoder.hash_seed}}},
                         {"initial_features", init},
                         {"edge_split", p.edge_split}};
  for (auto c : p.classifiers) norm["classifiers"].push_back(to_string(c));
  if (p.data.synthetic) norm["data"]["synthetic"] = to_json(*p.data.synthetic);
  else norm["data"]["interactions"] = p.data.interactions.filename().string();
  p.source = std::move(norm);
  return p;
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open plan " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return plan_from_json(j, path.parent_path());
}

std::string config_hash(const ExperimentPlan& plan) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : plan.source.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::size_t ExperimentResult::failures() const {
  return static_cast<std::size_t>(
      std::count_if(cells.begin(), cells.end(), [](const CellResult& c) { return !c.ok; }));
}

const CellResult* ExperimentResult::find(const std::string& variant, ClassifierKind kind,
                                         std::uint64_t seed) const {
  for (const auto& c : cells)
    if (c.variant == variant && c.classifier == kind && c.seed == seed) return &c;
  return nullptr;
}

namespace {

double median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

double ExperimentResult::median_ce(const std::string& variant, ClassifierKind kind) const {
  std::vector<double> v;
  for (const auto& c : cells)
    if (c.variant == variant && c.classifier == kind && c.ok) v.push_back(c.metrics.test_ce);
  return median(std::move(v));
}

LoadedData load_data(const DataSource& source, const EncoderSpec& encoder_spec) {
  LoadedData d;
  if (source.synthetic) {
    SynthData s = generate(*source.synthetic);
    d.rows = std::move(s.rows);
    d.customer_metadata = std::move(s.customers);
    d.skill_metadata = std::move(s.skills);
    d.truth = std::move(s.truth);
  } else {
    d.rows = load_interaction_log(source.interactions);
    if (!source.customer_metadata.empty())
      d.customer_metadata = load_categorical_table(source.customer_metadata);
    if (!source.skill_metadata.empty())
      d.skill_metadata = load_categorical_table(source.skill_metadata);
    if (!source.ground_truth.empty()) {
      d.truth = load_ground_truth(source.ground_truth);
      if (d.truth->bayes_p.size() != d.rows.size()) {
        throw std::runtime_error("ground truth has " + std::to_string(d.truth->bayes_p.size()) +
                                 " rows but the log has " + std::to_string(d.rows.size()));
      }
    }
  }
  IdMap customers, skills;
  if (d.customer_metadata)
    for (const auto& id : d.customer_metadata->ids) customers.intern(id);
  if (d.skill_metadata)
    for (const auto& id : d.skill_metadata->ids) skills.intern(id);
  HashingEncoder encoder(encoder_spec);
  d.indexed = index_log(d.rows, encoder, std::move(customers), std::move(skills));
  return d;
}

BipartiteGraph build_full_graph(const LoadedData& data, InitialFeatures features,
                                std::size_t hidden, std::uint64_t seed) {
  const std::size_t nu = data.indexed.customers.size(), ns = data.indexed.skills.size();
  NodeFeatures f;
  if (features == InitialFeatures::metadata) {
    if (!data.customer_metadata || !data.skill_metadata) {
      throw std::invalid_argument("metadata initial features need both metadata tables");
    }
    f.customers = project_features(one_hot(*data.customer_metadata, data.indexed.customers),
                                   hidden, derive_seed(seed, 0xf1));
    f.skills = project_features(one_hot(*data.skill_metadata, data.indexed.skills), hidden,
                                derive_seed(seed, 0xf2));
  } else {
    f.customers = gaussian_features(nu, hidden, derive_seed(seed, 0xf1));
    f.skills = gaussian_features(ns, hidden, derive_seed(seed, 0xf2));
  }
  return build_graph(data.indexed.records, std::move(f));
}

DownstreamRows onehot_rows(const LoadedData& data, const BipartiteGraph& full) {
  if (!data.customer_metadata || !data.skill_metadata) {
    throw std::invalid_argument("the onehot variant needs customer and skill metadata");
  }
  return table_features(one_hot(*data.customer_metadata, data.indexed.customers),
                        one_hot(*data.skill_metadata, data.indexed.skills), full);
}

namespace {

std::string cell_stem(const std::string& variant, const std::string& classifier,
                      std::uint64_t seed) {
  std::string v = variant;
  std::replace(v.begin(), v.end(), '+', '_');
  return v + (classifier.empty() ? "" : "_" + classifier) + "_seed" + std::to_string(seed);
}

}  // namespace

ExperimentResult run_cells(const ExperimentPlan& plan,
                           const std::optional<std::filesystem::path>& out_dir,
                           const ProgressFn& progress) {
  plan.validate();
  auto say = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  ExperimentResult result{config_hash(plan), artifact_version(), {}};
  if (out_dir) {
    std::filesystem::create_directories(*out_dir / "cells");
    std::ofstream(*out_dir / "plan.json") << plan.source.dump(2) << '\n';
  }

  const LoadedData data = load_data(plan.data, plan.encoder);
  say("loaded " + std::to_string(data.rows.size()) + " interactions, " +
      std::to_string(data.indexed.customers.size()) + " customers, " +
      std::to_string(data.indexed.skills.size()) + " skills");

  for (std::uint64_t seed : plan.seeds) {
    const BipartiteGraph full =
        build_full_graph(data, plan.initial_features, plan.train.hidden, seed);
    const auto [train_graph, test_graph] = split_edges(full, plan.edge_split, seed);

    for (const auto& name : plan.variants) {
      const VariantSpec& v = variant_spec(name);
      std::optional<DownstreamRows> rows;
      std::string failure;
      double train_seconds = 0.0;
      try {
        if (!v.trains) {
          rows = onehot_rows(data, full);
        } else {
          TrainConfig cfg = plan.train;
          cfg.kind = v.kind;
          cfg.personalizer = v.personalizer;
          cfg.seed = seed;
          TrainResult trained = train_representation(cfg, train_graph, &test_graph);
          train_seconds = trained.history.wall_seconds;
          if (out_dir) {
            const auto stem = cell_stem(name, "", seed);
            write_history_csv(*out_dir / "cells" / (stem + "_history.csv"), trained.history);
            std::ofstream(*out_dir / "cells" / (stem + "_history.json"))
                << history_summary(trained.history).dump(2) << '\n';
            if (plan.save_checkpoints)
              save_checkpoint(*out_dir / "cells" / (stem + "_checkpoint.json"), trained.params);
          }
          if (trained.history.diverged) {
            throw std::runtime_error("representation training diverged: " +
                                     trained.history.error);
          }
          say(name + " seed " + std::to_string(seed) + ": trained " +
              std::to_string(trained.history.epochs_run) + " epochs in " +
              std::to_string(train_seconds) + " s");
          rows = downstream_features(export_embeddings(trained.params, full), full);
        }
      } catch (const std::exception& e) {
        failure = e.what();
      }

      std::optional<DownstreamSplit> split;
      if (rows) split = split_rows(*rows, seed);
      for (ClassifierKind kind : plan.classifiers) {
        CellResult cell;
        cell.variant = name;
        cell.classifier = kind;
        cell.seed = seed;
        cell.train_seconds = train_seconds;
        cell.bayes_ce = cell.context_free_ce = kNaN;
        try {
          if (!split) throw std::runtime_error(failure);
          ClassifierSpec spec = plan.classifier;
          spec.kind = kind;
          spec.seed = seed;
          const Classifier clf = train_classifier(spec, split->train, split->validation);
          cell.metrics = evaluate(clf, split->test);
          cell.metrics.model = name;
          if (data.truth) {
            cell.bayes_ce = truth_ce(data.truth->bayes_p, data.rows, split->test.source);
            cell.context_free_ce =
                truth_ce(data.truth->context_free_p, data.rows, split->test.source);
          }
          cell.ok = true;
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
        if (out_dir) {
          nlohmann::json j = to_json(cell.metrics);
          j["model"] = name;
          j["classifier"] = to_string(kind);
          j["seed"] = seed;
          j["ok"] = cell.ok;
          if (!cell.ok) j["error"] = cell.error;
          if (!std::isnan(cell.bayes_ce)) {
            j["bayes_ce"] = cell.bayes_ce;
            j["context_free_ce"] = cell.context_free_ce;
          }
          j["config_hash"] = result.config_hash;
          j["version"] = result.version;
          std::ofstream(*out_dir / "cells" / (cell_stem(name, to_string(kind), seed) + ".json"))
              << j.dump(2) << '\n';
        }
        say(name + " / " + to_string(kind) + " / seed " + std::to_string(seed) + ": " +
            (cell.ok ? "test CE " + std::to_string(cell.metrics.test_ce) : "FAILED " + cell.error));
        result.cells.push_back(std::move(cell));
      }
    }
  }
  return result;
}

std::vector<TableRow> comparison_table(const ExperimentPlan& plan, const ExperimentResult& r) {
  std::vector<TableRow> rows;
  for (const char* missing : {"PinSage", "Revised PinSage"})
    rows.push_back({missing, false, std::vector<double>(plan.classifiers.size(), kNaN)});
  for (const auto& v : known_variants()) {
    if (std::find(plan.variants.begin(), plan.variants.end(), v.name) == plan.variants.end())
      continue;
    TableRow row{v.name, true, {}};
    for (ClassifierKind k : plan.classifiers) row.median_ce.push_back(r.median_ce(v.name, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

const std::vector<AblationPair>& ablation_pairs() {
  static const std::vector<AblationPair> pairs = {
      {"personalizer", "Per", "rgcn+per", "rgcn"},
      {"nnconv", "EC", "rgcn+ec", "rgcn"},
      {"edge_attention", "EAtt", "rgcn+eatt", "rgcn"},
  };
  return pairs;
}

ExperimentPlan ablation_plan(ExperimentPlan plan) {
  plan.variants = {"rgcn"};
  for (const auto& p : ablation_pairs()) plan.variants.push_back(p.with_variant);
  plan.source["variants"] = plan.variants;
  return plan;
}

std::vector<AblationRow> ablation_summary(const ExperimentPlan& plan, const ExperimentResult& r) {
  std::vector<AblationRow> out;
  for (const auto& pair : ablation_pairs()) {
    for (ClassifierKind k : plan.classifiers) {
      AblationRow row{pair, k, plan.seeds, {}, {}, 0.0, 0.0, 0.0};
      for (std::uint64_t seed : plan.seeds) {
        const CellResult* w = r.find(pair.with_variant, k, seed);
        const CellResult* wo = r.find(pair.without_variant, k, seed);
        row.with_ce.push_back(w && w->ok ? w->metrics.test_ce : kNaN);
        row.without_ce.push_back(wo && wo->ok ? wo->metrics.test_ce : kNaN);
      }
      row.median_with = median(row.with_ce);
      row.median_without = median(row.without_ce);
      row.relative_improvement = (row.median_without - row.median_with) / row.median_without;
      out.push_back(std::move(row));
    }
  }
  return out;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::string seed_list(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (auto v : seeds) s += (s.empty() ? "" : ";") + std::to_string(v);
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<std::string>& series,
                          const std::vector<std::vector<double>>& values) {
  static const char* colors[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52"};
  const double group_w = 90.0, bar_w = 70.0 / std::max<std::size_t>(1, series.size());
  const double left = 60, top = 40, plot_h = 260;
  const double width = left + group_w * static_cast<double>(labels.size()) + 40;
  const double height = top + plot_h + 110;
  double vmax = 0.0;
  for (const auto& row : values)
    for (double v : row)
      if (!std::isnan(v)) vmax = std::max(vmax, v);
  if (vmax <= 0.0) vmax = 1.0;
  vmax *= 1.1;

  std::ostringstream s;
  s << std::fixed << std::setprecision(1);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << svg_escape(title) << "</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << width - 20
    << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
    << top + plot_h << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = vmax * t / 4.0, y = top + plot_h - plot_h * t / 4.0;
    s << "<text x=\"" << left - 5 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">"
      << std::setprecision(3) << v << std::setprecision(1) << "</text>\n";
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double gx = left + group_w * static_cast<double>(i) + 10;
    for (std::size_t k = 0; k < series.size(); ++k) {
      const double v = i < values.size() && k < values[i].size() ? values[i][k] : kNaN;
      if (std::isnan(v)) continue;
      const double h = plot_h * v / vmax;
      s << "<rect x=\"" << gx + bar_w * static_cast<double>(k) << "\" y=\"" << top + plot_h - h
        << "\" width=\"" << bar_w - 2 << "\" height=\"" << h << "\" fill=\"" << colors[k % 4]
        << "\"/>\n";
    }
    s << "<text transform=\"translate(" << gx + 35 << "," << top + plot_h + 12
      << ") rotate(30)\">" << svg_escape(labels[i]) << "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double y = height - 20.0 - 14.0 * static_cast<double>(series.size() - 1 - k);
    s << "<rect x=\"" << left << "\" y=\"" << y - 9 << "\" width=\"10\" height=\"10\" fill=\""
      << colors[k % 4] << "\"/>\n";
    s << "<text x=\"" << left + 14 << "\" y=\"" << y << "\">" << svg_escape(series[k])
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void write_comparison_report(const std::filesystem::path& dir, const ExperimentPlan& plan,
                             const ExperimentResult& r) {
  std::filesystem::create_directories(dir);
  std::ostringstream cells;
  cells << "model,classifier,seed,status,test_ce,test_auc,positive_rate,n_test,bayes_ce,"
           "context_free_ce,train_seconds,config_hash,version,error\n";
  for (const auto& c : r.cells) {
    cells << c.variant << ',' << to_string(c.classifier) << ',' << c.seed << ','
          << (c.ok ? "ok" : "failed") << ',' << (c.ok ? fmt(c.metrics.test_ce) : "") << ','
          << (c.ok ? fmt(c.metrics.test_auc) : "") << ','
          << (c.ok ? fmt(c.metrics.positive_rate) : "") << ','
          << (c.ok ? std::to_string(c.metrics.n_test) : "") << ',' << fmt(c.bayes_ce) << ','
          << fmt(c.context_free_ce) << ',' << fmt(c.train_seconds) << ',' << r.config_hash
          << ',' << r.version << ',' << csv_field(c.error) << '\n';
  }
  write_file(dir / "cells.csv", cells.str());

  const auto table = comparison_table(plan, r);
  std::ostringstream t;
  t << "model";
  for (auto k : plan.classifiers) t << ',' << to_string(k) << "_ce";
  t << ",seeds,config_hash,version\n";
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;
  for (const auto& row : table) {
    const std::string label =
        row.implemented ? variant_spec(row.model).legend : row.model;
    t << csv_field(label);
    for (double v : row.median_ce) t << ',' << (row.implemented ? fmt(v) : "not implemented");
    t << ',' << seed_list(plan.seeds) << ',' << r.config_hash << ',' << r.version << '\n';
    if (row.implemented) {
      labels.push_back(label);
      values.push_back(row.median_ce);
    }
  }
  write_file(dir / "table.csv", t.str());
  std::vector<std::string> series;
  for (auto k : plan.classifiers) series.push_back(to_string(k) + " test CE (median)");
  write_file(dir / "table.svg", bar_chart_svg("Downstream test cross-entropy", labels, series, values));
}

void write_ablation_report(const std::filesystem::path& dir, const ExperimentPlan& plan,
                           const ExperimentResult& r) {
  std::filesystem::create_directories(dir);
  const auto rows = ablation_summary(plan, r);
  std::ostringstream a;
  a << "component,legend,classifier,row,seed,with_variant,with_ce,without_variant,without_ce,"
       "relative_improvement,config_hash,version\n";
  for (const auto& row : rows) {
    auto line = [&](const std::string& kind, const std::string& seed, double w, double wo) {
      a << row.pair.component << ',' << row.pair.legend << ',' << to_string(row.classifier)
        << ',' << kind << ',' << seed << ',' << row.pair.with_variant << ',' << fmt(w) << ','
        << row.pair.without_variant << ',' << fmt(wo) << ',' << fmt((wo - w) / wo) << ','
        << r.config_hash << ',' << r.version << '\n';
    };
    for (std::size_t i = 0; i < row.seeds.size(); ++i)
      line("seed", std::to_string(row.seeds[i]), row.with_ce[i], row.without_ce[i]);
    line("median", seed_list(row.seeds), row.median_with, row.median_without);
  }
  write_file(dir / "ablation.csv", a.str());

  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;
  for (const auto& row : rows) {
    labels.push_back("RGCN+" + row.pair.legend + " (" + to_string(row.classifier) + ")");
    values.push_back({row.median_without, row.median_with});
  }
  write_file(dir / "ablation.svg",
             bar_chart_svg("Ablation: test CE without vs with component", labels,
                           {"RGCN backbone", "with component"}, values));
}

}  // namespace pdrfe
