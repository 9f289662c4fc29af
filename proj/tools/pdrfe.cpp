// Command-line front end: gen, train, eval, compare, ablate.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pdrfe/harness.hpp"

namespace fs = std::filesystem;
using namespace pdrfe;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kFailure = 2;

// Raised for problems with the inputs the user supplied.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

ExperimentPlan plan_for_run(const std::string& config, std::optional<std::uint64_t> seed,
                            const std::string& variant) {
  nlohmann::json j = config.empty() ? nlohmann::json::object() : read_json(config);
  if (!j.contains("data")) j["data"] = {{"synthetic", nlohmann::json::object()}};
  if (seed) j["seeds"] = {*seed};
  else if (!j.contains("seeds")) j["seeds"] = {0};
  if (!variant.empty()) j["variants"] = {variant};
  else if (!j.contains("variants")) j["variants"] = {"pdrfe-nnconv"};
  try {
    return plan_from_json(j, config.empty() ? fs::path() : fs::path(config).parent_path());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(e.what());
  }
}

void progress(const std::string& msg) { std::clog << msg << std::endl; }

int cmd_gen(const std::string& config, std::optional<std::uint64_t> seed, const fs::path& out) {
  SynthConfig cfg;
  try {
    if (!config.empty()) cfg = synth_config_from_json(read_json(config));
    if (seed) cfg.seed = *seed;
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const SynthData data = generate(cfg);
  const SynthPaths paths = write_synthetic(out, data);
  std::ofstream(out / "synth_config.json") << to_json(cfg).dump(2) << '\n';
  std::cout << "wrote " << data.rows.size() << " interactions to " << paths.interactions.string()
            << "\nBayes CE " << truth_ce(data.truth.bayes_p, data.rows)
            << ", context-free CE " << truth_ce(data.truth.context_free_p, data.rows) << '\n';
  return kOk;
}

int cmd_train(const ExperimentPlan& plan, const fs::path& out) {
  const VariantSpec& v = variant_spec(plan.variants.front());
  if (!v.trains) throw UsageError("variant " + v.name + " has no representation model to train");
  const std::uint64_t seed = plan.seeds.front();
  const LoadedData data = load_data(plan.data, plan.encoder);
  const BipartiteGraph full = build_full_graph(data, plan.initial_features, plan.train.hidden, seed);
  const auto [train, test] = split_edges(full, plan.edge_split, seed);
  TrainConfig cfg = plan.train;
  cfg.kind = v.kind;
  cfg.personalizer = v.personalizer;
  cfg.seed = seed;
  progress("training " + v.name + " on " + std::to_string(train.num_edges()) + " edges");
  const TrainResult result = train_representation(cfg, train, &test);
  fs::create_directories(out);
  save_checkpoint(out / "checkpoint.json", result.params);
  write_history_csv(out / "history.csv", result.history);
  std::ofstream(out / "history.json") << history_summary(result.history).dump(2) << '\n';
  write_embeddings(out / "embeddings.jsonl", export_embeddings(result.params, full), full);
  nlohmann::json run = plan.source;
  run["variant"] = v.name;
  run["seed"] = seed;
  std::ofstream(out / "run.json") << run.dump(2) << '\n';
  if (result.history.diverged) {
    std::cerr << "training diverged: " << result.history.error << '\n';
    return kFailure;
  }
  std::cout << "trained " << result.history.epochs_run << " epochs; checkpoint at "
            << (out / "checkpoint.json").string() << '\n';
  return kOk;
}

int cmd_eval(const ExperimentPlan& plan, const fs::path& checkpoint, const fs::path& out) {
  const std::uint64_t seed = plan.seeds.front();
  const ModelParams params = load_checkpoint(checkpoint);
  const LoadedData data = load_data(plan.data, plan.encoder);
  const BipartiteGraph full =
      build_full_graph(data, plan.initial_features, params.shape().hidden, seed);
  const DownstreamSplit split =
      split_rows(downstream_features(export_embeddings(params, full), full), seed);
  fs::create_directories(out);
  nlohmann::json all = nlohmann::json::array();
  for (ClassifierKind kind : plan.classifiers) {
    ClassifierSpec spec = plan.classifier;
    spec.kind = kind;
    spec.seed = seed;
    MetricsReport m = evaluate(train_classifier(spec, split.train, split.validation), split.test);
    m.model = plan.variants.front();
    nlohmann::json j = to_json(m);
    if (data.truth) j["bayes_ce"] = truth_ce(data.truth->bayes_p, data.rows, split.test.source);
    all.push_back(j);
    std::cout << to_string(kind) << " test CE " << m.test_ce << " AUC " << m.test_auc << '\n';
  }
  std::ofstream(out / "metrics.json") << all.dump(2) << '\n';
  return kOk;
}

int cmd_compare(const ExperimentPlan& plan, const fs::path& out, bool ablation) {
  const ExperimentPlan p = ablation ? ablation_plan(plan) : plan;
  const ExperimentResult r = run_cells(p, out, progress);
  if (ablation) {
    write_ablation_report(out, p, r);
  } else {
    write_comparison_report(out, p, r);
  }
  std::cout << "report written to " << out.string() << " (" << r.cells.size() - r.failures()
            << "/" << r.cells.size() << " cells succeeded)\n";
  return r.failures() == r.cells.size() ? kFailure : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personalized defect-risk feature embedding laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", artifact_version());

  std::string config;
  std::string out;
  std::string variant;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;

  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", config, "JSON configuration file");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    else c->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory")->required();
    sub->add_option("--seed", seed, "seed override");
  };
  auto* gen = app.add_subcommand("gen", "generate a synthetic interaction log");
  common(gen, false);
  auto* train = app.add_subcommand("train", "train a representation model");
  common(train, false);
  train->add_option("--variant", variant, "model variant");
  auto* eval = app.add_subcommand("eval", "downstream evaluation of a checkpoint");
  common(eval, false);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--variant", variant, "variant label for the report");
  auto* compare = app.add_subcommand("compare", "run the comparison table");
  common(compare, true);
  compare->add_option("--variant", variant, "restrict to one variant");
  auto* ablate = app.add_subcommand("ablate", "run the component ablation");
  common(ablate, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(config, seed, out);
    if (train->parsed()) return cmd_train(plan_for_run(config, seed, variant), out);
    if (eval->parsed()) {
      std::optional<std::uint64_t> run_seed = seed;
      std::string run_variant = variant;
      const fs::path run_file = fs::path(checkpoint).parent_path() / "run.json";
      if (fs::exists(run_file)) {
        const auto run = read_json(run_file);
        if (!run_seed && run.contains("seed")) run_seed = run.at("seed").get<std::uint64_t>();
        if (run_variant.empty() && run.contains("variant"))
          run_variant = run.at("variant").get<std::string>();
      }
      return cmd_eval(plan_for_run(config, run_seed, run_variant), checkpoint, out);
    }
    if (compare->parsed() || ablate->parsed()) {
      ExperimentPlan plan = plan_for_run(config, seed, variant);
      return cmd_compare(plan, out, ablate->parsed());
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
