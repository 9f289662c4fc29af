#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "support.hpp"

using pdrfe::testing::TempDir;

namespace {

std::string cli() {
  const char* p = std::getenv("PDRFE_CLI");
  return p ? p : "pdrfe";
}

int run(const std::string& args) {
  const int status = std::system((cli() + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream(p) << j.dump(2);
}

nlohmann::json small_synth() { return {{"n_customers", 20}, {"n_skills", 6}, {"n_interactions", 400}}; }

nlohmann::json small_plan(const nlohmann::json& variants) {
  return {{"variants", variants},
          {"classifiers", {"logistic"}},
          {"seeds", {0}},
          {"data", {{"synthetic", small_synth()}}},
          {"train", {{"hidden", 4}, {"max_epochs", 1}, {"batch_size", 64}}},
          {"classifier", {{"max_epochs", 3}}},
          {"encoder", {{"dim", 8}}}};
}

}  // namespace

TEST(Cli, UsageErrors) {
  TempDir dir("cli");
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("compare --out " + (dir / "x").string()), 1);
  EXPECT_EQ(run("gen --config /nonexistent.json --out " + (dir / "x").string()), 1);
  write_json(dir / "bad.json", {{"n_customers", 0}});
  EXPECT_EQ(run("gen --config " + (dir / "bad.json").string() + " --out " + (dir / "x").string()), 1);
  nlohmann::json plan = small_plan({"rgcn"});
  plan["seeds"] = nlohmann::json::array();
  write_json(dir / "noseeds.json", plan);
  EXPECT_EQ(run("compare --config " + (dir / "noseeds.json").string() + " --out " +
                (dir / "x").string()),
            1);
  EXPECT_EQ(run("--version"), 0);
}

TEST(Cli, GenTrainEval) {
  TempDir dir("cli");
  write_json(dir / "synth.json", small_synth());
  ASSERT_EQ(run("gen --config " + (dir / "synth.json").string() + " --seed 4 --out " +
                (dir / "data").string()),
            0);
  EXPECT_TRUE(std::filesystem::exists(dir / "data" / "interactions.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "data" / "ground_truth.jsonl"));

  nlohmann::json plan = small_plan({"pdrfe-nnconv"});
  plan["data"] = {{"interactions", "data/interactions.csv"},
                  {"customer_metadata", "data/customers.csv"},
                  {"skill_metadata", "data/skills.csv"},
                  {"ground_truth", "data/ground_truth.jsonl"}};
  write_json(dir / "plan.json", plan);
  ASSERT_EQ(run("train --config " + (dir / "plan.json").string() + " --out " +
                (dir / "run").string()),
            0);
  EXPECT_TRUE(std::filesystem::exists(dir / "run" / "checkpoint.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "run" / "history.csv"));
  ASSERT_EQ(run("eval --config " + (dir / "plan.json").string() + " --checkpoint " +
                (dir / "run" / "checkpoint.json").string() + " --out " + (dir / "eval").string()),
            0);
  std::ifstream in(dir / "eval" / "metrics.json");
  const auto metrics = nlohmann::json::parse(in);
  ASSERT_EQ(metrics.size(), 1u);
  EXPECT_EQ(metrics[0].at("model"), "pdrfe-nnconv");
  EXPECT_TRUE(metrics[0].contains("bayes_ce"));

  EXPECT_EQ(run("train --variant onehot --out " + (dir / "oh").string()), 1);
}

TEST(Cli, CompareAndAblate) {
  TempDir dir("cli");
  write_json(dir / "plan.json", small_plan({"onehot", "rgcn"}));
  ASSERT_EQ(run("compare --config " + (dir / "plan.json").string() + " --out " +
                (dir / "cmp").string()),
            0);
  EXPECT_TRUE(std::filesystem::exists(dir / "cmp" / "table.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "cmp" / "cells.csv"));
  ASSERT_EQ(run("ablate --config " + (dir / "plan.json").string() + " --out " +
                (dir / "abl").string()),
            0);
  EXPECT_TRUE(std::filesystem::exists(dir / "abl" / "ablation.csv"));

  nlohmann::json broken = small_plan({"rgcn"});
  broken["train"]["learning_rate"] = 1e200;
  write_json(dir / "broken.json", broken);
  EXPECT_EQ(run("compare --config " + (dir / "broken.json").string() + " --out " +
                (dir / "br").string()),
            2);
}
