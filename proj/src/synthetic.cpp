#include "pdrfe/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "pdrfe/objectives.hpp"
#include "pdrfe/rng.hpp"

namespace pdrfe {

void SynthConfig::validate() const {
  if (n_customers == 0 || n_skills == 0 || n_interactions == 0) {
    throw std::invalid_argument("synthetic counts must be positive");
  }
  if (latent_dim == 0 || n_utterance_clusters == 0 || vocabulary_per_cluster == 0 ||
      tokens_per_utterance == 0 || customer_regions == 0 || skill_types == 0) {
    throw std::invalid_argument("synthetic dimensions must be positive");
  }
  if (!(base_rate > 0.0 && base_rate < 1.0)) {
    throw std::invalid_argument("base_rate must lie in (0, 1)");
  }
  if (!(context_weight >= 0.0) || !std::isfinite(context_weight)) {
    throw std::invalid_argument("context_weight must be finite and non-negative");
  }
  if (!(habit_concentration >= 0.0) || !std::isfinite(habit_concentration)) {
    throw std::invalid_argument("habit_concentration must be finite and non-negative");
  }
  if (!std::isfinite(latent_mean)) throw std::invalid_argument("latent_mean must be finite");
}

nlohmann::json to_json(const SynthConfig& c) {
  return {{"n_customers", c.n_customers},
          {"n_skills", c.n_skills},
          {"n_interactions", c.n_interactions},
          {"latent_dim", c.latent_dim},
          {"latent_mean", c.latent_mean},
          {"n_utterance_clusters", c.n_utterance_clusters},
          {"habit_concentration", c.habit_concentration},
          {"vocabulary_per_cluster", c.vocabulary_per_cluster},
          {"tokens_per_utterance", c.tokens_per_utterance},
          {"base_rate", c.base_rate},
          {"context_weight", c.context_weight},
          {"customer_regions", c.customer_regions},
          {"skill_types", c.skill_types},
          {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("synthetic config must be a JSON object");
  SynthConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "n_customers") c.n_customers = v.get<std::size_t>();
    else if (key == "n_skills") c.n_skills = v.get<std::size_t>();
    else if (key == "n_interactions") c.n_interactions = v.get<std::size_t>();
    else if (key == "latent_dim") c.latent_dim = v.get<std::size_t>();
    else if (key == "latent_mean") c.latent_mean = v.get<double>();
    else if (key == "n_utterance_clusters") c.n_utterance_clusters = v.get<std::size_t>();
    else if (key == "habit_concentration") c.habit_concentration = v.get<double>();
    else if (key == "vocabulary_per_cluster") c.vocabulary_per_cluster = v.get<std::size_t>();
    else if (key == "tokens_per_utterance") c.tokens_per_utterance = v.get<std::size_t>();
    else if (key == "base_rate") c.base_rate = v.get<double>();
    else if (key == "context_weight") c.context_weight = v.get<double>();
    else if (key == "customer_regions") c.customer_regions = v.get<std::size_t>();
    else if (key == "skill_types") c.skill_types = v.get<std::size_t>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else throw std::invalid_argument("unknown synthetic config key '" + key + "'");
  }
  c.validate();
  return c;
}

std::string cluster_token(std::size_t c, std::size_t j) {
  return "c" + std::to_string(c) + "w" + std::to_string(j);
}

namespace {

enum Stream : std::uint64_t {
  kLatent = 1,
  kPairs,
  kHabits,
  kClusters,
  kMixing,
  kTokens,
  kLabels,
  kMetadata,
};

std::string padded_id(const char* prefix, std::size_t i, int width) {
  std::string digits = std::to_string(i);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

// Sign pattern of the centered latent, as a bit string.
std::string sign_code(std::span<const double> z, double center) {
  std::string s;
  for (double v : z) s += v >= center ? '1' : '0';
  return s;
}

}  // namespace

SynthData generate(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t nu = cfg.n_customers, ns = cfg.n_skills, dz = cfg.latent_dim;
  const std::size_t nc = cfg.n_utterance_clusters;
  SynthData out;
  GroundTruth& t = out.truth;

  Rng latent_rng = make_rng(cfg.seed, kLatent);
  std::normal_distribution<double> latent(cfg.latent_mean, 1.0);
  t.customer_latent = Tensor({nu, dz});
  t.skill_latent = Tensor({ns, dz});
  for (double& v : t.customer_latent.mutable_data()) v = latent(latent_rng);
  for (double& v : t.skill_latent.mutable_data()) v = latent(latent_rng);

  auto affinity = [&](std::size_t u, std::size_t s) {
    double a = 0.0;
    for (std::size_t k = 0; k < dz; ++k) a += t.customer_latent.at(u, k) * t.skill_latent.at(s, k);
    return a;
  };
  std::vector<double> pair_weight(nu * ns);
  for (std::size_t u = 0; u < nu; ++u)
    for (std::size_t s = 0; s < ns; ++s) pair_weight[u * ns + s] = softplus(affinity(u, s));
  std::discrete_distribution<std::size_t> pick_pair(pair_weight.begin(), pair_weight.end());

  // Per-customer cluster preferences.
  std::vector<std::vector<double>> habit(nu, std::vector<double>(nc, 1.0 / static_cast<double>(nc)));
  if (cfg.habit_concentration > 0.0) {
    Rng habit_rng = make_rng(cfg.seed, kHabits);
    std::gamma_distribution<double> gamma(cfg.habit_concentration, 1.0);
    for (auto& h : habit) {
      double total = 0.0;
      for (double& v : h) total += v = gamma(habit_rng);
      if (total <= 0.0) {
        std::fill(h.begin(), h.end(), 1.0 / static_cast<double>(nc));
      } else {
        for (double& v : h) v /= total;
      }
    }
  }

  // Cluster-specific interaction matrices M_c, entries N(0, 1/dz).
  Rng mixing_rng = make_rng(cfg.seed, kMixing);
  std::normal_distribution<double> mix(0.0, 1.0 / std::sqrt(static_cast<double>(dz)));
  std::vector<Tensor> mixing;
  for (std::size_t c = 0; c < nc; ++c) {
    Tensor m({dz, dz});
    for (double& v : m.mutable_data()) v = mix(mixing_rng);
    mixing.push_back(std::move(m));
  }
  const double offset = std::log(cfg.base_rate / (1.0 - cfg.base_rate));
  auto label_p = [&](std::size_t u, std::size_t s, std::size_t c) {
    double g = 0.0;
    for (std::size_t i = 0; i < dz; ++i)
      for (std::size_t j = 0; j < dz; ++j)
        g += t.customer_latent.at(u, i) * mixing[c].at(i, j) * t.skill_latent.at(s, j);
    return sigmoid(offset + cfg.context_weight * g);
  };

  Rng pair_rng = make_rng(cfg.seed, kPairs);
  Rng cluster_rng = make_rng(cfg.seed, kClusters);
  Rng token_rng = make_rng(cfg.seed, kTokens);
  Rng label_rng = make_rng(cfg.seed, kLabels);
  std::uniform_int_distribution<std::size_t> pick_token(0, cfg.vocabulary_per_cluster - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  out.rows.reserve(cfg.n_interactions);
  for (std::size_t r = 0; r < cfg.n_interactions; ++r) {
    const std::size_t pair = pick_pair(pair_rng);
    const std::size_t u = pair / ns, s = pair % ns;
    std::discrete_distribution<std::size_t> pick_cluster(habit[u].begin(), habit[u].end());
    const std::size_t c = pick_cluster(cluster_rng);
    std::string text;
    for (std::size_t k = 0; k < cfg.tokens_per_utterance; ++k) {
      if (k) text += ' ';
      text += cluster_token(c, pick_token(token_rng));
    }
    const double p = label_p(u, s, c);
    double free_p = 0.0;
    for (std::size_t cc = 0; cc < nc; ++cc) free_p += habit[u][cc] * label_p(u, s, cc);
    const int y = unit(label_rng) < p ? 1 : 0;
    out.rows.push_back({padded_id("10", u, 5), padded_id("21", s, 6), std::move(text), y});
    t.cluster.push_back(c);
    t.bayes_p.push_back(p);
    t.context_free_p.push_back(free_p);
  }

  Rng meta_rng = make_rng(cfg.seed, kMetadata);
  std::uniform_int_distribution<std::size_t> region(0, cfg.customer_regions - 1);
  std::uniform_int_distribution<std::size_t> type(0, cfg.skill_types - 1);
  out.customers.columns = {"region", "segment"};
  for (std::size_t u = 0; u < nu; ++u) {
    out.customers.ids.push_back(padded_id("10", u, 5));
    out.customers.values.push_back({"r" + std::to_string(region(meta_rng)),
                                    sign_code(t.customer_latent.row(u), cfg.latent_mean)});
  }
  out.skills.columns = {"category", "type"};
  for (std::size_t s = 0; s < ns; ++s) {
    out.skills.ids.push_back(padded_id("21", s, 6));
    out.skills.values.push_back({sign_code(t.skill_latent.row(s), cfg.latent_mean),
                                 "t" + std::to_string(type(meta_rng))});
  }
  return out;
}

double truth_ce(const std::vector<double>& p, const std::vector<InteractionRow>& rows) {
  if (p.size() != rows.size()) throw std::invalid_argument("truth_ce: length mismatch");
  std::vector<int> y;
  for (const auto& r : rows) y.push_back(r.defect);
  return mean_defect_ce(p, y);
}

double truth_ce(const std::vector<double>& p, const std::vector<InteractionRow>& rows,
                std::span<const std::size_t> subset) {
  if (p.size() != rows.size()) throw std::invalid_argument("truth_ce: length mismatch");
  std::vector<double> q;
  std::vector<int> y;
  for (std::size_t i : subset) {
    q.push_back(p.at(i));
    y.push_back(rows.at(i).defect);
  }
  return mean_defect_ce(q, y);
}

SynthPaths synth_paths(const std::filesystem::path& dir) {
  return {dir / "interactions.csv", dir / "customers.csv", dir / "skills.csv",
          dir / "ground_truth.jsonl"};
}

SynthPaths write_synthetic(const std::filesystem::path& dir, const SynthData& data) {
  std::filesystem::create_directories(dir);
  const SynthPaths paths = synth_paths(dir);
  write_interaction_log(paths.interactions, data.rows);
  write_categorical_table(paths.customers, data.customers);
  write_categorical_table(paths.skills, data.skills);
  std::ofstream out(paths.ground_truth);
  if (!out) throw std::runtime_error("cannot write " + paths.ground_truth.string());
  const GroundTruth& t = data.truth;
  auto latent_rows = [&](const char* kind, const Tensor& z) {
    for (std::size_t i = 0; i < z.dim(0); ++i) {
      const auto row = z.row(i);
      out << nlohmann::json{{"kind", kind},
                            {"index", i},
                            {"z", std::vector<double>(row.begin(), row.end())}}
                 .dump()
          << '\n';
    }
  };
  latent_rows("customer", t.customer_latent);
  latent_rows("skill", t.skill_latent);
  for (std::size_t r = 0; r < t.bayes_p.size(); ++r) {
    out << nlohmann::json{{"kind", "row"},
                          {"row", r},
                          {"cluster", t.cluster[r]},
                          {"bayes_p", t.bayes_p[r]},
                          {"context_free_p", t.context_free_p[r]}}
               .dump()
        << '\n';
  }
  return paths;
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<double>> cz, sz;
  GroundTruth t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "customer") {
        cz.push_back(j.at("z").get<std::vector<double>>());
      } else if (kind == "skill") {
        sz.push_back(j.at("z").get<std::vector<double>>());
      } else if (kind == "row") {
        if (j.at("row").get<std::size_t>() != t.bayes_p.size()) {
          throw std::runtime_error("rows out of order");
        }
        t.cluster.push_back(j.at("cluster").get<std::size_t>());
        t.bayes_p.push_back(j.at("bayes_p").get<double>());
        t.context_free_p.push_back(j.at("context_free_p").get<double>());
      } else {
        throw std::runtime_error("unknown record kind '" + kind + "'");
      }
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  auto to_tensor = [](const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return Tensor();
    std::vector<double> flat;
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    return Tensor({rows.size(), rows.front().size()}, std::move(flat));
  };
  t.customer_latent = to_tensor(cz);
  t.skill_latent = to_tensor(sz);
  return t;
}

}  // namespace pdrfe
