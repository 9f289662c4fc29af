#include "pdrfe/edge_encoder.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pdrfe/rng.hpp"

namespace pdrfe {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Tensor encode_utterance(std::string_view text, const EncoderSpec& spec) {
  if (spec.dim == 0) throw std::invalid_argument("encode_utterance: dim must be >= 1");
  Tensor out({spec.dim});
  const std::uint64_t salt = mix_seed(spec.hash_seed);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    const std::uint64_t h = mix_seed(fnv1a(token) ^ salt);
    const std::size_t bucket = static_cast<std::size_t>(h % spec.dim);
    out[bucket] += (h >> 63) ? -1.0 : 1.0;
    token.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else {
      token.push_back(spec.lowercase ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  double norm = 0.0;
  for (double v : out.data()) norm += v * v;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& v : out.mutable_data()) v /= norm;
  }
  return out;
}

HashingEncoder::HashingEncoder(EncoderSpec spec) : spec_(spec) {
  if (spec_.dim == 0) throw std::invalid_argument("HashingEncoder: dim must be >= 1");
}

PrecomputedEncoder PrecomputedEncoder::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pre-encoded features " + path.string());
  PrecomputedEncoder enc;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto& id = j.at("utterance_id");
      std::string key = id.is_string() ? id.get<std::string>() : id.dump();
      enc.add(std::move(key), Tensor::vector(j.at("vector").get<std::vector<double>>()));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return enc;
}

void PrecomputedEncoder::add(std::string id, Tensor vector) {
  if (vector.rank() != 1 || vector.empty()) {
    throw ShapeError("PrecomputedEncoder: vector for '" + id + "' must be a nonempty rank-1 tensor");
  }
  if (dim_ == 0) dim_ = vector.size();
  if (vector.size() != dim_) {
    throw ShapeError("PrecomputedEncoder: vector for '" + id + "' has width " +
                     std::to_string(vector.size()) + ", expected " + std::to_string(dim_));
  }
  vector.require_finite("PrecomputedEncoder '" + id + "'");
  vectors_[std::move(id)] = std::move(vector);
}

Tensor PrecomputedEncoder::encode(std::string_view utterance) const {
  auto it = vectors_.find(std::string(utterance));
  if (it == vectors_.end()) {
    throw std::out_of_range("no pre-encoded vector for utterance '" + std::string(utterance) + "'");
  }
  return it->second;
}

}  // namespace pdrfe
