#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>

#include "pdrfe/tensor.hpp"

namespace pdrfe {

struct EncoderSpec {
  std::size_t dim = 32;
  bool lowercase = true;
  std::uint64_t hash_seed = 0;
};

/// Maps utterance text to a fixed-width edge feature.
class EdgeEncoder {
 public:
  virtual ~EdgeEncoder() = default;
  virtual std::size_t dim() const = 0;
  virtual Tensor encode(std::string_view utterance) const = 0;
};

/// Signed feature hashing over whitespace tokens, L2-normalized when nonzero.
Tensor encode_utterance(std::string_view text, const EncoderSpec& spec);

class HashingEncoder final : public EdgeEncoder {
 public:
  explicit HashingEncoder(EncoderSpec spec);
  std::size_t dim() const override { return spec_.dim; }
  Tensor encode(std::string_view utterance) const override {
    return encode_utterance(utterance, spec_);
  }
  const EncoderSpec& spec() const { return spec_; }

 private:
  EncoderSpec spec_;
};

/// Vectors supplied by an external encoder, read from JSON-lines records
/// {"utterance_id": ..., "vector": [...]}. The log's utterance field is the lookup key.
class PrecomputedEncoder final : public EdgeEncoder {
 public:
  static PrecomputedEncoder load(const std::filesystem::path& path);
  void add(std::string id, Tensor vector);

  std::size_t dim() const override { return dim_; }
  Tensor encode(std::string_view utterance) const override;
  std::size_t size() const { return vectors_.size(); }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, Tensor> vectors_;
};

}  // namespace pdrfe
