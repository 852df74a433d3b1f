// SPDX-License-Identifier: Apache-2.0
//
// Toy cross-encoder: [CLS] query [SEP] passage [SEP] goes through a small
// pre-norm transformer; the final CLS state feeds a linear + sigmoid head.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lionrank/tensor.hpp"

namespace lionrank {

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Lowercased whitespace-separated tokens.
std::vector<std::string> split_tokens(std::string_view text);

class Vocab {
public:
  static constexpr int kCls = 0;
  static constexpr int kSep = 1;
  static constexpr int kPad = 2;
  static constexpr int kUnk = 3;
  static constexpr std::size_t kReserved = 4;

  Vocab() = default;
  // Tokens are deduplicated and sorted before ids are assigned from 4 up.
  static Vocab from_tokens(std::vector<std::string> tokens);
  // Collects every token of every text.
  static Vocab from_texts(std::span<const std::string> texts);
  // Explicit token -> id table, as stored in checkpoints.
  static Vocab from_table(std::map<std::string, int> table);

  int id(std::string_view token) const;
  std::size_t size() const { return kReserved + tokens_.size(); }
  // Non-reserved tokens in id order.
  const std::vector<std::string> &tokens() const { return tokens_; }
  const std::map<std::string, int, std::less<>> &table() const {
    return ids_;
  }

  bool operator==(const Vocab &other) const {
    return tokens_ == other.tokens_;
  }

private:
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> ids_;
};

struct TokenSequence {
  std::vector<int> ids;
  std::vector<std::uint8_t> mask;

  std::size_t length() const { return ids.size(); }
};

/// Builds `[CLS] q [SEP] d [SEP]` padded to max_len. Over-long inputs lose
/// tokens from whichever side is longer, passage first on ties.
TokenSequence tokenize_pair(const Vocab &vocab, std::string_view query,
                            std::string_view passage, std::size_t max_len);

struct CrossEncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 32;
  std::size_t n_layers = 1;
  std::size_t n_heads = 2;
  std::size_t d_ff = 64;
  std::size_t max_len = 16;
  std::uint64_t seed = 12;

  void validate() const;
  bool operator==(const CrossEncoderConfig &) const = default;
};

// Closed-form parameter count for a config.
std::size_t expected_parameter_count(const CrossEncoderConfig &config);

class CrossEncoder {
public:
  // Deterministic initialization from config.seed: weights uniform in
  // +-1/sqrt(fan_in), biases zero, norm gains one, positions +-0.02.
  static CrossEncoder init(const CrossEncoderConfig &config);
  // Wraps existing parameters; names and shapes must match `init`'s layout.
  static CrossEncoder from_parameters(const CrossEncoderConfig &config,
                                      ParameterList params);

  CrossEncoder(CrossEncoder &&) = default;
  CrossEncoder &operator=(CrossEncoder &&) = default;
  CrossEncoder(const CrossEncoder &) = delete;
  CrossEncoder &operator=(const CrossEncoder &) = delete;

  // Deep copy of every parameter.
  CrossEncoder clone() const;

  const CrossEncoderConfig &config() const { return config_; }
  ParameterList &parameters() { return params_; }
  const ParameterList &parameters() const { return params_; }
  const Tensor &parameter(std::string_view name) const;
  std::size_t parameter_count() const {
    return lionrank::parameter_count(params_);
  }

  // Relevance logit [1 x 1] for a sequence of length <= max_len. Masked
  // positions never receive attention.
  Tensor logit(Tape &tape, std::span<const int> ids,
               std::span<const std::uint8_t> mask) const;
  // sigmoid(logit); `seq` must be exactly max_len long.
  Tensor forward(Tape &tape, const TokenSequence &seq) const;

  double score(const TokenSequence &seq) const;
  std::vector<double> score_batch(std::span<const TokenSequence> seqs) const;

private:
  CrossEncoder(CrossEncoderConfig config, ParameterList params);
  void index_parameters();

  // Indices into params_ for the forward pass.
  struct Layer {
    std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
    std::size_t ln2_g, ln2_b, w1, b1, w2, b2;
  };
  const Tensor &p(std::size_t index) const { return params_[index].value; }

  CrossEncoderConfig config_;
  ParameterList params_;
  std::size_t tok_emb_ = 0, pos_emb_ = 0;
  std::vector<Layer> layers_;
  std::size_t lnf_g_ = 0, lnf_b_ = 0, head_w_ = 0, head_b_ = 0;
};

} // namespace lionrank
