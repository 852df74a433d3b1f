// SPDX-License-Identifier: Apache-2.0

#include "lionrank/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace lionrank {

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!current.empty())
        out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!current.empty())
    out.push_back(std::move(current));
  return out;
}

// ---------------------------------------------------------------------------
// Vocab

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  Vocab v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i)
    v.ids_.emplace(v.tokens_[i], static_cast<int>(kReserved + i));
  return v;
}

Vocab Vocab::from_texts(std::span<const std::string> texts) {
  std::vector<std::string> all;
  for (const auto &t : texts)
    for (auto &tok : split_tokens(t))
      all.push_back(std::move(tok));
  return from_tokens(std::move(all));
}

Vocab Vocab::from_table(std::map<std::string, int> table) {
  std::vector<std::string> tokens(table.size());
  for (const auto &[token, id] : table) {
    const auto slot = static_cast<std::size_t>(id) - kReserved;
    if (id < static_cast<int>(kReserved) || slot >= tokens.size() ||
        !tokens[slot].empty())
      throw ConfigError("vocab table: token '" + token + "' has invalid id " +
                        std::to_string(id));
    tokens[slot] = token;
  }
  Vocab v;
  v.tokens_ = std::move(tokens);
  for (const auto &[token, id] : table)
    v.ids_.emplace(token, id);
  return v;
}

int Vocab::id(std::string_view token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

TokenSequence tokenize_pair(const Vocab &vocab, std::string_view query,
                            std::string_view passage, std::size_t max_len) {
  if (max_len < 4)
    throw ConfigError("tokenize_pair: max_len must be >= 4, got " +
                      std::to_string(max_len));
  auto q = split_tokens(query);
  auto d = split_tokens(passage);
  const std::size_t budget = max_len - 3;
  while (q.size() + d.size() > budget) {
    if (q.size() > d.size())
      q.pop_back();
    else
      d.pop_back();
  }

  TokenSequence seq;
  seq.ids.reserve(max_len);
  seq.ids.push_back(Vocab::kCls);
  for (const auto &t : q)
    seq.ids.push_back(vocab.id(t));
  seq.ids.push_back(Vocab::kSep);
  for (const auto &t : d)
    seq.ids.push_back(vocab.id(t));
  seq.ids.push_back(Vocab::kSep);
  seq.mask.assign(seq.ids.size(), 1);
  seq.ids.resize(max_len, Vocab::kPad);
  seq.mask.resize(max_len, 0);
  return seq;
}

// ---------------------------------------------------------------------------
// Config and layout

void CrossEncoderConfig::validate() const {
  if (vocab_size < Vocab::kReserved)
    throw ConfigError("model: vocab_size must cover the 4 reserved ids");
  if (d_model == 0 || n_layers == 0 || n_heads == 0 || d_ff == 0)
    throw ConfigError("model: d_model, n_layers, n_heads and d_ff must be "
                      "positive");
  if (d_model % n_heads != 0)
    throw ConfigError("model: d_model " + std::to_string(d_model) +
                      " is not divisible by n_heads " +
                      std::to_string(n_heads));
  if (max_len < 8)
    throw ConfigError("model: max_len must be >= 8, got " +
                      std::to_string(max_len));
}

namespace {

enum class Init { weight, zero, one, position };

struct ParamSpec {
  std::string name;
  Shape shape;
  Init init;
};

std::vector<ParamSpec> layout(const CrossEncoderConfig &c) {
  const std::size_t d = c.d_model;
  std::vector<ParamSpec> specs;
  specs.push_back({"embeddings.token", {c.vocab_size, d}, Init::weight});
  specs.push_back({"embeddings.position", {c.max_len, d}, Init::position});
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    const std::string pre = "layers." + std::to_string(l) + ".";
    specs.push_back({pre + "attn_norm.gain", {d}, Init::one});
    specs.push_back({pre + "attn_norm.bias", {d}, Init::zero});
    for (const char *m : {"q", "k", "v", "o"}) {
      specs.push_back({pre + "attn.w" + m, {d, d}, Init::weight});
      specs.push_back({pre + "attn.b" + m, {d}, Init::zero});
    }
    specs.push_back({pre + "ffn_norm.gain", {d}, Init::one});
    specs.push_back({pre + "ffn_norm.bias", {d}, Init::zero});
    specs.push_back({pre + "ffn.w1", {d, c.d_ff}, Init::weight});
    specs.push_back({pre + "ffn.b1", {c.d_ff}, Init::zero});
    specs.push_back({pre + "ffn.w2", {c.d_ff, d}, Init::weight});
    specs.push_back({pre + "ffn.b2", {d}, Init::zero});
  }
  specs.push_back({"final_norm.gain", {d}, Init::one});
  specs.push_back({"final_norm.bias", {d}, Init::zero});
  specs.push_back({"head.weight", {d, 1}, Init::weight});
  specs.push_back({"head.bias", {1}, Init::zero});
  return specs;
}

// Uniform in [-1, 1) from the top 53 bits; identical on every platform.
double uniform_pm1(std::mt19937_64 &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0;
}

} // namespace

std::size_t expected_parameter_count(const CrossEncoderConfig &c) {
  const std::size_t d = c.d_model;
  const std::size_t per_layer =
      2 * d + 4 * (d * d + d) + 2 * d + d * c.d_ff + c.d_ff + c.d_ff * d + d;
  return c.vocab_size * d + c.max_len * d + c.n_layers * per_layer + 2 * d +
         d + 1;
}

// ---------------------------------------------------------------------------
// CrossEncoder

CrossEncoder::CrossEncoder(CrossEncoderConfig config, ParameterList params)
    : config_(config), params_(std::move(params)) {
  index_parameters();
}

CrossEncoder CrossEncoder::init(const CrossEncoderConfig &config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  ParameterList params;
  for (auto &spec : layout(config)) {
    std::vector<double> data(shape_numel(spec.shape), 0.0);
    switch (spec.init) {
    case Init::weight: {
      // Embedding rows are indexed by token, so their fan-in is the width.
      const std::size_t fan_in =
          spec.name == "embeddings.token" ? spec.shape[1] : spec.shape[0];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (auto &v : data)
        v = bound * uniform_pm1(rng);
      break;
    }
    case Init::position:
      for (auto &v : data)
        v = 0.02 * uniform_pm1(rng);
      break;
    case Init::one:
      std::fill(data.begin(), data.end(), 1.0);
      break;
    case Init::zero:
      break;
    }
    params.push_back({spec.name, Tensor(spec.shape, std::move(data), true)});
  }
  return CrossEncoder(config, std::move(params));
}

CrossEncoder CrossEncoder::from_parameters(const CrossEncoderConfig &config,
                                           ParameterList params) {
  config.validate();
  const auto specs = layout(config);
  if (specs.size() != params.size())
    throw ConfigError("model: expected " + std::to_string(specs.size()) +
                      " parameter blocks, got " +
                      std::to_string(params.size()));
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].name != params[i].name ||
        specs[i].shape != params[i].value.shape())
      throw ConfigError("model: parameter block " + std::to_string(i) +
                        " is '" + params[i].name + "' " +
                        shape_to_string(params[i].value.shape()) +
                        ", expected '" + specs[i].name + "' " +
                        shape_to_string(specs[i].shape));
    params[i].value.set_requires_grad(true);
  }
  return CrossEncoder(config, std::move(params));
}

CrossEncoder CrossEncoder::clone() const {
  ParameterList copy;
  copy.reserve(params_.size());
  for (const auto &p : params_)
    copy.push_back({p.name, p.value.clone()});
  return CrossEncoder(config_, std::move(copy));
}

void CrossEncoder::index_parameters() {
  // Same order as layout().
  std::size_t i = 0;
  tok_emb_ = i++;
  pos_emb_ = i++;
  layers_.clear();
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    Layer L{};
    L.ln1_g = i++;
    L.ln1_b = i++;
    L.wq = i++;
    L.bq = i++;
    L.wk = i++;
    L.bk = i++;
    L.wv = i++;
    L.bv = i++;
    L.wo = i++;
    L.bo = i++;
    L.ln2_g = i++;
    L.ln2_b = i++;
    L.w1 = i++;
    L.b1 = i++;
    L.w2 = i++;
    L.b2 = i++;
    layers_.push_back(L);
  }
  lnf_g_ = i++;
  lnf_b_ = i++;
  head_w_ = i++;
  head_b_ = i++;
}

const Tensor &CrossEncoder::parameter(std::string_view name) const {
  for (const auto &p : params_)
    if (p.name == name)
      return p.value;
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

Tensor CrossEncoder::logit(Tape &tape, std::span<const int> ids,
                           std::span<const std::uint8_t> mask) const {
  const std::size_t n = ids.size();
  if (n == 0 || n > config_.max_len || mask.size() != n)
    throw DimensionError("cross-encoder: sequence of " + std::to_string(n) +
                         " ids / " + std::to_string(mask.size()) +
                         " mask entries does not fit max_len " +
                         std::to_string(config_.max_len));
  const std::size_t heads = config_.n_heads;
  const std::size_t dh = config_.d_model / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<int> positions(n);
  for (std::size_t i = 0; i < n; ++i)
    positions[i] = static_cast<int>(i);
  std::vector<double> key_mask(n);
  for (std::size_t i = 0; i < n; ++i)
    key_mask[i] = mask[i] ? 0.0 : -std::numeric_limits<double>::infinity();
  const Tensor additive_mask({n}, std::move(key_mask));

  Tensor x = tape.add(tape.embedding(p(tok_emb_), ids),
                      tape.embedding(p(pos_emb_), positions));
  for (const auto &L : layers_) {
    Tensor h = tape.layer_norm(x, p(L.ln1_g), p(L.ln1_b));
    Tensor q = tape.add(tape.matmul(h, p(L.wq)), p(L.bq));
    Tensor k = tape.add(tape.matmul(h, p(L.wk)), p(L.bk));
    Tensor v = tape.add(tape.matmul(h, p(L.wv)), p(L.bv));
    std::vector<Tensor> head_out;
    head_out.reserve(heads);
    for (std::size_t hd = 0; hd < heads; ++hd) {
      const std::size_t lo = hd * dh, hi = lo + dh;
      Tensor scores =
          tape.scale(tape.matmul(tape.slice_cols(q, lo, hi),
                                 tape.transpose(tape.slice_cols(k, lo, hi))),
                     inv_sqrt_dh);
      Tensor attn = tape.softmax(tape.add(scores, additive_mask), 1);
      head_out.push_back(tape.matmul(attn, tape.slice_cols(v, lo, hi)));
    }
    Tensor merged = heads == 1 ? head_out[0] : tape.concat(head_out, 1);
    x = tape.add(x, tape.add(tape.matmul(merged, p(L.wo)), p(L.bo)));

    Tensor h2 = tape.layer_norm(x, p(L.ln2_g), p(L.ln2_b));
    Tensor ff = tape.relu(tape.add(tape.matmul(h2, p(L.w1)), p(L.b1)));
    x = tape.add(x, tape.add(tape.matmul(ff, p(L.w2)), p(L.b2)));
  }
  Tensor cls = tape.slice_rows(tape.layer_norm(x, p(lnf_g_), p(lnf_b_)), 0, 1);
  return tape.add(tape.matmul(cls, p(head_w_)), p(head_b_));
}

Tensor CrossEncoder::forward(Tape &tape, const TokenSequence &seq) const {
  if (seq.length() != config_.max_len)
    throw DimensionError("cross-encoder: sequence length " +
                         std::to_string(seq.length()) + " != max_len " +
                         std::to_string(config_.max_len));
  return tape.sigmoid(logit(tape, seq.ids, seq.mask));
}

double CrossEncoder::score(const TokenSequence &seq) const {
  Tape tape(false);
  return forward(tape, seq).item();
}

std::vector<double>
CrossEncoder::score_batch(std::span<const TokenSequence> seqs) const {
  std::vector<double> out;
  out.reserve(seqs.size());
  for (const auto &s : seqs) {
    if (s.length() != config_.max_len)
      throw DimensionError("score_batch: sequences must all be max_len long");
    out.push_back(score(s));
  }
  return out;
}

} // namespace lionrank
