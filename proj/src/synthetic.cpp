// SPDX-License-Identifier: Apache-2.0

#include "lionrank/synthetic.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace lionrank {

void SyntheticSpec::validate() const {
  if (vocab_words < 2)
    throw std::invalid_argument("synthetic: need at least 2 vocabulary words");
  if (query_len < 1 || passage_len < 4)
    throw std::invalid_argument(
        "synthetic: query_len >= 1 and passage_len >= 4 required");
  if (relevant_per_query > candidates_per_query)
    throw std::invalid_argument(
        "synthetic: more relevant passages than candidates");
}

namespace {

class Sampler {
public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  // Uniform in [0, n) by rejection.
  std::size_t below(std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
      r = rng_();
    } while (r >= limit);
    return static_cast<std::size_t>(r % bound);
  }

  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

private:
  std::mt19937_64 rng_;
};

std::string join(const std::vector<std::string> &tokens) {
  std::string out;
  for (const auto &t : tokens) {
    if (!out.empty())
      out.push_back(' ');
    out += t;
  }
  return out;
}

std::string zero_pad(std::size_t n, std::size_t width) {
  std::string s = std::to_string(n);
  return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

struct Builder {
  const SyntheticSpec &spec;
  const std::vector<std::string> &filler; // words without the marker
  Sampler &rng;

  std::vector<std::string> random_words(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i)
      out.push_back(filler[rng.below(filler.size())]);
    return out;
  }

  std::string query() { return join(random_words(spec.query_len)); }

  // Passage with `markers` marker tokens at random positions; one word is
  // borrowed from the query so lexical overlap alone is uninformative.
  std::string passage(const std::string &query_text, std::size_t markers) {
    auto words = random_words(spec.passage_len);
    const auto qwords = split_tokens(query_text);
    words[rng.below(words.size())] = qwords[rng.below(qwords.size())];
    std::vector<std::size_t> slots(words.size());
    for (std::size_t i = 0; i < slots.size(); ++i)
      slots[i] = i;
    for (std::size_t m = 0; m < markers && m < slots.size(); ++m) {
      const std::size_t pick = m + rng.below(slots.size() - m);
      std::swap(slots[m], slots[pick]);
      words[slots[m]] = kSyntheticMarker;
    }
    return join(words);
  }
};

} // namespace

SyntheticData make_synthetic(const SyntheticSpec &spec) {
  spec.validate();
  SyntheticData data;
  std::vector<std::string> filler;
  const std::size_t width = std::to_string(spec.vocab_words).size();
  for (std::size_t i = 0; i + 1 < spec.vocab_words; ++i)
    filler.push_back("w" + zero_pad(i, width));
  data.words = filler;
  data.words.push_back(kSyntheticMarker);
  std::sort(data.words.begin(), data.words.end());

  Sampler rng(spec.seed);
  Builder b{spec, filler, rng};

  for (std::size_t t = 0; t < spec.n_triplets; ++t) {
    Triplet tr;
    tr.query = b.query();
    tr.positive = b.passage(tr.query, 1 + rng.below(3));
    tr.negative = b.passage(tr.query, 0);
    data.triplets.push_back(std::move(tr));
  }

  const std::size_t qwidth = std::to_string(spec.n_eval_queries).size();
  const std::size_t dwidth = std::to_string(spec.candidates_per_query).size();
  for (std::size_t q = 0; q < spec.n_eval_queries; ++q) {
    const std::string qid = "q" + zero_pad(q + 1, qwidth);
    const std::string qtext = b.query();
    data.queries[qid] = qtext;

    std::vector<std::string> docids;
    for (std::size_t d = 0; d < spec.candidates_per_query; ++d) {
      const std::string docid = qid + "-d" + zero_pad(d, dwidth);
      const int grade = d < spec.relevant_per_query ? 1 : 0;
      data.passages[docid] =
          b.passage(qtext, grade ? 1 + rng.below(3) : 0);
      // Judge every relevant passage and as many non-relevant ones.
      if (d < 2 * spec.relevant_per_query)
        data.qrels.set(qid, docid, grade);
      docids.push_back(docid);
    }

    // First-stage scores are noise, so candidate order carries no signal.
    std::vector<RunEntry> entries;
    for (const auto &docid : docids)
      entries.push_back({qid, docid, 0,
                         std::stod(format_fixed(10.0 * rng.unit(), 6)),
                         "synthetic-bm25"});
    std::sort(entries.begin(), entries.end(), ranks_before);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      entries[i].rank = static_cast<long>(i + 1);
      data.candidates.push_back(std::move(entries[i]));
    }
  }
  return data;
}

} // namespace lionrank
