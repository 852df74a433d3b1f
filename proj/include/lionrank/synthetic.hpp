// SPDX-License-Identifier: Apache-2.0
//
// Seeded, linearly separable toy corpus: relevant passages carry a shared
// marker token, irrelevant ones never do. Produces training triplets plus a
// matching evaluation set (queries, passages, first-stage candidates, qrels).

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "lionrank/ir_eval.hpp"
#include "lionrank/train.hpp"

namespace lionrank {

inline constexpr const char *kSyntheticMarker = "relevant";

struct SyntheticSpec {
  // Distinct corpus tokens including the marker; the model vocabulary adds
  // the four reserved ids on top.
  std::size_t vocab_words = 96;
  std::size_t n_triplets = 1000;
  std::size_t n_eval_queries = 20;
  std::size_t candidates_per_query = 50;
  std::size_t relevant_per_query = 5;
  std::size_t query_len = 3;
  std::size_t passage_len = 8;
  std::uint64_t seed = 12;

  void validate() const;
};

struct SyntheticData {
  std::vector<std::string> words; // every corpus token, marker included
  std::vector<Triplet> triplets;
  std::unordered_map<std::string, std::string> queries;
  std::unordered_map<std::string, std::string> passages;
  Run candidates;
  Qrels qrels;
};

/// Relevant evaluation passages (grade 1) carry one to three markers, like
/// the training positives. An equal number of non-relevant passages per
/// query is judged 0; the rest stay unjudged.
SyntheticData make_synthetic(const SyntheticSpec &spec);

} // namespace lionrank
