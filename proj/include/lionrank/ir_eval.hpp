// SPDX-License-Identifier: Apache-2.0
//
// TREC run/qrels I/O, cross-encoder reranking, and the six-metric
// evaluation suite (NDCG@k, MAP, MRR@k, Recall@k, R-Prec, P@k) with
// trec_eval-compatible conventions.

#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lionrank/model.hpp"
#include "lionrank/text_io.hpp"

namespace lionrank {

struct RunEntry {
  std::string qid;
  std::string docid;
  long rank = 0;
  double score = 0.0;
  std::string tag;

  bool operator==(const RunEntry &) const = default;
};

using Run = std::vector<RunEntry>;

// qid -> docid -> grade.
using Judgments = std::map<std::string, int>;

class Qrels {
public:
  // Returns true when (qid, docid) was already present; the new grade wins.
  bool set(const std::string &qid, const std::string &docid, int grade);
  const Judgments *find(const std::string &qid) const;
  const std::map<std::string, Judgments> &queries() const { return by_query_; }
  std::size_t size() const;

  bool operator==(const Qrels &) const = default;

private:
  std::map<std::string, Judgments> by_query_;
};

struct ParsedQrels {
  Qrels qrels;
  std::vector<std::string> warnings;
};

// `qid Q0 docid rank score tag`. Ranks must be positive and unique within a
// query, docids unique within a query, scores finite.
Run parse_run(std::istream &in);
// `qid 0 docid rel`, rel a nonnegative integer. Duplicates: last one wins.
ParsedQrels parse_qrels(std::istream &in);

inline constexpr int kRunScoreDecimals = 6;

// Scores are written with six decimals.
std::string format_run_line(const RunEntry &e);
// The value a score takes after a write/read cycle through a run file.
double round_run_score(double score);
void write_run(std::ostream &out, const Run &run);
void write_qrels(std::ostream &out, const Qrels &qrels);

// Score descending, then docid descending (byte-wise).
bool ranks_before(const RunEntry &a, const RunEntry &b);

// Groups entries by qid (sorted qid order), each group in evaluation order.
std::map<std::string, std::vector<const RunEntry *>>
group_ranked(const Run &run);

enum class Gain { linear, exponential };

struct EvalOptions {
  std::size_t k = 10;
  int binarize_at = 1;
  Gain gain = Gain::linear;

  void validate() const;
};

// Per-query metrics over a ranked docid list. nullopt marks a query that is
// excluded from the metric's mean (IDCG == 0 for NDCG, no relevant documents
// for the binary metrics).
std::optional<double> ndcg_at_k(std::span<const std::string> ranking,
                                const Judgments &judged, std::size_t k,
                                Gain gain = Gain::linear);
std::optional<double> average_precision(std::span<const std::string> ranking,
                                        const Judgments &judged,
                                        int binarize_at);
std::optional<double> reciprocal_rank_at_k(std::span<const std::string> ranking,
                                           const Judgments &judged,
                                           std::size_t k, int binarize_at);
std::optional<double> precision_at_k(std::span<const std::string> ranking,
                                     const Judgments &judged, std::size_t k,
                                     int binarize_at);
std::optional<double> recall_at_k(std::span<const std::string> ranking,
                                  const Judgments &judged, std::size_t k,
                                  int binarize_at);
std::optional<double> r_precision(std::span<const std::string> ranking,
                                  const Judgments &judged, int binarize_at);

enum class Metric : std::size_t { ndcg, map, mrr, recall, rprec, precision };
inline constexpr std::size_t kMetricCount = 6;
inline constexpr std::array<Metric, kMetricCount> kAllMetrics = {
    Metric::ndcg,   Metric::map,   Metric::mrr,
    Metric::recall, Metric::rprec, Metric::precision};

// Display label, e.g. "NDCG@10", "MAP", "R-Prec".
std::string metric_label(Metric m, std::size_t k);
// Machine key in trec_eval style, e.g. "ndcg_cut_10", "map", "Rprec".
std::string metric_key(Metric m, std::size_t k);

using MetricValues = std::array<std::optional<double>, kMetricCount>;

MetricValues evaluate_query(std::span<const std::string> ranking,
                            const Judgments &judged, const EvalOptions &opts);

struct QueryMetrics {
  std::string qid;
  MetricValues values;
};

struct MetricReport {
  EvalOptions options;
  std::vector<QueryMetrics> per_query; // qid order
  MetricValues aggregate;              // nullopt when no query qualified
  std::array<std::size_t, kMetricCount> counts{};
  std::size_t evaluated_queries = 0;
  std::vector<std::string> skipped_queries; // in run, absent from qrels

  std::optional<double> value(Metric m) const {
    return aggregate[static_cast<std::size_t>(m)];
  }
};

MetricReport evaluate(const Run &run, const Qrels &qrels,
                      const EvalOptions &opts = {});

std::string format_report_table(const MetricReport &report);
std::string report_to_json(const MetricReport &report, int indent = 2);

class ResolveError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Rescores every candidate with the model and re-sorts each query by score
/// descending, docid descending on ties. Scores are first rounded to what a
/// run file holds, so written ranks agree with a re-sort of the file.
/// Ranks become 1..k and the tag becomes `tag`. Queries keep their
/// first-appearance order.
Run rerank(const CrossEncoder &model, const Vocab &vocab,
           const std::unordered_map<std::string, std::string> &queries,
           const std::unordered_map<std::string, std::string> &passages,
           const Run &candidates, const std::string &tag);

} // namespace lionrank
