// SPDX-License-Identifier: Apache-2.0

#include "lionrank/ir_eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace lionrank {

// ---------------------------------------------------------------------------
// Qrels

bool Qrels::set(const std::string &qid, const std::string &docid, int grade) {
  auto &judged = by_query_[qid];
  const bool existed = judged.contains(docid);
  judged[docid] = grade;
  return existed;
}

const Judgments *Qrels::find(const std::string &qid) const {
  const auto it = by_query_.find(qid);
  return it == by_query_.end() ? nullptr : &it->second;
}

std::size_t Qrels::size() const {
  std::size_t n = 0;
  for (const auto &[qid, judged] : by_query_)
    n += judged.size();
  return n;
}

// ---------------------------------------------------------------------------
// Parsing and formatting

namespace {

template <typename T>
bool parse_number(const std::string &text, T &out) {
  const char *end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

} // namespace

Run parse_run(std::istream &in) {
  Run run;
  std::map<std::string, std::set<std::string>> docs_seen;
  std::map<std::string, std::set<long>> ranks_seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto fields = split_whitespace(raw);
    if (fields.empty())
      continue;
    if (fields.size() != 6)
      throw ParseError(line_no, "run line needs 6 fields "
                                "(qid Q0 docid rank score tag), got " +
                                    std::to_string(fields.size()));
    RunEntry e;
    e.qid = std::move(fields[0]);
    e.docid = std::move(fields[2]);
    if (!parse_number(fields[3], e.rank) || e.rank < 1)
      throw ParseError(line_no, "rank '" + fields[3] +
                                    "' is not a positive integer");
    if (!parse_number(fields[4], e.score) || !std::isfinite(e.score))
      throw ParseError(line_no,
                       "score '" + fields[4] + "' is not a finite number");
    e.tag = std::move(fields[5]);
    if (!docs_seen[e.qid].insert(e.docid).second)
      throw ParseError(line_no, "docid '" + e.docid +
                                    "' repeated for query '" + e.qid + "'");
    if (!ranks_seen[e.qid].insert(e.rank).second)
      throw ParseError(line_no, "rank " + std::to_string(e.rank) +
                                    " repeated for query '" + e.qid + "'");
    run.push_back(std::move(e));
  }
  return run;
}

ParsedQrels parse_qrels(std::istream &in) {
  ParsedQrels out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto fields = split_whitespace(raw);
    if (fields.empty())
      continue;
    if (fields.size() != 4)
      throw ParseError(line_no, "qrels line needs 4 fields "
                                "(qid 0 docid rel), got " +
                                    std::to_string(fields.size()));
    int grade = 0;
    if (!parse_number(fields[3], grade) || grade < 0)
      throw ParseError(line_no, "relevance '" + fields[3] +
                                    "' is not a nonnegative integer");
    if (out.qrels.set(fields[0], fields[2], grade))
      out.warnings.push_back("line " + std::to_string(line_no) +
                             ": duplicate judgment for (" + fields[0] + ", " +
                             fields[2] + "); keeping grade " + fields[3]);
  }
  return out;
}

std::string format_run_line(const RunEntry &e) {
  return e.qid + " Q0 " + e.docid + " " + std::to_string(e.rank) + " " +
         format_fixed(e.score, kRunScoreDecimals) + " " + e.tag;
}

void write_run(std::ostream &out, const Run &run) {
  for (const auto &e : run)
    out << format_run_line(e) << '\n';
}

void write_qrels(std::ostream &out, const Qrels &qrels) {
  for (const auto &[qid, judged] : qrels.queries())
    for (const auto &[docid, grade] : judged)
      out << qid << " 0 " << docid << ' ' << grade << '\n';
}

double round_run_score(double score) {
  return std::stod(format_fixed(score, kRunScoreDecimals));
}

bool ranks_before(const RunEntry &a, const RunEntry &b) {
  if (a.score != b.score)
    return a.score > b.score;
  return a.docid > b.docid;
}

std::map<std::string, std::vector<const RunEntry *>>
group_ranked(const Run &run) {
  std::map<std::string, std::vector<const RunEntry *>> groups;
  for (const auto &e : run)
    groups[e.qid].push_back(&e);
  for (auto &[qid, entries] : groups)
    std::sort(entries.begin(), entries.end(),
              [](const RunEntry *a, const RunEntry *b) {
                return ranks_before(*a, *b);
              });
  return groups;
}

// ---------------------------------------------------------------------------
// Metrics

void EvalOptions::validate() const {
  if (k < 1)
    throw std::invalid_argument("eval: cutoff k must be >= 1");
  if (binarize_at < 1)
    throw std::invalid_argument("eval: binarization threshold must be >= 1");
}

namespace {

int grade_of(const Judgments &judged, const std::string &docid) {
  const auto it = judged.find(docid);
  return it == judged.end() ? 0 : it->second;
}

double gain_of(int grade, Gain gain) {
  if (grade <= 0)
    return 0.0;
  return gain == Gain::linear ? static_cast<double>(grade)
                              : std::exp2(static_cast<double>(grade)) - 1.0;
}

std::size_t relevant_total(const Judgments &judged, int binarize_at) {
  return static_cast<std::size_t>(
      std::count_if(judged.begin(), judged.end(),
                    [&](const auto &kv) { return kv.second >= binarize_at; }));
}

std::size_t relevant_in_top(std::span<const std::string> ranking,
                            const Judgments &judged, std::size_t k,
                            int binarize_at) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i)
    if (grade_of(judged, ranking[i]) >= binarize_at)
      ++hits;
  return hits;
}

} // namespace

std::optional<double> ndcg_at_k(std::span<const std::string> ranking,
                                const Judgments &judged, std::size_t k,
                                Gain gain) {
  std::vector<int> ideal;
  for (const auto &[docid, grade] : judged)
    if (grade > 0)
      ideal.push_back(grade);
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i)
    idcg += gain_of(ideal[i], gain) / std::log2(static_cast<double>(i + 2));
  if (idcg <= 0.0)
    return std::nullopt;
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i)
    dcg += gain_of(grade_of(judged, ranking[i]), gain) /
           std::log2(static_cast<double>(i + 2));
  return dcg / idcg;
}

std::optional<double> average_precision(std::span<const std::string> ranking,
                                        const Judgments &judged,
                                        int binarize_at) {
  const std::size_t R = relevant_total(judged, binarize_at);
  if (R == 0)
    return std::nullopt;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (grade_of(judged, ranking[i]) >= binarize_at) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(R);
}

std::optional<double> reciprocal_rank_at_k(std::span<const std::string> ranking,
                                           const Judgments &judged,
                                           std::size_t k, int binarize_at) {
  if (relevant_total(judged, binarize_at) == 0)
    return std::nullopt;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i)
    if (grade_of(judged, ranking[i]) >= binarize_at)
      return 1.0 / static_cast<double>(i + 1);
  return 0.0;
}

std::optional<double> precision_at_k(std::span<const std::string> ranking,
                                     const Judgments &judged, std::size_t k,
                                     int binarize_at) {
  if (relevant_total(judged, binarize_at) == 0)
    return std::nullopt;
  return static_cast<double>(relevant_in_top(ranking, judged, k, binarize_at)) /
         static_cast<double>(k);
}

std::optional<double> recall_at_k(std::span<const std::string> ranking,
                                  const Judgments &judged, std::size_t k,
                                  int binarize_at) {
  const std::size_t R = relevant_total(judged, binarize_at);
  if (R == 0)
    return std::nullopt;
  return static_cast<double>(relevant_in_top(ranking, judged, k, binarize_at)) /
         static_cast<double>(R);
}

std::optional<double> r_precision(std::span<const std::string> ranking,
                                  const Judgments &judged, int binarize_at) {
  const std::size_t R = relevant_total(judged, binarize_at);
  if (R == 0)
    return std::nullopt;
  return static_cast<double>(relevant_in_top(ranking, judged, R, binarize_at)) /
         static_cast<double>(R);
}

std::string metric_label(Metric m, std::size_t k) {
  const std::string at = "@" + std::to_string(k);
  switch (m) {
  case Metric::ndcg:
    return "NDCG" + at;
  case Metric::map:
    return "MAP";
  case Metric::mrr:
    return "MRR" + at;
  case Metric::recall:
    return "Recall" + at;
  case Metric::rprec:
    return "R-Prec";
  case Metric::precision:
    return "P" + at;
  }
  return "?";
}

std::string metric_key(Metric m, std::size_t k) {
  const std::string kk = std::to_string(k);
  switch (m) {
  case Metric::ndcg:
    return "ndcg_cut_" + kk;
  case Metric::map:
    return "map";
  case Metric::mrr:
    return "recip_rank_" + kk;
  case Metric::recall:
    return "recall_" + kk;
  case Metric::rprec:
    return "Rprec";
  case Metric::precision:
    return "P_" + kk;
  }
  return "?";
}

MetricValues evaluate_query(std::span<const std::string> ranking,
                            const Judgments &judged, const EvalOptions &o) {
  MetricValues v;
  v[static_cast<std::size_t>(Metric::ndcg)] =
      ndcg_at_k(ranking, judged, o.k, o.gain);
  v[static_cast<std::size_t>(Metric::map)] =
      average_precision(ranking, judged, o.binarize_at);
  v[static_cast<std::size_t>(Metric::mrr)] =
      reciprocal_rank_at_k(ranking, judged, o.k, o.binarize_at);
  v[static_cast<std::size_t>(Metric::recall)] =
      recall_at_k(ranking, judged, o.k, o.binarize_at);
  v[static_cast<std::size_t>(Metric::rprec)] =
      r_precision(ranking, judged, o.binarize_at);
  v[static_cast<std::size_t>(Metric::precision)] =
      precision_at_k(ranking, judged, o.k, o.binarize_at);
  return v;
}

MetricReport evaluate(const Run &run, const Qrels &qrels,
                      const EvalOptions &opts) {
  opts.validate();
  MetricReport report;
  report.options = opts;
  std::array<double, kMetricCount> sums{};
  for (const auto &[qid, entries] : group_ranked(run)) {
    const Judgments *judged = qrels.find(qid);
    if (judged == nullptr) {
      report.skipped_queries.push_back(qid);
      continue;
    }
    std::vector<std::string> ranking;
    ranking.reserve(entries.size());
    for (const RunEntry *e : entries)
      ranking.push_back(e->docid);
    QueryMetrics qm{qid, evaluate_query(ranking, *judged, opts)};
    for (std::size_t m = 0; m < kMetricCount; ++m)
      if (qm.values[m]) {
        sums[m] += *qm.values[m];
        ++report.counts[m];
      }
    report.per_query.push_back(std::move(qm));
  }
  report.evaluated_queries = report.per_query.size();
  for (std::size_t m = 0; m < kMetricCount; ++m)
    if (report.counts[m] > 0)
      report.aggregate[m] = sums[m] / static_cast<double>(report.counts[m]);
  return report;
}

namespace {

std::string cell(const std::optional<double> &v) {
  return v ? format_fixed(*v, 4) : std::string("-");
}

std::string pad_left(const std::string &s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string &s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

} // namespace

std::string format_report_table(const MetricReport &report) {
  std::size_t qid_width = 5;
  for (const auto &q : report.per_query)
    qid_width = std::max(qid_width, q.qid.size());
  std::ostringstream out;
  out << pad_right("qid", qid_width);
  for (Metric m : kAllMetrics)
    out << "  " << pad_left(metric_label(m, report.options.k), 10);
  out << '\n';
  auto row = [&](const std::string &name, const MetricValues &values) {
    out << pad_right(name, qid_width);
    for (std::size_t m = 0; m < kMetricCount; ++m)
      out << "  " << pad_left(cell(values[m]), 10);
    out << '\n';
  };
  for (const auto &q : report.per_query)
    row(q.qid, q.values);
  row("all", report.aggregate);
  out << "queries evaluated: " << report.evaluated_queries
      << ", skipped (no judgments): " << report.skipped_queries.size()
      << ", relevant grade >= " << report.options.binarize_at << '\n';
  return out.str();
}

std::string report_to_json(const MetricReport &report, int indent) {
  using nlohmann::json;
  auto values_json = [&](const MetricValues &values) {
    json j = json::object();
    for (Metric m : kAllMetrics) {
      const auto &v = values[static_cast<std::size_t>(m)];
      j[metric_key(m, report.options.k)] = v ? json(*v) : json(nullptr);
    }
    return j;
  };
  json j;
  j["options"] = {{"k", report.options.k},
                  {"binarize_at", report.options.binarize_at},
                  {"gain", report.options.gain == Gain::linear
                               ? "linear"
                               : "exponential"}};
  j["evaluated_queries"] = report.evaluated_queries;
  j["skipped_queries"] = report.skipped_queries;
  j["aggregate"] = values_json(report.aggregate);
  json counts = json::object();
  for (Metric m : kAllMetrics)
    counts[metric_key(m, report.options.k)] =
        report.counts[static_cast<std::size_t>(m)];
  j["counts"] = counts;
  json per = json::object();
  for (const auto &q : report.per_query)
    per[q.qid] = values_json(q.values);
  j["per_query"] = per;
  return j.dump(indent);
}

// ---------------------------------------------------------------------------
// Reranking

Run rerank(const CrossEncoder &model, const Vocab &vocab,
           const std::unordered_map<std::string, std::string> &queries,
           const std::unordered_map<std::string, std::string> &passages,
           const Run &candidates, const std::string &tag) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<RunEntry>> grouped;
  for (const auto &c : candidates) {
    const auto q = queries.find(c.qid);
    if (q == queries.end())
      throw ResolveError("unknown query id '" + c.qid + "'");
    const auto d = passages.find(c.docid);
    if (d == passages.end())
      throw ResolveError("unknown passage id '" + c.docid + "'");
    auto [it, fresh] = grouped.try_emplace(c.qid);
    if (fresh)
      order.push_back(c.qid);
    RunEntry e = c;
    e.score = round_run_score(model.score(
        tokenize_pair(vocab, q->second, d->second, model.config().max_len)));
    e.tag = tag;
    it->second.push_back(std::move(e));
  }
  Run out;
  out.reserve(candidates.size());
  for (const auto &qid : order) {
    auto &entries = grouped[qid];
    std::sort(entries.begin(), entries.end(), ranks_before);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      entries[i].rank = static_cast<long>(i + 1);
      out.push_back(std::move(entries[i]));
    }
  }
  return out;
}

} // namespace lionrank
