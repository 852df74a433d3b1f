// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "../oracle/brute_force_metrics.hpp"
#include "lionrank/ir_eval.hpp"

namespace lionrank {
namespace {

const std::string kFixtures = LIONRANK_FIXTURES;

std::ifstream fixture(const std::string &name) {
  std::ifstream in(kFixtures + "/" + name);
  if (!in)
    throw std::runtime_error("missing fixture " + name);
  return in;
}

Run run_from(const std::string &text) {
  std::istringstream in(text);
  return parse_run(in);
}

Qrels qrels_from(const std::string &text) {
  std::istringstream in(text);
  return parse_qrels(in).qrels;
}

std::vector<std::string> docs(std::initializer_list<const char *> ids) {
  return {ids.begin(), ids.end()};
}

double at(const MetricValues &v, Metric m) {
  return v[static_cast<std::size_t>(m)].value();
}

// Parsing -------------------------------------------------------------------

TEST(ParseRun, CapturesFields) {
  const auto run = run_from("q1 Q0 d7 1 9.5 bm25\n");
  ASSERT_EQ(run.size(), 1u);
  EXPECT_EQ(run[0], (RunEntry{"q1", "d7", 1, 9.5, "bm25"}));
}

TEST(ParseRun, EmptyAndBlankLines) {
  EXPECT_TRUE(run_from("").empty());
  EXPECT_TRUE(run_from("\n  \n").empty());
  EXPECT_EQ(qrels_from("").size(), 0u);
}

TEST(ParseRun, TabsAndCarriageReturns) {
  const auto run = run_from("q1\tQ0\td7\t1\t-0.25\tx\r\n");
  ASSERT_EQ(run.size(), 1u);
  EXPECT_EQ(run[0].score, -0.25);
  EXPECT_EQ(run[0].tag, "x");
}

void expect_parse_error(const std::string &text, std::size_t line,
                        const std::string &needle) {
  try {
    run_from(text);
    FAIL() << "accepted: " << text;
  } catch (const ParseError &e) {
    EXPECT_EQ(e.line(), line);
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos)
        << e.what();
    EXPECT_NE(std::string(e.what()).find("line " + std::to_string(line)),
              std::string::npos);
  }
}

TEST(ParseRun, RejectsMalformedLinesWithLineNumbers) {
  expect_parse_error("q1 Q0 d1 1 1.0 t\nq1 Q0 d2 2 1.0\n", 2, "6 fields");
  expect_parse_error("q1 Q0 d1 x 1.0 t\n", 1, "rank 'x'");
  expect_parse_error("q1 Q0 d1 0 1.0 t\n", 1, "rank '0'");
  expect_parse_error("\nq1 Q0 d1 1 abc t\n", 2, "score 'abc'");
  expect_parse_error("q1 Q0 d1 1 nan t\n", 1, "score");
  expect_parse_error("q1 Q0 d1 1 1 t\nq1 Q0 d1 2 1 t\n", 2, "docid 'd1'");
  expect_parse_error("q1 Q0 d1 1 1 t\nq1 Q0 d2 1 1 t\n", 2, "rank 1");
}

TEST(ParseQrels, RejectsMalformedLines) {
  for (const auto &[text, line] :
       std::vector<std::pair<std::string, std::size_t>>{
           {"q1 0 d1\n", 1}, {"q1 0 d1 1\nq1 0 d2 -1\n", 2},
           {"q1 0 d1 1.5\n", 1}, {"q1 0 d1 1 extra\n", 1}}) {
    std::istringstream in(text);
    try {
      parse_qrels(in);
      FAIL() << "accepted: " << text;
    } catch (const ParseError &e) {
      EXPECT_EQ(e.line(), line);
    }
  }
}

TEST(ParseQrels, DuplicateFixtureLastWinsWithWarning) {
  auto in = fixture("duplicates.qrels");
  const auto parsed = parse_qrels(in);
  ASSERT_EQ(parsed.warnings.size(), 2u);
  EXPECT_NE(parsed.warnings[0].find("line 4"), std::string::npos);
  EXPECT_NE(parsed.warnings[1].find("line 7"), std::string::npos);
  EXPECT_EQ(parsed.qrels.find("q1")->at("d1"), 3);
  EXPECT_EQ(parsed.qrels.find("q2")->at("d5"), 0);
  EXPECT_EQ(parsed.qrels.size(), 5u);
}

TEST(FormatRun, SixDecimalScores) {
  EXPECT_EQ(format_run_line({"q1", "d7", 1, 9.5, "bm25"}),
            "q1 Q0 d7 1 9.500000 bm25");
  EXPECT_EQ(format_run_line({"q", "d", 3, -0.0000004, "t"}),
            "q Q0 d 3 -0.000000 t");
  EXPECT_EQ(round_run_score(0.12345678), 0.123457);
}

TEST(RoundTrip, TiesFixture) {
  auto in = fixture("ties.run");
  const auto run = parse_run(in);
  std::ostringstream out;
  write_run(out, run);
  EXPECT_EQ(run_from(out.str()), run);
}

TEST(RoundTrip, DuplicateQrelsFixture) {
  auto in = fixture("duplicates.qrels");
  const auto q = parse_qrels(in).qrels;
  std::ostringstream out;
  write_qrels(out, q);
  std::istringstream back(out.str());
  const auto again = parse_qrels(back);
  EXPECT_EQ(again.qrels, q);
  EXPECT_TRUE(again.warnings.empty());
}

// Ordering ------------------------------------------------------------------

TEST(GroupRanked, TiesBreakByDocidDescending) {
  auto in = fixture("ties.run");
  const auto groups = group_ranked(parse_run(in));
  std::vector<std::string> q1;
  for (const auto *e : groups.at("q1"))
    q1.push_back(e->docid);
  // d3 > d2 > d1 bytewise; d10 sorts on score alone.
  EXPECT_EQ(q1, docs({"d3", "d2", "d1", "d10", "d9"}));
  std::vector<std::string> q2;
  for (const auto *e : groups.at("q2"))
    q2.push_back(e->docid);
  EXPECT_EQ(q2, docs({"d5", "d4", "d6"}));
}

TEST(GroupRanked, IndependentOfLineOrder) {
  auto in = fixture("ties.run");
  auto run = parse_run(in);
  const auto q = qrels_from("q1 0 d1 1\nq1 0 d2 2\nq2 0 d4 1\n");
  const auto before = evaluate(run, q);
  std::reverse(run.begin(), run.end());
  const auto after = evaluate(run, q);
  EXPECT_EQ(before.aggregate, after.aggregate);
}

// Metrics -------------------------------------------------------------------

TEST(Ndcg, WorkedExample) {
  const Judgments g{{"a", 0}, {"b", 3}, {"c", 2}};
  const auto v = ndcg_at_k(docs({"a", "b", "c"}), g, 10);
  const double dcg = 3.0 / std::log2(3.0) + 2.0 / 2.0;
  const double idcg = 3.0 + 2.0 / std::log2(3.0);
  EXPECT_NEAR(dcg, 2.8928, 5e-5);
  EXPECT_NEAR(idcg, 4.2619, 5e-5);
  ASSERT_TRUE(v);
  // 0.678762..., quoted to four places as 0.6787.
  EXPECT_NEAR(*v, 0.6787, 1e-4);
  EXPECT_DOUBLE_EQ(*v, *oracle::ndcg(docs({"a", "b", "c"}), g, 10));
}

TEST(Ndcg, IdealOrderIsExactlyOne) {
  const Judgments g{{"a", 3}, {"b", 2}, {"c", 2}, {"d", 1}, {"e", 0}};
  EXPECT_EQ(*ndcg_at_k(docs({"a", "b", "c", "d", "e"}), g, 10), 1.0);
  EXPECT_EQ(*ndcg_at_k(docs({"a", "c", "b"}), g, 3), 1.0);
}

TEST(Ndcg, IdealUsesUnretrievedJudgedDocs) {
  const Judgments g{{"a", 1}, {"z", 3}};
  const double v = *ndcg_at_k(docs({"a"}), g, 10);
  EXPECT_NEAR(v, 1.0 / (3.0 + 1.0 / std::log2(3.0)), 1e-15);
}

TEST(Ndcg, ZeroIdealExcluded) {
  const Judgments g{{"a", 0}, {"b", 0}};
  EXPECT_FALSE(ndcg_at_k(docs({"a", "b"}), g, 10));
}

TEST(Ndcg, ExponentialGain) {
  const Judgments g{{"a", 0}, {"b", 3}, {"c", 2}};
  const double dcg = 7.0 / std::log2(3.0) + 3.0 / 2.0;
  const double idcg = 7.0 + 3.0 / std::log2(3.0);
  EXPECT_NEAR(*ndcg_at_k(docs({"a", "b", "c"}), g, 10, Gain::exponential),
              dcg / idcg, 1e-15);
}

TEST(BinaryMetrics, WorkedExamples) {
  const Judgments g{{"a", 0}, {"b", 0}, {"c", 1}, {"d", 0}};
  EXPECT_DOUBLE_EQ(*reciprocal_rank_at_k(docs({"a", "b", "c"}), g, 10, 1),
                   1.0 / 3.0);
  const Judgments two{{"a", 1}, {"c", 1}};
  const double map = *average_precision(docs({"a", "b", "c"}), two, 1);
  EXPECT_NEAR(map, 0.8333, 5e-5);
  EXPECT_DOUBLE_EQ(map, (1.0 + 2.0 / 3.0) / 2.0);
}

TEST(BinaryMetrics, EightOfTopTenRelevant) {
  Judgments g;
  std::vector<std::string> ranking;
  for (int i = 0; i < 12; ++i) {
    ranking.push_back("d" + std::to_string(i));
    g[ranking.back()] = (i == 2 || i == 6 || i >= 10) ? 0 : 2;
  }
  EXPECT_DOUBLE_EQ(*precision_at_k(ranking, g, 10, 1), 0.8);
  EXPECT_DOUBLE_EQ(*recall_at_k(ranking, g, 10, 1), 1.0);
  EXPECT_DOUBLE_EQ(*r_precision(ranking, g, 1), 0.75);
}

TEST(BinaryMetrics, ThresholdAndExclusion) {
  const Judgments g{{"a", 1}, {"b", 2}};
  EXPECT_DOUBLE_EQ(*reciprocal_rank_at_k(docs({"a", "b"}), g, 10, 1), 1.0);
  EXPECT_DOUBLE_EQ(*reciprocal_rank_at_k(docs({"a", "b"}), g, 10, 2), 0.5);
  EXPECT_FALSE(average_precision(docs({"a", "b"}), g, 3));
  EXPECT_FALSE(recall_at_k(docs({"a"}), g, 10, 3));
  EXPECT_FALSE(r_precision(docs({"a"}), g, 3));
  EXPECT_FALSE(precision_at_k(docs({"a"}), g, 10, 3));
  EXPECT_FALSE(reciprocal_rank_at_k(docs({"a"}), g, 10, 3));
}

TEST(BinaryMetrics, RelevantOutsideCutoff) {
  const Judgments g{{"z", 1}};
  std::vector<std::string> ranking;
  for (int i = 0; i < 11; ++i)
    ranking.push_back("n" + std::to_string(i));
  ranking.push_back("z");
  EXPECT_EQ(*reciprocal_rank_at_k(ranking, g, 10, 1), 0.0);
  EXPECT_DOUBLE_EQ(*average_precision(ranking, g, 1), 1.0 / 12.0);
}

TEST(Metrics, MatchOracleOnRandomCases) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    std::vector<std::string> ranking;
    oracle::Grades g;
    Judgments j;
    for (std::size_t i = 0; i < n; ++i) {
      ranking.push_back("d" + std::to_string(i));
      if (rng() % 4 != 0) {
        const int grade = static_cast<int>(rng() % 4);
        g[ranking.back()] = grade;
        j[ranking.back()] = grade;
      }
    }
    std::shuffle(ranking.begin(), ranking.end(), rng);
    const std::size_t k = 1 + rng() % 10;
    const int thr = 1 + static_cast<int>(rng() % 3);
    const auto got = evaluate_query(ranking, j, {k, thr, Gain::linear});
    const auto want = oracle::all_metrics(ranking, g, k, thr);
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      ASSERT_EQ(got[m].has_value(), want[m].has_value()) << trial << "/" << m;
      if (got[m]) {
        EXPECT_LT(std::abs(*got[m] - *want[m]), 1e-12);
        EXPECT_GE(*got[m], 0.0);
        EXPECT_LE(*got[m], 1.0);
      }
    }
  }
}

TEST(Metrics, PermutingBelowCutoffChangesNothingAtK) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> ranking;
    Judgments g;
    for (int i = 0; i < 25; ++i) {
      ranking.push_back("d" + std::to_string(i));
      g[ranking.back()] = static_cast<int>(rng() % 4);
    }
    auto shuffled = ranking;
    std::shuffle(shuffled.begin() + 10, shuffled.end(), rng);
    const EvalOptions o{10, 1, Gain::linear};
    const auto a = evaluate_query(ranking, g, o);
    const auto b = evaluate_query(shuffled, g, o);
    for (Metric m : {Metric::ndcg, Metric::mrr, Metric::recall,
                     Metric::precision})
      EXPECT_EQ(at(a, m), at(b, m));
  }
}

TEST(Evaluate, ScoreMonotoneInvariance) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  lionrank::Run run;
  Qrels qrels;
  for (int q = 0; q < 4; ++q)
    for (int d = 0; d < 15; ++d) {
      const auto qid = "q" + std::to_string(q);
      const auto docid = "d" + std::to_string(d);
      run.push_back({qid, docid, d + 1, u(rng), "t"});
      qrels.set(qid, docid, static_cast<int>(rng() % 4));
    }
  auto transformed = run;
  for (auto &e : transformed)
    e.score = std::exp(2.0 * e.score) + 7.0;
  EXPECT_EQ(evaluate(run, qrels).aggregate,
            evaluate(transformed, qrels).aggregate);
}

TEST(Evaluate, IdealFixture) {
  auto r = fixture("ideal.run");
  auto q = fixture("ideal.qrels");
  const auto report = evaluate(parse_run(r), parse_qrels(q).qrels);
  EXPECT_EQ(report.evaluated_queries, 2u);
  EXPECT_EQ(*report.value(Metric::ndcg), 1.0);
  EXPECT_EQ(*report.value(Metric::map), 1.0);
  EXPECT_EQ(*report.value(Metric::mrr), 1.0);
  EXPECT_EQ(*report.value(Metric::recall), 1.0);
  EXPECT_EQ(*report.value(Metric::rprec), 1.0);
  // Only 3 and 2 documents exist, so P@10 is bounded by them.
  EXPECT_DOUBLE_EQ(*report.value(Metric::precision), (0.3 + 0.2) / 2.0);
}

TEST(Evaluate, EmptyRun) {
  const auto report = evaluate({}, qrels_from("q1 0 d1 1\n"));
  EXPECT_EQ(report.evaluated_queries, 0u);
  EXPECT_TRUE(report.per_query.empty());
  for (const auto &v : report.aggregate)
    EXPECT_FALSE(v.has_value());
  EXPECT_NE(format_report_table(report).find("all"), std::string::npos);
}

TEST(Evaluate, ThreeQueryAggregatesAreOracleMeans) {
  auto r = fixture("three.run");
  auto q = fixture("three.qrels");
  const auto run = parse_run(r);
  const auto qrels = parse_qrels(q).qrels;
  const auto report = evaluate(run, qrels);

  EXPECT_EQ(report.skipped_queries, std::vector<std::string>{"q4"});
  EXPECT_EQ(report.evaluated_queries, 3u);

  std::array<double, kMetricCount> sums{};
  std::array<std::size_t, kMetricCount> counts{};
  for (const auto &[qid, entries] : group_ranked(run)) {
    const auto *j = qrels.find(qid);
    if (!j)
      continue;
    std::vector<std::string> ranking;
    for (const auto *e : entries)
      ranking.push_back(e->docid);
    const oracle::Grades g(j->begin(), j->end());
    const auto want = oracle::all_metrics(ranking, g, 10, 1);
    for (std::size_t m = 0; m < kMetricCount; ++m)
      if (want[m]) {
        sums[m] += *want[m];
        ++counts[m];
      }
  }
  // q3 has only zero grades, so every metric averages over q1 and q2.
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    EXPECT_EQ(counts[m], 2u);
    EXPECT_EQ(report.counts[m], 2u);
    EXPECT_NEAR(*report.aggregate[m], sums[m] / counts[m], 1e-15);
  }
  EXPECT_DOUBLE_EQ(*report.value(Metric::mrr), (0.5 + 1.0 / 3.0) / 2.0);
}

TEST(Evaluate, RejectsBadOptions) {
  EXPECT_THROW(evaluate({}, {}, {0, 1, Gain::linear}), std::invalid_argument);
  EXPECT_THROW(evaluate({}, {}, {10, 0, Gain::linear}), std::invalid_argument);
}

TEST(Report, TableAndJsonCarrySixMetrics) {
  auto r = fixture("three.run");
  auto q = fixture("three.qrels");
  const auto report = evaluate(parse_run(r), parse_qrels(q).qrels);
  const auto table = format_report_table(report);
  for (const char *label :
       {"NDCG@10", "MAP", "MRR@10", "Recall@10", "R-Prec", "P@10"})
    EXPECT_NE(table.find(label), std::string::npos) << label;
  const auto json = nlohmann::json::parse(report_to_json(report));
  EXPECT_EQ(json["aggregate"].size(), kMetricCount);
  EXPECT_EQ(json["skipped_queries"][0], "q4");
  EXPECT_EQ(json["options"]["binarize_at"], 1);
}

// Reranking -----------------------------------------------------------------

CrossEncoderConfig small_config(std::size_t vocab) {
  CrossEncoderConfig c;
  c.vocab_size = vocab;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 16;
  c.max_len = 16;
  c.seed = 3;
  return c;
}

struct RerankSetup {
  Vocab vocab;
  std::unordered_map<std::string, std::string> queries{{"q1", "red apple"},
                                                       {"q2", "blue train"}};
  std::unordered_map<std::string, std::string> passages{
      {"a", "red apple pie"}, {"b", "blue train ride"},
      {"c", "apple train"},   {"d", "nothing"},
      {"e", "red red red"}};

  RerankSetup() {
    std::vector<std::string> texts;
    for (const auto &[id, t] : queries)
      texts.push_back(t);
    for (const auto &[id, t] : passages)
      texts.push_back(t);
    vocab = Vocab::from_texts(texts);
  }
};

TEST(Rerank, SingleCandidateGetsRankOne) {
  RerankSetup s;
  const auto model = CrossEncoder::init(small_config(s.vocab.size()));
  const auto out = rerank(model, s.vocab, s.queries, s.passages,
                          run_from("q1 Q0 c 7 -100 bm25\n"), "toy");
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].rank, 1);
  EXPECT_EQ(out[0].tag, "toy");
  EXPECT_EQ(out[0].docid, "c");
}

TEST(Rerank, ConstantScoreOrdersByDocidDescending) {
  RerankSetup s;
  auto model = CrossEncoder::init(small_config(s.vocab.size()));
  for (auto &p : model.parameters())
    if (p.name == "head.weight")
      std::fill(p.value.data().begin(), p.value.data().end(), 0.0);
  const auto out =
      rerank(model, s.vocab, s.queries, s.passages,
             run_from("q1 Q0 a 1 9 bm25\nq1 Q0 c 2 8 bm25\nq1 Q0 b 3 7 bm25\n"),
             "m");
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].docid, "c");
  EXPECT_EQ(out[1].docid, "b");
  EXPECT_EQ(out[2].docid, "a");
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(out[i].score, 0.5);
    EXPECT_EQ(out[i].rank, static_cast<long>(i + 1));
  }
}

TEST(Rerank, PermutationWithRewrittenRanks) {
  RerankSetup s;
  const auto model = CrossEncoder::init(small_config(s.vocab.size()));
  const auto candidates = run_from("q2 Q0 a 1 5 bm25\nq2 Q0 b 2 4 bm25\n"
                                   "q1 Q0 e 1 9 bm25\nq2 Q0 d 3 3 bm25\n"
                                   "q1 Q0 c 2 1 bm25\nq2 Q0 e 4 2 bm25\n");
  const auto out = rerank(model, s.vocab, s.queries, s.passages, candidates,
                          "toy-lion-epoch3");
  ASSERT_EQ(out.size(), candidates.size());
  // Queries keep first-appearance order.
  EXPECT_EQ(out.front().qid, "q2");
  std::map<std::string, std::multiset<std::string>> in_docs, out_docs;
  for (const auto &e : candidates)
    in_docs[e.qid].insert(e.docid);
  for (const auto &e : out)
    out_docs[e.qid].insert(e.docid);
  EXPECT_EQ(in_docs, out_docs);

  for (const auto &[qid, entries] : group_ranked(out)) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      EXPECT_EQ(entries[i]->rank, static_cast<long>(i + 1));
      EXPECT_EQ(entries[i]->tag, "toy-lion-epoch3");
    }
  }
  // Written then re-read, the ranks still agree with the evaluator's order.
  std::ostringstream text;
  write_run(text, out);
  const auto reread = run_from(text.str());
  for (const auto &[qid, entries] : group_ranked(reread))
    for (std::size_t i = 0; i < entries.size(); ++i)
      EXPECT_EQ(entries[i]->rank, static_cast<long>(i + 1));
  EXPECT_EQ(reread, out);
}

TEST(Rerank, UnknownIdsAreNamed) {
  RerankSetup s;
  const auto model = CrossEncoder::init(small_config(s.vocab.size()));
  try {
    rerank(model, s.vocab, s.queries, s.passages,
           run_from("q1 Q0 a 1 1 t\nq1 Q0 ghost 2 1 t\n"), "m");
    FAIL();
  } catch (const ResolveError &e) {
    EXPECT_NE(std::string(e.what()).find("'ghost'"), std::string::npos);
  }
  EXPECT_THROW(rerank(model, s.vocab, s.queries, s.passages,
                      run_from("q9 Q0 a 1 1 t\n"), "m"),
               ResolveError);
}

} // namespace
} // namespace lionrank
