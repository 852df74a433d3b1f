// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "commands.hpp"
#include "lionrank/ir_eval.hpp"

namespace lionrank::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kFixtures = LIONRANK_FIXTURES;

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path &p, const std::string &text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

struct Invocation {
  int code;
  std::string out;
  std::string err;
};

Invocation cli(const std::vector<std::string> &args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Every test gets a private scratch directory that is also the output root.
class CliTest : public ::testing::Test {
protected:
  void SetUp() override {
    std::string tmpl = (fs::temp_directory_path() / "lionrank-cli-XXXXXX");
    ASSERT_NE(mkdtemp(tmpl.data()), nullptr);
    dir_ = tmpl;
    setenv("LIONRANK_OUTPUT_ROOT", dir_.c_str(), 1);
  }
  void TearDown() override {
    unsetenv("LIONRANK_OUTPUT_ROOT");
    fs::remove_all(dir_);
  }

  // Ten triplets over a handful of words, and a minimal config beside them.
  fs::path minimal_config(const std::string &extra = "") {
    std::string triplets;
    const char *pos[] = {"red apple", "blue train", "green tea", "old book",
                         "fast car"};
    for (int i = 0; i < 10; ++i) {
      const std::string q = pos[i % 5];
      const std::string neg = pos[(i + 2) % 5];
      triplets += q + "\t" + q + " here\t" + neg + " there\n";
    }
    spit(dir_ / "data" / "triplets.tsv", triplets);
    spit(dir_ / "data" / "run.ini",
         "[data]\ntriplets = triplets.tsv\n\n"
         "[model]\nname = toy\nd_model = 8\nn_layers = 1\nn_heads = 2\n"
         "d_ff = 16\nmax_len = 16\n\n"
         "[train]\nbatch_size = 4\n" +
             extra);
    return dir_ / "data" / "run.ini";
  }

  fs::path dir_;
};

std::set<std::string> files_under(const fs::path &root) {
  std::set<std::string> out;
  for (const auto &e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file())
      out.insert(fs::relative(e.path(), root).generic_string());
  return out;
}

void expect_manifest_complete(const fs::path &root) {
  const auto m = json::parse(slurp(root / "manifest.json"));
  EXPECT_EQ(m["format_version"], kManifestVersion);
  std::set<std::string> listed{"manifest.json"};
  for (const auto &a : m["artifacts"]) {
    listed.insert(a["path"].get<std::string>());
    EXPECT_EQ(a["bytes"].get<std::size_t>(),
              fs::file_size(root / a["path"].get<std::string>()));
  }
  EXPECT_EQ(listed, files_under(root));
}

// train ---------------------------------------------------------------------

TEST_F(CliTest, TrainWritesThreeCheckpointsByDefault) {
  const auto cfg = minimal_config();
  const auto r = cli({"train", "-c", cfg.string(), "--optimizer", "lion"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const fs::path out = dir_ / "runs" / "toy";
  for (int e = 1; e <= 3; ++e)
    EXPECT_TRUE(fs::exists(out / "checkpoints" /
                           ("toy-lion-epoch" + std::to_string(e) + ".ckpt")));
  EXPECT_FALSE(fs::exists(out / "checkpoints" / "toy-lion-epoch4.ckpt"));
  EXPECT_TRUE(fs::exists(out / "logs" / "toy-lion.loss.tsv"));
  EXPECT_TRUE(fs::exists(out / "reports" / "toy-lion.resources.txt"));
  expect_manifest_complete(out);
  const auto m = json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(m["command"], "train");
  EXPECT_EQ(m["config"]["train"]["epochs"], 3);
  EXPECT_EQ(m["n_pairs"], 20);
  EXPECT_TRUE(m.contains("seed"));
}

TEST_F(CliTest, TrainIsByteReproducible) {
  const auto cfg = minimal_config();
  ASSERT_EQ(cli({"train", "-c", cfg.string(), "--output-dir", "a"}).code, 0);
  ASSERT_EQ(cli({"train", "-c", cfg.string(), "--output-dir", "b"}).code, 0);
  const auto a = files_under(dir_ / "a");
  EXPECT_EQ(a, files_under(dir_ / "b"));
  std::size_t compared = 0;
  for (const auto &f : a)
    if (f.ends_with(".ckpt") || f.ends_with(".loss.tsv")) {
      EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
      ++compared;
    }
  EXPECT_EQ(compared, 3u + 1u);
}

TEST_F(CliTest, TwoOptimizersProduceComparison) {
  const auto cfg = minimal_config("optimizers = lion, adamw\nepochs = 1\n");
  const auto r = cli({"train", "-c", cfg.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const fs::path out = dir_ / "runs" / "toy";
  const auto table = slurp(out / "reports" / "optimizer-comparison.tsv");
  std::istringstream lines(table);
  std::string header, adamw, lion;
  std::getline(lines, header);
  std::getline(lines, adamw);
  std::getline(lines, lion);
  EXPECT_NE(header.find("efficiency_gain_pct"), std::string::npos);
  EXPECT_EQ(adamw.rfind("toy\tadamw\t", 0), 0u);
  EXPECT_EQ(lion.rfind("toy\tlion\t", 0), 0u);
  // Lion keeps one buffer to AdamW's two.
  const auto state_gain = lion.substr(lion.rfind('\t') + 1);
  EXPECT_NEAR(std::stod(state_gain), 50.0, 0.5);
  expect_manifest_complete(out);
}

TEST_F(CliTest, FlagsOverrideConfig) {
  const auto cfg = minimal_config();
  ASSERT_EQ(cli({"train", "-c", cfg.string(), "--optimizer", "adamw",
                 "--epochs", "1", "--set", "model.name=tiny"})
                .code,
            0);
  EXPECT_TRUE(fs::exists(dir_ / "runs" / "tiny" / "checkpoints" /
                         "tiny-adamw-epoch1.ckpt"));
}

TEST_F(CliTest, OutputDirExpandsModelName) {
  const auto cfg = minimal_config("epochs = 1\n\n[output]\ndir = out/{name}-x\n");
  ASSERT_EQ(cli({"train", "-c", cfg.string()}).code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "toy-x" / "manifest.json"));
}

// exit codes ----------------------------------------------------------------

TEST_F(CliTest, ConfigErrorsExitTwo) {
  const auto cfg = minimal_config();
  EXPECT_EQ(cli({"train", "-c", cfg.string(), "--set", "train.bogus=1"}).code,
            kExitConfig);
  EXPECT_EQ(cli({"train", "-c", cfg.string(), "--set", "model.n_heads=3"})
                .code,
            kExitConfig);
  EXPECT_EQ(cli({"train", "-c", cfg.string(), "--schedule", "linear"}).code,
            kExitConfig);
  EXPECT_EQ(cli({"train"}).code, kExitConfig);
  EXPECT_EQ(cli({"no-such-command"}).code, kExitConfig);
  EXPECT_EQ(cli({"eval", "--run", "x", "--qrels", "y", "-k", "0"}).code,
            kExitConfig);
}

TEST_F(CliTest, MissingFilesExitFive) {
  const auto r = cli({"train", "-c", (dir_ / "absent.ini").string()});
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("absent.ini"), std::string::npos);
  const auto cfg = minimal_config();
  fs::remove(dir_ / "data" / "triplets.tsv");
  EXPECT_EQ(cli({"train", "-c", cfg.string()}).code, kExitInput);
}

TEST_F(CliTest, MalformedInputsExitThree) {
  spit(dir_ / "bad.run", "q1 Q0 d1 1 1.0 t\nq1 Q0 d2 two 1.0 t\n");
  const auto r = cli({"eval", "--run", (dir_ / "bad.run").string(), "--qrels",
                      (kFixtures / "ideal.qrels").string()});
  EXPECT_EQ(r.code, kExitParse);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;

  spit(dir_ / "fake.ckpt", "not a checkpoint");
  EXPECT_EQ(cli({"rerank", "--checkpoint", (dir_ / "fake.ckpt").string(),
                 "--queries", (kFixtures / "queries.tsv").string(),
                 "--passages", (kFixtures / "passages.tsv").string(),
                 "--candidates", (kFixtures / "candidates.run").string(), "-o",
                 "out.run"})
                .code,
            kExitParse);
}

TEST_F(CliTest, NonFiniteLossExitsFour) {
  const auto cfg = minimal_config();
  const auto r = cli({"train", "-c", cfg.string(), "--optimizer", "lion",
                      "--set", "lion.lr=1e300", "--set",
                      "lion.weight_decay=1e300"});
  EXPECT_EQ(r.code, kExitNumeric) << r.err;
  EXPECT_NE(r.err.find("finite"), std::string::npos) << r.err;
}

// rerank / eval ---------------------------------------------------------------

class PipelineTest : public CliTest {
protected:
  // Trains one epoch on the fixture corpus and returns the checkpoint.
  fs::path checkpoint() {
    const auto cfg = minimal_config("epochs = 1\noptimizers = lion\n");
    EXPECT_EQ(cli({"train", "-c", cfg.string()}).code, 0);
    return dir_ / "runs" / "toy" / "checkpoints" / "toy-lion-epoch1.ckpt";
  }
  // Words outside the training vocabulary map to [UNK].
  std::vector<std::string> rerank_args(const fs::path &ck) {
    return {"rerank",       "--checkpoint", ck.string(),
            "--queries",    (kFixtures / "queries.tsv").string(),
            "--passages",   (kFixtures / "passages.tsv").string(),
            "--candidates", (kFixtures / "candidates.run").string(),
            "-o",           "reranked.run"};
  }
};

TEST_F(PipelineTest, RerankWritesTaggedPermutation) {
  const auto r = cli(rerank_args(checkpoint()));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream in(dir_ / "reranked.run");
  const auto out = parse_run(in);
  std::ifstream cin(kFixtures / "candidates.run");
  const auto candidates = parse_run(cin);
  ASSERT_EQ(out.size(), candidates.size());
  std::map<std::string, std::set<std::string>> want, got;
  for (const auto &e : candidates)
    want[e.qid].insert(e.docid);
  for (const auto &e : out) {
    got[e.qid].insert(e.docid);
    EXPECT_EQ(e.tag, "toy-lion-epoch1");
  }
  EXPECT_EQ(got, want);
  for (const auto &[qid, entries] : group_ranked(out))
    for (std::size_t i = 0; i < entries.size(); ++i)
      EXPECT_EQ(entries[i]->rank, static_cast<long>(i + 1));
  // One query with three candidates gives ranks 1..3.
  EXPECT_EQ(got["q1"].size(), 3u);
}

TEST_F(PipelineTest, RerankNamesUnresolvedId) {
  const auto ck = checkpoint();
  spit(dir_ / "cands.run", "q1 Q0 a 1 1 t\nq1 Q0 missing-doc 2 0 t\n");
  auto args = rerank_args(ck);
  args[8] = (dir_ / "cands.run").string();
  const auto r = cli(args);
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("missing-doc"), std::string::npos) << r.err;
}

TEST_F(CliTest, EvalIdealFixture) {
  const auto r = cli({"eval", "--run", (kFixtures / "ideal.run").string(),
                      "--qrels", (kFixtures / "ideal.qrels").string(), "-k",
                      "3", "--output-dir", "metrics"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = json::parse(slurp(dir_ / "metrics" / "metrics.json"));
  ASSERT_EQ(j["aggregate"].size(), 6u);
  EXPECT_EQ(j["aggregate"]["ndcg_cut_3"], 1.0);
  EXPECT_EQ(j["aggregate"]["map"], 1.0);
  EXPECT_EQ(j["aggregate"]["recip_rank_3"], 1.0);
  EXPECT_EQ(j["aggregate"]["recall_3"], 1.0);
  EXPECT_EQ(j["aggregate"]["Rprec"], 1.0);
  EXPECT_EQ(j["run"], "ideal");
  expect_manifest_complete(dir_ / "metrics");
}

TEST_F(CliTest, EvalReportsExactlySixMetrics) {
  const auto r = cli({"eval", "--run", (kFixtures / "three.run").string(),
                      "--qrels", (kFixtures / "three.qrels").string()});
  ASSERT_EQ(r.code, kExitOk);
  std::istringstream lines(r.out);
  std::string header;
  std::getline(lines, header);
  std::istringstream cols(header);
  std::vector<std::string> names;
  for (std::string c; cols >> c;)
    names.push_back(c);
  EXPECT_EQ(names, (std::vector<std::string>{"qid", "NDCG@10", "MAP",
                                             "MRR@10", "Recall@10", "R-Prec",
                                             "P@10"}));
  EXPECT_NE(r.err.find("1 run query without judgments skipped"),
            std::string::npos)
      << r.err;
}

TEST_F(CliTest, EvalAggregateIsMeanOfPerQuery) {
  ASSERT_EQ(cli({"eval", "--run", (kFixtures / "three.run").string(),
                 "--qrels", (kFixtures / "three.qrels").string(),
                 "--output-dir", "m"})
                .code,
            0);
  const auto j = json::parse(slurp(dir_ / "m" / "metrics.json"));
  for (const auto &[key, agg] : j["aggregate"].items()) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto &[qid, values] : j["per_query"].items())
      if (!values[key].is_null()) {
        sum += values[key].get<double>();
        ++n;
      }
    ASSERT_EQ(n, j["counts"][key].get<std::size_t>()) << key;
    EXPECT_NEAR(agg.get<double>(), sum / static_cast<double>(n), 1e-15)
        << key;
  }
}

TEST_F(CliTest, EvalWarnsOnDuplicateQrels) {
  const auto r = cli({"eval", "--run", (kFixtures / "ties.run").string(),
                      "--qrels", (kFixtures / "duplicates.qrels").string()});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_NE(r.err.find("duplicate judgment"), std::string::npos) << r.err;
}

TEST_F(CliTest, ReportCollectsMetricFiles) {
  ASSERT_EQ(cli({"eval", "--run", (kFixtures / "ideal.run").string(),
                 "--qrels", (kFixtures / "ideal.qrels").string(),
                 "--output-dir", "one", "--name", "ideal-run"})
                .code,
            0);
  ASSERT_EQ(cli({"eval", "--run", (kFixtures / "three.run").string(),
                 "--qrels", (kFixtures / "three.qrels").string(),
                 "--output-dir", "two"})
                .code,
            0);
  const auto r =
      cli({"report", (dir_ / "one" / "metrics.json").string(),
           (dir_ / "two" / "metrics.json").string(), "-o", "summary.txt"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("ideal-run"), std::string::npos);
  EXPECT_NE(r.out.find("three"), std::string::npos);
  EXPECT_EQ(slurp(dir_ / "summary.txt"), r.out);
}

// bench-optim ---------------------------------------------------------------

TEST_F(CliTest, BenchImportReprintsPublishedGain) {
  spit(dir_ / "table.tsv", "model\toptimizer\tmean\tpeak\tstd\tdata_points\n"
                           "MiniLM\tAdamW\t33.09\t40\t1\t100\n"
                           "MiniLM\tLion\t32.21\t40\t1\t100\n"
                           "Same\tadamw\t50\t60\t1\t10\t800\n"
                           "Same\tlion\t50\t60\t1\t10\t800\n");
  const auto r = cli({"bench-optim", "--import",
                      (dir_ / "table.tsv").string(), "--output-dir", "bench"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream lines(r.out);
  std::map<std::string, std::vector<std::string>> lion_rows;
  for (std::string line; std::getline(lines, line);) {
    std::vector<std::string> f;
    std::istringstream cells(line);
    for (std::string c; std::getline(cells, c, '\t');)
      f.push_back(c);
    if (f.size() == 9 && f[1] == "lion")
      lion_rows[f[0]] = f;
  }
  ASSERT_EQ(lion_rows.size(), 2u);
  EXPECT_NEAR(std::stod(lion_rows["MiniLM"][6]), 2.67, 0.02);
  EXPECT_EQ(std::stod(lion_rows["Same"][6]), 0.0);
  EXPECT_EQ(std::stod(lion_rows["Same"][8]), 0.0);
  expect_manifest_complete(dir_ / "bench");
}

TEST_F(CliTest, BenchTrainsBothOptimizers) {
  const auto cfg = minimal_config("epochs = 1\n");
  const auto r = cli({"bench-optim", "-c", cfg.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const fs::path out = dir_ / "runs" / "toy" / "bench";
  const auto table = slurp(out / "optimizer-benchmark.tsv");
  EXPECT_NE(table.find("toy\tadamw"), std::string::npos);
  EXPECT_NE(table.find("toy\tlion"), std::string::npos);
  expect_manifest_complete(out);
}

TEST_F(CliTest, BenchRejectsBadImport) {
  spit(dir_ / "table.tsv", "model\toptimizer\tmean\tpeak\tstd\tdata_points\n"
                           "m\tsgd\t1\t1\t1\t1\n");
  EXPECT_EQ(cli({"bench-optim", "--import", (dir_ / "table.tsv").string()})
                .code,
            kExitParse);
}

// synthetic-data ------------------------------------------------------------

TEST_F(CliTest, SyntheticDataIsSeededAndComplete) {
  const std::vector<std::string> small{"--triplets", "50",  "--queries",
                                       "3",          "--candidates", "6"};
  auto args = std::vector<std::string>{"synthetic-data", "--output-dir", "s1"};
  args.insert(args.end(), small.begin(), small.end());
  ASSERT_EQ(cli(args).code, kExitOk);
  args[2] = "s2";
  ASSERT_EQ(cli(args).code, kExitOk);
  for (const char *f : {"triplets.tsv", "queries.tsv", "passages.tsv",
                        "candidates.run", "qrels.txt", "train.ini"})
    EXPECT_EQ(slurp(dir_ / "s1" / f), slurp(dir_ / "s2" / f)) << f;
  expect_manifest_complete(dir_ / "s1");
  std::ifstream run(dir_ / "s1" / "candidates.run");
  EXPECT_EQ(parse_run(run).size(), 18u);
  args[2] = "s3";
  args.insert(args.end(), {"--seed", "99"});
  ASSERT_EQ(cli(args).code, kExitOk);
  EXPECT_NE(slurp(dir_ / "s1" / "triplets.tsv"),
            slurp(dir_ / "s3" / "triplets.tsv"));
}

} // namespace
} // namespace lionrank::cli
