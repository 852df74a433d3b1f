// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "lionrank/checkpoint.hpp"
#include "lionrank/ir_eval.hpp"
#include "lionrank/model.hpp"
#include "lionrank/synthetic.hpp"
#include "lionrank/text_io.hpp"
#include "lionrank/train.hpp"
#include "run_config.hpp"

namespace lionrank::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::ifstream open_input(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw InputError("cannot open " + path.string());
  return in;
}

// Runs `parse` on the file and tags parse errors with the file name.
template <class F> auto parse_file(const fs::path &path, F parse) {
  auto in = open_input(path);
  try {
    return parse(in);
  } catch (const ParseError &e) {
    throw InputParseError(path.string() + ": " + e.what());
  }
}

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string corpus_tsv(const std::unordered_map<std::string, std::string> &m) {
  std::map<std::string, std::string> sorted(m.begin(), m.end());
  std::string out;
  for (const auto &[id, text] : sorted)
    out += id + '\t' + text + '\n';
  return out;
}

json resolved_config(const RunConfig &cfg, const CrossEncoderConfig &model) {
  json optimizers = json::array();
  for (auto k : cfg.optimizers)
    optimizers.push_back(to_string(k));
  const auto &t = cfg.train;
  return {
      {"data", {{"triplets", cfg.triplets.string()}}},
      {"model",
       {{"name", cfg.model_name},
        {"vocab_size", model.vocab_size},
        {"d_model", model.d_model},
        {"n_layers", model.n_layers},
        {"n_heads", model.n_heads},
        {"d_ff", model.d_ff},
        {"max_len", model.max_len},
        {"seed", model.seed}}},
      {"train",
       {{"optimizers", optimizers},
        {"batch_size", t.batch_size},
        {"epochs", t.epochs},
        {"seed", t.seed},
        {"schedule", to_string(t.schedule.kind)},
        {"warmup_ratio", t.schedule.warmup_ratio},
        {"shuffle", t.shuffle},
        {"no_decay", t.no_decay}}},
      {"lion",
       {{"lr", cfg.lion_lr},
        {"beta1", t.lion.beta1},
        {"beta2", t.lion.beta2},
        {"weight_decay", t.lion.weight_decay}}},
      {"adamw",
       {{"lr", cfg.adamw_lr},
        {"beta1", t.adamw.beta1},
        {"beta2", t.adamw.beta2},
        {"eps", t.adamw.eps},
        {"weight_decay", t.adamw.weight_decay}}},
      {"output", {{"dir", cfg.output_dir.string()}}},
  };
}

// Data shared by train and bench-optim.
struct Prepared {
  RunConfig cfg;
  std::vector<TrainPair> pairs;
  Vocab vocab;
  CrossEncoderConfig model;
};

Prepared prepare(const fs::path &config_path,
                 const std::vector<std::string> &overrides, std::ostream &err) {
  Prepared p;
  if (!fs::is_regular_file(config_path))
    throw InputError("cannot open config " + config_path.string());
  p.cfg = load_run_config(config_path, overrides);
  const auto triplets = parse_file(p.cfg.triplets, read_triplets);
  auto conv = triplets_to_pairs(triplets);
  if (conv.skipped)
    err << "warning: skipped " << conv.skipped
        << " triplet(s) with an empty field\n";
  if (conv.pairs.empty())
    throw InputError(p.cfg.triplets.string() + ": no usable triplets");
  p.pairs = std::move(conv.pairs);
  std::vector<std::string> texts;
  texts.reserve(p.pairs.size() * 2);
  for (const auto &pair : p.pairs) {
    texts.push_back(pair.query);
    texts.push_back(pair.passage);
  }
  p.vocab = Vocab::from_texts(texts);
  p.model = p.cfg.model;
  p.model.vocab_size = p.vocab.size();
  p.model.validate();
  return p;
}

BenchRow bench_row(const std::string &model, OptimizerKind kind,
                   const ResourceStats &s) {
  return {model,          to_string(kind), s.mean_step_ms,
          s.peak_step_ms, s.std_step_ms,   s.n_steps,
          s.optimizer_state_bytes};
}

std::string gain_text(double baseline, double candidate) {
  if (!(baseline > 0.0))
    return "-";
  const double g = efficiency_gain(baseline, candidate);
  return (g >= 0.0 ? "+" : "") + format_fixed(g, 2);
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::vector<std::string> set;
  std::string optimizer, triplets, output_dir, schedule;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr, warmup_ratio;

  std::vector<std::string> overrides() const {
    std::vector<std::string> o = set;
    auto num = [](auto v) {
      std::ostringstream s;
      s.precision(17);
      s << v;
      return s.str();
    };
    if (!optimizer.empty())
      o.push_back("train.optimizers=" + optimizer);
    if (!triplets.empty())
      o.push_back("data.triplets=" + fs::absolute(triplets).string());
    if (!output_dir.empty())
      o.push_back("output.dir=" + output_dir);
    if (!schedule.empty())
      o.push_back("train.schedule=" + schedule);
    if (epochs)
      o.push_back("train.epochs=" + num(*epochs));
    if (batch_size)
      o.push_back("train.batch_size=" + num(*batch_size));
    if (seed)
      o.push_back("train.seed=" + num(*seed));
    if (warmup_ratio)
      o.push_back("train.warmup_ratio=" + num(*warmup_ratio));
    if (lr) {
      o.push_back("lion.lr=" + num(*lr));
      o.push_back("adamw.lr=" + num(*lr));
    }
    return o;
  }
};

void add_train_flags(CLI::App *cmd, TrainArgs &a) {
  cmd->add_option("-c,--config", a.config, "INI run configuration")
      ->required();
  cmd->add_option("--set", a.set, "Override, e.g. train.epochs=1");
  cmd->add_option("--optimizer", a.optimizer, "lion, adamw or lion,adamw");
  cmd->add_option("--triplets", a.triplets, "Training triplets TSV");
  cmd->add_option("--output-dir", a.output_dir, "Output directory");
  cmd->add_option("--schedule", a.schedule, "constant or cosine");
  cmd->add_option("--epochs", a.epochs);
  cmd->add_option("--batch-size", a.batch_size);
  cmd->add_option("--seed", a.seed, "Shuffle seed");
  cmd->add_option("--lr", a.lr, "Learning rate for every optimizer");
  cmd->add_option("--warmup-ratio", a.warmup_ratio);
}

int cmd_train(const TrainArgs &args, std::ostream &out, std::ostream &err) {
  const std::string started = utc_now();
  auto p = prepare(args.config, args.overrides(), err);
  Manifest manifest(p.cfg.output_dir, "train");
  manifest.set("started_at", started);

  std::vector<BenchRow> rows;
  for (auto kind : p.cfg.optimizers) {
    auto model = CrossEncoder::init(p.model);
    const auto tc = p.cfg.train_config_for(kind);
    const auto result = run_training(model, p.vocab, p.pairs, tc);
    const std::string run = p.cfg.model_name + "-" + to_string(kind);

    for (const auto &ck : result.checkpoints)
      manifest.add(fs::path("checkpoints") / (ck.name + ".ckpt"),
                   "checkpoint", ck.bytes);
    std::ostringstream log;
    write_loss_log(log, result.log);
    manifest.add(fs::path("logs") / (run + ".loss.tsv"), "loss_log",
                 log.str());
    manifest.add(fs::path("reports") / (run + ".resources.txt"), "resources",
                 format_resource_report(run, kind, result.resources));
    rows.push_back(bench_row(p.cfg.model_name, kind, result.resources));

    out << run << ": " << result.total_steps << " steps, epoch mean BCE";
    for (double l : result.epoch_mean_loss)
      out << ' ' << format_fixed(l, 6);
    out << ", mean step " << format_fixed(result.resources.mean_step_ms, 4)
        << " ms\n";
  }
  if (rows.size() > 1)
    manifest.add("reports/optimizer-comparison.tsv", "comparison",
                 format_bench_table(rows));

  manifest.set("config", resolved_config(p.cfg, p.model));
  manifest.set("config_file", ptree_to_json(p.cfg.effective));
  manifest.set("seed", p.cfg.train.seed);
  manifest.set("n_pairs", p.pairs.size());
  manifest.set("finished_at", utc_now());
  out << "manifest: " << manifest.finish().string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  TrainArgs train;
  std::string import;
};

int cmd_bench(const BenchArgs &args, std::ostream &out, std::ostream &err) {
  const std::string started = utc_now();
  std::vector<BenchRow> rows;
  std::optional<Manifest> manifest;

  if (!args.import.empty()) {
    rows = parse_file(args.import, read_bench_rows);
    if (!args.train.output_dir.empty())
      manifest.emplace(resolve_output(args.train.output_dir), "bench-optim");
    if (manifest)
      manifest->set("import", fs::absolute(args.import).string());
  } else {
    if (args.train.config.empty())
      throw ConfigError("bench-optim: --config or --import required");
    auto overrides = args.train.overrides();
    auto p = prepare(args.train.config, overrides, err);
    const fs::path dir = args.train.output_dir.empty()
                             ? p.cfg.output_dir / "bench"
                             : p.cfg.output_dir;
    manifest.emplace(dir, "bench-optim");
    for (auto kind : {OptimizerKind::adamw, OptimizerKind::lion}) {
      auto model = CrossEncoder::init(p.model);
      auto tc = p.cfg.train_config_for(kind);
      tc.keep_checkpoints = false;
      const auto result = run_training(model, p.vocab, p.pairs, tc);
      rows.push_back(bench_row(p.cfg.model_name, kind, result.resources));
    }
    manifest->set("config", resolved_config(p.cfg, p.model));
    manifest->set("seed", p.cfg.train.seed);
  }

  const std::string table = format_bench_table(rows);
  out << table;
  if (manifest) {
    manifest->set("started_at", started);
    manifest->add("optimizer-benchmark.tsv", "comparison", table);
    manifest->set("finished_at", utc_now());
    out << "manifest: " << manifest->finish().string() << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct RerankArgs {
  std::string checkpoint, queries, passages, candidates, output;
};

int cmd_rerank(const RerankArgs &a, std::ostream &out, std::ostream &) {
  std::string bytes;
  try {
    bytes = read_file(a.checkpoint);
  } catch (const std::runtime_error &e) {
    throw InputError(e.what());
  }
  Checkpoint ck = [&] {
    try {
      return decode_checkpoint(bytes);
    } catch (const FormatError &e) {
      throw InputParseError(a.checkpoint + ": " + e.what());
    }
  }();
  const auto queries = parse_file(a.queries, read_tsv_corpus);
  const auto passages = parse_file(a.passages, read_tsv_corpus);
  const auto candidates = parse_file(a.candidates, parse_run);
  Run reranked;
  try {
    reranked = rerank(ck.model, ck.vocab, queries, passages, candidates,
                      ck.name);
  } catch (const ResolveError &e) {
    throw InputError(e.what());
  }
  std::ostringstream text;
  write_run(text, reranked);
  const fs::path dest = resolve_output(a.output);
  write_file(dest, text.str());
  out << "reranked " << reranked.size() << " candidates with " << ck.name
      << " -> " << dest.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string run, qrels, output_dir, name, gain = "linear";
  std::size_t k = 10;
  int binarize_at = 1;
};

int cmd_eval(const EvalArgs &a, std::ostream &out, std::ostream &err) {
  EvalOptions opts;
  opts.k = a.k;
  opts.binarize_at = a.binarize_at;
  if (a.gain == "linear")
    opts.gain = Gain::linear;
  else if (a.gain == "exponential")
    opts.gain = Gain::exponential;
  else
    throw ConfigError("eval: --gain must be linear or exponential");
  opts.validate();

  const auto run = parse_file(a.run, parse_run);
  auto parsed = parse_file(a.qrels, parse_qrels);
  for (const auto &w : parsed.warnings)
    err << "warning: " << a.qrels << ": " << w << '\n';
  const auto report = evaluate(run, parsed.qrels, opts);
  if (!report.skipped_queries.empty())
    err << "warning: " << report.skipped_queries.size()
        << " run quer" << (report.skipped_queries.size() == 1 ? "y" : "ies")
        << " without judgments skipped\n";

  const std::string table = format_report_table(report);
  out << table;
  if (!a.output_dir.empty()) {
    Manifest manifest(resolve_output(a.output_dir), "eval");
    json j = json::parse(report_to_json(report));
    j["run"] = a.name.empty() ? fs::path(a.run).stem().string() : a.name;
    manifest.add("metrics.txt", "metrics_table", table);
    manifest.add("metrics.json", "metrics", j.dump(2) + "\n");
    manifest.set("inputs", {{"run", fs::absolute(a.run).string()},
                            {"qrels", fs::absolute(a.qrels).string()}});
    manifest.set("finished_at", utc_now());
    manifest.finish();
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string output;
};

int cmd_report(const ReportArgs &a, std::ostream &out, std::ostream &) {
  std::vector<std::vector<std::string>> rows;
  std::optional<std::size_t> k;
  for (const auto &path : a.inputs) {
    auto in = open_input(path);
    json j;
    try {
      j = json::parse(in);
      const auto this_k = j.at("options").at("k").get<std::size_t>();
      if (k && *k != this_k)
        throw ConfigError("report: metric files use different cutoffs");
      k = this_k;
      std::vector<std::string> row{
          j.contains("run") ? j["run"].get<std::string>()
                            : fs::path(path).stem().string()};
      for (Metric m : kAllMetrics) {
        const auto &v = j.at("aggregate").at(metric_key(m, this_k));
        row.push_back(v.is_null() ? "-" : format_fixed(v.get<double>(), 4));
      }
      rows.push_back(std::move(row));
    } catch (const json::exception &e) {
      throw InputParseError(path + ": " + e.what());
    }
  }
  std::vector<std::string> header{"run"};
  for (Metric m : kAllMetrics)
    header.push_back(metric_label(m, k.value_or(10)));

  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto &r : rows)
      width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream table;
  auto emit = [&](const std::vector<std::string> &r) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c)
        table << "  ";
      if (c == 0)
        table << r[c] << std::string(width[c] - r[c].size(), ' ');
      else
        table << std::string(width[c] - r[c].size(), ' ') << r[c];
    }
    table << '\n';
  };
  emit(header);
  for (const auto &r : rows)
    emit(r);
  out << table.str();
  if (!a.output.empty())
    write_file(resolve_output(a.output), table.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SyntheticArgs {
  std::string output_dir;
  SyntheticSpec spec;
};

int cmd_synthetic(const SyntheticArgs &a, std::ostream &out, std::ostream &) {
  try {
    a.spec.validate();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(e.what());
  }
  const auto data = make_synthetic(a.spec);
  Manifest manifest(resolve_output(a.output_dir), "synthetic-data");

  std::string triplets;
  for (const auto &t : data.triplets)
    triplets += t.query + '\t' + t.positive + '\t' + t.negative + '\n';
  manifest.add("triplets.tsv", "triplets", triplets);
  manifest.add("queries.tsv", "queries", corpus_tsv(data.queries));
  manifest.add("passages.tsv", "passages", corpus_tsv(data.passages));
  std::ostringstream run, qrels;
  write_run(run, data.candidates);
  write_qrels(qrels, data.qrels);
  manifest.add("candidates.run", "run", run.str());
  manifest.add("qrels.txt", "qrels", qrels.str());
  manifest.add("train.ini", "config",
               "[data]\n"
               "triplets = triplets.tsv\n\n"
               "[model]\n"
               "name = synthetic\n"
               "d_model = 32\n"
               "n_layers = 1\n"
               "n_heads = 2\n"
               "d_ff = 64\n"
               "max_len = 16\n"
               "seed = 12\n\n"
               "[train]\n"
               "optimizers = lion,adamw\n"
               "batch_size = 64\n"
               "epochs = 3\n"
               "seed = 12\n"
               "schedule = constant\n\n"
               "[lion]\n"
               "lr = 2e-4\n\n"
               "[adamw]\n"
               "lr = 2e-4\n");
  manifest.set("seed", a.spec.seed);
  manifest.set("spec", {{"vocab_words", a.spec.vocab_words},
                        {"n_triplets", a.spec.n_triplets},
                        {"n_eval_queries", a.spec.n_eval_queries},
                        {"candidates_per_query", a.spec.candidates_per_query},
                        {"relevant_per_query", a.spec.relevant_per_query}});
  manifest.set("finished_at", utc_now());
  out << "wrote " << data.triplets.size() << " triplets, "
      << data.queries.size() << " queries, " << data.candidates.size()
      << " candidates -> " << manifest.finish().parent_path().string()
      << '\n';
  return kExitOk;
}

} // namespace

// ---------------------------------------------------------------------------

Manifest::Manifest(fs::path root, std::string command)
    : root_(std::move(root)) {
  doc_["format_version"] = kManifestVersion;
  doc_["command"] = std::move(command);
}

void Manifest::add(const fs::path &relative, const std::string &kind,
                   std::string_view bytes) {
  write_file(root_ / relative, bytes);
  artifacts_.push_back({{"path", relative.generic_string()},
                        {"kind", kind},
                        {"bytes", bytes.size()}});
}

void Manifest::set(const std::string &key, json value) {
  doc_[key] = std::move(value);
}

fs::path Manifest::finish() {
  doc_["output_dir"] = fs::absolute(root_).string();
  doc_["artifacts"] = artifacts_;
  const fs::path path = root_ / "manifest.json";
  write_file(path, doc_.dump(2) + "\n");
  return path;
}

std::vector<BenchRow> read_bench_rows(std::istream &in) {
  std::vector<BenchRow> rows;
  std::string raw;
  std::size_t line_no = 0;
  bool header = true;
  auto number = [&](const std::string &field, auto &dest) {
    const char *first = field.data();
    const char *last = first + field.size();
    auto [ptr, ec] = std::from_chars(first, last, dest);
    if (ec != std::errc() || ptr != last || field.empty())
      throw ParseError(line_no, "bad number '" + field + "'");
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = chomp(raw);
    if (line.find_first_not_of(" \t") == std::string_view::npos)
      continue;
    auto f = split_on(line, '\t');
    if (header) {
      header = false;
      if (f.size() < 6 || to_lower(f[0]) != "model")
        throw ParseError(line_no, "expected header model<TAB>optimizer<TAB>"
                                  "mean<TAB>peak<TAB>std<TAB>data_points");
      continue;
    }
    if (f.size() != 6 && f.size() != 7)
      throw ParseError(line_no, "expected 6 or 7 fields, got " +
                                    std::to_string(f.size()));
    BenchRow r;
    r.model = f[0];
    r.optimizer = to_lower(f[1]);
    if (r.optimizer != "lion" && r.optimizer != "adamw")
      throw ParseError(line_no, "unknown optimizer '" + f[1] + "'");
    number(f[2], r.mean);
    number(f[3], r.peak);
    number(f[4], r.std_dev);
    number(f[5], r.data_points);
    if (f.size() == 7 && f[6] != "-") {
      std::size_t b = 0;
      number(f[6], b);
      r.state_bytes = b;
    }
    rows.push_back(std::move(r));
  }
  if (header)
    throw ParseError(line_no, "empty benchmark table");
  return rows;
}

std::string format_bench_table(std::span<const BenchRow> rows) {
  std::vector<std::string> models;
  for (const auto &r : rows)
    if (std::find(models.begin(), models.end(), r.model) == models.end())
      models.push_back(r.model);

  std::ostringstream out;
  out << "model\toptimizer\tmean\tpeak\tstd\tdata_points\tefficiency_gain_pct"
         "\tstate_bytes\tstate_bytes_gain_pct\n";
  for (const auto &model : models) {
    const BenchRow *adamw = nullptr;
    const BenchRow *lion = nullptr;
    for (const auto &r : rows) {
      if (r.model != model)
        continue;
      (r.optimizer == "adamw" ? adamw : lion) = &r;
    }
    for (const BenchRow *r : {adamw, lion}) {
      if (!r)
        continue;
      std::string gain = "-", state_gain = "-";
      if (r == lion && adamw) {
        gain = gain_text(adamw->mean, lion->mean);
        if (adamw->state_bytes && lion->state_bytes)
          state_gain = gain_text(static_cast<double>(*adamw->state_bytes),
                                 static_cast<double>(*lion->state_bytes));
      }
      out << r->model << '\t' << r->optimizer << '\t'
          << format_general(r->mean, 6) << '\t' << format_general(r->peak, 6)
          << '\t' << format_general(r->std_dev, 6) << '\t' << r->data_points
          << '\t' << gain << '\t'
          << (r->state_bytes ? std::to_string(*r->state_bytes) : "-") << '\t'
          << state_gain << '\n';
    }
  }
  return out.str();
}

int run_cli(const std::vector<std::string> &args, std::ostream &out,
            std::ostream &err) {
  CLI::App app{"lionrank: cross-encoder reranking with Lion and AdamW"};
  app.name("lionrank");
  app.require_subcommand(1);
  std::function<int()> action;

  TrainArgs train;
  auto *train_cmd = app.add_subcommand("train", "Train from an INI config");
  add_train_flags(train_cmd, train);
  train_cmd->callback([&] { action = [&] { return cmd_train(train, out, err); }; });

  BenchArgs bench;
  auto *bench_cmd = app.add_subcommand(
      "bench-optim", "Compare Lion and AdamW step time and state bytes");
  add_train_flags(bench_cmd, bench.train);
  bench_cmd->get_option("--config")->required(false);
  bench_cmd->add_option("--import", bench.import,
                        "Tabulate measured means from a TSV instead");
  bench_cmd->callback([&] { action = [&] { return cmd_bench(bench, out, err); }; });

  RerankArgs rr;
  auto *rerank_cmd =
      app.add_subcommand("rerank", "Rescore a candidate run with a checkpoint");
  rerank_cmd->add_option("--checkpoint", rr.checkpoint)->required();
  rerank_cmd->add_option("--queries", rr.queries, "id<TAB>text")->required();
  rerank_cmd->add_option("--passages", rr.passages, "id<TAB>text")->required();
  rerank_cmd->add_option("--candidates", rr.candidates, "TREC run")->required();
  rerank_cmd->add_option("-o,--output", rr.output, "Reranked run")->required();
  rerank_cmd->callback([&] { action = [&] { return cmd_rerank(rr, out, err); }; });

  EvalArgs ev;
  auto *eval_cmd = app.add_subcommand("eval", "Score a run against qrels");
  eval_cmd->add_option("--run", ev.run)->required();
  eval_cmd->add_option("--qrels", ev.qrels)->required();
  eval_cmd->add_option("-k,--cutoff", ev.k, "Rank cutoff")->capture_default_str();
  eval_cmd->add_option("--binarize-at", ev.binarize_at,
                       "Minimum grade counted as relevant")
      ->capture_default_str();
  eval_cmd->add_option("--gain", ev.gain, "linear or exponential")
      ->capture_default_str();
  eval_cmd->add_option("--output-dir", ev.output_dir);
  eval_cmd->add_option("--name", ev.name, "Run label in metrics.json");
  eval_cmd->callback([&] { action = [&] { return cmd_eval(ev, out, err); }; });

  ReportArgs rep;
  auto *report_cmd = app.add_subcommand(
      "report", "Tabulate metrics.json files from eval --output-dir");
  report_cmd->add_option("inputs", rep.inputs)->required();
  report_cmd->add_option("-o,--output", rep.output);
  report_cmd->callback([&] { action = [&] { return cmd_report(rep, out, err); }; });

  SyntheticArgs syn;
  auto *syn_cmd = app.add_subcommand(
      "synthetic-data", "Write a seeded separable corpus with qrels");
  syn_cmd->add_option("--output-dir", syn.output_dir)->required();
  syn_cmd->add_option("--seed", syn.spec.seed)->capture_default_str();
  syn_cmd->add_option("--triplets", syn.spec.n_triplets)->capture_default_str();
  syn_cmd->add_option("--queries", syn.spec.n_eval_queries)
      ->capture_default_str();
  syn_cmd->add_option("--candidates", syn.spec.candidates_per_query)
      ->capture_default_str();
  syn_cmd->add_option("--relevant", syn.spec.relevant_per_query)
      ->capture_default_str();
  syn_cmd->add_option("--vocab-words", syn.spec.vocab_words)
      ->capture_default_str();
  syn_cmd->callback([&] { action = [&] { return cmd_synthetic(syn, out, err); }; });

  std::vector<std::string> argv_store = args;
  std::reverse(argv_store.begin(), argv_store.end());
  try {
    app.parse(argv_store);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    return action();
  } catch (const ConfigError &e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument &e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InputParseError &e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const ParseError &e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const FormatError &e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const NumericError &e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const InputError &e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitInternal;
  }
}

} // namespace lionrank::cli
