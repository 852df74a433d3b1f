// SPDX-License-Identifier: Apache-2.0

#include "run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <map>
#include <set>

#include <boost/property_tree/ini_parser.hpp>

#include "lionrank/text_io.hpp"

namespace lionrank::cli {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>> &known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"data", {"triplets"}},
      {"model",
       {"name", "d_model", "n_layers", "n_heads", "d_ff", "max_len", "seed"}},
      {"train",
       {"optimizers", "batch_size", "epochs", "seed", "schedule",
        "warmup_ratio", "shuffle", "no_decay"}},
      {"lion", {"lr", "beta1", "beta2", "weight_decay"}},
      {"adamw", {"lr", "beta1", "beta2", "eps", "weight_decay"}},
      {"output", {"dir"}},
  };
  return keys;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_list(const std::string &value) {
  std::vector<std::string> out;
  for (auto &part : split_on(value, ','))
    if (auto t = trim(part); !t.empty())
      out.push_back(std::move(t));
  return out;
}

class Section {
public:
  Section(const pt::ptree &tree, std::string name)
      : node_(tree.get_child_optional(name)), name_(std::move(name)) {}

  std::optional<std::string> raw(const std::string &key) const {
    if (!node_)
      return std::nullopt;
    auto v = node_->get_optional<std::string>(key);
    if (!v)
      return std::nullopt;
    return trim(*v);
  }

  std::string text(const std::string &key, std::string fallback) const {
    return raw(key).value_or(std::move(fallback));
  }

  template <class T> T number(const std::string &key, T fallback) const {
    const auto v = raw(key);
    if (!v)
      return fallback;
    T out{};
    const char *first = v->data();
    const char *last = first + v->size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last || v->empty())
      fail(key, "'" + *v + "' is not a valid number");
    return out;
  }

  bool flag(const std::string &key, bool fallback) const {
    const auto v = raw(key);
    if (!v)
      return fallback;
    std::string s = *v;
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "yes" || s == "1" || s == "on")
      return true;
    if (s == "false" || s == "no" || s == "0" || s == "off")
      return false;
    fail(key, "'" + *v + "' is not a boolean");
  }

  [[noreturn]] void fail(const std::string &key, const std::string &msg) const {
    throw ConfigError("config [" + name_ + "] " + key + ": " + msg);
  }

private:
  boost::optional<const pt::ptree &> node_;
  std::string name_;
};

void check_known(const pt::ptree &tree) {
  const auto &keys = known_keys();
  for (const auto &[section, node] : tree) {
    const auto it = keys.find(section);
    if (it == keys.end())
      throw ConfigError("config: unknown section [" + section + "]");
    if (!node.data().empty())
      throw ConfigError("config: stray value outside a section: " + section);
    for (const auto &[key, leaf] : node) {
      if (!it->second.count(key))
        throw ConfigError("config [" + section + "]: unknown key '" + key +
                          "'");
    }
  }
}

} // namespace

TrainConfig RunConfig::train_config_for(OptimizerKind kind) const {
  TrainConfig tc = train;
  tc.optimizer = kind;
  tc.schedule.base_lr = lr_for(kind);
  tc.model_name = model_name;
  return tc;
}

RunConfig parse_run_config(const pt::ptree &tree,
                           const std::filesystem::path &base_dir) {
  check_known(tree);
  RunConfig cfg;
  cfg.effective = tree;

  const Section data(tree, "data");
  const auto triplets = data.raw("triplets");
  if (!triplets || triplets->empty())
    throw ConfigError("config [data] triplets: required");
  cfg.triplets = std::filesystem::path(*triplets);
  if (cfg.triplets.is_relative())
    cfg.triplets = base_dir / cfg.triplets;

  const Section model(tree, "model");
  cfg.model_name = model.text("name", cfg.model_name);
  if (cfg.model_name.empty() ||
      cfg.model_name.find_first_of("/\\ \t") != std::string::npos)
    model.fail("name", "must be non-empty without spaces or slashes");
  cfg.model.d_model = model.number<std::size_t>("d_model", cfg.model.d_model);
  cfg.model.n_layers =
      model.number<std::size_t>("n_layers", cfg.model.n_layers);
  cfg.model.n_heads = model.number<std::size_t>("n_heads", cfg.model.n_heads);
  cfg.model.d_ff = model.number<std::size_t>("d_ff", cfg.model.d_ff);
  cfg.model.max_len = model.number<std::size_t>("max_len", cfg.model.max_len);
  cfg.model.seed = model.number<std::uint64_t>("seed", cfg.model.seed);

  const Section train(tree, "train");
  if (const auto opts = train.raw("optimizers")) {
    cfg.optimizers.clear();
    for (const auto &name : split_list(*opts)) {
      try {
        const auto kind = parse_optimizer_kind(name);
        if (std::find(cfg.optimizers.begin(), cfg.optimizers.end(), kind) ==
            cfg.optimizers.end())
          cfg.optimizers.push_back(kind);
      } catch (const std::invalid_argument &e) {
        train.fail("optimizers", e.what());
      }
    }
    if (cfg.optimizers.empty())
      train.fail("optimizers", "at least one optimizer required");
  }
  auto &tc = cfg.train;
  tc.batch_size = train.number<std::size_t>("batch_size", tc.batch_size);
  tc.epochs = train.number<std::size_t>("epochs", tc.epochs);
  tc.seed = train.number<std::uint64_t>("seed", tc.seed);
  if (const auto s = train.raw("schedule")) {
    try {
      tc.schedule.kind = parse_schedule_kind(*s);
    } catch (const std::invalid_argument &e) {
      train.fail("schedule", e.what());
    }
  }
  tc.schedule.warmup_ratio =
      train.number<double>("warmup_ratio", tc.schedule.warmup_ratio);
  tc.shuffle = train.flag("shuffle", tc.shuffle);
  if (const auto nd = train.raw("no_decay"))
    tc.no_decay = split_list(*nd);

  const Section lion(tree, "lion");
  cfg.lion_lr = lion.number<double>("lr", cfg.lion_lr);
  tc.lion.beta1 = lion.number<double>("beta1", tc.lion.beta1);
  tc.lion.beta2 = lion.number<double>("beta2", tc.lion.beta2);
  tc.lion.weight_decay =
      lion.number<double>("weight_decay", tc.lion.weight_decay);

  const Section adamw(tree, "adamw");
  cfg.adamw_lr = adamw.number<double>("lr", cfg.adamw_lr);
  tc.adamw.beta1 = adamw.number<double>("beta1", tc.adamw.beta1);
  tc.adamw.beta2 = adamw.number<double>("beta2", tc.adamw.beta2);
  tc.adamw.eps = adamw.number<double>("eps", tc.adamw.eps);
  tc.adamw.weight_decay =
      adamw.number<double>("weight_decay", tc.adamw.weight_decay);

  const Section output(tree, "output");
  std::string dir = output.text("dir", "runs/{name}");
  for (auto at = dir.find("{name}"); at != std::string::npos;
       at = dir.find("{name}", at + cfg.model_name.size()))
    dir.replace(at, 6, cfg.model_name);
  cfg.output_dir = resolve_output(dir);

  if (!(cfg.lion_lr > 0.0))
    lion.fail("lr", "must be > 0");
  if (!(cfg.adamw_lr > 0.0))
    adamw.fail("lr", "must be > 0");
  try {
    tc.validate();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path &path,
                          const std::vector<std::string> &overrides) {
  if (!std::filesystem::is_regular_file(path))
    throw ConfigError("config file not found: " + path.string());
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error &e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto &o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq ||
        dot == 0 || dot + 1 == eq)
      throw ConfigError("override '" + o + "': expected section.key=value");
    const std::string section = o.substr(0, dot);
    const std::string key = o.substr(dot + 1, eq - dot - 1);
    // Paths with '.' are not used as separators here.
    tree.put_child(pt::ptree::path_type(section + '\x1f' + key, '\x1f'),
                   pt::ptree(o.substr(eq + 1)));
  }
  auto base = path.parent_path();
  if (base.empty())
    base = ".";
  return parse_run_config(tree, base);
}

std::filesystem::path output_root() {
  if (const char *root = std::getenv(kOutputRootEnv); root && *root)
    return std::filesystem::path(root);
  return std::filesystem::current_path();
}

std::filesystem::path resolve_output(const std::filesystem::path &p) {
  return p.is_absolute() ? p : output_root() / p;
}

nlohmann::json ptree_to_json(const pt::ptree &tree) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto &[key, node] : tree) {
    if (node.empty())
      j[key] = node.data();
    else
      j[key] = ptree_to_json(node);
  }
  return j;
}

} // namespace lionrank::cli
