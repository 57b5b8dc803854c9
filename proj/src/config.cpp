// SPDX-License-Identifier: Apache-2.0
#include "vpiqa/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

#include "json.hpp"
#include "vpiqa/adapter.hpp"
#include "vpiqa/error.hpp"
#include "vpiqa/io.hpp"
#include "vpiqa/toy_scorer.hpp"

namespace vpiqa {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

PromptShape RunConfig::prompt_shape() const {
  PromptShape s;
  s.kind = prompt.kind;
  s.size = prompt.size;
  s.height = backend.height;
  s.width = backend.width;
  return s;
}

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"backend",
       {"name", "url", "timeout", "height", "width", "vocab_size", "vocab_file", "mean", "std", "positive", "negative",
        "positive_ids", "negative_ids", "textual_prompt"}},
      {"data",
       {"dataset_id", "manifest", "train_manifest", "val_manifest", "test_manifest", "mos_lo", "mos_hi",
        "split_policy", "seed", "official_split"}},
      {"prompt", {"kind", "size", "init", "init_epsilon", "init_seed"}},
      {"train",
       {"preset", "batch_size", "lr", "epochs", "lr_schedule", "shuffle_seed", "checkpoint_every", "workers",
        "augment"}},
      {"eval", {"split", "logistic_plcc", "workers"}},
      {"output", {"dir"}},
  };
  return keys;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (const auto& x : items) {
    if (!out.empty()) out += ',';
    if constexpr (std::is_same_v<T, std::string>)
      out += x;
    else if constexpr (std::is_floating_point_v<T>)
      out += fmt(x);
    else
      out += std::to_string(x);
  }
  return out;
}

/// Typed access to one section; records problems instead of throwing.
class Reader {
 public:
  Reader(const pt::ptree& tree, std::vector<std::string>& errors, fs::path base)
      : tree_(tree), errors_(errors), base_(std::move(base)) {}

  std::optional<std::string> str(const std::string& key) const {
    if (auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'))) return trim(*v);
    return std::nullopt;
  }
  bool has(const std::string& key) const { return str(key).has_value(); }

  void error(const std::string& key, const std::string& msg) const { errors_.push_back(key + ": " + msg); }

  template <typename T>
  void integer(const std::string& key, T& into) const {
    const auto v = str(key);
    if (!v) return;
    T parsed{};
    const auto* end = v->data() + v->size();
    const auto [ptr, ec] = std::from_chars(v->data(), end, parsed);
    if (ec != std::errc() || ptr != end)
      error(key, "expected an integer, got '" + *v + "'");
    else
      into = parsed;
  }

  void real(const std::string& key, double& into) const {
    const auto v = str(key);
    if (!v) return;
    if (auto d = parse_real(*v))
      into = *d;
    else
      error(key, "expected a number, got '" + *v + "'");
  }

  void boolean(const std::string& key, bool& into) const {
    const auto v = str(key);
    if (!v) return;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on")
      into = true;
    else if (*v == "false" || *v == "0" || *v == "no" || *v == "off")
      into = false;
    else
      error(key, "expected true or false, got '" + *v + "'");
  }

  void text(const std::string& key, std::string& into) const {
    if (auto v = str(key)) into = *v;
  }

  void path(const std::string& key, std::optional<fs::path>& into, bool must_exist = true) const {
    const auto v = str(key);
    if (!v) return;
    if (v->empty()) {
      into.reset();
      return;
    }
    fs::path p(*v);
    if (p.is_relative()) p = base_ / p;
    p = p.lexically_normal();
    if (must_exist && !fs::exists(p)) error(key, "path does not exist: " + p.string());
    into = p;
  }

  void reals3(const std::string& key, std::array<double, 3>& into) const {
    const auto v = str(key);
    if (!v) return;
    const auto items = split_list(*v);
    if (items.size() != 3) return error(key, "expected 3 comma-separated numbers");
    for (int i = 0; i < 3; ++i) {
      auto d = parse_real(items[i]);
      if (!d) return error(key, "expected a number, got '" + items[i] + "'");
      into[i] = *d;
    }
  }

  void ids(const std::string& key, std::vector<TokenId>& into) const {
    const auto v = str(key);
    if (!v) return;
    into.clear();
    for (const auto& item : split_list(*v)) {
      TokenId id{};
      const auto* end = item.data() + item.size();
      const auto [ptr, ec] = std::from_chars(item.data(), end, id);
      if (ec != std::errc() || ptr != end) return error(key, "expected token ids, got '" + item + "'");
      into.push_back(id);
    }
  }

 private:
  static std::optional<double> parse_real(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return std::nullopt;
    return d;
  }

  const pt::ptree& tree_;
  std::vector<std::string>& errors_;
  fs::path base_;
};

std::vector<LrPhase> parse_schedule(const std::string& text, const Reader& r) {
  std::vector<LrPhase> phases;
  for (const auto& item : split_list(text)) {
    const auto at = item.find('@');
    LrPhase ph;
    char* end = nullptr;
    if (at != std::string::npos) {
      const std::string ep = item.substr(0, at), lr = item.substr(at + 1);
      ph.epochs = static_cast<int>(std::strtol(ep.c_str(), &end, 10));
      const bool ok_ep = !ep.empty() && end == ep.c_str() + ep.size();
      ph.lr = std::strtod(lr.c_str(), &end);
      if (ok_ep && !lr.empty() && end == lr.c_str() + lr.size()) {
        phases.push_back(ph);
        continue;
      }
    }
    r.error("train.lr_schedule", "expected entries like 25@60, got '" + item + "'");
    return {};
  }
  return phases;
}

fs::path resolve_output_dir(const std::string& dir) {
  fs::path p(dir);
  if (p.is_relative()) {
    const char* root = std::getenv(kRunRootEnv);
    p = (root && *root) ? fs::path(root) / p : fs::current_path() / p;
  }
  return p.lexically_normal();
}

Vocabulary load_vocab_file(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_text(path));
    std::map<std::string, std::vector<TokenId>> entries;
    for (const auto& [word, ids] : j.at("tokens").items()) entries[word] = ids.get<std::vector<TokenId>>();
    return Vocabulary(std::move(entries), j.at("size").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("vocab file " + path.string() + ": " + e.what());
  }
}

void check_unknown_keys(const pt::ptree& tree, std::vector<std::string>& errors) {
  const auto& known = known_keys();
  for (const auto& [section, body] : tree) {
    const auto it = known.find(section);
    if (it == known.end()) {
      errors.push_back(section + ": unknown section");
      continue;
    }
    if (!body.data().empty()) errors.push_back(section + ": expected a section, not a value");
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) errors.push_back(section + "." + key + ": unknown key");
      if (!value.empty()) errors.push_back(section + "." + key + ": nested keys are not supported");
    }
  }
}

}  // namespace

RunConfig parse_config(const std::string& text, const fs::path& base_dir, const ConfigOverrides& overrides) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }

  std::vector<std::string> errors;
  for (const auto& [key, value] : overrides) {
    const auto dot = key.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == key.size() || key.find('.', dot + 1) != std::string::npos) {
      errors.push_back(key + ": overrides take the form section.key");
      continue;
    }
    tree.put(pt::ptree::path_type(key, '.'), value);
  }
  check_unknown_keys(tree, errors);

  const Reader r(tree, errors, base_dir);
  RunConfig cfg;

  // backend
  auto& b = cfg.backend;
  r.text("backend.name", b.name);
  r.text("backend.url", b.url);
  r.integer("backend.timeout", b.timeout_seconds);
  r.integer("backend.height", b.height);
  r.integer("backend.width", b.width);
  r.integer("backend.vocab_size", b.vocab_size);
  r.path("backend.vocab_file", b.vocab_file);
  r.reals3("backend.mean", b.normalization.mean);
  r.reals3("backend.std", b.normalization.std);
  if (auto v = r.str("backend.positive")) b.positive_labels = split_list(*v);
  if (auto v = r.str("backend.negative")) b.negative_labels = split_list(*v);
  r.ids("backend.positive_ids", b.positive_ids);
  r.ids("backend.negative_ids", b.negative_ids);
  r.text("backend.textual_prompt", b.textual_prompt);

  if (b.name == "toy") {
    if (b.vocab_size != 4) r.error("backend.vocab_size", "the toy backend has exactly 4 tokens");
    if (b.vocab_file) r.error("backend.vocab_file", "not used by the toy backend");
  } else if (b.name == "http") {
    if (b.url.empty()) r.error("backend.url", "required for the http backend");
    if (b.timeout_seconds <= 0) r.error("backend.timeout", "must be positive");
  } else {
    r.error("backend.name", "expected toy or http, got '" + b.name + "'");
  }
  if (b.height <= 0) r.error("backend.height", "must be positive");
  if (b.width <= 0) r.error("backend.width", "must be positive");
  try {
    b.normalization.validate();
  } catch (const ConfigError& e) {
    r.error("backend.std", e.what());
  }
  if (b.positive_ids.empty() != b.negative_ids.empty())
    r.error("backend.positive_ids", "positive_ids and negative_ids must be given together");

  // data
  auto& d = cfg.data;
  r.text("data.dataset_id", d.dataset_id);
  r.path("data.manifest", d.manifest);
  r.path("data.train_manifest", d.train_manifest);
  r.path("data.val_manifest", d.val_manifest);
  r.path("data.test_manifest", d.test_manifest);
  r.real("data.mos_lo", d.mos_range.lo);
  r.real("data.mos_hi", d.mos_range.hi);
  if (auto v = r.str("data.split_policy")) {
    try {
      d.split.policy = parse_split_policy(*v);
    } catch (const ConfigError& e) {
      r.error("data.split_policy", e.what());
    }
  }
  r.integer("data.seed", d.split.seed);
  r.path("data.official_split", d.split.official_split_file);
  if (!(d.mos_range.hi > d.mos_range.lo)) r.error("data.mos_hi", "must exceed data.mos_lo");
  const bool explicit_sets = d.train_manifest || d.val_manifest || d.test_manifest;
  if (d.manifest && explicit_sets) {
    r.error("data.manifest", "give either manifest or train_manifest/val_manifest, not both");
  } else if (!d.manifest && !explicit_sets) {
    if (!r.has("data.manifest")) r.error("data.manifest", "required (or train_manifest and val_manifest)");
  } else if (explicit_sets && (!d.train_manifest || !d.val_manifest)) {
    if (!d.train_manifest && !r.has("data.train_manifest")) r.error("data.train_manifest", "required");
    if (!d.val_manifest && !r.has("data.val_manifest")) r.error("data.val_manifest", "required");
  }
  if (d.manifest && d.split.policy == SplitPolicy::Official && !d.split.official_split_file &&
      !r.has("data.official_split"))
    r.error("data.official_split", "required by split_policy official");

  // prompt
  auto& p = cfg.prompt;
  bool kind_ok = true;
  if (auto v = r.str("prompt.kind")) {
    try {
      p.kind = parse_prompt_kind(*v);
    } catch (const Error& e) {
      r.error("prompt.kind", e.what());
      kind_ok = false;
    }
  }
  r.integer("prompt.size", p.size);
  if (auto v = r.str("prompt.init")) {
    if (*v == "zeros")
      p.init.kind = InitPolicy::Kind::Zeros;
    else if (*v == "uniform")
      p.init.kind = InitPolicy::Kind::UniformSmall;
    else
      r.error("prompt.init", "expected zeros or uniform, got '" + *v + "'");
  }
  r.real("prompt.init_epsilon", p.init.epsilon);
  r.integer("prompt.init_seed", p.init.seed);
  if (!(p.init.epsilon >= 0.0)) r.error("prompt.init_epsilon", "must be >= 0");
  bool shape_ok = false;
  try {
    cfg.prompt_shape().validate();
    shape_ok = true;
  } catch (const Error& e) {
    if (kind_ok)
      r.error("prompt.size", std::string(e.what()) + " (backend input " + std::to_string(b.height) + "x" +
                                 std::to_string(b.width) + ")");
  }

  // train: preset first, explicit keys on top
  r.text("train.preset", cfg.train_preset);
  if (!cfg.train_preset.empty()) {
    try {
      cfg.train = train_preset(cfg.train_preset, shape_ok ? cfg.prompt_shape() : PromptShape{});
    } catch (const ConfigError& e) {
      r.error("train.preset", e.what());
    }
  }
  auto& t = cfg.train;
  // An explicit lr or epochs replaces a schedule that came from the preset.
  if ((r.has("train.lr") || r.has("train.epochs")) && !r.has("train.lr_schedule")) t.lr_schedule.clear();
  r.integer("train.batch_size", t.batch_size);
  r.real("train.lr", t.lr);
  r.integer("train.epochs", t.epochs);
  if (auto v = r.str("train.lr_schedule")) t.lr_schedule = parse_schedule(*v, r);
  r.integer("train.shuffle_seed", t.shuffle_seed);
  r.integer("train.checkpoint_every", t.checkpoint_every);
  r.integer("train.workers", t.workers);
  r.boolean("train.augment", t.augment);
  try {
    t.validate();
  } catch (const ConfigError& e) {
    errors.push_back(e.what());
  }

  // eval
  r.text("eval.split", cfg.eval.split);
  r.boolean("eval.logistic_plcc", cfg.eval.logistic_plcc);
  r.integer("eval.workers", cfg.eval.workers);
  if (cfg.eval.split != "train" && cfg.eval.split != "val" && cfg.eval.split != "test")
    r.error("eval.split", "expected train, val or test");
  if (cfg.eval.workers == 0) r.error("eval.workers", "must be >= 1");

  // output
  std::string out = r.str("output.dir").value_or("");
  if (out.empty()) out = "runs/" + (d.dataset_id.empty() ? std::string("run") : d.dataset_id);
  cfg.output_dir = resolve_output_dir(out);

  // token sets, once the backend keys themselves are sane
  if (errors.empty()) {
    try {
      (void)resolve_backend(cfg);
    } catch (const Error& e) {
      r.error("backend.positive", e.what());
    }
  }

  if (!errors.empty()) {
    std::string msg = "invalid configuration (" + std::to_string(errors.size()) + " problem" +
                      (errors.size() == 1 ? "" : "s") + "):";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

RunConfig load_config(const fs::path& path, const ConfigOverrides& overrides) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  const auto base = fs::absolute(path).parent_path();
  return parse_config(read_file_text(path), base, overrides);
}

BackendConfig resolve_backend(const RunConfig& config, std::vector<std::string>* warnings) {
  const auto& b = config.backend;
  BackendConfig out;
  out.name = b.name;
  out.input_height = b.height;
  out.input_width = b.width;
  out.textual_prompt = b.textual_prompt;
  out.normalization = b.normalization;

  std::optional<Vocabulary> vocab;
  if (b.name == "toy")
    vocab = ToyScorer::vocabulary();
  else if (b.vocab_file)
    vocab = load_vocab_file(*b.vocab_file);
  out.vocab_size = vocab ? vocab->size() : b.vocab_size;

  if (!b.positive_ids.empty()) {
    out.token_sets.positive = b.positive_ids;
    out.token_sets.negative = b.negative_ids;
    if (b.positive_labels.size() == b.positive_ids.size())
      for (std::size_t i = 0; i < b.positive_ids.size(); ++i)
        out.token_sets.labels[b.positive_ids[i]] = b.positive_labels[i];
    if (b.negative_labels.size() == b.negative_ids.size())
      for (std::size_t i = 0; i < b.negative_ids.size(); ++i)
        out.token_sets.labels[b.negative_ids[i]] = b.negative_labels[i];
    out.token_sets.validate(out.vocab_size);
  } else {
    if (!vocab) throw ConfigError("the http backend needs vocab_file or explicit positive_ids/negative_ids");
    out.token_sets = resolve_token_sets(b.positive_labels, b.negative_labels, *vocab, warnings);
  }
  out.validate();
  return out;
}

std::unique_ptr<FrozenScorer> make_scorer(const BackendConfig& backend, const RunConfig& config) {
  if (backend.name == "toy") return std::make_unique<ToyScorer>(backend);
  if (backend.name == "http")
    return std::make_unique<HttpScorer>(backend, config.backend.url, config.backend.timeout_seconds);
  throw ConfigError("unknown backend '" + backend.name + "'");
}

ManifestSplit resolve_splits(const RunConfig& config) {
  const auto& d = config.data;
  if (d.manifest) return split(load_manifest(*d.manifest, d.mos_range, d.dataset_id), d.split);
  ManifestSplit out;
  out.train = load_manifest(*d.train_manifest, d.mos_range, d.dataset_id);
  out.val = load_manifest(*d.val_manifest, d.mos_range, d.dataset_id);
  if (d.test_manifest) {
    out.test = load_manifest(*d.test_manifest, d.mos_range, d.dataset_id);
  } else {
    out.test.dataset_id = d.dataset_id;
    out.test.mos_range = d.mos_range;
  }
  return out;
}

std::string resolved_config_text(const RunConfig& c) {
  const BackendConfig backend = resolve_backend(c);
  std::vector<TokenId> pos = backend.token_sets.positive, neg = backend.token_sets.negative;
  std::vector<double> mean(c.backend.normalization.mean.begin(), c.backend.normalization.mean.end());
  std::vector<double> stdv(c.backend.normalization.std.begin(), c.backend.normalization.std.end());
  auto abs = [](const std::optional<fs::path>& p) { return p ? fs::absolute(*p).lexically_normal().string() : ""; };

  std::ostringstream o;
  o << "[backend]\n"
    << "name = " << c.backend.name << '\n';
  if (c.backend.name == "http") o << "url = " << c.backend.url << "\ntimeout = " << c.backend.timeout_seconds << '\n';
  o << "height = " << c.backend.height << '\n'
    << "width = " << c.backend.width << '\n'
    << "vocab_size = " << backend.vocab_size << '\n';
  if (c.backend.vocab_file) o << "vocab_file = " << abs(c.backend.vocab_file) << '\n';
  o << "mean = " << join(mean) << '\n'
    << "std = " << join(stdv) << '\n'
    << "positive = " << join(c.backend.positive_labels) << '\n'
    << "negative = " << join(c.backend.negative_labels) << '\n'
    << "positive_ids = " << join(pos) << '\n'
    << "negative_ids = " << join(neg) << '\n'
    << "textual_prompt = " << c.backend.textual_prompt << "\n\n";

  o << "[data]\n";
  if (!c.data.dataset_id.empty()) o << "dataset_id = " << c.data.dataset_id << '\n';
  if (c.data.manifest) {
    o << "manifest = " << abs(c.data.manifest) << '\n'
      << "split_policy = " << to_string(c.data.split.policy) << '\n'
      << "seed = " << c.data.split.seed << '\n';
    if (c.data.split.official_split_file) o << "official_split = " << abs(c.data.split.official_split_file) << '\n';
  } else {
    o << "train_manifest = " << abs(c.data.train_manifest) << '\n'
      << "val_manifest = " << abs(c.data.val_manifest) << '\n';
    if (c.data.test_manifest) o << "test_manifest = " << abs(c.data.test_manifest) << '\n';
  }
  o << "mos_lo = " << fmt(c.data.mos_range.lo) << '\n'
    << "mos_hi = " << fmt(c.data.mos_range.hi) << "\n\n";

  o << "[prompt]\n"
    << "kind = " << to_string(c.prompt.kind) << '\n'
    << "size = " << c.prompt.size << '\n'
    << "init = " << (c.prompt.init.kind == InitPolicy::Kind::Zeros ? "zeros" : "uniform") << '\n'
    << "init_epsilon = " << fmt(c.prompt.init.epsilon) << '\n'
    << "init_seed = " << c.prompt.init.seed << "\n\n";

  const auto& t = c.train;
  o << "[train]\n";
  if (!c.train_preset.empty()) o << "; expanded from preset " << c.train_preset << '\n';
  o << "batch_size = " << t.batch_size << '\n'
    << "lr = " << fmt(t.lr) << '\n'
    << "epochs = " << t.epochs << '\n';
  if (!t.lr_schedule.empty()) {
    std::string s;
    for (const auto& ph : t.lr_schedule) s += (s.empty() ? "" : ",") + std::to_string(ph.epochs) + "@" + fmt(ph.lr);
    o << "lr_schedule = " << s << '\n';
  }
  o << "shuffle_seed = " << t.shuffle_seed << '\n'
    << "checkpoint_every = " << t.checkpoint_every << '\n'
    << "workers = " << t.workers << '\n'
    << "augment = " << (t.augment ? "true" : "false") << "\n\n";

  o << "[eval]\n"
    << "split = " << c.eval.split << '\n'
    << "logistic_plcc = " << (c.eval.logistic_plcc ? "true" : "false") << '\n'
    << "workers = " << c.eval.workers << "\n\n";

  o << "[output]\n"
    << "dir = " << c.output_dir.string() << '\n';
  return o.str();
}

}  // namespace vpiqa
