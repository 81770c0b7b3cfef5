#include "hsd/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "hsd/errors.hpp"

namespace hsd {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("invalid boolean '" + std::string(value) + "' for " + std::string(key));
}

std::string number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string flag(bool v) { return v ? "true" : "false"; }

}  // namespace

RunConfig full_preset() { return RunConfig{}; }

RunConfig desk_preset() {
  RunConfig c;
  c.folds = 5;
  c.runs = 3;
  return c;
}

RunConfig preset(std::string_view name) {
  if (name == "full") return full_preset();
  if (name == "desk") return desk_preset();
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected full or desk)");
}

void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
  auto& t = c.train;
  auto size = [&] { return parse_number<std::size_t>(key, value); };
  auto real = [&] { return parse_number<double>(key, value); };
  if (key == "max_epochs") t.max_epochs = size();
  else if (key == "batch_size") t.batch_size = size();
  else if (key == "validation_fraction") t.validation_fraction = real();
  else if (key == "vocab_size") t.vocab_size = size();
  else if (key == "max_len") t.max_len = size();
  else if (key == "hidden") t.hidden = size();
  else if (key == "embedding_dim") t.embedding_dim = size();
  else if (key == "activation") {
    auto a = nn::parse_cell_activation(value);
    if (!a) throw ConfigError("activation must be sigmoid or tanh, got '" + std::string(value) + "'");
    t.activation = *a;
  } else if (key == "input_mode") {
    auto m = parse_input_mode(value);
    if (!m) throw ConfigError("input_mode must be concat or tokens, got '" + std::string(value) + "'");
    t.input_mode = *m;
  } else if (key == "masking") t.masking = parse_bool(key, value);
  else if (key == "lowercase") t.lowercase = parse_bool(key, value);
  else if (key == "stratified_validation") t.stratified_validation = parse_bool(key, value);
  else if (key == "clip_norm") t.clip_norm = real();
  else if (key == "learning_rate") t.adam.learning_rate = real();
  else if (key == "beta1") t.adam.beta1 = real();
  else if (key == "beta2") t.adam.beta2 = real();
  else if (key == "epsilon") t.adam.epsilon = real();
  else if (key == "selection_tolerance") t.selection_tolerance = real();
  else if (key == "seed") t.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "scheme") c.scheme = std::string(value);
  else if (key == "folds") c.folds = size();
  else if (key == "runs") c.runs = size();
  else if (key == "stratified_folds") c.stratified_folds = parse_bool(key, value);
  else if (key == "leaky_tendencies") c.leaky_tendencies = parse_bool(key, value);
  else if (key == "jobs") c.jobs = size();
  else if (key == "dual_labels") {
    auto p = parse_policy(value);
    if (!p) throw ConfigError("unknown dual_labels policy '" + std::string(value) + "'");
    c.dual_labels = *p;
  } else if (key == "save_models") c.save_models = parse_bool(key, value);
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    try {
      apply_setting(base, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  return parse_config(in, std::move(base));
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c) {
  const auto& t = c.train;
  return {
      {"scheme", c.scheme},
      {"folds", std::to_string(c.folds)},
      {"runs", std::to_string(c.runs)},
      {"seed", std::to_string(t.seed)},
      {"stratified_folds", flag(c.stratified_folds)},
      {"leaky_tendencies", flag(c.leaky_tendencies)},
      {"jobs", std::to_string(c.jobs)},
      {"dual_labels", std::string(to_string(c.dual_labels))},
      {"save_models", flag(c.save_models)},
      {"max_epochs", std::to_string(t.max_epochs)},
      {"batch_size", std::to_string(t.batch_size)},
      {"validation_fraction", number(t.validation_fraction)},
      {"vocab_size", std::to_string(t.vocab_size)},
      {"max_len", std::to_string(t.max_len)},
      {"hidden", std::to_string(t.hidden)},
      {"embedding_dim", std::to_string(t.embedding_dim)},
      {"activation", std::string(nn::to_string(t.activation))},
      {"input_mode", std::string(to_string(t.input_mode))},
      {"masking", flag(t.masking)},
      {"lowercase", flag(t.lowercase)},
      {"stratified_validation", flag(t.stratified_validation)},
      {"clip_norm", number(t.clip_norm)},
      {"learning_rate", number(t.adam.learning_rate)},
      {"beta1", number(t.adam.beta1)},
      {"beta2", number(t.adam.beta2)},
      {"epsilon", number(t.adam.epsilon)},
      {"selection_tolerance", number(t.selection_tolerance)},
  };
}

std::string serialize_config(const RunConfig& config) {
  std::ostringstream os;
  for (const auto& [k, v] : config_entries(config)) os << k << " = " << v << '\n';
  return os.str();
}

EnsembleScheme resolve_scheme(std::string_view id) {
  if (auto s = find_scheme(id)) return *s;
  if (auto c = parse_combination(id)) return single_classifier_scheme(*c);
  throw ConfigError("unknown scheme '" + std::string(id) +
                    "' (expected i..xi or one of O, NS, NR, RS, NRS)");
}

ExperimentPlan make_plan(const RunConfig& c) {
  ExperimentPlan p;
  p.scheme = resolve_scheme(c.scheme);
  p.folds = c.folds;
  p.runs = c.runs;
  p.seed = c.train.seed;
  p.stratified_folds = c.stratified_folds;
  p.leaky_tendencies = c.leaky_tendencies;
  p.jobs = c.jobs;
  p.train = c.train;
  return p;
}

}  // namespace hsd
