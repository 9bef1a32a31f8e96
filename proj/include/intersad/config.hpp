#pragma once

// Experiment configuration: a TOML subset with sections [fleet], [train],
// [eval], [sweep]. Values are integers, floats, booleans, double-quoted
// strings, or flat arrays of numbers. Unknown sections and keys are errors
// anchored to their line.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "intersad/common.hpp"
#include "intersad/detectors.hpp"
#include "intersad/trainer.hpp"

namespace intersad {

class ConfigError : public LoadError {
 public:
  using LoadError::LoadError;
};

struct EvalSettings {
  Scorer scorer = Scorer::iforest;
  FeatureSpace space = FeatureSpace::trajectory;
  double observation_noise = 0.0;
  // Selects the disjoint test fleet members.
  std::uint64_t fleet_seed = 0;
  std::uint64_t seed = 0;
  std::size_t test_size = 200;
  double test_anomaly_fraction = 0.1;
  bool negative_control = false;
  bool normalize = true;
  std::size_t lof_k = 20;
  std::size_t knn_k = 10;
  std::size_t iforest_trees = 100;
  std::size_t iforest_subsample = 256;

  ScorerOptions scorer_options() const {
    ScorerOptions o;
    o.normalize = normalize;
    o.lof_k = lof_k;
    o.knn_k = knn_k;
    o.iforest.n_trees = iforest_trees;
    o.iforest.subsample = iforest_subsample;
    return o;
  }

  EvalConfig eval_config() const {
    EvalConfig e;
    e.scorer = scorer;
    e.space = space;
    e.observation_noise = observation_noise;
    e.seed = seed;
    e.negative_control = negative_control;
    e.scorer_options = scorer_options();
    return e;
  }
};

struct SweepSettings {
  std::string param = "T";
  std::vector<double> values = {2, 4, 6, 8, 10};
};

struct ExperimentConfig {
  TrainConfig train;
  EvalSettings eval;
  SweepSettings sweep;
};

// Desk-scale defaults per mode.
inline ExperimentConfig default_config(Mode mode) {
  ExperimentConfig c;
  c.train.mode = mode;
  if (mode == Mode::reward) {
    auto& f = c.train.reward_fleet.common;
    f.size = 500;
    f.anomaly_fraction = 0.02;
    f.reward_bias = -1.0;
    f.reward_gain = 2.0;
    f.initial_state_scale = 1.0;
    f.process_noise = 0.5;
    f.shared_seed = 101;
    c.train.reward_fleet.contamination_rate = 0.2;
    c.train.horizon = 20;
    c.train.iterations = 600;
    c.train.policy_lr = 1e-3;
    c.train.embedder_lr = 1e-3;
    c.train.probe_spaces = {FeatureSpace::trajectory, FeatureSpace::reward, FeatureSpace::embedding};
    c.eval.space = FeatureSpace::reward;
    c.eval.scorer = Scorer::knn;
    c.eval.test_size = 500;
    c.eval.test_anomaly_fraction = 0.02;
  }
  return c;
}

// Test fleet for `cfg`: the training fleet's shared model with disjoint members.
inline Fleet make_eval_fleet(const ExperimentConfig& cfg) {
  TrainConfig t = cfg.train;
  t.fleet_common().size = cfg.eval.test_size;
  t.fleet_common().anomaly_fraction = cfg.eval.test_anomaly_fraction;
  return make_test_fleet(t, cfg.eval.fleet_seed);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Strips a trailing comment that is not inside a string.
inline std::string_view strip_comment(std::string_view s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

struct RawValue {
  std::string text;
  std::size_t line = 0;
};

[[noreturn]] inline void config_fail(const std::string& origin, std::size_t line, const std::string& what) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + what);
}

inline double parse_double(std::string_view t, const std::string& origin, std::size_t line) {
  std::string s;
  for (char ch : t) {
    if (ch != '_') s.push_back(ch);
  }
  if (s == "inf" || s == "+inf" || s == "-inf" || s == "nan") config_fail(origin, line, "non-finite number '" + s + "'");
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s[0] == '+') ++first;
  const auto r = std::from_chars(first, s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) config_fail(origin, line, "expected a number, got '" + s + "'");
  return v;
}

inline std::uint64_t parse_unsigned(std::string_view t, const std::string& origin, std::size_t line) {
  std::string s;
  for (char ch : t) {
    if (ch != '_') s.push_back(ch);
  }
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    config_fail(origin, line, "expected a nonnegative integer, got '" + s + "'");
  }
  return v;
}

inline bool parse_bool(std::string_view t, const std::string& origin, std::size_t line) {
  if (t == "true") return true;
  if (t == "false") return false;
  config_fail(origin, line, "expected true or false, got '" + std::string(t) + "'");
}

inline std::string parse_string(std::string_view t, const std::string& origin, std::size_t line) {
  if (t.size() < 2 || t.front() != '"' || t.back() != '"') {
    config_fail(origin, line, "expected a double-quoted string, got '" + std::string(t) + "'");
  }
  return std::string(t.substr(1, t.size() - 2));
}

inline std::vector<double> parse_array(std::string_view t, const std::string& origin, std::size_t line) {
  if (t.size() < 2 || t.front() != '[' || t.back() != ']') {
    config_fail(origin, line, "expected an array like [1, 2, 3], got '" + std::string(t) + "'");
  }
  std::vector<double> out;
  std::string_view body = trim(t.substr(1, t.size() - 2));
  while (!body.empty()) {
    const auto comma = body.find(',');
    const std::string_view item = trim(body.substr(0, comma));
    if (!item.empty()) out.push_back(parse_double(item, origin, line));
    if (comma == std::string_view::npos) break;
    body = body.substr(comma + 1);
  }
  return out;
}

inline std::string render(double v) {
  std::string s = format_double(v);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

struct Binding {
  std::string section;
  std::string key;
  std::function<void(const RawValue&, const std::string&)> set;
  std::function<std::string()> get;
};

inline Binding bind_double(std::string section, std::string key, double& ref) {
  return {std::move(section), std::move(key),
          [&ref](const RawValue& v, const std::string& o) { ref = parse_double(v.text, o, v.line); },
          [&ref] { return render(ref); }};
}

template <class Int>
Binding bind_unsigned(std::string section, std::string key, Int& ref) {
  return {std::move(section), std::move(key),
          [&ref](const RawValue& v, const std::string& o) { ref = static_cast<Int>(parse_unsigned(v.text, o, v.line)); },
          [&ref] { return std::to_string(ref); }};
}

inline Binding bind_bool(std::string section, std::string key, bool& ref) {
  return {std::move(section), std::move(key),
          [&ref](const RawValue& v, const std::string& o) { ref = parse_bool(v.text, o, v.line); },
          [&ref] { return std::string(ref ? "true" : "false"); }};
}

template <class Enum, class Parse>
Binding bind_enum(std::string section, std::string key, Enum& ref, Parse parse) {
  return {std::move(section), std::move(key),
          [&ref, parse](const RawValue& v, const std::string& o) {
            const std::string s = parse_string(v.text, o, v.line);
            try {
              ref = parse(s);
            } catch (const ContractViolation& e) {
              config_fail(o, v.line, e.what());
            }
          },
          [&ref] { return "\"" + to_string(ref) + "\""; }};
}

template <class Enum, class Parse>
Binding bind_enum_list(std::string section, std::string key, std::vector<Enum>& ref, Parse parse) {
  return {std::move(section), std::move(key),
          [&ref, parse](const RawValue& v, const std::string& o) {
            const std::string s = parse_string(v.text, o, v.line);
            ref.clear();
            std::stringstream ss(s);
            std::string item;
            while (std::getline(ss, item, ',')) {
              try {
                ref.push_back(parse(std::string(trim(item))));
              } catch (const ContractViolation& e) {
                config_fail(o, v.line, e.what());
              }
            }
          },
          [&ref] {
            std::string s;
            for (std::size_t i = 0; i < ref.size(); ++i) s += (i ? "," : "") + to_string(ref[i]);
            return "\"" + s + "\"";
          }};
}

inline std::vector<Binding> bindings(ExperimentConfig& c) {
  auto& t = c.train;
  auto& f = t.fleet_common();
  std::vector<Binding> b;
  b.push_back(bind_unsigned("fleet", "size", f.size));
  b.push_back(bind_double("fleet", "anomaly_fraction", f.anomaly_fraction));
  b.push_back(bind_unsigned("fleet", "state_dim", f.state_dim));
  b.push_back(bind_unsigned("fleet", "action_dim", f.action_dim));
  b.push_back(bind_unsigned("fleet", "shared_seed", f.shared_seed));
  b.push_back(bind_unsigned("fleet", "member_seed", f.member_seed));
  b.push_back(bind_double("fleet", "normal_jitter", f.normal_jitter));
  b.push_back(bind_double("fleet", "process_noise", f.process_noise));
  b.push_back(bind_double("fleet", "initial_state_scale", f.initial_state_scale));
  b.push_back(bind_double("fleet", "base_spectral_norm", f.base_spectral_norm));
  b.push_back(bind_double("fleet", "reward_gain", f.reward_gain));
  b.push_back(bind_double("fleet", "reward_bias", f.reward_bias));
  b.push_back(bind_double("fleet", "anomaly_shift", t.transition_fleet.anomaly_shift));
  b.push_back(bind_bool("fleet", "shared_anomaly_direction", t.transition_fleet.shared_anomaly_direction));
  b.push_back(bind_double("fleet", "contamination_rate", t.reward_fleet.contamination_rate));

  b.push_back(bind_enum("train", "mode", t.mode, mode_from_string));
  b.push_back(bind_unsigned("train", "horizon", t.horizon));
  b.push_back(bind_unsigned("train", "batch_size", t.batch_size));
  b.push_back(bind_unsigned("train", "iterations", t.iterations));
  b.push_back(bind_double("train", "policy_lr", t.policy_lr));
  b.push_back(bind_double("train", "embedder_lr", t.embedder_lr));
  b.push_back(bind_unsigned("train", "embedding_dim", t.embedding_dim));
  b.push_back(bind_unsigned("train", "hidden_dim", t.hidden_dim));
  b.push_back(bind_unsigned("train", "policy_hidden_dim", t.policy_hidden_dim));
  b.push_back(bind_unsigned("train", "buffer_capacity", t.buffer_capacity));
  b.push_back(bind_unsigned("train", "seed", t.seed));
  b.push_back(bind_bool("train", "disable_sen", t.disable_sen));
  b.push_back(bind_bool("train", "disable_erm", t.disable_erm));
  b.push_back(bind_double("train", "observation_noise", t.observation_noise));
  b.push_back(bind_unsigned("train", "eval_every", t.eval_every));
  b.push_back(bind_unsigned("train", "probe_size", t.probe_size));
  b.push_back(bind_double("train", "probe_anomaly_fraction", t.probe_anomaly_fraction));
  b.push_back(bind_double("train", "probe_noise", t.probe_noise));
  b.push_back(bind_enum_list("train", "probe_scorers", t.probe_scorers, scorer_from_string));
  b.push_back(bind_enum_list("train", "probe_spaces", t.probe_spaces, space_from_string));

  auto& e = c.eval;
  b.push_back(bind_enum("eval", "scorer", e.scorer, scorer_from_string));
  b.push_back(bind_enum("eval", "space", e.space, space_from_string));
  b.push_back(bind_double("eval", "observation_noise", e.observation_noise));
  b.push_back(bind_unsigned("eval", "fleet_seed", e.fleet_seed));
  b.push_back(bind_unsigned("eval", "seed", e.seed));
  b.push_back(bind_unsigned("eval", "test_size", e.test_size));
  b.push_back(bind_double("eval", "test_anomaly_fraction", e.test_anomaly_fraction));
  b.push_back(bind_bool("eval", "negative_control", e.negative_control));
  b.push_back(bind_bool("eval", "normalize", e.normalize));
  b.push_back(bind_unsigned("eval", "lof_k", e.lof_k));
  b.push_back(bind_unsigned("eval", "knn_k", e.knn_k));
  b.push_back(bind_unsigned("eval", "iforest_trees", e.iforest_trees));
  b.push_back(bind_unsigned("eval", "iforest_subsample", e.iforest_subsample));

  auto& s = c.sweep;
  b.push_back({"sweep", "param",
               [&s](const RawValue& v, const std::string& o) { s.param = parse_string(v.text, o, v.line); },
               [&s] { return "\"" + s.param + "\""; }});
  b.push_back({"sweep", "values",
               [&s](const RawValue& v, const std::string& o) { s.values = parse_array(v.text, o, v.line); },
               [&s] {
                 std::string out = "[";
                 for (std::size_t i = 0; i < s.values.size(); ++i) out += (i ? ", " : "") + render(s.values[i]);
                 return out + "]";
               }});
  return b;
}

}  // namespace detail

// Parses config text. `origin` prefixes error messages (usually the path).
inline ExperimentConfig parse_config(std::string_view text, const std::string& origin = "<config>") {
  using detail::RawValue;
  // section -> key -> value, in file order of first appearance
  std::map<std::string, std::map<std::string, RawValue>> entries;
  static const char* kSections[] = {"fleet", "train", "eval", "sweep"};

  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string_view line = detail::trim(detail::strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') detail::config_fail(origin, line_no, "malformed section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      if (std::find(std::begin(kSections), std::end(kSections), section) == std::end(kSections)) {
        detail::config_fail(origin, line_no, "unknown section [" + section + "] (expected fleet, train, eval, sweep)");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) detail::config_fail(origin, line_no, "expected key = value");
    if (section.empty()) detail::config_fail(origin, line_no, "key outside of any section");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    if (key.empty() || value.empty()) detail::config_fail(origin, line_no, "expected key = value");
    auto& sec = entries[section];
    if (sec.count(key)) detail::config_fail(origin, line_no, "duplicate key '" + key + "' in [" + section + "]");
    sec[key] = RawValue{value, line_no};
  }

  // The mode selects the defaults every other key overrides.
  Mode mode = Mode::transition;
  if (auto it = entries["train"].find("mode"); it != entries["train"].end()) {
    try {
      mode = mode_from_string(detail::parse_string(it->second.text, origin, it->second.line));
    } catch (const ContractViolation& e) {
      detail::config_fail(origin, it->second.line, e.what());
    }
  }
  ExperimentConfig cfg = default_config(mode);
  const auto binds = detail::bindings(cfg);
  for (const auto& [sec, keys] : entries) {
    for (const auto& [key, value] : keys) {
      const auto b = std::find_if(binds.begin(), binds.end(),
                                  [&](const detail::Binding& x) { return x.section == sec && x.key == key; });
      if (b == binds.end()) detail::config_fail(origin, value.line, "unknown key '" + key + "' in [" + sec + "]");
      b->set(value, origin);
    }
  }
  return cfg;
}

// Applies one `section.key=value` override (value in config syntax) on top
// of a resolved config. Changing the mode this way keeps earlier values.
inline void apply_override(ExperimentConfig& cfg, const std::string& assignment,
                           const std::string& origin = "--set") {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError(origin + ": expected section.key=value, got '" + assignment + "'");
  }
  const std::string sec(detail::trim(std::string_view(assignment).substr(0, dot)));
  const std::string key(detail::trim(std::string_view(assignment).substr(dot + 1, eq - dot - 1)));
  const std::string value(detail::trim(std::string_view(assignment).substr(eq + 1)));
  const auto binds = detail::bindings(cfg);
  const auto b = std::find_if(binds.begin(), binds.end(),
                              [&](const detail::Binding& x) { return x.section == sec && x.key == key; });
  if (b == binds.end()) throw ConfigError(origin + ": unknown key '" + key + "' in [" + sec + "]");
  if (value.empty()) throw ConfigError(origin + ": empty value for " + sec + "." + key);
  b->set(detail::RawValue{value, 1}, origin);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

// Every addressable key with its resolved value; parse_config of the output
// reproduces `cfg`.
inline void write_config(std::ostream& out, const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  const auto binds = detail::bindings(copy);
  std::string section;
  for (const auto& b : binds) {
    if (b.section != section) {
      if (!section.empty()) out << '\n';
      section = b.section;
      out << '[' << section << "]\n";
    }
    out << b.key << " = " << b.get() << '\n';
  }
}

}  // namespace intersad
