// intersad: train, evaluate, reproduce experiments, and sweep hyperparameters.
// Exit codes: 0 ok, 1 acceptance FAIL, 2 usage or config error, 3 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "intersad/config.hpp"
#include "intersad/experiments.hpp"
#include "intersad/trainer.hpp"

namespace fs = std::filesystem;
using namespace intersad;

namespace {

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;
constexpr int kRuntime = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::string scorer;
  std::string space;
  bool negative_control = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, bool with_eval_flags) {
  cmd->add_option("--config", c.config, "experiment config file (TOML subset)");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--seed", c.seed, "base seed");
  cmd->add_option("--set", c.overrides, "override a config value, e.g. --set train.horizon=8")->take_all();
  if (with_eval_flags) {
    cmd->add_option("--scorer", c.scorer, "iforest, lof, knn or meanreward")
        ->check(CLI::IsMember({"iforest", "lof", "knn", "meanreward"}));
    cmd->add_option("--space", c.space, "trajectory, reward or embedding")
        ->check(CLI::IsMember({"trajectory", "reward", "embedding"}));
    cmd->add_flag("--negative-control", c.negative_control,
                  "allow embedding-space scoring in reward mode as a negative control");
  }
}

ExperimentConfig resolve(const Common& c, const std::optional<Mode>& fallback_mode = std::nullopt) {
  ExperimentConfig cfg;
  if (!c.config.empty()) {
    if (!fs::exists(c.config)) throw UsageError("config file not found: " + c.config);
    cfg = load_config(c.config);
  } else {
    cfg = default_config(fallback_mode.value_or(Mode::transition));
  }
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (c.seed) cfg.train.seed = *c.seed;
  if (!c.scorer.empty()) cfg.eval.scorer = scorer_from_string(c.scorer);
  if (!c.space.empty()) cfg.eval.space = space_from_string(c.space);
  if (c.negative_control) cfg.eval.negative_control = true;
  cfg.train.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << body;
}

void echo_config(const fs::path& dir, const ExperimentConfig& cfg) {
  std::ostringstream s;
  write_config(s, cfg);
  write_text(dir / "resolved_config.toml", s.str());
}

int cmd_train(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const fs::path out(c.out);
  fs::create_directories(out);
  echo_config(out, cfg);
  const TrainResult r = train(cfg.train);
  std::ostringstream trace;
  r.trace.write_csv(trace);
  write_text(out / "trace.csv", trace.str());
  save_checkpoint(r.policy, r.embedder, out);
  const auto& last = r.trace.rows.back();
  std::cout << "trained " << cfg.train.iterations << " iterations; final sen_total=" << fmt(last.sen_total)
            << "; wrote " << out.string() << '\n';
  return kOk;
}

int cmd_eval(const Common& c, const std::string& checkpoint, std::optional<std::uint64_t> fleet_seed) {
  Common settings = c;
  // A training output directory carries its resolved config.
  if (settings.config.empty() && fs::exists(fs::path(checkpoint) / "resolved_config.toml")) {
    settings.config = (fs::path(checkpoint) / "resolved_config.toml").string();
  }
  ExperimentConfig cfg = resolve(settings);
  if (fleet_seed) cfg.eval.fleet_seed = *fleet_seed;
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Fleet test = make_eval_fleet(cfg);
  const ScoreReport report = evaluate(ck.policy, ck.embedder, test, cfg.eval.eval_config());
  const fs::path out(c.out);
  fs::create_directories(out);
  std::ostringstream s;
  write_scores_csv(s, report);
  write_text(out / "scores.csv", s.str());
  std::cout << "auc=" << (report.auc ? fmt(*report.auc) : std::string("nan")) << '\n';
  return kOk;
}

int cmd_reproduce(const Common& c, const std::string& figure) {
  const auto& ids = figure_ids();
  if (std::find(ids.begin(), ids.end(), figure) == ids.end()) {
    std::string list;
    for (const auto& id : ids) list += (list.empty() ? "" : ", ") + id;
    throw UsageError("unknown figure id '" + figure + "'; valid ids: " + list);
  }
  ExperimentConfig transition = default_config(Mode::transition);
  ExperimentConfig reward = default_config(Mode::reward);
  if (!c.config.empty() || !c.overrides.empty()) {
    // A supplied config replaces the base of its own mode.
    const ExperimentConfig base = resolve(c);
    (base.train.mode == Mode::transition ? transition : reward) = base;
  }
  ExperimentSuite suite(transition, reward, c.seed.value_or(0), c.out);
  const FigureOutcome outcome = suite.reproduce(figure);
  std::cout << outcome.summary() << '\n';
  return outcome.pass() ? kOk : kFail;
}

int cmd_sweep(const Common& c, std::string param, std::vector<double> values) {
  const ExperimentConfig cfg = resolve(c);
  if (param.empty()) param = cfg.sweep.param;
  if (values.empty()) values = cfg.sweep.values;
  if (values.empty()) throw UsageError("sweep needs at least one value");
  if (param != "D" && param != "T" && param != "sigma") {
    throw UsageError("unknown sweep parameter '" + param + "'; valid: D, T, sigma");
  }
  const auto rows = run_sweep(cfg, param, values);
  const fs::path out(c.out);
  fs::create_directories(out);
  echo_config(out, cfg);
  std::ostringstream s;
  write_sweep_csv(s, param, rows);
  write_text(out / "sweep.csv", s.str());
  std::cout << s.str();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive system-wise anomaly detection over fleets of black-box systems"};
  app.require_subcommand(1);

  Common train_opts;
  auto* train_cmd = app.add_subcommand("train", "train policy and encoder, write trace and checkpoints");
  add_common(train_cmd, train_opts, true);

  Common eval_opts;
  std::string checkpoint;
  std::optional<std::uint64_t> fleet_seed;
  auto* eval_cmd = app.add_subcommand("eval", "score a disjoint test fleet with a checkpoint");
  eval_cmd->add_option("checkpoint", checkpoint, "directory holding policy.json and embedder.json")->required();
  eval_cmd->add_option("--fleet-seed", fleet_seed, "seed selecting the test fleet members");
  add_common(eval_cmd, eval_opts, true);

  Common repro_opts;
  std::string figure;
  auto* repro_cmd = app.add_subcommand("reproduce", "run one experiment and check its thresholds");
  repro_cmd->add_option("figure", figure, "table3, table5, fig4a, fig4bc, fig5, fig6a, fig6b or fig6c")->required();
  add_common(repro_cmd, repro_opts, false);

  Common sweep_opts;
  std::string param;
  std::vector<double> values;
  auto* sweep_cmd = app.add_subcommand("sweep", "one train and eval per hyperparameter value");
  sweep_cmd->add_option("--param", param, "D, T or sigma (default from [sweep])");
  sweep_cmd->add_option("--values", values, "values to sweep (default from [sweep])")->delimiter(',');
  add_common(sweep_cmd, sweep_opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_opts);
    if (*eval_cmd) return cmd_eval(eval_opts, checkpoint, fleet_seed);
    if (*repro_cmd) return cmd_reproduce(repro_opts, figure);
    if (*sweep_cmd) return cmd_sweep(sweep_opts, param, values);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const LoadError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
