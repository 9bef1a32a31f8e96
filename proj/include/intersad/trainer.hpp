#pragma once

// Joint training loop: policy neutralization, replay, embedder reconstruction,
// periodic probe snapshots; fleet evaluation and checkpoints.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "intersad/common.hpp"
#include "intersad/detectors.hpp"
#include "intersad/embedder.hpp"
#include "intersad/fleet_env.hpp"
#include "intersad/mdp_core.hpp"
#include "intersad/replay.hpp"
#include "intersad/sen_policy.hpp"

namespace intersad {

struct TrainConfig {
  Mode mode = Mode::transition;
  TransitionFleetConfig transition_fleet;
  RewardFleetConfig reward_fleet;
  std::size_t horizon = 10;
  std::size_t batch_size = 32;
  std::size_t iterations = 300;
  double policy_lr = 1e-3;
  double embedder_lr = 1e-3;
  std::size_t embedding_dim = 16;
  std::size_t hidden_dim = 32;
  std::size_t policy_hidden_dim = 64;
  std::size_t buffer_capacity = kDefaultReplayCapacity;
  std::uint64_t seed = 0;
  bool disable_sen = false;
  bool disable_erm = false;
  // Observation noise during training rollouts; probes use probe_noise.
  double observation_noise = 0.0;
  std::size_t eval_every = 25;
  std::size_t probe_size = 100;
  double probe_anomaly_fraction = 0.1;
  double probe_noise = 0.0;
  std::vector<Scorer> probe_scorers = {Scorer::iforest};
  std::vector<FeatureSpace> probe_spaces = {FeatureSpace::trajectory, FeatureSpace::reward,
                                            FeatureSpace::embedding};
  // Keep a frozen copy of the policy at every snapshot row.
  bool keep_policy_snapshots = false;

  const FleetCommon& fleet_common() const {
    return mode == Mode::transition ? transition_fleet.common : reward_fleet.common;
  }
  FleetCommon& fleet_common() {
    return mode == Mode::transition ? transition_fleet.common : reward_fleet.common;
  }

  void validate() const {
    require(batch_size >= 2, "batch size B must be at least 2");
    require(iterations >= 1, "iterations must be at least 1");
    require(horizon >= 1, "horizon T must be at least 1");
    require(eval_every >= 1, "eval_every must be at least 1");
    require(policy_lr > 0.0 && embedder_lr > 0.0, "learning rates must be positive");
    require(buffer_capacity >= 1, "buffer capacity must be positive");
    require(probe_size >= 3, "probe fleet needs at least three systems");
  }
};

inline Fleet make_fleet(const TrainConfig& cfg, const FleetCommon& common) {
  if (cfg.mode == Mode::transition) {
    TransitionFleetConfig f = cfg.transition_fleet;
    f.common = common;
    return make_transition_fleet(f);
  }
  RewardFleetConfig f = cfg.reward_fleet;
  f.common = common;
  return make_reward_fleet(f);
}

inline Fleet make_training_fleet(const TrainConfig& cfg) { return make_fleet(cfg, cfg.fleet_common()); }

// Same shared model as training, disjoint members.
inline Fleet make_test_fleet(const TrainConfig& cfg, std::uint64_t fleet_seed) {
  FleetCommon c = cfg.fleet_common();
  c.member_seed = derive_seed(c.member_seed, 0x7e57, fleet_seed);
  return make_fleet(cfg, c);
}

inline Fleet make_probe_fleet(const TrainConfig& cfg) {
  FleetCommon c = cfg.fleet_common();
  c.size = cfg.probe_size;
  c.anomaly_fraction = cfg.probe_anomaly_fraction;
  c.member_seed = derive_seed(c.member_seed, 0x960be);
  return make_fleet(cfg, c);
}

// ---------------------------------------------------------------------------
// Feature collection and evaluation

template <ActionSource Policy>
std::vector<InteractionRecord> roll_out_fleet(const Fleet& fleet, const Policy& policy,
                                              const RolloutConfig& rollout) {
  std::vector<InteractionRecord> out(fleet.size());
  parallel_for(fleet.size(), [&](std::size_t i) { out[i] = interact(fleet.system(i), policy, rollout, i); });
  return out;
}

inline std::vector<std::vector<double>> embed_records(const EmbedderModel& embedder,
                                                      std::span<const InteractionRecord> records) {
  std::vector<std::vector<double>> u(records.size());
  parallel_for(records.size(), [&](std::size_t i) { u[i] = encode(embedder, records[i].trajectory); });
  return u;
}

inline FeatureMatrix features_for(FeatureSpace space, std::span<const InteractionRecord> records,
                                  const EmbedderModel* embedder) {
  std::vector<std::vector<double>> rows;
  rows.reserve(records.size());
  switch (space) {
    case FeatureSpace::trajectory:
      for (const auto& r : records) rows.push_back(r.trajectory);
      break;
    case FeatureSpace::reward:
      for (const auto& r : records) rows.push_back(r.rewards);
      break;
    case FeatureSpace::embedding:
      require(embedder != nullptr, "embedding space needs an encoder");
      rows = embed_records(*embedder, records);
      break;
  }
  return feature_matrix(rows);
}

struct EvalConfig {
  Scorer scorer = Scorer::iforest;
  FeatureSpace space = FeatureSpace::trajectory;
  double observation_noise = 0.0;
  std::uint64_t seed = 0;
  // Permits embedding-space scoring of a reward-mode model, flagged as a
  // negative control in the report.
  bool negative_control = false;
  ScorerOptions scorer_options;
};

inline ScoreReport score_records(std::span<const InteractionRecord> records, const Fleet& fleet,
                                 const EmbedderModel* embedder, const EvalConfig& cfg) {
  ScoreReport report;
  report.scorer = to_string(cfg.scorer);
  report.space = to_string(cfg.space);
  report.negative_control = cfg.negative_control;
  ScorerOptions opts = cfg.scorer_options;
  opts.iforest.seed = derive_seed(cfg.seed, 0x15f0);
  report.scores = score_features(features_for(cfg.space, records, embedder), cfg.scorer, opts);
  report.labels = evaluation_labels(fleet);
  const auto positives = std::count(report.labels.begin(), report.labels.end(), 1);
  if (positives > 0 && positives < static_cast<long>(report.labels.size())) {
    report.auc = roc_auc(report.scores, report.labels);
  }
  return report;
}

inline RolloutConfig eval_rollout(std::size_t horizon, const EvalConfig& cfg) {
  return RolloutConfig{.horizon = horizon,
                       .observation_noise = cfg.observation_noise,
                       .base_seed = derive_seed(cfg.seed, 0xe7a1),
                       .rollout_index = 0};
}

// One rollout per test system under `policy`, then score in the chosen space.
inline ScoreReport evaluate(const PolicyModel& policy, const EmbedderModel& embedder,
                            const Fleet& fleet, const EvalConfig& cfg) {
  if (cfg.space == FeatureSpace::embedding && embedder.mode == Mode::reward && !cfg.negative_control) {
    throw ContractViolation(
        "embedding-space scoring is undefined for reward anomalies: the encoder sees only states "
        "and actions, so u_i carries no reward information (pass --negative-control to run it "
        "as a labelled negative control)");
  }
  const auto records = roll_out_fleet(fleet, policy, eval_rollout(embedder.dims.horizon, cfg));
  return score_records(records, fleet, &embedder, cfg);
}

// Baseline: random activation, no encoder.
inline ScoreReport evaluate_random(const Fleet& fleet, std::size_t horizon, const EvalConfig& cfg) {
  require(cfg.space != FeatureSpace::embedding, "random-activation baseline has no embedding space");
  const RandomPolicy policy(fleet.state_dim(), fleet.action_dim());
  const auto records = roll_out_fleet(fleet, policy, eval_rollout(horizon, cfg));
  return score_records(records, fleet, nullptr, cfg);
}

// ---------------------------------------------------------------------------
// Training trace

struct TraceRow {
  std::size_t iteration = 0;
  double l_f = 0.0;
  double l_mu = 0.0;
  double sen_total = 0.0;
  std::vector<double> auc;  // one per (space, scorer) column
  double sen_total_sq = 0.0;
};

inline std::string space_tag(FeatureSpace s) {
  switch (s) {
    case FeatureSpace::trajectory: return "traj";
    case FeatureSpace::reward: return "reward";
    case FeatureSpace::embedding: return "emb";
  }
  return "?";
}

struct TrainingTrace {
  std::vector<std::string> auc_columns;
  std::vector<TraceRow> rows;

  std::optional<std::size_t> column(FeatureSpace space, Scorer scorer) const {
    const std::string name = "auc_" + space_tag(space) + "_" + to_string(scorer);
    for (std::size_t i = 0; i < auc_columns.size(); ++i) {
      if (auc_columns[i] == name) return i;
    }
    return std::nullopt;
  }

  void write_csv(std::ostream& out) const {
    out << "iteration,L_f,L_mu,sen_total";
    for (const auto& c : auc_columns) out << ',' << c;
    out << ",sen_total_sq\n";
    for (const auto& r : rows) {
      out << r.iteration << ',' << format_double(r.l_f) << ',' << format_double(r.l_mu) << ','
          << format_double(r.sen_total);
      for (double a : r.auc) out << ',' << format_double(a);
      out << ',' << format_double(r.sen_total_sq) << '\n';
    }
  }
};

struct TrainResult {
  PolicyModel policy;
  EmbedderModel embedder;
  TrainingTrace trace;
  std::size_t buffer_size = 0;
  std::vector<std::pair<std::size_t, PolicyModel>> policy_snapshots;
  // Per iteration: distinct source iterations among the embedder batch.
  std::vector<std::size_t> embedder_batch_sources;
};

namespace detail {

class Prober {
 public:
  explicit Prober(const TrainConfig& cfg) : cfg_(cfg), fleet_(make_probe_fleet(cfg)) {
    for (FeatureSpace s : cfg.probe_spaces) {
      for (Scorer sc : cfg.probe_scorers) columns_.emplace_back(s, sc);
    }
  }

  std::vector<std::string> column_names() const {
    std::vector<std::string> names;
    for (const auto& [s, sc] : columns_) names.push_back("auc_" + space_tag(s) + "_" + to_string(sc));
    return names;
  }

  // Fills sen_total, sen_total_sq and auc of `row` for a frozen copy of the
  // models. The probe rollout noise is identical at every snapshot.
  void snapshot(const PolicyModel& policy, const EmbedderModel& embedder, TraceRow& row) const {
    EvalConfig ec;
    ec.observation_noise = cfg_.probe_noise;
    ec.seed = derive_seed(cfg_.seed, 0x960be);
    const auto records = roll_out_fleet(fleet_, policy, eval_rollout(cfg_.horizon, ec));
    const auto u = embed_records(embedder, records);
    const std::vector<double> c = centroid(u);
    row.sen_total = 0.0;
    row.sen_total_sq = 0.0;
    for (const auto& v : u) {
      const double d = euclidean(v, c);
      row.sen_total += d;
      row.sen_total_sq += d * d;
    }
    row.auc.clear();
    for (const auto& [space, scorer] : columns_) {
      ec.space = space;
      ec.scorer = scorer;
      ec.negative_control = true;
      row.auc.push_back(score_records(records, fleet_, &embedder, ec).auc.value_or(std::nan("")));
    }
  }

 private:
  const TrainConfig& cfg_;
  Fleet fleet_;
  std::vector<std::pair<FeatureSpace, Scorer>> columns_;
};

inline std::vector<std::size_t> pick_systems(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> out;
  out.reserve(count);
  if (count <= n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> d(i, n - 1);
      std::swap(idx[i], idx[d(rng)]);
      out.push_back(idx[i]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> d(0, n - 1);
    for (std::size_t i = 0; i < count; ++i) out.push_back(d(rng));
  }
  return out;
}

}  // namespace detail

inline EmbedderDims embedder_dims(const TrainConfig& cfg) {
  const auto& c = cfg.fleet_common();
  return EmbedderDims{.state_dim = c.state_dim,
                      .action_dim = c.action_dim,
                      .horizon = cfg.horizon,
                      .embedding_dim = cfg.embedding_dim,
                      .hidden_dim = cfg.hidden_dim};
}

inline TrainResult initial_models(const TrainConfig& cfg) {
  const auto& c = cfg.fleet_common();
  Rng policy_rng(derive_seed(cfg.seed, 0xb011c7));
  Rng embed_rng(derive_seed(cfg.seed, 0xe3bed));
  TrainResult r;
  r.policy = PolicyModel::create(c.state_dim, c.action_dim, policy_rng, cfg.policy_hidden_dim);
  r.embedder = EmbedderModel::create(cfg.mode, embedder_dims(cfg), embed_rng);
  return r;
}

// Fixed-budget training. Row 0 holds the initial models' probe metrics and
// the losses iteration 1 observed before updating; every later row holds the
// pre-update losses of its iteration and the probe metrics after it.
inline TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  const Fleet fleet = make_training_fleet(cfg);
  require(fleet.size() >= 1, "training fleet is empty");
  TrainResult out = initial_models(cfg);
  PolicyModel& policy = out.policy;
  EmbedderModel& embedder = out.embedder;

  const detail::Prober prober(cfg);
  out.trace.auc_columns = prober.column_names();

  nn::AdamState policy_opt;
  nn::AdamState embed_opt;
  ReplayBuffer<StampedRecord> buffer(cfg.buffer_capacity, derive_seed(cfg.seed, 0x3e91a7));
  Rng batch_rng(derive_seed(cfg.seed, 0xba7c4));

  TraceRow row0;
  prober.snapshot(policy, embedder, row0);
  if (cfg.keep_policy_snapshots) out.policy_snapshots.emplace_back(0, policy);

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    try {
      const auto ids = detail::pick_systems(fleet.size(), cfg.batch_size, batch_rng);
      const RolloutConfig rollout{.horizon = cfg.horizon,
                                  .observation_noise = cfg.observation_noise,
                                  .base_seed = derive_seed(cfg.seed, 0x7011),
                                  .rollout_index = it};
      std::vector<InteractionRecord> fresh(ids.size());
      parallel_for(ids.size(), [&](std::size_t b) {
        fresh[b] = interact(fleet.system(ids[b]), policy, rollout, ids[b]);
      });

      const double l_mu = cfg.disable_sen
                              ? sen_objective(policy, embedder, fresh)
                              : sen_policy_update(policy, embedder, fresh, policy_opt, cfg.policy_lr);

      double l_f = 0.0;
      if (cfg.disable_erm) {
        l_f = embedder_train_step(embedder, fresh, embed_opt, cfg.embedder_lr);
        out.embedder_batch_sources.push_back(1);
      } else {
        for (auto& r : fresh) buffer.push(StampedRecord{std::move(r), it});
        std::vector<InteractionRecord> replayed;
        std::vector<std::size_t> stamps;
        replayed.reserve(cfg.batch_size);
        for (auto& s : buffer.sample(cfg.batch_size)) {
          stamps.push_back(s.iteration);
          replayed.push_back(std::move(s.record));
        }
        std::sort(stamps.begin(), stamps.end());
        out.embedder_batch_sources.push_back(
            static_cast<std::size_t>(std::unique(stamps.begin(), stamps.end()) - stamps.begin()));
        l_f = embedder_train_step(embedder, replayed, embed_opt, cfg.embedder_lr);
      }

      if (it == 1) {
        row0.l_f = l_f;
        row0.l_mu = l_mu;
        out.trace.rows.push_back(row0);
      }
      if (it % cfg.eval_every == 0 || it == cfg.iterations) {
        TraceRow row;
        row.iteration = it;
        row.l_f = l_f;
        row.l_mu = l_mu;
        prober.snapshot(policy, embedder, row);
        out.trace.rows.push_back(std::move(row));
        if (cfg.keep_policy_snapshots) out.policy_snapshots.emplace_back(it, policy);
      }
    } catch (const NumericError& e) {
      throw NumericError("training aborted at iteration " + std::to_string(it) + ": " + e.what());
    }
  }
  out.buffer_size = buffer.size();
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointVersion = 1;

inline void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(1) << '\n';
}

inline nlohmann::ordered_json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  try {
    return nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed file " + path.string() + ": " + e.what());
  }
}

inline void save_checkpoint(const PolicyModel& policy, const EmbedderModel& embedder,
                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto p = to_json(policy);
  p["checkpoint_version"] = kCheckpointVersion;
  auto e = to_json(embedder);
  e["checkpoint_version"] = kCheckpointVersion;
  write_json_file(dir / "policy.json", p);
  write_json_file(dir / "embedder.json", e);
}

struct Checkpoint {
  PolicyModel policy;
  EmbedderModel embedder;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  auto check_version = [](const nlohmann::ordered_json& j, const std::string& what) {
    if (!j.is_object() || !j.contains("checkpoint_version") || !j["checkpoint_version"].is_number_integer()) {
      throw LoadError(what + " lacks checkpoint_version");
    }
    const int v = j["checkpoint_version"].get<int>();
    if (v != kCheckpointVersion) {
      throw LoadError(what + " has checkpoint_version " + std::to_string(v) + ", expected " +
                      std::to_string(kCheckpointVersion));
    }
  };
  const auto pj = read_json_file(dir / "policy.json");
  check_version(pj, "policy.json");
  const auto ej = read_json_file(dir / "embedder.json");
  check_version(ej, "embedder.json");
  Checkpoint c{policy_from_json(pj), embedder_from_json(ej)};
  if (c.policy.state_dim != c.embedder.dims.state_dim || c.policy.action_dim != c.embedder.dims.action_dim) {
    throw LoadError("policy and embedder checkpoints disagree on dimensions");
  }
  return c;
}

}  // namespace intersad
