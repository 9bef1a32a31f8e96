#pragma once

// System-interaction contract and the T-step rollout loop.

#include <concepts>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "intersad/common.hpp"

namespace intersad {

struct StepResult {
  std::vector<double> next_state;
  double reward = 0.0;
};

// A black-box MDP. Implementations must be pure given (state, action, rng
// draws) and safe to call concurrently.
class SystemInterface {
 public:
  virtual ~SystemInterface() = default;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual std::vector<double> reset(Rng& rng) const = 0;
  virtual StepResult step(std::span<const double> state, std::span<const double> action,
                          Rng& rng) const = 0;

  // Hidden per-rollout randomness fixed before the first step, one entry per
  // step; a nonzero entry marks the step for step_marked. Empty means no
  // marks. Drawn from the rollout generator right after reset.
  virtual std::vector<std::uint8_t> draw_marks(std::size_t /*horizon*/, Rng& /*rng*/) const {
    return {};
  }
  virtual StepResult step_marked(std::span<const double> state, std::span<const double> action,
                                 Rng& rng) const {
    return step(state, action, rng);
  }
};

// Flattened trajectory [s_0, a_0, ..., s_{T-1}, a_{T-1}] and rewards [r_0..r_{T-1}].
struct InteractionRecord {
  std::size_t system_id = 0;
  std::vector<double> trajectory;
  std::vector<double> rewards;

  friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

struct RolloutConfig {
  std::size_t horizon = 10;
  double observation_noise = 0.0;
  std::uint64_t base_seed = 0;
  // Distinguishes repeated rollouts of the same system (e.g. the training
  // iteration); part of the per-system seed.
  std::uint64_t rollout_index = 0;
};

// Anything that maps an observation to an action. Deterministic policies
// ignore the generator; random activation draws from it.
template <class P>
concept ActionSource = requires(const P& p, std::span<const double> obs, Rng& rng) {
  { p.input_dim() } -> std::convertible_to<std::size_t>;
  { p.output_dim() } -> std::convertible_to<std::size_t>;
  { p.act(obs, rng) } -> std::convertible_to<std::vector<double>>;
};

// Uniform activation in [-1, 1]^d_a, redrawn every step.
class RandomPolicy {
 public:
  RandomPolicy(std::size_t state_dim, std::size_t action_dim)
      : state_dim_(state_dim), action_dim_(action_dim) {}
  std::size_t input_dim() const { return state_dim_; }
  std::size_t output_dim() const { return action_dim_; }
  std::vector<double> act(std::span<const double>, Rng& rng) const {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> a(action_dim_);
    for (auto& v : a) v = u(rng);
    return a;
  }

 private:
  std::size_t state_dim_;
  std::size_t action_dim_;
};

inline std::uint64_t rollout_seed(const RolloutConfig& cfg, std::size_t system_id) {
  return derive_seed(cfg.base_seed, system_id, cfg.rollout_index);
}

// Concatenates (state, action) pairs in order s_0, a_0, s_1, a_1, ...
inline std::vector<double> flatten_steps(
    std::span<const std::pair<std::vector<double>, std::vector<double>>> steps) {
  std::vector<double> flat;
  if (steps.empty()) return flat;
  const std::size_t ds = steps.front().first.size();
  const std::size_t da = steps.front().second.size();
  flat.reserve(steps.size() * (ds + da));
  for (const auto& [s, a] : steps) {
    require(s.size() == ds && a.size() == da, "flatten_steps: ragged state/action dimensions");
    flat.insert(flat.end(), s.begin(), s.end());
    flat.insert(flat.end(), a.begin(), a.end());
  }
  return flat;
}

// Rolls `policy` out on `system` for cfg.horizon steps. The recorded state is
// the noisy observation s_t + n_t, which is also what the policy sees.
template <ActionSource Policy>
InteractionRecord interact(const SystemInterface& system, const Policy& policy,
                           const RolloutConfig& cfg, std::size_t system_id) {
  require(cfg.horizon >= 1, "rollout horizon must be at least 1");
  require(cfg.observation_noise >= 0.0, "observation noise must be nonnegative");
  const std::size_t ds = system.state_dim();
  const std::size_t da = system.action_dim();
  require(policy.input_dim() == ds, "policy input dimension does not match system state dimension");
  require(policy.output_dim() == da, "policy output dimension does not match system action dimension");

  Rng rng(rollout_seed(cfg, system_id));
  std::normal_distribution<double> noise(0.0, 1.0);

  InteractionRecord rec;
  rec.system_id = system_id;
  rec.trajectory.reserve(cfg.horizon * (ds + da));
  rec.rewards.reserve(cfg.horizon);

  std::vector<double> state = system.reset(rng);
  require(state.size() == ds, "system reset returned a state of the wrong dimension");
  const std::vector<std::uint8_t> marks = system.draw_marks(cfg.horizon, rng);
  require(marks.empty() || marks.size() == cfg.horizon, "system drew a mark vector of the wrong length");
  std::vector<double> obs(ds);
  for (std::size_t t = 0; t < cfg.horizon; ++t) {
    for (std::size_t k = 0; k < ds; ++k) {
      obs[k] = state[k];
      if (cfg.observation_noise > 0.0) obs[k] += cfg.observation_noise * noise(rng);
    }
    std::vector<double> action = policy.act(obs, rng);
    require(action.size() == da, "policy produced an action of the wrong dimension");
    StepResult next = !marks.empty() && marks[t] ? system.step_marked(state, action, rng)
                                                 : system.step(state, action, rng);
    require(next.next_state.size() == ds, "system step returned a state of the wrong dimension");
    if (!all_finite(obs) || !all_finite(action) || !all_finite(next.next_state) ||
        !std::isfinite(next.reward)) {
      throw NumericError("non-finite value produced at step " + std::to_string(t) +
                         " of system " + std::to_string(system_id));
    }
    rec.trajectory.insert(rec.trajectory.end(), obs.begin(), obs.end());
    rec.trajectory.insert(rec.trajectory.end(), action.begin(), action.end());
    rec.rewards.push_back(next.reward);
    state = std::move(next.next_state);
  }
  return rec;
}

inline nlohmann::ordered_json to_json(const InteractionRecord& rec) {
  nlohmann::ordered_json j;
  j["system_id"] = rec.system_id;
  j["trajectory"] = rec.trajectory;
  j["rewards"] = rec.rewards;
  return j;
}

inline InteractionRecord record_from_json(const nlohmann::ordered_json& j) {
  try {
    InteractionRecord rec;
    rec.system_id = j.at("system_id").get<std::size_t>();
    rec.trajectory = j.at("trajectory").get<std::vector<double>>();
    rec.rewards = j.at("rewards").get<std::vector<double>>();
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed interaction record: ") + e.what());
  }
}

}  // namespace intersad
