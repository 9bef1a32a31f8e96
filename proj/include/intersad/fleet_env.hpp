#pragma once

// Synthetic fleets of linear-Gaussian systems with logistic rewards.
//
// A transition fleet hides its anomalies in the dynamics matrix; a reward
// fleet hides them in reward flips on a fixed fraction of steps. The other channel is
// statistically identical across normal and anomalous members.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "intersad/common.hpp"
#include "intersad/mdp_core.hpp"
#include "intersad/tensor_nn.hpp"

namespace intersad {

using Matrix = nn::Tensor;

inline Matrix random_gaussian(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (auto& v : m.values) v = scale * n(rng);
  return m;
}

inline double frobenius_norm(const Matrix& m) {
  double acc = 0.0;
  for (double v : m.values) acc += v * v;
  return std::sqrt(acc);
}

// Largest singular value: cyclic Jacobi sweeps on the Gram matrix M^T M,
// exact to rounding even when the top singular values are nearly tied.
inline double spectral_norm(const Matrix& m) {
  require(m.rows > 0 && m.cols > 0, "spectral_norm of an empty matrix");
  const std::size_t n = m.cols;
  std::vector<double> g(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < m.rows; ++r) acc += m(r, i) * m(r, j);
      g[i * n + j] = acc;
    }
  }
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      diag += g[i * n + i] * g[i * n + i];
      for (std::size_t j = i + 1; j < n; ++j) off += g[i * n + j] * g[i * n + j];
    }
    if (off <= 1e-30 * diag) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double gpq = g[p * n + q];
        if (gpq == 0.0) continue;
        const double theta = (g[q * n + q] - g[p * n + p]) / (2.0 * gpq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double gkp = g[k * n + p];
          const double gkq = g[k * n + q];
          g[k * n + p] = c * gkp - sn * gkq;
          g[k * n + q] = sn * gkp + c * gkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double gpk = g[p * n + k];
          const double gqk = g[q * n + k];
          g[p * n + k] = c * gpk - sn * gqk;
          g[q * n + k] = sn * gpk + c * gqk;
        }
      }
    }
  }
  double top = 0.0;
  for (std::size_t i = 0; i < n; ++i) top = std::max(top, g[i * n + i]);
  return std::sqrt(top);
}

// Scales M down to spectral norm `bound` if it exceeds it.
inline Matrix spectral_rescale(const Matrix& m, double bound) {
  require(bound > 0.0, "spectral bound must be positive");
  require(m.rows == m.cols, "spectral_rescale expects a square matrix");
  const double norm = spectral_norm(m);
  if (norm <= bound) return m;
  Matrix out = m;
  for (auto& v : out.values) v *= bound / norm;
  return out;
}

struct SystemParams {
  Matrix dynamics;      // d_s x d_s
  Matrix input_map;     // d_s x d_a
  std::vector<double> reward_weights;  // d_s + d_a
  double reward_bias = 0.0;
  double process_noise = 0.0;
  double initial_state_scale = 0.0;
  double contamination_rate = 0.0;  // nonzero only for anomalous reward systems
  bool is_anomalous = false;
};

// Number of corrupted steps in one rollout: a*T, stochastically rounded with
// the supplied uniform so the expected fraction is exactly a.
inline std::size_t contaminated_steps(double rate, std::size_t horizon, double uniform) {
  const double target = rate * static_cast<double>(horizon);
  const double base = std::floor(target);
  const auto k = static_cast<std::size_t>(base) + (uniform < target - base ? 1 : 0);
  return std::min(k, horizon);
}

// s' = A s + B a + w,  w ~ N(0, sigma_w^2 I)
// r  = logistic(w0 . [s; a] + bias); on marked steps the reward is 1 - r.
// Each rollout marks a random subset of contaminated_steps(rate, T) steps.
class LinearSystem final : public SystemInterface {
 public:
  explicit LinearSystem(const SystemParams& p)
      : a_(p.dynamics),
        b_(p.input_map),
        w_(p.reward_weights),
        bias_(p.reward_bias),
        process_noise_(p.process_noise),
        initial_scale_(p.initial_state_scale),
        contamination_(p.contamination_rate) {
    require(a_.rows > 0 && a_.rows == a_.cols, "dynamics matrix must be square and nonempty");
    require(b_.rows == a_.rows && b_.cols > 0, "input map shape mismatch");
    require(w_.size() == a_.rows + b_.cols, "reward weight length mismatch");
  }

  std::size_t state_dim() const override { return a_.rows; }
  std::size_t action_dim() const override { return b_.cols; }

  std::vector<double> reset(Rng& rng) const override {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> s(state_dim());
    for (auto& v : s) v = initial_scale_ * n(rng);
    return s;
  }

  // Normal and anomalous members consume identically shaped random streams.
  std::vector<std::uint8_t> draw_marks(std::size_t horizon, Rng& rng) const override {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t k = contaminated_steps(contamination_, horizon, u(rng));
    std::vector<std::size_t> order(horizon);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i + 1 < horizon; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, horizon - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    std::vector<std::uint8_t> marks(horizon, 0);
    for (std::size_t i = 0; i < k; ++i) marks[order[i]] = 1;
    return marks;
  }

  StepResult step(std::span<const double> state, std::span<const double> action,
                  Rng& rng) const override {
    const std::size_t ds = state_dim();
    const std::size_t da = action_dim();
    require(state.size() == ds && action.size() == da, "step: state/action dimension mismatch");
    std::normal_distribution<double> n(0.0, 1.0);

    double logit = bias_;
    for (std::size_t k = 0; k < ds; ++k) logit += w_[k] * state[k];
    for (std::size_t k = 0; k < da; ++k) logit += w_[ds + k] * action[k];

    StepResult out;
    out.reward = nn::logistic(logit);
    out.next_state.resize(ds);
    for (std::size_t r = 0; r < ds; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < ds; ++c) acc += a_(r, c) * state[c];
      for (std::size_t c = 0; c < da; ++c) acc += b_(r, c) * action[c];
      out.next_state[r] = acc + process_noise_ * n(rng);
    }
    return out;
  }

  StepResult step_marked(std::span<const double> state, std::span<const double> action,
                         Rng& rng) const override {
    StepResult out = step(state, action, rng);
    out.reward = 1.0 - out.reward;
    return out;
  }

 private:
  Matrix a_;
  Matrix b_;
  std::vector<double> w_;
  double bias_;
  double process_noise_;
  double initial_scale_;
  double contamination_;
};

class Fleet {
 public:
  Fleet() = default;
  explicit Fleet(std::vector<SystemParams> params) : params_(std::move(params)) {
    systems_.reserve(params_.size());
    for (const auto& p : params_) systems_.emplace_back(p);
  }

  std::size_t size() const { return systems_.size(); }
  const SystemInterface& system(std::size_t i) const { return systems_.at(i); }
  std::size_t state_dim() const { return systems_.empty() ? 0 : systems_.front().state_dim(); }
  std::size_t action_dim() const { return systems_.empty() ? 0 : systems_.front().action_dim(); }
  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

  // Parameter summary for audit dumps; includes labels.
  nlohmann::ordered_json audit_json() const {
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const auto& p = params_[i];
      nlohmann::ordered_json row;
      row["system_id"] = i;
      row["label"] = p.is_anomalous ? 1 : 0;
      row["dynamics_spectral_norm"] = spectral_norm(p.dynamics);
      row["dynamics_frobenius_norm"] = frobenius_norm(p.dynamics);
      row["contamination_rate"] = p.contamination_rate;
      rows.push_back(std::move(row));
    }
    nlohmann::ordered_json j;
    j["size"] = params_.size();
    j["systems"] = std::move(rows);
    j["warnings"] = warnings_;
    return j;
  }

  friend std::vector<int> evaluation_labels(const Fleet& fleet);
  friend const std::vector<SystemParams>& evaluation_params(const Fleet& fleet);

 private:
  std::vector<SystemParams> params_;
  std::vector<LinearSystem> systems_;
  std::vector<std::string> warnings_;
};

// Ground-truth labels (1 = anomalous). For scoring and audits only.
inline std::vector<int> evaluation_labels(const Fleet& fleet) {
  std::vector<int> labels;
  labels.reserve(fleet.params_.size());
  for (const auto& p : fleet.params_) labels.push_back(p.is_anomalous ? 1 : 0);
  return labels;
}

inline const std::vector<SystemParams>& evaluation_params(const Fleet& fleet) {
  return fleet.params_;
}

// Parameters shared by both fleet kinds.
struct FleetCommon {
  std::size_t size = 200;
  double anomaly_fraction = 0.1;
  std::size_t state_dim = 6;
  std::size_t action_dim = 2;
  // Draws the shared normal model (A0, B0, w0).
  std::uint64_t shared_seed = 1;
  // Draws per-member perturbations and label placement.
  std::uint64_t member_seed = 2;
  double normal_jitter = 0.1;
  double process_noise = 0.02;
  double initial_state_scale = 0.5;
  double base_spectral_norm = 0.7;
  double reward_gain = 1.0;
  double reward_bias = 0.0;
};

struct TransitionFleetConfig {
  FleetCommon common;
  double anomaly_shift = 0.4;
  bool shared_anomaly_direction = false;
};

struct RewardFleetConfig {
  FleetCommon common;
  double contamination_rate = 0.2;
};

inline constexpr double kSpectralBound = 0.9;

namespace detail {

struct SharedModel {
  Matrix dynamics;
  Matrix input_map;
  std::vector<double> reward_weights;
};

inline void validate_common(const FleetCommon& c) {
  require(c.state_dim >= 1, "state dimension must be at least 1");
  require(c.action_dim >= 1, "action dimension must be at least 1");
  require(c.size >= 1, "fleet size must be at least 1");
  require(c.anomaly_fraction >= 0.0 && c.anomaly_fraction < 1.0,
          "anomaly fraction must lie in [0, 1)");
  require(c.normal_jitter >= 0.0, "normal jitter must be nonnegative");
  require(c.process_noise >= 0.0, "process noise must be nonnegative");
  require(c.initial_state_scale >= 0.0, "initial state scale must be nonnegative");
  require(c.base_spectral_norm > 0.0 && c.base_spectral_norm <= kSpectralBound,
          "base spectral norm must lie in (0, 0.9]");
}

inline SharedModel draw_shared(const FleetCommon& c) {
  Rng rng(derive_seed(c.shared_seed, 0x5a17ed));
  SharedModel m;
  Matrix a = random_gaussian(c.state_dim, c.state_dim, 1.0 / std::sqrt(c.state_dim), rng);
  const double norm = spectral_norm(a);
  for (auto& v : a.values) v *= c.base_spectral_norm / norm;
  m.dynamics = std::move(a);
  m.input_map = random_gaussian(c.state_dim, c.action_dim, 1.0 / std::sqrt(c.action_dim), rng);
  const std::size_t dw = c.state_dim + c.action_dim;
  Matrix w = random_gaussian(dw, 1, c.reward_gain / std::sqrt(static_cast<double>(dw)), rng);
  m.reward_weights = w.values;
  return m;
}

inline Matrix unit_direction(std::size_t n, Rng& rng) {
  Matrix e = random_gaussian(n, n, 1.0, rng);
  const double f = frobenius_norm(e);
  for (auto& v : e.values) v /= f;
  return e;
}

// Labels floor(rho * N) members anomalous at seeded random positions.
inline std::vector<bool> place_labels(const FleetCommon& c, Rng& rng) {
  const auto n_anom = static_cast<std::size_t>(std::floor(c.anomaly_fraction * c.size));
  std::vector<std::size_t> order(c.size);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> labels(c.size, false);
  for (std::size_t i = 0; i < n_anom; ++i) labels[order[i]] = true;
  return labels;
}

inline Matrix perturb(const Matrix& base, const Matrix& direction, double scale) {
  Matrix out = base;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += scale * direction.values[i];
  return spectral_rescale(out, kSpectralBound);
}

}  // namespace detail

inline Fleet make_transition_fleet(const TransitionFleetConfig& cfg) {
  const auto& c = cfg.common;
  detail::validate_common(c);
  require(cfg.anomaly_shift > 0.0, "anomaly shift must be positive");
  require(c.normal_jitter <= cfg.anomaly_shift, "normal jitter must not exceed anomaly shift");

  const detail::SharedModel shared = detail::draw_shared(c);
  Rng rng(derive_seed(c.member_seed, 0x7a11));
  const std::vector<bool> labels = detail::place_labels(c, rng);
  const Matrix common_direction = detail::unit_direction(c.state_dim, rng);

  std::vector<SystemParams> params;
  params.reserve(c.size);
  for (std::size_t i = 0; i < c.size; ++i) {
    SystemParams p;
    p.is_anomalous = labels[i];
    Matrix e = detail::unit_direction(c.state_dim, rng);
    if (p.is_anomalous && cfg.shared_anomaly_direction) e = common_direction;
    const double scale = p.is_anomalous ? cfg.anomaly_shift : c.normal_jitter;
    p.dynamics = detail::perturb(shared.dynamics, e, scale);
    p.input_map = shared.input_map;
    p.reward_weights = shared.reward_weights;
    p.reward_bias = c.reward_bias;
    p.process_noise = c.process_noise;
    p.initial_state_scale = c.initial_state_scale;
    params.push_back(std::move(p));
  }
  Fleet fleet(std::move(params));
  if (c.anomaly_fraction * c.size < 1.0) {
    fleet.add_warning("anomaly_fraction * size < 1: fleet has no anomalous members");
  }
  return fleet;
}

inline Fleet make_reward_fleet(const RewardFleetConfig& cfg) {
  const auto& c = cfg.common;
  detail::validate_common(c);
  require(cfg.contamination_rate >= 0.0 && cfg.contamination_rate <= 1.0,
          "contamination rate must lie in [0, 1]");

  const detail::SharedModel shared = detail::draw_shared(c);
  Rng rng(derive_seed(c.member_seed, 0x4e3a));
  const std::vector<bool> labels = detail::place_labels(c, rng);

  std::vector<SystemParams> params;
  params.reserve(c.size);
  for (std::size_t i = 0; i < c.size; ++i) {
    SystemParams p;
    p.is_anomalous = labels[i];
    const Matrix e = detail::unit_direction(c.state_dim, rng);
    p.dynamics = detail::perturb(shared.dynamics, e, c.normal_jitter);
    p.input_map = shared.input_map;
    p.reward_weights = shared.reward_weights;
    p.reward_bias = c.reward_bias;
    p.process_noise = c.process_noise;
    p.initial_state_scale = c.initial_state_scale;
    p.contamination_rate = p.is_anomalous ? cfg.contamination_rate : 0.0;
    params.push_back(std::move(p));
  }
  Fleet fleet(std::move(params));
  if (c.anomaly_fraction * c.size < 1.0) {
    fleet.add_warning("anomaly_fraction * size < 1: fleet has no anomalous members");
  }
  return fleet;
}

}  // namespace intersad
