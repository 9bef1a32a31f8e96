#pragma once

// Deterministic activation policy and System Embedding Neutralization (SEN).
//
// The policy update differentiates the centroid objective
//   L_mu = sum_i || u_i - u_c ||_2,   u_i = f_E(tau_i)
// through the encoder into the action entries of each trajectory, and from
// there into the policy parameters via a_t = mu(s_t). Recorded observations
// s_t and the batch centroid u_c are held constant; the encoder is frozen.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "intersad/common.hpp"
#include "intersad/embedder.hpp"
#include "intersad/mdp_core.hpp"
#include "intersad/tensor_nn.hpp"

namespace intersad {

struct PolicyModel {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::size_t hidden_dim = 64;
  nn::ParamStore params;

  static PolicyModel create(std::size_t state_dim, std::size_t action_dim, Rng& rng,
                            std::size_t hidden_dim = 64) {
    PolicyModel p;
    p.state_dim = state_dim;
    p.action_dim = action_dim;
    p.hidden_dim = hidden_dim;
    nn::init_dense(p.params, "policy.l1", state_dim, hidden_dim, rng);
    nn::init_dense(p.params, "policy.l2", hidden_dim, hidden_dim, rng);
    nn::init_dense(p.params, "policy.out", hidden_dim, action_dim, rng);
    return p;
  }

  std::size_t input_dim() const { return state_dim; }
  std::size_t output_dim() const { return action_dim; }
  std::vector<double> act(std::span<const double> state, Rng&) const;
};

static_assert(ActionSource<PolicyModel>);

inline nn::Var policy_forward(nn::Tape& tape, const PolicyModel& policy, nn::Var state,
                              bool trainable) {
  require(tape.value(state).size() == policy.state_dim, "policy input must have length d_s");
  using nn::Activation;
  nn::Var h = nn::dense(tape, policy.params, "policy.l1", state, Activation::tanh, trainable);
  h = nn::dense(tape, policy.params, "policy.l2", h, Activation::tanh, trainable);
  return nn::dense(tape, policy.params, "policy.out", h, Activation::tanh, trainable);
}

inline std::vector<double> policy_act(const PolicyModel& policy, std::span<const double> state) {
  require(state.size() == policy.state_dim, "policy input must have length d_s");
  nn::Tape tape;
  return tape.value(policy_forward(tape, policy, tape.constant(state), false)).values;
}

inline std::vector<double> PolicyModel::act(std::span<const double> state, Rng&) const {
  return policy_act(*this, state);
}

// ---------------------------------------------------------------------------
// Objectives over plain embeddings

inline std::vector<double> centroid(std::span<const std::vector<double>> u) {
  require(!u.empty(), "centroid of an empty embedding set");
  const std::size_t d = u.front().size();
  std::vector<double> c(d, 0.0);
  for (const auto& v : u) {
    require(v.size() == d, "embeddings must share one dimension");
    for (std::size_t k = 0; k < d; ++k) c[k] += v[k];
  }
  for (auto& x : c) x /= static_cast<double>(u.size());
  return c;
}

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(acc);
}

// sum_i || u_i - u_c ||_2 with u_c the batch mean.
inline double sen_loss(std::span<const std::vector<double>> u) {
  const std::vector<double> c = centroid(u);
  double total = 0.0;
  for (const auto& v : u) total += euclidean(v, c);
  return total;
}

// sum_i sum_j || u_i - u_j ||_2 over ordered pairs.
inline double pairwise_loss(std::span<const std::vector<double>> u) {
  require(!u.empty(), "pairwise loss of an empty embedding set");
  const std::size_t d = u.front().size();
  double total = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    require(u[i].size() == d, "embeddings must share one dimension");
    for (std::size_t j = 0; j < u.size(); ++j) {
      if (i != j) total += euclidean(u[i], u[j]);
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Policy update

namespace detail {

inline void check_batch(const PolicyModel& policy, const EmbedderModel& encoder,
                        std::span<const InteractionRecord> batch) {
  require(!batch.empty(), "SEN update needs a nonempty batch");
  require(policy.state_dim == encoder.dims.state_dim &&
              policy.action_dim == encoder.dims.action_dim,
          "policy and encoder dimensions disagree");
  for (const auto& rec : batch) {
    require(rec.trajectory.size() == encoder.dims.trajectory_length(),
            "record trajectory length does not match the encoder");
  }
}

// Embedding of one record with actions recomputed on the tape from the
// recorded observations.
inline nn::Var embed_with_policy(nn::Tape& tape, const PolicyModel& policy,
                                 const EmbedderModel& encoder, const InteractionRecord& rec) {
  const auto& d = encoder.dims;
  std::vector<nn::Var> steps;
  steps.reserve(d.horizon);
  for (std::size_t t = 0; t < d.horizon; ++t) {
    const auto obs = std::span<const double>(rec.trajectory).subspan(t * d.step_dim(), d.state_dim);
    nn::Var s = tape.constant(obs);
    nn::Var a = policy_forward(tape, policy, s, true);
    steps.push_back(nn::concat(tape, s, a));
  }
  return encode(tape, encoder, steps, false);
}

}  // namespace detail

// L_mu under the stop-gradient convention. If `center` is given it replaces
// the batch mean, which lets a finite-difference oracle hold u_c fixed.
inline double sen_objective(const PolicyModel& policy, const EmbedderModel& encoder,
                            std::span<const InteractionRecord> batch,
                            const std::optional<std::vector<double>>& center = std::nullopt) {
  detail::check_batch(policy, encoder, batch);
  nn::Tape tape;
  std::vector<std::vector<double>> u;
  u.reserve(batch.size());
  for (const auto& rec : batch) u.push_back(tape.value(detail::embed_with_policy(tape, policy, encoder, rec)).values);
  const std::vector<double> c = center ? *center : centroid(u);
  double total = 0.0;
  for (const auto& v : u) total += euclidean(v, c);
  return total;
}

struct SenGradient {
  nn::GradMap grads;
  double loss = 0.0;
  std::vector<double> center;
};

inline SenGradient sen_gradient(const PolicyModel& policy, const EmbedderModel& encoder,
                                std::span<const InteractionRecord> batch) {
  detail::check_batch(policy, encoder, batch);
  nn::Tape tape;
  std::vector<nn::Var> u;
  std::vector<std::vector<double>> values;
  u.reserve(batch.size());
  for (const auto& rec : batch) {
    u.push_back(detail::embed_with_policy(tape, policy, encoder, rec));
    values.push_back(tape.value(u.back()).values);
  }
  SenGradient out;
  out.center = centroid(values);
  nn::Var c = tape.constant(out.center);
  std::vector<nn::Var> terms;
  terms.reserve(u.size());
  for (nn::Var ui : u) terms.push_back(nn::l2_norm(tape, nn::sub(tape, ui, c)));
  nn::Var loss = nn::sum(tape, terms);
  tape.backward(loss);
  out.loss = tape.scalar(loss);
  out.grads = tape.gradients(policy.params);
  return out;
}

// One optimizer step on theta_mu from a fresh batch. Returns the pre-step L_mu.
inline double sen_policy_update(PolicyModel& policy, const EmbedderModel& encoder,
                                std::span<const InteractionRecord> batch, nn::AdamState& opt,
                                double lr) {
  const SenGradient g = sen_gradient(policy, encoder, batch);
  if (!std::isfinite(g.loss)) throw NumericError("non-finite SEN loss");
  nn::adam_step(policy.params, g.grads, nn::AdamConfig{.lr = lr}, opt);
  return g.loss;
}

inline nlohmann::ordered_json to_json(const PolicyModel& policy) {
  nlohmann::ordered_json j;
  j["kind"] = "policy";
  j["dims"] = {{"state_dim", policy.state_dim},
               {"action_dim", policy.action_dim},
               {"hidden_dim", policy.hidden_dim}};
  j["params"] = policy.params.to_json();
  return j;
}

inline PolicyModel policy_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("kind").get<std::string>() != "policy") throw LoadError("not a policy checkpoint");
    PolicyModel p;
    const auto& d = j.at("dims");
    p.state_dim = d.at("state_dim").get<std::size_t>();
    p.action_dim = d.at("action_dim").get<std::size_t>();
    p.hidden_dim = d.at("hidden_dim").get<std::size_t>();
    p.params = nn::ParamStore::from_json(j.at("params"));
    Rng scratch(0);
    const PolicyModel layout = PolicyModel::create(p.state_dim, p.action_dim, scratch, p.hidden_dim);
    if (!layout.params.same_layout(p.params)) throw LoadError("policy parameters do not match dims");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed policy checkpoint: ") + e.what());
  } catch (const ContractViolation& e) {
    throw LoadError(std::string("invalid policy checkpoint: ") + e.what());
  }
}

}  // namespace intersad
