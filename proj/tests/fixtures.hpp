#pragma once

// Finite-difference fixtures shared by the unit tests and the acceptance
// binary. Parameters are jittered away from their initialisation so that
// gate and bias gradients sit well above central-difference round-off.

#include <random>
#include <string>
#include <vector>

#include "intersad/sen_policy.hpp"

namespace fixture {

using namespace intersad;

inline void jitter(nn::ParamStore& store, Rng& rng, double sd = 0.5) {
  std::normal_distribution<double> n(0.0, sd);
  for (auto& [_, t] : store) {
    for (auto& v : t.values) v += n(rng);
  }
}

// Check restricted to the tensors whose name starts with `prefix`.
inline nn::FdReport fd_subset(const std::function<double(const nn::ParamStore&)>& loss,
                              const nn::ParamStore& params, const nn::GradMap& grads,
                              const std::string& prefix) {
  nn::ParamStore sub;
  nn::GradMap sub_grads;
  for (const auto& [name, t] : params) {
    if (name.starts_with(prefix)) {
      sub.add(name, t);
      sub_grads.add(name, grads.at(name));
    }
  }
  require(sub.tensor_count() > 0, "no parameters under prefix " + prefix);
  return nn::finite_diff_check(
      [&](const nn::ParamStore& s) {
        nn::ParamStore full = params;
        for (const auto& [name, t] : s) full.at(name) = t;
        return loss(full);
      },
      sub, sub_grads);
}

inline InteractionRecord random_record(const EmbedderDims& d, Rng& rng, std::size_t id = 0) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  InteractionRecord r;
  r.system_id = id;
  r.trajectory.resize(d.trajectory_length());
  for (auto& v : r.trajectory) v = n(rng);
  r.rewards.resize(d.horizon);
  for (auto& v : r.rewards) v = u(rng);
  return r;
}

inline EmbedderDims fd_dims() {
  return EmbedderDims{.state_dim = 3, .action_dim = 2, .horizon = 4, .embedding_dim = 5, .hidden_dim = 6};
}

// Squared distance of the policy output to a fixed target over three states.
inline nn::FdReport fd_policy(std::uint64_t seed) {
  Rng rng(seed);
  PolicyModel policy = PolicyModel::create(4, 2, rng, 8);
  jitter(policy.params, rng);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::vector<double>> states(3, std::vector<double>(4));
  for (auto& s : states) {
    for (auto& v : s) v = n(rng);
  }
  const std::vector<double> target = {0.3, -0.4};
  auto build = [&](nn::Tape& tape, const PolicyModel& p, bool trainable) {
    std::vector<nn::Var> terms;
    for (const auto& s : states) {
      nn::Var a = policy_forward(tape, p, tape.constant(s), trainable);
      terms.push_back(nn::sum_squares(tape, nn::sub(tape, a, tape.constant(target))));
    }
    return nn::sum(tape, terms);
  };
  nn::Tape tape;
  tape.backward(build(tape, policy, true));
  const auto grads = tape.gradients(policy.params);
  return nn::finite_diff_check(
      [&](const nn::ParamStore& ps) {
        PolicyModel probe = policy;
        probe.params = ps;
        nn::Tape t;
        return t.scalar(build(t, probe, false));
      },
      policy.params, grads);
}

// Reconstruction loss on a two-record batch, checked on the tensors under
// `prefix` ("encoder" or "decoder").
inline nn::FdReport fd_embedder(std::uint64_t seed, Mode mode, const std::string& prefix) {
  Rng rng(seed);
  EmbedderModel model = EmbedderModel::create(mode, fd_dims(), rng);
  jitter(model.params, rng);
  const std::vector<InteractionRecord> batch = {random_record(model.dims, rng, 0), random_record(model.dims, rng, 1)};
  const auto grads = reconstruction_gradient(model, batch);
  return fd_subset(
      [&](const nn::ParamStore& ps) {
        EmbedderModel probe = model;
        probe.params = ps;
        return reconstruction_loss(probe, batch);
      },
      model.params, grads, prefix);
}

struct SenSetup {
  PolicyModel policy;
  EmbedderModel encoder;
  std::vector<InteractionRecord> batch;
};

// Small policy/encoder pair and a batch whose actions come from the policy.
inline SenSetup sen_setup(std::uint64_t seed, std::size_t batch = 3) {
  Rng rng(seed);
  SenSetup s;
  s.policy = PolicyModel::create(3, 2, rng, 8);
  s.encoder = EmbedderModel::create(
      Mode::transition, EmbedderDims{.state_dim = 3, .action_dim = 2, .horizon = 3, .embedding_dim = 4, .hidden_dim = 5},
      rng);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t i = 0; i < batch; ++i) {
    InteractionRecord r;
    r.system_id = i;
    for (int t = 0; t < 3; ++t) {
      std::vector<double> obs(3);
      for (auto& v : obs) v = n(rng);
      const auto a = policy_act(s.policy, obs);
      r.trajectory.insert(r.trajectory.end(), obs.begin(), obs.end());
      r.trajectory.insert(r.trajectory.end(), a.begin(), a.end());
      r.rewards.push_back(0.0);
    }
    s.batch.push_back(r);
  }
  return s;
}

// SEN loss through the frozen encoder with the batch centroid held fixed:
// actions are recomputed from the perturbed policy on the recorded states.
inline nn::FdReport fd_sen(std::uint64_t seed) {
  const SenSetup s = sen_setup(seed);
  const auto g = sen_gradient(s.policy, s.encoder, s.batch);
  return nn::finite_diff_check(
      [&](const nn::ParamStore& p) {
        PolicyModel probe = s.policy;
        probe.params = p;
        return sen_objective(probe, s.encoder, s.batch, g.center);
      },
      s.policy.params, g.grads);
}

}  // namespace fixture
