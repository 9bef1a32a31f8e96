#pragma once

// Trajectory encoder-decoder.
//
// encoder: recurrent cell over per-step [s_t; a_t], then an identity dense
//          projection of the final hidden state to R^D.
// decoder: dense(D -> 2D, tanh) -> dense(2D -> out, identity), where out is
//          the trajectory length (transition mode) or T (reward mode).

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "intersad/common.hpp"
#include "intersad/mdp_core.hpp"
#include "intersad/tensor_nn.hpp"

namespace intersad {

enum class Mode { transition, reward };

inline std::string to_string(Mode m) { return m == Mode::transition ? "transition" : "reward"; }

inline Mode mode_from_string(const std::string& s) {
  if (s == "transition") return Mode::transition;
  if (s == "reward") return Mode::reward;
  throw ContractViolation("unknown mode '" + s + "' (expected transition or reward)");
}

struct EmbedderDims {
  std::size_t state_dim = 6;
  std::size_t action_dim = 2;
  std::size_t horizon = 10;
  std::size_t embedding_dim = 16;
  std::size_t hidden_dim = 32;

  std::size_t step_dim() const { return state_dim + action_dim; }
  std::size_t trajectory_length() const { return horizon * step_dim(); }
  friend bool operator==(const EmbedderDims&, const EmbedderDims&) = default;
};

struct EmbedderModel {
  Mode mode = Mode::transition;
  EmbedderDims dims;
  nn::ParamStore params;

  static EmbedderModel create(Mode mode, const EmbedderDims& dims, Rng& rng) {
    require(dims.state_dim >= 1 && dims.action_dim >= 1 && dims.horizon >= 1 &&
                dims.embedding_dim >= 1 && dims.hidden_dim >= 1,
            "embedder dimensions must be positive");
    EmbedderModel m;
    m.mode = mode;
    m.dims = dims;
    nn::init_gru(m.params, "encoder.cell", dims.step_dim(), dims.hidden_dim, rng);
    nn::init_dense(m.params, "encoder.proj", dims.hidden_dim, dims.embedding_dim, rng);
    nn::init_dense(m.params, "decoder.hidden", dims.embedding_dim, 2 * dims.embedding_dim, rng);
    nn::init_dense(m.params, "decoder.out", 2 * dims.embedding_dim, m.output_dim(), rng);
    return m;
  }

  std::size_t output_dim() const {
    return mode == Mode::transition ? dims.trajectory_length() : dims.horizon;
  }
};

// Tape-level building blocks.

inline nn::Var encode(nn::Tape& tape, const EmbedderModel& model, std::span<const nn::Var> steps,
                      bool trainable) {
  require(steps.size() == model.dims.horizon, "encoder expects exactly T steps");
  nn::Var h = nn::recurrent_encode(tape, model.params, "encoder.cell", steps, trainable);
  return nn::dense(tape, model.params, "encoder.proj", h, nn::Activation::identity, trainable);
}

inline nn::Var decode(nn::Tape& tape, const EmbedderModel& model, nn::Var u, bool trainable) {
  require(tape.value(u).size() == model.dims.embedding_dim, "decoder input must have length D");
  nn::Var h = nn::dense(tape, model.params, "decoder.hidden", u, nn::Activation::tanh, trainable);
  return nn::dense(tape, model.params, "decoder.out", h, nn::Activation::identity, trainable);
}

// Splits a flat trajectory into T constant step vectors [s_t; a_t].
inline std::vector<nn::Var> trajectory_steps(nn::Tape& tape, const EmbedderModel& model,
                                             std::span<const double> trajectory) {
  const auto& d = model.dims;
  require(trajectory.size() == d.trajectory_length(),
          "trajectory length must equal T * (d_s + d_a)");
  std::vector<nn::Var> steps;
  steps.reserve(d.horizon);
  for (std::size_t t = 0; t < d.horizon; ++t) {
    steps.push_back(tape.constant(trajectory.subspan(t * d.step_dim(), d.step_dim())));
  }
  return steps;
}

inline const std::vector<double>& reconstruction_target(const EmbedderModel& model,
                                                        const InteractionRecord& rec) {
  return model.mode == Mode::transition ? rec.trajectory : rec.rewards;
}

// Sum over the batch of squared error between decode(encode(tau)) and the
// mode-dependent target.
inline nn::Var reconstruction_loss(nn::Tape& tape, const EmbedderModel& model,
                                   std::span<const InteractionRecord> batch, bool trainable) {
  require(!batch.empty(), "reconstruction loss needs a nonempty batch");
  std::vector<nn::Var> terms;
  terms.reserve(batch.size());
  for (const auto& rec : batch) {
    const auto& target = reconstruction_target(model, rec);
    require(target.size() == model.output_dim(), "record target length does not match model");
    const auto steps = trajectory_steps(tape, model, rec.trajectory);
    nn::Var out = decode(tape, model, encode(tape, model, steps, trainable), trainable);
    terms.push_back(nn::sum_squares(tape, nn::sub(tape, out, tape.constant(target))));
  }
  return nn::sum(tape, terms);
}

// Plain forward passes.

inline std::vector<double> encode(const EmbedderModel& model, std::span<const double> trajectory) {
  nn::Tape tape;
  const auto steps = trajectory_steps(tape, model, trajectory);
  return tape.value(encode(tape, model, steps, false)).values;
}

inline std::vector<double> decode(const EmbedderModel& model, std::span<const double> u) {
  require(u.size() == model.dims.embedding_dim, "decoder input must have length D");
  nn::Tape tape;
  return tape.value(decode(tape, model, tape.constant(u), false)).values;
}

inline double reconstruction_loss(const EmbedderModel& model,
                                  std::span<const InteractionRecord> batch) {
  nn::Tape tape;
  return tape.scalar(reconstruction_loss(tape, model, batch, false));
}

inline nn::GradMap reconstruction_gradient(const EmbedderModel& model,
                                           std::span<const InteractionRecord> batch,
                                           double* loss_out = nullptr) {
  nn::Tape tape;
  nn::Var loss = reconstruction_loss(tape, model, batch, true);
  tape.backward(loss);
  if (loss_out) *loss_out = tape.scalar(loss);
  return tape.gradients(model.params);
}

// One optimizer step on theta_E, theta_D. Returns the pre-step loss.
inline double embedder_train_step(EmbedderModel& model, std::span<const InteractionRecord> batch,
                                  nn::AdamState& opt, double lr) {
  double loss = 0.0;
  const nn::GradMap grads = reconstruction_gradient(model, batch, &loss);
  if (!std::isfinite(loss)) throw NumericError("non-finite reconstruction loss");
  nn::adam_step(model.params, grads, nn::AdamConfig{.lr = lr}, opt);
  return loss;
}

inline nlohmann::ordered_json to_json(const EmbedderModel& model) {
  nlohmann::ordered_json j;
  j["kind"] = "embedder";
  j["mode"] = to_string(model.mode);
  j["dims"] = {{"state_dim", model.dims.state_dim},
               {"action_dim", model.dims.action_dim},
               {"horizon", model.dims.horizon},
               {"embedding_dim", model.dims.embedding_dim},
               {"hidden_dim", model.dims.hidden_dim}};
  j["params"] = model.params.to_json();
  return j;
}

inline EmbedderModel embedder_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("kind").get<std::string>() != "embedder") throw LoadError("not an embedder checkpoint");
    EmbedderModel m;
    m.mode = mode_from_string(j.at("mode").get<std::string>());
    const auto& d = j.at("dims");
    m.dims.state_dim = d.at("state_dim").get<std::size_t>();
    m.dims.action_dim = d.at("action_dim").get<std::size_t>();
    m.dims.horizon = d.at("horizon").get<std::size_t>();
    m.dims.embedding_dim = d.at("embedding_dim").get<std::size_t>();
    m.dims.hidden_dim = d.at("hidden_dim").get<std::size_t>();
    m.params = nn::ParamStore::from_json(j.at("params"));
    Rng scratch(0);
    const EmbedderModel layout = EmbedderModel::create(m.mode, m.dims, scratch);
    if (!layout.params.same_layout(m.params)) throw LoadError("embedder parameters do not match dims");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed embedder checkpoint: ") + e.what());
  } catch (const ContractViolation& e) {
    throw LoadError(std::string("invalid embedder checkpoint: ") + e.what());
  }
}

}  // namespace intersad
