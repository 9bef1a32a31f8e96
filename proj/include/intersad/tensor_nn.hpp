#pragma once

// Minimal reverse-mode differentiation over small dense tensors.
//
// Every forward computation in the library (policy actions, encoder,
// decoder) is built from the ops in this header and recorded on a Tape.
// Nodes that do not depend on a trainable parameter skip their backward
// closure entirely, so a tape with only constants is a plain forward pass.

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "intersad/common.hpp"

namespace intersad::nn {

// Row-major matrix; a column vector has cols == 1.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  static Tensor column(std::vector<double> v) {
    Tensor t;
    t.rows = v.size();
    t.cols = 1;
    t.values = std::move(v);
    return t;
  }

  std::size_t size() const { return values.size(); }
  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> span() const { return values; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

enum class Activation { identity, tanh, logistic };

inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Parameters

class ParamStore {
 public:
  void add(const std::string& name, Tensor t) {
    require(!tensors_.contains(name), "duplicate parameter: " + name);
    tensors_.emplace(name, std::move(t));
  }
  bool contains(const std::string& name) const { return tensors_.contains(name); }
  const Tensor& at(const std::string& name) const {
    auto it = tensors_.find(name);
    require(it != tensors_.end(), "unknown parameter: " + name);
    return it->second;
  }
  Tensor& at(const std::string& name) {
    auto it = tensors_.find(name);
    require(it != tensors_.end(), "unknown parameter: " + name);
    return it->second;
  }

  std::size_t tensor_count() const { return tensors_.size(); }
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : tensors_) n += t.size();
    return n;
  }

  // Concatenation of all tensors in name order.
  std::vector<double> flatten() const {
    std::vector<double> flat;
    flat.reserve(count());
    for (const auto& [_, t] : tensors_) flat.insert(flat.end(), t.values.begin(), t.values.end());
    return flat;
  }

  void unflatten(std::span<const double> flat) {
    require(flat.size() == count(), "flat vector length does not match parameter count");
    std::size_t offset = 0;
    for (auto& [_, t] : tensors_) {
      std::copy(flat.begin() + offset, flat.begin() + offset + t.size(), t.values.begin());
      offset += t.size();
    }
  }

  ParamStore zeros_like() const {
    ParamStore z;
    for (const auto& [name, t] : tensors_) z.tensors_.emplace(name, Tensor(t.rows, t.cols));
    return z;
  }

  bool same_layout(const ParamStore& other) const {
    if (tensors_.size() != other.tensors_.size()) return false;
    auto a = tensors_.begin();
    auto b = other.tensors_.begin();
    for (; a != tensors_.end(); ++a, ++b) {
      if (a->first != b->first || a->second.rows != b->second.rows ||
          a->second.cols != b->second.cols) {
        return false;
      }
    }
    return true;
  }

  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }
  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }

  friend bool operator==(const ParamStore&, const ParamStore&) = default;

  static constexpr int kFormatVersion = 1;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["format_version"] = kFormatVersion;
    auto names = nlohmann::ordered_json::array();
    auto shapes = nlohmann::ordered_json::array();
    for (const auto& [name, t] : tensors_) {
      names.push_back(name);
      shapes.push_back({t.rows, t.cols});
    }
    j["names"] = std::move(names);
    j["shapes"] = std::move(shapes);
    j["flat_values"] = flatten();
    return j;
  }

  static ParamStore from_json(const nlohmann::ordered_json& j) {
    try {
      if (!j.is_object() || !j.contains("format_version")) {
        throw LoadError("parameter block lacks format_version");
      }
      const int version = j.at("format_version").get<int>();
      if (version != kFormatVersion) {
        throw LoadError("unsupported parameter format_version " + std::to_string(version));
      }
      const auto& names = j.at("names");
      const auto& shapes = j.at("shapes");
      const auto flat = j.at("flat_values").get<std::vector<double>>();
      if (names.size() != shapes.size()) throw LoadError("names/shapes length mismatch");
      ParamStore store;
      std::size_t offset = 0;
      for (std::size_t i = 0; i < names.size(); ++i) {
        const auto rows = shapes[i].at(0).get<std::size_t>();
        const auto cols = shapes[i].at(1).get<std::size_t>();
        Tensor t(rows, cols);
        if (offset + t.size() > flat.size()) throw LoadError("flat_values too short");
        std::copy(flat.begin() + offset, flat.begin() + offset + t.size(), t.values.begin());
        offset += t.size();
        store.add(names[i].get<std::string>(), std::move(t));
      }
      if (offset != flat.size()) throw LoadError("flat_values too long");
      return store;
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(std::string("malformed parameter block: ") + e.what());
    }
  }

 private:
  std::map<std::string, Tensor> tensors_;
};

using GradMap = ParamStore;

// Dense layer: W ~ U(-sqrt(1/fan_in), +sqrt(1/fan_in)), b = 0.
inline void init_dense(ParamStore& store, const std::string& prefix, std::size_t fan_in,
                       std::size_t fan_out, Rng& rng) {
  require(fan_in > 0 && fan_out > 0, "dense layer dimensions must be positive");
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor w(fan_out, fan_in);
  for (auto& v : w.values) v = dist(rng);
  store.add(prefix + ".W", std::move(w));
  store.add(prefix + ".b", Tensor(fan_out, 1));
}

// Gated recurrent cell with update (z) and reset (r) gates:
//   z  = logistic(Wz x + Uz h + bz)
//   r  = logistic(Wr x + Ur h + br)
//   n  = tanh(Wn x + Un (r*h) + bn)
//   h' = n + z * (h - n)
inline void init_gru(ParamStore& store, const std::string& prefix, std::size_t input,
                     std::size_t hidden, Rng& rng) {
  require(input > 0 && hidden > 0, "recurrent cell dimensions must be positive");
  const double in_bound = std::sqrt(1.0 / static_cast<double>(input));
  const double h_bound = std::sqrt(1.0 / static_cast<double>(hidden));
  for (const char* gate : {"z", "r", "n"}) {
    std::uniform_real_distribution<double> win(-in_bound, in_bound);
    std::uniform_real_distribution<double> wh(-h_bound, h_bound);
    Tensor w(hidden, input);
    for (auto& v : w.values) v = win(rng);
    Tensor u(hidden, hidden);
    for (auto& v : u.values) v = wh(rng);
    store.add(prefix + ".W" + gate, std::move(w));
    store.add(prefix + ".U" + gate, std::move(u));
    store.add(prefix + ".b" + gate, Tensor(hidden, 1));
  }
}

// ---------------------------------------------------------------------------
// Tape

struct Var {
  std::size_t id = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value) { return push(std::move(value), false, nullptr); }
  Var constant(std::span<const double> v) {
    return constant(Tensor::column(std::vector<double>(v.begin(), v.end())));
  }

  // Binds a stored parameter. Trainable bindings receive gradients; frozen
  // bindings behave as constants. The store must outlive the tape.
  Var param(const ParamStore& store, const std::string& name, bool trainable = true) {
    const std::string key = (trainable ? "T:" : "F:") + name;
    if (auto it = bound_.find(key); it != bound_.end()) return Var{it->second};
    Node node;
    node.ref = &store.at(name);
    node.requires_grad = trainable;
    nodes_.push_back(std::move(node));
    const std::size_t id = nodes_.size() - 1;
    bound_.emplace(key, id);
    if (trainable) trainable_.emplace(name, id);
    return Var{id};
  }

  Var push(Tensor value, bool requires_grad, Backward backward) {
    Node node;
    node.owned = std::move(value);
    node.requires_grad = requires_grad;
    if (requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
  }

  const Tensor& value(Var v) const { return nodes_[v.id].value(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value(); }
  double scalar(Var v) const {
    const auto& t = value(v);
    require(t.size() == 1, "tensor is not a scalar");
    return t.values[0];
  }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient buffer of a node, allocated on first touch.
  Tensor& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.values.empty()) {
      const Tensor& v = n.value();
      n.grad = Tensor(v.rows, v.cols);
    }
    return n.grad;
  }

  void backward(Var loss) {
    require(value(loss).size() == 1, "backward requires a scalar loss");
    if (!nodes_[loss.id].requires_grad) return;
    grad(loss.id).values[0] += 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || !n.backward || n.grad.values.empty()) continue;
      n.backward(*this, i);
    }
  }

  // Gradients for every parameter of `store`; untouched parameters get zeros.
  GradMap gradients(const ParamStore& store) const {
    GradMap g = store.zeros_like();
    for (const auto& [name, id] : trainable_) {
      if (!g.contains(name)) continue;
      const Tensor& src = nodes_[id].grad;
      if (!src.values.empty()) g.at(name).values = src.values;
    }
    return g;
  }

 private:
  struct Node {
    Tensor owned;
    const Tensor* ref = nullptr;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
    const Tensor& value() const { return ref ? *ref : owned; }
  };

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> bound_;
  std::map<std::string, std::size_t> trainable_;
};

// ---------------------------------------------------------------------------
// Ops

inline Var matvec(Tape& tape, Var w, Var x) {
  const Tensor& W = tape.value(w);
  const Tensor& X = tape.value(x);
  require(X.cols == 1 && W.cols == X.rows, "matvec shape mismatch");
  Tensor y(W.rows, 1);
  for (std::size_t r = 0; r < W.rows; ++r) {
    const double* row = &W.values[r * W.cols];
    double acc = 0.0;
    for (std::size_t c = 0; c < W.cols; ++c) acc += row[c] * X.values[c];
    y.values[r] = acc;
  }
  const bool rg = tape.requires_grad(w) || tape.requires_grad(x);
  return tape.push(std::move(y), rg, [w, x](Tape& t, std::size_t self) {
    const Tensor& W = t.value(w);
    const std::vector<double>& g = t.grad(self).values;
    if (t.requires_grad(w)) {
      const std::vector<double>& xv = t.value(x).values;
      Tensor& gw = t.grad(w.id);
      for (std::size_t r = 0; r < W.rows; ++r) {
        if (g[r] == 0.0) continue;
        double* row = &gw.values[r * W.cols];
        for (std::size_t c = 0; c < W.cols; ++c) row[c] += g[r] * xv[c];
      }
    }
    if (t.requires_grad(x)) {
      Tensor& gx = t.grad(x.id);
      for (std::size_t r = 0; r < W.rows; ++r) {
        const double* row = &W.values[r * W.cols];
        for (std::size_t c = 0; c < W.cols; ++c) gx.values[c] += row[c] * g[r];
      }
    }
  });
}

namespace detail {

template <class Fwd, class DA, class DB>
Var binary(Tape& tape, Var a, Var b, Fwd fwd, DA da, DB db) {
  const Tensor& A = tape.value(a);
  const Tensor& B = tape.value(b);
  require(A.rows == B.rows && A.cols == B.cols, "elementwise shape mismatch");
  Tensor y(A.rows, A.cols);
  for (std::size_t i = 0; i < y.size(); ++i) y.values[i] = fwd(A.values[i], B.values[i]);
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  return tape.push(std::move(y), rg, [a, b, da, db](Tape& t, std::size_t self) {
    const std::vector<double>& g = t.grad(self).values;
    const Tensor& A = t.value(a);
    const Tensor& B = t.value(b);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga.values[i] += g[i] * da(A.values[i], B.values[i]);
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb.values[i] += g[i] * db(A.values[i], B.values[i]);
    }
  });
}

// `deriv(x, y)` receives the input and the output of the forward map.
template <class Fwd, class Deriv>
Var unary(Tape& tape, Var a, Fwd fwd, Deriv deriv) {
  const Tensor& A = tape.value(a);
  Tensor y(A.rows, A.cols);
  for (std::size_t i = 0; i < y.size(); ++i) y.values[i] = fwd(A.values[i]);
  return tape.push(std::move(y), tape.requires_grad(a), [a, deriv](Tape& t, std::size_t self) {
    const std::vector<double>& g = t.grad(self).values;
    const std::vector<double>& x = t.value(a).values;
    const std::vector<double>& y = t.value(self).values;
    Tensor& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga.values[i] += g[i] * deriv(x[i], y[i]);
  });
}

}  // namespace detail

inline Var add(Tape& tape, Var a, Var b) {
  return detail::binary(
      tape, a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

inline Var sub(Tape& tape, Var a, Var b) {
  return detail::binary(
      tape, a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

inline Var mul(Tape& tape, Var a, Var b) {
  return detail::binary(
      tape, a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

inline Var tanh(Tape& tape, Var a) {
  return detail::unary(
      tape, a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

inline Var logistic(Tape& tape, Var a) {
  return detail::unary(
      tape, a, [](double x) { return nn::logistic(x); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Var scale(Tape& tape, Var a, double c) {
  return detail::unary(
      tape, a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Var activate(Tape& tape, Var a, Activation act) {
  switch (act) {
    case Activation::tanh:
      return tanh(tape, a);
    case Activation::logistic:
      return logistic(tape, a);
    case Activation::identity:
      break;
  }
  return a;
}

inline Var concat(Tape& tape, Var a, Var b) {
  const Tensor& A = tape.value(a);
  const Tensor& B = tape.value(b);
  require(A.cols == 1 && B.cols == 1, "concat expects column vectors");
  std::vector<double> v = A.values;
  v.insert(v.end(), B.values.begin(), B.values.end());
  const std::size_t na = A.size();
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  return tape.push(Tensor::column(std::move(v)), rg, [a, b, na](Tape& t, std::size_t self) {
    const std::vector<double>& g = t.grad(self).values;
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad(a.id);
      for (std::size_t i = 0; i < na; ++i) ga.values[i] += g[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad(b.id);
      for (std::size_t i = na; i < g.size(); ++i) gb.values[i - na] += g[i];
    }
  });
}

inline Var sum_squares(Tape& tape, Var a) {
  const Tensor& A = tape.value(a);
  double acc = 0.0;
  for (double v : A.values) acc += v * v;
  return tape.push(Tensor::column({acc}), tape.requires_grad(a), [a](Tape& t, std::size_t self) {
    const double g = t.grad(self).values[0];
    const std::vector<double>& x = t.value(a).values;
    Tensor& ga = t.grad(a.id);
    for (std::size_t i = 0; i < x.size(); ++i) ga.values[i] += 2.0 * x[i] * g;
  });
}

// Euclidean norm; the subgradient at the origin is taken as zero.
inline Var l2_norm(Tape& tape, Var a) {
  const Tensor& A = tape.value(a);
  double acc = 0.0;
  for (double v : A.values) acc += v * v;
  const double norm = std::sqrt(acc);
  return tape.push(Tensor::column({norm}), tape.requires_grad(a), [a](Tape& t, std::size_t self) {
    const double norm = t.value(self).values[0];
    if (norm == 0.0) return;
    const double g = t.grad(self).values[0];
    const std::vector<double>& x = t.value(a).values;
    Tensor& ga = t.grad(a.id);
    for (std::size_t i = 0; i < x.size(); ++i) ga.values[i] += g * x[i] / norm;
  });
}

// Sum of scalar nodes, accumulated left to right.
inline Var sum(Tape& tape, std::span<const Var> terms) {
  require(!terms.empty(), "sum of an empty term list");
  double acc = 0.0;
  bool rg = false;
  for (Var v : terms) {
    acc += tape.scalar(v);
    rg = rg || tape.requires_grad(v);
  }
  std::vector<Var> parents(terms.begin(), terms.end());
  return tape.push(Tensor::column({acc}), rg, [parents](Tape& t, std::size_t self) {
    const double g = t.grad(self).values[0];
    for (Var v : parents) {
      if (t.requires_grad(v)) t.grad(v.id).values[0] += g;
    }
  });
}

inline Var dense(Tape& tape, const ParamStore& store, const std::string& prefix, Var x,
                 Activation act, bool trainable) {
  Var w = tape.param(store, prefix + ".W", trainable);
  Var b = tape.param(store, prefix + ".b", trainable);
  return activate(tape, add(tape, matvec(tape, w, x), b), act);
}

inline Var gru_step(Tape& tape, const ParamStore& store, const std::string& prefix, Var h,
                    Var x, bool trainable) {
  auto gate_pre = [&](const std::string& g, Var hin) {
    Var wx = matvec(tape, tape.param(store, prefix + ".W" + g, trainable), x);
    Var uh = matvec(tape, tape.param(store, prefix + ".U" + g, trainable), hin);
    return add(tape, add(tape, wx, uh), tape.param(store, prefix + ".b" + g, trainable));
  };
  Var z = logistic(tape, gate_pre("z", h));
  Var r = logistic(tape, gate_pre("r", h));
  Var n = tanh(tape, gate_pre("n", mul(tape, r, h)));
  return add(tape, n, mul(tape, z, sub(tape, h, n)));
}

// Final hidden state after consuming `steps` left to right from h = 0.
inline Var recurrent_encode(Tape& tape, const ParamStore& store, const std::string& prefix,
                            std::span<const Var> steps, bool trainable) {
  require(!steps.empty(), "recurrent_encode needs a nonempty sequence");
  const std::size_t hidden = store.at(prefix + ".Uz").rows;
  const std::size_t input = store.at(prefix + ".Wz").cols;
  Var h = tape.constant(Tensor(hidden, 1));
  for (Var x : steps) {
    require(tape.value(x).size() == input, "recurrent step dimension mismatch");
    h = gru_step(tape, store, prefix, h, x, trainable);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Plain forward entry points (constant-only tapes).

inline std::vector<double> dense_forward(std::span<const double> x, const Tensor& W,
                                         const Tensor& b, Activation act) {
  require(W.cols == x.size() && b.rows == W.rows && b.cols == 1, "dense_forward shape mismatch");
  ParamStore store;
  store.add("l.W", W);
  store.add("l.b", b);
  Tape tape;
  return tape.value(dense(tape, store, "l", tape.constant(x), act, false)).values;
}

inline std::vector<double> recurrent_encode(std::span<const std::vector<double>> steps,
                                            const ParamStore& store, const std::string& prefix) {
  require(!steps.empty(), "recurrent_encode needs a nonempty sequence");
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(steps.size());
  for (const auto& s : steps) vars.push_back(tape.constant(s));
  return tape.value(recurrent_encode(tape, store, prefix, vars, false)).values;
}

// ---------------------------------------------------------------------------
// Optimizer

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

inline void adam_step(ParamStore& params, const GradMap& grads, const AdamConfig& cfg,
                      AdamState& state) {
  require(params.same_layout(grads), "gradients are not aligned with parameters");
  for (const auto& [name, g] : grads) {
    for (double v : g.values) {
      if (!std::isfinite(v)) throw NumericError("non-finite gradient for parameter " + name);
    }
  }
  const std::size_t n = params.count();
  if (state.m.size() != n) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
    state.step = 0;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  std::vector<double> flat = params.flatten();
  const std::vector<double> g = grads.flatten();
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    flat[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
  params.unflatten(flat);
}

// ---------------------------------------------------------------------------
// Gradient verification

struct FdReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  bool passed = true;
};

// Compares `analytic` against central differences of `loss` at `params`.
// Relative error per entry: |a - n| / max(|a|, |n|, 1e-12).
inline FdReport finite_diff_check(const std::function<double(const ParamStore&)>& loss,
                                  const ParamStore& params, const GradMap& analytic,
                                  double step = 1e-5, double rel_tol = 1e-4) {
  require(params.same_layout(analytic), "analytic gradient layout differs from parameters");
  FdReport report;
  ParamStore probe = params;
  for (const auto& [name, tensor] : params) {
    const Tensor& ga = analytic.at(name);
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double orig = tensor.values[i];
      probe.at(name).values[i] = orig + step;
      const double up = loss(probe);
      probe.at(name).values[i] = orig - step;
      const double down = loss(probe);
      probe.at(name).values[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = ga.values[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_rel_error || std::isnan(rel)) {
        report.max_rel_error = std::isnan(rel) ? INFINITY : rel;
        report.worst_param = name;
        report.worst_index = i;
      }
    }
  }
  report.passed = report.max_rel_error < rel_tol;
  return report;
}

}  // namespace intersad::nn
