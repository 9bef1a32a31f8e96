#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "intersad/tensor_nn.hpp"

using namespace intersad;
using namespace intersad::nn;

namespace {

Tensor identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.rows, t.cols);
  for (std::size_t r = 0; r < t.rows; ++r) {
    for (std::size_t c = 0; c < t.cols; ++c) m(r, c) = t(r, c);
  }
  return m;
}

ParamStore random_store(Rng& rng) {
  ParamStore s;
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> dim(1, 5);
  for (const char* name : {"a", "b", "c"}) {
    Tensor t(dim(rng), dim(rng));
    for (auto& v : t.values) v = n(rng);
    s.add(name, t);
  }
  return s;
}

// Two-layer tanh network, loss = ||out - target||^2.
double two_layer_loss(const ParamStore& p, const std::vector<double>& x, const std::vector<double>& target,
                      GradMap* grads = nullptr) {
  Tape tape;
  Var h = dense(tape, p, "l1", tape.constant(x), Activation::tanh, true);
  Var y = dense(tape, p, "l2", h, Activation::logistic, true);
  Var loss = sum_squares(tape, sub(tape, y, tape.constant(target)));
  if (grads) {
    tape.backward(loss);
    *grads = tape.gradients(p);
  }
  return tape.scalar(loss);
}

// Cell equations applied by hand with Eigen.
Eigen::VectorXd gru_oracle(const ParamStore& p, const std::string& prefix,
                           const std::vector<std::vector<double>>& steps) {
  auto W = [&](const std::string& n) { return to_eigen(p.at(prefix + "." + n)); };
  const Eigen::Index hidden = static_cast<Eigen::Index>(p.at(prefix + ".Uz").rows);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(hidden);
  auto sig = [](const Eigen::VectorXd& v) { return v.unaryExpr([](double a) { return 1.0 / (1.0 + std::exp(-a)); }).eval(); };
  for (const auto& s : steps) {
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
    const Eigen::VectorXd z = sig(W("Wz") * x + W("Uz") * h + W("bz"));
    const Eigen::VectorXd r = sig(W("Wr") * x + W("Ur") * h + W("br"));
    const Eigen::VectorXd n = (W("Wn") * x + W("Un") * r.cwiseProduct(h) + W("bn")).array().tanh().matrix();
    h = (1.0 - z.array()).matrix().cwiseProduct(n) + z.cwiseProduct(h);
  }
  return h;
}

}  // namespace

TEST(DenseForward, IdentityMap) {
  const auto y = dense_forward(std::vector<double>{1, 2}, identity(2), Tensor(2, 1), Activation::identity);
  EXPECT_EQ(y, (std::vector<double>{1, 2}));
}

TEST(DenseForward, ZeroWeightsTanhGivesZero) {
  const auto y = dense_forward(std::vector<double>{3, -7, 11}, Tensor(4, 3), Tensor(4, 1), Activation::tanh);
  EXPECT_EQ(y, std::vector<double>(4, 0.0));
}

TEST(DenseForward, LogisticAtZero) {
  const auto y = dense_forward(std::vector<double>{0}, identity(1), Tensor(1, 1), Activation::logistic);
  EXPECT_DOUBLE_EQ(y[0], 0.5);
}

TEST(DenseForward, ShapeMismatch) {
  EXPECT_THROW(dense_forward(std::vector<double>{1, 2, 3}, identity(2), Tensor(2, 1), Activation::identity),
               ContractViolation);
}

TEST(RecurrentEncode, ZeroInputClosedGatesStaysZero) {
  ParamStore p;
  Rng rng(1);
  init_gru(p, "cell", 3, 4, rng);
  for (auto& [name, t] : p) {
    for (auto& v : t.values) v = 0.0;
  }
  for (auto& v : p.at("cell.bz").values) v = 50.0;  // update gate fully closed: h' = h
  const std::vector<std::vector<double>> steps(5, std::vector<double>(3, 0.0));
  EXPECT_EQ(recurrent_encode(steps, p, "cell"), std::vector<double>(4, 0.0));
}

TEST(RecurrentEncode, SingleStepIsOneCellApplication) {
  ParamStore p;
  Rng rng(2);
  init_gru(p, "cell", 3, 4, rng);
  const std::vector<double> x = {0.3, -0.2, 0.9};
  Tape tape;
  Var h = gru_step(tape, p, "cell", tape.constant(Tensor(4, 1)), tape.constant(x), false);
  EXPECT_EQ(recurrent_encode(std::vector<std::vector<double>>{x}, p, "cell"), tape.value(h).values);
}

TEST(RecurrentEncode, MatchesUnrolledOracle) {
  ParamStore p;
  Rng rng(3);
  init_gru(p, "cell", 5, 7, rng);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& [name, t] : p) {
    for (auto& v : t.values) v += 0.3 * n(rng);  // nonzero biases too
  }
  std::vector<std::vector<double>> steps(4, std::vector<double>(5));
  for (auto& s : steps) {
    for (auto& v : s) v = n(rng);
  }
  const auto h = recurrent_encode(steps, p, "cell");
  const Eigen::VectorXd oracle = gru_oracle(p, "cell", steps);
  ASSERT_EQ(h.size(), 7u);
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_NEAR(h[i], oracle(static_cast<Eigen::Index>(i)), 1e-12);
}

TEST(RecurrentEncode, EmptySequenceRejected) {
  ParamStore p;
  Rng rng(4);
  init_gru(p, "cell", 2, 2, rng);
  EXPECT_THROW(recurrent_encode(std::vector<std::vector<double>>{}, p, "cell"), ContractViolation);
}

TEST(Grad, SquaredNorm) {
  ParamStore p;
  p.add("x", Tensor::column({1, 2, 3}));
  Tape tape;
  Var loss = sum_squares(tape, tape.param(p, "x"));
  tape.backward(loss);
  EXPECT_EQ(tape.gradients(p).at("x").values, (std::vector<double>{2, 4, 6}));
}

TEST(Grad, UntouchedParameterGetsZero) {
  ParamStore p;
  p.add("x", Tensor::column({1, 2}));
  p.add("unused", Tensor::column({5, 6, 7}));
  Tape tape;
  tape.backward(sum_squares(tape, tape.param(p, "x")));
  EXPECT_EQ(tape.gradients(p).at("unused").values, std::vector<double>(3, 0.0));
}

TEST(Grad, AccumulatesAdditively) {
  ParamStore p;
  p.add("x", Tensor::column({1, -2}));
  Tape tape;
  Var x = tape.param(p, "x");
  std::vector<Var> terms = {sum_squares(tape, x), sum_squares(tape, x)};
  tape.backward(sum(tape, terms));
  EXPECT_EQ(tape.gradients(p).at("x").values, (std::vector<double>{4, -8}));
}

TEST(Grad, NonScalarLossRejected) {
  ParamStore p;
  p.add("x", Tensor::column({1, 2}));
  Tape tape;
  EXPECT_THROW(tape.backward(tape.param(p, "x")), ContractViolation);
}

TEST(Grad, TwoLayerNetworkMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    ParamStore p;
    init_dense(p, "l1", 4, 6, rng);
    init_dense(p, "l2", 6, 3, rng);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& v : p.at("l1.b").values) v = 0.2 * n(rng);
    std::vector<double> x(4);
    std::vector<double> target(3);
    for (auto& v : x) v = n(rng);
    for (auto& v : target) v = n(rng);
    GradMap g;
    two_layer_loss(p, x, target, &g);
    const auto report = finite_diff_check([&](const ParamStore& q) { return two_layer_loss(q, x, target); }, p, g);
    EXPECT_TRUE(report.passed) << "seed " << seed << " worst " << report.worst_param << " " << report.max_rel_error;
  }
}

TEST(FiniteDiff, LinearLossExact) {
  ParamStore p;
  p.add("w", Tensor::column({0.5, -1.5, 2.0}));
  const std::vector<double> c = {3.0, -2.0, 0.25};
  auto loss = [&](const ParamStore& q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) acc += c[i] * q.at("w").values[i];
    return acc;
  };
  GradMap g = p.zeros_like();
  g.at("w").values = c;
  const auto report = finite_diff_check(loss, p, g);
  EXPECT_LT(report.max_rel_error, 1e-10);
}

TEST(FiniteDiff, CorruptedGradientIsNamed) {
  Rng rng(9);
  ParamStore p;
  init_dense(p, "l1", 3, 4, rng);
  init_dense(p, "l2", 4, 2, rng);
  const std::vector<double> x = {0.1, 0.7, -0.4};
  const std::vector<double> target = {0.2, 0.9};
  GradMap g;
  two_layer_loss(p, x, target, &g);
  for (auto& v : g.at("l2.W").values) v *= 1.10;
  const auto report = finite_diff_check([&](const ParamStore& q) { return two_layer_loss(q, x, target); }, p, g);
  EXPECT_FALSE(report.passed);
  EXPECT_EQ(report.worst_param, "l2.W");
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Rng rng(1);
  ParamStore p;
  init_dense(p, "l", 3, 3, rng);
  const ParamStore before = p;
  AdamState s;
  adam_step(p, p.zeros_like(), AdamConfig{}, s);
  EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  for (double g : {3.0, -0.02}) {
    ParamStore p;
    p.add("x", Tensor::column({1.0}));
    GradMap grad = p.zeros_like();
    grad.at("x").values[0] = g;
    AdamState s;
    adam_step(p, grad, AdamConfig{.lr = 0.01}, s);
    EXPECT_NEAR(p.at("x").values[0] - 1.0, -0.01 * (g > 0 ? 1 : -1), 1e-8);
  }
}

TEST(Adam, QuadraticBowlConverges) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> center(6);
  for (auto& c : center) c = u(rng);
  ParamStore p;
  p.add("x", Tensor::column(std::vector<double>(6, 0.0)));
  auto loss = [&](const ParamStore& q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < 6; ++i) acc += (q.at("x").values[i] - center[i]) * (q.at("x").values[i] - center[i]);
    return acc;
  };
  AdamState s;
  for (int step = 0; step < 500; ++step) {
    GradMap g = p.zeros_like();
    for (std::size_t i = 0; i < 6; ++i) g.at("x").values[i] = 2.0 * (p.at("x").values[i] - center[i]);
    adam_step(p, g, AdamConfig{.lr = 0.01}, s);
  }
  EXPECT_LT(loss(p), 1e-4);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  ParamStore p;
  p.add("weights", Tensor::column({1.0, 2.0}));
  GradMap g = p.zeros_like();
  g.at("weights").values[1] = std::nan("");
  AdamState s;
  try {
    adam_step(p, g, AdamConfig{}, s);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("weights"), std::string::npos);
  }
}

TEST(ParamStore, FlattenRoundTrip) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    ParamStore p = random_store(rng);
    const auto flat = p.flatten();
    EXPECT_EQ(flat.size(), p.count());
    ParamStore q = p.zeros_like();
    q.unflatten(flat);
    EXPECT_EQ(p, q);
  }
}

TEST(ParamStore, JsonRoundTripAndVersion) {
  Rng rng(3);
  const ParamStore p = random_store(rng);
  const auto j = p.to_json();
  EXPECT_EQ(j["format_version"], ParamStore::kFormatVersion);
  EXPECT_EQ(ParamStore::from_json(j), p);
  auto bad = j;
  bad["format_version"] = 99;
  EXPECT_THROW(ParamStore::from_json(bad), LoadError);
  auto truncated = j;
  truncated["flat_values"].erase(truncated["flat_values"].size() - 1);
  EXPECT_THROW(ParamStore::from_json(truncated), LoadError);
}

TEST(Init, DenseBoundsAndDeterminism) {
  Rng a(11);
  Rng b(11);
  ParamStore p;
  ParamStore q;
  init_dense(p, "l", 9, 5, a);
  init_dense(q, "l", 9, 5, b);
  EXPECT_EQ(p, q);
  const double bound = std::sqrt(1.0 / 9.0);
  for (double v : p.at("l.W").values) EXPECT_LE(std::abs(v), bound);
  EXPECT_EQ(p.at("l.b").values, std::vector<double>(5, 0.0));
}
