#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "compgen/grad/adam.hpp"
#include "compgen/grad/gradcheck.hpp"
#include "compgen/grad/lstm.hpp"
#include "compgen/grad/ops.hpp"
#include "compgen/grad/rng.hpp"
#include "compgen/grad/serialize.hpp"

namespace g = compgen::grad;
using g::ParamSet;
using g::Tape;
using g::Tensor;
using g::Var;

namespace {

Tensor random_tensor(g::Shape shape, g::Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-scale, scale);
  return t;
}

// Fixed probe weights so that every output element contributes distinctly.
Var weighted_sum(const Var& v, std::uint64_t seed) {
  g::Rng rng(seed);
  Tensor w = random_tensor(v.shape(), rng);
  return g::sum(g::mul(v, v.tape().constant(w)));
}

}  // namespace

TEST(Rng, MatchesReferenceSplitMixSequence) {
  // Values from an independent Python evaluation of the documented recurrence.
  g::Rng rng(42);
  EXPECT_EQ(rng.next_u64(), 0x989b3f130a063869ULL);
  EXPECT_EQ(rng.next_u64(), 0x290db4bf2570ded7ULL);
  EXPECT_EQ(rng.next_u64(), 0x2a990be63a01b2d5ULL);
}

TEST(Rng, SameSeedSameDraws) {
  g::Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.uniform(), b.uniform());
    EXPECT_EQ(a.normal(), b.normal());
    EXPECT_EQ(a.index(13), b.index(13));
  }
  g::Rng c = a.derive(3), d = b.derive(3);
  EXPECT_EQ(c.next_u64(), d.next_u64());
  EXPECT_NE(a.derive(3).next_u64(), a.derive(4).next_u64());
}

TEST(Rng, IndexAndNormalMoments) {
  g::Rng rng(1);
  std::vector<int> counts(6, 0);
  double s = 0, ss = 0;
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    ++counts[rng.index(6)];
    const double z = rng.normal();
    s += z;
    ss += z * z;
  }
  for (int c : counts) EXPECT_NEAR(c / double(n), 1.0 / 6.0, 0.01);
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(ss / n, 1.0, 0.03);
}

TEST(Linear, IdentityWeights) {
  Tape tape;
  Var y = g::linear(tape.constant(Tensor::vector({3, -1})), tape.constant(Tensor::matrix({{1, 0}, {0, 1}})),
                    tape.constant(Tensor::vector({0, 0})));
  EXPECT_EQ(y.value(), Tensor::vector({3, -1}));
}

TEST(Linear, HandArithmetic) {
  Tape tape;
  Var y = g::linear(tape.constant(Tensor::vector({2, 3})), tape.constant(Tensor::matrix({{1, 1}})),
                    tape.constant(Tensor::vector({0.5})));
  EXPECT_EQ(y.value(), Tensor::vector({5.5}));
}

TEST(Linear, ZeroWeightsGiveBias) {
  Tape tape;
  Var y = g::linear(tape.constant(Tensor::vector({-4, 9})), tape.constant(Tensor({1, 2}, 0.0)),
                    tape.constant(Tensor::vector({7})));
  EXPECT_EQ(y.value(), Tensor::vector({7}));
}

TEST(Linear, ShapeMismatchIsDimensionError) {
  Tape tape;
  EXPECT_THROW(g::linear(tape.constant(Tensor::vector({1, 2, 3})), tape.constant(Tensor({1, 2}, 0.0)),
                         tape.constant(Tensor::vector({0}))),
               g::DimensionError);
}

TEST(LeakyRelu, Examples) {
  Tape tape;
  EXPECT_EQ(g::leaky_relu(tape.constant(Tensor::vector({2, -2})), 0.1).value(), Tensor::vector({2, -0.2}));
  EXPECT_EQ(g::leaky_relu(tape.constant(Tensor::vector({0})), 0.1).value(), Tensor::vector({0}));
  EXPECT_EQ(g::leaky_relu(tape.constant(Tensor::vector({-1})), 0.5).value(), Tensor::vector({-0.5}));
}

TEST(LeakyRelu, MonotoneNondecreasing) {
  Tape tape;
  std::vector<double> xs;
  for (int i = -200; i <= 200; ++i) xs.push_back(i * 0.013);
  Var y = g::leaky_relu(tape.constant(Tensor::vector(xs)), 0.1);
  for (std::size_t i = 1; i < xs.size(); ++i) EXPECT_LE(y.value()[i - 1], y.value()[i]);
}

TEST(Backward, SumOfMatVecGivesOuterStructure) {
  ParamSet params;
  params.add("w", Tensor::matrix({{0.3, -0.2, 0.5}, {1.0, 2.0, -1.0}}));
  const Tensor x = Tensor::vector({1.5, -2.0, 0.25});
  Tape tape;
  Var w = tape.parameter(params["w"]);
  Var loss = g::sum(g::linear(tape.constant(x), w, tape.constant(Tensor::vector({0, 0}))));
  tape.backward(loss);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(params["w"].grad.at(i, j), x[j]);
}

TEST(Backward, UnusedParameterHasZeroGradient) {
  ParamSet params;
  params.add("used", Tensor::vector({1, 2}));
  params.add("unused", Tensor::vector({5, 6, 7}));
  Tape tape;
  Var u = tape.parameter(params["used"]);
  tape.parameter(params["unused"]);
  tape.backward(g::sum(g::square(u)));
  for (double v : params["unused"].grad.data()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, HalfSquaredNormGradientIsIdentity) {
  ParamSet params;
  params.add("x", Tensor::vector({0.5, -3.0, 2.25}));
  Tape tape;
  Var x = tape.parameter(params["x"]);
  tape.backward(g::scale(g::sum(g::square(x)), 0.5));
  EXPECT_EQ(params["x"].grad, params["x"].value);
}

TEST(Backward, NonScalarLossIsUsageError) {
  Tape tape;
  Var x = tape.variable(Tensor::vector({1, 2}));
  EXPECT_THROW(tape.backward(g::square(x)), g::UsageError);
}

TEST(GradCheck, QuadraticIsExact) {
  ParamSet params;
  g::Rng rng(3);
  params.add("a", random_tensor({4}, rng));
  params.add("b", random_tensor({2, 3}, rng));
  auto loss = [](Tape& tape, ParamSet& p) {
    Var a = tape.parameter(p["a"]);
    Var b = tape.parameter(p["b"]);
    return g::add(g::scale(g::sum(g::square(a)), 1.5), g::sum(g::square(g::add_scalar(b, 0.7))));
  };
  EXPECT_LT(g::grad_check(loss, params), 1e-7);
}

TEST(GradCheck, ConstantFunctionHasZeroError) {
  ParamSet params;
  params.add("a", Tensor::vector({1, 2, 3}));
  auto loss = [](Tape& tape, ParamSet& p) {
    tape.parameter(p["a"]);
    return tape.constant(Tensor::scalar(4.0));
  };
  EXPECT_EQ(g::grad_check(loss, params), 0.0);
}

// Every differentiable op on a small random instance.
TEST(GradCheck, EveryLayerType) {
  g::Rng rng(11);
  ParamSet params;
  params.add("x", random_tensor({3, 4}, rng));
  params.add("pos", Tensor({3, 4}, 0.0));
  for (double& v : params["pos"].value.data()) v = rng.uniform(0.5, 2.0);
  params.add("w", random_tensor({5, 4}, rng));
  params.add("b", random_tensor({5}, rng));
  params.add("m", random_tensor({4, 2}, rng));
  params.add("table", random_tensor({6, 3}, rng));

  struct Case {
    const char* name;
    std::function<Var(Tape&, ParamSet&)> f;
  };
  const std::vector<std::size_t> idx = {4, 0, 4, 2};
  const std::vector<std::size_t> targets = {1, 0, 4};
  std::vector<Case> cases = {
      {"linear", [](Tape& t, ParamSet& p) {
         return weighted_sum(g::linear(t.parameter(p["x"]), t.parameter(p["w"]), t.parameter(p["b"])), 1);
       }},
      {"matmul", [](Tape& t, ParamSet& p) { return weighted_sum(g::matmul(t.parameter(p["x"]), t.parameter(p["m"])), 2); }},
      {"leaky_relu", [](Tape& t, ParamSet& p) { return weighted_sum(g::leaky_relu(t.parameter(p["x"]), 0.1), 3); }},
      {"sigmoid", [](Tape& t, ParamSet& p) { return weighted_sum(g::sigmoid(t.parameter(p["x"])), 4); }},
      {"tanh", [](Tape& t, ParamSet& p) { return weighted_sum(g::tanh(t.parameter(p["x"])), 5); }},
      {"exp", [](Tape& t, ParamSet& p) { return weighted_sum(g::exp(t.parameter(p["x"])), 6); }},
      {"log", [](Tape& t, ParamSet& p) { return weighted_sum(g::log(t.parameter(p["pos"])), 7); }},
      {"clamp", [](Tape& t, ParamSet& p) { return weighted_sum(g::clamp(t.parameter(p["x"]), -2.0, 2.0), 8); }},
      {"mul_sub", [](Tape& t, ParamSet& p) {
         Var x = t.parameter(p["x"]);
         Var q = t.parameter(p["pos"]);
         return weighted_sum(g::sub(g::mul(x, q), g::scale(q, 0.3)), 9);
       }},
      {"transpose_reshape", [](Tape& t, ParamSet& p) {
         return weighted_sum(g::reshape(g::transpose(t.parameter(p["x"])), {2, 6}), 10);
       }},
      {"gather_rows", [idx](Tape& t, ParamSet& p) { return weighted_sum(g::gather_rows(t.parameter(p["table"]), idx), 11); }},
      {"slice_concat", [](Tape& t, ParamSet& p) {
         Var x = t.parameter(p["x"]);
         return weighted_sum(g::concat_cols(g::slice_cols(x, 2, 4), g::slice_cols(x, 0, 1)), 12);
       }},
      {"l2_normalize", [](Tape& t, ParamSet& p) { return weighted_sum(g::l2_normalize_rows(t.parameter(p["x"])), 13); }},
      {"cross_entropy", [targets](Tape& t, ParamSet& p) {
         return g::cross_entropy_rows(g::linear(t.parameter(p["x"]), t.parameter(p["w"]), t.parameter(p["b"])), targets);
       }},
      {"add_bias_mean", [](Tape& t, ParamSet& p) {
         return g::mean(g::square(g::add_bias(g::transpose(t.parameter(p["w"])), t.parameter(p["b"]))));
       }},
  };
  for (const auto& c : cases) {
    const auto report = g::grad_check_report(c.f, params);
    EXPECT_LT(report.max_relative_error, 1e-4) << c.name << " worst " << report.worst_parameter << "["
                                               << report.worst_index << "] analytic " << report.worst_analytic
                                               << " numeric " << report.worst_numeric;
  }
}

namespace {

// Direct definitions, independent of the im2col path.
Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t s, std::size_t pad) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3), co = w.dim(0), k = w.dim(2);
  const std::size_t oh = (h + 2 * pad - k) / s + 1, ow = (wd + 2 * pad - k) / s + 1;
  Tensor out({n, co, oh, ow});
  for (std::size_t bn = 0; bn < n; ++bn)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          double acc = b[o];
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t kh = 0; kh < k; ++kh)
              for (std::size_t kw = 0; kw < k; ++kw) {
                const long iy = long(y * s + kh) - long(pad), ix = long(xx * s + kw) - long(pad);
                if (iy < 0 || ix < 0 || iy >= long(h) || ix >= long(wd)) continue;
                acc += w[((o * c + ch) * k + kh) * k + kw] * x[((bn * c + ch) * h + iy) * wd + ix];
              }
          out[((bn * co + o) * oh + y) * ow + xx] = acc;
        }
  return out;
}

Tensor naive_conv_transpose(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t s, std::size_t pad) {
  const std::size_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3), co = w.dim(1), k = w.dim(2);
  const std::size_t oh = (h - 1) * s + k - 2 * pad, ow = (wd - 1) * s + k - 2 * pad;
  Tensor out({n, co, oh, ow});
  for (std::size_t bn = 0; bn < n; ++bn)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t p = 0; p < oh * ow; ++p) out[(bn * co + o) * oh * ow + p] = b[o];
  for (std::size_t bn = 0; bn < n; ++bn)
    for (std::size_t ch = 0; ch < ci; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < wd; ++xx)
          for (std::size_t o = 0; o < co; ++o)
            for (std::size_t kh = 0; kh < k; ++kh)
              for (std::size_t kw = 0; kw < k; ++kw) {
                const long oy = long(y * s + kh) - long(pad), ox = long(xx * s + kw) - long(pad);
                if (oy < 0 || ox < 0 || oy >= long(oh) || ox >= long(ow)) continue;
                out[((bn * co + o) * oh + oy) * ow + ox] +=
                    x[((bn * ci + ch) * h + y) * wd + xx] * w[((ch * co + o) * k + kh) * k + kw];
              }
  return out;
}

void expect_close(const Tensor& a, const Tensor& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "at " << i;
}

}  // namespace

TEST(Conv, ForwardMatchesDirectDefinition) {
  g::Rng rng(5);
  const Tensor x = random_tensor({2, 3, 8, 8}, rng);
  const Tensor w = random_tensor({4, 3, 4, 4}, rng);
  const Tensor b = random_tensor({4}, rng);
  Tape tape;
  Var y = g::conv2d(tape.constant(x), tape.constant(w), tape.constant(b), 2, 1);
  EXPECT_EQ(y.shape(), (g::Shape{2, 4, 4, 4}));
  expect_close(y.value(), naive_conv(x, w, b, 2, 1), 1e-12);
}

TEST(Conv, TransposeForwardMatchesDirectDefinition) {
  g::Rng rng(6);
  const Tensor x = random_tensor({2, 4, 4, 4}, rng);
  const Tensor w = random_tensor({4, 3, 4, 4}, rng);
  const Tensor b = random_tensor({3}, rng);
  Tape tape;
  Var y = g::conv_transpose2d(tape.constant(x), tape.constant(w), tape.constant(b), 2, 1);
  EXPECT_EQ(y.shape(), (g::Shape{2, 3, 8, 8}));
  expect_close(y.value(), naive_conv_transpose(x, w, b, 2, 1), 1e-12);
}

TEST(Conv, GradientsPassGradCheck) {
  g::Rng rng(8);
  ParamSet params;
  params.add("x", random_tensor({2, 2, 6, 6}, rng));
  params.add("w", random_tensor({3, 2, 4, 4}, rng));
  params.add("b", random_tensor({3}, rng));
  params.add("wt", random_tensor({3, 2, 4, 4}, rng));
  params.add("bt", random_tensor({2}, rng));
  auto loss = [](Tape& t, ParamSet& p) {
    Var h = g::conv2d(t.parameter(p["x"]), t.parameter(p["w"]), t.parameter(p["b"]), 2, 1);
    Var y = g::conv_transpose2d(g::tanh(h), t.parameter(p["wt"]), t.parameter(p["bt"]), 2, 1);
    return weighted_sum(y, 21);
  };
  EXPECT_LT(g::grad_check(loss, params), 1e-4);
}

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
  ParamSet params;
  params.add("w", Tensor::vector({0.25, -1.5, 3.0}));
  const Tensor before = params["w"].value;
  g::Adam adam;
  adam.step(params);
  EXPECT_EQ(params["w"].value, before);
  EXPECT_EQ(params.step(), 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // Bias-corrected first step: m_hat = g, v_hat = g^2, so delta = -lr * g / (|g| + eps).
  for (double gval : {3.0, -0.02}) {
    ParamSet params;
    params.add("w", Tensor::vector({1.0}));
    params["w"].grad[0] = gval;
    g::Adam adam(g::AdamConfig{0.01, 0.9, 0.999, 1e-8});
    adam.step(params);
    EXPECT_NEAR(params["w"].value[0], 1.0 - 0.01 * std::copysign(1.0, gval), 1e-6);
  }
}

TEST(Adam, TwoStepsDifferFromOneDoubledStep) {
  ParamSet a, b;
  a.add("w", Tensor::vector({1.0}));
  b.add("w", Tensor::vector({1.0}));
  g::Adam adam_a(g::AdamConfig{0.01});
  g::Adam adam_b(g::AdamConfig{0.02});
  a["w"].grad[0] = 0.5;
  adam_a.step(a);
  a["w"].grad[0] = 0.5;
  adam_a.step(a);
  b["w"].grad[0] = 0.5;
  adam_b.step(b);
  EXPECT_NE(a["w"].value[0], b["w"].value[0]);
}

TEST(Adam, NonFiniteGradientAborts) {
  ParamSet params;
  params.add("w", Tensor::vector({1.0}));
  params["w"].grad[0] = std::nan("");
  g::Adam adam;
  EXPECT_THROW(adam.step(params), g::NumericalError);
  EXPECT_EQ(params["w"].value[0], 1.0);
}

TEST(Lstm, ZeroWeightsZeroStateGivesZeroOutput) {
  ParamSet params;
  params.add("cell.w_input", Tensor({12, 2}, 0.0));
  params.add("cell.w_hidden", Tensor({12, 3}, 0.0));
  params.add("cell.bias", Tensor({12}, 0.0));
  Tape tape;
  auto w = g::LstmWeights::bind(tape, params, "cell");
  g::LstmState s{tape.constant(Tensor({1, 3}, 0.0)), tape.constant(Tensor({1, 3}, 0.0))};
  auto next = g::lstm_step(s, tape.constant(Tensor::matrix({{0.7, -1.2}})), w);
  for (double v : next.h.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, ZeroWeightsHalveCellState) {
  ParamSet params;
  params.add("cell.w_input", Tensor({8, 1}, 0.0));
  params.add("cell.w_hidden", Tensor({8, 2}, 0.0));
  params.add("cell.bias", Tensor({8}, 0.0));
  Tape tape;
  auto w = g::LstmWeights::bind(tape, params, "cell");
  g::LstmState s{tape.constant(Tensor({1, 2}, 0.0)), tape.constant(Tensor::matrix({{1.0, -2.0}}))};
  auto next = g::lstm_step(s, tape.constant(Tensor::matrix({{3.0}})), w);
  EXPECT_DOUBLE_EQ(next.c.value()[0], 0.5);
  EXPECT_DOUBLE_EQ(next.h.value()[1], 0.5 * std::tanh(-1.0));
}

TEST(Lstm, OutputsBoundedByOne) {
  g::Rng rng(9);
  ParamSet params;
  g::add_lstm_params(params, "cell", 3, 5, rng, 5.0);
  Tape tape;
  auto w = g::LstmWeights::bind(tape, params, "cell");
  g::LstmState s{tape.constant(random_tensor({4, 5}, rng, 3.0)), tape.constant(random_tensor({4, 5}, rng, 3.0))};
  for (int t = 0; t < 5; ++t) {
    s = g::lstm_step(s, tape.constant(random_tensor({4, 3}, rng, 10.0)), w);
    for (double v : s.h.value().data()) EXPECT_LT(std::abs(v), 1.0);
  }
}

TEST(Lstm, ThreeUnrolledStepsPassGradCheck) {
  g::Rng rng(10);
  ParamSet params;
  g::add_lstm_params(params, "cell", 2, 3, rng, 0.8);
  params.add("x0", random_tensor({2, 2}, rng));
  std::vector<Tensor> inputs = {random_tensor({2, 2}, rng), random_tensor({2, 2}, rng)};
  auto loss = [inputs](Tape& t, ParamSet& p) {
    auto w = g::LstmWeights::bind(t, p, "cell");
    g::LstmState s{t.constant(Tensor({2, 3}, 0.0)), t.constant(Tensor({2, 3}, 0.0))};
    s = g::lstm_step(s, t.parameter(p["x0"]), w);
    for (const auto& x : inputs) s = g::lstm_step(s, t.constant(x), w);
    return weighted_sum(s.h, 31);
  };
  EXPECT_LT(g::grad_check(loss, params), 1e-4);
}

TEST(Determinism, SameSeedSameTrajectory) {
  auto run = [] {
    g::Rng rng(99);
    ParamSet params;
    params.add_uniform("w", {3, 2}, rng);
    params.add_uniform("b", {3}, rng);
    g::Adam adam;
    for (int step = 0; step < 20; ++step) {
      params.zero_grad();
      Tape tape;
      Tensor x({4, 2});
      for (double& v : x.data()) v = rng.normal();
      Var y = g::linear(tape.constant(x), tape.parameter(params["w"]), tape.parameter(params["b"]));
      tape.backward(g::mean(g::square(g::leaky_relu(y, 0.1))));
      adam.step(params);
    }
    return g::params_to_json(params);
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTripIsExact) {
  g::Rng rng(12);
  ParamSet params;
  params.add_uniform("emb", {5, 4}, rng);
  params.add("odd", Tensor::vector({0.1, 1.0 / 3.0, -2.5e-300, 1e300}));
  params.set_step(17);
  nlohmann::ordered_json meta = {{"kind", "test"}};
  const std::string text = g::params_to_json(params, meta);
  nlohmann::ordered_json meta_back;
  ParamSet back = g::params_from_json(text, &meta_back);
  EXPECT_TRUE(back == params);
  EXPECT_EQ(meta_back, meta);
  EXPECT_EQ(g::params_to_json(back, meta_back), text);
}

TEST(Checkpoint, MalformedDocumentIsParseError) {
  EXPECT_THROW(g::params_from_json("{\"format\": \"compgen-params/1\", \"step\": 0"), g::ParseError);
  EXPECT_THROW(g::params_from_json("{\"format\": \"other\"}"), g::ParseError);
}
