#include <gtest/gtest.h>

#include <cmath>

#include "qtae/adam.hpp"
#include "qtae/autograd.hpp"
#include "qtae/gradcheck.hpp"
#include "qtae/model.hpp"
#include "support.hpp"

using namespace qtae;
using qtae::test::normal;

namespace {

// Values bounded away from 0 so relu kinks are never straddled.
Tensor<double> away_from_zero(Shape s, std::mt19937_64& rng) {
  auto t = normal<double>(std::move(s), rng);
  for (auto& v : t.storage()) v = (v < 0 ? -0.2 : 0.2) + v;
  return t;
}

}  // namespace

TEST(GradCheck, LinearMapsAreExact) {
  std::mt19937_64 rng(1);
  const auto r = finite_diff_check(
      "linear", [](const auto& v) { return ag::linear(v[0], v[1], v[2]); },
      {normal<double>({3, 5}, rng), normal<double>({4, 5}, rng), normal<double>({4}, rng)}, 1e-10);
  EXPECT_TRUE(r.passed()) << r.max_rel_error;
}

TEST(GradCheck, OpsOnRandomInstances) {
  std::mt19937_64 rng(2);
  Tensor<double> tgt;
  for (int trial = 0; trial < 5; ++trial) {
    const ConvParams zero{2, 1, PadMode::zero}, circ{1, 1, PadMode::circular};
    std::vector<GradCheckReport> reports;
    const GradCheckOptions opt{1e-5, 3, std::uint64_t(trial)};
    reports.push_back(finite_diff_check(
        "conv zero", [&](const auto& v) { return ag::conv2d(v[0], v[1], zero); },
        {normal<double>({2, 3, 8, 8}, rng), normal<double>({4, 3, 4, 4}, rng)}, 1e-6, opt));
    reports.push_back(finite_diff_check(
        "conv circular", [&](const auto& v) { return ag::conv2d(v[0], v[1], circ); },
        {normal<double>({2, 2, 5, 5}, rng), normal<double>({3, 2, 3, 3}, rng)}, 1e-6, opt));
    reports.push_back(finite_diff_check(
        "deconv", [&](const auto& v) { return ag::deconv2d(v[0], v[1], zero); },
        {normal<double>({2, 3, 3, 3}, rng), normal<double>({3, 2, 4, 4}, rng)}, 1e-6, opt));
    reports.push_back(finite_diff_check(
        "bias", [&](const auto& v) { return ag::add_channel_bias(v[0], v[1]); },
        {normal<double>({2, 3, 4, 4}, rng), normal<double>({3}, rng)}, 1e-6, opt));
    reports.push_back(finite_diff_check(
        "relu", [&](const auto& v) { return ag::relu(v[0]); }, {away_from_zero({2, 3, 4}, rng)}, 1e-6, opt));
    reports.push_back(finite_diff_check(
        "sigmoid", [&](const auto& v) { return ag::sigmoid(v[0]); }, {normal<double>({2, 7}, rng)}, 1e-6, opt));
    reports.push_back(finite_diff_check(
        "channels last", [&](const auto& v) { return ag::to_channels_last(v[0]); }, {normal<double>({2, 3, 4, 5}, rng)},
        1e-6, opt));
    reports.push_back(finite_diff_check(
        "gather", [&](const auto& v) { return ag::gather(v[0], {IndexMap{3, -1, 0, 0, 2}, IndexMap{1, 1, -1, 3, 0}}); },
        {normal<double>({2, 4}, rng)}, 1e-6, opt));
    tgt = normal<double>({3, 6}, rng);
    reports.push_back(finite_diff_check(
        "l1", [&](const auto& v) { return ag::l1_loss(v[0], tgt); }, {normal<double>({3, 6}, rng)}, 1e-6, opt));
    for (const auto& r : reports) EXPECT_TRUE(r.passed()) << r.name << " " << r.max_rel_error;
  }
}

TEST(GradCheck, BackboneStacks) {
  std::mt19937_64 rng(3);
  BackboneConfig bc;
  bc.widths = {3, 4, 5};
  bc.code_channels = 4;
  bc.image_height = bc.image_width = 16;
  Backbone<double> bb(bc, 10, 7);
  std::vector<Tensor<double>> params;
  for (const auto& p : bb.params()) params.push_back(p.var.value());
  for (std::size_t i = 1; i < params.size(); i += 2)
    if (params[i].rank() == 1) params[i] = normal<double>(params[i].shape(), rng, 0.3);
  const auto x = qtae::test::uniform<double>({2, 1, 16, 16}, rng);
  const auto code = normal<double>({2, 10}, rng);
  const auto enc = finite_diff_check(
      "encoder", [&](const auto& v) { return bb.encode_with(v, Var<double>(x)); }, params, 1e-4);
  const auto dec = finite_diff_check(
      "decoder", [&](const auto& v) { return bb.decode_with(v, Var<double>(code)); }, params, 1e-4);
  EXPECT_TRUE(enc.passed()) << enc.max_rel_error;
  EXPECT_TRUE(dec.passed()) << dec.max_rel_error;
}

TEST(L1Loss, ValuesAndSubgradient) {
  Var<float> p(Tensor<float>({2}, std::vector<float>{0.0f, 1.0f}), true);
  Tensor<float> t({2}, std::vector<float>{1.0f, 1.0f});
  auto l = ag::l1_loss(p, t);
  EXPECT_FLOAT_EQ(l.value()[0], 0.5f);
  backward(l);
  EXPECT_FLOAT_EQ(p.grad()[0], -0.5f);
  EXPECT_FLOAT_EQ(p.grad()[1], 0.0f);
  EXPECT_FLOAT_EQ(ag::l1_loss(Var<float>(t), t).value()[0], 0.0f);
  EXPECT_THROW(ag::l1_loss(p, Tensor<float>({3})), ContractError);
}

TEST(Relu, GradientAtTwoIsOne) {
  Var<double> x(Tensor<double>({1}, 2.0), true);
  backward(ag::relu(x));
  EXPECT_EQ(x.grad()[0], 1.0);
}

TEST(Backward, RequiresScalarRoot) {
  Var<float> x(Tensor<float>({3}, 1.0f), true);
  EXPECT_THROW(backward(ag::relu(x)), ContractError);
}

TEST(Backward, SharedSubgraphAccumulates) {
  Var<double> x(Tensor<double>({2}, 3.0), true);
  auto y = ag::relu(x);
  backward(ag::inner(ag::add_constant(y, Tensor<double>({2})), Tensor<double>({2}, 2.0)));
  EXPECT_EQ(x.grad()[0], 2.0);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<Var<float>> p{Var<float>(Tensor<float>({3}, 0.5f), true)};
  AdamState<float> st(p, {});
  adam_step(p, st);
  EXPECT_EQ(st.step, 1u);
  EXPECT_EQ(p[0].value(), Tensor<float>({3}, 0.5f));
}

TEST(Adam, FirstStepMovesByLr) {
  std::vector<Var<double>> p{Var<double>(Tensor<double>({1}, 1.0), true)};
  AdamState<double> st(p, {});
  backward(ag::inner(p[0], Tensor<double>({1}, 1.0)));
  adam_step(p, st);
  EXPECT_NEAR(p[0].value()[0], 1.0 - 0.001, 1e-10);
}

TEST(Adam, MatchesScalarSimulationOnAbs) {
  // Independent simulation of the update on f(w) = |w|.
  double w = 0.1, m = 0, v = 0;
  std::vector<Var<double>> p{Var<double>(Tensor<double>({1}, 0.1), true)};
  AdamHyper h;
  h.lr = 0.01;
  AdamState<double> st(p, h);
  double prev = 0.1;
  for (int t = 1; t <= 10; ++t) {
    const double g = w > 0 ? 1.0 : (w < 0 ? -1.0 : 0.0);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    w -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);

    p[0].zero_grad();
    backward(ag::l1_loss(p[0], Tensor<double>({1})));
    adam_step(p, st);
    EXPECT_NEAR(p[0].value()[0], w, 1e-12);
    if (t <= 5) {
      EXPECT_LT(std::abs(p[0].value()[0]), prev);
      prev = std::abs(p[0].value()[0]);
    }
  }
}

TEST(Adam, NonFiniteGradientRefused) {
  std::vector<Var<float>> p{Var<float>(Tensor<float>({2}, 1.0f), true), Var<float>(Tensor<float>({1}, 2.0f), true)};
  AdamState<float> st(p, {});
  p[0].node()->grad = Tensor<float>({2}, 0.5f);
  p[1].node()->grad = Tensor<float>({1}, NAN);
  EXPECT_THROW(adam_step(p, st), NumericError);
  EXPECT_EQ(st.step, 0u);
  EXPECT_EQ(p[0].value()[0], 1.0f);
  EXPECT_EQ(st.m[0][0], 0.0f);
}

TEST(GradCheck, SuiteCoversOpsAndStacks) {
  const auto suite = gradcheck_suite(3, 11);
  EXPECT_GE(suite.size(), 18u);
  for (const auto& s : suite) {
    EXPECT_EQ(s.instances, 3u) << s.name;
    EXPECT_TRUE(s.passed()) << s.name << " " << s.max_rel_error;
  }
}
