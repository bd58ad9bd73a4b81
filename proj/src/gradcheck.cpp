#include "qtae/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "qtae/lattice.hpp"
#include "qtae/model.hpp"

namespace qtae {

namespace {

Tensor<double> gaussian_like(const Shape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor<double> t(shape);
  for (auto& x : t.data()) x = dist(rng);
  return t;
}

double evaluate(const DiffFn& f, const std::vector<Tensor<double>>& inputs, const Tensor<double>& r) {
  std::vector<Var<double>> vars;
  for (const auto& in : inputs) vars.emplace_back(in, false);
  return dot(f(vars).value(), r);
}

}  // namespace

GradCheckReport finite_diff_check(const std::string& name, const DiffFn& f, const std::vector<Tensor<double>>& inputs,
                                  double tolerance, const GradCheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  report.name = name;
  report.tolerance = tolerance;

  std::vector<Var<double>> vars;
  for (const auto& in : inputs) vars.emplace_back(in, true);
  const Var<double> out = f(vars);
  const Tensor<double> r = gaussian_like(out.shape(), rng);
  backward(ag::inner(out, r));

  for (std::size_t d = 0; d < options.directions; ++d) {
    std::vector<Tensor<double>> dirs;
    for (const auto& in : inputs) dirs.push_back(gaussian_like(in.shape(), rng));

    double analytic = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i)
      if (vars[i].has_grad()) analytic += dot(vars[i].grad(), dirs[i]);

    std::vector<Tensor<double>> plus = inputs, minus = inputs;
    for (std::size_t i = 0; i < inputs.size(); ++i)
      for (std::size_t j = 0; j < inputs[i].numel(); ++j) {
        plus[i][j] += options.step * dirs[i][j];
        minus[i][j] -= options.step * dirs[i][j];
      }
    const double numeric = (evaluate(f, plus, r) - evaluate(f, minus, r)) / (2.0 * options.step);
    const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    report.max_rel_error = std::max(report.max_rel_error, std::abs(numeric - analytic) / scale);
    ++report.probes;
  }
  return report;
}

namespace {

using Rng = std::mt19937_64;

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); }

// Entries at least 0.2 away from zero, so relu kinks and L1 ties are never straddled.
Tensor<double> away_from_zero(const Shape& shape, Rng& rng) {
  auto t = gaussian_like(shape, rng);
  for (auto& v : t.data()) v += v < 0 ? -0.2 : 0.2;
  return t;
}

class Suite {
 public:
  void add(const std::string& name, double tol, const DiffFn& f, const std::vector<Tensor<double>>& inputs,
           std::uint64_t seed) {
    auto it = std::find_if(out_.begin(), out_.end(), [&](const auto& s) { return s.name == name; });
    if (it == out_.end()) {
      out_.push_back({name, 0, 0.0, tol});
      it = out_.end() - 1;
    }
    const auto r = finite_diff_check(name, f, inputs, tol, {1e-5, 3, seed});
    ++it->instances;
    it->max_rel_error = std::max(it->max_rel_error, r.max_rel_error);
  }
  std::vector<GradCheckSummary> take() { return std::move(out_); }

 private:
  std::vector<GradCheckSummary> out_;
};

IndexMap random_map(std::size_t from, std::size_t to, Rng& rng) {
  IndexMap m(to);
  for (auto& v : m) v = static_cast<std::int32_t>(pick(rng, 0, from)) - 1;
  return m;
}

}  // namespace

std::vector<GradCheckSummary> gradcheck_suite(std::size_t instances, std::uint64_t seed) {
  constexpr double kOp = 1e-6, kStack = 1e-4;
  Rng rng(seed);
  Suite suite;
  for (std::size_t t = 0; t < instances; ++t) {
    const std::uint64_t s = seed * 1000 + t;
    const std::size_t n = pick(rng, 1, 2), ci = pick(rng, 1, 3), co = pick(rng, 1, 3), hw = pick(rng, 4, 7);
    const ConvParams zero{2, 1, PadMode::zero}, circ{1, 1, PadMode::circular}, unit{1, 0, PadMode::zero};
    suite.add("conv2d/zero", kOp, [&](const auto& v) { return ag::conv2d(v[0], v[1], zero); },
              {gaussian_like({n, ci, 2 * hw, 2 * hw}, rng), gaussian_like({co, ci, 4, 4}, rng)}, s);
    suite.add("conv2d/circular", kOp, [&](const auto& v) { return ag::conv2d(v[0], v[1], circ); },
              {gaussian_like({n, ci, hw, hw}, rng), gaussian_like({co, ci, 3, 3}, rng)}, s);
    suite.add("conv2d/1x1", kOp, [&](const auto& v) { return ag::conv2d(v[0], v[1], unit); },
              {gaussian_like({n, ci, hw, hw}, rng), gaussian_like({co, ci, 1, 1}, rng)}, s);
    suite.add("deconv2d", kOp, [&](const auto& v) { return ag::deconv2d(v[0], v[1], zero); },
              {gaussian_like({n, ci, hw, hw}, rng), gaussian_like({ci, co, 4, 4}, rng)}, s);
    suite.add("add_channel_bias", kOp, [&](const auto& v) { return ag::add_channel_bias(v[0], v[1]); },
              {gaussian_like({n, co, hw, hw}, rng), gaussian_like({co}, rng)}, s);
    suite.add("relu", kOp, [&](const auto& v) { return ag::relu(v[0]); }, {away_from_zero({n, co, hw}, rng)}, s);
    suite.add("sigmoid", kOp, [&](const auto& v) { return ag::sigmoid(v[0]); }, {gaussian_like({n, 2 * hw}, rng)}, s);
    const std::size_t in = pick(rng, 1, 9), out = pick(rng, 1, 9);
    suite.add("linear", kOp, [&](const auto& v) { return ag::linear(v[0], v[1], v[2]); },
              {gaussian_like({n, in}, rng), gaussian_like({out, in}, rng), gaussian_like({out}, rng)}, s);
    suite.add("reshape", kOp, [&](const auto& v) { return ag::reshape(v[0], {n, ci * hw * hw}); },
              {gaussian_like({n, ci, hw, hw}, rng)}, s);
    suite.add("to_channels_last", kOp, [&](const auto& v) { return ag::to_channels_last(v[0]); },
              {gaussian_like({n, ci, hw, hw + 1}, rng)}, s);
    suite.add("to_channels_first", kOp, [&](const auto& v) { return ag::to_channels_first(v[0]); },
              {gaussian_like({n, hw, hw + 1, ci}, rng)}, s);
    std::vector<IndexMap> maps;
    for (std::size_t k = 0; k < n; ++k) maps.push_back(random_map(in, out, rng));
    suite.add("gather", kOp, [&](const auto& v) { return ag::gather(v[0], maps); }, {gaussian_like({n, in}, rng)}, s);
    const auto c = gaussian_like({n, in}, rng);
    suite.add("add_constant", kOp, [&](const auto& v) { return ag::add_constant(v[0], c); }, {gaussian_like({n, in}, rng)},
              s);
    const auto target = gaussian_like({n, in}, rng);
    auto pred = away_from_zero({n, in}, rng);
    for (std::size_t k = 0; k < pred.numel(); ++k) pred[k] += target[k];
    suite.add("l1_loss", kOp, [&](const auto& v) { return ag::l1_loss(v[0], target); }, {pred}, s);
    const auto r = gaussian_like({n, in}, rng);
    suite.add("inner", kOp, [&](const auto& v) { return ag::inner(v[0], r); }, {gaussian_like({n, in}, rng)}, s);

    // lattice shift as a gather over a mixed spec
    LatticeSpec spec{{{"a", pick(rng, 2, 5), true, 1}, {"b", pick(rng, 2, 4), false, 1}}, pick(rng, 1, 3),
                     pick(rng, 0, 1) ? LatticeMode::product : LatticeMode::additive};
    const LatticeOffset u{{static_cast<std::int64_t>(pick(rng, 0, 4)) - 2, static_cast<std::int64_t>(pick(rng, 0, 2)) - 1}};
    const auto shift_map = shift_index_map(spec, u);
    suite.add("lattice_shift", kOp, [&](const auto& v) { return ag::gather(v[0], {shift_map}); },
              {gaussian_like({n, spec.element_count()}, rng)}, s);

    // stacks
    BackboneConfig bc;
    bc.widths = {pick(rng, 2, 4), pick(rng, 2, 4), pick(rng, 2, 4)};
    bc.code_channels = pick(rng, 2, 4);
    bc.image_height = bc.image_width = 16;
    Backbone<double> bb(bc, spec.element_count(), s);
    std::vector<Tensor<double>> params;
    for (const auto& p : bb.params()) params.push_back(p.var.value());
    // random biases keep pre-activations off the relu kink at zero
    for (auto& p : params)
      if (p.rank() == 1)
        for (auto& v : p.data()) v = 0.3 * std::normal_distribution<double>()(rng);
    Tensor<double> x({n, 1, 16, 16});
    std::uniform_real_distribution<double> unit01(0.0, 1.0);
    for (auto& v : x.data()) v = unit01(rng);
    const auto code = gaussian_like({n, spec.element_count()}, rng);
    suite.add("stack/encoder", kStack, [&](const auto& v) { return bb.encode_with(v, Var<double>(x)); }, params, s);
    suite.add("stack/decoder", kStack, [&](const auto& v) { return bb.decode_with(v, Var<double>(code)); }, params, s);
    const auto y = x;
    suite.add("stack/shifted_autoencoder", kStack,
              [&](const auto& v) {
                const auto z = ag::gather(bb.encode_with(v, Var<double>(x)), {shift_map});
                return ag::l1_loss(bb.decode_with(v, z), y);
              },
              params, s);
  }
  return suite.take();
}

}  // namespace qtae
