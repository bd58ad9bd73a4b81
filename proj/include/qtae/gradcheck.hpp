#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qtae/autograd.hpp"

namespace qtae {

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t directions = 3;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t probes = 0;
  bool passed() const { return max_rel_error < tolerance; }
};

/// Differentiable function under test: maps input variables to an output tensor.
using DiffFn = std::function<Var<double>(const std::vector<Var<double>>&)>;

/// Compares reverse-mode gradients against central differences.
///
/// The output is contracted with a fixed random tensor R to give a scalar
/// L(x) = <f(x), R>. For each random direction v, the directional derivative
/// sum_i <dL/dx_i, v_i> from backward() is compared with
/// (L(x + h v) - L(x - h v)) / 2h. Reports the worst relative error.
GradCheckReport finite_diff_check(const std::string& name, const DiffFn& f, const std::vector<Tensor<double>>& inputs,
                                  double tolerance, const GradCheckOptions& options = {});

/// Worst case of one named check over several random instances.
struct GradCheckSummary {
  std::string name;
  std::size_t instances = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_rel_error < tolerance; }
};

/// Every differentiable op (tolerance 1e-6) and the encoder, decoder and
/// shifted auto-encoder stacks (1e-4), each on `instances` random shapes.
std::vector<GradCheckSummary> gradcheck_suite(std::size_t instances, std::uint64_t seed);

}  // namespace qtae
