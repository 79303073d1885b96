#pragma once

#include <functional>
#include <string>
#include <vector>

#include "eddynet/model.hpp"

namespace eddynet {

inline constexpr double kFiniteDifferenceStep = 1e-4;
inline constexpr double kGradientTolerance = 1e-4;
/// Per-tensor element budget of the default composed-model check.
inline constexpr std::size_t kDefaultElementBudget = 512;

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed() const { return max_rel_error <= kGradientTolerance; }
};

/// |a - b| / max(|a|, |b|, 1e-8).
double relative_error(double analytic, double numeric);

/// Central differences of `loss` with respect to every element of `target`,
/// compared against `analytic`. `loss` must read `target` by reference.
GradCheckResult check_tensor(const std::string& name, Tensor<double>& target,
                             const Tensor<double>& analytic, const std::function<double()>& loss,
                             double h = kFiniteDifferenceStep);

/// Each layer type alone under a random linear functional.
std::vector<GradCheckResult> gradcheck_layers(std::uint64_t seed = 1);

/// Every trainable tensor of a composed model with MAE loss (double precision).
/// Tensors larger than `max_elements` are checked on a random subset of that
/// size; 0 checks every element.
std::vector<GradCheckResult> gradcheck_model(Variant variant, int width, int attention_channels,
                                             int batch, std::uint64_t seed = 1,
                                             std::size_t max_elements = kDefaultElementBudget);

/// Layers in isolation plus the composed eddynet model at C=4, K=3, B=2.
std::vector<GradCheckResult> gradcheck_suite(std::uint64_t seed = 1,
                                             std::size_t max_elements = kDefaultElementBudget);

}  // namespace eddynet
