#pragma once

#include <cstdint>
#include <vector>

#include "eddynet/model.hpp"

namespace eddynet {

struct RangerConfig {
  double lr = 2e-4;
  double beta1 = 0.95;
  double beta2 = 0.999;
  double eps = 1e-5;
  int lookahead_k = 6;
  double lookahead_alpha = 0.5;
};

/// Rectification kicks in once the variance estimate is tractable.
inline constexpr double kRectifyThreshold = 4.0;

/// Moments, slow weights and step counter. Entries for non-trainable tensors stay empty.
template <typename T>
struct OptState {
  RangerConfig config;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::vector<Tensor<T>> slow;
  std::int64_t step = 0;
};

template <typename T>
OptState<T> make_opt_state(const ModelParams<T>& params, const RangerConfig& config);

/// rho_t of the RAdam schedule.
double radam_rho(double beta2, std::int64_t t);

/// Rectification factor r_t, or 0 when rho_t <= 4 (unrectified branch).
double radam_rectifier(double beta2, std::int64_t t);

/// One RAdam update. Throws Error{non_finite} before touching anything if a
/// gradient is NaN/Inf.
template <typename T>
void radam_step(ModelParams<T>& params, const std::vector<Tensor<T>>& grads, OptState<T>& state);

/// Every lookahead_k steps: slow += alpha (fast - slow); fast = slow.
template <typename T>
void lookahead_sync(ModelParams<T>& params, OptState<T>& state);

/// radam_step followed by lookahead_sync.
template <typename T>
void ranger_step(ModelParams<T>& params, const std::vector<Tensor<T>>& grads, OptState<T>& state);

}  // namespace eddynet
