#include "eddynet/optim.hpp"

#include <cmath>

namespace eddynet {

template <typename T>
OptState<T> make_opt_state(const ModelParams<T>& params, const RangerConfig& config) {
  OptState<T> s;
  s.config = config;
  const std::size_t n = params.tensors.size();
  s.m.resize(n);
  s.v.resize(n);
  s.slow.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!params.tensors[i].trainable) continue;
    s.m[i] = Tensor<T>(params.tensors[i].value.shape);
    s.v[i] = Tensor<T>(params.tensors[i].value.shape);
    s.slow[i] = params.tensors[i].value;
  }
  return s;
}

double radam_rho(double beta2, std::int64_t t) {
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  const double b2t = std::pow(beta2, static_cast<double>(t));
  return rho_inf - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
}

double radam_rectifier(double beta2, std::int64_t t) {
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  const double rho = radam_rho(beta2, t);
  if (rho <= kRectifyThreshold) return 0.0;
  return std::sqrt(((rho - 4.0) * (rho - 2.0) * rho_inf) / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho));
}

template <typename T>
void radam_step(ModelParams<T>& params, const std::vector<Tensor<T>>& grads, OptState<T>& state) {
  require_shape(grads.size() == params.tensors.size(), "gradient list does not match parameters");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!params.tensors[i].trainable) continue;
    require_shape(grads[i].shape == params.tensors[i].value.shape,
                  "gradient shape for " + params.tensors[i].name);
    for (T g : grads[i].data) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw Error(ErrorCategory::non_finite,
                    "non-finite gradient in " + params.tensors[i].name + " at step " +
                        std::to_string(state.step + 1));
      }
    }
  }

  const RangerConfig& c = state.config;
  state.step += 1;
  const std::int64_t t = state.step;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  const double rect = radam_rectifier(c.beta2, t);

  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!params.tensors[i].trainable) continue;
    T* theta = params.tensors[i].value.data.data();
    T* m = state.m[i].data.data();
    T* v = state.v[i].data.data();
    const T* g = grads[i].data.data();
    const auto n = static_cast<std::int64_t>(grads[i].size());
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < n; ++j) {
      const double gj = g[j];
      const double mj = c.beta1 * m[j] + (1.0 - c.beta1) * gj;
      const double vj = c.beta2 * v[j] + (1.0 - c.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double m_hat = mj / bias1;
      double update;
      if (rect > 0.0) {
        update = c.lr * rect * m_hat / (std::sqrt(vj / bias2) + c.eps);
      } else {
        update = c.lr * m_hat;
      }
      theta[j] = static_cast<T>(theta[j] - update);
    }
  }
}

template <typename T>
void lookahead_sync(ModelParams<T>& params, OptState<T>& state) {
  const RangerConfig& c = state.config;
  if (c.lookahead_k <= 0 || state.step % c.lookahead_k != 0) return;
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    if (!params.tensors[i].trainable) continue;
    auto& fast = params.tensors[i].value.data;
    auto& slow = state.slow[i].data;
    for (std::size_t j = 0; j < fast.size(); ++j) {
      slow[j] = static_cast<T>(slow[j] + c.lookahead_alpha * (fast[j] - slow[j]));
      fast[j] = slow[j];
    }
  }
}

template <typename T>
void ranger_step(ModelParams<T>& params, const std::vector<Tensor<T>>& grads, OptState<T>& state) {
  radam_step(params, grads, state);
  lookahead_sync(params, state);
}

template OptState<float> make_opt_state(const ModelParams<float>&, const RangerConfig&);
template OptState<double> make_opt_state(const ModelParams<double>&, const RangerConfig&);
template void radam_step(ModelParams<float>&, const std::vector<Tensor<float>>&, OptState<float>&);
template void radam_step(ModelParams<double>&, const std::vector<Tensor<double>>&, OptState<double>&);
template void lookahead_sync(ModelParams<float>&, OptState<float>&);
template void lookahead_sync(ModelParams<double>&, OptState<double>&);
template void ranger_step(ModelParams<float>&, const std::vector<Tensor<float>>&, OptState<float>&);
template void ranger_step(ModelParams<double>&, const std::vector<Tensor<double>>&, OptState<double>&);

}  // namespace eddynet
