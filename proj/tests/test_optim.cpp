#include <cmath>
#include <vector>

#include "doctest.h"
#include "eddynet/optim.hpp"

using namespace eddynet;

namespace {

ModelParams<double> scalar_params(std::vector<double> values) {
  ModelParams<double> p;
  Tensor<double> t({static_cast<int>(values.size())});
  t.data = std::move(values);
  p.tensors.push_back({"theta", t, true});
  p.tensors.push_back({"frozen", Tensor<double>({2}, 7.0), false});
  return p;
}

std::vector<Tensor<double>> grads_of(std::vector<double> g) {
  Tensor<double> t({static_cast<int>(g.size())});
  t.data = std::move(g);
  return {t, Tensor<double>()};
}

// Straight transcription of the update rule for one coordinate, kept apart
// from the library on purpose.
struct ScalarRanger {
  RangerConfig c;
  double theta, slow, m = 0, v = 0;
  long t = 0;

  void step(double g) {
    ++t;
    m = c.beta1 * m + (1 - c.beta1) * g;
    v = c.beta2 * v + (1 - c.beta2) * g * g;
    const double mhat = m / (1 - std::pow(c.beta1, t));
    const double rinf = 2 / (1 - c.beta2) - 1;
    const double b2t = std::pow(c.beta2, t);
    const double rho = rinf - 2 * t * b2t / (1 - b2t);
    if (rho > 4) {
      const double r = std::sqrt((rho - 4) * (rho - 2) * rinf / ((rinf - 4) * (rinf - 2) * rho));
      theta -= c.lr * r * mhat / (std::sqrt(v / (1 - b2t)) + c.eps);
    } else {
      theta -= c.lr * mhat;
    }
    if (t % c.lookahead_k == 0) {
      slow += c.lookahead_alpha * (theta - slow);
      theta = slow;
    }
  }
};

}  // namespace

TEST_CASE("rho schedule") {
  CHECK(radam_rho(0.999, 1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(radam_rectifier(0.999, 1) == 0.0);
  // rho_t is close to t early on, so it crosses 4 between t = 4 and t = 5.
  CHECK(radam_rho(0.999, 4) <= 4.0);
  CHECK(radam_rectifier(0.999, 4) == 0.0);
  CHECK(radam_rho(0.999, 5) > 4.0);
  CHECK(radam_rectifier(0.999, 5) > 0.0);
  CHECK(radam_rectifier(0.999, 1000000) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("first step takes the unrectified branch") {
  ModelParams<double> p = scalar_params({0.0});
  RangerConfig c;
  c.lr = 0.1;
  OptState<double> s = make_opt_state(p, c);
  radam_step(p, grads_of({1.0}), s);
  CHECK(s.step == 1);
  CHECK(p.get("theta").data[0] == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(p.get("frozen").data == std::vector<double>{7.0, 7.0});
}

TEST_CASE("ranger matches a scalar transcription over many steps") {
  RngState rng{3};
  RangerConfig c;
  c.lr = 1e-2;
  const int n = 5;
  std::vector<double> init(n);
  for (double& x : init) x = next_gaussian(rng);
  ModelParams<double> p = scalar_params(init);
  OptState<double> s = make_opt_state(p, c);
  std::vector<ScalarRanger> oracle;
  for (double x : init) oracle.push_back({c, x, x});
  for (int step = 0; step < 40; ++step) {
    std::vector<double> g(n);
    for (double& x : g) x = next_gaussian(rng);
    ranger_step(p, grads_of(g), s);
    for (int i = 0; i < n; ++i) oracle[static_cast<std::size_t>(i)].step(g[static_cast<std::size_t>(i)]);
    for (int i = 0; i < n; ++i) {
      CAPTURE(step);
      CHECK(p.get("theta").data[static_cast<std::size_t>(i)] ==
            doctest::Approx(oracle[static_cast<std::size_t>(i)].theta).epsilon(1e-12));
      CHECK(s.slow[0].data[static_cast<std::size_t>(i)] ==
            doctest::Approx(oracle[static_cast<std::size_t>(i)].slow).epsilon(1e-12));
      CHECK(s.v[0].data[static_cast<std::size_t>(i)] >= 0.0);
    }
  }
}

TEST_CASE("zero gradients leave parameters and moments untouched [property]") {
  RngState rng{4};
  for (int trial = 0; trial < 150; ++trial) {
    const int n = 1 + static_cast<int>(next_u64(rng) % 8);
    std::vector<double> init(static_cast<std::size_t>(n));
    for (double& x : init) x = 5.0 * next_gaussian(rng);
    ModelParams<double> p = scalar_params(init);
    RangerConfig c;
    c.lr = std::pow(10.0, -1.0 - 4.0 * next_unit(rng));
    c.lookahead_k = 1 + static_cast<int>(next_u64(rng) % 8);
    c.lookahead_alpha = next_unit(rng);
    OptState<double> s = make_opt_state(p, c);
    const int steps = 1 + static_cast<int>(next_u64(rng) % 30);
    for (int k = 0; k < steps; ++k) ranger_step(p, grads_of(std::vector<double>(init.size(), 0.0)), s);
    CAPTURE(trial);
    CHECK(p.get("theta").data == init);
    CHECK(s.slow[0].data == init);
    for (double x : s.m[0].data) CHECK(x == 0.0);
    for (double x : s.v[0].data) CHECK(x == 0.0);
    CHECK(s.step == steps);
  }
}

TEST_CASE("lookahead sync") {
  ModelParams<double> p = scalar_params({1.0});
  RangerConfig c;
  c.lookahead_k = 3;
  OptState<double> s = make_opt_state(p, c);
  s.slow[0].data[0] = 0.0;

  s.step = 2;
  lookahead_sync(p, s);
  CHECK(p.get("theta").data[0] == 1.0);
  CHECK(s.slow[0].data[0] == 0.0);

  s.step = 3;
  lookahead_sync(p, s);
  CHECK(p.get("theta").data[0] == 0.5);
  CHECK(s.slow[0].data[0] == 0.5);

  s.config.lookahead_alpha = 1.0;
  p.get("theta").data[0] = 2.0;
  s.step = 6;
  lookahead_sync(p, s);
  CHECK(p.get("theta").data[0] == 2.0);
  CHECK(s.slow[0].data[0] == 2.0);
}

TEST_CASE("slow weights are constant between sync points") {
  RngState rng{5};
  ModelParams<double> p = scalar_params({0.3, -0.2, 1.1});
  RangerConfig c;
  c.lr = 0.05;
  OptState<double> s = make_opt_state(p, c);
  std::vector<double> last = s.slow[0].data;
  for (int k = 1; k <= 30; ++k) {
    ranger_step(p, grads_of({next_gaussian(rng), next_gaussian(rng), next_gaussian(rng)}), s);
    if (k % c.lookahead_k == 0) {
      CHECK(p.get("theta").data == s.slow[0].data);
      last = s.slow[0].data;
    } else {
      CHECK(s.slow[0].data == last);
    }
  }
}

TEST_CASE("non-finite gradients abort before any update") {
  ModelParams<double> p = scalar_params({1.0, 2.0});
  OptState<double> s = make_opt_state(p, RangerConfig{});
  ranger_step(p, grads_of({0.5, -0.5}), s);
  const ModelParams<double> before = p;
  const OptState<double> state_before = s;
  for (double bad : {std::nan(""), HUGE_VAL, -HUGE_VAL}) {
    try {
      ranger_step(p, grads_of({0.1, bad}), s);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::non_finite);
    }
    CHECK(p.get("theta") == before.get("theta"));
    CHECK(s.m[0] == state_before.m[0]);
    CHECK(s.v[0] == state_before.v[0]);
    CHECK(s.step == state_before.step);
  }
}

TEST_CASE("gradient shapes must match") {
  ModelParams<double> p = scalar_params({1.0, 2.0});
  OptState<double> s = make_opt_state(p, RangerConfig{});
  CHECK_THROWS_AS(radam_step(p, grads_of({1.0}), s), Error);
  CHECK_THROWS_AS(radam_step(p, std::vector<Tensor<double>>{}, s), Error);
}

TEST_CASE("updates stay finite for extreme finite gradients") {
  ModelParams<double> p = scalar_params({0.0, 0.0, 0.0});
  OptState<double> s = make_opt_state(p, RangerConfig{});
  for (int k = 0; k < 20; ++k) {
    ranger_step(p, grads_of({1e150, -1e-300, 0.0}), s);
    for (double x : p.get("theta").data) CHECK(std::isfinite(x));
  }
}

TEST_CASE("default constants") {
  const RangerConfig c;
  CHECK(c.lr == 2e-4);
  CHECK(c.beta1 == 0.95);
  CHECK(c.beta2 == 0.999);
  CHECK(c.eps == 1e-5);
  CHECK(c.lookahead_k == 6);
  CHECK(c.lookahead_alpha == 0.5);
}
