#include "eddynet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace eddynet {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult check_tensor(const std::string& name, Tensor<double>& target,
                             const Tensor<double>& analytic, const std::function<double()>& loss,
                             double h) {
  require_shape(target.shape == analytic.shape, "gradient shape for " + name);
  GradCheckResult r;
  r.name = name;
  r.checked = target.size();
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double saved = target.data[i];
    target.data[i] = saved + h;
    const double up = loss();
    target.data[i] = saved - h;
    const double down = loss();
    target.data[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double err = relative_error(analytic.data[i], numeric);
    if (err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst_analytic = analytic.data[i];
      r.worst_numeric = numeric;
    }
  }
  return r;
}

namespace {

Tensor<double> random_tensor(Shape shape, RngState& s, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  for (double& v : t.data) v = scale * next_gaussian(s);
  return t;
}

// Values bounded away from the activation kinks at 0.
Tensor<double> random_away_from_zero(Shape shape, RngState& s) {
  Tensor<double> t(std::move(shape));
  for (double& v : t.data) {
    const double u = 0.1 + 2.0 * next_unit(s);
    v = (next_u64(s) >> 63) ? u : -u;
  }
  return t;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.data[i] * b.data[i];
  return acc;
}

}  // namespace

std::vector<GradCheckResult> gradcheck_layers(std::uint64_t seed) {
  std::vector<GradCheckResult> out;
  RngState s = derive_stream(seed, 0);

  const std::vector<std::pair<std::string, ConvGeometry>> conv_geoms = {
      {"conv k6 s2 p2", {6, 6, 2, 2, 2, 2}},
      {"conv k5 s2 p2", {5, 5, 2, 2, 2, 2}},
      {"conv k4 s2 p1", {4, 4, 2, 2, 1, 1}},
      {"conv k4 s1 p1", {4, 4, 1, 1, 1, 1}},
  };
  for (const auto& [name, g] : conv_geoms) {
    Tensor<double> x = random_tensor({2, 3, 8, 8}, s);
    Tensor<double> w = random_tensor({4, 3, g.kh, g.kw}, s, 0.3);
    Tensor<double> b = random_tensor({4}, s);
    const Tensor<double> probe =
        random_tensor(kernels::conv2d_forward(x, w, b, g).shape, s);
    auto loss = [&] { return dot(kernels::conv2d_forward(x, w, b, g), probe); };
    Tensor<double> dx, dw, db;
    kernels::conv2d_backward(x, w, probe, g, &dx, dw, &db);
    out.push_back(check_tensor(name + " dx", x, dx, loss));
    out.push_back(check_tensor(name + " dw", w, dw, loss));
    out.push_back(check_tensor(name + " db", b, db, loss));
  }

  const std::vector<std::pair<std::string, ConvGeometry>> deconv_geoms = {
      {"deconv k(5,3) s1 p0", {5, 3, 1, 1, 0, 0}},
      {"deconv k4 s2 p1", {4, 4, 2, 2, 1, 1}},
      {"deconv k(4,3) s(2,1) p(1,1)", {4, 3, 2, 1, 1, 1}},
      {"deconv k5 s1 p2", {5, 5, 1, 1, 2, 2}},
  };
  for (const auto& [name, g] : deconv_geoms) {
    Tensor<double> x = random_tensor({2, 3, 3, 4}, s);
    Tensor<double> w = random_tensor({3, 4, g.kh, g.kw}, s, 0.3);
    Tensor<double> b = random_tensor({4}, s);
    const Tensor<double> probe =
        random_tensor(kernels::deconv2d_forward(x, w, b, g).shape, s);
    auto loss = [&] { return dot(kernels::deconv2d_forward(x, w, b, g), probe); };
    Tensor<double> dx, dw, db;
    kernels::deconv2d_backward(x, w, probe, g, &dx, dw, &db);
    out.push_back(check_tensor(name + " dx", x, dx, loss));
    out.push_back(check_tensor(name + " dw", w, dw, loss));
    out.push_back(check_tensor(name + " db", b, db, loss));
  }

  for (Mode mode : {Mode::train, Mode::eval}) {
    const std::string tag = mode == Mode::train ? "batchnorm train" : "batchnorm eval";
    Tensor<double> x = random_tensor({3, 2, 3, 3}, s);
    Tensor<double> gain = random_tensor({2}, s);
    Tensor<double> beta = random_tensor({2}, s);
    Tensor<double> rm = random_tensor({2}, s, 0.1);
    Tensor<double> rv({2}, 1.3);
    const Tensor<double> probe = random_tensor(x.shape, s);
    auto forward = [&](kernels::BatchNormCache<double>* cache) {
      if (mode == Mode::train) {
        Tensor<double> rm_scratch = rm, rv_scratch = rv;
        return kernels::batchnorm_forward_train(x, gain, beta, rm_scratch, rv_scratch, cache);
      }
      return kernels::batchnorm_forward_eval(x, gain, beta, rm, rv, cache);
    };
    auto loss = [&] { return dot(forward(nullptr), probe); };
    kernels::BatchNormCache<double> cache;
    forward(&cache);
    Tensor<double> dx, dgain, dbeta;
    kernels::batchnorm_backward(probe, gain, cache, dx, dgain, dbeta);
    out.push_back(check_tensor(tag + " dx", x, dx, loss));
    out.push_back(check_tensor(tag + " dgain", gain, dgain, loss));
    out.push_back(check_tensor(tag + " dbias", beta, dbeta, loss));
  }

  const std::vector<std::pair<std::string, Activation>> acts = {
      {"mish", Activation::mish},
      {"relu", Activation::relu},
      {"leaky_relu", Activation::leaky_relu},
      {"sigmoid", Activation::sigmoid},
  };
  for (const auto& [name, a] : acts) {
    Tensor<double> x = random_away_from_zero({2, 3, 4, 4}, s);
    const Tensor<double> probe = random_tensor(x.shape, s);
    auto loss = [&] { return dot(kernels::activation_forward(x, a), probe); };
    out.push_back(check_tensor(name + " dx", x, kernels::activation_backward(x, probe, a), loss));
  }

  {
    Tensor<double> x = random_tensor({2, 5, 4, 3}, s);
    const Tensor<double> probe = random_tensor({2, 1, 4, 3}, s);
    auto loss = [&] { return dot(kernels::attention_forward(x), probe); };
    out.push_back(check_tensor("attention dx", x, kernels::attention_backward(x, probe), loss));
  }
  return out;
}

namespace {

std::vector<std::size_t> sample_indices(std::size_t size, std::size_t max_elements,
                                        RngState& s) {
  std::vector<std::size_t> idx(size);
  for (std::size_t i = 0; i < size; ++i) idx[i] = i;
  if (max_elements == 0 || size <= max_elements) return idx;
  for (std::size_t i = 0; i < max_elements; ++i) {
    const std::size_t j = i + next_u64(s) % (size - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(max_elements);
  std::sort(idx.begin(), idx.end());
  return idx;
}

GradCheckResult check_tensor_terms(const std::string& name, Tensor<double>& target,
                                   const Tensor<double>& analytic,
                                   const std::vector<std::size_t>& indices,
                                   const std::function<std::vector<double>()>& terms, double h) {
  require_shape(target.shape == analytic.shape, "gradient shape for " + name);
  GradCheckResult r;
  r.name = name;
  r.checked = indices.size();
  for (std::size_t i : indices) {
    const double saved = target.data[i];
    target.data[i] = saved + h;
    const std::vector<double> up = terms();
    target.data[i] = saved - h;
    const std::vector<double> down = terms();
    target.data[i] = saved;
    double delta = 0.0;
    for (std::size_t k = 0; k < up.size(); ++k) delta += up[k] - down[k];
    const double numeric = delta / (2.0 * h);
    const double err = relative_error(analytic.data[i], numeric);
    if (err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst_analytic = analytic.data[i];
      r.worst_numeric = numeric;
    }
  }
  return r;
}

}  // namespace

std::vector<GradCheckResult> gradcheck_model(Variant variant, int width, int attention_channels,
                                             int batch, std::uint64_t seed,
                                             std::size_t max_elements) {
  RngState init_stream = derive_stream(seed, 10);
  ModelParams<double> params = init_params<double>(variant, width, attention_channels, init_stream);

  // Evaluation point: unit-variance pre-activations everywhere. Layers followed
  // by batch norm are invariant to their weight scale, so they get unit
  // weights; the others get 1/sqrt(fan-in).
  RngState s = derive_stream(seed, 11);
  for (const LayerSpec& layer : params.arch().layers) {
    const ConvGeometry& g = layer.geom;
    double scale = 1.0;
    if (!layer.batchnorm) {
      double fan_in = static_cast<double>(layer.in_ch) * g.kh * g.kw;
      if (layer.kind == LayerKind::deconv) fan_in /= static_cast<double>(g.sh * g.sw);
      scale = 1.0 / std::sqrt(fan_in);
    }
    for (double& v : params.get(layer.name + ".weight").data) v = scale * next_gaussian(s);
    if (layer.has_bias()) {
      for (double& v : params.get(layer.name + ".bias").data) v = 0.1 * next_gaussian(s);
    }
  }

  Tensor<double> input = random_tensor({batch, kInputChannels, kScanRows, kScanCols}, s);
  Tensor<double> truth({batch, 1, kProfileRows, kProfileCols});
  for (double& v : truth.data) v = static_cast<double>(next_u64(s) >> 63);

  const Gradients<double> grads = model_backward(params, input, truth);

  // The loss is differenced pixel by pixel before summing; summing first would
  // cancel two nearly equal totals and swamp small gradients in rounding noise.
  // Train-mode outputs depend on batch statistics only, so the running
  // estimates that each probe forward updates do not affect the loss.
  const double n = static_cast<double>(truth.size());
  auto terms = [&] {
    const Tensor<double> pred = model_forward(params, input, Mode::train);
    std::vector<double> t(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) t[i] = std::abs(pred.data[i] - truth.data[i]) / n;
    return t;
  };
  RngState pick = derive_stream(seed, 12);
  std::vector<GradCheckResult> out;
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    if (!params.tensors[i].trainable) continue;
    Tensor<double>& target = params.tensors[i].value;
    out.push_back(check_tensor_terms(
        std::string(variant_name(variant)) + " " + params.tensors[i].name, target, grads.grads[i],
        sample_indices(target.size(), max_elements, pick), terms, kFiniteDifferenceStep));
  }
  return out;
}

std::vector<GradCheckResult> gradcheck_suite(std::uint64_t seed, std::size_t max_elements) {
  std::vector<GradCheckResult> out = gradcheck_layers(seed);
  auto part = gradcheck_model(Variant::eddynet, 4, 3, 2, seed, max_elements);
  out.insert(out.end(), part.begin(), part.end());
  return out;
}

}  // namespace eddynet
