#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "doctest.h"
#include "eddynet/checkpoint.hpp"
#include "eddynet/gradcheck.hpp"
#include "eddynet/model.hpp"

using namespace eddynet;

namespace {

Tensor<double> random_batch(int b, RngState& s) {
  Tensor<double> t({b, kInputChannels, kScanRows, kScanCols});
  for (double& v : t.data) v = next_gaussian(s);
  return t;
}

Tensor<double> random_truth(int b, RngState& s) {
  Tensor<double> t({b, 1, kProfileRows, kProfileCols});
  for (double& v : t.data) v = static_cast<double>(next_u64(s) >> 63);
  return t;
}

std::optional<ErrorCategory> category_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.category();
  }
  return std::nullopt;
}

std::string temp_path(const std::string& leaf) {
  return (std::filesystem::temp_directory_path() / ("eddynet_test_model_" + leaf)).string();
}

}  // namespace

TEST_CASE("variant names round trip") {
  for (Variant v : kAllVariants) CHECK(parse_variant(variant_name(v)) == v);
  CHECK(category_of([] { parse_variant("resnet"); }) == ErrorCategory::variant);
}

TEST_CASE("eddynet shape chain") {
  RngState s{1};
  ModelParams<double> p = init_params<double>(Variant::eddynet, 8, 5, s);
  Tape<double> tape;
  const Tensor<double> out = model_forward(p, random_batch(2, s), Mode::train, &tape);
  CHECK(out.shape == Shape{2, 1, 40, 12});
  const std::vector<Shape> inputs = {
      {2, 6, 40, 40}, {2, 8, 20, 20}, {2, 8, 10, 10}, {2, 8, 5, 5},  {2, 8, 2, 2},
      {2, 128, 1, 1}, {2, 8, 5, 3},   {2, 8, 10, 6},  {2, 8, 20, 12}, {2, 8, 40, 12},
  };
  REQUIRE(tape.blocks.size() == inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    CAPTURE(i);
    CHECK(tape.blocks[i].input.shape == inputs[i]);
  }
  CHECK(tape.latent.shape == Shape{2, 128, 1, 1});
  CHECK(tape.head_input.shape == Shape{2, 5, 40, 12});
}

TEST_CASE("nodec emits a 480-dimensional latent reshaped to the profile") {
  RngState s{2};
  ModelParams<double> p = init_params<double>(Variant::nodec, 8, 5, s);
  Tape<double> tape;
  const Tensor<double> out = model_forward(p, random_batch(3, s), Mode::train, &tape);
  CHECK(tape.blocks.size() == 5);
  CHECK(tape.latent.shape == Shape{3, 480, 1, 1});
  CHECK(out.shape == Shape{3, 1, 40, 12});
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(out.data[i] == doctest::Approx(1.0 / (1.0 + std::exp(-tape.latent.data[i]))));
}

TEST_CASE("noattn ends in a single channel") {
  const Architecture a = architecture(Variant::noattn, 16, 20);
  CHECK(a.layers.back().out_ch == 1);
  CHECK(a.head == Head::sigmoid);
}

TEST_CASE("relu variant swaps the activations") {
  const Architecture a = architecture(Variant::relu, 16, 20);
  for (const LayerSpec& l : a.layers) {
    if (!l.batchnorm) continue;
    CAPTURE(l.name);
    CHECK(l.activation == (l.kind == LayerKind::conv ? Activation::relu : Activation::leaky_relu));
  }
  for (const LayerSpec& l : architecture(Variant::eddynet, 16, 20).layers)
    if (l.batchnorm) CHECK(l.activation == Activation::mish);
}

TEST_CASE("all-zero parameters predict 0.5 everywhere") {
  RngState s{3};
  for (Variant v : kAllVariants) {
    ModelParams<double> p = zero_params<double>(v, 4, 3);
    for (Mode mode : {Mode::train, Mode::eval}) {
      const Tensor<double> out = model_forward(p, random_batch(2, s), mode);
      for (double x : out.data) CHECK(x == 0.5);
    }
  }
}

TEST_CASE("init is deterministic per seed") {
  RngState a{42}, b{42}, c{43};
  const auto pa = init_params<float>(Variant::eddynet, 16, 4, a);
  const auto pb = init_params<float>(Variant::eddynet, 16, 4, b);
  const auto pc = init_params<float>(Variant::eddynet, 16, 4, c);
  REQUIRE(pa.tensors.size() == pb.tensors.size());
  for (std::size_t i = 0; i < pa.tensors.size(); ++i) CHECK(pa.tensors[i].value == pb.tensors[i].value);
  CHECK_FALSE(pa.get("enc1.weight") == pc.get("enc1.weight"));
}

TEST_CASE("full-size parameter table") {
  RngState s{5};
  const ModelParams<float> p = init_params<float>(Variant::eddynet, 320, 20, s);
  struct Expect {
    const char* name;
    Shape shape;
  };
  const std::vector<Expect> table = {
      {"enc1.weight", {320, 6, 6, 6}},  {"enc2.weight", {320, 320, 5, 5}},
      {"enc3.weight", {320, 320, 4, 4}}, {"enc4.weight", {320, 320, 4, 4}},
      {"enc5.weight", {128, 320, 4, 4}}, {"enc5.bias", {128}},
      {"dec1.weight", {128, 320, 5, 3}}, {"dec2.weight", {320, 320, 4, 4}},
      {"dec3.weight", {320, 320, 4, 4}}, {"dec4.weight", {320, 320, 4, 3}},
      {"dec5.weight", {320, 20, 5, 5}},  {"dec5.bias", {20}},
  };
  std::size_t weights = 0;
  for (const Expect& e : table) {
    CAPTURE(e.name);
    CHECK(p.get(e.name).shape == e.shape);
    ++weights;
  }
  const std::vector<std::string> bn_layers = {"enc1", "enc2", "enc3", "enc4",
                                              "dec1", "dec2", "dec3", "dec4"};
  for (const std::string& l : bn_layers) {
    for (const char* suffix : {".bn.gain", ".bn.bias", ".bn.running_mean", ".bn.running_var"})
      CHECK(p.get(l + suffix).shape == Shape{320});
    CHECK(p.tensors[p.index_of(l + ".bn.running_mean")].trainable == false);
    CHECK(p.tensors[p.index_of(l + ".bn.running_var")].trainable == false);
    CHECK(category_of([&] { (void)p.index_of(l + ".bias"); }) == ErrorCategory::shape);
  }
  CHECK(p.tensors.size() == weights + 4 * bn_layers.size());
  CHECK(p.trainable_count() == weights + 2 * bn_layers.size());

  // Weight std over 655360 draws.
  const Tensor<float>& w = p.get("enc5.weight");
  REQUIRE(w.size() >= 100000);
  double mean = 0.0, sq = 0.0;
  for (float v : w.data) mean += v;
  mean /= static_cast<double>(w.size());
  for (float v : w.data) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(w.size()));
  CHECK(sd >= 0.018);
  CHECK(sd <= 0.022);
  CHECK(std::abs(mean) < 1e-3);

  double gain_mean = 0.0;
  for (float v : p.get("dec2.bn.gain").data) gain_mean += v;
  CHECK(gain_mean / 320.0 == doctest::Approx(1.0).epsilon(0.01));
  for (float v : p.get("dec2.bn.running_var").data) CHECK(v == 1.0f);
  for (float v : p.get("dec5.bias").data) CHECK(v == 0.0f);
}

TEST_CASE("composed models agree with finite differences") {
  // Small per-tensor samples; the acceptance suite checks eddynet on a larger one.
  for (Variant v : {Variant::eddynet, Variant::noattn, Variant::nodec}) {
    for (const GradCheckResult& r : gradcheck_model(v, 4, 3, 2, 7, 48)) {
      CAPTURE(r.name);
      CAPTURE(r.max_rel_error);
      CHECK(r.passed());
    }
  }
}

TEST_CASE("model_backward reports the loss of the same forward pass") {
  RngState s{8};
  ModelParams<double> p = init_params<double>(Variant::eddynet, 4, 3, s);
  ModelParams<double> q = p;
  const Tensor<double> x = random_batch(2, s);
  const Tensor<double> t = random_truth(2, s);
  const Gradients<double> g = model_backward(p, x, t);
  Tensor<double> grad;
  CHECK(g.loss == kernels::mae_loss(model_forward(q, x, Mode::train), t, &grad));
  CHECK(p.get("enc1.bn.running_mean") == q.get("enc1.bn.running_mean"));
  REQUIRE(g.grads.size() == p.tensors.size());
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    if (p.tensors[i].trainable) {
      CHECK(g.grads[i].shape == p.tensors[i].value.shape);
    } else {
      CHECK(g.grads[i].empty());
    }
  }
}

TEST_CASE("a duplicated sample leaves the gradient unchanged") {
  // Mean reduction, and batch statistics of [x, x] equal those of [x].
  RngState s{9};
  for (Variant v : kAllVariants) {
    CAPTURE(variant_name(v));
    ModelParams<double> p = init_params<double>(v, 4, 3, s);
    const Tensor<double> x = random_batch(1, s);
    const Tensor<double> t = random_truth(1, s);
    Tensor<double> xx({2, kInputChannels, kScanRows, kScanCols});
    Tensor<double> tt({2, 1, kProfileRows, kProfileCols});
    std::copy(x.data.begin(), x.data.end(), xx.data.begin());
    std::copy(x.data.begin(), x.data.end(), xx.data.begin() + static_cast<long>(x.size()));
    std::copy(t.data.begin(), t.data.end(), tt.data.begin());
    std::copy(t.data.begin(), t.data.end(), tt.data.begin() + static_cast<long>(t.size()));
    const Gradients<double> one = model_backward(p, x, t);
    const Gradients<double> two = model_backward(p, xx, tt);
    CHECK(two.loss == doctest::Approx(one.loss).epsilon(1e-12));
    for (std::size_t i = 0; i < p.tensors.size(); ++i) {
      if (!p.tensors[i].trainable) continue;
      double scale = 0.0, diff = 0.0;
      for (std::size_t k = 0; k < one.grads[i].size(); ++k) {
        scale = std::max(scale, std::abs(one.grads[i].data[k]));
        diff = std::max(diff, std::abs(one.grads[i].data[k] - two.grads[i].data[k]));
      }
      CAPTURE(p.tensors[i].name);
      CHECK(diff <= 1e-9 * std::max(scale, 1e-12));
    }
  }
}

TEST_CASE("train mode updates running statistics, eval mode does not") {
  RngState s{10};
  ModelParams<float> p = init_params<float>(Variant::eddynet, 4, 3, s);
  const Tensor<float> x = random_batch(2, s).cast<float>();
  const Tensor<float> before = p.get("enc2.bn.running_var");
  model_forward(p, x, Mode::eval);
  CHECK(p.get("enc2.bn.running_var") == before);
  model_forward(p, x, Mode::train);
  CHECK_FALSE(p.get("enc2.bn.running_var") == before);
}

TEST_CASE("eval forward is bit-identical across calls") {
  RngState s{11};
  ModelParams<float> p = init_params<float>(Variant::eddynet, 8, 4, s);
  model_forward(p, random_batch(4, s).cast<float>(), Mode::train);
  const Tensor<float> x = random_batch(3, s).cast<float>();
  const Tensor<float> a = model_predict(p, x);
  const Tensor<float> b = model_predict(p, x);
  CHECK(a == b);
  CHECK(model_forward(p, x, Mode::eval) == a);
}

TEST_CASE("single and double precision forwards agree") {
  RngState s{12};
  ModelParams<double> p = init_params<double>(Variant::eddynet, 8, 4, s);
  const Tensor<double> x = random_batch(2, s);
  const Tensor<double> d = model_predict(p, x);
  const Tensor<float> f = model_predict(p.cast<float>(), x.cast<float>());
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(std::abs(f.data[i] - d.data[i]) < 1e-5);
}

TEST_CASE("malformed input batches are rejected") {
  RngState s{13};
  ModelParams<float> p = init_params<float>(Variant::eddynet, 4, 3, s);
  CHECK(category_of([&] { model_predict(p, Tensor<float>({1, 6, 40, 39})); }) ==
        ErrorCategory::shape);
  CHECK(category_of([&] { model_predict(p, Tensor<float>({1, 5, 40, 40})); }) ==
        ErrorCategory::shape);
  CHECK(category_of([] { architecture(Variant::eddynet, 0, 3); }) == ErrorCategory::invalid_argument);
}

TEST_CASE("checkpoint round trip") {
  RngState s{14};
  ModelParams<float> p = init_params<float>(Variant::noattn, 8, 4, s);
  model_forward(p, random_batch(2, s).cast<float>(), Mode::train);
  for (int c = 0; c < kInputChannels; ++c) {
    p.stats.mean[static_cast<std::size_t>(c)] = 0.25 * c;
    p.stats.std[static_cast<std::size_t>(c)] = 1.0 + c;
  }
  const std::string path = temp_path("roundtrip.eck");
  save_checkpoint(p, path);
  const ModelParams<float> q = load_checkpoint(path, Variant::noattn);
  std::filesystem::remove(path);
  CHECK(q.variant == Variant::noattn);
  CHECK(q.width == 8);
  CHECK(q.attention_channels == 4);
  CHECK(q.stats == p.stats);
  REQUIRE(q.tensors.size() == p.tensors.size());
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    CHECK(q.tensors[i].name == p.tensors[i].name);
    CHECK(q.tensors[i].trainable == p.tensors[i].trainable);
    CHECK(q.tensors[i].value == p.tensors[i].value);
  }
  const Tensor<float> x = random_batch(2, s).cast<float>();
  CHECK(model_predict(p, x) == model_predict(q, x));
  CHECK(serialize_checkpoint(q) == serialize_checkpoint(p));
}

TEST_CASE("corrupted checkpoints fail with a category and no partial load") {
  RngState s{15};
  const ModelParams<float> p = init_params<float>(Variant::eddynet, 4, 3, s);
  const std::vector<std::uint8_t> good = serialize_checkpoint(p);
  CHECK_NOTHROW(deserialize_checkpoint(good));

  // magic(4) version(4) variant(1) C(4) K(4) stats(96) -> count at offset 113.
  const std::size_t count_at = 4 + 4 + 1 + 4 + 4 + 96;
  std::vector<std::uint8_t> bad = good;
  bad[count_at] = static_cast<std::uint8_t>(bad[count_at] + 1);
  CHECK(category_of([&] { deserialize_checkpoint(bad); }) == ErrorCategory::shape);

  bad = good;
  bad[0] = 'X';
  CHECK(category_of([&] { deserialize_checkpoint(bad); }) == ErrorCategory::bad_magic);

  bad = good;
  bad[4] = 99;
  CHECK(category_of([&] { deserialize_checkpoint(bad); }) == ErrorCategory::version);

  bad = good;
  bad[8] = 9;
  CHECK(category_of([&] { deserialize_checkpoint(bad); }) == ErrorCategory::variant);

  bad.assign(good.begin(), good.end() - 3);
  CHECK(category_of([&] { deserialize_checkpoint(bad); }) == ErrorCategory::truncated);

  bad = good;
  bad.push_back(0);
  CHECK(category_of([&] { deserialize_checkpoint(bad); }) == ErrorCategory::shape);

  CHECK(category_of([] { load_checkpoint(temp_path("does_not_exist.eck")); }) == ErrorCategory::io);
}

TEST_CASE("a checkpoint of one variant is refused where another is expected") {
  RngState s{16};
  const std::string path = temp_path("variant.eck");
  save_checkpoint(init_params<float>(Variant::eddynet, 4, 3, s), path);
  CHECK_NOTHROW(load_checkpoint(path, Variant::eddynet));
  CHECK(category_of([&] { load_checkpoint(path, Variant::relu); }) == ErrorCategory::variant);
  std::filesystem::remove(path);
}
