#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eddynet/dataset.hpp"
#include "eddynet/kernels.hpp"
#include "eddynet/rng.hpp"

namespace eddynet {

enum class Variant : std::uint8_t { eddynet = 0, nodec = 1, relu = 2, noattn = 3 };

inline constexpr Variant kAllVariants[] = {Variant::eddynet, Variant::nodec, Variant::relu,
                                           Variant::noattn};

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

inline constexpr int kLatentDim = 128;
inline constexpr int kDefaultWidth = 320;
inline constexpr int kDefaultAttentionChannels = 20;
inline constexpr double kInitStd = 0.02;

enum class LayerKind { conv, deconv };

/// One conv/deconv block: the convolution, then optional batch norm, then
/// the activation. Blocks followed by batch norm carry no bias.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::conv;
  int in_ch = 0;
  int out_ch = 0;
  ConvGeometry geom;
  bool batchnorm = false;
  Activation activation = Activation::none;

  bool has_bias() const { return !batchnorm; }
};

/// What happens after the last block.
enum class Head {
  attention_sigmoid,  // K channels -> softmax attention -> sigmoid
  sigmoid,            // single channel -> sigmoid
  sigmoid_reshape,    // 480x1x1 latent -> sigmoid -> 1x40x12
};

struct Architecture {
  Variant variant = Variant::eddynet;
  int width = kDefaultWidth;
  int attention_channels = kDefaultAttentionChannels;
  std::vector<LayerSpec> layers;
  Head head = Head::attention_sigmoid;
};

/// The per-variant layer table:
///   E1 conv 6->C   k6 s2 p2   40x40 -> 20x20  BN Mish
///   E2 conv C->C   k5 s2 p2   -> 10x10        BN Mish
///   E3 conv C->C   k4 s2 p1   -> 5x5          BN Mish
///   E4 conv C->C   k4 s2 p1   -> 2x2          BN Mish
///   E5 conv C->128 k4 s1 p1   -> 1x1          (latent, bare)
///   D1 deconv 128->C k(5,3) s1 p0       -> 5x3    BN Mish
///   D2 deconv C->C   k4 s2 p1           -> 10x6   BN Mish
///   D3 deconv C->C   k4 s2 p1           -> 20x12  BN Mish
///   D4 deconv C->C   k(4,3) s(2,1) p(1,1) -> 40x12 BN Mish
///   D5 deconv C->K   k5 s1 p2           -> Kx40x12 (bare), attention, sigmoid
/// nodec drops the decoder and widens E5 to 480; relu swaps Mish for ReLU in
/// the encoder and LeakyReLU(0.2) in the decoder; noattn has D5 emit 1 channel.
Architecture architecture(Variant variant, int width, int attention_channels);

struct ParamSpec {
  std::string name;
  Shape shape;
  bool trainable = true;
};

/// Ordered parameter table; this order is also the init traversal order and
/// the checkpoint order.
std::vector<ParamSpec> parameter_layout(const Architecture& arch);

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> value;
  bool trainable = true;
};

template <typename T>
struct ModelParams {
  Variant variant = Variant::eddynet;
  int width = kDefaultWidth;
  int attention_channels = kDefaultAttentionChannels;
  ChannelStats stats;
  std::vector<NamedTensor<T>> tensors;

  Architecture arch() const { return architecture(variant, width, attention_channels); }
  std::size_t index_of(std::string_view name) const;
  Tensor<T>& get(std::string_view name) { return tensors[index_of(name)].value; }
  const Tensor<T>& get(std::string_view name) const { return tensors[index_of(name)].value; }
  std::size_t trainable_count() const;

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.variant = variant;
    out.width = width;
    out.attention_channels = attention_channels;
    out.stats = stats;
    for (const auto& t : tensors) out.tensors.push_back({t.name, t.value.template cast<U>(), t.trainable});
    return out;
  }
};

/// Conv/deconv weights ~ N(0, 0.02^2) and batch-norm gains ~ N(1, 0.02^2),
/// drawn element by element in parameter_layout order; biases 0, running
/// mean 0, running var 1.
template <typename T>
ModelParams<T> init_params(Variant variant, int width, int attention_channels, RngState& s);

template <typename T>
ModelParams<T> zero_params(Variant variant, int width, int attention_channels);

/// Per-block activations retained for the backward pass.
template <typename T>
struct BlockRecord {
  Tensor<T> input;
  Tensor<T> act_input;
  kernels::BatchNormCache<T> bn;
};

template <typename T>
struct Tape {
  std::vector<BlockRecord<T>> blocks;
  Tensor<T> head_input;
  Tensor<T> head_pre_sigmoid;
  Tensor<T> output;
  Tensor<T> latent;
};

/// Forward pass on a standardized batch [B,6,40,40] -> [B,1,40,12].
/// Train mode uses batch statistics and updates the running estimates.
template <typename T>
Tensor<T> model_forward(ModelParams<T>& params, const Tensor<T>& batch, Mode mode,
                        Tape<T>* tape = nullptr);

/// Eval-mode forward; never mutates params.
template <typename T>
Tensor<T> model_predict(const ModelParams<T>& params, const Tensor<T>& batch,
                        Tape<T>* tape = nullptr);

template <typename T>
struct Gradients {
  double loss = 0.0;
  /// Aligned with params.tensors; empty for non-trainable entries.
  std::vector<Tensor<T>> grads;
};

/// Train-mode forward, MAE loss against truth [B,1,40,12], and reverse pass.
template <typename T>
Gradients<T> model_backward(ModelParams<T>& params, const Tensor<T>& batch, const Tensor<T>& truth);

/// Same, with an explicit mode (eval mode treats batch-norm statistics as constants).
template <typename T>
Gradients<T> model_backward(ModelParams<T>& params, const Tensor<T>& batch, const Tensor<T>& truth,
                            Mode mode);

/// Standardized network input and binary target for the given samples.
template <typename T>
void assemble_batch(const Dataset& data, const std::vector<std::size_t>& indices,
                    const ChannelStats& stats, Tensor<T>& input, Tensor<T>& truth);

template <typename T>
Tensor<T> profile_tensor(const CrackProfile& p);

}  // namespace eddynet
