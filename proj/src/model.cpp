#include "eddynet/model.hpp"

#include <algorithm>

namespace eddynet {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::eddynet: return "eddynet";
    case Variant::nodec: return "nodec";
    case Variant::relu: return "relu";
    case Variant::noattn: return "noattn";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (variant_name(v) == name) return v;
  }
  throw Error(ErrorCategory::variant, "unknown variant '" + std::string(name) + "'");
}

Architecture architecture(Variant variant, int width, int attention_channels) {
  if (width < 1 || attention_channels < 1) {
    throw Error(ErrorCategory::invalid_argument, "width and K must be >= 1");
  }
  Architecture a;
  a.variant = variant;
  a.width = width;
  a.attention_channels = attention_channels;

  const Activation enc_act = variant == Variant::relu ? Activation::relu : Activation::mish;
  const Activation dec_act = variant == Variant::relu ? Activation::leaky_relu : Activation::mish;
  const int c = width;
  auto conv = [&](std::string name, int in, int out, ConvGeometry g, bool bn, Activation act) {
    a.layers.push_back({std::move(name), LayerKind::conv, in, out, g, bn, act});
  };
  auto deconv = [&](std::string name, int in, int out, ConvGeometry g, bool bn, Activation act) {
    a.layers.push_back({std::move(name), LayerKind::deconv, in, out, g, bn, act});
  };

  conv("enc1", kInputChannels, c, {6, 6, 2, 2, 2, 2}, true, enc_act);
  conv("enc2", c, c, {5, 5, 2, 2, 2, 2}, true, enc_act);
  conv("enc3", c, c, {4, 4, 2, 2, 1, 1}, true, enc_act);
  conv("enc4", c, c, {4, 4, 2, 2, 1, 1}, true, enc_act);
  if (variant == Variant::nodec) {
    conv("enc5", c, kProfileCells, {4, 4, 1, 1, 1, 1}, false, Activation::none);
    a.head = Head::sigmoid_reshape;
    return a;
  }
  conv("enc5", c, kLatentDim, {4, 4, 1, 1, 1, 1}, false, Activation::none);

  deconv("dec1", kLatentDim, c, {5, 3, 1, 1, 0, 0}, true, dec_act);
  deconv("dec2", c, c, {4, 4, 2, 2, 1, 1}, true, dec_act);
  deconv("dec3", c, c, {4, 4, 2, 2, 1, 1}, true, dec_act);
  deconv("dec4", c, c, {4, 3, 2, 1, 1, 1}, true, dec_act);
  if (variant == Variant::noattn) {
    deconv("dec5", c, 1, {5, 5, 1, 1, 2, 2}, false, Activation::none);
    a.head = Head::sigmoid;
  } else {
    deconv("dec5", c, attention_channels, {5, 5, 1, 1, 2, 2}, false, Activation::none);
    a.head = Head::attention_sigmoid;
  }
  return a;
}

std::vector<ParamSpec> parameter_layout(const Architecture& arch) {
  std::vector<ParamSpec> out;
  for (const LayerSpec& l : arch.layers) {
    const auto& g = l.geom;
    if (l.kind == LayerKind::conv) {
      out.push_back({l.name + ".weight", {l.out_ch, l.in_ch, g.kh, g.kw}, true});
    } else {
      out.push_back({l.name + ".weight", {l.in_ch, l.out_ch, g.kh, g.kw}, true});
    }
    if (l.has_bias()) out.push_back({l.name + ".bias", {l.out_ch}, true});
    if (l.batchnorm) {
      out.push_back({l.name + ".bn.gain", {l.out_ch}, true});
      out.push_back({l.name + ".bn.bias", {l.out_ch}, true});
      out.push_back({l.name + ".bn.running_mean", {l.out_ch}, false});
      out.push_back({l.name + ".bn.running_var", {l.out_ch}, false});
    }
  }
  return out;
}

template <typename T>
std::size_t ModelParams<T>::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name == name) return i;
  }
  throw Error(ErrorCategory::shape, "no parameter named '" + std::string(name) + "'");
}

template <typename T>
std::size_t ModelParams<T>::trainable_count() const {
  return static_cast<std::size_t>(
      std::count_if(tensors.begin(), tensors.end(), [](const auto& t) { return t.trainable; }));
}

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

template <typename T>
ModelParams<T> layout_params(Variant variant, int width, int attention_channels) {
  ModelParams<T> p;
  p.variant = variant;
  p.width = width;
  p.attention_channels = attention_channels;
  for (int c = 0; c < kInputChannels; ++c) {
    p.stats.mean[c] = 0.0;
    p.stats.std[c] = 1.0;
  }
  for (const ParamSpec& s : parameter_layout(architecture(variant, width, attention_channels))) {
    p.tensors.push_back({s.name, Tensor<T>(s.shape), s.trainable});
  }
  return p;
}

}  // namespace

template <typename T>
ModelParams<T> init_params(Variant variant, int width, int attention_channels, RngState& s) {
  ModelParams<T> p = layout_params<T>(variant, width, attention_channels);
  for (auto& t : p.tensors) {
    if (ends_with(t.name, ".weight")) {
      for (T& v : t.value.data) v = static_cast<T>(kInitStd * next_gaussian(s));
    } else if (ends_with(t.name, ".bn.gain")) {
      for (T& v : t.value.data) v = static_cast<T>(1.0 + kInitStd * next_gaussian(s));
    } else if (ends_with(t.name, ".bn.running_var")) {
      t.value.fill(T(1));
    }
  }
  return p;
}

template <typename T>
ModelParams<T> zero_params(Variant variant, int width, int attention_channels) {
  ModelParams<T> p = layout_params<T>(variant, width, attention_channels);
  for (auto& t : p.tensors) {
    if (ends_with(t.name, ".bn.running_var")) t.value.fill(T(1));
  }
  return p;
}

namespace {

struct BlockSlots {
  std::size_t weight = 0;
  std::optional<std::size_t> bias;
  std::size_t gain = 0, beta = 0, mean = 0, var = 0;
};

template <typename T>
std::vector<BlockSlots> block_slots(const ModelParams<T>& p, const Architecture& arch) {
  std::vector<BlockSlots> out;
  for (const LayerSpec& l : arch.layers) {
    BlockSlots s;
    s.weight = p.index_of(l.name + ".weight");
    if (l.has_bias()) s.bias = p.index_of(l.name + ".bias");
    if (l.batchnorm) {
      s.gain = p.index_of(l.name + ".bn.gain");
      s.beta = p.index_of(l.name + ".bn.bias");
      s.mean = p.index_of(l.name + ".bn.running_mean");
      s.var = p.index_of(l.name + ".bn.running_var");
    }
    out.push_back(s);
  }
  return out;
}

template <typename T>
void check_input(const ModelParams<T>& p, const Tensor<T>& batch) {
  require_shape(batch.rank() == 4 && batch.dim(1) == kInputChannels && batch.dim(2) == kScanRows &&
                    batch.dim(3) == kScanCols && batch.dim(0) >= 1,
                "model input must be [B,6,40,40], got " + shape_string(batch.shape));
  const auto layout = parameter_layout(p.arch());
  require_shape(layout.size() == p.tensors.size(), "parameter count does not match the variant table");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    require_shape(layout[i].name == p.tensors[i].name && layout[i].shape == p.tensors[i].value.shape,
                  "parameter " + p.tensors[i].name + " does not match the variant table");
  }
}

// Shared forward path. `mutable_params` is only touched in train mode.
template <typename T>
Tensor<T> forward_impl(const ModelParams<T>& params, ModelParams<T>* mutable_params,
                       const Tensor<T>& batch, Mode mode, Tape<T>* tape) {
  check_input(params, batch);
  const Architecture arch = params.arch();
  const auto slots = block_slots(params, arch);
  if (tape) {
    tape->blocks.assign(arch.layers.size(), {});
  }

  Tensor<T> x = batch;
  static const Tensor<T> no_bias;
  for (std::size_t li = 0; li < arch.layers.size(); ++li) {
    const LayerSpec& l = arch.layers[li];
    const BlockSlots& s = slots[li];
    const Tensor<T>& w = params.tensors[s.weight].value;
    const Tensor<T>& b = s.bias ? params.tensors[*s.bias].value : no_bias;
    Tensor<T> z = l.kind == LayerKind::conv ? kernels::conv2d_forward(x, w, b, l.geom)
                                            : kernels::deconv2d_forward(x, w, b, l.geom);
    BlockRecord<T>* rec = tape ? &tape->blocks[li] : nullptr;
    if (rec) rec->input = std::move(x);
    if (l.batchnorm) {
      const Tensor<T>& gain = params.tensors[s.gain].value;
      const Tensor<T>& beta = params.tensors[s.beta].value;
      kernels::BatchNormCache<T>* cache = rec ? &rec->bn : nullptr;
      if (mode == Mode::train) {
        z = kernels::batchnorm_forward_train(z, gain, beta, mutable_params->tensors[s.mean].value,
                                             mutable_params->tensors[s.var].value, cache);
      } else {
        z = kernels::batchnorm_forward_eval(z, gain, beta, params.tensors[s.mean].value,
                                            params.tensors[s.var].value, cache);
      }
    }
    if (l.activation != Activation::none) {
      Tensor<T> a = kernels::activation_forward(z, l.activation);
      if (rec) rec->act_input = std::move(z);
      x = std::move(a);
    } else {
      x = std::move(z);
    }
    if (tape && l.name == "enc5") tape->latent = x;
  }

  const int batch_size = batch.dim(0);
  Tensor<T> pre;
  switch (arch.head) {
    case Head::attention_sigmoid:
      pre = kernels::attention_forward(x);
      break;
    case Head::sigmoid:
      pre = x;
      break;
    case Head::sigmoid_reshape:
      pre = x;
      pre.shape = {batch_size, 1, kProfileRows, kProfileCols};
      break;
  }
  Tensor<T> out = kernels::activation_forward(pre, Activation::sigmoid);
  if (tape) {
    tape->head_input = std::move(x);
    tape->head_pre_sigmoid = std::move(pre);
    tape->output = out;
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> model_forward(ModelParams<T>& params, const Tensor<T>& batch, Mode mode, Tape<T>* tape) {
  return forward_impl(params, &params, batch, mode, tape);
}

template <typename T>
Tensor<T> model_predict(const ModelParams<T>& params, const Tensor<T>& batch, Tape<T>* tape) {
  return forward_impl<T>(params, nullptr, batch, Mode::eval, tape);
}

template <typename T>
Gradients<T> model_backward(ModelParams<T>& params, const Tensor<T>& batch, const Tensor<T>& truth,
                            Mode mode) {
  Tape<T> tape;
  const Tensor<T> out = model_forward(params, batch, mode, &tape);
  Gradients<T> result;
  Tensor<T> dout;
  result.loss = kernels::mae_loss(out, truth, &dout);
  result.grads.resize(params.tensors.size());

  // Sigmoid head: d pre = d out * s (1 - s).
  Tensor<T> dpre(out.shape);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T s = out.data[i];
    dpre.data[i] = dout.data[i] * s * (T(1) - s);
  }

  const Architecture arch = params.arch();
  Tensor<T> dy;
  switch (arch.head) {
    case Head::attention_sigmoid:
      dy = kernels::attention_backward(tape.head_input, dpre);
      break;
    case Head::sigmoid:
      dy = std::move(dpre);
      break;
    case Head::sigmoid_reshape:
      dy = std::move(dpre);
      dy.shape = tape.head_input.shape;
      break;
  }

  const auto slots = block_slots(params, arch);
  for (std::size_t li = arch.layers.size(); li-- > 0;) {
    const LayerSpec& l = arch.layers[li];
    const BlockSlots& s = slots[li];
    BlockRecord<T>& rec = tape.blocks[li];
    if (l.activation != Activation::none) {
      dy = kernels::activation_backward(rec.act_input, dy, l.activation);
    }
    if (l.batchnorm) {
      Tensor<T> dz;
      kernels::batchnorm_backward(dy, params.tensors[s.gain].value, rec.bn, dz,
                                  result.grads[s.gain], result.grads[s.beta]);
      dy = std::move(dz);
    }
    Tensor<T> dx;
    Tensor<T>* dx_ptr = li > 0 ? &dx : nullptr;
    Tensor<T>* db_ptr = s.bias ? &result.grads[*s.bias] : nullptr;
    const Tensor<T>& w = params.tensors[s.weight].value;
    if (l.kind == LayerKind::conv) {
      kernels::conv2d_backward(rec.input, w, dy, l.geom, dx_ptr, result.grads[s.weight], db_ptr);
    } else {
      kernels::deconv2d_backward(rec.input, w, dy, l.geom, dx_ptr, result.grads[s.weight], db_ptr);
    }
    dy = std::move(dx);
  }
  return result;
}

template <typename T>
Gradients<T> model_backward(ModelParams<T>& params, const Tensor<T>& batch, const Tensor<T>& truth) {
  return model_backward(params, batch, truth, Mode::train);
}

template <typename T>
Tensor<T> profile_tensor(const CrackProfile& p) {
  Tensor<T> t({1, 1, kProfileRows, kProfileCols});
  for (int idx = 0; idx < kProfileCells; ++idx) t.data[idx] = static_cast<T>(p.cells()[idx]);
  return t;
}

template <typename T>
void assemble_batch(const Dataset& data, const std::vector<std::size_t>& indices,
                    const ChannelStats& stats, Tensor<T>& input, Tensor<T>& truth) {
  for (std::size_t idx : indices) {
    if (idx >= data.size()) {
      throw Error(ErrorCategory::invalid_argument, "sample index " + std::to_string(idx) +
                                                       " out of range for " +
                                                       std::to_string(data.size()) + " samples");
    }
  }
  const int b = static_cast<int>(indices.size());
  input = Tensor<T>({b, kInputChannels, kScanRows, kScanCols});
  truth = Tensor<T>({b, 1, kProfileRows, kProfileCols});
  for (int i = 0; i < b; ++i) {
    const Sample& s = data.samples[indices[static_cast<std::size_t>(i)]];
    standardize(s.channels, stats, input.data.data() + static_cast<std::size_t>(i) * kChannelValues);
    for (int idx = 0; idx < kProfileCells; ++idx) {
      truth.data[static_cast<std::size_t>(i) * kProfileCells + idx] = static_cast<T>(s.profile.cells()[idx]);
    }
  }
}

#define EDDYNET_INSTANTIATE_MODEL(T)                                                              \
  template struct ModelParams<T>;                                                                 \
  template ModelParams<T> init_params<T>(Variant, int, int, RngState&);                           \
  template ModelParams<T> zero_params<T>(Variant, int, int);                                      \
  template Tensor<T> model_forward(ModelParams<T>&, const Tensor<T>&, Mode, Tape<T>*);            \
  template Tensor<T> model_predict(const ModelParams<T>&, const Tensor<T>&, Tape<T>*);            \
  template Gradients<T> model_backward(ModelParams<T>&, const Tensor<T>&, const Tensor<T>&);      \
  template Gradients<T> model_backward(ModelParams<T>&, const Tensor<T>&, const Tensor<T>&, Mode); \
  template Tensor<T> profile_tensor<T>(const CrackProfile&);                                      \
  template void assemble_batch<T>(const Dataset&, const std::vector<std::size_t>&,                \
                                  const ChannelStats&, Tensor<T>&, Tensor<T>&);

EDDYNET_INSTANTIATE_MODEL(float)
EDDYNET_INSTANTIATE_MODEL(double)

#undef EDDYNET_INSTANTIATE_MODEL

}  // namespace eddynet
