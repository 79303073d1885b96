#include "eddynet/checkpoint.hpp"

#include <cstring>

#include "eddynet/binary_io.hpp"

namespace eddynet {

namespace {

constexpr char kMagic[4] = {'E', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

template <typename T>
std::vector<std::uint8_t> serialize_checkpoint(const ModelParams<T>& params) {
  io::ByteWriter w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(params.variant));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.attention_channels));
  for (double v : params.stats.mean) w.put<double>(v);
  for (double v : params.stats.std) w.put<double>(v);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& t : params.tensors) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    w.put_bytes(t.name.data(), t.name.size());
    w.put<std::uint8_t>(static_cast<std::uint8_t>(t.value.rank()));
    for (int e : t.value.shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(e));
    for (T v : t.value.data) w.put<float>(static_cast<float>(v));
  }
  return w.bytes();
}

template std::vector<std::uint8_t> serialize_checkpoint(const ModelParams<float>&);
template std::vector<std::uint8_t> serialize_checkpoint(const ModelParams<double>&);

ModelParams<float> deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw Error(ErrorCategory::truncated, "truncated payload: missing header");
  io::ByteReader r(bytes);
  char magic[4];
  r.get_bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorCategory::bad_magic, "bad magic: not an ECK1 checkpoint");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw Error(ErrorCategory::version, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto code = r.get<std::uint8_t>();
  if (code > static_cast<std::uint8_t>(Variant::noattn)) {
    throw Error(ErrorCategory::variant, "unknown variant code " + std::to_string(code));
  }
  ModelParams<float> p;
  p.variant = static_cast<Variant>(code);
  p.width = static_cast<int>(r.get<std::uint32_t>());
  p.attention_channels = static_cast<int>(r.get<std::uint32_t>());
  for (double& v : p.stats.mean) v = r.get<double>();
  for (double& v : p.stats.std) v = r.get<double>();

  const auto layout = parameter_layout(architecture(p.variant, p.width, p.attention_channels));
  const auto count = r.get<std::uint32_t>();
  if (count != layout.size()) {
    throw Error(ErrorCategory::shape, "shape table mismatch: checkpoint lists " + std::to_string(count) +
                                          " tensors, variant table has " + std::to_string(layout.size()));
  }
  for (const ParamSpec& spec : layout) {
    const auto name_len = r.get<std::uint16_t>();
    std::string name(name_len, '\0');
    r.get_bytes(name.data(), name_len);
    const auto rank = r.get<std::uint8_t>();
    Shape shape(rank);
    for (int& e : shape) e = static_cast<int>(r.get<std::uint32_t>());
    if (name != spec.name || shape != spec.shape) {
      throw Error(ErrorCategory::shape, "shape table mismatch at " + name + shape_string(shape) +
                                            ", expected " + spec.name + shape_string(spec.shape));
    }
    Tensor<float> t(shape);
    r.get_bytes(t.data.data(), t.size() * sizeof(float));
    p.tensors.push_back({name, std::move(t), spec.trainable});
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCategory::shape, "shape table mismatch: trailing bytes after last tensor");
  }
  return p;
}

template <typename T>
void save_checkpoint(const ModelParams<T>& params, const std::string& path) {
  io::write_file(path, serialize_checkpoint(params));
}

template void save_checkpoint(const ModelParams<float>&, const std::string&);
template void save_checkpoint(const ModelParams<double>&, const std::string&);

void require_variant(Variant actual, std::optional<Variant> expected) {
  if (expected && *expected != actual) {
    throw Error(ErrorCategory::variant, "checkpoint holds variant '" + std::string(variant_name(actual)) +
                                            "', requested '" + std::string(variant_name(*expected)) + "'");
  }
}

ModelParams<float> load_checkpoint(const std::string& path, std::optional<Variant> expected) {
  ModelParams<float> p = deserialize_checkpoint(io::read_file(path));
  require_variant(p.variant, expected);
  return p;
}

}  // namespace eddynet
