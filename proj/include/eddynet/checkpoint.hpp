#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eddynet/model.hpp"

namespace eddynet {

/// .eck layout (little-endian): "ECK1", u32 version, u8 variant, u32 C, u32 K,
/// 6 f64 channel means, 6 f64 channel stds, u32 tensor count, then per tensor
/// u16 name length, name bytes, u8 rank, rank u32 extents, f32 payload.
template <typename T>
std::vector<std::uint8_t> serialize_checkpoint(const ModelParams<T>& params);

/// Validates magic, version, and the full shape table before returning.
ModelParams<float> deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

template <typename T>
void save_checkpoint(const ModelParams<T>& params, const std::string& path);

/// When `expected` is set, a checkpoint of another variant is refused with Error{variant}.
ModelParams<float> load_checkpoint(const std::string& path,
                                   std::optional<Variant> expected = std::nullopt);

void require_variant(Variant actual, std::optional<Variant> expected);

}  // namespace eddynet
