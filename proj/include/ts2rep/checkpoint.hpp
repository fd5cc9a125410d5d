#pragma once

// Binary checkpoint format, bit-exact round trip:
//   magic "TS2V" | version u32 | param count u32 |
//   per parameter: name-length u16, UTF-8 name, ndims u8,
//                  dims u32 little-endian, raw f32 little-endian payload.

#include <cstdint>
#include <string>
#include <vector>

#include "ts2rep/encoder.hpp"

namespace ts2rep::checkpoint {

inline constexpr uint32_t kVersion = 1;

std::vector<uint8_t> to_bytes(const encoder::EncoderParams<float>& params);
encoder::EncoderParams<float> from_bytes(const std::vector<uint8_t>& bytes);

void save(const encoder::EncoderParams<float>& params, const std::string& path);
encoder::EncoderParams<float> load(const std::string& path);

}  // namespace ts2rep::checkpoint
