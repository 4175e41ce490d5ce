#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "prefalign/toyworld.hpp"

namespace prefalign {

/// 8-bit RGB PNG.
std::vector<std::uint8_t> encode_png(const Image& img);
/// 8-bit grayscale PNG, 255 where the mask is set.
std::vector<std::uint8_t> encode_png(const Mask& mask);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace prefalign
