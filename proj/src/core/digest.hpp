#pragma once

#include "core/types.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace retouch {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::span<const std::uint8_t> bytes);
Sha256 sha256(std::string_view text);
std::string to_hex(std::span<const std::uint8_t> bytes);

// SHA-256 over (width u32le, height u32le, 8-bit quantized RGB bytes).
// Fixture tables key images by this digest.
std::string image_content_hash(const Image& image);

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws format on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Little-endian byte helpers, independent of host order.
void append_u32le(std::vector<std::uint8_t>& out, std::uint32_t v);
void append_u64le(std::vector<std::uint8_t>& out, std::uint64_t v);
std::uint32_t load_u32le(const std::uint8_t* p);

} // namespace retouch
