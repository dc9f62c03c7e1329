#pragma once

#include "core/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

// Framed JSON messages: a 4-byte big-endian payload length followed by the
// UTF-8 JSON payload. Tensors travel as
//   {"dtype": "f32"|"u8", "shape": [...], "data": base64(little-endian)}.
namespace retouch::wire {

using nlohmann::json;

inline constexpr std::uint32_t kMaxFrameBytes = 256u << 20;
inline constexpr int kProtocolVersion = 1;

// Compact, key-sorted serialization; the byte form every peer must agree on.
std::string dump(const json& message);

std::vector<std::uint8_t> frame(const json& message);
// Validates a length prefix: non-zero and at most kMaxFrameBytes.
std::uint32_t parse_length(std::span<const std::uint8_t, 4> prefix);
// Parses a payload; framing error if it is not a JSON object.
json parse_payload(std::span<const std::uint8_t> payload);

json encode_tensor(const Tensor& tensor);
Tensor decode_tensor(const json& node);

// Images travel as f32 [H, W, 3].
json encode_image(const Image& image);
// Clamps into [0,1].
Image decode_image(const json& node);

// Masks travel as u8 [H, W] with values 0/1; f32 masks are binarized at 0.5.
json encode_mask(const BinaryMask& mask);
BinaryMask decode_mask(const json& node);

json request(std::uint64_t id, const std::string& op, json args);
json ok_response(std::uint64_t id, json result);
json error_response(const json& id, const std::string& type, const std::string& message);

} // namespace retouch::wire
