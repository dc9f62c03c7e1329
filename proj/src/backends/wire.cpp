#include "backends/wire.hpp"

#include "core/digest.hpp"
#include "core/error.hpp"

#include <cstring>

namespace retouch::wire {

namespace {

std::vector<std::size_t> parse_shape(const json& node) {
    if (!node.is_array()) {
        fail(ErrorCode::framing, "tensor shape must be an array");
    }
    std::vector<std::size_t> shape;
    for (const auto& extent : node) {
        if (!extent.is_number_unsigned()) {
            fail(ErrorCode::framing, "tensor extents must be non-negative integers");
        }
        shape.push_back(extent.get<std::size_t>());
    }
    return shape;
}

std::vector<std::uint8_t> tensor_bytes(const json& node, const char* dtype, std::size_t width,
                                       std::vector<std::size_t>& shape) {
    if (!node.is_object() || !node.contains("dtype") || !node.contains("shape") || !node.contains("data")) {
        fail(ErrorCode::framing, "tensor needs dtype, shape and data");
    }
    if (node.at("dtype") != dtype) {
        fail(ErrorCode::framing, std::string("expected a ") + dtype + " tensor");
    }
    shape = parse_shape(node.at("shape"));
    if (!node.at("data").is_string()) {
        fail(ErrorCode::framing, "tensor data must be a base64 string");
    }
    std::vector<std::uint8_t> bytes;
    try {
        bytes = base64_decode(node.at("data").get_ref<const std::string&>());
    } catch (const Error& e) {
        fail(ErrorCode::framing, e.what());
    }
    if (bytes.size() != Tensor::element_count(shape) * width) {
        fail(ErrorCode::framing, "tensor payload size does not match shape " + shape_string(shape));
    }
    return bytes;
}

std::vector<float> floats_from_le(const std::vector<std::uint8_t>& bytes) {
    std::vector<float> out(bytes.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint32_t bits = load_u32le(bytes.data() + 4 * i);
        std::memcpy(&out[i], &bits, sizeof(float));
    }
    return out;
}

json f32_node(std::vector<std::size_t> shape, std::span<const float> values) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(values.size() * 4);
    for (float v : values) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, &v, sizeof(bits));
        append_u32le(bytes, bits);
    }
    return {{"dtype", "f32"}, {"shape", std::move(shape)}, {"data", base64_encode(bytes)}};
}

} // namespace

std::string dump(const json& message) {
    return message.dump(-1, ' ', false, json::error_handler_t::strict);
}

std::vector<std::uint8_t> frame(const json& message) {
    const std::string payload = dump(message);
    if (payload.size() > kMaxFrameBytes) {
        fail(ErrorCode::framing, "message exceeds the maximum frame size");
    }
    const auto n = static_cast<std::uint32_t>(payload.size());
    std::vector<std::uint8_t> out;
    out.reserve(4 + payload.size());
    out.push_back(static_cast<std::uint8_t>(n >> 24));
    out.push_back(static_cast<std::uint8_t>(n >> 16));
    out.push_back(static_cast<std::uint8_t>(n >> 8));
    out.push_back(static_cast<std::uint8_t>(n));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

std::uint32_t parse_length(std::span<const std::uint8_t, 4> prefix) {
    const std::uint32_t n = (static_cast<std::uint32_t>(prefix[0]) << 24) |
                            (static_cast<std::uint32_t>(prefix[1]) << 16) |
                            (static_cast<std::uint32_t>(prefix[2]) << 8) | static_cast<std::uint32_t>(prefix[3]);
    if (n == 0 || n > kMaxFrameBytes) {
        fail(ErrorCode::framing, "malformed frame length " + std::to_string(n));
    }
    return n;
}

json parse_payload(std::span<const std::uint8_t> payload) {
    json message = json::parse(payload.begin(), payload.end(), nullptr, false);
    if (message.is_discarded() || !message.is_object()) {
        fail(ErrorCode::framing, "frame payload is not a JSON object");
    }
    return message;
}

json encode_tensor(const Tensor& tensor) { return f32_node(tensor.shape(), tensor.data()); }

Tensor decode_tensor(const json& node) {
    std::vector<std::size_t> shape;
    auto bytes = tensor_bytes(node, "f32", 4, shape);
    try {
        return Tensor(std::move(shape), floats_from_le(bytes));
    } catch (const Error& e) {
        fail(ErrorCode::framing, e.what());
    }
}

json encode_image(const Image& image) {
    return f32_node({image.height(), image.width(), 3}, image.pixels());
}

Image decode_image(const json& node) {
    std::vector<std::size_t> shape;
    auto bytes = tensor_bytes(node, "f32", 4, shape);
    if (shape.size() != 3 || shape[2] != 3 || shape[0] == 0 || shape[1] == 0) {
        fail(ErrorCode::framing, "image tensor must have shape [H,W,3], got " + shape_string(shape));
    }
    return Image::clamped(shape[1], shape[0], floats_from_le(bytes));
}

json encode_mask(const BinaryMask& mask) {
    return {{"dtype", "u8"},
            {"shape", {mask.height(), mask.width()}},
            {"data", base64_encode(mask.values())}};
}

BinaryMask decode_mask(const json& node) {
    std::vector<std::size_t> shape;
    std::vector<float> soft;
    if (node.is_object() && node.value("dtype", "") == "f32") {
        auto bytes = tensor_bytes(node, "f32", 4, shape);
        soft = floats_from_le(bytes);
    } else {
        auto bytes = tensor_bytes(node, "u8", 1, shape);
        soft.assign(bytes.begin(), bytes.end());
    }
    if (shape.size() != 2 || shape[0] == 0 || shape[1] == 0) {
        fail(ErrorCode::framing, "mask tensor must have shape [H,W], got " + shape_string(shape));
    }
    return BinaryMask::from_soft(shape[1], shape[0], soft);
}

json request(std::uint64_t id, const std::string& op, json args) {
    return {{"id", id}, {"op", op}, {"args", std::move(args)}};
}

json ok_response(std::uint64_t id, json result) {
    return {{"id", id}, {"ok", true}, {"result", std::move(result)}};
}

json error_response(const json& id, const std::string& type, const std::string& message) {
    return {{"id", id}, {"ok", false}, {"error", {{"type", type}, {"message", message}}}};
}

} // namespace retouch::wire
