#include "core/types.hpp"

#include "core/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace retouch {

namespace {

void check_dims(std::size_t width, std::size_t height, const char* what) {
    if (width == 0 || height == 0) {
        fail(ErrorCode::shape, std::string(what) + " dimensions must be non-zero");
    }
}

} // namespace

Image::Image(std::size_t width, std::size_t height) : width_(width), height_(height) {
    check_dims(width, height, "image");
    pixels_.assign(width * height * 3, 0.0f);
}

Image::Image(std::size_t width, std::size_t height, std::vector<float> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    check_dims(width, height, "image");
    if (pixels_.size() != width * height * 3) {
        fail(ErrorCode::shape, "image data length " + std::to_string(pixels_.size()) + " != " +
                                   std::to_string(width) + "x" + std::to_string(height) + "x3");
    }
    for (float v : pixels_) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            fail(ErrorCode::invalid_argument, "image value outside [0,1]");
        }
    }
}

Image Image::clamped(std::size_t width, std::size_t height, std::span<const float> values) {
    std::vector<float> pixels(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            fail(ErrorCode::invalid_argument, "non-finite value in image data");
        }
        pixels[i] = std::clamp(values[i], 0.0f, 1.0f);
    }
    return Image(width, height, std::move(pixels));
}

BinaryMask::BinaryMask(std::size_t width, std::size_t height, std::uint8_t fill) : width_(width), height_(height) {
    check_dims(width, height, "mask");
    if (fill > 1) {
        fail(ErrorCode::invalid_argument, "mask fill must be 0 or 1");
    }
    values_.assign(width * height, fill);
}

BinaryMask::BinaryMask(std::size_t width, std::size_t height, std::vector<std::uint8_t> values)
    : width_(width), height_(height), values_(std::move(values)) {
    check_dims(width, height, "mask");
    if (values_.size() != width * height) {
        fail(ErrorCode::shape, "mask data length " + std::to_string(values_.size()) + " != " +
                                   std::to_string(width) + "x" + std::to_string(height));
    }
    if (std::any_of(values_.begin(), values_.end(), [](std::uint8_t v) { return v > 1; })) {
        fail(ErrorCode::invalid_argument, "mask values must be exactly 0 or 1");
    }
}

BinaryMask BinaryMask::from_soft(std::size_t width, std::size_t height, std::span<const float> values) {
    std::vector<std::uint8_t> bits(values.size());
    std::transform(values.begin(), values.end(), bits.begin(),
                   [](float v) { return static_cast<std::uint8_t>(v >= 0.5f ? 1 : 0); });
    return BinaryMask(width, height, std::move(bits));
}

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

BinaryMask BinaryMask::inverted() const {
    std::vector<std::uint8_t> flipped(values_.size());
    std::transform(values_.begin(), values_.end(), flipped.begin(),
                   [](std::uint8_t v) { return static_cast<std::uint8_t>(1 - v); });
    return BinaryMask(width_, height_, std::move(flipped));
}

TextPrompt::TextPrompt(std::string text, PromptRole role) : text_(std::move(text)), role_(role) {
    const bool blank = std::all_of(text_.begin(), text_.end(),
                                   [](unsigned char c) { return std::isspace(c) != 0; });
    if (blank) {
        fail(ErrorCode::invalid_argument, role_ == PromptRole::query ? "query text is empty"
                                                                     : "conditional text is empty");
    }
}

std::size_t Tensor::element_count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t extent : shape) {
        n *= extent;
    }
    return n;
}

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    data_.assign(element_count(shape_), 0.0f);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != element_count(shape_)) {
        fail(ErrorCode::shape, "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                                   shape_string(shape_));
    }
    for (float v : data_) {
        if (!std::isfinite(v)) {
            fail(ErrorCode::invalid_argument, "tensor contains a non-finite value");
        }
    }
}

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        out << (i ? "," : "") << shape[i];
    }
    out << ']';
    return out.str();
}

} // namespace retouch
