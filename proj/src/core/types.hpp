#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace retouch {

// H x W x 3 raster with interleaved RGB rows, every value in [0,1].
class Image {
  public:
    Image() = default;
    // Black image. Throws on zero dimensions.
    Image(std::size_t width, std::size_t height);
    // Validates length = width*height*3 and the [0,1] range.
    Image(std::size_t width, std::size_t height, std::vector<float> pixels);

    // Builds an image from arbitrary finite values by clamping into [0,1].
    static Image clamped(std::size_t width, std::size_t height, std::span<const float> values);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept { return width_ * height_; }
    bool empty() const noexcept { return pixels_.empty(); }

    float at(std::size_t x, std::size_t y, std::size_t c) const { return pixels_[(y * width_ + x) * 3 + c]; }
    std::span<const float> pixels() const noexcept { return pixels_; }

    bool operator==(const Image&) const = default;

  private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<float> pixels_;
};

// Hard 0/1 region, row-major.
class BinaryMask {
  public:
    BinaryMask() = default;
    // All-zero mask. Throws on zero dimensions.
    BinaryMask(std::size_t width, std::size_t height, std::uint8_t fill = 0);
    // Values must be exactly 0 or 1.
    BinaryMask(std::size_t width, std::size_t height, std::vector<std::uint8_t> values);

    // Soft masks are binarized at 0.5.
    static BinaryMask from_soft(std::size_t width, std::size_t height, std::span<const float> values);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::uint8_t at(std::size_t x, std::size_t y) const { return values_[y * width_ + x]; }
    void set(std::size_t x, std::size_t y, bool on) { values_[y * width_ + x] = on ? 1 : 0; }
    std::span<const std::uint8_t> values() const noexcept { return values_; }

    std::size_t count() const noexcept;
    bool any() const noexcept { return count() > 0; }
    BinaryMask inverted() const;

    bool operator==(const BinaryMask&) const = default;

  private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<std::uint8_t> values_;
};

enum class PromptRole { query, conditional };

// Non-empty (after trimming) UTF-8 text.
class TextPrompt {
  public:
    TextPrompt(std::string text, PromptRole role);

    const std::string& text() const noexcept { return text_; }
    PromptRole role() const noexcept { return role_; }

  private:
    std::string text_;
    PromptRole role_;
};

// Dense row-major float32 tensor with finite values.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<float> data);

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::span<const float> data() const noexcept { return data_; }
    std::span<float> data() noexcept { return data_; }

    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
    bool operator==(const Tensor&) const = default;

    static std::size_t element_count(const std::vector<std::size_t>& shape);

  private:
    std::vector<std::size_t> shape_;
    std::vector<float> data_;
};

// Latent grids are (channels, height, width) tensors.
using LatentTensor = Tensor;

std::string shape_string(const std::vector<std::size_t>& shape);

} // namespace retouch
