#include "core/mask_ops.hpp"

#include "core/error.hpp"

#include <algorithm>

namespace retouch {

namespace {

void require_same_dims(const Image& image, const BinaryMask& mask) {
    if (image.width() != mask.width() || image.height() != mask.height()) {
        fail(ErrorCode::shape, "mask " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                                   " does not match image " + std::to_string(image.width()) + "x" +
                                   std::to_string(image.height()));
    }
}

} // namespace

Image apply_mask(const Image& image, const BinaryMask& mask) {
    require_same_dims(image, mask);
    const auto src = image.pixels();
    const auto bits = mask.values();
    std::vector<float> out(src.size());
    for (std::size_t p = 0; p < bits.size(); ++p) {
        const float m = bits[p] ? 1.0f : 0.0f;
        for (std::size_t c = 0; c < 3; ++c) {
            out[p * 3 + c] = src[p * 3 + c] * m;
        }
    }
    return Image(image.width(), image.height(), std::move(out));
}

BinaryMask mask_union(std::span<const BinaryMask> masks) {
    if (masks.empty()) {
        fail(ErrorCode::invalid_argument, "mask_union needs at least one mask");
    }
    const auto& first = masks.front();
    std::vector<std::uint8_t> out(first.values().begin(), first.values().end());
    for (const auto& mask : masks.subspan(1)) {
        if (mask.width() != first.width() || mask.height() != first.height()) {
            fail(ErrorCode::shape, "mask_union inputs differ in size");
        }
        const auto bits = mask.values();
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = std::max(out[i], bits[i]);
        }
    }
    return BinaryMask(first.width(), first.height(), std::move(out));
}

Point mask_centroid(const BinaryMask& mask) {
    double sx = 0.0;
    double sy = 0.0;
    std::size_t n = 0;
    for (std::size_t y = 0; y < mask.height(); ++y) {
        for (std::size_t x = 0; x < mask.width(); ++x) {
            if (mask.at(x, y)) {
                sx += static_cast<double>(x);
                sy += static_cast<double>(y);
                ++n;
            }
        }
    }
    if (n == 0) {
        fail(ErrorCode::empty_region, "centroid of an empty mask");
    }
    return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

PixelBox mask_bounding_box(const BinaryMask& mask) {
    PixelBox box{mask.width(), mask.height(), 0, 0};
    for (std::size_t y = 0; y < mask.height(); ++y) {
        for (std::size_t x = 0; x < mask.width(); ++x) {
            if (mask.at(x, y)) {
                box.x0 = std::min(box.x0, x);
                box.y0 = std::min(box.y0, y);
                box.x1 = std::max(box.x1, x + 1);
                box.y1 = std::max(box.y1, y + 1);
            }
        }
    }
    if (box.x1 == 0) {
        fail(ErrorCode::empty_region, "bounding box of an empty mask");
    }
    return box;
}

Image crop(const Image& image, const PixelBox& box) {
    if (box.x1 > image.width() || box.y1 > image.height() || box.x0 >= box.x1 || box.y0 >= box.y1) {
        fail(ErrorCode::shape, "crop box outside image");
    }
    const std::size_t w = box.x1 - box.x0;
    const std::size_t h = box.y1 - box.y0;
    std::vector<float> out;
    out.reserve(w * h * 3);
    const auto src = image.pixels();
    for (std::size_t y = box.y0; y < box.y1; ++y) {
        const auto row = src.subspan((y * image.width() + box.x0) * 3, w * 3);
        out.insert(out.end(), row.begin(), row.end());
    }
    return Image(w, h, std::move(out));
}

} // namespace retouch
