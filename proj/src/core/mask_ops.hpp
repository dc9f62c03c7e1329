#pragma once

#include "core/types.hpp"

#include <span>

namespace retouch {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

// Elementwise I * M, broadcast over channels.
Image apply_mask(const Image& image, const BinaryMask& mask);

// Pixelwise max over a non-empty list of equally sized masks.
BinaryMask mask_union(std::span<const BinaryMask> masks);

// Mean of set-pixel coordinates, pixel centres at integer coordinates.
// Throws empty_region when no pixel is set.
Point mask_centroid(const BinaryMask& mask);

struct PixelBox {
    std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0; // half-open
};

PixelBox mask_bounding_box(const BinaryMask& mask);

Image crop(const Image& image, const PixelBox& box);

} // namespace retouch
