#pragma once

#include "core/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace retouch {

// Format is sniffed from the file's magic bytes: PNG or binary PPM (P6).
// Channel values map v/255 on read; alpha is dropped.
Image read_image(const std::filesystem::path& path);
Image decode_image(std::span<const std::uint8_t> bytes);

// Format follows the extension: .png or .ppm. Values are written as
// round(v*255). The file is replaced atomically.
void write_image(const Image& image, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const Image& image);
std::vector<std::uint8_t> encode_ppm(const Image& image);

// Grayscale masks: PNG or PGM (P5). Any value >= 128 reads as 1.
BinaryMask read_mask(const std::filesystem::path& path);
BinaryMask decode_mask(std::span<const std::uint8_t> bytes);

// .png or .pgm, written as 0/255.
void write_mask(const BinaryMask& mask, const std::filesystem::path& path);

std::uint8_t quantize8(float v);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
// Writes to a sibling temp file, then renames over the destination.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

} // namespace retouch
