#include "core/image_io.hpp"

#include "core/error.hpp"

#include <png.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace retouch {

namespace {

constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

bool is_png(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 8 && std::equal(std::begin(kPngMagic), std::end(kPngMagic), bytes.begin());
}

struct Raster {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> samples;
};

// format: PNG_FORMAT_RGBA or PNG_FORMAT_GRAY
Raster decode_png(std::span<const std::uint8_t> bytes, png_uint_32 format) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        fail(ErrorCode::format, std::string("png: ") + image.message);
    }
    image.format = format;
    Raster out;
    out.width = image.width;
    out.height = image.height;
    if (out.width == 0 || out.height == 0) {
        png_image_free(&image);
        fail(ErrorCode::format, "png: zero dimensions");
    }
    out.samples.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, out.samples.data(), 0, nullptr)) {
        std::string message = image.message;
        png_image_free(&image);
        fail(ErrorCode::format, "png: " + message);
    }
    return out;
}

std::vector<std::uint8_t> encode_png_raw(std::size_t width, std::size_t height, png_uint_32 format,
                                         const std::vector<std::uint8_t>& samples) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(image, size, 0, samples.data(), 0, nullptr)) {
        fail(ErrorCode::format, std::string("png encode: ") + image.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, samples.data(), 0, nullptr)) {
        fail(ErrorCode::format, std::string("png encode: ") + image.message);
    }
    out.resize(size);
    return out;
}

// Parses a binary netpbm header ("P6"/"P5"); returns the data offset.
std::size_t parse_pnm_header(std::span<const std::uint8_t> bytes, char kind, std::size_t& width,
                             std::size_t& height) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != static_cast<std::uint8_t>(kind)) {
        fail(ErrorCode::format, std::string("not a P") + kind + " file");
    }
    std::size_t pos = 2;
    auto next_number = [&]() -> std::size_t {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') {
                    ++pos;
                }
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
            fail(ErrorCode::format, "malformed netpbm header");
        }
        std::size_t value = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
            if (value > (1u << 24)) {
                fail(ErrorCode::format, "netpbm dimension too large");
            }
            ++pos;
        }
        return value;
    };
    width = next_number();
    height = next_number();
    const std::size_t maxval = next_number();
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
        fail(ErrorCode::format, "malformed netpbm header");
    }
    ++pos;
    if (width == 0 || height == 0) {
        fail(ErrorCode::format, "netpbm: zero dimensions");
    }
    if (maxval != 255) {
        fail(ErrorCode::format, "netpbm: only maxval 255 is supported");
    }
    return pos;
}

std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

} // namespace

std::uint8_t quantize8(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

Image decode_image(std::span<const std::uint8_t> bytes) {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<float> pixels;
    if (is_png(bytes)) {
        Raster raster = decode_png(bytes, PNG_FORMAT_RGBA);
        width = raster.width;
        height = raster.height;
        pixels.resize(width * height * 3);
        for (std::size_t p = 0; p < width * height; ++p) {
            for (std::size_t c = 0; c < 3; ++c) {
                pixels[p * 3 + c] = static_cast<float>(raster.samples[p * 4 + c]) / 255.0f;
            }
        }
    } else if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
        const std::size_t offset = parse_pnm_header(bytes, '6', width, height);
        const std::size_t needed = width * height * 3;
        if (bytes.size() - offset < needed) {
            fail(ErrorCode::format, "ppm: truncated pixel data");
        }
        pixels.resize(needed);
        for (std::size_t i = 0; i < needed; ++i) {
            pixels[i] = static_cast<float>(bytes[offset + i]) / 255.0f;
        }
    } else {
        fail(ErrorCode::format, "unsupported image format (expected PNG or binary PPM)");
    }
    return Image(width, height, std::move(pixels));
}

Image read_image(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return decode_image(bytes);
    } catch (const Error& e) {
        fail(e.code(), path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const Image& image) {
    std::vector<std::uint8_t> samples(image.pixels().size());
    std::transform(image.pixels().begin(), image.pixels().end(), samples.begin(), quantize8);
    return encode_png_raw(image.width(), image.height(), PNG_FORMAT_RGB, samples);
}

std::vector<std::uint8_t> encode_ppm(const Image& image) {
    const std::string header =
        "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + image.pixels().size());
    std::transform(image.pixels().begin(), image.pixels().end(), std::back_inserter(out), quantize8);
    return out;
}

void write_image(const Image& image, const std::filesystem::path& path) {
    const std::string ext = lower_extension(path);
    if (ext == ".png") {
        write_file_atomic(path, encode_png(image));
    } else if (ext == ".ppm") {
        write_file_atomic(path, encode_ppm(image));
    } else {
        fail(ErrorCode::format, "unsupported image extension '" + ext + "' (use .png or .ppm)");
    }
}

BinaryMask decode_mask(std::span<const std::uint8_t> bytes) {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> bits;
    auto binarize = [](std::uint8_t v) { return static_cast<std::uint8_t>(v >= 128 ? 1 : 0); };
    if (is_png(bytes)) {
        Raster raster = decode_png(bytes, PNG_FORMAT_GRAY);
        width = raster.width;
        height = raster.height;
        bits.resize(raster.samples.size());
        std::transform(raster.samples.begin(), raster.samples.end(), bits.begin(), binarize);
    } else if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
        const std::size_t offset = parse_pnm_header(bytes, '5', width, height);
        if (bytes.size() - offset < width * height) {
            fail(ErrorCode::format, "pgm: truncated pixel data");
        }
        bits.resize(width * height);
        std::transform(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                       bytes.begin() + static_cast<std::ptrdiff_t>(offset + width * height), bits.begin(), binarize);
    } else {
        fail(ErrorCode::format, "unsupported mask format (expected PNG or binary PGM)");
    }
    return BinaryMask(width, height, std::move(bits));
}

BinaryMask read_mask(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return decode_mask(bytes);
    } catch (const Error& e) {
        fail(e.code(), path.string() + ": " + e.what());
    }
}

void write_mask(const BinaryMask& mask, const std::filesystem::path& path) {
    std::vector<std::uint8_t> samples(mask.values().size());
    std::transform(mask.values().begin(), mask.values().end(), samples.begin(),
                   [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
    const std::string ext = lower_extension(path);
    if (ext == ".png") {
        write_file_atomic(path, encode_png_raw(mask.width(), mask.height(), PNG_FORMAT_GRAY, samples));
    } else if (ext == ".pgm") {
        const std::string header =
            "P5\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n255\n";
        std::vector<std::uint8_t> out(header.begin(), header.end());
        out.insert(out.end(), samples.begin(), samples.end());
        write_file_atomic(path, out);
    } else {
        fail(ErrorCode::format, "unsupported mask extension '" + ext + "' (use .png or .pgm)");
    }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::io, "cannot open " + path.string());
    }
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    static std::atomic<unsigned> counter{0};
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            fail(ErrorCode::io, "cannot create " + tmp.string());
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out.flush()) {
            fail(ErrorCode::io, "write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        fail(ErrorCode::io, "cannot rename into " + path.string());
    }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

} // namespace retouch
