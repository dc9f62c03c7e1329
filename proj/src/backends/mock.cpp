#include "backends/mock.hpp"

#include "core/digest.hpp"
#include "core/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace retouch::backends {

const char* to_string(BackendDescriptor::Kind kind) {
    switch (kind) {
    case BackendDescriptor::Kind::mock:
        return "mock";
    case BackendDescriptor::Kind::fixture:
        return "fixture";
    case BackendDescriptor::Kind::remote:
        return "remote";
    }
    return "unknown";
}

Embedding normalized(const Embedding& v) {
    double sum = 0.0;
    for (float x : v) {
        sum += static_cast<double>(x) * x;
    }
    const double norm = std::sqrt(sum);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        fail(ErrorCode::invalid_argument, "cannot normalize a zero or non-finite embedding");
    }
    Embedding out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = static_cast<float>(v[i] / norm);
    }
    return out;
}

double cosine(const Embedding& a, const Embedding& b) {
    if (a.size() != b.size()) {
        fail(ErrorCode::shape, "embedding dimensions differ: " + std::to_string(a.size()) + " vs " +
                                   std::to_string(b.size()));
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (!(na > 0.0) || !(nb > 0.0)) {
        fail(ErrorCode::invalid_argument, "cosine of a zero embedding");
    }
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

HashEmbedder::HashEmbedder(std::uint64_t seed, std::size_t dim) : seed_(seed), dim_(dim) {
    if (dim_ == 0) {
        fail(ErrorCode::invalid_argument, "embedding dimension must be >= 1");
    }
}

Embedding HashEmbedder::expand(std::string_view domain, std::span<const std::uint8_t> payload) const {
    const Sha256 digest = sha256(payload);
    Embedding out;
    out.reserve(dim_);
    for (std::uint32_t block = 0; out.size() < dim_; ++block) {
        std::vector<std::uint8_t> material;
        append_u64le(material, seed_);
        material.insert(material.end(), domain.begin(), domain.end());
        append_u32le(material, block);
        material.insert(material.end(), digest.begin(), digest.end());
        const Sha256 words = sha256(material);
        for (std::size_t w = 0; w < 8 && out.size() < dim_; ++w) {
            const std::uint32_t bits = load_u32le(words.data() + 4 * w);
            out.push_back(static_cast<float>(static_cast<double>(bits) / 2147483647.5 - 1.0));
        }
    }
    return normalized(out);
}

Embedding HashEmbedder::embed_text(const std::string& text) const {
    return expand("text", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Embedding HashEmbedder::embed_image(const Image& image) const {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(8 + image.pixels().size() * 4);
    append_u32le(bytes, static_cast<std::uint32_t>(image.width()));
    append_u32le(bytes, static_cast<std::uint32_t>(image.height()));
    for (float v : image.pixels()) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, &v, sizeof(bits));
        append_u32le(bytes, bits);
    }
    return expand("image", bytes);
}

GridSegmenter::GridSegmenter(std::size_t cells_per_side) : cells_(cells_per_side) {
    if (cells_ == 0) {
        fail(ErrorCode::invalid_argument, "grid segmenter needs at least one cell per side");
    }
}

std::vector<BinaryMask> GridSegmenter::segment(const Image& image) const {
    const std::size_t rows = std::min(cells_, image.height());
    const std::size_t cols = std::min(cells_, image.width());
    std::vector<BinaryMask> masks;
    masks.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            BinaryMask mask(image.width(), image.height());
            for (std::size_t y = r * image.height() / rows; y < (r + 1) * image.height() / rows; ++y) {
                for (std::size_t x = c * image.width() / cols; x < (c + 1) * image.width() / cols; ++x) {
                    mask.set(x, y, true);
                }
            }
            masks.push_back(std::move(mask));
        }
    }
    return masks;
}

LatentTensor IdentityCodec::encode(const Image& image) const {
    const std::size_t w = image.width();
    const std::size_t h = image.height();
    std::vector<float> planes(3 * h * w);
    const auto src = image.pixels();
    for (std::size_t p = 0; p < h * w; ++p) {
        for (std::size_t c = 0; c < 3; ++c) {
            planes[c * h * w + p] = src[p * 3 + c];
        }
    }
    return LatentTensor({3, h, w}, std::move(planes));
}

Image IdentityCodec::decode(const LatentTensor& latent) const {
    const auto& shape = latent.shape();
    if (shape.size() != 3 || shape[0] != 3) {
        fail(ErrorCode::shape, "identity codec expects a (3,H,W) latent, got " + shape_string(shape));
    }
    const std::size_t h = shape[1];
    const std::size_t w = shape[2];
    std::vector<float> pixels(3 * h * w);
    const auto src = latent.data();
    for (std::size_t p = 0; p < h * w; ++p) {
        for (std::size_t c = 0; c < 3; ++c) {
            pixels[p * 3 + c] = src[c * h * w + p];
        }
    }
    return Image::clamped(w, h, pixels);
}

LatentTensor oracle_noise(const LatentTensor& latent, const LatentTensor& target, double alpha_bar) {
    if (!latent.same_shape(target)) {
        fail(ErrorCode::shape, "oracle target shape " + shape_string(target.shape()) + " != latent shape " +
                                   shape_string(latent.shape()));
    }
    if (!(alpha_bar < 1.0)) {
        fail(ErrorCode::invalid_argument, "oracle noise is undefined at step 0");
    }
    const double signal = std::sqrt(alpha_bar);
    const double noise = std::sqrt(1.0 - alpha_bar);
    LatentTensor out(latent.shape());
    const auto z = latent.data();
    const auto x0 = target.data();
    auto eps = out.data();
    for (std::size_t i = 0; i < eps.size(); ++i) {
        eps[i] = static_cast<float>((static_cast<double>(z[i]) - signal * x0[i]) / noise);
    }
    return out;
}

OracleDenoiser::OracleDenoiser(LatentTensor target, diffusion::DiffusionSchedule schedule)
    : target_(std::move(target)), schedule_(std::move(schedule)) {}

LatentTensor OracleDenoiser::predict_noise(const NoiseQuery& query) const {
    if (query.step == 0 || query.step > schedule_.steps()) {
        fail(ErrorCode::invalid_argument, "oracle denoiser step " + std::to_string(query.step) +
                                              " outside 1.." + std::to_string(schedule_.steps()));
    }
    return oracle_noise(query.latent, target_, schedule_.alpha_bar(query.step));
}

TextTargetDenoiser::TextTargetDenoiser(double gain) : gain_(gain) {
    if (!(gain > 0.0 && gain <= 1.0)) {
        fail(ErrorCode::invalid_argument, "mock denoiser gain must lie in (0,1]");
    }
}

std::array<float, 3> TextTargetDenoiser::target_colour(const std::string& text) {
    const Sha256 digest = sha256(text);
    return {digest[0] / 255.0f, digest[1] / 255.0f, digest[2] / 255.0f};
}

LatentTensor TextTargetDenoiser::predict_noise(const NoiseQuery& query) const {
    if (query.step == 0) {
        fail(ErrorCode::invalid_argument, "denoiser step must be >= 1");
    }
    const auto& shape = query.latent.shape();
    if (shape.size() != 3) {
        fail(ErrorCode::shape, "mock denoiser expects a (C,H,W) latent");
    }
    const auto colour = target_colour(query.text);
    LatentTensor target(shape);
    const std::size_t plane = shape[1] * shape[2];
    auto data = target.data();
    for (std::size_t c = 0; c < shape[0]; ++c) {
        std::fill_n(data.begin() + static_cast<std::ptrdiff_t>(c * plane), plane, colour[c % 3]);
    }
    LatentTensor eps = oracle_noise(query.latent, target, query.alpha_bar);
    if (gain_ != 1.0) {
        for (float& v : eps.data()) {
            v = static_cast<float>(gain_ * v);
        }
    }
    return eps;
}

Backend make_mock_backend(const MockOptions& options) {
    auto embedder = std::make_shared<HashEmbedder>(options.seed, options.dim);
    Backend backend;
    backend.descriptor.kind = BackendDescriptor::Kind::mock;
    backend.descriptor.embedding_dim = options.dim;
    backend.descriptor.latent_stride = 1;
    backend.text_embedder = embedder;
    backend.image_embedder = embedder;
    backend.segmenter = std::make_shared<GridSegmenter>(options.grid);
    backend.codec = std::make_shared<IdentityCodec>();
    backend.denoiser = std::make_shared<TextTargetDenoiser>(options.gain);
    backend.identity = {
        {"kind", "mock"},
        {"embedder", {{"type", "hash"}, {"seed", options.seed}, {"dim", options.dim}}},
        {"segmenter", {{"type", "grid"}, {"cells_per_side", options.grid}}},
        {"codec", "identity"},
        {"denoiser", {{"type", "text_target"}, {"gain", options.gain}}},
    };
    return backend;
}

} // namespace retouch::backends
