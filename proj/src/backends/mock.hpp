#pragma once

#include "backends/contracts.hpp"
#include "diffusion/schedule.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace retouch::backends {

// Deterministic embedder: SHA-256 of (seed, domain tag, block counter,
// digest of the input bytes) expanded into components in [-1,1], then
// projected to the unit sphere. Text hashes the UTF-8 bytes; images hash
// their dimensions and float32 little-endian samples.
class HashEmbedder final : public TextEmbedder, public ImageEmbedder {
  public:
    HashEmbedder(std::uint64_t seed, std::size_t dim);

    Embedding embed_text(const std::string& text) const override;
    Embedding embed_image(const Image& image) const override;

    std::size_t dimension() const noexcept { return dim_; }
    std::uint64_t seed() const noexcept { return seed_; }

  private:
    Embedding expand(std::string_view domain, std::span<const std::uint8_t> payload) const;

    std::uint64_t seed_;
    std::size_t dim_;
};

// Splits the image into a rows x cols grid; each cell is one entity.
class GridSegmenter final : public Segmenter {
  public:
    explicit GridSegmenter(std::size_t cells_per_side);
    std::vector<BinaryMask> segment(const Image& image) const override;

  private:
    std::size_t cells_;
};

// Stride-1 codec: the image reinterpreted as a (3,H,W) latent.
class IdentityCodec final : public LatentCodec {
  public:
    LatentTensor encode(const Image& image) const override;
    // Clamps into [0,1].
    Image decode(const LatentTensor& latent) const override;
    std::size_t stride() const override { return 1; }
};

// The unique epsilon consistent with z_t being `target` noised to step t:
// (z_t - sqrt(abar_t) * target) / sqrt(1 - abar_t). Step 0 is rejected.
class OracleDenoiser final : public Denoiser {
  public:
    OracleDenoiser(LatentTensor target, diffusion::DiffusionSchedule schedule);
    LatentTensor predict_noise(const NoiseQuery& query) const override;

  private:
    LatentTensor target_;
    diffusion::DiffusionSchedule schedule_;
};

// Oracle noise toward `target`, evaluated with the query's alpha_bar.
LatentTensor oracle_noise(const LatentTensor& latent, const LatentTensor& target, double alpha_bar);

// Mock denoiser used by the mock and fixture backends. The target is a
// constant per-channel colour derived from SHA-256 of the conditional text;
// the prediction is `gain` times the oracle noise toward it, so gain = 1 is
// an exact oracle and gain < 1 leaves seed-dependent variation in the result.
class TextTargetDenoiser final : public Denoiser {
  public:
    explicit TextTargetDenoiser(double gain);
    LatentTensor predict_noise(const NoiseQuery& query) const override;

    static std::array<float, 3> target_colour(const std::string& text);

  private:
    double gain_;
};

struct MockOptions {
    std::uint64_t seed = 0;
    std::size_t dim = 64;
    std::size_t grid = 3;
    double gain = 0.8;
};

Backend make_mock_backend(const MockOptions& options = {});

} // namespace retouch::backends
