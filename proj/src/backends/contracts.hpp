#pragma once

#include "core/types.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace retouch::backends {

using Embedding = std::vector<float>;

// E_T: text to a unit vector.
class TextEmbedder {
  public:
    virtual ~TextEmbedder() = default;
    virtual Embedding embed_text(const std::string& text) const = 0;
};

// E_I: image to a unit vector in the same space as TextEmbedder.
class ImageEmbedder {
  public:
    virtual ~ImageEmbedder() = default;
    virtual Embedding embed_image(const Image& image) const = 0;
};

// Class-agnostic entity segmentation; masks match the image size.
class Segmenter {
  public:
    virtual ~Segmenter() = default;
    virtual std::vector<BinaryMask> segment(const Image& image) const = 0;
};

class LatentCodec {
  public:
    virtual ~LatentCodec() = default;
    // Returns a (channels, H/stride, W/stride) latent.
    virtual LatentTensor encode(const Image& image) const = 0;
    virtual Image decode(const LatentTensor& latent) const = 0;
    virtual std::size_t stride() const = 0;
};

struct NoiseQuery {
    const LatentTensor& latent;
    std::size_t step;
    // alpha_bar of `step` under the sampler's schedule, so a backend can map
    // the sampler's step onto its own training timesteps.
    double alpha_bar;
    const std::string& text;
};

// epsilon_theta(z_t, t, v)
class Denoiser {
  public:
    virtual ~Denoiser() = default;
    virtual LatentTensor predict_noise(const NoiseQuery& query) const = 0;
};

struct BackendDescriptor {
    enum class Kind { mock, fixture, remote };

    Kind kind = Kind::mock;
    std::string endpoint; // remote: tcp://host:port or exec:<command>; fixture: path
    std::size_t embedding_dim = 0;
    std::size_t latent_stride = 1;
};

const char* to_string(BackendDescriptor::Kind kind);

// The five contracts the pipeline needs, plus identifiers for reports.
// All members must tolerate concurrent calls.
struct Backend {
    BackendDescriptor descriptor;
    std::shared_ptr<const TextEmbedder> text_embedder;
    std::shared_ptr<const ImageEmbedder> image_embedder;
    std::shared_ptr<const Segmenter> segmenter;
    std::shared_ptr<const LatentCodec> codec;
    std::shared_ptr<const Denoiser> denoiser;
    nlohmann::json identity = nlohmann::json::object();
};

// Scales to unit L2 norm; throws invalid_argument for a zero vector.
Embedding normalized(const Embedding& v);
// Dot product of the unit-normalized vectors; shape error on length mismatch.
double cosine(const Embedding& a, const Embedding& b);

} // namespace retouch::backends
