#pragma once

#include "backends/contracts.hpp"
#include "backends/mock.hpp"

#include <filesystem>
#include <map>
#include <optional>

namespace retouch::backends {

// Exact lookup of stored vectors: texts by string, images by
// image_content_hash. Misses fall back to a HashEmbedder of the same width.
class FixtureEmbedder final : public TextEmbedder, public ImageEmbedder {
  public:
    // Throws invalid_argument when stored vectors differ in length.
    FixtureEmbedder(std::map<std::string, Embedding> texts, std::map<std::string, Embedding> images,
                    std::uint64_t fallback_seed, std::optional<std::size_t> dim = std::nullopt);

    Embedding embed_text(const std::string& text) const override;
    Embedding embed_image(const Image& image) const override;
    std::size_t dimension() const noexcept { return fallback_.dimension(); }

  private:
    std::map<std::string, Embedding> texts_;
    std::map<std::string, Embedding> images_;
    HashEmbedder fallback_;
};

struct FixtureScene {
    Image image;
    std::vector<BinaryMask> masks;
};

// Returns the stored masks of the scene whose image matches the query.
class FixtureSegmenter final : public Segmenter {
  public:
    explicit FixtureSegmenter(std::vector<FixtureScene> scenes);
    std::vector<BinaryMask> segment(const Image& image) const override;

  private:
    std::map<std::string, std::size_t> by_hash_;
    std::vector<FixtureScene> scenes_;
};

// Loads a fixture file. Accepted layouts:
//   {"image": path, "entities": [{"mask_path": path, "embedding": [..]?}], ...}
//   {"scenes": [{"image": .., "entities": [..]}, ..], ...}
// plus optional "texts": {string: [..]}, "images": {hash: [..]},
// "fallback_seed", "embedding_dim" and "denoiser_gain". Relative paths
// resolve against the file's directory. Entity embeddings are registered
// under the hash of the entity's masked image (I * M_i).
Backend load_fixture_backend(const std::filesystem::path& path);

} // namespace retouch::backends
