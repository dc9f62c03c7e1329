#include "backends/fixture.hpp"

#include "core/digest.hpp"
#include "core/error.hpp"
#include "core/image_io.hpp"
#include "core/mask_ops.hpp"

#include <fstream>

namespace retouch::backends {

namespace {

std::optional<std::size_t> common_dimension(const std::map<std::string, Embedding>& a,
                                            const std::map<std::string, Embedding>& b,
                                            std::optional<std::size_t> declared) {
    std::optional<std::size_t> dim = declared;
    for (const auto* table : {&a, &b}) {
        for (const auto& [key, vec] : *table) {
            if (vec.empty()) {
                fail(ErrorCode::invalid_argument, "fixture vector for '" + key + "' is empty");
            }
            if (dim && *dim != vec.size()) {
                fail(ErrorCode::invalid_argument, "fixture vector for '" + key + "' has dimension " +
                                                      std::to_string(vec.size()) + ", expected " +
                                                      std::to_string(*dim));
            }
            dim = vec.size();
        }
    }
    return dim;
}

Embedding parse_vector(const nlohmann::json& node, const std::string& what) {
    if (!node.is_array()) {
        fail(ErrorCode::format, what + " must be an array of numbers");
    }
    Embedding out;
    for (const auto& v : node) {
        if (!v.is_number()) {
            fail(ErrorCode::format, what + " must be an array of numbers");
        }
        out.push_back(v.get<float>());
    }
    return out;
}

} // namespace

FixtureEmbedder::FixtureEmbedder(std::map<std::string, Embedding> texts, std::map<std::string, Embedding> images,
                                 std::uint64_t fallback_seed, std::optional<std::size_t> dim)
    : texts_(std::move(texts)), images_(std::move(images)),
      fallback_(fallback_seed, common_dimension(texts_, images_, dim).value_or(64)) {
    for (auto* table : {&texts_, &images_}) {
        for (auto& [key, vec] : *table) {
            vec = normalized(vec);
        }
    }
}

Embedding FixtureEmbedder::embed_text(const std::string& text) const {
    if (auto it = texts_.find(text); it != texts_.end()) {
        return it->second;
    }
    return fallback_.embed_text(text);
}

Embedding FixtureEmbedder::embed_image(const Image& image) const {
    if (auto it = images_.find(image_content_hash(image)); it != images_.end()) {
        return it->second;
    }
    return fallback_.embed_image(image);
}

FixtureSegmenter::FixtureSegmenter(std::vector<FixtureScene> scenes) : scenes_(std::move(scenes)) {
    for (std::size_t i = 0; i < scenes_.size(); ++i) {
        for (const auto& mask : scenes_[i].masks) {
            if (mask.width() != scenes_[i].image.width() || mask.height() != scenes_[i].image.height()) {
                fail(ErrorCode::shape, "fixture mask size does not match its scene image");
            }
        }
        by_hash_.emplace(image_content_hash(scenes_[i].image), i);
    }
}

std::vector<BinaryMask> FixtureSegmenter::segment(const Image& image) const {
    if (auto it = by_hash_.find(image_content_hash(image)); it != by_hash_.end()) {
        return scenes_[it->second].masks;
    }
    if (scenes_.size() == 1) {
        const auto& scene = scenes_.front();
        if (scene.image.width() != image.width() || scene.image.height() != image.height()) {
            fail(ErrorCode::shape, "fixture masks are " + std::to_string(scene.image.width()) + "x" +
                                       std::to_string(scene.image.height()) + ", image is " +
                                       std::to_string(image.width()) + "x" + std::to_string(image.height()));
        }
        return scene.masks;
    }
    fail(ErrorCode::backend, "no fixture scene matches the image");
}

Backend load_fixture_backend(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::io, "cannot open fixture " + path.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::format, "fixture " + path.string() + ": " + e.what());
    }
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path candidate(p);
        return candidate.is_absolute() ? candidate : base / candidate;
    };

    std::vector<nlohmann::json> scene_nodes;
    if (doc.contains("scenes")) {
        for (const auto& s : doc.at("scenes")) {
            scene_nodes.push_back(s);
        }
    } else if (doc.contains("image")) {
        scene_nodes.push_back(doc);
    }

    std::map<std::string, Embedding> texts;
    std::map<std::string, Embedding> images;
    std::vector<FixtureScene> scenes;
    try {
        for (const auto& node : scene_nodes) {
            FixtureScene scene{read_image(resolve(node.at("image").get<std::string>())), {}};
            const nlohmann::json entities = node.value("entities", nlohmann::json::array());
            for (const auto& entity : entities) {
                BinaryMask mask = read_mask(resolve(entity.at("mask_path").get<std::string>()));
                if (entity.contains("embedding")) {
                    images[image_content_hash(apply_mask(scene.image, mask))] =
                        parse_vector(entity.at("embedding"), "entity embedding");
                }
                scene.masks.push_back(std::move(mask));
            }
            scenes.push_back(std::move(scene));
        }
        const nlohmann::json text_table = doc.value("texts", nlohmann::json::object());
        for (const auto& [text, vec] : text_table.items()) {
            texts[text] = parse_vector(vec, "text embedding '" + text + "'");
        }
        const nlohmann::json image_table = doc.value("images", nlohmann::json::object());
        for (const auto& [hash, vec] : image_table.items()) {
            images[hash] = parse_vector(vec, "image embedding '" + hash + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::format, "fixture " + path.string() + ": " + e.what());
    }

    std::optional<std::size_t> declared;
    if (doc.contains("embedding_dim")) {
        declared = doc.at("embedding_dim").get<std::size_t>();
    }
    const auto seed = doc.value("fallback_seed", std::uint64_t{0});
    const double gain = doc.value("denoiser_gain", 0.8);
    const std::size_t scene_count = scenes.size();

    auto embedder = std::make_shared<FixtureEmbedder>(std::move(texts), std::move(images), seed, declared);
    Backend backend;
    backend.descriptor.kind = BackendDescriptor::Kind::fixture;
    backend.descriptor.endpoint = path.string();
    backend.descriptor.embedding_dim = embedder->dimension();
    backend.descriptor.latent_stride = 1;
    backend.text_embedder = embedder;
    backend.image_embedder = embedder;
    backend.segmenter = std::make_shared<FixtureSegmenter>(std::move(scenes));
    backend.codec = std::make_shared<IdentityCodec>();
    backend.denoiser = std::make_shared<TextTargetDenoiser>(gain);
    backend.identity = {
        {"kind", "fixture"},
        {"path", path.filename().string()},
        {"scenes", scene_count},
        {"embedder", {{"type", "fixture"}, {"fallback_seed", seed}, {"dim", embedder->dimension()}}},
        {"codec", "identity"},
        {"denoiser", {{"type", "text_target"}, {"gain", gain}}},
    };
    return backend;
}

} // namespace retouch::backends
