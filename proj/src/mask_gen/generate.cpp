#include "core/error.hpp"
#include "core/parallel.hpp"
#include "mask_gen/mask_gen.hpp"

#include <algorithm>

namespace retouch::maskgen {

using nlohmann::json;

std::vector<ScoredEntity> score_entities(const Image& image, std::span<const BinaryMask> entities,
                                         const TextPrompt& query, const backends::TextEmbedder& text_embedder,
                                         const backends::ImageEmbedder& image_embedder,
                                         const ScoreOptions& options) {
    if (entities.empty()) {
        fail(ErrorCode::invalid_argument, "no entities to score");
    }
    backends::Embedding query_embedding;
    try {
        query_embedding = backends::normalized(text_embedder.embed_text(query.text()));
    } catch (const Error& e) {
        fail(e.code(), std::string("query embedding: ") + e.what());
    }
    std::vector<ScoredEntity> scored(entities.size());
    parallel_for(entities.size(), options.jobs, [&](std::size_t i) {
        try {
            Image entity = apply_mask(image, entities[i]);
            if (options.crop_to_bbox) {
                entity = crop(entity, mask_bounding_box(entities[i]));
            }
            const auto embedding = image_embedder.embed_image(entity);
            if (embedding.size() != query_embedding.size()) {
                fail(ErrorCode::shape, "image embedding has dimension " + std::to_string(embedding.size()) +
                                           ", text embedding " + std::to_string(query_embedding.size()));
            }
            scored[i] = ScoredEntity{entities[i], backends::cosine(embedding, query_embedding), i};
        } catch (const Error& e) {
            fail(e.code(), "entity " + std::to_string(i) + ": " + e.what());
        }
    });
    return scored;
}

MaskOutcome generate_mask(const Image& image, const TextPrompt& query, const backends::Backend& backend,
                          const MaskConfig& config) {
    std::vector<BinaryMask> masks = backend.segmenter->segment(image);
    json report = {{"query", query.text()}, {"segmented", masks.size()}};

    // Empty segments carry no pixels to edit and no centroid.
    std::vector<BinaryMask> usable;
    std::vector<std::size_t> ordinal;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        if (masks[i].width() != image.width() || masks[i].height() != image.height()) {
            fail(ErrorCode::shape, "segment " + std::to_string(i) + " does not match the image size");
        }
        if (masks[i].any()) {
            usable.push_back(std::move(masks[i]));
            ordinal.push_back(i);
        }
    }

    const LocationConstraint constraint = parse_location(query);
    json cells = json::array();
    for (const auto& cell : constraint.allowed_cells) {
        cells.push_back({cell.row, cell.col});
    }
    report["location"] = {{"kind", to_string(constraint.kind)}, {"cells", cells}};
    report["threshold"] = {{"mode", config.fixed_tau ? "fixed" : "adaptive"}, {"floor", config.floor}};

    if (usable.empty()) {
        report["entities"] = json::array();
        report["selected"] = json::array();
        report["threshold"]["tau"] = nullptr;
        report["matched"] = false;
        return {std::nullopt, std::move(report)};
    }

    std::vector<ScoredEntity> entities =
        score_entities(image, usable, query, *backend.text_embedder, *backend.image_embedder,
                       {config.crop_to_bbox, config.jobs});
    std::vector<double> scores;
    for (auto& e : entities) {
        e.index = ordinal[e.index];
        scores.push_back(e.score);
    }

    const ThresholdResult threshold =
        config.fixed_tau ? fixed_threshold(scores, *config.fixed_tau) : adaptive_threshold(scores, config.floor);
    const std::vector<std::size_t> kept =
        location_refine(entities, threshold.selected, constraint, image.width(), image.height());
    report["threshold"]["tau"] = threshold.tau;

    json rows = json::array();
    for (std::size_t p = 0; p < entities.size(); ++p) {
        const Point c = mask_centroid(entities[p].mask);
        const GridCell cell = location_cell(c, image.width(), image.height());
        const bool by_threshold =
            std::find(threshold.selected.begin(), threshold.selected.end(), p) != threshold.selected.end();
        const bool selected = std::find(kept.begin(), kept.end(), p) != kept.end();
        rows.push_back({{"index", entities[p].index},
                        {"score", entities[p].score},
                        {"pixels", entities[p].mask.count()},
                        {"centroid", {c.x, c.y}},
                        {"cell", {cell.row, cell.col}},
                        {"above_threshold", by_threshold},
                        {"selected", selected}});
    }
    report["entities"] = std::move(rows);
    json selected_indices = json::array();
    for (std::size_t p : kept) {
        selected_indices.push_back(entities[p].index);
    }
    report["selected"] = std::move(selected_indices);

    if (kept.empty()) {
        report["matched"] = false;
        return {std::nullopt, std::move(report)};
    }
    std::vector<BinaryMask> chosen;
    for (std::size_t p : kept) {
        chosen.push_back(entities[p].mask);
    }
    BinaryMask region = mask_union(chosen);
    report["matched"] = true;
    report["region_pixels"] = region.count();
    return {std::move(region), std::move(report)};
}

} // namespace retouch::maskgen
