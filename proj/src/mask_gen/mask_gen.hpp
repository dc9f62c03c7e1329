#pragma once

#include "backends/contracts.hpp"
#include "core/mask_ops.hpp"
#include "core/types.hpp"

#include <nlohmann/json.hpp>

#include <compare>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace retouch::maskgen {

struct ScoredEntity {
    BinaryMask mask;
    double score = 0.0;
    std::size_t index = 0; // ordinal in the segmenter's output
};

struct ThresholdResult {
    double tau = 0.0;
    // Positions into the scored list, ascending.
    std::vector<std::size_t> selected;
};

enum class LocationKind {
    none,
    left,
    right,
    top,
    bottom,
    center,
    top_left,
    top_right,
    bottom_left,
    bottom_right,
};

inline constexpr std::size_t kLocationKindCount = 10;

const char* to_string(LocationKind kind);

struct GridCell {
    int row = 0;
    int col = 0;
    auto operator<=>(const GridCell&) const = default;
};

struct LocationConstraint {
    LocationKind kind = LocationKind::none;
    std::vector<GridCell> allowed_cells; // row-major order

    static LocationConstraint of(LocationKind kind);
    bool allows(GridCell cell) const;
};

struct ScoreOptions {
    // Embed the masked image cropped to the entity's bounding box instead of
    // the full-size I * M_i.
    bool crop_to_bbox = false;
    unsigned jobs = 1;
};

inline constexpr double kDefaultScoreFloor = 0.2;
inline constexpr double kFlatGapEpsilon = 1e-6;

// C_i = <E_I(I * M_i), E_T(q)> on unit-normalized embeddings. The query is
// embedded once. Results are in entity order whatever `jobs` is.
std::vector<ScoredEntity> score_entities(const Image& image, std::span<const BinaryMask> entities,
                                         const TextPrompt& query, const backends::TextEmbedder& text_embedder,
                                         const backends::ImageEmbedder& image_embedder,
                                         const ScoreOptions& options = {});

// Largest-gap rule on the descending-sorted scores: cut at the first largest
// gap, tau is the midpoint of the two scores around it, then drop selected
// entries below `floor`. One score selects itself with tau = that score; if
// every gap is below kFlatGapEpsilon all entries are kept and tau is the
// smallest score.
ThresholdResult adaptive_threshold(std::span<const double> scores, double floor = kDefaultScoreFloor);

// Keeps every entry with score >= tau.
ThresholdResult fixed_threshold(std::span<const double> scores, double tau);

// Case-insensitive keyword scan; adjacent vertical/horizontal words form a
// corner ("upper right", "top-left"). Otherwise the first keyword wins.
LocationConstraint parse_location(const TextPrompt& query);

// 3x3 cell of a point: (floor(3y/H), floor(3x/W)) clamped to 0..2.
GridCell location_cell(Point centroid, std::size_t width, std::size_t height);

// Keeps the selected positions whose mask centroid falls in an allowed cell.
std::vector<std::size_t> location_refine(std::span<const ScoredEntity> entities, std::span<const std::size_t> selected,
                                         const LocationConstraint& constraint, std::size_t width,
                                         std::size_t height);

struct MaskConfig {
    double floor = kDefaultScoreFloor;
    // When set, bypasses the adaptive rule with C_i >= fixed_tau.
    std::optional<double> fixed_tau;
    bool crop_to_bbox = false;
    unsigned jobs = 1;
};

struct MaskOutcome {
    // Empty when no entity survived selection.
    std::optional<BinaryMask> region;
    nlohmann::json report;

    bool matched() const noexcept { return region.has_value(); }
};

// segment -> score -> threshold -> location refinement -> union.
MaskOutcome generate_mask(const Image& image, const TextPrompt& query, const backends::Backend& backend,
                          const MaskConfig& config = {});

} // namespace retouch::maskgen
