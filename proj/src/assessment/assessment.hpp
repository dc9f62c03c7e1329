#pragma once

#include "backends/contracts.hpp"
#include "core/types.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace retouch::assessment {

inline constexpr double kDefaultAlpha = 5.0;

struct AssessmentConfig {
    double alpha = kDefaultAlpha;
    bool enable_cma = true;
    bool enable_iqa = true;
    unsigned jobs = 1;

    void validate() const;
    nlohmann::json to_json() const;
};

struct AssessmentScore {
    std::size_t proposal_index = 0;
    double cma = 0.0;      // C'_k in [0,1]
    double iqa = 0.0;      // S_k in [0, sqrt(3)]
    double combined = 0.0; // cma - alpha * iqa under the active configuration
};

struct SelectionResult {
    std::size_t chosen = 0; // a proposal_index
    std::vector<AssessmentScore> scores;
    std::vector<std::string> warnings;

    nlohmann::json to_json(const AssessmentConfig& config) const;
};

// (cos(E_I(P), E_T(v)) + 1) / 2.
double cma_score(const Image& proposal, const TextPrompt& text, const backends::TextEmbedder& text_embedder,
                 const backends::ImageEmbedder& image_embedder);
double cma_from_embeddings(const backends::Embedding& image, const backends::Embedding& text);

// Mean over pixels of the Euclidean norm of the RGB difference.
double iqa_score(const Image& original, const Image& proposal);

// Recomputes `combined` under `config` (a disabled term counts as 0) and
// takes the argmax; ties go to the earliest entry.
SelectionResult select(std::vector<AssessmentScore> scores, const AssessmentConfig& config);

// Scores every proposal (only the enabled terms are computed) and selects.
// `proposals[k]` may be empty for a failed proposal; it is skipped. A
// proposal whose scoring fails is excluded with a warning.
SelectionResult assess(const Image& original, std::span<const std::optional<Image>> proposals,
                       const TextPrompt& text, const backends::TextEmbedder& text_embedder,
                       const backends::ImageEmbedder& image_embedder, const AssessmentConfig& config);

} // namespace retouch::assessment
