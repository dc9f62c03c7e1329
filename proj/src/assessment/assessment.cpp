#include "assessment/assessment.hpp"

#include "core/error.hpp"
#include "core/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace retouch::assessment {

void AssessmentConfig::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        fail(ErrorCode::invalid_argument, "alpha must be a finite value >= 0");
    }
}

nlohmann::json AssessmentConfig::to_json() const {
    return {{"alpha", alpha}, {"enable_cma", enable_cma}, {"enable_iqa", enable_iqa}};
}

nlohmann::json SelectionResult::to_json(const AssessmentConfig& config) const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : scores) {
        rows.push_back({{"index", s.proposal_index}, {"cma", s.cma}, {"iqa", s.iqa}, {"combined", s.combined}});
    }
    return {{"config", config.to_json()}, {"chosen", chosen}, {"scores", rows}, {"warnings", warnings}};
}

double cma_from_embeddings(const backends::Embedding& image, const backends::Embedding& text) {
    return std::clamp((backends::cosine(image, text) + 1.0) / 2.0, 0.0, 1.0);
}

double cma_score(const Image& proposal, const TextPrompt& text, const backends::TextEmbedder& text_embedder,
                 const backends::ImageEmbedder& image_embedder) {
    return cma_from_embeddings(image_embedder.embed_image(proposal), text_embedder.embed_text(text.text()));
}

double iqa_score(const Image& original, const Image& proposal) {
    if (original.width() != proposal.width() || original.height() != proposal.height()) {
        fail(ErrorCode::shape, "proposal size differs from the original");
    }
    const auto a = original.pixels();
    const auto b = proposal.pixels();
    double total = 0.0;
    for (std::size_t p = 0; p < original.pixel_count(); ++p) {
        double sq = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            const double d = static_cast<double>(a[p * 3 + c]) - b[p * 3 + c];
            sq += d * d;
        }
        total += std::sqrt(sq);
    }
    return total / static_cast<double>(original.pixel_count());
}

SelectionResult select(std::vector<AssessmentScore> scores, const AssessmentConfig& config) {
    config.validate();
    if (scores.empty()) {
        fail(ErrorCode::invalid_argument, "nothing to select from");
    }
    std::size_t best = 0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        const double cma = config.enable_cma ? scores[k].cma : 0.0;
        const double iqa = config.enable_iqa ? scores[k].iqa : 0.0;
        scores[k].combined = cma - config.alpha * iqa;
        if (scores[k].combined > scores[best].combined) {
            best = k;
        }
    }
    SelectionResult result;
    result.chosen = scores[best].proposal_index;
    result.scores = std::move(scores);
    return result;
}

SelectionResult assess(const Image& original, std::span<const std::optional<Image>> proposals,
                       const TextPrompt& text, const backends::TextEmbedder& text_embedder,
                       const backends::ImageEmbedder& image_embedder, const AssessmentConfig& config) {
    config.validate();
    if (proposals.empty()) {
        fail(ErrorCode::invalid_argument, "no proposals to assess");
    }
    backends::Embedding text_embedding;
    if (config.enable_cma) {
        text_embedding = text_embedder.embed_text(text.text());
    }
    std::vector<std::optional<AssessmentScore>> scored(proposals.size());
    std::vector<std::string> errors(proposals.size());
    parallel_for(proposals.size(), config.jobs, [&](std::size_t k) {
        if (!proposals[k]) {
            errors[k] = "proposal " + std::to_string(k) + " is missing";
            return;
        }
        try {
            AssessmentScore s;
            s.proposal_index = k;
            if (config.enable_cma) {
                s.cma = cma_from_embeddings(image_embedder.embed_image(*proposals[k]), text_embedding);
            }
            if (config.enable_iqa) {
                s.iqa = iqa_score(original, *proposals[k]);
            }
            scored[k] = s;
        } catch (const std::exception& e) {
            errors[k] = "proposal " + std::to_string(k) + " excluded: " + e.what();
        }
    });
    std::vector<AssessmentScore> kept;
    std::vector<std::string> warnings;
    for (std::size_t k = 0; k < proposals.size(); ++k) {
        if (scored[k]) {
            kept.push_back(*scored[k]);
        } else {
            warnings.push_back(errors[k]);
        }
    }
    if (kept.empty()) {
        fail(ErrorCode::backend, "every proposal was excluded from assessment: " + warnings.front());
    }
    SelectionResult result = select(std::move(kept), config);
    result.warnings = std::move(warnings);
    return result;
}

} // namespace retouch::assessment
