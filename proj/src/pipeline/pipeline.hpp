#pragma once

#include "assessment/assessment.hpp"
#include "backends/contracts.hpp"
#include "core/error.hpp"
#include "diffusion/sampler.hpp"
#include "mask_gen/mask_gen.hpp"

#include <nlohmann/json.hpp>

#include <optional>

namespace retouch::pipeline {

enum class Stage { mask, retouch, assess };

const char* to_string(Stage stage);

// An Error raised inside one stage of run(); keeps the original code.
class StageError : public Error {
  public:
    StageError(Stage stage, ErrorCode code, const std::string& message) : Error(code, message), stage_(stage) {}

    Stage stage() const noexcept { return stage_; }

  private:
    Stage stage_;
};

struct PipelineConfig {
    maskgen::MaskConfig mask;
    diffusion::RetouchConfig retouch = diffusion::RetouchConfig::with_base_seed(diffusion::kDefaultProposals, 0);
    assessment::AssessmentConfig assessment;

    void set_jobs(unsigned jobs);
    void validate() const;
    nlohmann::json to_json() const;
};

struct PipelineResult {
    maskgen::MaskOutcome mask;
    std::optional<diffusion::RetouchResult> retouch;       // absent when nothing matched
    std::optional<assessment::SelectionResult> selection; // absent when nothing matched

    bool matched() const noexcept { return mask.matched(); }
    // The chosen proposal; requires matched().
    const Image& selected() const;
    const diffusion::Proposal& chosen_proposal() const;
    // mask, retouch and assessment reports plus the configuration.
    nlohmann::json report() const;

    PipelineConfig config;
};

// mask generation -> retouching -> assessment. When no entity matches the
// query the result carries only the mask report.
PipelineResult run(const Image& image, const TextPrompt& query, const TextPrompt& text,
                   const backends::Backend& backend, const PipelineConfig& config);

} // namespace retouch::pipeline
