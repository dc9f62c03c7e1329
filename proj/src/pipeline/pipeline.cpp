#include "pipeline/pipeline.hpp"

namespace retouch::pipeline {

using nlohmann::json;

const char* to_string(Stage stage) {
    switch (stage) {
    case Stage::mask:
        return "mask";
    case Stage::retouch:
        return "retouch";
    case Stage::assess:
        return "assess";
    }
    return "unknown";
}

void PipelineConfig::set_jobs(unsigned jobs) {
    mask.jobs = jobs;
    retouch.jobs = jobs;
    assessment.jobs = jobs;
}

void PipelineConfig::validate() const {
    if (!(mask.floor >= -1.0 && mask.floor <= 1.0)) {
        fail(ErrorCode::invalid_argument, "score floor must lie in [-1,1]");
    }
    retouch.validate();
    assessment.validate();
}

json PipelineConfig::to_json() const {
    json m = {{"floor", mask.floor}, {"crop_to_bbox", mask.crop_to_bbox}};
    m["fixed_tau"] = mask.fixed_tau ? json(*mask.fixed_tau) : json(nullptr);
    return {{"mask", m}, {"retouch", retouch.to_json()}, {"assessment", assessment.to_json()}};
}

const diffusion::Proposal& PipelineResult::chosen_proposal() const {
    if (!retouch || !selection) {
        fail(ErrorCode::empty_region, "no proposal was generated");
    }
    return retouch->proposals.at(selection->chosen);
}

const Image& PipelineResult::selected() const { return *chosen_proposal().image; }

json PipelineResult::report() const {
    json out = {{"config", config.to_json()}, {"mask", mask.report}, {"matched", matched()}};
    out["retouch"] = retouch ? retouch->report : json(nullptr);
    out["assessment"] = selection ? selection->to_json(config.assessment) : json(nullptr);
    out["selected"] = selection ? json(selection->chosen) : json(nullptr);
    return out;
}

namespace {

template <typename F>
auto in_stage(Stage stage, F&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(stage, e.code(), std::string(to_string(stage)) + ": " + e.what());
    } catch (const std::exception& e) {
        throw StageError(stage, ErrorCode::internal, std::string(to_string(stage)) + ": " + e.what());
    }
}

} // namespace

PipelineResult run(const Image& image, const TextPrompt& query, const TextPrompt& text,
                   const backends::Backend& backend, const PipelineConfig& config) {
    config.validate();
    PipelineResult result;
    result.config = config;
    result.mask = in_stage(Stage::mask, [&] { return maskgen::generate_mask(image, query, backend, config.mask); });
    if (!result.matched()) {
        return result;
    }
    result.retouch = in_stage(Stage::retouch, [&] {
        return diffusion::retouch(image, *result.mask.region, text, *backend.codec, *backend.denoiser,
                                  config.retouch);
    });
    result.selection = in_stage(Stage::assess, [&] {
        std::vector<std::optional<Image>> images;
        for (const auto& p : result.retouch->proposals) {
            images.push_back(p.image);
        }
        return assessment::assess(image, images, text, *backend.text_embedder, *backend.image_embedder,
                                  config.assessment);
    });
    return result;
}

} // namespace retouch::pipeline
