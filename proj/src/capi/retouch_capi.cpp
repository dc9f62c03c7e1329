#include "retouch/retouch.h"

#include "assessment/assessment.hpp"
#include "backends/descriptor.hpp"
#include "core/error.hpp"
#include "core/image_io.hpp"
#include "mask_gen/mask_gen.hpp"
#include "metrics/evaluate.hpp"
#include "metrics/metrics.hpp"
#include "pipeline/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <string>
#include <vector>

struct retouch_image {
    retouch::Image image;
};

struct retouch_mask {
    retouch::BinaryMask mask;
};

struct retouch_backend {
    retouch::backends::Backend backend;
};

struct retouch_run {
    retouch::pipeline::PipelineResult result;
    std::optional<retouch_mask> mask;
    std::vector<std::optional<retouch_image>> proposals;
};

namespace {

using retouch::ErrorCode;

thread_local std::string last_error;
thread_local retouch_stage last_stage = RETOUCH_STAGE_NONE;

retouch_status status_of(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_argument:
        return RETOUCH_E_INVALID_ARGUMENT;
    case ErrorCode::shape:
        return RETOUCH_E_SHAPE;
    case ErrorCode::format:
        return RETOUCH_E_FORMAT;
    case ErrorCode::io:
        return RETOUCH_E_IO;
    case ErrorCode::empty_region:
        return RETOUCH_E_EMPTY_REGION;
    case ErrorCode::backend:
        return RETOUCH_E_BACKEND;
    case ErrorCode::transport:
        return RETOUCH_E_TRANSPORT;
    case ErrorCode::framing:
        return RETOUCH_E_FRAMING;
    case ErrorCode::internal:
        return RETOUCH_E_INTERNAL;
    }
    return RETOUCH_E_INTERNAL;
}

retouch_stage stage_of(retouch::pipeline::Stage stage) {
    switch (stage) {
    case retouch::pipeline::Stage::mask:
        return RETOUCH_STAGE_MASK;
    case retouch::pipeline::Stage::retouch:
        return RETOUCH_STAGE_RETOUCH;
    case retouch::pipeline::Stage::assess:
        return RETOUCH_STAGE_ASSESS;
    }
    return RETOUCH_STAGE_NONE;
}

template <typename F>
retouch_status guarded(F&& fn) {
    last_error.clear();
    last_stage = RETOUCH_STAGE_NONE;
    try {
        fn();
        return RETOUCH_OK;
    } catch (const retouch::pipeline::StageError& e) {
        last_error = e.what();
        last_stage = stage_of(e.stage());
        return status_of(e.code());
    } catch (const retouch::Error& e) {
        last_error = e.what();
        return status_of(e.code());
    } catch (const nlohmann::json::exception& e) {
        last_error = e.what();
        return RETOUCH_E_FORMAT;
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return RETOUCH_E_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return RETOUCH_E_INTERNAL;
    } catch (...) {
        last_error = "unknown failure";
        return RETOUCH_E_INTERNAL;
    }
}

template <typename T>
const T& need(const T* p, const char* what) {
    if (p == nullptr) {
        retouch::fail(ErrorCode::invalid_argument, std::string(what) + " is NULL");
    }
    return *p;
}

template <typename T>
T** need_out(T** p, const char* what) {
    if (p == nullptr) {
        retouch::fail(ErrorCode::invalid_argument, std::string(what) + " is NULL");
    }
    *p = nullptr;
    return p;
}

std::string need_string(const char* s, const char* what) {
    if (s == nullptr) {
        retouch::fail(ErrorCode::invalid_argument, std::string(what) + " is NULL");
    }
    return s;
}

char* copy_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) {
        throw std::bad_alloc();
    }
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void put_json(char** out, const nlohmann::json& value) {
    if (out != nullptr) {
        *out = copy_string(value.dump(2));
    }
}

retouch::maskgen::MaskConfig mask_config(const retouch_mask_options* options) {
    retouch_mask_options defaults;
    retouch_mask_options_init(&defaults);
    const retouch_mask_options& o = options ? *options : defaults;
    retouch::maskgen::MaskConfig c;
    c.floor = o.floor;
    if (o.use_fixed_tau) {
        c.fixed_tau = o.fixed_tau;
    }
    c.crop_to_bbox = o.crop_to_bbox != 0;
    c.jobs = o.jobs == 0 ? 1 : o.jobs;
    return c;
}

retouch::pipeline::PipelineConfig pipeline_config(const retouch_run_options* options) {
    retouch_run_options defaults;
    retouch_run_options_init(&defaults);
    const retouch_run_options& o = options ? *options : defaults;
    retouch::pipeline::PipelineConfig c;
    c.mask = mask_config(&o.mask);
    c.retouch = retouch::diffusion::RetouchConfig::with_base_seed(o.proposals, o.base_seed);
    if (o.seeds != nullptr) {
        c.retouch.seeds.assign(o.seeds, o.seeds + o.proposals);
    }
    c.retouch.steps = o.steps;
    c.retouch.eta = o.eta;
    c.retouch.beta_start = o.beta_start;
    c.retouch.beta_end = o.beta_end;
    c.assessment.alpha = o.alpha;
    c.assessment.enable_cma = o.enable_cma != 0;
    c.assessment.enable_iqa = o.enable_iqa != 0;
    c.set_jobs(o.jobs == 0 ? 1 : o.jobs);
    return c;
}

} // namespace

extern "C" {

const char* retouch_version(void) { return "0.1.0"; }

const char* retouch_status_string(retouch_status status) {
    switch (status) {
    case RETOUCH_OK:
        return "ok";
    case RETOUCH_E_INVALID_ARGUMENT:
        return "invalid argument";
    case RETOUCH_E_SHAPE:
        return "shape mismatch";
    case RETOUCH_E_FORMAT:
        return "format error";
    case RETOUCH_E_IO:
        return "i/o error";
    case RETOUCH_E_EMPTY_REGION:
        return "empty region";
    case RETOUCH_E_BACKEND:
        return "backend error";
    case RETOUCH_E_TRANSPORT:
        return "transport error";
    case RETOUCH_E_FRAMING:
        return "framing error";
    case RETOUCH_E_INTERNAL:
        return "internal error";
    }
    return "unknown status";
}

const char* retouch_last_error(void) { return last_error.c_str(); }

retouch_stage retouch_last_error_stage(void) { return last_stage; }

void retouch_string_free(char* s) { std::free(s); }

retouch_status retouch_image_create(size_t width, size_t height, const float* rgb, retouch_image** out) {
    return guarded([&] {
        need_out(out, "out");
        const float* p = &need(rgb, "rgb");
        std::vector<float> values(p, p + width * height * 3);
        *out = new retouch_image{retouch::Image(width, height, std::move(values))};
    });
}

retouch_status retouch_image_read(const char* path, retouch_image** out) {
    return guarded([&] {
        need_out(out, "out");
        *out = new retouch_image{retouch::read_image(need_string(path, "path"))};
    });
}

retouch_status retouch_image_write(const retouch_image* image, const char* path) {
    return guarded([&] { retouch::write_image(need(image, "image").image, need_string(path, "path")); });
}

size_t retouch_image_width(const retouch_image* image) { return image ? image->image.width() : 0; }

size_t retouch_image_height(const retouch_image* image) { return image ? image->image.height() : 0; }

const float* retouch_image_data(const retouch_image* image) { return image ? image->image.pixels().data() : nullptr; }

void retouch_image_free(retouch_image* image) { delete image; }

retouch_status retouch_mask_create(size_t width, size_t height, const uint8_t* values, retouch_mask** out) {
    return guarded([&] {
        need_out(out, "out");
        const uint8_t* p = &need(values, "values");
        *out = new retouch_mask{retouch::BinaryMask(width, height, std::vector<uint8_t>(p, p + width * height))};
    });
}

retouch_status retouch_mask_read(const char* path, retouch_mask** out) {
    return guarded([&] {
        need_out(out, "out");
        *out = new retouch_mask{retouch::read_mask(need_string(path, "path"))};
    });
}

retouch_status retouch_mask_write(const retouch_mask* mask, const char* path) {
    return guarded([&] { retouch::write_mask(need(mask, "mask").mask, need_string(path, "path")); });
}

size_t retouch_mask_width(const retouch_mask* mask) { return mask ? mask->mask.width() : 0; }

size_t retouch_mask_height(const retouch_mask* mask) { return mask ? mask->mask.height() : 0; }

const uint8_t* retouch_mask_data(const retouch_mask* mask) { return mask ? mask->mask.values().data() : nullptr; }

size_t retouch_mask_count(const retouch_mask* mask) { return mask ? mask->mask.count() : 0; }

void retouch_mask_free(retouch_mask* mask) { delete mask; }

retouch_status retouch_backend_open(const char* descriptor, retouch_backend** out) {
    return guarded([&] {
        need_out(out, "out");
        std::optional<std::string> d;
        if (descriptor != nullptr) {
            d = descriptor;
        }
        *out = new retouch_backend{retouch::backends::open_backend_or_default(d)};
    });
}

retouch_status retouch_backend_identity(const retouch_backend* backend, char** json_out) {
    return guarded([&] {
        need_out(json_out, "json_out");
        put_json(json_out, need(backend, "backend").backend.identity);
    });
}

void retouch_backend_free(retouch_backend* backend) { delete backend; }

void retouch_mask_options_init(retouch_mask_options* options) {
    if (options == nullptr) {
        return;
    }
    options->floor = retouch::maskgen::kDefaultScoreFloor;
    options->use_fixed_tau = 0;
    options->fixed_tau = 0.0;
    options->crop_to_bbox = 0;
    options->jobs = 1;
}

retouch_status retouch_generate_mask(const retouch_backend* backend, const retouch_image* image, const char* query,
                                     const retouch_mask_options* options, retouch_mask** mask_out,
                                     char** report_json) {
    return guarded([&] {
        need_out(mask_out, "mask_out");
        if (report_json != nullptr) {
            *report_json = nullptr;
        }
        const auto& b = need(backend, "backend").backend;
        const retouch::TextPrompt q(need_string(query, "query"), retouch::PromptRole::query);
        auto outcome = retouch::maskgen::generate_mask(need(image, "image").image, q, b, mask_config(options));
        put_json(report_json, outcome.report);
        if (outcome.region) {
            *mask_out = new retouch_mask{std::move(*outcome.region)};
        }
    });
}

void retouch_run_options_init(retouch_run_options* options) {
    if (options == nullptr) {
        return;
    }
    options->proposals = retouch::diffusion::kDefaultProposals;
    options->steps = retouch::diffusion::kDefaultSteps;
    options->eta = 1.0;
    options->beta_start = retouch::diffusion::kDefaultBetaStart;
    options->beta_end = retouch::diffusion::kDefaultBetaEnd;
    options->base_seed = 0;
    options->seeds = nullptr;
    options->alpha = retouch::assessment::kDefaultAlpha;
    options->enable_cma = 1;
    options->enable_iqa = 1;
    retouch_mask_options_init(&options->mask);
    options->jobs = 1;
}

retouch_status retouch_run_pipeline(const retouch_backend* backend, const retouch_image* image, const char* query,
                                    const char* text, const retouch_run_options* options, retouch_run** out) {
    return guarded([&] {
        need_out(out, "out");
        const auto& b = need(backend, "backend").backend;
        const auto& img = need(image, "image").image;
        const retouch::TextPrompt q(need_string(query, "query"), retouch::PromptRole::query);
        const retouch::TextPrompt t(need_string(text, "text"), retouch::PromptRole::conditional);
        auto run = std::make_unique<retouch_run>();
        run->result = retouch::pipeline::run(img, q, t, b, pipeline_config(options));
        if (run->result.matched()) {
            run->mask = retouch_mask{*run->result.mask.region};
            for (const auto& p : run->result.retouch->proposals) {
                if (p.image) {
                    run->proposals.push_back(retouch_image{*p.image});
                } else {
                    run->proposals.emplace_back();
                }
            }
        }
        *out = run.release();
    });
}

int retouch_run_matched(const retouch_run* run) { return run && run->result.matched() ? 1 : 0; }

const retouch_mask* retouch_run_mask(const retouch_run* run) {
    return run && run->mask ? &*run->mask : nullptr;
}

size_t retouch_run_proposal_count(const retouch_run* run) { return run ? run->proposals.size() : 0; }

const retouch_image* retouch_run_proposal(const retouch_run* run, size_t index) {
    if (run == nullptr || index >= run->proposals.size() || !run->proposals[index]) {
        return nullptr;
    }
    return &*run->proposals[index];
}

retouch_status retouch_run_selected(const retouch_run* run, size_t* index_out) {
    return guarded([&] {
        const auto& r = need(run, "run").result;
        if (index_out == nullptr) {
            retouch::fail(ErrorCode::invalid_argument, "index_out is NULL");
        }
        *index_out = r.chosen_proposal().index;
    });
}

retouch_status retouch_run_report(const retouch_run* run, char** json_out) {
    return guarded([&] {
        need_out(json_out, "json_out");
        put_json(json_out, need(run, "run").result.report());
    });
}

void retouch_run_free(retouch_run* run) { delete run; }

void retouch_assess_options_init(retouch_assess_options* options) {
    if (options == nullptr) {
        return;
    }
    options->alpha = retouch::assessment::kDefaultAlpha;
    options->enable_cma = 1;
    options->enable_iqa = 1;
    options->jobs = 1;
}

retouch_status retouch_assess(const retouch_backend* backend, const retouch_image* original,
                              const retouch_image* const* proposals, size_t count, const char* text,
                              const retouch_assess_options* options, size_t* chosen_out, char** report_json) {
    return guarded([&] {
        if (report_json != nullptr) {
            *report_json = nullptr;
        }
        if (chosen_out == nullptr) {
            retouch::fail(ErrorCode::invalid_argument, "chosen_out is NULL");
        }
        const auto& b = need(backend, "backend").backend;
        const auto& orig = need(original, "original").image;
        if (count > 0 && proposals == nullptr) {
            retouch::fail(ErrorCode::invalid_argument, "proposals is NULL");
        }
        retouch_assess_options defaults;
        retouch_assess_options_init(&defaults);
        const retouch_assess_options& o = options ? *options : defaults;
        retouch::assessment::AssessmentConfig config;
        config.alpha = o.alpha;
        config.enable_cma = o.enable_cma != 0;
        config.enable_iqa = o.enable_iqa != 0;
        config.jobs = o.jobs == 0 ? 1 : o.jobs;
        std::vector<std::optional<retouch::Image>> images;
        for (size_t k = 0; k < count; ++k) {
            images.push_back(need(proposals[k], "proposal").image);
        }
        const retouch::TextPrompt t(need_string(text, "text"), retouch::PromptRole::conditional);
        const auto result =
            retouch::assessment::assess(orig, images, t, *b.text_embedder, *b.image_embedder, config);
        *chosen_out = result.chosen;
        put_json(report_json, result.to_json(config));
    });
}

void retouch_eval_options_init(retouch_eval_options* options) {
    if (options == nullptr) {
        return;
    }
    retouch_run_options_init(&options->run);
    options->variants = nullptr;
    options->jobs = 1;
}

retouch_status retouch_evaluate_manifest(const retouch_backend* backend, const char* manifest_path,
                                         const retouch_eval_options* options, char** report_json) {
    return guarded([&] {
        need_out(report_json, "report_json");
        const auto& b = need(backend, "backend").backend;
        retouch_eval_options defaults;
        retouch_eval_options_init(&defaults);
        const retouch_eval_options& o = options ? *options : defaults;
        retouch::metrics::EvalConfig config;
        config.pipeline = pipeline_config(&o.run);
        config.pipeline.set_jobs(1);
        config.variants = retouch::metrics::parse_variants(o.variants ? o.variants : "all");
        config.jobs = o.jobs == 0 ? 1 : o.jobs;
        const auto entries = retouch::metrics::read_manifest(need_string(manifest_path, "manifest_path"));
        put_json(report_json, retouch::metrics::evaluate(entries, b, config));
    });
}

retouch_status retouch_eval_report_csv(const char* report_json, char** csv_out) {
    return guarded([&] {
        need_out(csv_out, "csv_out");
        const auto doc = nlohmann::json::parse(need_string(report_json, "report_json"));
        *csv_out = copy_string(retouch::metrics::report_csv(doc));
    });
}

retouch_status retouch_metric_mse(const retouch_image* a, const retouch_image* b, double* out) {
    return guarded([&] {
        const double v = retouch::metrics::mse(need(a, "a").image, need(b, "b").image);
        if (out == nullptr) {
            retouch::fail(ErrorCode::invalid_argument, "out is NULL");
        }
        *out = v;
    });
}

retouch_status retouch_metric_psnr(const retouch_image* a, const retouch_image* b, double* out) {
    return guarded([&] {
        const double v = retouch::metrics::psnr(need(a, "a").image, need(b, "b").image);
        if (out == nullptr) {
            retouch::fail(ErrorCode::invalid_argument, "out is NULL");
        }
        *out = v;
    });
}

retouch_status retouch_metric_ssim(const retouch_image* a, const retouch_image* b, double* out) {
    return guarded([&] {
        const double v = retouch::metrics::ssim(need(a, "a").image, need(b, "b").image);
        if (out == nullptr) {
            retouch::fail(ErrorCode::invalid_argument, "out is NULL");
        }
        *out = v;
    });
}

retouch_status retouch_write_text_atomic(const char* path, const char* text) {
    return guarded([&] { retouch::write_file_atomic(need_string(path, "path"), need_string(text, "text")); });
}

} // extern "C"
