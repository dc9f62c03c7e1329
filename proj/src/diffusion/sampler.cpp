#include "diffusion/sampler.hpp"

#include "core/error.hpp"
#include "core/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace retouch::diffusion {

namespace {

template <typename L>
void require_same_shape(const L& a, const L& b, const char* what) {
    if (!a.same_shape(b)) {
        fail(ErrorCode::shape, std::string(what) + ": shapes " + shape_string(a.shape) + " and " +
                                   shape_string(b.shape) + " differ");
    }
}

void require_step(std::size_t t, std::size_t lo, const DiffusionSchedule& schedule) {
    if (t < lo || t > schedule.steps()) {
        fail(ErrorCode::invalid_argument, "step " + std::to_string(t) + " outside " + std::to_string(lo) + ".." +
                                              std::to_string(schedule.steps()));
    }
}

} // namespace

PreciseLatent::PreciseLatent(std::vector<std::size_t> s)
    : shape(std::move(s)), data(Tensor::element_count(shape), 0.0) {}

PreciseLatent::PreciseLatent(const LatentTensor& tensor)
    : shape(tensor.shape()), data(tensor.data().begin(), tensor.data().end()) {}

LatentTensor PreciseLatent::rounded() const {
    std::vector<float> values(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        values[i] = static_cast<float>(data[i]);
    }
    return LatentTensor(shape, std::move(values));
}

void PreciseLatent::fill(NormalStream& rng) {
    for (double& v : data) {
        v = rng.next();
    }
}

PreciseLatent forward_noise(const PreciseLatent& z0, std::size_t t, const PreciseLatent& eps,
                            const DiffusionSchedule& schedule) {
    require_same_shape(z0, eps, "forward_noise");
    require_step(t, 0, schedule);
    const double abar = schedule.alpha_bar(t);
    const double signal = std::sqrt(abar);
    const double noise = std::sqrt(1.0 - abar);
    PreciseLatent out(z0.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = signal * z0.data[i] + noise * eps.data[i];
    }
    return out;
}

LatentTensor forward_noise(const LatentTensor& z0, std::size_t t, const LatentTensor& eps,
                           const DiffusionSchedule& schedule) {
    return forward_noise(PreciseLatent(z0), t, PreciseLatent(eps), schedule).rounded();
}

PreciseLatent denoise_step(const PreciseLatent& z_t, std::size_t t, const PreciseLatent& eps_pred,
                           const DiffusionSchedule& schedule, double eta, NormalStream& rng) {
    require_same_shape(z_t, eps_pred, "denoise_step");
    require_step(t, 1, schedule);
    if (!(eta >= 0.0 && eta <= 1.0)) {
        fail(ErrorCode::invalid_argument, "eta must lie in [0,1]");
    }
    const double abar = schedule.alpha_bar(t);
    const double abar_prev = schedule.alpha_bar(t - 1);
    const double sigma = eta * std::sqrt((1.0 - abar_prev) / (1.0 - abar)) * std::sqrt(1.0 - abar / abar_prev);
    const double direction = std::sqrt(std::max(0.0, 1.0 - abar_prev - sigma * sigma));
    const double inv_signal = 1.0 / std::sqrt(abar);
    const double noise = std::sqrt(1.0 - abar);
    const double signal_prev = std::sqrt(abar_prev);

    PreciseLatent out(z_t.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double e = eps_pred.data[i];
        const double x0 = (z_t.data[i] - noise * e) * inv_signal;
        double value = signal_prev * x0 + direction * e;
        if (sigma > 0.0) {
            value += sigma * rng.next();
        }
        out.data[i] = value;
    }
    return out;
}

LatentTensor denoise_step(const LatentTensor& z_t, std::size_t t, const LatentTensor& eps_pred,
                          const DiffusionSchedule& schedule, double eta, NormalStream& rng) {
    return denoise_step(PreciseLatent(z_t), t, PreciseLatent(eps_pred), schedule, eta, rng).rounded();
}

PreciseLatent blend(const PreciseLatent& background, const PreciseLatent& denoised, const BinaryMask& latent_mask) {
    require_same_shape(background, denoised, "blend");
    const auto& shape = background.shape;
    if (shape.size() != 3 || shape[1] != latent_mask.height() || shape[2] != latent_mask.width()) {
        fail(ErrorCode::shape, "blend mask " + std::to_string(latent_mask.height()) + "x" +
                                   std::to_string(latent_mask.width()) + " does not match latent " +
                                   shape_string(shape));
    }
    PreciseLatent out = background;
    const std::size_t plane = shape[1] * shape[2];
    const auto bits = latent_mask.values();
    for (std::size_t c = 0; c < shape[0]; ++c) {
        for (std::size_t p = 0; p < plane; ++p) {
            if (bits[p]) {
                out.data[c * plane + p] = denoised.data[c * plane + p];
            }
        }
    }
    return out;
}

LatentTensor blend(const LatentTensor& background, const LatentTensor& denoised, const BinaryMask& latent_mask) {
    return blend(PreciseLatent(background), PreciseLatent(denoised), latent_mask).rounded();
}

BinaryMask downsample_mask(const BinaryMask& mask, std::size_t latent_h, std::size_t latent_w) {
    if (latent_h == 0 || latent_w == 0 || mask.height() % latent_h != 0 || mask.width() % latent_w != 0 ||
        mask.height() / latent_h != mask.width() / latent_w) {
        fail(ErrorCode::shape, "mask " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                                   " has no integer stride onto latent " + std::to_string(latent_w) + "x" +
                                   std::to_string(latent_h));
    }
    const std::size_t stride = mask.height() / latent_h;
    BinaryMask out(latent_w, latent_h);
    for (std::size_t y = 0; y < mask.height(); ++y) {
        for (std::size_t x = 0; x < mask.width(); ++x) {
            if (mask.at(x, y)) {
                out.set(x / stride, y / stride, true);
            }
        }
    }
    return out;
}

RetouchConfig RetouchConfig::with_base_seed(std::size_t proposals, std::uint64_t base) {
    RetouchConfig config;
    config.proposals = proposals;
    for (std::size_t k = 0; k < proposals; ++k) {
        config.seeds.push_back(base + k);
    }
    return config;
}

void RetouchConfig::validate() const {
    if (proposals < 1) {
        fail(ErrorCode::invalid_argument, "need at least one proposal");
    }
    if (steps < 1) {
        fail(ErrorCode::invalid_argument, "need at least one timestep");
    }
    if (!(eta >= 0.0 && eta <= 1.0)) {
        fail(ErrorCode::invalid_argument, "eta must lie in [0,1]");
    }
    if (seeds.size() != proposals) {
        fail(ErrorCode::invalid_argument, "expected " + std::to_string(proposals) + " seeds, got " +
                                              std::to_string(seeds.size()));
    }
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        fail(ErrorCode::invalid_argument, "proposal seeds must be pairwise distinct");
    }
}

nlohmann::json RetouchConfig::to_json() const {
    return {{"m", proposals},          {"T", steps},         {"eta", eta},
            {"beta_start", beta_start}, {"beta_end", beta_end}, {"seeds", seeds}};
}

RetouchResult retouch(const Image& image, const BinaryMask& region, const TextPrompt& text,
                      const backends::LatentCodec& codec, const backends::Denoiser& denoiser,
                      const RetouchConfig& config) {
    config.validate();
    if (region.width() != image.width() || region.height() != image.height()) {
        fail(ErrorCode::shape, "region does not match the image size");
    }
    const DiffusionSchedule schedule = DiffusionSchedule::linear(config.steps, config.beta_start, config.beta_end);
    const LatentTensor z0 = codec.encode(image);
    if (z0.shape().size() != 3) {
        fail(ErrorCode::shape, "codec produced a latent of shape " + shape_string(z0.shape()));
    }
    const BinaryMask latent_mask = downsample_mask(region, z0.shape()[1], z0.shape()[2]);
    const PreciseLatent start(z0);

    std::vector<Proposal> proposals(config.proposals);
    parallel_for(config.proposals, config.jobs, [&](std::size_t k) {
        Proposal& p = proposals[k];
        p.index = k;
        p.seed = config.seeds[k];
        try {
            NormalStream rng(p.seed);
            PreciseLatent z(z0.shape());
            z.fill(rng);
            PreciseLatent eps_bg(z0.shape());
            for (std::size_t t = config.steps; t >= 1; --t) {
                const LatentTensor input = z.rounded();
                const LatentTensor eps = denoiser.predict_noise({input, t, schedule.alpha_bar(t), text.text()});
                if (!eps.same_shape(input)) {
                    fail(ErrorCode::shape, "denoiser returned shape " + shape_string(eps.shape()));
                }
                const PreciseLatent stepped = denoise_step(z, t, PreciseLatent(eps), schedule, config.eta, rng);
                eps_bg.fill(rng);
                z = blend(forward_noise(start, t - 1, eps_bg, schedule), stepped, latent_mask);
            }
            LatentTensor final_latent = z.rounded();
            Image decoded = codec.decode(final_latent);
            if (decoded.width() != image.width() || decoded.height() != image.height()) {
                fail(ErrorCode::shape, "decoded proposal is " + std::to_string(decoded.width()) + "x" +
                                           std::to_string(decoded.height()));
            }
            p.image = std::move(decoded);
            p.final_latent = std::move(final_latent);
        } catch (const std::exception& e) {
            p.error = e.what();
        }
    });

    nlohmann::json rows = nlohmann::json::array();
    std::size_t failed = 0;
    for (const auto& p : proposals) {
        nlohmann::json row = {{"index", p.index}, {"seed", p.seed}, {"ok", p.ok()}};
        if (!p.ok()) {
            row["error"] = p.error;
            ++failed;
        }
        rows.push_back(std::move(row));
    }
    if (failed == proposals.size()) {
        fail(ErrorCode::backend, "all " + std::to_string(failed) + " proposals failed; first error: " +
                                     proposals.front().error);
    }
    nlohmann::json report = {{"config", config.to_json()},
                             {"text", text.text()},
                             {"latent_shape", z0.shape()},
                             {"region_pixels", region.count()},
                             {"proposals", std::move(rows)}};
    return {std::move(proposals), std::move(report)};
}

} // namespace retouch::diffusion
