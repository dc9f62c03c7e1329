#pragma once

#include "backends/contracts.hpp"
#include "core/random.hpp"
#include "core/types.hpp"
#include "diffusion/schedule.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace retouch::diffusion {

// Double-precision latent. The sampler keeps its running state in this form
// so rounding does not accumulate over hundreds of steps; backends still
// see float32 tensors.
struct PreciseLatent {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    PreciseLatent() = default;
    explicit PreciseLatent(std::vector<std::size_t> shape); // zeros
    explicit PreciseLatent(const LatentTensor& tensor);

    // Rounds to float32; invalid_argument if a value is not finite.
    LatentTensor rounded() const;
    bool same_shape(const PreciseLatent& other) const noexcept { return shape == other.shape; }
    void fill(NormalStream& rng);
};

// z_t = sqrt(abar_t) * z0 + sqrt(1 - abar_t) * eps, for 0 <= t <= T.
LatentTensor forward_noise(const LatentTensor& z0, std::size_t t, const LatentTensor& eps,
                           const DiffusionSchedule& schedule);
PreciseLatent forward_noise(const PreciseLatent& z0, std::size_t t, const PreciseLatent& eps,
                            const DiffusionSchedule& schedule);

// One DDIM update from step t to t-1 (1 <= t <= T):
//   x0    = (z_t - sqrt(1 - abar_t) * eps) / sqrt(abar_t)
//   sigma = eta * sqrt((1 - abar_{t-1}) / (1 - abar_t)) * sqrt(1 - abar_t / abar_{t-1})
//   z     = sqrt(abar_{t-1}) * x0 + sqrt(1 - abar_{t-1} - sigma^2) * eps + sigma * xi
// xi is drawn from `rng` only when sigma > 0.
LatentTensor denoise_step(const LatentTensor& z_t, std::size_t t, const LatentTensor& eps_pred,
                          const DiffusionSchedule& schedule, double eta, NormalStream& rng);
PreciseLatent denoise_step(const PreciseLatent& z_t, std::size_t t, const PreciseLatent& eps_pred,
                           const DiffusionSchedule& schedule, double eta, NormalStream& rng);

// background where mask = 0, denoised where mask = 1; the (H,W) mask is
// broadcast over the latent's channels.
LatentTensor blend(const LatentTensor& background, const LatentTensor& denoised, const BinaryMask& latent_mask);
PreciseLatent blend(const PreciseLatent& background, const PreciseLatent& denoised, const BinaryMask& latent_mask);

// Max-pools a pixel mask down to (latent_h, latent_w): a cell is set when any
// covered pixel is. The stride must be an integer and equal on both axes.
BinaryMask downsample_mask(const BinaryMask& mask, std::size_t latent_h, std::size_t latent_w);

inline constexpr std::size_t kDefaultProposals = 4;

struct RetouchConfig {
    std::size_t proposals = kDefaultProposals;
    std::size_t steps = kDefaultSteps;
    double eta = 1.0;
    double beta_start = kDefaultBetaStart;
    double beta_end = kDefaultBetaEnd;
    std::vector<std::uint64_t> seeds; // one per proposal, pairwise distinct
    unsigned jobs = 1;                // not part of the result

    // seeds = base, base+1, ..., base+m-1
    static RetouchConfig with_base_seed(std::size_t proposals, std::uint64_t base);
    void validate() const;
    nlohmann::json to_json() const;
};

struct Proposal {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::optional<Image> image;
    std::optional<LatentTensor> final_latent;
    std::string error; // set when the proposal failed

    bool ok() const noexcept { return image.has_value(); }
};

struct RetouchResult {
    std::vector<Proposal> proposals; // by index
    nlohmann::json report;
};

// Blended latent sampling. For each proposal: z_T ~ N(0, I); for t = T..1,
// z' = denoise_step(z_t, t, eps_theta(z_t, t, text)), then the unmasked cells
// are replaced by z0 forward-noised to t-1 with fresh noise from the same
// stream. The last step leaves unmasked cells equal to encode(image).
// The state is kept in double precision and rounded for each denoiser call
// and once at the end.
// A failing proposal is recorded and skipped; if all fail, backend error.
RetouchResult retouch(const Image& image, const BinaryMask& region, const TextPrompt& text,
                      const backends::LatentCodec& codec, const backends::Denoiser& denoiser,
                      const RetouchConfig& config);

} // namespace retouch::diffusion
