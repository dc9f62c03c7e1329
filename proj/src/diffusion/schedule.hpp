#pragma once

#include <cstddef>
#include <vector>

namespace retouch::diffusion {

// Noise schedule for steps 1..T. alpha_bar(0) = 1 and
// alpha_bar(t) = prod_{s<=t} (1 - beta(s)).
class DiffusionSchedule {
  public:
    // Linear betas from beta_start to beta_end over `steps` steps.
    // Requires steps >= 1 and 0 < beta_start <= beta_end < 1.
    static DiffusionSchedule linear(std::size_t steps, double beta_start, double beta_end);
    // Arbitrary non-decreasing betas in (0,1).
    static DiffusionSchedule from_betas(std::vector<double> betas);

    std::size_t steps() const noexcept { return betas_.size(); }
    double beta(std::size_t t) const { return betas_.at(t - 1); }
    double alpha_bar(std::size_t t) const { return alpha_bars_.at(t); }
    const std::vector<double>& betas() const noexcept { return betas_; }
    const std::vector<double>& alpha_bars() const noexcept { return alpha_bars_; }

  private:
    explicit DiffusionSchedule(std::vector<double> betas);

    std::vector<double> betas_;
    std::vector<double> alpha_bars_;
};

inline constexpr std::size_t kDefaultSteps = 200;
inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 0.02;

} // namespace retouch::diffusion
