#include "diffusion/schedule.hpp"

#include "core/error.hpp"

namespace retouch::diffusion {

DiffusionSchedule::DiffusionSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
    if (betas_.empty()) {
        fail(ErrorCode::invalid_argument, "schedule needs at least one step");
    }
    alpha_bars_.reserve(betas_.size() + 1);
    alpha_bars_.push_back(1.0);
    double previous = 0.0;
    for (double beta : betas_) {
        if (!(beta > 0.0 && beta < 1.0)) {
            fail(ErrorCode::invalid_argument, "beta values must lie in (0,1)");
        }
        if (beta < previous) {
            fail(ErrorCode::invalid_argument, "beta values must be non-decreasing");
        }
        previous = beta;
        alpha_bars_.push_back(alpha_bars_.back() * (1.0 - beta));
    }
}

DiffusionSchedule DiffusionSchedule::linear(std::size_t steps, double beta_start, double beta_end) {
    if (steps < 1) {
        fail(ErrorCode::invalid_argument, "schedule needs T >= 1");
    }
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        fail(ErrorCode::invalid_argument, "schedule bounds must satisfy 0 < beta_start <= beta_end < 1");
    }
    std::vector<double> betas(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
        betas[i] = beta_start + (beta_end - beta_start) * frac;
    }
    return DiffusionSchedule(std::move(betas));
}

DiffusionSchedule DiffusionSchedule::from_betas(std::vector<double> betas) {
    return DiffusionSchedule(std::move(betas));
}

} // namespace retouch::diffusion
