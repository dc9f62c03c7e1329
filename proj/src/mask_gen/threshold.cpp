#include "core/error.hpp"
#include "mask_gen/mask_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace retouch::maskgen {

namespace {

void check_scores(std::span<const double> scores) {
    if (scores.empty()) {
        fail(ErrorCode::invalid_argument, "threshold needs at least one score");
    }
    if (std::any_of(scores.begin(), scores.end(), [](double s) { return !std::isfinite(s); })) {
        fail(ErrorCode::invalid_argument, "scores must be finite");
    }
}

} // namespace

ThresholdResult adaptive_threshold(std::span<const double> scores, double floor) {
    check_scores(scores);
    if (!(floor >= -1.0 && floor <= 1.0)) {
        fail(ErrorCode::invalid_argument, "score floor must lie in [-1,1]");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    ThresholdResult result;
    std::size_t keep = 0;
    if (order.size() == 1) {
        keep = 1;
        result.tau = scores[order[0]];
    } else {
        double best_gap = -1.0;
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            const double gap = scores[order[i]] - scores[order[i + 1]];
            if (gap > best_gap) {
                best_gap = gap;
                keep = i + 1;
            }
        }
        if (best_gap < kFlatGapEpsilon) {
            keep = order.size();
            result.tau = scores[order.back()];
        } else {
            result.tau = (scores[order[keep - 1]] + scores[order[keep]]) / 2.0;
        }
    }
    for (std::size_t i = 0; i < keep; ++i) {
        if (scores[order[i]] >= floor) {
            result.selected.push_back(order[i]);
        }
    }
    std::sort(result.selected.begin(), result.selected.end());
    return result;
}

ThresholdResult fixed_threshold(std::span<const double> scores, double tau) {
    check_scores(scores);
    if (!std::isfinite(tau)) {
        fail(ErrorCode::invalid_argument, "fixed threshold must be finite");
    }
    ThresholdResult result{tau, {}};
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] >= tau) {
            result.selected.push_back(i);
        }
    }
    return result;
}

} // namespace retouch::maskgen
