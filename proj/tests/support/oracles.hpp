#pragma once

// Reference implementations written independently of the library code.
#include "assessment/assessment.hpp"
#include "mask_gen/mask_gen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

namespace retouch::testing {

// Every score value s defines the cut "keep everything >= s"; its gap is
// min(kept) - max(dropped). The widest gap wins, ties going to the smallest
// kept set.
inline maskgen::ThresholdResult gap_oracle(const std::vector<double>& scores, double floor) {
    const std::size_t n = scores.size();
    std::set<std::size_t> keep;
    double tau = 0.0;
    if (n == 1) {
        keep.insert(0);
        tau = scores[0];
    } else {
        double best_gap = -1.0;
        std::size_t best_size = 0;
        std::set<std::size_t> best;
        for (double s : scores) {
            std::set<std::size_t> kept;
            double lo = INFINITY, hi = -INFINITY;
            for (std::size_t i = 0; i < n; ++i) {
                if (scores[i] >= s) {
                    kept.insert(i);
                    lo = std::min(lo, scores[i]);
                } else {
                    hi = std::max(hi, scores[i]);
                }
            }
            if (kept.size() == n) {
                continue;
            }
            const double gap = lo - hi;
            if (gap > best_gap || (gap == best_gap && kept.size() < best_size)) {
                best_gap = gap;
                best_size = kept.size();
                best = kept;
                tau = (lo + hi) / 2.0;
            }
        }
        if (best_gap < maskgen::kFlatGapEpsilon) {
            for (std::size_t i = 0; i < n; ++i) {
                keep.insert(i);
            }
            tau = *std::min_element(scores.begin(), scores.end());
        } else {
            keep = best;
        }
    }
    maskgen::ThresholdResult r;
    r.tau = tau;
    for (std::size_t i : keep) {
        if (scores[i] >= floor) {
            r.selected.push_back(i);
        }
    }
    return r;
}

// 1..10 scores in [-1, 1]; some vectors are rounded (ties), constant, or
// contain a near-flat pair.
inline std::vector<double> random_scores(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> s(1 + rng() % 10);
    const int style = static_cast<int>(rng() % 4);
    for (double& v : s) {
        v = u(rng);
        if (style == 1) {
            v = std::round(v * 10.0) / 10.0;
        }
    }
    if (style == 2) {
        std::fill(s.begin(), s.end(), s[0]);
    }
    if (style == 3 && s.size() > 1) {
        s[1] = s[0] + 1e-9;
    }
    return s;
}

inline maskgen::GridCell cell_oracle(double cx, double cy, std::size_t w, std::size_t h) {
    const int row = static_cast<int>(std::floor(3.0 * cy / static_cast<double>(h)));
    const int col = static_cast<int>(std::floor(3.0 * cx / static_cast<double>(w)));
    return {std::clamp(row, 0, 2), std::clamp(col, 0, 2)};
}

inline bool location_oracle(maskgen::LocationKind kind, maskgen::GridCell c) {
    using K = maskgen::LocationKind;
    switch (kind) {
    case K::none:
        return true;
    case K::left:
        return c.col == 0;
    case K::right:
        return c.col == 2;
    case K::top:
        return c.row == 0;
    case K::bottom:
        return c.row == 2;
    case K::center:
        return c.row == 1 && c.col == 1;
    case K::top_left:
        return c.row == 0 && c.col == 0;
    case K::top_right:
        return c.row == 0 && c.col == 2;
    case K::bottom_left:
        return c.row == 2 && c.col == 0;
    case K::bottom_right:
        return c.row == 2 && c.col == 2;
    }
    return false;
}

// Straight argmax over cma - alpha * iqa with disabled terms zeroed; first wins ties.
inline std::size_t argmax_oracle(const std::vector<assessment::AssessmentScore>& rows, double alpha, bool cma_on,
                                 bool iqa_on) {
    std::size_t best = 0;
    double best_value = -INFINITY;
    for (const auto& r : rows) {
        const double v = (cma_on ? r.cma : 0.0) - alpha * (iqa_on ? r.iqa : 0.0);
        if (v > best_value) {
            best_value = v;
            best = r.proposal_index;
        }
    }
    return best;
}

// SSIM of two constant images: the variance and covariance terms cancel,
// leaving the luminance term with C1 = (0.01 * 1)^2.
inline double constant_ssim_oracle(double c1, double c2) {
    const double k = 0.01 * 0.01;
    return (2.0 * c1 * c2 + k) / (c1 * c1 + c2 * c2 + k);
}

} // namespace retouch::testing
