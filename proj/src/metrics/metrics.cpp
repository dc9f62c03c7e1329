#include "metrics/metrics.hpp"

#include "core/error.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace retouch::metrics {

namespace {

void require_same_dims(const Image& a, const Image& b) {
    if (a.width() != b.width() || a.height() != b.height()) {
        fail(ErrorCode::shape, "metric inputs differ in size");
    }
}

std::array<double, kSsimWindow> gaussian_taps() {
    std::array<double, kSsimWindow> taps{};
    const double centre = (kSsimWindow - 1) / 2.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < kSsimWindow; ++i) {
        const double d = static_cast<double>(i) - centre;
        taps[i] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
        sum += taps[i];
    }
    for (double& t : taps) {
        t /= sum;
    }
    return taps;
}

// Separable "valid" filtering of one plane: rows first, then columns.
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t w, std::size_t h,
                                 const std::array<double, kSsimWindow>& taps) {
    const std::size_t ow = w - kSsimWindow + 1;
    const std::size_t oh = h - kSsimWindow + 1;
    std::vector<double> rows(ow * h);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kSsimWindow; ++k) {
                acc += taps[k] * plane[y * w + x + k];
            }
            rows[y * ow + x] = acc;
        }
    }
    std::vector<double> out(ow * oh);
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kSsimWindow; ++k) {
                acc += taps[k] * rows[(y + k) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    return out;
}

} // namespace

double mse(const Image& a, const Image& b) {
    require_same_dims(a, b);
    const auto pa = a.pixels();
    const auto pb = b.pixels();
    double total = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        const double d = static_cast<double>(pa[i]) - pb[i];
        total += d * d;
    }
    return total / static_cast<double>(pa.size());
}

double psnr_from_mse(double mse) {
    if (mse < 0.0 || !std::isfinite(mse)) {
        fail(ErrorCode::invalid_argument, "mse must be a finite value >= 0");
    }
    if (mse == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(1.0 / mse);
}

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse(a, b)); }

double ssim(const Image& a, const Image& b) {
    require_same_dims(a, b);
    const std::size_t w = a.width();
    const std::size_t h = a.height();
    if (w < kSsimWindow || h < kSsimWindow) {
        fail(ErrorCode::shape, "ssim needs images of at least 11x11 pixels");
    }
    const auto taps = gaussian_taps();
    const double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
    const double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);
    const auto pa = a.pixels();
    const auto pb = b.pixels();

    double total = 0.0;
    std::size_t windows = 0;
    for (std::size_t c = 0; c < 3; ++c) {
        std::vector<double> x(w * h), y(w * h), xx(w * h), yy(w * h), xy(w * h);
        for (std::size_t p = 0; p < w * h; ++p) {
            x[p] = pa[p * 3 + c];
            y[p] = pb[p * 3 + c];
            xx[p] = x[p] * x[p];
            yy[p] = y[p] * y[p];
            xy[p] = x[p] * y[p];
        }
        const auto mx = filter_valid(x, w, h, taps);
        const auto my = filter_valid(y, w, h, taps);
        const auto sxx = filter_valid(xx, w, h, taps);
        const auto syy = filter_valid(yy, w, h, taps);
        const auto sxy = filter_valid(xy, w, h, taps);
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double var_x = sxx[i] - mx[i] * mx[i];
            const double var_y = syy[i] - my[i] * my[i];
            const double cov = sxy[i] - mx[i] * my[i];
            total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
                     ((mx[i] * mx[i] + my[i] * my[i] + c1) * (var_x + var_y + c2));
        }
        windows += mx.size();
    }
    return total / static_cast<double>(windows);
}

} // namespace retouch::metrics
