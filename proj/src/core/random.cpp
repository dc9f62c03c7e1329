#include "core/random.hpp"

#include <cmath>
#include <numbers>

namespace retouch {

double NormalStream::uniform_open() {
    // (0,1]: never returns 0 so the log below is finite.
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
}

double NormalStream::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

void NormalStream::fill(Tensor& tensor) {
    for (float& v : tensor.data()) {
        v = static_cast<float>(next());
    }
}

} // namespace retouch
