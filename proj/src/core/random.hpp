#pragma once

#include "core/types.hpp"

#include <cstdint>
#include <random>

namespace retouch {

// Seeded standard-normal stream. std::normal_distribution is
// implementation-defined, so the transform is done here (Box-Muller on
// 53-bit uniforms from mt19937_64) to keep draws identical across platforms.
class NormalStream {
  public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    double next();
    void fill(Tensor& tensor);

  private:
    double uniform_open();

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace retouch
