#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace acpn {

/// Uniform double in [0,1) from the generator's top 53 bits. The mapping
/// is fixed here so sampled streams are identical across standard
/// libraries (std::uniform_real_distribution is not portable).
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Inverse-CDF draw from a discrete distribution. Consumes exactly one
/// uniform; rounding shortfall lands on the last state.
inline int draw_categorical(std::span<const double> p, std::mt19937_64& rng) {
  double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

}  // namespace acpn
