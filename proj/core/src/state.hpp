#pragma once

// Packing of grid measures into flat integrator state vectors:
// [w_1 .. w_n, overflow_mass, overflow_number] per measure.

#include <cstddef>
#include <span>

#include "smolsens/measures.hpp"

namespace smolsens::detail {

inline std::size_t block_size(std::size_t n_max) { return n_max + 2; }

inline void pack(const GridMeasure& mu, std::span<double> out) {
  const auto w = mu.weights();
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i];
  out[w.size()] = mu.overflow_mass();
  out[w.size() + 1] = mu.overflow_number();
}

inline GridMeasure unpack(std::span<const double> in, std::size_t n_max) {
  GridMeasure mu(n_max);
  for (std::size_t i = 0; i < n_max; ++i) mu.weights()[i] = in[i];
  mu.set_overflow(in[n_max], in[n_max + 1]);
  return mu;
}

/// out += scale * mu, block-wise.
inline void accumulate(const GridMeasure& mu, double scale, std::span<double> out) {
  const auto w = mu.weights();
  for (std::size_t i = 0; i < w.size(); ++i) out[i] += scale * w[i];
  out[w.size()] += scale * mu.overflow_mass();
  out[w.size() + 1] += scale * mu.overflow_number();
}

}  // namespace smolsens::detail
