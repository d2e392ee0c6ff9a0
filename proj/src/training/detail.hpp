#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "lcgan/diffcomp/random.hpp"

namespace lcgan::train::detail {

// Fisher-Yates over 0..n-1 with our own generator.
inline std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

inline bool finite(double v) { return std::isfinite(v); }

}  // namespace lcgan::train::detail
