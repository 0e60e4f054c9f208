#pragma once

#include <cmath>

namespace medsel {

// Two-sided p-value of a standard normal z-score.
inline double two_sided_normal_p(double zscore) {
  return std::erfc(std::abs(zscore) / std::sqrt(2.0));
}

}  // namespace medsel
