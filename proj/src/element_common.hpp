#pragma once

/// @file element_common.hpp
/// @brief Helpers shared by the element state routines.

#include "mixfem/elements.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mixfem::detail {

/// @brief Accumulates the KKT diagnostics of one site.
inline void record_kkt(ElementResult& r, double yield, double dl, const MaterialParams& mat) {
  r.yield_max = std::max(r.yield_max, yield / mat.sigma_y0);
  r.complementarity_max = std::max(r.complementarity_max, std::abs(dl * yield) / mat.sigma_y0);
}

inline void start_kkt(ElementResult& r) {
  r.yield_max = -std::numeric_limits<double>::infinity();
  r.complementarity_max = 0.0;
}

inline Mat symmetrize(const Mat& K) { return 0.5 * (K + K.transpose()); }

} // namespace mixfem::detail
