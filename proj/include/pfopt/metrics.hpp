#pragma once

#include "pfopt/field.hpp"

namespace pfopt {

/// Grid-comparison metric: mean of squared differences over interior cells
/// (sum / N^d). Note this is the literal tabulated quantity -- no cell-area
/// factor and no square root. Callers prolong to a common grid first.
inline double compute_error_metric(const ScalarField& a, const ScalarField& b) {
    a.require_same_grid(b, "compute_error_metric");
    double s = 0.0;
    a.for_interior([&](int i, int j, int k) {
        const double d = a.at(i, j, k) - b.at(i, j, k);
        s += d * d;
    });
    return s / double(a.grid().cell_count());
}

}  // namespace pfopt
