#pragma once

#include <cmath>
#include <stdexcept>

#include "pfopt/field.hpp"
#include "pfopt/grid.hpp"

namespace pfopt {

/// Cell-centered restriction: each coarse cell is the mean of its 2^d children.
inline ScalarField restrict_field(const ScalarField& fine, const UniformGrid& coarse_grid) {
    if (!coarse_grid.is_coarse_of(fine.grid()))
        throw std::invalid_argument("restrict_field: grids not factor-2 aligned");
    ScalarField out(coarse_grid);
    const bool is3d = coarse_grid.dim == 3;
    const double w = is3d ? 0.125 : 0.25;
    out.for_interior([&](int i, int j, int k) {
        double s = 0.0;
        const int kk0 = is3d ? 2 * k : 0;
        const int kk1 = is3d ? kk0 + 1 : 0;
        for (int kk = kk0; kk <= kk1; ++kk)
            for (int jj = 2 * j; jj <= 2 * j + 1; ++jj)
                for (int ii = 2 * i; ii <= 2 * i + 1; ++ii) s += fine.at(ii, jj, kk);
        out.at(i, j, k) = w * s;
    });
    out.fill_ghosts();
    return out;
}

/// Cell-centered bilinear/trilinear prolongation. Outside the coarse cell-center
/// hull the mirrored ghost values are used, consistent with Neumann boundaries.
inline ScalarField prolong_field(const ScalarField& coarse, const UniformGrid& fine_grid) {
    if (!coarse.grid().is_coarse_of(fine_grid))
        throw std::invalid_argument("prolong_field: grids not factor-2 aligned");
    ScalarField src = coarse;  // need fresh ghosts
    src.fill_ghosts();
    ScalarField out(fine_grid);
    const bool is3d = fine_grid.dim == 3;
    out.for_interior([&](int i, int j, int k) {
        // 1-D weights per axis: 3/4 on the parent, 1/4 on the parity-side neighbor
        const int ic = i >> 1, jc = j >> 1, kc = k >> 1;
        const int di = (i & 1) ? 1 : -1;
        const int dj = (j & 1) ? 1 : -1;
        const int dk = (k & 1) ? 1 : -1;
        double v;
        if (!is3d) {
            v = 0.5625 * src.at(ic, jc) + 0.1875 * src.at(ic + di, jc) +
                0.1875 * src.at(ic, jc + dj) + 0.0625 * src.at(ic + di, jc + dj);
        } else {
            v = 0.0;
            const double wz[2] = {0.75, 0.25};
            for (int b = 0; b < 2; ++b) {
                const int kk = b == 0 ? kc : kc + dk;
                v += wz[b] * (0.5625 * src.at(ic, jc, kk) + 0.1875 * src.at(ic + di, jc, kk) +
                              0.1875 * src.at(ic, jc + dj, kk) +
                              0.0625 * src.at(ic + di, jc + dj, kk));
            }
        }
        out.at(i, j, k) = v;
    });
    out.fill_ghosts();
    return out;
}

/// Point sampling of a fine field at the cell centers of a coarser aligned
/// grid by bilinear/trilinear interpolation of the nearest fine values.
/// Unlike iterated 2^d averaging this keeps a sharp interface profile sharp:
/// the sampled value only mixes the immediately adjacent fine cells, not a
/// whole (n_f/n_c)^d block. Use it when the coarse field feeds linearized
/// coefficients whose response depends on the local profile shape.
inline ScalarField sample_field(const ScalarField& fine, const UniformGrid& coarse_grid) {
    const UniformGrid& fg = fine.grid();
    if (coarse_grid.dim != fg.dim || fg.n % coarse_grid.n != 0 ||
        !is_power_of_two(fg.n / coarse_grid.n))
        throw std::invalid_argument("sample_field: grids not power-of-two aligned");
    const int r = fg.n / coarse_grid.n;
    if (r == 1) return fine;
    ScalarField src = fine;
    src.fill_ghosts();
    ScalarField out(coarse_grid);
    const bool is3d = coarse_grid.dim == 3;
    // coarse cell center expressed in fine index coordinates
    auto base = [&](int i) {
        const double u = (i + 0.5) * r - 0.5;
        const int i0 = int(u);  // u >= 0.5 for r >= 2
        return std::pair<int, double>(i0, u - i0);
    };
    out.for_interior([&](int i, int j, int k) {
        const auto [i0, fx] = base(i);
        const auto [j0, fy] = base(j);
        if (!is3d) {
            out.at(i, j, k) = (1.0 - fx) * (1.0 - fy) * src.at(i0, j0) +
                              fx * (1.0 - fy) * src.at(i0 + 1, j0) +
                              (1.0 - fx) * fy * src.at(i0, j0 + 1) +
                              fx * fy * src.at(i0 + 1, j0 + 1);
        } else {
            const auto [k0, fz] = base(k);
            double v = 0.0;
            for (int c = 0; c < 8; ++c) {
                const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
                v += (di ? fx : 1.0 - fx) * (dj ? fy : 1.0 - fy) * (dk ? fz : 1.0 - fz) *
                     src.at(i0 + di, j0 + dj, k0 + dk);
            }
            out.at(i, j, k) = v;
        }
    });
    out.fill_ghosts();
    return out;
}

/// Reduction of a phase field onto a coarser storage grid for later use as
/// the linearization point of the backward solve. The backward reaction
/// coefficient depends on the field only through its square, and on a grid
/// that cannot resolve the interface well the consistent coarse coefficient
/// is the block average of the fine square (the homogenized well), not a
/// point sample, which over-amplifies the backward recursion. The magnitude
/// is therefore the root of the averaged square while the sign comes from
/// the sampled value, so the result is still a signed phase snapshot. On
/// matching grids this is the identity.
inline ScalarField reduce_phase_field(const ScalarField& fine, const UniformGrid& coarse_grid) {
    if (fine.grid().n == coarse_grid.n) return fine;
    ScalarField sq(fine.grid());
    sq.for_interior([&](int i, int j, int k) {
        const double v = fine.at(i, j, k);
        sq.at(i, j, k) = v * v;
    });
    sq.fill_ghosts();
    while (sq.n() > coarse_grid.n) {
        const UniformGrid& g = sq.grid();
        sq = restrict_field(sq, UniformGrid(g.dim, g.n / 2, g.origin, g.extent));
    }
    ScalarField out = sample_field(fine, coarse_grid);
    out.for_interior([&](int i, int j, int k) {
        out.at(i, j, k) = std::copysign(std::sqrt(std::max(0.0, sq.at(i, j, k))), out.at(i, j, k));
    });
    out.fill_ghosts();
    return out;
}

/// Repeated prolongation up to `target_level` of the hierarchy.
inline ScalarField prolong_to_level(const ScalarField& field, const GridHierarchy& hierarchy,
                                    int target_level) {
    const int src_level = hierarchy.level_of(field.grid());
    if (target_level < src_level)
        throw std::invalid_argument("prolong_to_level: target below source level");
    ScalarField out = field;
    for (int l = src_level; l < target_level; ++l)
        out = prolong_field(out, hierarchy.grid(l + 1));
    return out;
}

/// Repeated restriction down to `target_level` of the hierarchy.
inline ScalarField restrict_to_level(const ScalarField& field, const GridHierarchy& hierarchy,
                                     int target_level) {
    const int src_level = hierarchy.level_of(field.grid());
    if (target_level > src_level)
        throw std::invalid_argument("restrict_to_level: target above source level");
    ScalarField out = field;
    for (int l = src_level; l > target_level; --l)
        out = restrict_field(out, hierarchy.grid(l - 1));
    return out;
}

}  // namespace pfopt
