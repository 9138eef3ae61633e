#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "pfopt/operators.hpp"

namespace pfopt {

/// Red-black nonlinear Gauss-Seidel for the forward step: per cell visit,
/// solve the scalar cubic cell equation with neighbors frozen by a damped
/// Newton iteration. Updates u in place; ghosts are refreshed after each
/// color. Iterating the cell equation to convergence (rather than taking a
/// single Newton step) keeps the sweep stable through the large transients
/// that appear for large tau or lambda.
inline void smooth_forward(ScalarField& u, const ForwardOperatorSpec& op, int sweeps,
                           const ScalarField* rhs = nullptr, const CellMask* mask = nullptr) {
    op.check(u.grid());
    if (sweeps < 1) throw std::invalid_argument("smooth_forward: sweeps must be >= 1");
    const int n = u.n();
    const bool is3d = u.dim() == 3;
    const int kmax = is3d ? n : 1;
    const double inv_h2 = 1.0 / (u.grid().h * u.grid().h);
    const double twod = 2.0 * u.dim();
    const double inv_tau = 1.0 / op.tau;
    const double s = op.scheme.s, c1 = op.scheme.c1, c2 = op.scheme.c2;
    const double eps = op.eps;
    u.fill_ghosts();
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        for (int color = 0; color < 2; ++color) {
            parallel_for(0, kmax, [&](int k) {
                for (int j = 0; j < n; ++j) {
                    const int i0 = (j + k + color) & 1;
                    for (int i = i0; i < n; i += 2) {
                        if (mask && !mask->active(i, j, k)) continue;
                        const double nb = detail::nb_sum(u, i, j, k, is3d);
                        const double hist = c1 * op.phi_n->at(i, j, k) +
                                            (c2 != 0.0 ? c2 * op.phi_nm1->at(i, j, k) : 0.0);
                        const double src = s * (eps * nb * inv_h2 + op.eta->at(i, j, k) +
                                                op.lambda) +
                                           (rhs ? rhs->at(i, j, k) : 0.0) -
                                           eps * hist * inv_tau;
                        const double lin = eps * inv_tau + s * eps * twod * inv_h2;
                        double v = u.at(i, j, k);
                        for (int it = 0; it < 30; ++it) {
                            const double f = lin * v + s * (v * v * v - v) / eps - src;
                            double df = lin + s * (3.0 * v * v - 1.0) / eps;
                            if (df < 1e-12) df = 1e-12;
                            const double dv = f / df;
                            v -= dv;
                            if (std::abs(dv) < 1e-14 * std::max(1.0, std::abs(v))) break;
                        }
                        if (!std::isfinite(v))
                            throw std::runtime_error(
                                "smooth_forward: non-finite Newton update at cell (" +
                                std::to_string(i) + "," + std::to_string(j) + "," +
                                std::to_string(k) + ")");
                        u.at(i, j, k) = v;
                    }
                }
            });
            u.fill_ghosts();
        }
    }
}

/// Red-black Gauss-Seidel for the linear adjoint step: per cell visit, exact
/// solve of the scalar cell equation with neighbors frozen.
inline void smooth_adjoint(ScalarField& p, const AdjointOperatorSpec& op, int sweeps,
                           const ScalarField* rhs = nullptr, bool homogeneous = false) {
    op.check(p.grid());
    if (sweeps < 1) throw std::invalid_argument("smooth_adjoint: sweeps must be >= 1");
    const int n = p.n();
    const bool is3d = p.dim() == 3;
    const int kmax = is3d ? n : 1;
    const double inv_h2 = 1.0 / (p.grid().h * p.grid().h);
    const double twod = 2.0 * p.dim();
    const double inv_tau = 1.0 / op.tau;
    const double inv_eps2 = 1.0 / (op.eps * op.eps);
    const double s = op.scheme.s, c1 = op.scheme.c1, c2 = op.scheme.c2;
    p.fill_ghosts();
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        for (int color = 0; color < 2; ++color) {
            parallel_for(0, kmax, [&](int k) {
                for (int j = 0; j < n; ++j) {
                    const int i0 = (j + k + color) & 1;
                    for (int i = i0; i < n; i += 2) {
                        const double nb = detail::nb_sum(p, i, j, k, is3d);
                        const double phi = op.phi->at(i, j, k);
                        const double q = (3.0 * phi * phi - 1.0) * inv_eps2;
                        double hist = 0.0;
                        if (!homogeneous)
                            hist = c1 * op.p_np2->at(i, j, k) +
                                   (c2 != 0.0 ? c2 * op.p_np3->at(i, j, k) : 0.0);
                        const double diag = inv_tau + s * (twod * inv_h2 + q);
                        const double b = (rhs ? rhs->at(i, j, k) : 0.0) - hist * inv_tau +
                                         s * nb * inv_h2;
                        const double pnew = b / diag;
                        if (!std::isfinite(pnew))
                            throw std::runtime_error(
                                "smooth_adjoint: non-finite update at cell (" +
                                std::to_string(i) + "," + std::to_string(j) + "," +
                                std::to_string(k) + ")");
                        p.at(i, j, k) = pnew;
                    }
                }
            });
            p.fill_ghosts();
        }
    }
}

}  // namespace pfopt
