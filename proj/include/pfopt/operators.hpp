#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pfopt/field.hpp"
#include "pfopt/parallel.hpp"

namespace pfopt {

/// Unified BDF coefficients: the discrete step reads
///   u + c1*h1 + c2*h2 on the time-difference side, with right-hand-side scale s.
/// BDF1 is BDF2 with coefficients (1, -1, 0) and unit scale, so one code path
/// serves both.
struct StepScheme {
    double c1 = -4.0 / 3.0;
    double c2 = 1.0 / 3.0;
    double s = 2.0 / 3.0;
    static StepScheme bdf2() { return {-4.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0}; }
    static StepScheme bdf1() { return {-1.0, 0.0, 1.0}; }
};

/// Interior cell mask (1 = active), row-major, no ghosts. An empty mask means
/// "all cells active".
struct CellMask {
    int n = 0;
    int dim = 2;
    std::vector<std::uint8_t> bits;

    CellMask() = default;
    CellMask(int n_, int dim_, bool value = true)
        : n(n_), dim(dim_), bits(std::size_t(n_) * n_ * (dim_ == 3 ? n_ : 1), value ? 1 : 0) {}

    bool active(int i, int j, int k) const {
        return bits[(std::size_t(k) * n + std::size_t(j)) * n + std::size_t(i)] != 0;
    }
    void set(int i, int j, int k, bool v) {
        bits[(std::size_t(k) * n + std::size_t(j)) * n + std::size_t(i)] = v ? 1 : 0;
    }
    std::size_t count() const {
        std::size_t c = 0;
        for (auto b : bits) c += b;
        return c;
    }
};

/// Coefficients of the implicit forward Allen-Cahn step on one grid level.
/// The discrete equation (residual form, per cell) is
///   eps*(u + c1*phi_n + c2*phi_nm1)/tau
///     = s*( eps*D(u) - (u^3 - u)/eps + eta + lambda ) + rhs,
/// where rhs carries the FAS coarse-level correction (zero on the finest level).
struct ForwardOperatorSpec {
    double eps = 0.1;
    double tau = 1.0;
    double lambda = 0.0;
    StepScheme scheme;
    const ScalarField* eta = nullptr;
    const ScalarField* phi_n = nullptr;    // history phi^n
    const ScalarField* phi_nm1 = nullptr;  // history phi^{n-1}; may be null when c2 == 0

    void check(const UniformGrid& g) const {
        if (eps <= 0.0 || tau <= 0.0)
            throw std::invalid_argument("ForwardOperatorSpec: eps and tau must be positive");
        if (!eta || !phi_n || (scheme.c2 != 0.0 && !phi_nm1))
            throw std::invalid_argument("ForwardOperatorSpec: missing coefficient fields");
        if (!eta->grid().same_as(g) || !phi_n->grid().same_as(g))
            throw std::invalid_argument("ForwardOperatorSpec: coefficient fields on wrong grid");
    }
};

/// Coefficients of the implicit adjoint step on one grid level. The frozen
/// state phi enters the reaction term (3*phi^2 - 1)/eps^2. Discrete equation:
///   (p + c1*p_np2 + c2*p_np3)/tau + s*( D(p) - ((3*phi^2 - 1)/eps^2)*p )... see
/// adjoint_residual for the sign convention actually applied.
struct AdjointOperatorSpec {
    double eps = 0.1;
    double tau = 1.0;
    StepScheme scheme;
    const ScalarField* phi = nullptr;     // frozen state at the step being solved
    const ScalarField* p_np2 = nullptr;   // history p^{n+2}
    const ScalarField* p_np3 = nullptr;   // history p^{n+3}; may be null when c2 == 0

    void check(const UniformGrid& g) const {
        if (eps <= 0.0 || tau <= 0.0)
            throw std::invalid_argument("AdjointOperatorSpec: eps and tau must be positive");
        if (!phi || !p_np2 || (scheme.c2 != 0.0 && !p_np3))
            throw std::invalid_argument("AdjointOperatorSpec: missing coefficient fields");
        if (!phi->grid().same_as(g) || !p_np2->grid().same_as(g))
            throw std::invalid_argument("AdjointOperatorSpec: coefficient fields on wrong grid");
    }
};

namespace detail {

inline double nb_sum(const ScalarField& u, int i, int j, int k, bool is3d) {
    double s = u.at(i - 1, j, k) + u.at(i + 1, j, k) + u.at(i, j - 1, k) + u.at(i, j + 1, k);
    if (is3d) s += u.at(i, j, k - 1) + u.at(i, j, k + 1);
    return s;
}

}  // namespace detail

/// r = rhs - N(u) cellwise for the implicit forward step; ghosts of u must be
/// filled. `rhs` may be null (finest level). Inactive cells get r = 0.
inline void forward_residual_into(const ScalarField& u, const ForwardOperatorSpec& op,
                                  ScalarField& out, const ScalarField* rhs = nullptr,
                                  const CellMask* mask = nullptr) {
    op.check(u.grid());
    const int n = u.n();
    const bool is3d = u.dim() == 3;
    const int kmax = is3d ? n : 1;
    const double inv_h2 = 1.0 / (u.grid().h * u.grid().h);
    const double twod = 2.0 * u.dim();
    const double inv_tau = 1.0 / op.tau;
    const double s = op.scheme.s, c1 = op.scheme.c1, c2 = op.scheme.c2;
    parallel_for(0, kmax, [&](int k) {
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                if (mask && !mask->active(i, j, k)) {
                    out.at(i, j, k) = 0.0;
                    continue;
                }
                const double uc = u.at(i, j, k);
                const double lap = (detail::nb_sum(u, i, j, k, is3d) - twod * uc) * inv_h2;
                const double hist =
                    uc + c1 * op.phi_n->at(i, j, k) + (c2 != 0.0 ? c2 * op.phi_nm1->at(i, j, k) : 0.0);
                const double N = op.eps * hist * inv_tau -
                                 s * (op.eps * lap - (uc * uc * uc - uc) / op.eps +
                                      op.eta->at(i, j, k) + op.lambda);
                out.at(i, j, k) = (rhs ? rhs->at(i, j, k) : 0.0) - N;
            }
    });
    out.fill_ghosts();
}

inline ScalarField forward_residual(const ScalarField& u, const ForwardOperatorSpec& op,
                                    const ScalarField* rhs = nullptr) {
    ScalarField r(u.grid());
    forward_residual_into(u, op, r, rhs);
    return r;
}

/// r = rhs - A(p) cellwise for the implicit adjoint step, where
///   A(p) = (p + c1*p_np2 + c2*p_np3)/tau - s*( D(p) - ((3*phi^2 - 1)/eps^2)*p ).
/// A(p) = 0 is the stable backward-in-time discretization of the adjoint PDE.
inline void adjoint_residual_into(const ScalarField& p, const AdjointOperatorSpec& op,
                                  ScalarField& out, const ScalarField* rhs = nullptr,
                                  bool homogeneous = false) {
    op.check(p.grid());
    const int n = p.n();
    const bool is3d = p.dim() == 3;
    const int kmax = is3d ? n : 1;
    const double inv_h2 = 1.0 / (p.grid().h * p.grid().h);
    const double twod = 2.0 * p.dim();
    const double inv_tau = 1.0 / op.tau;
    const double inv_eps2 = 1.0 / (op.eps * op.eps);
    const double s = op.scheme.s, c1 = op.scheme.c1, c2 = op.scheme.c2;
    parallel_for(0, kmax, [&](int k) {
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double pc = p.at(i, j, k);
                const double lap = (detail::nb_sum(p, i, j, k, is3d) - twod * pc) * inv_h2;
                const double phi = op.phi->at(i, j, k);
                const double q = (3.0 * phi * phi - 1.0) * inv_eps2;
                double hist = pc;
                if (!homogeneous)
                    hist += c1 * op.p_np2->at(i, j, k) +
                            (c2 != 0.0 ? c2 * op.p_np3->at(i, j, k) : 0.0);
                const double A = hist * inv_tau - s * (lap - q * pc);
                out.at(i, j, k) = (rhs ? rhs->at(i, j, k) : 0.0) - A;
            }
    });
    out.fill_ghosts();
}

inline ScalarField adjoint_residual(const ScalarField& p, const AdjointOperatorSpec& op,
                                    const ScalarField* rhs = nullptr) {
    ScalarField r(p.grid());
    adjoint_residual_into(p, op, r, rhs);
    return r;
}

}  // namespace pfopt
