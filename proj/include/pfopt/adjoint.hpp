#pragma once

#include <cstdint>
#include <stdexcept>

#include "pfopt/multigrid.hpp"
#include "pfopt/store.hpp"

namespace pfopt {

/// p(T) = phi(T) - phi_obs, pointwise on the storage level.
inline ScalarField terminal_condition(const ScalarField& phi_T, const ScalarField& phi_obs) {
    phi_T.require_same_grid(phi_obs, "terminal_condition");
    ScalarField p(phi_T.grid());
    p.for_interior([&](int i, int j, int k) {
        p.at(i, j, k) = phi_T.at(i, j, k) - phi_obs.at(i, j, k);
    });
    p.fill_ghosts();
    return p;
}

struct AdjointDiagnostics {
    std::uint64_t vcycles = 0;
    std::uint64_t work = 0;
};

/// Backward-in-time integration of the linear adjoint equation on the storage
/// level, consuming the stored states. One BDF1 step at the terminal end, BDF2
/// afterwards; the stored phi at the same time index enters as data.
inline AdjointDiagnostics solve_adjoint(SpaceTimeStore& store, const ScalarField& phi_obs,
                                        const GridHierarchy& hierarchy, double eps, double tau,
                                        const CycleConfig& cfg) {
    const int Nt = store.num_steps();
    for (int s = 0; s <= Nt; ++s)
        if (!store.has_phi(s))
            throw std::runtime_error("solve_adjoint: store is missing phi at step " +
                                     std::to_string(s));
    AdjointDiagnostics diag;
    ScalarField phi_T = store.has_phi_T_fine()
                            ? sample_field(store.phi_T_fine(), hierarchy.storage_grid())
                            : store.phi(Nt);
    store.set_p(Nt, terminal_condition(phi_T, phi_obs));

    for (int step = Nt - 1; step >= 0; --step) {
        const bool first_backward = step == Nt - 1;
        AdjointOperatorSpec op;
        op.eps = eps;
        op.tau = tau;
        op.scheme = first_backward ? StepScheme::bdf1() : StepScheme::bdf2();
        op.phi = &store.phi(step);
        op.p_np2 = &store.p(step + 1);
        op.p_np3 = first_backward ? nullptr : &store.p(step + 2);

        LinearAdjointCycler cycler(hierarchy, cfg, op, hierarchy.storage_level);
        ScalarField p = store.p(step + 1);  // warm start from the neighboring step
        SolveResult r = cycler.solve(p);
        diag.vcycles += std::uint64_t(r.cycles);
        diag.work += cycler.work();
        store.set_p(step, p);
    }
    return diag;
}

}  // namespace pfopt
