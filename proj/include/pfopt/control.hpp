#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfopt/adjoint.hpp"
#include "pfopt/forward.hpp"

namespace pfopt {

struct StoppingCriteria {
    double absolute_J = 0.0;    // stop when J < absolute_J (disabled if <= 0)
    double relative_dJ = 0.0;   // stop when |dJ|/J_prev < relative_dJ (disabled if <= 0)
    double absolute_dJ = 0.0;   // stop when |dJ| < absolute_dJ (disabled if <= 0)
    int max_iterations = 50;    // accepted control iterations (always enabled)

    void check() const {
        if (absolute_J <= 0.0 && relative_dJ <= 0.0 && absolute_dJ <= 0.0 &&
            max_iterations < 1)
            throw std::invalid_argument("StoppingCriteria: no criterion enabled");
    }
};

/// J = fidelity + theta-weighted space-time regularization of the control,
/// with a rectangle rule in time over the stored steps.
inline double objective(const ScalarField& phi_T, const ScalarField& phi_obs,
                        const SpaceTimeStore& eta_store, double theta, double tau) {
    phi_T.require_same_grid(phi_obs, "objective");
    if (theta <= 0.0) throw std::invalid_argument("objective: theta must be positive");
    ScalarField diff2(phi_T.grid());
    diff2.for_interior([&](int i, int j, int k) {
        const double d = phi_T.at(i, j, k) - phi_obs.at(i, j, k);
        diff2.at(i, j, k) = d * d;
    });
    double J = 0.5 * diff2.integrate();
    double reg = 0.0;
    for (int s = 1; s <= eta_store.num_steps(); ++s) {
        const ScalarField& e = eta_store.eta(s);
        ScalarField e2(e.grid());
        e2.for_interior([&](int i, int j, int k) {
            e2.at(i, j, k) = e.at(i, j, k) * e.at(i, j, k);
        });
        reg += e2.integrate();
    }
    return J + 0.5 * theta * tau * reg;
}

/// L2 gradient of J with respect to the control at one step: theta*eta + p/eps.
inline ScalarField gradient_field(const ScalarField& eta_n, const ScalarField& p_n, double theta,
                                  double eps) {
    eta_n.require_same_grid(p_n, "gradient_field");
    ScalarField g(eta_n.grid());
    g.for_interior([&](int i, int j, int k) {
        g.at(i, j, k) = theta * eta_n.at(i, j, k) + p_n.at(i, j, k) / eps;
    });
    g.fill_ghosts();
    return g;
}

struct ControlConfig {
    double theta = 0.01;
    double alpha0 = 0.1;
    double p_l = 0.5;
    double p_u = 1.1;
    double alpha_min = 0.0;  // <= 0 means 1e-3 * alpha0
    bool adaptive_alpha = true;
    bool fidelity_on_storage = false;  // evaluate the fidelity term on the storage level
    StoppingCriteria stop;

    double effective_alpha_min() const { return alpha_min > 0.0 ? alpha_min : 1e-3 * alpha0; }
};

/// Current control iterate bookkeeping for the adaptive-alpha loop.
struct ControlState {
    double alpha = 0.1;
    std::vector<double> J_accepted;  // strictly decreasing when adaptive
    int iteration = 0;               // accepted iterations so far (the "ell" index)
    int restarts = 0;
    int consecutive_restarts = 0;
    bool have_backup = false;
    std::vector<ScalarField> eta_backup;  // full space-time copy, steps 1..N_t
    double p_l = 0.5, p_u = 1.1, alpha_min = 1e-4;
};

enum class AlphaDecision { Accept, Restart };

/// Accept/restart step of the adaptive-alpha algorithm: grow alpha on descent,
/// shrink (clamped at alpha_min) and restart from backup on an increase.
inline AlphaDecision adaptive_alpha_step(ControlState& state, double J_new) {
    if (state.iteration == 0 || state.J_accepted.empty() ||
        J_new < state.J_accepted.back()) {
        if (state.iteration > 0) state.alpha *= state.p_u;
        state.J_accepted.push_back(J_new);
        state.consecutive_restarts = 0;
        return AlphaDecision::Accept;
    }
    if (!state.have_backup)
        throw std::runtime_error("adaptive_alpha_step: restart requested with no backup");
    state.alpha = std::max(state.alpha * state.p_l, state.alpha_min);
    ++state.restarts;
    ++state.consecutive_restarts;
    return AlphaDecision::Restart;
}

/// Steepest-descent update eta <- eta - alpha*(theta*eta + p/eps) at every
/// step; the previous eta is saved to the backup first.
inline void update_control(ControlState& state, SpaceTimeStore& store, double theta,
                           double eps) {
    const int Nt = store.num_steps();
    state.eta_backup.clear();
    state.eta_backup.reserve(std::size_t(Nt) + 1);
    state.eta_backup.push_back(ScalarField(store.storage_grid()));  // index 0 placeholder
    for (int s = 1; s <= Nt; ++s) state.eta_backup.push_back(store.eta(s));
    state.have_backup = true;
    for (int s = 1; s <= Nt; ++s) {
        ScalarField& e = store.eta(s);
        const ScalarField& p = store.p(s);
        e.for_interior([&](int i, int j, int k) {
            e.at(i, j, k) -= state.alpha * (theta * e.at(i, j, k) + p.at(i, j, k) / eps);
        });
        e.fill_ghosts();
    }
}

/// Copy the backup control back into the store unchanged (used when the step
/// size has collapsed and the last accepted iterate is the final answer).
inline void restore_control_from_backup(const ControlState& state, SpaceTimeStore& store) {
    if (!state.have_backup)
        throw std::runtime_error("restore_control_from_backup: no backup");
    for (int s = 1; s <= store.num_steps(); ++s) store.eta(s) = state.eta_backup[std::size_t(s)];
}

/// Rebuild eta from the backup with the current (reduced) alpha after a failed
/// attempt; p in the store still belongs to the backup iterate.
inline void recompute_control_from_backup(ControlState& state, SpaceTimeStore& store,
                                          double theta, double eps) {
    if (!state.have_backup)
        throw std::runtime_error("recompute_control_from_backup: no backup");
    for (int s = 1; s <= store.num_steps(); ++s) {
        const ScalarField& b = state.eta_backup[std::size_t(s)];
        const ScalarField& p = store.p(s);
        ScalarField& e = store.eta(s);
        e.for_interior([&](int i, int j, int k) {
            e.at(i, j, k) =
                b.at(i, j, k) - state.alpha * (theta * b.at(i, j, k) + p.at(i, j, k) / eps);
        });
        e.fill_ghosts();
    }
}

struct IterationLogRow {
    int attempt = 0;       // running attempt counter, restarts included
    int iteration = 0;     // accepted-iteration index at the time of the attempt
    double J = 0.0;
    double alpha = 0.0;    // alpha after the decision
    bool accepted = false;
};

/// Per-forward-sweep constraint statistics (one entry per attempt).
struct ForwardRunStats {
    int eta_iteration = 0;
    double mean_lambda_iters = 0.0;  // nonlinear solves per step
    double max_mass_error = 0.0;     // max over steps of |mass - M_target|
};

struct OptimizeDiagnostics {
    std::uint64_t vcycles_forward = 0;
    std::uint64_t vcycles_adjoint = 0;
    std::uint64_t lambda_solves = 0;
    std::uint64_t work_forward = 0;
    std::uint64_t work_adjoint = 0;
    int restarts = 0;
    int accepted_iterations = 0;
    double wall_seconds = 0.0;
    std::uint64_t peak_store_bytes = 0;
    double max_mass_error = 0.0;
    std::string stop_reason;
    std::vector<int> lambda_iters_last_forward;
    std::vector<ForwardRunStats> forward_runs;
};

struct OptimizeResult {
    SpaceTimeStore store;
    std::vector<double> J_history;          // accepted values
    std::vector<IterationLogRow> log;       // every attempt
    OptimizeDiagnostics diag;
};

struct OptimizeInputs {
    const GridHierarchy* hierarchy = nullptr;
    ScalarField phi0_fine;         // solve level
    ScalarField phi_obs_fine;      // solve level
    ScalarField phi_obs_storage;   // storage level
    ForwardConfig fwd;
    ControlConfig ctl;
    MaskProvider* amr = nullptr;
};

/// Full outer loop: forward solve, objective, adaptive-alpha decision, adjoint
/// solve, control update, until a stopping criterion fires.
inline OptimizeResult optimize(const OptimizeInputs& in) {
    in.ctl.stop.check();
    const GridHierarchy& hier = *in.hierarchy;
    const auto t0 = std::chrono::steady_clock::now();

    OptimizeResult out;
    out.store = SpaceTimeStore(hier.storage_grid(), in.fwd.num_steps);
    ForwardIntegrator integrator(hier, in.fwd);

    ControlState state;
    state.alpha = in.ctl.alpha0;
    state.p_l = in.ctl.p_l;
    state.p_u = in.ctl.p_u;
    state.alpha_min = in.ctl.effective_alpha_min();

    int attempt = 0;
    std::string stop_reason;
    for (;;) {
        ForwardDiagnostics fdiag =
            integrator.solve_forward(in.phi0_fine, out.store, state.iteration, in.amr);
        out.diag.vcycles_forward += fdiag.vcycles;
        out.diag.lambda_solves += fdiag.lambda_solves;
        out.diag.work_forward += fdiag.work;
        out.diag.max_mass_error = std::max(out.diag.max_mass_error, fdiag.max_mass_error);
        out.diag.lambda_iters_last_forward = fdiag.lambda_iters_per_step;
        {
            double mean = 0.0;
            for (int c : fdiag.lambda_iters_per_step) mean += c;
            if (!fdiag.lambda_iters_per_step.empty())
                mean /= double(fdiag.lambda_iters_per_step.size());
            out.diag.forward_runs.push_back({state.iteration, mean, fdiag.max_mass_error});
        }
        out.diag.peak_store_bytes =
            std::max(out.diag.peak_store_bytes, out.store.accounted_bytes());

        double J;
        if (in.ctl.fidelity_on_storage) {
            ScalarField phi_T = sample_field(out.store.phi_T_fine(), hier.storage_grid());
            J = objective(phi_T, in.phi_obs_storage, out.store, in.ctl.theta, in.fwd.tau);
        } else {
            J = objective(out.store.phi_T_fine(), in.phi_obs_fine, out.store, in.ctl.theta,
                          in.fwd.tau);
        }

        ++attempt;
        const double alpha_before = state.alpha;
        AlphaDecision decision = AlphaDecision::Accept;
        if (in.ctl.adaptive_alpha) {
            decision = adaptive_alpha_step(state, J);
        } else {
            state.J_accepted.push_back(J);
        }
        out.log.push_back({attempt, state.iteration, J,
                           state.alpha, decision == AlphaDecision::Accept});

        if (decision == AlphaDecision::Restart) {
            out.store.invalidate_lambda_attempt();
            // a rejection at the minimum step size means no further descent is
            // resolvable (the objective noise floor of the inexact constraint
            // solve has been reached); keep the last accepted control and stop
            if (alpha_before <= state.alpha_min) {
                restore_control_from_backup(state, out.store);
                stop_reason = "alpha_floor";
                break;
            }
            recompute_control_from_backup(state, out.store, in.ctl.theta, in.fwd.eps);
            continue;  // redo the same control iteration with the reduced alpha
        }

        // accepted
        const int ell = state.iteration;
        const auto& stop = in.ctl.stop;
        if (stop.absolute_J > 0.0 && J < stop.absolute_J) stop_reason = "absolute_J";
        if (ell > 0 && stop_reason.empty()) {
            const double dJ = std::abs(state.J_accepted[std::size_t(ell) - 1] - J);
            if (stop.relative_dJ > 0.0 &&
                dJ / state.J_accepted[std::size_t(ell) - 1] < stop.relative_dJ)
                stop_reason = "relative_dJ";
            if (stop.absolute_dJ > 0.0 && dJ < stop.absolute_dJ) stop_reason = "absolute_dJ";
        }
        if (stop_reason.empty() && ell + 1 >= stop.max_iterations) stop_reason = "max_iterations";
        if (!stop_reason.empty()) {
            ++state.iteration;
            break;
        }

        AdjointDiagnostics adiag = solve_adjoint(out.store, in.phi_obs_storage, hier,
                                                 in.fwd.eps, in.fwd.tau, in.fwd.cycle);
        out.diag.vcycles_adjoint += adiag.vcycles;
        out.diag.work_adjoint += adiag.work;
        update_control(state, out.store, in.ctl.theta, in.fwd.eps);
        out.store.rotate_lambda_history();
        ++state.iteration;
    }

    out.J_history = state.J_accepted;
    out.diag.restarts = state.restarts;
    out.diag.accepted_iterations = state.iteration;
    out.diag.stop_reason = stop_reason;
    out.diag.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace pfopt
