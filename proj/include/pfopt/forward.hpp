#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pfopt/multigrid.hpp"
#include "pfopt/store.hpp"

namespace pfopt {

struct ForwardConfig {
    double eps = 0.1;
    double tau = 7.8125e-4;
    int num_steps = 160;
    double mass0 = 0.0;   // integral of phi^0 on the solve level
    double massT = 0.0;   // integral of phi_obs on the solve level
    bool use_constraint = true;
    double tol_lambda = 0.01;
    int max_lambda_iters = 20;
    double overshoot_delta = 0.1;  // diagnostic bound on |phi| - 1
    CycleConfig cycle;

    double T() const { return tau * num_steps; }
    double mass_target_at(int step) const {
        return mass0 + (double(step) / double(num_steps)) * (massT - mass0);
    }
};

/// Secant iteration bookkeeping for the spatially uniform volume multiplier.
struct LambdaIterState {
    double lambda_cur = 0.0, lambda_prev = 0.0;
    double mass_cur = 0.0, mass_prev = 0.0;
    int iteration = 0;  // number of completed solves
    double tol = 0.01;
    int max_iterations = 20;
};

class DegenerateSecantError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Secant update for lambda; requires two prior (lambda, mass) pairs.
inline double lambda_update(const LambdaIterState& state, double M_target, double mass_current) {
    if (state.iteration <= 1)
        throw std::logic_error("lambda_update: needs two prior lambda solves");
    const double denom = mass_current - state.mass_prev;
    if (denom == 0.0)
        throw DegenerateSecantError("lambda_update: zero mass denominator");
    return state.lambda_cur +
           (state.lambda_cur - state.lambda_prev) * (M_target - mass_current) / denom;
}

/// Initial lambda guesses for the step with index `step` (the step being
/// solved, 1-based) in control iteration `eta_iter`. Cold starts use the
/// +-(2*eps/tau - 1) pair; later steps and iterations reuse computed values.
inline std::pair<double, double> lambda_initial_guesses(double eps, double tau, int step,
                                                        int eta_iter,
                                                        const SpaceTimeStore& store) {
    if (eta_iter >= 2)
        return {store.lambda_prev2_iter(step), store.lambda_prev_iter(step)};
    if (step >= 3) return {store.lambda(step - 2), store.lambda(step - 1)};
    const double g = 2.0 * eps / tau - 1.0;
    return {-g, g};
}

/// Time loop state on the solve level.
struct TimeLoopState {
    int step = 0;  // last completed step index
    ScalarField phi_n, phi_nm1;
};

/// Supplies per-level active-cell masks for the forward solve (AMR hook).
/// Returning null means "solve the whole level".
struct MaskProvider {
    virtual ~MaskProvider() = default;
    virtual const std::vector<CellMask>* masks_for_step(const ScalarField& phi_solve,
                                                        int step) = 0;
};

struct ForwardDiagnostics {
    std::uint64_t vcycles = 0;
    std::uint64_t lambda_solves = 0;  // nonlinear system solves across all steps
    std::uint64_t work = 0;           // cell-update count
    double max_mass_error = 0.0;      // max over steps of |mass - M_target|
    double max_overshoot = 0.0;       // max over steps of max(|phi|) - 1
    bool overshoot_flagged = false;
    std::vector<double> lambda_per_step;       // converged lambda
    std::vector<int> lambda_iters_per_step;    // solve count per step
};

class ConstraintFailureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Time integration of the volume-constrained Allen-Cahn equation. Writes the
/// restricted state and converged lambda to the store after every step.
class ForwardIntegrator {
public:
    ForwardIntegrator(const GridHierarchy& hierarchy, const ForwardConfig& cfg)
        : hier_(&hierarchy), cfg_(cfg) {
        if (cfg_.num_steps < 1)
            throw std::invalid_argument("ForwardIntegrator: num_steps must be >= 1");
    }

    const ForwardConfig& config() const { return cfg_; }

    /// One time step: lambda-secant loop around the nonlinear multigrid solve,
    /// then store restrict(phi) and the converged lambda.
    void advance_step(TimeLoopState& state, SpaceTimeStore& store, int eta_iter,
                      ForwardDiagnostics& diag, MaskProvider* amr = nullptr) {
        const int step = state.step + 1;
        if (step > cfg_.num_steps)
            throw std::invalid_argument("advance_step: past the final step");
        const bool first = state.step == 0;

        ForwardOperatorSpec op;
        op.eps = cfg_.eps;
        op.tau = cfg_.tau;
        op.scheme = first ? StepScheme::bdf1() : StepScheme::bdf2();
        ScalarField eta_fine =
            prolong_to_level(store.eta(step), *hier_, hier_->solve_level);
        op.eta = &eta_fine;
        op.phi_n = &state.phi_n;
        op.phi_nm1 = first ? nullptr : &state.phi_nm1;
        op.lambda = 0.0;

        FasForwardCycler cycler(*hier_, cfg_.cycle, op, hier_->solve_level);
        if (amr) {
            const std::vector<CellMask>* masks = amr->masks_for_step(state.phi_n, state.step);
            if (masks) cycler.set_masks(*masks);
        }

        ScalarField u = state.phi_n;  // warm start from the previous time step
        int solves = 0;
        double lambda_final = 0.0;

        auto run_solve = [&](double lambda) {
            cycler.set_lambda(lambda);
            SolveResult r = cycler.solve(u);
            diag.vcycles += std::uint64_t(r.cycles);
            ++solves;
            return u.integrate();
        };

        if (!cfg_.use_constraint) {
            run_solve(0.0);
        } else {
            const double M = cfg_.mass_target_at(step);
            auto [l0, l1] = lambda_initial_guesses(cfg_.eps, cfg_.tau, step, eta_iter, store);
            LambdaIterState ls;
            ls.tol = cfg_.tol_lambda;
            ls.max_iterations = cfg_.max_lambda_iters;
            ls.lambda_prev = l0;
            ls.mass_prev = run_solve(l0);
            ls.lambda_cur = l1;
            ls.mass_cur = run_solve(l1);
            ls.iteration = 2;
            lambda_final = l1;
            for (;;) {
                double lnext;
                try {
                    lnext = lambda_update(ls, M, ls.mass_cur);
                } catch (const DegenerateSecantError&) {
                    // guesses already converged, or a flat mass response: accept
                    // if the pair is within tolerance, otherwise perturb lambda
                    if (std::abs(ls.lambda_cur - ls.lambda_prev) < ls.tol) break;
                    lnext = ls.lambda_cur + 1e-8 * std::max(1.0, std::abs(ls.lambda_cur));
                }
                if (std::abs(lnext - ls.lambda_cur) < ls.tol) {
                    // converged: the state from the last solve stands and the
                    // updated multiplier is recorded for the warm starts
                    lambda_final = lnext;
                    break;
                }
                if (ls.iteration >= ls.max_iterations)
                    throw ConstraintFailureError("advance_step: lambda iteration exceeded " +
                                                 std::to_string(ls.max_iterations) +
                                                 " iterations at step " + std::to_string(step));
                ls.lambda_prev = ls.lambda_cur;
                ls.mass_prev = ls.mass_cur;
                ls.lambda_cur = lnext;
                ls.mass_cur = run_solve(lnext);
                ++ls.iteration;
                lambda_final = lnext;
            }
            diag.max_mass_error = std::max(diag.max_mass_error, std::abs(ls.mass_cur - M));
        }

        diag.lambda_solves += std::uint64_t(solves);
        diag.work += cycler.work();
        diag.lambda_per_step.push_back(lambda_final);
        diag.lambda_iters_per_step.push_back(solves);
        const double over = u.inf_norm() - 1.0;
        diag.max_overshoot = std::max(diag.max_overshoot, over);
        if (over > cfg_.overshoot_delta) diag.overshoot_flagged = true;

        store.set_phi(step, reduce_phase_field(u, hier_->storage_grid()));
        store.record_lambda(step, lambda_final);
        state.phi_nm1 = std::move(state.phi_n);
        state.phi_n = std::move(u);
        state.step = step;
    }

    /// Full forward sweep n = 0..N_t-1. Stores restricted phi at every step and
    /// retains phi(T) at solve-level resolution.
    ForwardDiagnostics solve_forward(const ScalarField& phi0, SpaceTimeStore& store,
                                     int eta_iter, MaskProvider* amr = nullptr) {
        if (!phi0.grid().same_as(hier_->solve_grid()))
            throw std::invalid_argument("solve_forward: phi0 must live on the solve level");
        ForwardDiagnostics diag;
        TimeLoopState state;
        state.phi_n = phi0;
        state.phi_n.fill_ghosts();
        store.set_phi(0, reduce_phase_field(state.phi_n, hier_->storage_grid()));
        while (state.step < cfg_.num_steps) advance_step(state, store, eta_iter, diag, amr);
        store.set_phi_T_fine(state.phi_n);
        return diag;
    }

private:
    const GridHierarchy* hier_;
    ForwardConfig cfg_;
};

}  // namespace pfopt
