#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pfopt/field.hpp"
#include "pfopt/grid.hpp"

namespace pfopt {

/// Two-grid space-time store: per-step phi, eta and p on the storage grid,
/// per-step converged lambda histories for warm starts, and the solve-level
/// phi(T) kept at full resolution for the fidelity term.
class SpaceTimeStore {
public:
    SpaceTimeStore() = default;
    SpaceTimeStore(const UniformGrid& storage_grid, int num_steps)
        : grid_(storage_grid), num_steps_(num_steps) {
        if (num_steps < 1) throw std::invalid_argument("SpaceTimeStore: num_steps must be >= 1");
        const std::size_t slots = std::size_t(num_steps) + 1;  // step indices 0..N_t, dense
        phi_.assign(slots, ScalarField(grid_));
        eta_.assign(slots, ScalarField(grid_));
        p_.assign(slots, ScalarField(grid_));
        lambda_.assign(slots, 0.0);
        lambda_prev_.assign(slots, 0.0);
        lambda_prev2_.assign(slots, 0.0);
        has_phi_.assign(slots, false);
        has_p_.assign(slots, false);
    }

    const UniformGrid& storage_grid() const { return grid_; }
    int num_steps() const { return num_steps_; }

    void set_phi(int step, const ScalarField& f) {
        check_step(step);
        f.require_same_grid(phi_[0], "SpaceTimeStore::set_phi");
        phi_[std::size_t(step)] = f;
        has_phi_[std::size_t(step)] = true;
    }
    const ScalarField& phi(int step) const {
        check_step(step);
        if (!has_phi_[std::size_t(step)])
            throw std::runtime_error("SpaceTimeStore: phi missing at step " +
                                     std::to_string(step));
        return phi_[std::size_t(step)];
    }
    bool has_phi(int step) const { check_step(step); return has_phi_[std::size_t(step)]; }

    ScalarField& eta(int step) { check_step(step); return eta_[std::size_t(step)]; }
    const ScalarField& eta(int step) const { check_step(step); return eta_[std::size_t(step)]; }

    void set_p(int step, const ScalarField& f) {
        check_step(step);
        f.require_same_grid(p_[0], "SpaceTimeStore::set_p");
        p_[std::size_t(step)] = f;
        has_p_[std::size_t(step)] = true;
    }
    const ScalarField& p(int step) const {
        check_step(step);
        if (!has_p_[std::size_t(step)])
            throw std::runtime_error("SpaceTimeStore: p missing at step " + std::to_string(step));
        return p_[std::size_t(step)];
    }
    bool has_p(int step) const { check_step(step); return has_p_[std::size_t(step)]; }

    // Converged lambda per step, with the two previous control iterations kept
    // for warm starts.
    void record_lambda(int step, double value) {
        check_step(step);
        lambda_[std::size_t(step)] = value;
    }
    double lambda(int step) const { check_step(step); return lambda_[std::size_t(step)]; }
    double lambda_prev_iter(int step) const { check_step(step); return lambda_prev_[std::size_t(step)]; }
    double lambda_prev2_iter(int step) const { check_step(step); return lambda_prev2_[std::size_t(step)]; }

    /// Call when a control iteration is accepted: shift lambda histories.
    void rotate_lambda_history() {
        lambda_prev2_ = lambda_prev_;
        lambda_prev_ = lambda_;
    }
    /// Call on a restart: the discarded attempt must not poison warm starts.
    void invalidate_lambda_attempt() { lambda_ = lambda_prev_; }

    void set_phi_T_fine(const ScalarField& f) { phi_T_fine_ = f; has_phi_T_fine_ = true; }
    const ScalarField& phi_T_fine() const {
        if (!has_phi_T_fine_) throw std::runtime_error("SpaceTimeStore: solve-level phi(T) not set");
        return phi_T_fine_;
    }
    bool has_phi_T_fine() const { return has_phi_T_fine_; }

    /// Accounted bytes: per-step fields on the storage grid plus the
    /// solve-level phi(T).
    static std::uint64_t accounted_bytes(int dim, int storage_n, int num_steps, int num_fields,
                                         int solve_n = 0) {
        std::uint64_t cells = std::uint64_t(storage_n) * storage_n;
        if (dim == 3) cells *= std::uint64_t(storage_n);
        std::uint64_t bytes = std::uint64_t(num_fields) * cells * 8u * std::uint64_t(num_steps + 1);
        if (solve_n > 0) {
            std::uint64_t fc = std::uint64_t(solve_n) * solve_n;
            if (dim == 3) fc *= std::uint64_t(solve_n);
            bytes += fc * 8u;
        }
        return bytes;
    }

    std::uint64_t accounted_bytes() const {
        return accounted_bytes(grid_.dim, grid_.n, num_steps_, 3,
                               has_phi_T_fine_ ? phi_T_fine_.n() : 0);
    }

private:
    void check_step(int step) const {
        if (step < 0 || step > num_steps_)
            throw std::invalid_argument("SpaceTimeStore: step index out of range");
    }

    UniformGrid grid_;
    int num_steps_ = 0;
    std::vector<ScalarField> phi_, eta_, p_;
    std::vector<double> lambda_, lambda_prev_, lambda_prev2_;
    std::vector<bool> has_phi_, has_p_;
    ScalarField phi_T_fine_;
    bool has_phi_T_fine_ = false;
};

}  // namespace pfopt
