#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "pfopt/smoother.hpp"
#include "pfopt/transfer.hpp"

namespace pfopt {

struct CycleConfig {
    int nu1 = 2;               // pre-smooth sweeps
    int nu2 = 2;               // post-smooth sweeps
    int coarsest_level = 0;    // hierarchy index of the coarsest cycle level
    int coarsest_sweeps = 50;  // smoother sweeps standing in for a coarse solve
    double tolerance = 1e-11;  // infinity-norm residual target
    int max_cycles = 100;

    void check() const {
        if (nu1 < 1 || nu2 < 1)
            throw std::invalid_argument("CycleConfig: nu1 and nu2 must be >= 1");
        if (tolerance <= 0.0) throw std::invalid_argument("CycleConfig: tolerance must be > 0");
        if (max_cycles < 1) throw std::invalid_argument("CycleConfig: max_cycles must be >= 1");
    }
};

struct SolveResult {
    int cycles = 0;
    std::vector<double> residual_history;  // norm before cycle 1, after each cycle
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<double> history)
        : std::runtime_error(what), residual_history(std::move(history)) {}
    std::vector<double> residual_history;
};

namespace detail {

/// Coarse cells whose 2^d children are all active on the finer level.
inline CellMask project_mask(const CellMask& fine, int coarse_n) {
    CellMask out(coarse_n, fine.dim, false);
    const bool is3d = fine.dim == 3;
    const int kmax = is3d ? coarse_n : 1;
    for (int k = 0; k < kmax; ++k)
        for (int j = 0; j < coarse_n; ++j)
            for (int i = 0; i < coarse_n; ++i) {
                bool all = true;
                const int kk0 = is3d ? 2 * k : 0;
                const int kk1 = is3d ? kk0 + 1 : 0;
                for (int kk = kk0; all && kk <= kk1; ++kk)
                    for (int jj = 2 * j; all && jj <= 2 * j + 1; ++jj)
                        for (int ii = 2 * i; all && ii <= 2 * i + 1; ++ii)
                            all = fine.active(ii, jj, kk);
                out.set(i, j, k, all);
            }
    return out;
}

/// Overwrite coarse interior values by restriction of fine, but only where
/// `where` is active (null = everywhere).
inline void restrict_onto(const ScalarField& fine, ScalarField& coarse, const CellMask* where) {
    ScalarField full = restrict_field(fine, coarse.grid());
    if (!where) {
        coarse = std::move(full);
        return;
    }
    coarse.for_interior([&](int i, int j, int k) {
        if (where->active(i, j, k)) coarse.at(i, j, k) = full.at(i, j, k);
    });
    coarse.fill_ghosts();
}

}  // namespace detail

/// FAS V-cycle engine for the nonlinear forward step. Coarse-level coefficient
/// fields (eta, histories) are obtained by restriction of the fine-level
/// fields. Optional per-level cell masks make this the MLAT variant: smoothing
/// and residual transfer on partially refined levels touch active cells only,
/// while inactive cells mirror the parent-level representation.
class FasForwardCycler {
public:
    FasForwardCycler(const GridHierarchy& hierarchy, const CycleConfig& cfg,
                     const ForwardOperatorSpec& fine_op, int top_level)
        : hier_(&hierarchy), cfg_(cfg), top_(top_level) {
        cfg_.check();
        if (cfg_.coarsest_level < 0 || top_ >= hierarchy.num_levels() ||
            top_ < cfg_.coarsest_level)
            throw std::invalid_argument("FasForwardCycler: bad level range");
        fine_op.check(hierarchy.grid(top_));
        eps_ = fine_op.eps;
        tau_ = fine_op.tau;
        lambda_ = fine_op.lambda;
        scheme_ = fine_op.scheme;
        levels_.resize(std::size_t(top_) + 1);
        auto& topl = levels_[std::size_t(top_)];
        topl.eta = *fine_op.eta;
        topl.hist1 = *fine_op.phi_n;
        topl.hist2 = fine_op.phi_nm1 ? *fine_op.phi_nm1 : ScalarField(hierarchy.grid(top_));
        for (int l = top_; l > cfg_.coarsest_level; --l) {
            auto& cl = levels_[std::size_t(l - 1)];
            const auto& fl = levels_[std::size_t(l)];
            const UniformGrid& cg = hierarchy.grid(l - 1);
            cl.eta = restrict_field(fl.eta, cg);
            cl.hist1 = restrict_field(fl.hist1, cg);
            cl.hist2 = restrict_field(fl.hist2, cg);
        }
        for (int l = cfg_.coarsest_level; l <= top_; ++l) {
            auto& lv = levels_[std::size_t(l)];
            const UniformGrid& g = hierarchy.grid(l);
            lv.u = ScalarField(g);
            lv.rhs = ScalarField(g);
            lv.r = ScalarField(g);
            lv.u_save = ScalarField(g);
        }
    }

    void set_lambda(double lambda) { lambda_ = lambda; }

    /// Per-level active-cell masks, indexed by hierarchy level; an empty mask
    /// means the whole level is active. Levels at or below the fully covered
    /// base must be left empty.
    void set_masks(std::vector<CellMask> masks) { masks_ = std::move(masks); }
    const CellMask* mask_of(int level) const {
        if (masks_.empty() || level >= int(masks_.size())) return nullptr;
        const CellMask& m = masks_[std::size_t(level)];
        return m.bits.empty() ? nullptr : &m;
    }

    double residual_norm(const ScalarField& u) {
        auto& lv = levels_[std::size_t(top_)];
        ScalarField uu = u;
        uu.fill_ghosts();
        forward_residual_into(uu, op_at(top_), lv.r, nullptr, mask_of(top_));
        work_ += active_count(top_);
        return lv.r.inf_norm();
    }

    /// One FAS V-cycle; returns the updated approximation in place.
    void cycle(ScalarField& u) {
        levels_[std::size_t(top_)].u = u;
        descend(top_);
        u = levels_[std::size_t(top_)].u;
    }

    /// V-cycles until the top-level residual infinity norm drops below the
    /// configured tolerance. When the coarsest grid is far too coarse to
    /// represent the interface, the coarse correction can stall the cycle on a
    /// limit set; after three non-contracting cycles the solve falls back to
    /// plain fine-level smoothing, which always converges for this operator.
    SolveResult solve(ScalarField& u) {
        SolveResult res;
        double r0 = residual_norm(u);
        res.residual_history.push_back(r0);
        double best = r0;
        int since_improvement = 0;
        bool smooth_only = false;
        while (r0 >= cfg_.tolerance) {
            if (res.cycles >= cfg_.max_cycles)
                throw ConvergenceError("forward multigrid: max V-cycles exhausted",
                                       res.residual_history);
            if (smooth_only) {
                smooth_forward(u, op_at(top_), cfg_.coarsest_sweeps, nullptr, mask_of(top_));
                work_ += active_count(top_) * std::uint64_t(cfg_.coarsest_sweeps);
            } else {
                cycle(u);
            }
            ++res.cycles;
            r0 = residual_norm(u);
            res.residual_history.push_back(r0);
            if (!smooth_only) {
                if (r0 < 0.7 * best) {
                    since_improvement = 0;
                } else if (++since_improvement >= 4) {
                    smooth_only = true;  // limit cycle or stall: coarse grid is not helping
                }
                best = std::min(best, r0);
            }
        }
        return res;
    }

    std::uint64_t work() const { return work_; }
    int top_level() const { return top_; }
    const CycleConfig& config() const { return cfg_; }

private:
    struct Level {
        ScalarField eta, hist1, hist2;
        ScalarField u, rhs, r, u_save;
    };

    ForwardOperatorSpec op_at(int l) const {
        const auto& lv = levels_[std::size_t(l)];
        ForwardOperatorSpec op;
        op.eps = eps_;
        op.tau = tau_;
        op.lambda = lambda_;
        op.scheme = scheme_;
        op.eta = &lv.eta;
        op.phi_n = &lv.hist1;
        op.phi_nm1 = &lv.hist2;
        return op;
    }

    std::uint64_t active_count(int l) const {
        const CellMask* m = mask_of(l);
        if (m) return m->count();
        return hier_->grid(l).cell_count();
    }

    void descend(int l) {
        auto& lv = levels_[std::size_t(l)];
        const ScalarField* rhs = l == top_ ? nullptr : &lv.rhs;
        const CellMask* mask = mask_of(l);
        if (l == cfg_.coarsest_level) {
            smooth_forward(lv.u, op_at(l), cfg_.coarsest_sweeps, rhs, mask);
            work_ += active_count(l) * std::uint64_t(cfg_.coarsest_sweeps);
            return;
        }
        smooth_forward(lv.u, op_at(l), cfg_.nu1, rhs, mask);
        forward_residual_into(lv.u, op_at(l), lv.r, rhs, mask);
        work_ += active_count(l) * std::uint64_t(cfg_.nu1 + 1);

        auto& cl = levels_[std::size_t(l - 1)];
        CellMask covered;
        const CellMask* cov = nullptr;
        if (mask) {
            covered = detail::project_mask(*mask, hier_->grid(l - 1).n);
            cov = &covered;
        }
        // full-approximation transfer: coarse iterate from restriction, then
        // rhs_c = N_c(R u) + R r  on covered cells, plain equation elsewhere
        detail::restrict_onto(lv.u, cl.u, nullptr);
        cl.u_save = cl.u;
        ScalarField rr = restrict_field(lv.r, hier_->grid(l - 1));
        forward_residual_into(cl.u, op_at(l - 1), cl.rhs, nullptr, nullptr);
        cl.rhs.for_interior([&](int i, int j, int k) {
            if (!cov || cov->active(i, j, k))
                cl.rhs.at(i, j, k) = -cl.rhs.at(i, j, k) + rr.at(i, j, k);  // N_c(Ru) + Rr
            else
                cl.rhs.at(i, j, k) = 0.0;
        });
        cl.rhs.fill_ghosts();

        descend(l - 1);

        ScalarField pc = prolong_field(cl.u, hier_->grid(l));
        ScalarField ps = prolong_field(cl.u_save, hier_->grid(l));
        lv.u.for_interior([&](int i, int j, int k) {
            if (!mask || mask->active(i, j, k))
                lv.u.at(i, j, k) += pc.at(i, j, k) - ps.at(i, j, k);
            else
                lv.u.at(i, j, k) = pc.at(i, j, k);  // keep parent representation in sync
        });
        lv.u.fill_ghosts();
        smooth_forward(lv.u, op_at(l), cfg_.nu2, rhs, mask);
        work_ += active_count(l) * std::uint64_t(cfg_.nu2);
    }

    const GridHierarchy* hier_;
    CycleConfig cfg_;
    int top_;
    double eps_, tau_, lambda_;
    StepScheme scheme_;
    std::vector<Level> levels_;
    std::vector<CellMask> masks_;
    std::uint64_t work_ = 0;
};

/// Correction-scheme V-cycle engine for the linear adjoint step. Coarse levels
/// apply the homogeneous operator with the restricted frozen state. The cycle
/// runs from the storage level down; the adjoint never touches finer levels.
class LinearAdjointCycler {
public:
    LinearAdjointCycler(const GridHierarchy& hierarchy, const CycleConfig& cfg,
                        const AdjointOperatorSpec& fine_op, int top_level)
        : hier_(&hierarchy), cfg_(cfg), top_(top_level) {
        cfg_.check();
        if (cfg_.coarsest_level < 0 || top_ >= hierarchy.num_levels() ||
            top_ < cfg_.coarsest_level)
            throw std::invalid_argument("LinearAdjointCycler: bad level range");
        fine_op.check(hierarchy.grid(top_));
        eps_ = fine_op.eps;
        tau_ = fine_op.tau;
        scheme_ = fine_op.scheme;
        levels_.resize(std::size_t(top_) + 1);
        auto& topl = levels_[std::size_t(top_)];
        topl.phi = *fine_op.phi;
        topl.hist1 = *fine_op.p_np2;
        topl.hist2 = fine_op.p_np3 ? *fine_op.p_np3 : ScalarField(hierarchy.grid(top_));
        for (int l = top_; l > cfg_.coarsest_level; --l)
            levels_[std::size_t(l - 1)].phi =
                restrict_field(levels_[std::size_t(l)].phi, hierarchy.grid(l - 1));
        for (int l = cfg_.coarsest_level; l <= top_; ++l) {
            const UniformGrid& g = hierarchy.grid(l);
            auto& lv = levels_[std::size_t(l)];
            lv.e = ScalarField(g);
            lv.rhs = ScalarField(g);
            lv.r = ScalarField(g);
        }
    }

    double residual_norm(const ScalarField& p) {
        auto& lv = levels_[std::size_t(top_)];
        ScalarField pp = p;
        pp.fill_ghosts();
        adjoint_residual_into(pp, op_at(top_, false), lv.r, nullptr, false);
        work_ += hier_->grid(top_).cell_count();
        return lv.r.inf_norm();
    }

    void cycle(ScalarField& p) {
        auto& lv = levels_[std::size_t(top_)];
        lv.e = p;
        descend(top_);
        p = lv.e;
    }

    /// Same stall-detection fallback as the forward cycler: a coarse grid that
    /// cannot represent the frozen state can stop the correction scheme from
    /// contracting, in which case fine-level smoothing finishes the solve.
    SolveResult solve(ScalarField& p) {
        SolveResult res;
        double r0 = residual_norm(p);
        res.residual_history.push_back(r0);
        double best = r0;
        int since_improvement = 0;
        bool smooth_only = false;
        while (r0 >= cfg_.tolerance) {
            if (res.cycles >= cfg_.max_cycles)
                throw ConvergenceError("adjoint multigrid: max V-cycles exhausted",
                                       res.residual_history);
            if (smooth_only) {
                smooth_adjoint(p, op_at(top_, false), cfg_.coarsest_sweeps, nullptr, false);
                work_ += hier_->grid(top_).cell_count() * std::uint64_t(cfg_.coarsest_sweeps);
            } else {
                cycle(p);
            }
            ++res.cycles;
            r0 = residual_norm(p);
            res.residual_history.push_back(r0);
            if (!smooth_only) {
                if (r0 < 0.7 * best) {
                    since_improvement = 0;
                } else if (++since_improvement >= 4) {
                    smooth_only = true;  // limit cycle or stall: coarse grid is not helping
                }
                best = std::min(best, r0);
            }
        }
        return res;
    }

    std::uint64_t work() const { return work_; }

private:
    struct Level {
        ScalarField phi, hist1, hist2;  // histories used on the top level only
        ScalarField e, rhs, r;
    };

    AdjointOperatorSpec op_at(int l, bool coarse) const {
        const auto& lv = levels_[std::size_t(l)];
        AdjointOperatorSpec op;
        op.eps = eps_;
        op.tau = tau_;
        op.scheme = scheme_;
        op.phi = &lv.phi;
        op.p_np2 = coarse ? &lv.e : &lv.hist1;  // unused when homogeneous
        op.p_np3 = coarse ? &lv.e : &lv.hist2;
        return op;
    }

    void descend(int l) {
        auto& lv = levels_[std::size_t(l)];
        const bool homog = l != top_;
        const ScalarField* rhs = homog ? &lv.rhs : nullptr;
        if (l == cfg_.coarsest_level) {
            smooth_adjoint(lv.e, op_at(l, homog), cfg_.coarsest_sweeps, rhs, homog);
            work_ += hier_->grid(l).cell_count() * std::uint64_t(cfg_.coarsest_sweeps);
            return;
        }
        smooth_adjoint(lv.e, op_at(l, homog), cfg_.nu1, rhs, homog);
        adjoint_residual_into(lv.e, op_at(l, homog), lv.r, rhs, homog);
        work_ += hier_->grid(l).cell_count() * std::uint64_t(cfg_.nu1 + 1);

        auto& cl = levels_[std::size_t(l - 1)];
        cl.rhs = restrict_field(lv.r, hier_->grid(l - 1));
        cl.e.fill(0.0);
        descend(l - 1);
        ScalarField pe = prolong_field(cl.e, hier_->grid(l));
        lv.e.for_interior([&](int i, int j, int k) { lv.e.at(i, j, k) += pe.at(i, j, k); });
        lv.e.fill_ghosts();
        smooth_adjoint(lv.e, op_at(l, homog), cfg_.nu2, rhs, homog);
        work_ += hier_->grid(l).cell_count() * std::uint64_t(cfg_.nu2);
    }

    const GridHierarchy* hier_;
    CycleConfig cfg_;
    int top_;
    double eps_, tau_;
    StepScheme scheme_;
    std::vector<Level> levels_;
    std::uint64_t work_ = 0;
};

// ---- thin functional wrappers ----

inline ScalarField vcycle_fas(const ScalarField& u, const ForwardOperatorSpec& op,
                              const GridHierarchy& hierarchy, const CycleConfig& cfg) {
    FasForwardCycler c(hierarchy, cfg, op, hierarchy.level_of(u.grid()));
    ScalarField out = u;
    c.cycle(out);
    return out;
}

inline ScalarField vcycle_linear(const ScalarField& p, const AdjointOperatorSpec& op,
                                 const GridHierarchy& hierarchy, const CycleConfig& cfg) {
    LinearAdjointCycler c(hierarchy, cfg, op, hierarchy.level_of(p.grid()));
    ScalarField out = p;
    c.cycle(out);
    return out;
}

inline std::pair<ScalarField, SolveResult> solve_to_tolerance(const ScalarField& initial,
                                                              const ForwardOperatorSpec& op,
                                                              const GridHierarchy& hierarchy,
                                                              const CycleConfig& cfg) {
    FasForwardCycler c(hierarchy, cfg, op, hierarchy.level_of(initial.grid()));
    ScalarField u = initial;
    SolveResult res = c.solve(u);
    return {std::move(u), std::move(res)};
}

inline std::pair<ScalarField, SolveResult> solve_to_tolerance(const ScalarField& initial,
                                                              const AdjointOperatorSpec& op,
                                                              const GridHierarchy& hierarchy,
                                                              const CycleConfig& cfg) {
    LinearAdjointCycler c(hierarchy, cfg, op, hierarchy.level_of(initial.grid()));
    ScalarField p = initial;
    SolveResult res = c.solve(p);
    return {std::move(p), std::move(res)};
}

}  // namespace pfopt
