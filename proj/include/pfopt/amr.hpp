#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "pfopt/forward.hpp"
#include "pfopt/multigrid.hpp"
#include "pfopt/transfer.hpp"

namespace pfopt {

/// Cells where the diffuse interface is present: 1 - phi^2 > threshold.
inline CellMask flag_interface(const ScalarField& phi, double threshold) {
    CellMask mask(phi.n(), phi.dim(), false);
    phi.for_interior([&](int i, int j, int k) {
        const double v = phi.at(i, j, k);
        mask.set(i, j, k, 1.0 - v * v > threshold);
    });
    return mask;
}

struct AmrConfig {
    double threshold = 0.19;  // 1 - phi^2 > threshold, i.e. |phi| < 0.9
    int block = 8;            // refinement granularity in cells per axis
    int regrid_interval = 5;  // steps between regrids
};

/// Block-granular refinement map for the levels above the storage level.
/// Blocks of B^d cells; proper nesting is maintained against the parent level.
struct RefinementMap {
    int block = 8;
    int base_level = 0;   // fully covered level (storage); managed levels are above it
    int top_level = 0;
    // indexed by hierarchy level; CellMask over the level's block grid
    std::vector<CellMask> block_masks;

    bool managed(int level) const {
        return level > base_level && level <= top_level &&
               level < int(block_masks.size()) && !block_masks[std::size_t(level)].bits.empty();
    }

    /// Expand block masks to per-cell masks (empty entry = whole level active).
    std::vector<CellMask> cell_masks(const GridHierarchy& hier) const {
        std::vector<CellMask> out(std::size_t(top_level) + 1);
        for (int l = base_level + 1; l <= top_level; ++l) {
            if (!managed(l)) continue;
            const UniformGrid& g = hier.grid(l);
            const CellMask& bm = block_masks[std::size_t(l)];
            CellMask cm(g.n, g.dim, false);
            const int kmax = g.dim == 3 ? g.n : 1;
            for (int k = 0; k < kmax; ++k)
                for (int j = 0; j < g.n; ++j)
                    for (int i = 0; i < g.n; ++i)
                        cm.set(i, j, k,
                               bm.active(i / block, j / block, g.dim == 3 ? k / block : 0));
            out[std::size_t(l)] = std::move(cm);
        }
        return out;
    }

    std::uint64_t active_cells(const GridHierarchy& hier, int level) const {
        if (!managed(level)) return hier.grid(level).cell_count();
        const int bd = hier.grid(level).dim;
        std::uint64_t per_block = std::uint64_t(block) * block * (bd == 3 ? block : 1);
        return block_masks[std::size_t(level)].count() * per_block;
    }

    /// Snapshot as structured text: one line per refined block.
    void dump(std::ostream& os) const {
        os << "block " << block << "\n";
        for (int l = base_level + 1; l <= top_level; ++l) {
            if (!managed(l)) continue;
            const CellMask& bm = block_masks[std::size_t(l)];
            const int kmax = bm.dim == 3 ? bm.n : 1;
            for (int k = 0; k < kmax; ++k)
                for (int j = 0; j < bm.n; ++j)
                    for (int i = 0; i < bm.n; ++i)
                        if (bm.active(i, j, k))
                            os << "level " << l << " block " << i << " " << j << " " << k << "\n";
        }
    }
};

namespace detail {

inline void dilate_blocks(CellMask& bm) {
    CellMask src = bm;
    const bool is3d = bm.dim == 3;
    const int kmax = is3d ? bm.n : 1;
    for (int k = 0; k < kmax; ++k)
        for (int j = 0; j < bm.n; ++j)
            for (int i = 0; i < bm.n; ++i) {
                if (bm.active(i, j, k)) continue;
                bool near = false;
                for (int dk = is3d ? -1 : 0; !near && dk <= (is3d ? 1 : 0); ++dk)
                    for (int dj = -1; !near && dj <= 1; ++dj)
                        for (int di = -1; !near && di <= 1; ++di) {
                            const int ii = i + di, jj = j + dj, kk = k + dk;
                            if (ii < 0 || jj < 0 || kk < 0 || ii >= bm.n || jj >= bm.n ||
                                kk >= (is3d ? bm.n : 1))
                                continue;
                            near = src.active(ii, jj, kk);
                        }
                bm.set(i, j, k, near);
            }
}

}  // namespace detail

/// Build a nesting-valid refinement map from the interface position. The
/// per-level state is obtained by restricting the solve-level phi; newly
/// refined cells need no separate initialization because inactive fine cells
/// always carry the prolonged parent representation.
inline RefinementMap regrid(const ScalarField& phi_solve, const GridHierarchy& hier,
                            const AmrConfig& cfg) {
    RefinementMap map;
    map.block = cfg.block;
    map.base_level = hier.storage_level;
    map.top_level = hier.solve_level;
    map.block_masks.resize(std::size_t(map.top_level) + 1);

    ScalarField phi = phi_solve;
    for (int l = map.top_level; l > map.base_level; --l) {
        const UniformGrid& g = hier.grid(l);
        if (g.n % cfg.block != 0)
            throw std::invalid_argument("regrid: level size not divisible by block size");
        CellMask flags = flag_interface(phi, cfg.threshold);
        const int bn = g.n / cfg.block;
        CellMask bm(bn, g.dim, false);
        const int kmax = g.dim == 3 ? g.n : 1;
        for (int k = 0; k < kmax; ++k)
            for (int j = 0; j < g.n; ++j)
                for (int i = 0; i < g.n; ++i)
                    if (flags.active(i, j, k))
                        bm.set(i / cfg.block, j / cfg.block, g.dim == 3 ? k / cfg.block : 0,
                               true);
        detail::dilate_blocks(bm);
        map.block_masks[std::size_t(l)] = std::move(bm);
        if (l - 1 > map.base_level) phi = restrict_field(phi, hier.grid(l - 1));
    }

    // proper nesting: the parent block of every refined block must be refined
    for (int l = map.top_level; l > map.base_level + 1; --l) {
        const CellMask& fine = map.block_masks[std::size_t(l)];
        CellMask& coarse = map.block_masks[std::size_t(l - 1)];
        const bool is3d = fine.dim == 3;
        const int kmax = is3d ? fine.n : 1;
        for (int k = 0; k < kmax; ++k)
            for (int j = 0; j < fine.n; ++j)
                for (int i = 0; i < fine.n; ++i)
                    if (fine.active(i, j, k)) coarse.set(i / 2, j / 2, is3d ? k / 2 : 0, true);
    }
    for (int l = map.top_level; l > map.base_level + 1; --l) {
        const CellMask& fine = map.block_masks[std::size_t(l)];
        const CellMask& coarse = map.block_masks[std::size_t(l - 1)];
        const bool is3d = fine.dim == 3;
        const int kmax = is3d ? fine.n : 1;
        for (int k = 0; k < kmax; ++k)
            for (int j = 0; j < fine.n; ++j)
                for (int i = 0; i < fine.n; ++i)
                    if (fine.active(i, j, k) && !coarse.active(i / 2, j / 2, is3d ? k / 2 : 0))
                        throw std::logic_error("regrid: nesting violation");  // unreachable
    }
    return map;
}

/// FAS V-cycle on the composite grid: smoothing on partially refined levels
/// visits refined blocks only.
inline ScalarField vcycle_mlat(const ScalarField& u, const ForwardOperatorSpec& op,
                               const GridHierarchy& hierarchy, const RefinementMap& map,
                               const CycleConfig& cfg) {
    FasForwardCycler c(hierarchy, cfg, op, hierarchy.level_of(u.grid()));
    c.set_masks(map.cell_masks(hierarchy));
    ScalarField out = u;
    c.cycle(out);
    return out;
}

/// Interface-driven adaptive refinement driver for the forward time loop.
class AmrController : public MaskProvider {
public:
    AmrController(const GridHierarchy& hierarchy, const AmrConfig& cfg)
        : hier_(&hierarchy), cfg_(cfg) {}

    const std::vector<CellMask>* masks_for_step(const ScalarField& phi_solve,
                                                int step) override {
        if (!have_map_ || step % cfg_.regrid_interval == 0) {
            map_ = regrid(phi_solve, *hier_, cfg_);
            cell_masks_ = map_.cell_masks(*hier_);
            have_map_ = true;
            std::uint64_t active = map_.active_cells(*hier_, hier_->solve_level);
            max_active_fine_ = std::max(max_active_fine_, active);
        }
        return &cell_masks_;
    }

    void reset() { have_map_ = false; }
    const RefinementMap& map() const { return map_; }
    std::uint64_t max_active_fine_cells() const { return max_active_fine_; }

private:
    const GridHierarchy* hier_;
    AmrConfig cfg_;
    RefinementMap map_;
    std::vector<CellMask> cell_masks_;
    bool have_map_ = false;
    std::uint64_t max_active_fine_ = 0;
};

}  // namespace pfopt
