#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "oracles.hpp"
#include "pfopt/amr.hpp"
#include "pfopt/shapes.hpp"

using namespace pfopt;

namespace {

ForwardOperatorSpec bench_op(const ScalarField& eta, const ScalarField& h1) {
    ForwardOperatorSpec op;
    op.eps = 0.1;
    op.tau = 7.8125e-4;
    op.scheme = StepScheme::bdf1();
    op.eta = &eta;
    op.phi_n = &h1;
    return op;
}

}  // namespace

TEST_CASE("interface flagging") {
    UniformGrid g(2, 32, {0.0, 0.0, 0.0}, 4.0);
    SECTION("pure phase flags nothing") {
        ScalarField one(g, 1.0);
        CHECK(flag_interface(one, 0.19).count() == 0u);
    }
    SECTION("threshold zero flags every non-saturated cell") {
        ScalarField f = oracles::random_field(g, 31, -0.5, 0.5);
        CHECK(flag_interface(f, 0.0).count() == std::uint64_t(32) * 32);
    }
    SECTION("circle profile flags an annulus that matches a direct scan") {
        ScalarField phi = build_profile(ShapeSpec::circle(2.0, 2.0, 1.0, 0.1), g);
        CellMask mask = flag_interface(phi, 0.19);
        std::uint64_t direct = 0;
        phi.for_interior([&](int i, int j, int k) {
            const double v = phi.at(i, j, k);
            if (1.0 - v * v > 0.19) {
                ++direct;
                CHECK(mask.active(i, j, k));
            } else {
                CHECK_FALSE(mask.active(i, j, k));
            }
        });
        CHECK(mask.count() == direct);
        CHECK(direct > 0u);
        CHECK(direct < std::uint64_t(32) * 32);
    }
}

TEST_CASE("regrid structure") {
    GridHierarchy hier(UniformGrid(2, 64, {0.0, 0.0, 0.0}, 4.0), 16, 16);
    ScalarField phi = build_profile(ShapeSpec::circle(2.0, 2.0, 1.0, 0.1), hier.solve_grid());
    AmrConfig cfg;
    RefinementMap map = regrid(phi, hier, cfg);

    SECTION("levels above storage are managed, the storage level is not") {
        CHECK(map.base_level == hier.storage_level);
        CHECK(map.top_level == hier.solve_level);
        CHECK_FALSE(map.managed(hier.storage_level));
        CHECK(map.managed(hier.solve_level));
    }
    SECTION("regridding the same state is a fixed point") {
        RefinementMap again = regrid(phi, hier, cfg);
        for (int l = map.base_level + 1; l <= map.top_level; ++l)
            CHECK(map.block_masks[std::size_t(l)].bits ==
                  again.block_masks[std::size_t(l)].bits);
    }
    SECTION("a centered circle yields a four-fold symmetric block map") {
        const CellMask& bm = map.block_masks[std::size_t(map.top_level)];
        for (int j = 0; j < bm.n; ++j)
            for (int i = 0; i < bm.n; ++i) {
                CHECK(bm.active(i, j, 0) == bm.active(bm.n - 1 - i, j, 0));
                CHECK(bm.active(i, j, 0) == bm.active(i, bm.n - 1 - j, 0));
            }
    }
    SECTION("refined fine blocks are properly nested in the parent level") {
        for (int l = map.top_level; l > map.base_level + 1; --l) {
            const CellMask& fine = map.block_masks[std::size_t(l)];
            const CellMask& coarse = map.block_masks[std::size_t(l - 1)];
            for (int j = 0; j < fine.n; ++j)
                for (int i = 0; i < fine.n; ++i)
                    if (fine.active(i, j, 0)) CHECK(coarse.active(i / 2, j / 2, 0));
        }
    }
    SECTION("the interface is fully covered on every managed level") {
        std::vector<CellMask> cms = map.cell_masks(hier);
        CellMask flags = flag_interface(phi, cfg.threshold);
        const CellMask& cm = cms[std::size_t(map.top_level)];
        phi.for_interior([&](int i, int j, int k) {
            if (flags.active(i, j, k)) CHECK(cm.active(i, j, k));
        });
    }
    SECTION("dump lists one line per refined block") {
        std::ostringstream os;
        map.dump(os);
        std::istringstream is(os.str());
        std::string line;
        std::uint64_t blocks = 0;
        while (std::getline(is, line))
            if (line.rfind("level ", 0) == 0) ++blocks;
        std::uint64_t expect = 0;
        for (int l = map.base_level + 1; l <= map.top_level; ++l)
            expect += map.block_masks[std::size_t(l)].count();
        CHECK(blocks == expect);
    }
    SECTION("block size must divide the level size") {
        AmrConfig bad;
        bad.block = 48;
        CHECK_THROWS_AS(regrid(phi, hier, bad), std::invalid_argument);
    }
}

TEST_CASE("fully refined map reproduces the uniform FAS cycle") {
    GridHierarchy hier(UniformGrid(2, 32, {0.0, 0.0, 0.0}, 4.0), 8, 8);
    ScalarField phi0 = build_profile(ShapeSpec::circle(2.0, 2.0, 1.0, 0.1), hier.solve_grid());
    ScalarField eta(hier.solve_grid());
    ForwardOperatorSpec op = bench_op(eta, phi0);
    AmrConfig cfg;
    cfg.threshold = -1.0;  // every cell qualifies, so all blocks refine
    RefinementMap map = regrid(phi0, hier, cfg);
    for (int l = map.base_level + 1; l <= map.top_level; ++l) {
        const CellMask& bm = map.block_masks[std::size_t(l)];
        CHECK(bm.count() == std::uint64_t(bm.n) * bm.n);
    }
    ScalarField uniform = vcycle_fas(phi0, op, hier, CycleConfig{});
    ScalarField masked = vcycle_mlat(phi0, op, hier, map, CycleConfig{});
    CHECK(oracles::inf_diff(uniform, masked) < 1e-12);
}

TEST_CASE("masked benchmark step stays close to the uniform solve") {
    GridHierarchy hier(UniformGrid(2, 64, {0.0, 0.0, 0.0}, 4.0), 16, 16);
    ScalarField phi0 = build_profile(ShapeSpec::circle(2.0, 2.0, 1.0, 0.1), hier.solve_grid());
    ScalarField eta(hier.solve_grid());
    ForwardOperatorSpec op = bench_op(eta, phi0);
    CycleConfig cc;

    ScalarField u_uniform = phi0;
    FasForwardCycler plain(hier, cc, op, hier.solve_level);
    plain.solve(u_uniform);

    RefinementMap map = regrid(phi0, hier, AmrConfig{});
    ScalarField u_masked = phi0;
    FasForwardCycler masked(hier, cc, op, hier.solve_level);
    masked.set_masks(map.cell_masks(hier));
    masked.solve(u_masked);

    CHECK(oracles::inf_diff(u_masked, u_uniform) < 5e-3);
    // inside the refined region the two solves agree much more tightly
    const CellMask cm = map.cell_masks(hier)[std::size_t(map.top_level)];
    double worst = 0.0;
    u_masked.for_interior([&](int i, int j, int k) {
        if (cm.active(i, j, k))
            worst = std::max(worst, std::abs(u_masked.at(i, j, k) - u_uniform.at(i, j, k)));
    });
    CHECK(worst < 1e-4);
}

TEST_CASE("refinement saves most of the fine-level work for a thin interface") {
    GridHierarchy hier(UniformGrid(2, 256, {0.0, 0.0, 0.0}, 4.0), 16, 32);
    ScalarField phi = build_profile(ShapeSpec::circle(2.0, 2.0, 1.0, 0.1), hier.solve_grid());
    RefinementMap map = regrid(phi, hier, AmrConfig{});
    const double frac = double(map.active_cells(hier, hier.solve_level)) /
                        double(hier.solve_grid().cell_count());
    CHECK(frac > 0.0);
    CHECK(frac <= 0.35);
}

TEST_CASE("controller regrids on the configured interval") {
    GridHierarchy hier(UniformGrid(2, 64, {0.0, 0.0, 0.0}, 4.0), 16, 16);
    ScalarField phi = build_profile(ShapeSpec::circle(2.0, 2.0, 1.0, 0.1), hier.solve_grid());
    AmrConfig cfg;
    cfg.regrid_interval = 5;
    AmrController ctl(hier, cfg);
    const std::vector<CellMask>* m1 = ctl.masks_for_step(phi, 1);
    REQUIRE(m1 != nullptr);
    const std::uint64_t cells1 = ctl.max_active_fine_cells();
    // off-interval steps reuse the existing map even if the field changed
    ScalarField shifted = build_profile(ShapeSpec::circle(1.0, 1.0, 0.5, 0.1), hier.solve_grid());
    ctl.masks_for_step(shifted, 2);
    CHECK(ctl.max_active_fine_cells() == cells1);
    RefinementMap before = ctl.map();
    ctl.masks_for_step(shifted, 5);  // regrid step picks up the new interface
    const CellMask& a = before.block_masks[std::size_t(hier.solve_level)];
    const CellMask& b = ctl.map().block_masks[std::size_t(hier.solve_level)];
    CHECK(a.bits != b.bits);
}
