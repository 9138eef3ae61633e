#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "pfopt/multigrid.hpp"
#include "pfopt/shapes.hpp"

using namespace pfopt;

namespace {

struct BenchStep {
    GridHierarchy hier;
    ScalarField phi0, eta;
    ForwardOperatorSpec op;

    explicit BenchStep(int n, int coarsest = 16)
        : hier(UniformGrid(2, n, {0.0, 0.0, 0.0}, 4.0), std::min(coarsest, n / 2), n),
          phi0(build_profile(ShapeSpec::circle(2.0, 2.0, 1.0, 0.1), hier.solve_grid())),
          eta(hier.solve_grid()) {
        op.eps = 0.1;
        op.tau = 7.8125e-4;
        op.scheme = StepScheme::bdf1();
        op.eta = &eta;
        op.phi_n = &phi0;
    }
};

double measured_rate(const std::vector<double>& hist) {
    REQUIRE(hist.size() >= 2);
    return std::pow(hist.back() / hist.front(), 1.0 / double(hist.size() - 1));
}

}  // namespace

TEST_CASE("FAS V-cycle fixed point") {
    BenchStep b(16, 4);
    auto [u, res] = solve_to_tolerance(b.phi0, b.op, b.hier, CycleConfig{});
    REQUIRE(res.residual_history.back() < 1e-11);
    ScalarField cycled = vcycle_fas(u, b.op, b.hier, CycleConfig{});
    CHECK(oracles::inf_diff(cycled, u) < 1e-10);
}

TEST_CASE("iterated FAS V-cycles match the dense Newton solve on 16x16") {
    BenchStep b(16, 4);
    auto [u, res] = solve_to_tolerance(b.phi0, b.op, b.hier, CycleConfig{});
    ScalarField ref = oracles::dense_forward_solve(b.op, b.hier.solve_grid(), b.phi0);
    CHECK(oracles::inf_diff(u, ref) < 1e-9);
}

TEST_CASE("benchmark forward step contraction on 64x64") {
    BenchStep b(64);
    ScalarField u = b.phi0;
    FasForwardCycler c(b.hier, CycleConfig{}, b.op, b.hier.solve_level);
    SolveResult res = c.solve(u);
    CHECK(measured_rate(res.residual_history) <= 0.25);
}

TEST_CASE("solve_to_tolerance bookkeeping") {
    BenchStep b(16, 4);
    SECTION("already converged input takes zero cycles") {
        auto [u, first] = solve_to_tolerance(b.phi0, b.op, b.hier, CycleConfig{});
        auto [v, again] = solve_to_tolerance(u, b.op, b.hier, CycleConfig{});
        CHECK(again.cycles == 0);
        CHECK(oracles::inf_diff(u, v) == 0.0);
    }
    SECTION("cycle exhaustion raises with the residual history attached") {
        CycleConfig cfg;
        cfg.max_cycles = 1;
        cfg.tolerance = 1e-30;
        try {
            solve_to_tolerance(b.phi0, b.op, b.hier, cfg);
            FAIL("expected ConvergenceError");
        } catch (const ConvergenceError& e) {
            CHECK(e.residual_history.size() == 2);
        }
    }
}

TEST_CASE("contraction rates are nearly grid independent") {
    // measured at the larger desk time step, where the diffusion term dominates
    // on all three grids and the asymptotic cycle rate is what gets sampled
    std::vector<double> rates;
    for (int n : {64, 128, 256}) {
        BenchStep b(n);
        b.op.tau = 0.0125;
        ScalarField u = b.phi0;
        FasForwardCycler c(b.hier, CycleConfig{}, b.op, b.hier.solve_level);
        const double r = measured_rate(c.solve(u).residual_history);
        CHECK(r <= 0.3);
        rates.push_back(r);
    }
    const auto [mn, mx] = std::minmax_element(rates.begin(), rates.end());
    CHECK(*mx / *mn < 2.0);
}

TEST_CASE("linear adjoint V-cycle") {
    UniformGrid g(2, 16, {0.0, 0.0, 0.0}, 4.0);
    GridHierarchy hier(g, 4, 16);
    ScalarField phi = build_profile(ShapeSpec::circle(2.0, 2.0, 1.0, 0.1), g);
    ScalarField h1 = oracles::random_field(g, 61);
    AdjointOperatorSpec op;
    op.eps = 0.1;
    op.tau = 7.8125e-4;
    op.scheme = StepScheme::bdf1();
    op.phi = &phi;
    op.p_np2 = &h1;

    SECTION("converged result matches the dense direct solve") {
        ScalarField p(g);
        auto [sol, res] = solve_to_tolerance(p, op, hier, CycleConfig{});
        ScalarField ref = oracles::dense_adjoint_solve(op, g);
        CHECK(oracles::inf_diff(sol, ref) < 1e-9);
        // fixed point
        ScalarField cycled = vcycle_linear(sol, op, hier, CycleConfig{});
        CHECK(oracles::inf_diff(cycled, sol) < 1e-10);
    }
}

TEST_CASE("benchmark adjoint step contraction on 64x64") {
    UniformGrid g(2, 64, {0.0, 0.0, 0.0}, 4.0);
    GridHierarchy hier(g, 16, 64);
    ScalarField phi = build_profile(ShapeSpec::circle(2.0, 2.0, 1.0, 0.1), g);
    ScalarField obs = build_profile(ShapeSpec::ellipse(2.0, 2.0, 2.0, 1.0, 1.0, 0.1), g);
    ScalarField h1(g);
    h1.for_interior([&](int i, int j, int k) { h1.at(i, j, k) = phi.at(i, j, k) - obs.at(i, j, k); });
    h1.fill_ghosts();
    AdjointOperatorSpec op;
    op.eps = 0.1;
    op.tau = 7.8125e-4;
    op.scheme = StepScheme::bdf1();
    op.phi = &phi;
    op.p_np2 = &h1;
    LinearAdjointCycler c(hier, CycleConfig{}, op, hier.solve_level);
    ScalarField p(g);
    SolveResult res = c.solve(p);
    CHECK(measured_rate(res.residual_history) <= 0.25);
}

TEST_CASE("cycler level-range validation") {
    BenchStep b(16, 4);
    CycleConfig cfg;
    cfg.coarsest_level = 5;
    CHECK_THROWS_AS(FasForwardCycler(b.hier, cfg, b.op, b.hier.solve_level),
                    std::invalid_argument);
}
