#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "pfopt/transfer.hpp"

using namespace pfopt;

TEST_CASE("restriction") {
    UniformGrid fine(2, 8, {0.0, 0.0, 0.0}, 2.0);
    UniformGrid coarse = fine.coarsened();
    SECTION("preserves constants") {
        ScalarField c(fine, 1.75);
        ScalarField r = restrict_field(c, coarse);
        r.for_interior([&](int i, int j, int k) { CHECK(r.at(i, j, k) == 1.75); });
    }
    SECTION("exact on linear fields") {
        ScalarField f(fine);
        f.for_interior([&](int i, int j, int) {
            f.at(i, j) = fine.center(0, i) + fine.center(1, j);
        });
        ScalarField r = restrict_field(f, coarse);
        r.for_interior([&](int i, int j, int) {
            CHECK(r.at(i, j) ==
                  Catch::Approx(coarse.center(0, i) + coarse.center(1, j)).margin(1e-14));
        });
    }
    SECTION("matches brute-force child averaging") {
        UniformGrid f4(2, 4, {0.0, 0.0, 0.0}, 1.0);
        ScalarField f = oracles::random_field(f4, 17);
        ScalarField r = restrict_field(f, f4.coarsened());
        for (int j = 0; j < 2; ++j)
            for (int i = 0; i < 2; ++i) {
                const double avg = 0.25 * (f.at(2 * i, 2 * j) + f.at(2 * i + 1, 2 * j) +
                                           f.at(2 * i, 2 * j + 1) + f.at(2 * i + 1, 2 * j + 1));
                CHECK(std::abs(r.at(i, j) - avg) < 1e-15);
            }
    }
    SECTION("preserves the integral") {
        ScalarField f = oracles::random_field(fine, 29);
        CHECK(restrict_field(f, coarse).integrate() == Catch::Approx(f.integrate()).margin(1e-13));
    }
    SECTION("rejects misaligned grids") {
        CHECK_THROWS_AS(restrict_field(ScalarField(fine), UniformGrid(2, 2, {0, 0, 0}, 2.0)),
                        std::invalid_argument);
    }
}

TEST_CASE("prolongation") {
    UniformGrid coarse(2, 4, {0.0, 0.0, 0.0}, 1.0);
    UniformGrid fine = coarse.refined();
    SECTION("preserves constants") {
        ScalarField c(coarse, -0.5);
        c.fill_ghosts();
        ScalarField p = prolong_field(c, fine);
        p.for_interior([&](int i, int j, int k) { CHECK(p.at(i, j, k) == -0.5); });
    }
    SECTION("reproduces linears away from the boundary") {
        UniformGrid c16(2, 16, {0.0, 0.0, 0.0}, 4.0);
        ScalarField f(c16);
        f.for_interior([&](int i, int j, int) {
            f.at(i, j) = c16.center(0, i) + c16.center(1, j);
        });
        UniformGrid f32 = c16.refined();
        ScalarField p = prolong_field(f, f32);
        for (int j = 2; j < 30; ++j)
            for (int i = 2; i < 30; ++i)
                CHECK(p.at(i, j) ==
                      Catch::Approx(f32.center(0, i) + f32.center(1, j)).margin(1e-13));
    }
    SECTION("matches the weight-table oracle") {
        UniformGrid c2(2, 2, {0.0, 0.0, 0.0}, 1.0);
        ScalarField f = oracles::random_field(c2, 31);
        f.fill_ghosts();
        ScalarField p = prolong_field(f, c2.refined());
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i) {
                const int ic = i / 2, jc = j / 2;
                const int di = (i % 2) ? 1 : -1, dj = (j % 2) ? 1 : -1;
                const double want = 0.5625 * f.at(ic, jc) + 0.1875 * f.at(ic + di, jc) +
                                    0.1875 * f.at(ic, jc + dj) + 0.0625 * f.at(ic + di, jc + dj);
                CHECK(std::abs(p.at(i, j) - want) < 1e-15);
            }
    }
}

TEST_CASE("multi-level transfer") {
    GridHierarchy h(UniformGrid(2, 16, {0.0, 0.0, 0.0}, 1.0), 4, 4);
    SECTION("same level is the identity") {
        ScalarField f = oracles::random_field(h.grid(2), 13);
        CHECK(oracles::inf_diff(prolong_to_level(f, h, 2), f) == 0.0);
    }
    SECTION("two levels up equals composed single prolongations") {
        ScalarField f = oracles::random_field(h.grid(0), 19);
        ScalarField once = prolong_field(f, h.grid(1));
        ScalarField twice = prolong_field(once, h.grid(2));
        CHECK(oracles::inf_diff(prolong_to_level(f, h, 2), twice) == 0.0);
        ScalarField c(h.grid(0), 2.5);
        CHECK(prolong_to_level(c, h, 2).inf_norm() == 2.5);
    }
    SECTION("restrict_to_level and direction errors") {
        ScalarField f = oracles::random_field(h.grid(2), 23);
        CHECK(restrict_to_level(f, h, 0).grid().n == 4);
        CHECK_THROWS_AS(restrict_to_level(ScalarField(h.grid(0)), h, 2), std::invalid_argument);
        CHECK_THROWS_AS(prolong_to_level(f, h, 0), std::invalid_argument);
    }
    SECTION("restrict of prolong is the identity on constants") {
        ScalarField c(h.grid(1), 0.75);
        c.fill_ghosts();
        ScalarField round = restrict_field(prolong_field(c, h.grid(2)), h.grid(1));
        round.for_interior([&](int i, int j, int k) { CHECK(round.at(i, j, k) == 0.75); });
    }
}

TEST_CASE("3-D transfer") {
    UniformGrid coarse(3, 4, {0.0, 0.0, 0.0}, 1.0);
    ScalarField f = oracles::random_field(coarse, 37);
    ScalarField p = prolong_field(f, coarse.refined());
    ScalarField back = restrict_field(p, coarse);
    // restriction after prolongation keeps the integral
    CHECK(back.integrate() == Catch::Approx(p.integrate()).margin(1e-13));
    ScalarField c(coarse, 1.5);
    c.fill_ghosts();
    CHECK(prolong_field(c, coarse.refined()).inf_norm() == 1.5);
}
