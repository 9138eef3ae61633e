#include <catch2/catch_amalgamated.hpp>

#include "pfopt/shapes.hpp"

using namespace pfopt;

TEST_CASE("circle profile values") {
    ShapeSpec c = ShapeSpec::circle(2.0, 2.0, 1.0, 0.1);
    // at the center the level set is -1, so the profile is tanh(1/eps)
    CHECK(c.profile(2.0, 2.0, 0.0) == Catch::Approx(std::tanh(10.0)).epsilon(1e-12));
    CHECK(c.profile(2.0, 2.0, 0.0) == Catch::Approx(0.9999999958).margin(1e-9));
    // exactly on the zero level set
    CHECK(c.profile(3.0, 2.0, 0.0) == Catch::Approx(0.0).margin(1e-15));
    CHECK(c.profile(2.0, 1.0, 0.0) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("ellipsoid profile at the domain corner") {
    ShapeSpec e = ShapeSpec::ellipsoid(0.5, 0.5, 0.5, 2.0, 1.0, 1.0, 0.25, 0.02);
    // F(0,0,0) = 0.125 + 0.25 + 0.25 - 0.0625
    const double want = std::tanh(-28.125);
    CHECK(e.profile(0.0, 0.0, 0.0) == Catch::Approx(want).epsilon(1e-12));
    CHECK(e.profile(0.0, 0.0, 0.0) == Catch::Approx(-1.0).margin(1e-9));
}

TEST_CASE("profiles stay inside [-1, 1]") {
    // tanh saturates to exactly +-1 in double precision away from the interface
    ShapeSpec c = ShapeSpec::circle(2.0, 2.0, 1.0, 0.1);
    ScalarField f = build_profile(c, UniformGrid(2, 32, {0.0, 0.0, 0.0}, 4.0));
    f.for_interior([&](int i, int j, int k) {
        CHECK(f.at(i, j, k) >= -1.0);
        CHECK(f.at(i, j, k) <= 1.0);
    });
}

TEST_CASE("union takes the pointwise maximum") {
    ShapeSpec u;
    u.kind = ShapeSpec::Kind::UnionMax;
    u.children.push_back(ShapeSpec::circle(1.0, 2.0, 0.5, 0.1));
    u.children.push_back(ShapeSpec::circle(3.0, 2.0, 0.5, 0.1));
    UniformGrid g(2, 32, {0.0, 0.0, 0.0}, 4.0);
    ScalarField f = build_profile(u, g);
    ScalarField a = build_profile(u.children[0], g);
    ScalarField b = build_profile(u.children[1], g);
    f.for_interior([&](int i, int j, int k) {
        CHECK(f.at(i, j, k) == std::max(a.at(i, j, k), b.at(i, j, k)));
    });
}

TEST_CASE("rotated ellipse reduces to the plain ellipse for the identity mix") {
    ShapeSpec r;
    r.kind = ShapeSpec::Kind::RotatedEllipse;
    r.center = {2.0, 2.0, 0.0};
    r.axis_div = {2.0, 1.0, 1.0};
    r.radius = 1.0;
    r.eps = 0.1;
    ShapeSpec e = ShapeSpec::ellipse(2.0, 2.0, 2.0, 1.0, 1.0, 0.1);
    CHECK(r.profile(2.7, 1.6, 0.0) == Catch::Approx(e.profile(2.7, 1.6, 0.0)).margin(1e-15));
}

TEST_CASE("bent tube level set") {
    ShapeSpec t;
    t.kind = ShapeSpec::Kind::BentTube3D;
    t.center = {0.5, 0.5, 0.5};
    t.radius = 0.1;
    t.bent_axis = 0;
    t.bend_along = 2;
    t.bent_weight = 2.0;
    t.axis_weight = {1.0, 4.0, 1.0};
    t.eps = 0.02;
    // F = 2*(u - w^2)^2 + 4*v^2 + w^2 - r^2 at (u,v,w) = (0.04, 0.1, 0.2)
    const double u = 0.04, v = 0.1, w = 0.2;
    const double F = 2.0 * (u - w * w) * (u - w * w) + 4.0 * v * v + w * w - 0.01;
    CHECK(t.profile(0.5 + u, 0.5 + v, 0.5 + w) ==
          Catch::Approx(std::tanh(-F / 0.02)).margin(1e-14));
}

TEST_CASE("shape validation") {
    ShapeSpec bad = ShapeSpec::circle(0.0, 0.0, 1.0, 0.1);
    bad.eps = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ShapeSpec::circle(0.0, 0.0, -1.0, 0.1);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    ShapeSpec u;
    u.kind = ShapeSpec::Kind::UnionMax;
    u.children.push_back(ShapeSpec::circle(0.0, 0.0, 1.0, 0.1));
    CHECK_THROWS_AS(u.validate(), std::invalid_argument);
}

TEST_CASE("mass_target") {
    UniformGrid g(2, 32, {0.0, 0.0, 0.0}, 4.0);
    ScalarField phi0 = build_profile(ShapeSpec::circle(2.0, 2.0, 1.0, 0.1), g);
    ScalarField obs = build_profile(ShapeSpec::ellipse(2.0, 2.0, 2.0, 1.0, 1.0, 0.1), g);
    const double T = 0.125;
    CHECK(mass_target(phi0, obs, 0.0, T) == Catch::Approx(phi0.integrate()).margin(1e-13));
    CHECK(mass_target(phi0, obs, T, T) == Catch::Approx(obs.integrate()).margin(1e-13));
    CHECK(mass_target(phi0, phi0, 0.07, T) == Catch::Approx(phi0.integrate()).margin(1e-13));
    // affine in t
    const double m1 = mass_target(phi0, obs, 0.02, T);
    const double m2 = mass_target(phi0, obs, 0.1, T);
    const double mid = mass_target(phi0, obs, 0.06, T);
    CHECK(m1 + m2 == Catch::Approx(2.0 * mid).margin(1e-12));
    CHECK_THROWS_AS(mass_target(phi0, obs, 0.0, 0.0), std::invalid_argument);
}
