#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfopt/field.hpp"
#include "pfopt/grid.hpp"

namespace pfopt {

/// Analytic level-set shape; the diffuse profile is tanh(-F(x)/eps).
struct ShapeSpec {
    enum class Kind { Circle, Ellipse, Sphere, Ellipsoid, RotatedEllipse, UnionMax, BentTube3D };

    Kind kind = Kind::Circle;
    std::array<double, 3> center{0.0, 0.0, 0.0};
    double radius = 1.0;                        // F uses radius^2 on the right-hand side
    std::array<double, 3> axis_div{1.0, 1.0, 1.0};  // per-axis divisors for (x_i-c_i)^2
    // RotatedEllipse: ((m11 u + m12 v)^2)/axis_div[0] + ((m21 u + m22 v)^2)/axis_div[1] - r^2
    std::array<double, 4> mix{1.0, 0.0, 0.0, 1.0};
    // BentTube3D: w_bent*(u_a - u_b^2)^2 + sum_{i != a} w[i]*u_i^2 - r^2
    int bent_axis = 0;
    int bend_along = 2;
    double bent_weight = 1.0;
    std::array<double, 3> axis_weight{1.0, 1.0, 1.0};
    double eps = 0.1;                           // interface width
    std::vector<ShapeSpec> children;            // UnionMax: exactly two sub-shapes

    void validate() const {
        if (eps <= 0.0) throw std::invalid_argument("ShapeSpec: eps must be positive");
        if (radius <= 0.0) throw std::invalid_argument("ShapeSpec: radius must be positive");
        for (double d : axis_div)
            if (d <= 0.0) throw std::invalid_argument("ShapeSpec: axis divisors must be positive");
        if (kind == Kind::UnionMax) {
            if (children.size() != 2)
                throw std::invalid_argument("ShapeSpec: union_max needs two sub-shapes");
            for (const auto& c : children) c.validate();
        }
    }

    double level_set(double x, double y, double z) const {
        const double u = x - center[0], v = y - center[1], w = z - center[2];
        switch (kind) {
            case Kind::Circle:
                return u * u + v * v - radius * radius;
            case Kind::Sphere:
                return u * u + v * v + w * w - radius * radius;
            case Kind::Ellipse:
                return u * u / axis_div[0] + v * v / axis_div[1] - radius * radius;
            case Kind::Ellipsoid:
                return u * u / axis_div[0] + v * v / axis_div[1] + w * w / axis_div[2] -
                       radius * radius;
            case Kind::RotatedEllipse: {
                const double a = mix[0] * u + mix[1] * v;
                const double b = mix[2] * u + mix[3] * v;
                return a * a / axis_div[0] + b * b / axis_div[1] - radius * radius;
            }
            case Kind::BentTube3D: {
                const std::array<double, 3> p{u, v, w};
                double f = bent_weight * (p[std::size_t(bent_axis)] -
                                          p[std::size_t(bend_along)] * p[std::size_t(bend_along)]) *
                           (p[std::size_t(bent_axis)] -
                            p[std::size_t(bend_along)] * p[std::size_t(bend_along)]);
                for (int i = 0; i < 3; ++i)
                    if (i != bent_axis) f += axis_weight[std::size_t(i)] * p[std::size_t(i)] * p[std::size_t(i)];
                return f - radius * radius;
            }
            case Kind::UnionMax:
                return 0.0;  // handled in profile(): max of child profiles
        }
        return 0.0;
    }

    double profile(double x, double y, double z) const {
        if (kind == Kind::UnionMax)
            return std::max(children[0].profile(x, y, z), children[1].profile(x, y, z));
        return std::tanh(-level_set(x, y, z) / eps);
    }

    static ShapeSpec circle(double cx, double cy, double r, double eps) {
        ShapeSpec s;
        s.kind = Kind::Circle;
        s.center = {cx, cy, 0.0};
        s.radius = r;
        s.eps = eps;
        return s;
    }
    static ShapeSpec ellipse(double cx, double cy, double dx, double dy, double r, double eps) {
        ShapeSpec s;
        s.kind = Kind::Ellipse;
        s.center = {cx, cy, 0.0};
        s.axis_div = {dx, dy, 1.0};
        s.radius = r;
        s.eps = eps;
        return s;
    }
    static ShapeSpec sphere(double cx, double cy, double cz, double r, double eps) {
        ShapeSpec s;
        s.kind = Kind::Sphere;
        s.center = {cx, cy, cz};
        s.radius = r;
        s.eps = eps;
        return s;
    }
    static ShapeSpec ellipsoid(double cx, double cy, double cz, double dx, double dy, double dz,
                               double r, double eps) {
        ShapeSpec s;
        s.kind = Kind::Ellipsoid;
        s.center = {cx, cy, cz};
        s.axis_div = {dx, dy, dz};
        s.radius = r;
        s.eps = eps;
        return s;
    }
};

/// Pointwise evaluation of the diffuse profile at cell centers.
inline ScalarField build_profile(const ShapeSpec& spec, const UniformGrid& grid) {
    spec.validate();
    ScalarField out(grid);
    out.for_interior([&](int i, int j, int k) {
        const double x = grid.center(0, i);
        const double y = grid.center(1, j);
        const double z = grid.dim == 3 ? grid.center(2, k) : 0.0;
        out.at(i, j, k) = spec.profile(x, y, z);
    });
    out.fill_ghosts();
    return out;
}

/// Linear-in-time interpolant of the masses of the initial and target profiles.
inline double mass_target(const ScalarField& phi0, const ScalarField& phi_obs, double t,
                          double T) {
    phi0.require_same_grid(phi_obs, "mass_target");
    if (T <= 0.0) throw std::invalid_argument("mass_target: T must be positive");
    const double m0 = phi0.integrate();
    return m0 + (t / T) * (phi_obs.integrate() - m0);
}

}  // namespace pfopt
