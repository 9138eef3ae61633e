#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pfopt {

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// Cell-centered Cartesian grid, cubic cells, equal cell count per axis.
struct UniformGrid {
    int dim = 2;                       // 2 or 3
    int n = 0;                         // cells per axis, power of two
    std::array<double, 3> origin{0.0, 0.0, 0.0};
    double extent = 0.0;               // same on every axis
    double h = 0.0;                    // extent / n

    UniformGrid() = default;
    UniformGrid(int dim_, int n_, std::array<double, 3> origin_, double extent_)
        : dim(dim_), n(n_), origin(origin_), extent(extent_), h(extent_ / n_) {
        if (dim != 2 && dim != 3)
            throw std::invalid_argument("UniformGrid: dim must be 2 or 3");
        if (n < 2 || !is_power_of_two(n))
            throw std::invalid_argument("UniformGrid: n must be a power of two >= 2");
        if (extent <= 0.0)
            throw std::invalid_argument("UniformGrid: extent must be positive");
    }

    std::size_t cell_count() const {
        std::size_t c = std::size_t(n) * n;
        return dim == 3 ? c * n : c;
    }

    // Cell-center coordinate along one axis.
    double center(int axis, int i) const { return origin[axis] + (i + 0.5) * h; }

    bool same_as(const UniformGrid& o) const {
        return dim == o.dim && n == o.n && origin == o.origin && extent == o.extent;
    }

    // True when `fine` refines *this by exactly factor 2 per axis.
    bool is_coarse_of(const UniformGrid& fine) const {
        return dim == fine.dim && 2 * n == fine.n && origin == fine.origin &&
               extent == fine.extent;
    }

    UniformGrid coarsened() const {
        if (n < 4) throw std::invalid_argument("UniformGrid: cannot coarsen below n=2");
        return UniformGrid(dim, n / 2, origin, extent);
    }
    UniformGrid refined() const { return UniformGrid(dim, n * 2, origin, extent); }
};

/// Factor-2 level stack, coarsest first, with designated storage and solve levels.
/// The forward problem is solved on the solve level; the adjoint problem and all
/// space-time storage live on the storage level.
struct GridHierarchy {
    std::vector<UniformGrid> levels;   // coarsest .. finest
    int storage_level = 0;
    int solve_level = 0;

    GridHierarchy() = default;
    GridHierarchy(const UniformGrid& finest, int coarsest_n, int storage_n) {
        if (!is_power_of_two(coarsest_n) || coarsest_n > finest.n)
            throw std::invalid_argument("GridHierarchy: bad coarsest_n");
        if (!is_power_of_two(storage_n) || storage_n > finest.n || storage_n < coarsest_n)
            throw std::invalid_argument("GridHierarchy: bad storage_n");
        UniformGrid g = finest;
        std::vector<UniformGrid> rev;
        rev.push_back(g);
        while (g.n > coarsest_n) {
            g = g.coarsened();
            rev.push_back(g);
        }
        levels.assign(rev.rbegin(), rev.rend());
        solve_level = int(levels.size()) - 1;
        storage_level = -1;
        for (int l = 0; l < int(levels.size()); ++l)
            if (levels[l].n == storage_n) storage_level = l;
        if (storage_level < 0)
            throw std::invalid_argument("GridHierarchy: storage_n not in level stack");
    }

    int num_levels() const { return int(levels.size()); }
    const UniformGrid& grid(int l) const { return levels.at(std::size_t(l)); }
    const UniformGrid& solve_grid() const { return levels[std::size_t(solve_level)]; }
    const UniformGrid& storage_grid() const { return levels[std::size_t(storage_level)]; }

    int level_of(const UniformGrid& g) const {
        for (int l = 0; l < num_levels(); ++l)
            if (levels[std::size_t(l)].same_as(g)) return l;
        throw std::invalid_argument("GridHierarchy: grid not in hierarchy");
    }
};

}  // namespace pfopt
