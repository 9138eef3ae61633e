#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfopt/grid.hpp"

namespace pfopt {

/// Per-cell scalar values with one ghost layer per face implementing
/// homogeneous Neumann boundaries by mirroring.
class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const UniformGrid& g, double init = 0.0)
        : grid_(g), tx_(g.n + 2), tz_(g.dim == 3 ? g.n + 2 : 1) {
        data_.assign(std::size_t(tx_) * tx_ * tz_, init);
    }

    const UniformGrid& grid() const { return grid_; }
    int n() const { return grid_.n; }
    int dim() const { return grid_.dim; }
    int nz() const { return grid_.dim == 3 ? grid_.n : 1; }

    // i,j in [-1, n]; k in [-1, n] for 3-D, must be 0 in 2-D.
    double& at(int i, int j, int k = 0) {
        return data_[idx(i, j, k)];
    }
    double at(int i, int j, int k = 0) const { return data_[idx(i, j, k)]; }

    double* raw() { return data_.data(); }
    const double* raw() const { return data_.data(); }
    std::size_t raw_size() const { return data_.size(); }

    /// Mirror ghost values from the adjacent interior cells. Faces are filled
    /// per axis in sequence so edge and corner ghosts end up tensor-mirrored.
    void fill_ghosts() {
        const int n = grid_.n;
        const int kmax = nz();
        for (int k = 0; k < kmax; ++k)
            for (int j = 0; j < n; ++j) {
                at(-1, j, k) = at(0, j, k);
                at(n, j, k) = at(n - 1, j, k);
            }
        for (int k = 0; k < kmax; ++k)
            for (int i = -1; i <= n; ++i) {
                at(i, -1, k) = at(i, 0, k);
                at(i, n, k) = at(i, n - 1, k);
            }
        if (grid_.dim == 3)
            for (int j = -1; j <= n; ++j)
                for (int i = -1; i <= n; ++i) {
                    at(i, j, -1) = at(i, j, 0);
                    at(i, j, n) = at(i, j, n - 1);
                }
    }

    template <class F>
    void for_interior(F&& f) const {
        const int n = grid_.n, kmax = nz();
        for (int k = 0; k < kmax; ++k)
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) f(i, j, k);
    }

    void fill(double v) { data_.assign(data_.size(), v); }

    /// Midpoint quadrature: h^d * sum over interior cells.
    double integrate() const {
        double s = 0.0;
        for_interior([&](int i, int j, int k) { s += at(i, j, k); });
        if (!std::isfinite(s))
            throw std::runtime_error("ScalarField::integrate: non-finite values");
        double hd = grid_.h * grid_.h;
        if (grid_.dim == 3) hd *= grid_.h;
        return hd * s;
    }

    double inf_norm() const {
        double m = 0.0;
        for_interior([&](int i, int j, int k) { m = std::max(m, std::abs(at(i, j, k))); });
        return m;
    }

    void require_same_grid(const ScalarField& o, const char* what) const {
        if (!grid_.same_as(o.grid_))
            throw std::invalid_argument(std::string(what) + ": grid mismatch");
    }

    // ---- dump format: plain-text header then row-major cell values ----

    void dump_text(std::ostream& os, const std::string& name, double time = 0.0) const {
        write_header(os, name, time, "text");
        os << std::setprecision(17);
        for_interior([&](int i, int j, int k) { os << at(i, j, k) << "\n"; });
    }

    void dump_binary(std::ostream& os, const std::string& name, double time = 0.0) const {
        write_header(os, name, time, "binary");
        // little-endian 64-bit floats, row-major interior cells
        for_interior([&](int i, int j, int k) {
            double v = at(i, j, k);
            os.write(reinterpret_cast<const char*>(&v), sizeof(double));
        });
    }

    void dump_text(const std::string& path, const std::string& name, double time = 0.0) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot open " + path);
        dump_text(os, name, time);
    }
    void dump_binary(const std::string& path, const std::string& name, double time = 0.0) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open " + path);
        dump_binary(os, name, time);
    }

    static ScalarField load(std::istream& is) {
        std::string line, fmt, name;
        int dim = 0, n = 0;
        std::array<double, 3> origin{};
        double extent = 0.0, time = 0.0;
        // header lines: key value
        for (;;) {
            if (!std::getline(is, line)) throw std::runtime_error("field load: truncated header");
            if (line == "data") break;
            std::istringstream ls(line);
            std::string key;
            ls >> key;
            if (key == "format") ls >> fmt;
            else if (key == "dimension") ls >> dim;
            else if (key == "cells") ls >> n;
            else if (key == "origin") ls >> origin[0] >> origin[1] >> origin[2];
            else if (key == "extent") ls >> extent;
            else if (key == "time") ls >> time;
            else if (key == "name") ls >> name;
        }
        ScalarField f(UniformGrid(dim, n, origin, extent));
        if (fmt == "binary") {
            f.for_interior([&](int i, int j, int k) {
                double v;
                is.read(reinterpret_cast<char*>(&v), sizeof(double));
                f.at(i, j, k) = v;
            });
        } else {
            f.for_interior([&](int i, int j, int k) {
                if (!(is >> f.at(i, j, k)))
                    throw std::runtime_error("field load: truncated data");
            });
        }
        f.fill_ghosts();
        return f;
    }

    static ScalarField load(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw std::runtime_error("cannot open " + path);
        return load(is);
    }

private:
    std::size_t idx(int i, int j, int k) const {
        const int gz = grid_.dim == 3 ? 1 : 0;
        return (std::size_t(k + gz) * tx_ + std::size_t(j + 1)) * tx_ + std::size_t(i + 1);
    }

    void write_header(std::ostream& os, const std::string& name, double time,
                      const char* fmt) const {
        os << "format " << fmt << "\n"
           << "dimension " << grid_.dim << "\n"
           << "cells " << grid_.n << "\n"
           << std::setprecision(17) << "origin " << grid_.origin[0] << " " << grid_.origin[1]
           << " " << grid_.origin[2] << "\n"
           << "extent " << grid_.extent << "\n"
           << "time " << time << "\n"
           << "name " << (name.empty() ? "field" : name) << "\n"
           << "data\n";
    }

    UniformGrid grid_;
    int tx_ = 0, tz_ = 0;
    std::vector<double> data_;
};

/// 5-point (2-D) / 7-point (3-D) Laplacian; ghosts of `f` must be filled.
inline ScalarField apply_laplacian(const ScalarField& f) {
    ScalarField out(f.grid());
    const double inv_h2 = 1.0 / (f.grid().h * f.grid().h);
    const int twod = 2 * f.dim();
    const bool is3d = f.dim() == 3;
    f.for_interior([&](int i, int j, int k) {
        double s = f.at(i - 1, j, k) + f.at(i + 1, j, k) + f.at(i, j - 1, k) + f.at(i, j + 1, k);
        if (is3d) s += f.at(i, j, k - 1) + f.at(i, j, k + 1);
        out.at(i, j, k) = (s - twod * f.at(i, j, k)) * inv_h2;
    });
    out.fill_ghosts();
    return out;
}

}  // namespace pfopt
