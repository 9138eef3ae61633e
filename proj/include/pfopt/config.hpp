#pragma once

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfopt/shapes.hpp"

namespace pfopt {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Flat structured-text key/value store with [section] headers. Keys are
/// addressed as "section.key". Serialization is deterministic so that
/// parse -> serialize -> parse round-trips exactly.
class KeyValueConfig {
public:
    static KeyValueConfig parse(const std::string& text) {
        KeyValueConfig cfg;
        std::istringstream is(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            std::string t = trim(line);
            if (t.empty() || t[0] == '#' || t[0] == ';') continue;
            if (t.front() == '[') {
                if (t.back() != ']')
                    throw ConfigError("line " + std::to_string(lineno) +
                                      ": malformed section header");
                section = trim(t.substr(1, t.size() - 2));
                if (section.empty())
                    throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
            std::string key = trim(t.substr(0, eq));
            std::string value = trim(t.substr(eq + 1));
            if (key.empty())
                throw ConfigError("line " + std::to_string(lineno) + ": empty key");
            cfg.values_[section.empty() ? key : section + "." + key] = value;
        }
        return cfg;
    }

    std::string serialize() const {
        std::ostringstream os;
        std::string current;
        bool first = true;
        for (const auto& [full, value] : values_) {
            const auto dot = full.find('.');
            const std::string section = dot == std::string::npos ? "" : full.substr(0, dot);
            const std::string key = dot == std::string::npos ? full : full.substr(dot + 1);
            if (section != current || first) {
                if (!first) os << "\n";
                os << "[" << section << "]\n";
                current = section;
                first = false;
            }
            os << key << " = " << value << "\n";
        }
        return os.str();
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void set(const std::string& key, const char* value) { values_[key] = value; }
    void set(const std::string& key, double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        values_[key] = os.str();
    }
    void set(const std::string& key, int v) { values_[key] = std::to_string(v); }
    void set(const std::string& key, bool v) { values_[key] = v ? "true" : "false"; }

    std::string get_string(const std::string& key, const std::string& def = "") const {
        auto it = values_.find(key);
        return it == values_.end() ? def : it->second;
    }
    double get_double(const std::string& key, double def) const {
        auto it = values_.find(key);
        if (it == values_.end()) return def;
        try {
            std::size_t pos = 0;
            double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw ConfigError("key '" + key + "': cannot parse '" + it->second + "' as number");
        }
    }
    int get_int(const std::string& key, int def) const {
        const double v = get_double(key, double(def));
        if (v != std::floor(v))
            throw ConfigError("key '" + key + "': expected an integer");
        return int(v);
    }
    bool get_bool(const std::string& key, bool def) const {
        auto it = values_.find(key);
        if (it == values_.end()) return def;
        if (it->second == "true" || it->second == "1" || it->second == "on") return true;
        if (it->second == "false" || it->second == "0" || it->second == "off") return false;
        throw ConfigError("key '" + key + "': expected a boolean");
    }
    std::vector<double> get_doubles(const std::string& key,
                                    const std::vector<double>& def) const {
        auto it = values_.find(key);
        if (it == values_.end()) return def;
        std::istringstream is(it->second);
        std::vector<double> out;
        double v;
        while (is >> v) out.push_back(v);
        if (!is.eof())
            throw ConfigError("key '" + key + "': cannot parse number list");
        return out;
    }
    std::vector<int> get_ints(const std::string& key, const std::vector<int>& def) const {
        std::vector<double> d = get_doubles(key, {});
        if (d.empty() && !has(key)) return def;
        std::vector<int> out;
        for (double v : d) out.push_back(int(v));
        return out;
    }

    const std::map<std::string, std::string>& values() const { return values_; }
    bool operator==(const KeyValueConfig& o) const { return values_ == o.values_; }

    /// Apply a "key=value" override (CLI --set).
    void apply_override(const std::string& spec) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override '" + spec + "': expected key=value");
        values_[trim(spec.substr(0, eq))] = trim(spec.substr(eq + 1));
    }

private:
    static std::string trim(const std::string& s) {
        std::size_t b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        std::size_t e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> values_;
};

// ---- shape parsing: keys like "shapes.phi0.kind", recursive for union ----

inline ShapeSpec parse_shape(const KeyValueConfig& kv, const std::string& prefix, double eps) {
    ShapeSpec s;
    s.eps = eps;
    const std::string kind = kv.get_string(prefix + ".kind");
    if (kind == "circle") s.kind = ShapeSpec::Kind::Circle;
    else if (kind == "ellipse") s.kind = ShapeSpec::Kind::Ellipse;
    else if (kind == "sphere") s.kind = ShapeSpec::Kind::Sphere;
    else if (kind == "ellipsoid") s.kind = ShapeSpec::Kind::Ellipsoid;
    else if (kind == "rotated_ellipse") s.kind = ShapeSpec::Kind::RotatedEllipse;
    else if (kind == "union_max") s.kind = ShapeSpec::Kind::UnionMax;
    else if (kind == "bent_tube_3d") s.kind = ShapeSpec::Kind::BentTube3D;
    else throw ConfigError("shape '" + prefix + "': unknown kind '" + kind + "'");

    if (s.kind == ShapeSpec::Kind::UnionMax) {
        s.children.push_back(parse_shape(kv, prefix + ".a", eps));
        s.children.push_back(parse_shape(kv, prefix + ".b", eps));
        return s;
    }
    auto vec3 = [&](const std::string& key, std::array<double, 3> def) {
        std::vector<double> v = kv.get_doubles(key, {def[0], def[1], def[2]});
        std::array<double, 3> out = def;  // unspecified trailing components keep defaults
        for (std::size_t i = 0; i < v.size() && i < 3; ++i) out[i] = v[i];
        return out;
    };
    s.center = vec3(prefix + ".center", {0.0, 0.0, 0.0});
    s.radius = kv.get_double(prefix + ".radius", 1.0);
    s.axis_div = vec3(prefix + ".axis_div", {1.0, 1.0, 1.0});
    std::vector<double> mix = kv.get_doubles(prefix + ".mix", {1.0, 0.0, 0.0, 1.0});
    for (std::size_t i = 0; i < mix.size() && i < 4; ++i) s.mix[i] = mix[i];
    s.bent_axis = kv.get_int(prefix + ".bent_axis", 0);
    s.bend_along = kv.get_int(prefix + ".bend_along", 2);
    s.bent_weight = kv.get_double(prefix + ".bent_weight", 1.0);
    s.axis_weight = vec3(prefix + ".axis_weight", {1.0, 1.0, 1.0});
    return s;
}

enum class ExperimentKind {
    Optimize,
    ConvergenceTable,
    MgRate,
    ComplexityTiming,
    AlphaStudy,
    TwoGridCompare,
};

inline ExperimentKind parse_experiment_kind(const std::string& s) {
    if (s == "optimize") return ExperimentKind::Optimize;
    if (s == "convergence_table") return ExperimentKind::ConvergenceTable;
    if (s == "mg_rate") return ExperimentKind::MgRate;
    if (s == "complexity_timing") return ExperimentKind::ComplexityTiming;
    if (s == "alpha_study") return ExperimentKind::AlphaStudy;
    if (s == "two_grid_compare") return ExperimentKind::TwoGridCompare;
    throw ConfigError("unknown experiment kind '" + s + "'");
}

inline const char* experiment_kind_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Optimize: return "optimize";
        case ExperimentKind::ConvergenceTable: return "convergence_table";
        case ExperimentKind::MgRate: return "mg_rate";
        case ExperimentKind::ComplexityTiming: return "complexity_timing";
        case ExperimentKind::AlphaStudy: return "alpha_study";
        case ExperimentKind::TwoGridCompare: return "two_grid_compare";
    }
    return "?";
}

/// Typed experiment configuration assembled from the key/value file.
struct ExperimentConfig {
    // problem
    double eps = 0.1;
    double theta = 0.01;
    double T = 0.125;
    double tau = 7.8125e-4;
    double alpha0 = 0.1;
    double p_l = 0.5;
    double p_u = 1.1;
    double alpha_min = 0.0;  // 0 -> 1e-3 * alpha0
    double tol_lambda = 0.01;
    double residual_tol = 1e-11;
    double stop_absolute_J = 0.0;
    double stop_relative_dJ = 0.0;
    double stop_absolute_dJ = 0.0;
    int max_eta_iterations = 50;
    bool use_constraint = true;
    bool adaptive_alpha = true;
    bool fidelity_on_storage = false;

    // grid
    int dim = 2;
    std::array<double, 3> domain_origin{0.0, 0.0, 0.0};
    double domain_extent = 4.0;
    int solve_n = 64;
    int storage_n = 64;
    int coarsest_n = 16;
    bool amr = false;
    int amr_block = 8;
    int amr_interval = 5;
    double amr_threshold = 0.19;

    // multigrid
    int nu1 = 2;
    int nu2 = 2;
    int coarsest_sweeps = 50;
    int max_cycles = 100;

    // shapes
    ShapeSpec phi0_shape;
    ShapeSpec obs_shape;

    // experiment
    ExperimentKind kind = ExperimentKind::Optimize;
    std::string output_dir = "out";
    int threads = 1;
    int snapshot_every = 0;  // 0 = no field snapshots
    bool deterministic = true;

    // experiment-kind extras
    int bench_n = 256;          // reference grid for error tables
    int bench_steps = 80;
    std::vector<int> ladder{32, 64, 128};
    std::vector<int> ladder_steps{10, 20, 40};
    std::vector<double> probe_times{0.0125, 0.0625, 0.125};
    std::vector<int> mg_sizes{64, 128, 256};
    std::vector<double> alpha_pu{1.1, 1.2, 1.3};
    std::vector<double> alpha_pl{0.5, 0.4, 0.3};
    int fixed_alpha_iters = 50;
    int twogrid_storage_n = 32;

    int num_steps() const {
        const double steps = T / tau;
        const int n = int(std::lround(steps));
        if (n < 1 || std::abs(steps - n) > 1e-9 * std::max(1.0, steps))
            throw ConfigError("T/tau must be a whole number of steps");
        return n;
    }

    static ExperimentConfig from_kv(const KeyValueConfig& kv) {
        ExperimentConfig c;
        c.eps = kv.get_double("problem.eps", c.eps);
        c.theta = kv.get_double("problem.theta", c.theta);
        c.T = kv.get_double("problem.T", c.T);
        c.tau = kv.get_double("problem.tau", c.tau);
        c.alpha0 = kv.get_double("problem.alpha0", c.alpha0);
        c.p_l = kv.get_double("problem.p_l", c.p_l);
        c.p_u = kv.get_double("problem.p_u", c.p_u);
        c.alpha_min = kv.get_double("problem.alpha_min", c.alpha_min);
        c.tol_lambda = kv.get_double("problem.tol_lambda", c.tol_lambda);
        c.residual_tol = kv.get_double("problem.residual_tol", c.residual_tol);
        c.stop_absolute_J = kv.get_double("problem.stop_absolute_J", c.stop_absolute_J);
        c.stop_relative_dJ = kv.get_double("problem.stop_relative_dJ", c.stop_relative_dJ);
        c.stop_absolute_dJ = kv.get_double("problem.stop_absolute_dJ", c.stop_absolute_dJ);
        c.max_eta_iterations = kv.get_int("problem.max_eta_iterations", c.max_eta_iterations);
        c.use_constraint = kv.get_bool("problem.use_constraint", c.use_constraint);
        c.adaptive_alpha = kv.get_bool("problem.adaptive_alpha", c.adaptive_alpha);
        c.fidelity_on_storage = kv.get_bool("problem.fidelity_on_storage", c.fidelity_on_storage);

        c.dim = kv.get_int("grid.dim", c.dim);
        std::vector<double> org = kv.get_doubles("grid.origin", {0.0, 0.0, 0.0});
        for (std::size_t i = 0; i < org.size() && i < 3; ++i) c.domain_origin[i] = org[i];
        c.domain_extent = kv.get_double("grid.extent", c.domain_extent);
        c.solve_n = kv.get_int("grid.solve_n", c.solve_n);
        c.storage_n = kv.get_int("grid.storage_n", c.storage_n);
        c.coarsest_n = kv.get_int("grid.coarsest_n", c.coarsest_n);
        c.amr = kv.get_bool("grid.amr", c.amr);
        c.amr_block = kv.get_int("grid.amr_block", c.amr_block);
        c.amr_interval = kv.get_int("grid.amr_interval", c.amr_interval);
        c.amr_threshold = kv.get_double("grid.amr_threshold", c.amr_threshold);

        c.nu1 = kv.get_int("multigrid.nu1", c.nu1);
        c.nu2 = kv.get_int("multigrid.nu2", c.nu2);
        c.coarsest_sweeps = kv.get_int("multigrid.coarsest_sweeps", c.coarsest_sweeps);
        c.max_cycles = kv.get_int("multigrid.max_cycles", c.max_cycles);

        if (kv.has("shapes.phi0.kind")) c.phi0_shape = parse_shape(kv, "shapes.phi0", c.eps);
        if (kv.has("shapes.obs.kind")) c.obs_shape = parse_shape(kv, "shapes.obs", c.eps);

        c.kind = parse_experiment_kind(kv.get_string("experiment.kind", "optimize"));
        c.output_dir = kv.get_string("experiment.output_dir", c.output_dir);
        c.threads = kv.get_int("experiment.threads", c.threads);
        c.snapshot_every = kv.get_int("experiment.snapshot_every", c.snapshot_every);
        c.deterministic = kv.get_bool("experiment.deterministic", c.deterministic);

        c.bench_n = kv.get_int("experiment.bench_n", c.bench_n);
        c.bench_steps = kv.get_int("experiment.bench_steps", c.bench_steps);
        c.ladder = kv.get_ints("experiment.ladder", c.ladder);
        c.ladder_steps = kv.get_ints("experiment.ladder_steps", c.ladder_steps);
        c.probe_times = kv.get_doubles("experiment.probe_times", c.probe_times);
        c.mg_sizes = kv.get_ints("experiment.mg_sizes", c.mg_sizes);
        c.alpha_pu = kv.get_doubles("experiment.alpha_pu", c.alpha_pu);
        c.alpha_pl = kv.get_doubles("experiment.alpha_pl", c.alpha_pl);
        c.fixed_alpha_iters = kv.get_int("experiment.fixed_alpha_iters", c.fixed_alpha_iters);
        c.twogrid_storage_n = kv.get_int("experiment.twogrid_storage_n", c.twogrid_storage_n);
        c.validate();
        return c;
    }

    void validate() const {
        if (eps <= 0.0 || theta <= 0.0 || T <= 0.0 || tau <= 0.0)
            throw ConfigError("problem parameters eps, theta, T, tau must be positive");
        if (dim != 2 && dim != 3) throw ConfigError("grid.dim must be 2 or 3");
        if (!is_power_of_two(solve_n) || !is_power_of_two(storage_n) ||
            !is_power_of_two(coarsest_n))
            throw ConfigError("grid sizes must be powers of two");
        if (storage_n > solve_n || coarsest_n > storage_n)
            throw ConfigError("need coarsest_n <= storage_n <= solve_n");
        num_steps();
    }

    /// Table 1 / benchmark presets, expressed as config text.
    static std::string preset_text(const std::string& name) {
        if (name == "benchmark2d") {
            // circle -> ellipse on (0,4)^2 with the standard parameter set
            return "[problem]\n"
                   "eps = 0.1\ntheta = 0.01\nT = 0.125\ntau = 7.8125e-4\nalpha0 = 0.1\n"
                   "tol_lambda = 0.01\nresidual_tol = 1e-11\nstop_absolute_J = 0.065\n"
                   "max_eta_iterations = 50\n"
                   "[grid]\n"
                   "dim = 2\norigin = 0 0 0\nextent = 4\nsolve_n = 1024\nstorage_n = 64\n"
                   "coarsest_n = 16\n"
                   "[shapes]\n"
                   "phi0.kind = circle\nphi0.center = 2 2\nphi0.radius = 1\n"
                   "obs.kind = ellipse\nobs.center = 2 2\nobs.axis_div = 2 1\nobs.radius = 1\n"
                   "[experiment]\nkind = optimize\n";
        }
        if (name == "benchmark2d_desk") {
            return "[problem]\n"
                   "eps = 0.1\ntheta = 0.01\nT = 0.125\ntau = 0.0125\nalpha0 = 0.1\n"
                   "tol_lambda = 0.01\nresidual_tol = 1e-11\nstop_absolute_J = 0.065\n"
                   "max_eta_iterations = 40\n"
                   "[grid]\n"
                   "dim = 2\norigin = 0 0 0\nextent = 4\nsolve_n = 64\nstorage_n = 64\n"
                   "coarsest_n = 16\n"
                   "[shapes]\n"
                   "phi0.kind = circle\nphi0.center = 2 2\nphi0.radius = 1\n"
                   "obs.kind = ellipse\nobs.center = 2 2\nobs.axis_div = 2 1\nobs.radius = 1\n"
                   "[experiment]\nkind = optimize\n";
        }
        if (name == "benchmark3d") {
            // sphere -> ellipsoid on (0,1)^3
            return "[problem]\n"
                   "eps = 0.02\ntheta = 0.01\nT = 0.001\ntau = 5e-5\nalpha0 = 0.1\n"
                   "tol_lambda = 0.01\nresidual_tol = 1e-11\nmax_eta_iterations = 15\n"
                   "[grid]\n"
                   "dim = 3\norigin = 0 0 0\nextent = 1\nsolve_n = 512\nstorage_n = 64\n"
                   "coarsest_n = 16\namr = true\n"
                   "[shapes]\n"
                   "phi0.kind = sphere\nphi0.center = 0.5 0.5 0.5\nphi0.radius = 0.25\n"
                   "obs.kind = ellipsoid\nobs.center = 0.5 0.5 0.5\nobs.axis_div = 2 1 1\n"
                   "obs.radius = 0.25\n"
                   "[experiment]\nkind = optimize\n";
        }
        throw ConfigError("unknown preset '" + name + "'");
    }
};

}  // namespace pfopt
