#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <map>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pfopt/amr.hpp"
#include "pfopt/config.hpp"
#include "pfopt/control.hpp"
#include "pfopt/metrics.hpp"
#include "pfopt/parallel.hpp"

namespace pfopt {

/// Everything needed to run one optimization instance.
struct Problem {
    GridHierarchy hierarchy;
    ScalarField phi0_fine, phi_obs_fine, phi_obs_storage;
    ForwardConfig fwd;
    ControlConfig ctl;
    AmrConfig amr_cfg;
    bool use_amr = false;

    OptimizeInputs inputs(MaskProvider* amr = nullptr) const {
        OptimizeInputs in;
        in.hierarchy = &hierarchy;
        in.phi0_fine = phi0_fine;
        in.phi_obs_fine = phi_obs_fine;
        in.phi_obs_storage = phi_obs_storage;
        in.fwd = fwd;
        in.ctl = ctl;
        in.amr = amr;
        return in;
    }
};

inline Problem build_problem(const ExperimentConfig& cfg) {
    Problem p{GridHierarchy(UniformGrid(cfg.dim, cfg.solve_n, cfg.domain_origin,
                                        cfg.domain_extent),
                            std::min(cfg.coarsest_n, cfg.storage_n), cfg.storage_n),
              {}, {}, {}, {}, {}, {}, false};
    ShapeSpec phi0 = cfg.phi0_shape;
    ShapeSpec obs = cfg.obs_shape;
    phi0.eps = cfg.eps;
    obs.eps = cfg.eps;
    for (auto& c : phi0.children) c.eps = cfg.eps;
    for (auto& c : obs.children) c.eps = cfg.eps;
    p.phi0_fine = build_profile(phi0, p.hierarchy.solve_grid());
    p.phi_obs_fine = build_profile(obs, p.hierarchy.solve_grid());
    // sample the fine observation rather than rebuilding the profile on the
    // storage grid: the stored trajectory is also a sampled reduction, so the
    // terminal mismatch stays free of coarsening-mismatch artifacts
    p.phi_obs_storage = sample_field(p.phi_obs_fine, p.hierarchy.storage_grid());

    p.fwd.eps = cfg.eps;
    p.fwd.tau = cfg.tau;
    p.fwd.num_steps = cfg.num_steps();
    p.fwd.mass0 = p.phi0_fine.integrate();
    p.fwd.massT = p.phi_obs_fine.integrate();
    p.fwd.use_constraint = cfg.use_constraint;
    p.fwd.tol_lambda = cfg.tol_lambda;
    p.fwd.cycle.nu1 = cfg.nu1;
    p.fwd.cycle.nu2 = cfg.nu2;
    p.fwd.cycle.coarsest_sweeps = cfg.coarsest_sweeps;
    p.fwd.cycle.tolerance = cfg.residual_tol;
    p.fwd.cycle.max_cycles = cfg.max_cycles;

    p.ctl.theta = cfg.theta;
    p.ctl.alpha0 = cfg.alpha0;
    p.ctl.p_l = cfg.p_l;
    p.ctl.p_u = cfg.p_u;
    p.ctl.alpha_min = cfg.alpha_min;
    p.ctl.adaptive_alpha = cfg.adaptive_alpha;
    p.ctl.fidelity_on_storage = cfg.fidelity_on_storage;
    p.ctl.stop.absolute_J = cfg.stop_absolute_J;
    p.ctl.stop.relative_dJ = cfg.stop_relative_dJ;
    p.ctl.stop.absolute_dJ = cfg.stop_absolute_dJ;
    p.ctl.stop.max_iterations = cfg.max_eta_iterations;

    p.use_amr = cfg.amr;
    p.amr_cfg.threshold = cfg.amr_threshold;
    p.amr_cfg.block = cfg.amr_block;
    p.amr_cfg.regrid_interval = cfg.amr_interval;
    return p;
}

// ---- small output helpers ----

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string());
    os << text;
}

inline void write_j_history_csv(const std::filesystem::path& path,
                                const std::vector<IterationLogRow>& log) {
    std::ostringstream os;
    os << "attempt,iteration,J,alpha,decision\n" << std::setprecision(17);
    for (const auto& r : log)
        os << r.attempt << "," << r.iteration << "," << r.J << "," << r.alpha << ","
           << (r.accepted ? "accept" : "restart") << "\n";
    write_text_file(path, os.str());
}

inline void write_lambda_csv(const std::filesystem::path& path, const SpaceTimeStore& store,
                             const std::vector<int>& iters) {
    std::ostringstream os;
    os << "step,lambda_iterations,lambda\n" << std::setprecision(17);
    for (int s = 1; s <= store.num_steps(); ++s)
        os << s << "," << (s - 1 < int(iters.size()) ? iters[std::size_t(s - 1)] : 0) << ","
           << store.lambda(s) << "\n";
    write_text_file(path, os.str());
}

inline void write_residual_csv(const std::filesystem::path& path,
                               const std::vector<double>& history) {
    std::ostringstream os;
    os << "cycle,residual_inf\n" << std::setprecision(17);
    for (std::size_t i = 0; i < history.size(); ++i) os << i << "," << history[i] << "\n";
    write_text_file(path, os.str());
}

inline std::string diagnostics_text(const OptimizeDiagnostics& d) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "accepted_iterations: " << d.accepted_iterations << "\n"
       << "restarts: " << d.restarts << "\n"
       << "stop_reason: " << d.stop_reason << "\n"
       << "vcycles_forward: " << d.vcycles_forward << "\n"
       << "vcycles_adjoint: " << d.vcycles_adjoint << "\n"
       << "lambda_solves: " << d.lambda_solves << "\n"
       << "work_forward_cell_updates: " << d.work_forward << "\n"
       << "work_adjoint_cell_updates: " << d.work_adjoint << "\n"
       << "max_mass_error: " << d.max_mass_error << "\n"
       << "peak_store_bytes: " << d.peak_store_bytes << "\n"
       << "wall_seconds: " << d.wall_seconds << "\n";
    return os.str();
}

/// Prolong through freshly built factor-2 grids until reaching target_n.
inline ScalarField prolong_to_n(const ScalarField& f, int target_n) {
    ScalarField out = f;
    while (out.n() < target_n) out = prolong_field(out, out.grid().refined());
    if (out.n() != target_n)
        throw std::invalid_argument("prolong_to_n: target not reachable by factor 2");
    return out;
}

// ---- experiment drivers ----

inline OptimizeResult run_optimize_instance(const Problem& prob) {
    if (prob.use_amr) {
        AmrController amr(prob.hierarchy, prob.amr_cfg);
        return optimize(prob.inputs(&amr));
    }
    return optimize(prob.inputs(nullptr));
}

inline void run_optimize_experiment(const ExperimentConfig& cfg,
                                    const std::filesystem::path& out) {
    Problem prob = build_problem(cfg);
    AmrController amr(prob.hierarchy, prob.amr_cfg);
    OptimizeResult res = optimize(prob.inputs(prob.use_amr ? &amr : nullptr));

    write_j_history_csv(out / "j_history.csv", res.log);
    write_lambda_csv(out / "lambda_history.csv", res.store,
                     res.diag.lambda_iters_last_forward);
    write_text_file(out / "diagnostics.txt", diagnostics_text(res.diag));
    res.store.phi_T_fine().dump_text((out / "phi_T.dat").string(), "phi_T", cfg.T);
    const int Nt = res.store.num_steps();
    res.store.eta(Nt).dump_text((out / "eta_T.dat").string(), "eta", cfg.T);
    if (res.store.has_p(0)) res.store.p(0).dump_text((out / "p_0.dat").string(), "p", 0.0);
    if (cfg.snapshot_every > 0)
        for (int s = 0; s <= Nt; s += cfg.snapshot_every)
            res.store.phi(s).dump_text((out / ("phi_" + std::to_string(s) + ".dat")).string(),
                                       "phi", s * cfg.tau);
    if (prob.use_amr) {
        std::ofstream os(out / "refinement_map.txt");
        amr.map().dump(os);
    }
}

struct ErrorTableEntry {
    std::string field;  // phi, p, eta
    int run_n = 0;
    double probe_time = 0.0;
    double error = 0.0;
};

/// Run one optimization to the absolute-J stopping value and extract phi, p,
/// eta at the probe times, prolonged to `compare_n` for differencing.
struct ProbeSolutions {
    std::vector<ScalarField> phi, p, eta;  // one per probe time, on compare_n grid
    OptimizeResult res;
};

inline ProbeSolutions run_and_probe(ExperimentConfig cfg, int solve_n, int steps,
                                    const std::vector<double>& probe_times, int compare_n,
                                    int storage_n = 0) {
    cfg.solve_n = solve_n;
    cfg.storage_n = storage_n > 0 ? storage_n : solve_n;
    cfg.coarsest_n = std::min(cfg.coarsest_n, cfg.storage_n);
    cfg.tau = cfg.T / steps;
    Problem prob = build_problem(cfg);
    AmrController amr(prob.hierarchy, prob.amr_cfg);
    OptimizeResult res = optimize(prob.inputs(prob.use_amr ? &amr : nullptr));

    std::vector<int> probe_steps;
    for (double t : probe_times) {
        const double steps_exact = t / cfg.tau;
        const int s = int(std::lround(steps_exact));
        if (std::abs(steps_exact - s) > 1e-9)
            throw ConfigError("probe time not on a step boundary");
        probe_steps.push_back(s);
    }

    // Replay the forward sweep with the final control and capture the marching
    // state at the probe steps. The method's solution at a probe time lives on
    // the solve grid; the store only keeps the restricted snapshots that feed
    // the adjoint, which under-represents a two-grid run.
    std::map<int, ScalarField> phi_fine_at;
    {
        res.store.rotate_lambda_history();
        ForwardIntegrator integ(prob.hierarchy, prob.fwd);
        TimeLoopState st;
        st.phi_n = prob.phi0_fine;
        st.phi_n.fill_ghosts();
        if (std::find(probe_steps.begin(), probe_steps.end(), 0) != probe_steps.end())
            phi_fine_at.emplace(0, st.phi_n);
        ForwardDiagnostics rdiag;
        while (st.step < prob.fwd.num_steps) {
            integ.advance_step(st, res.store, 1, rdiag, prob.use_amr ? &amr : nullptr);
            if (std::find(probe_steps.begin(), probe_steps.end(), st.step) != probe_steps.end())
                phi_fine_at.emplace(st.step, st.phi_n);
        }
        res.store.set_phi_T_fine(st.phi_n);
    }
    // the store's p belongs to the previous iterate; refresh it for reporting
    solve_adjoint(res.store, prob.phi_obs_storage, prob.hierarchy, cfg.eps, cfg.tau,
                  prob.fwd.cycle);
    ProbeSolutions out;
    for (int s : probe_steps) {
        out.phi.push_back(prolong_to_n(phi_fine_at.at(s), compare_n));
        out.p.push_back(prolong_to_n(res.store.p(s), compare_n));
        out.eta.push_back(prolong_to_n(res.store.eta(std::max(s, 1)), compare_n));
    }
    out.res = std::move(res);
    return out;
}

inline void write_error_table(const std::filesystem::path& path,
                              const std::vector<ErrorTableEntry>& rows) {
    std::ostringstream os;
    os << "field,run_n,probe_time,error\n" << std::setprecision(17);
    for (const auto& r : rows)
        os << r.field << "," << r.run_n << "," << r.probe_time << "," << r.error << "\n";
    write_text_file(path, os.str());
}

inline std::vector<ErrorTableEntry> convergence_table_rows(const ExperimentConfig& cfg) {
    ProbeSolutions bench =
        run_and_probe(cfg, cfg.bench_n, cfg.bench_steps, cfg.probe_times, cfg.bench_n);
    std::vector<ErrorTableEntry> rows;
    for (std::size_t li = 0; li < cfg.ladder.size(); ++li) {
        ProbeSolutions run = run_and_probe(cfg, cfg.ladder[li], cfg.ladder_steps[li],
                                           cfg.probe_times, cfg.bench_n);
        for (std::size_t ti = 0; ti < cfg.probe_times.size(); ++ti) {
            rows.push_back({"phi", cfg.ladder[li], cfg.probe_times[ti],
                            compute_error_metric(run.phi[ti], bench.phi[ti])});
            rows.push_back({"p", cfg.ladder[li], cfg.probe_times[ti],
                            compute_error_metric(run.p[ti], bench.p[ti])});
            rows.push_back({"eta", cfg.ladder[li], cfg.probe_times[ti],
                            compute_error_metric(run.eta[ti], bench.eta[ti])});
        }
    }
    return rows;
}

inline void run_convergence_table(const ExperimentConfig& cfg,
                                  const std::filesystem::path& out) {
    write_error_table(out / "convergence_table.csv", convergence_table_rows(cfg));
}

/// Residual-per-cycle histories for a representative forward and adjoint step.
struct MgRateResult {
    int n = 0;
    std::vector<double> forward_history, adjoint_history;
    double forward_rate = 0.0, adjoint_rate = 0.0;  // geometric-mean contraction
};

inline double mean_contraction(const std::vector<double>& hist) {
    if (hist.size() < 2) return 0.0;
    // geometric mean of per-cycle factors down to where roundoff flattens out
    double first = hist.front();
    std::size_t last = hist.size() - 1;
    while (last > 1 && hist[last] < 1e-14 * std::max(1.0, first)) --last;
    return std::pow(hist[last] / first, 1.0 / double(last));
}

inline MgRateResult measure_mg_rate(const ExperimentConfig& base, int n) {
    ExperimentConfig cfg = base;
    cfg.solve_n = n;
    cfg.storage_n = n;
    Problem prob = build_problem(cfg);
    const GridHierarchy& hier = prob.hierarchy;
    MgRateResult out;
    out.n = n;

    ScalarField eta(hier.solve_grid());
    ForwardOperatorSpec fop;
    fop.eps = cfg.eps;
    fop.tau = cfg.tau;
    fop.scheme = StepScheme::bdf1();
    fop.eta = &eta;
    fop.phi_n = &prob.phi0_fine;
    fop.lambda = 0.0;
    CycleConfig cc = prob.fwd.cycle;
    cc.max_cycles = 60;
    FasForwardCycler fc(hier, cc, fop, hier.solve_level);
    ScalarField u = prob.phi0_fine;
    SolveResult fr = fc.solve(u);
    out.forward_history = fr.residual_history;
    out.forward_rate = mean_contraction(fr.residual_history);

    ScalarField phi_store = reduce_phase_field(prob.phi0_fine, hier.storage_grid());
    ScalarField pterm = terminal_condition(phi_store, prob.phi_obs_storage);
    AdjointOperatorSpec aop;
    aop.eps = cfg.eps;
    aop.tau = cfg.tau;
    aop.scheme = StepScheme::bdf1();
    aop.phi = &phi_store;
    aop.p_np2 = &pterm;
    LinearAdjointCycler ac(hier, cc, aop, hier.storage_level);
    ScalarField p(hier.storage_grid());
    SolveResult ar = ac.solve(p);
    out.adjoint_history = ar.residual_history;
    out.adjoint_rate = mean_contraction(ar.residual_history);
    return out;
}

inline void run_mg_rate(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    std::ostringstream summary;
    summary << "n,forward_cycles,forward_rate,adjoint_cycles,adjoint_rate\n";
    for (int n : cfg.mg_sizes) {
        MgRateResult r = measure_mg_rate(cfg, n);
        write_residual_csv(out / ("mg_forward_" + std::to_string(n) + ".csv"),
                           r.forward_history);
        write_residual_csv(out / ("mg_adjoint_" + std::to_string(n) + ".csv"),
                           r.adjoint_history);
        summary << n << "," << r.forward_history.size() - 1 << "," << r.forward_rate << ","
                << r.adjoint_history.size() - 1 << "," << r.adjoint_rate << "\n";
    }
    write_text_file(out / "mg_rates.csv", summary.str());
}

struct ComplexityPoint {
    int n = 0;
    std::uint64_t dof = 0;
    double seconds_per_iteration = 0.0;
};

/// Mean per-control-iteration CPU time vs DOF count.
inline std::vector<ComplexityPoint> measure_complexity(const ExperimentConfig& base,
                                                       int iterations) {
    std::vector<ComplexityPoint> pts;
    for (int n : base.mg_sizes) {
        ExperimentConfig cfg = base;
        cfg.solve_n = n;
        cfg.storage_n = n;
        cfg.stop_absolute_J = 0.0;
        cfg.stop_relative_dJ = 0.0;
        cfg.stop_absolute_dJ = 0.0;
        cfg.max_eta_iterations = iterations;
        Problem prob = build_problem(cfg);
        const auto t0 = std::chrono::steady_clock::now();
        OptimizeResult res = optimize(prob.inputs(nullptr));
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        pts.push_back({n, prob.hierarchy.solve_grid().cell_count(),
                       secs / double(res.diag.accepted_iterations)});
    }
    return pts;
}

inline double loglog_slope(const std::vector<ComplexityPoint>& pts) {
    // least-squares slope of log(time) against log(dof)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = double(pts.size());
    for (const auto& p : pts) {
        const double x = std::log(double(p.dof)), y = std::log(p.seconds_per_iteration);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

inline void run_complexity_timing(const ExperimentConfig& cfg,
                                  const std::filesystem::path& out) {
    std::vector<ComplexityPoint> pts = measure_complexity(cfg, 2);
    std::ostringstream os;
    os << "n,dof,seconds_per_iteration\n" << std::setprecision(17);
    for (const auto& p : pts) os << p.n << "," << p.dof << "," << p.seconds_per_iteration << "\n";
    os << "# loglog_slope = " << loglog_slope(pts) << "\n";
    write_text_file(out / "complexity.csv", os.str());
}

inline void run_alpha_study(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    ExperimentConfig fixed = cfg;
    fixed.adaptive_alpha = false;
    fixed.stop_absolute_J = 0.0;
    fixed.stop_relative_dJ = 0.0;
    fixed.stop_absolute_dJ = 0.0;
    fixed.max_eta_iterations = cfg.fixed_alpha_iters;
    OptimizeResult fres = run_optimize_instance(build_problem(fixed));
    write_j_history_csv(out / "alpha_fixed.csv", fres.log);
    for (std::size_t i = 0; i < cfg.alpha_pu.size(); ++i) {
        ExperimentConfig ad = fixed;
        ad.adaptive_alpha = true;
        ad.p_u = cfg.alpha_pu[i];
        ad.p_l = cfg.alpha_pl[i];
        OptimizeResult ares = run_optimize_instance(build_problem(ad));
        std::ostringstream name;
        name << "alpha_adaptive_pu" << cfg.alpha_pu[i] << "_pl" << cfg.alpha_pl[i] << ".csv";
        write_j_history_csv(out / name.str(), ares.log);
    }
}

inline void run_two_grid_compare(const ExperimentConfig& cfg,
                                 const std::filesystem::path& out) {
    ProbeSolutions bench =
        run_and_probe(cfg, cfg.bench_n, cfg.bench_steps, cfg.probe_times, cfg.bench_n);
    // two-grid: solve on bench_n, store/adjoint on the coarse grid
    ProbeSolutions two = run_and_probe(cfg, cfg.bench_n, cfg.bench_steps, cfg.probe_times,
                                       cfg.bench_n, cfg.twogrid_storage_n);
    // one-grid run at the coarse resolution
    ProbeSolutions one = run_and_probe(cfg, cfg.twogrid_storage_n, cfg.bench_steps,
                                       cfg.probe_times, cfg.bench_n);
    std::vector<ErrorTableEntry> rows;
    auto add = [&](const char* tag, const ProbeSolutions& run, int label_n) {
        for (std::size_t ti = 0; ti < cfg.probe_times.size(); ++ti) {
            rows.push_back({std::string("phi_") + tag, label_n, cfg.probe_times[ti],
                            compute_error_metric(run.phi[ti], bench.phi[ti])});
            rows.push_back({std::string("p_") + tag, label_n, cfg.probe_times[ti],
                            compute_error_metric(run.p[ti], bench.p[ti])});
            rows.push_back({std::string("eta_") + tag, label_n, cfg.probe_times[ti],
                            compute_error_metric(run.eta[ti], bench.eta[ti])});
        }
    };
    add("two_grid", two, cfg.twogrid_storage_n);
    add("one_grid", one, cfg.twogrid_storage_n);
    write_error_table(out / "two_grid_compare.csv", rows);
}

/// Dispatch on the configured experiment kind; artifacts land in output_dir.
inline int run_experiment(const ExperimentConfig& cfg) {
    set_num_threads(cfg.threads);
    std::filesystem::path out(cfg.output_dir);
    std::filesystem::create_directories(out);
    switch (cfg.kind) {
        case ExperimentKind::Optimize: run_optimize_experiment(cfg, out); break;
        case ExperimentKind::ConvergenceTable: run_convergence_table(cfg, out); break;
        case ExperimentKind::MgRate: run_mg_rate(cfg, out); break;
        case ExperimentKind::ComplexityTiming: run_complexity_timing(cfg, out); break;
        case ExperimentKind::AlphaStudy: run_alpha_study(cfg, out); break;
        case ExperimentKind::TwoGridCompare: run_two_grid_compare(cfg, out); break;
    }
    return 0;
}

}  // namespace pfopt
