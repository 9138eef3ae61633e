#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pfopt/experiments.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw pfopt::ConfigError("cannot open config file '" + path + "'");
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"phase-field optimal control driver"};

    std::string config_path, preset, output_dir, log_level = "info";
    std::vector<std::string> overrides;
    int threads = 0;
    bool print_config = false, deterministic = false;

    app.add_option("-c,--config", config_path, "config file (structured key = value text)");
    app.add_option("--preset", preset,
                   "built-in configuration: benchmark2d, benchmark2d_desk, benchmark3d");
    app.add_option("--set", overrides, "override a config entry, e.g. --set grid.solve_n=128");
    app.add_option("-o,--output-dir", output_dir, "directory for result artifacts");
    app.add_option("-t,--threads", threads, "worker thread count");
    app.add_option("--log-level", log_level, "quiet, info or debug");
    app.add_flag("--print-config", print_config, "print the resolved configuration and exit");
    app.add_flag("--deterministic", deterministic, "force single-threaded deterministic runs");
    CLI11_PARSE(app, argc, argv);

    try {
        if (config_path.empty() && preset.empty())
            throw pfopt::ConfigError("need --config or --preset");
        pfopt::KeyValueConfig kv =
            pfopt::KeyValueConfig::parse(!preset.empty() ? pfopt::ExperimentConfig::preset_text(preset)
                                                         : read_file(config_path));
        if (!config_path.empty() && !preset.empty()) {
            // preset as base, file entries layered on top
            for (const auto& [k, v] : pfopt::KeyValueConfig::parse(read_file(config_path)).values())
                kv.set(k, v);
        }
        for (const auto& ov : overrides) kv.apply_override(ov);
        if (!output_dir.empty()) kv.set("experiment.output_dir", output_dir);
        if (threads > 0) kv.set("experiment.threads", threads);
        if (deterministic) {
            kv.set("experiment.deterministic", true);
            kv.set("experiment.threads", 1);
        }
        if (log_level != "quiet" && log_level != "info" && log_level != "debug")
            throw pfopt::ConfigError("unknown log level '" + log_level + "'");

        pfopt::ExperimentConfig cfg = pfopt::ExperimentConfig::from_kv(kv);
        if (print_config) {
            std::cout << kv.serialize();
            return 0;
        }
        if (log_level != "quiet")
            std::cerr << "running " << pfopt::experiment_kind_name(cfg.kind) << " ("
                      << cfg.dim << "d, solve " << cfg.solve_n << ", storage " << cfg.storage_n
                      << ", " << cfg.num_steps() << " steps) -> " << cfg.output_dir << "\n";
        if (log_level == "debug") std::cerr << kv.serialize();
        const int rc = pfopt::run_experiment(cfg);
        if (log_level != "quiet") std::cerr << "done\n";
        return rc;
    } catch (const pfopt::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
