// rydlock: command-line front end. Exit codes: 0 ok, 2 config error, 3 numeric failure.
#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>
#include <thread>

#include "rydlock/commands.hpp"
#include "rydlock/config.hpp"
#include "rydlock/errors.hpp"

namespace {

using Runner = std::function<void(const rydlock::RunConfig&, const rydlock::cli::CommandContext&)>;

struct Options {
    std::string config;
    std::string out_dir;
    std::size_t threads = 1;
    std::string variant;
};

int execute(const std::string& name, const Options& opt, const Runner& run) {
    rydlock::RunConfig cfg = rydlock::load_config(opt.config);
    if (!opt.variant.empty()) cfg.variant = rydlock::parse_variant(opt.variant);
    rydlock::cli::CommandContext ctx;
    ctx.command = name;
    ctx.out_dir = !opt.out_dir.empty() ? opt.out_dir : !cfg.out_dir.empty() ? cfg.out_dir : "out";
    ctx.threads = opt.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opt.threads;
    run(cfg, ctx);
    std::cout << name << ": wrote " << ctx.out_dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rydberg mean-field oscillator: simulation and injection-locking analysis"};
    app.require_subcommand(1);

    const std::map<std::string, std::pair<std::string, Runner>> commands = {
        {"simulate", {"integrate one configuration and write trajectory, spectrum and peaks",
                      rydlock::cli::run_simulate}},
        {"sweep-field", {"colormap of the spectrum against injection field",
                         rydlock::cli::run_sweep_field}},
        {"sweep-frequency", {"colormap of the spectrum against injection frequency",
                             rydlock::cli::run_sweep_frequency}},
        {"step-on", {"spectrogram after switching the injection on", rydlock::cli::run_step_on}},
        {"critical-points", {"critical Rabi frequency for each injection offset",
                             rydlock::cli::run_critical_points}},
        {"fit-bandwidth", {"fit the forcing constant and predict the locking bandwidth",
                           rydlock::cli::run_fit_bandwidth}},
        {"calibrate", {"field to Rabi frequency and predicted bandwidth", rydlock::cli::run_calibrate}},
        {"scan-osc", {"scan the parameter grid for the oscillating regime", rydlock::cli::run_scan_osc}},
    };

    Options opt;
    std::string chosen;
    for (const auto& [name, entry] : commands) {
        CLI::App* sub = app.add_subcommand(name, entry.first);
        sub->add_option("--config", opt.config, "configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out-dir", opt.out_dir, "output directory (default: [output] dir or ./out)");
        sub->add_option("--threads", opt.threads, "worker threads, 0 = all cores")->capture_default_str();
        sub->add_option("--variant", opt.variant, "equation variant override: methods|supplementary");
        sub->callback([&chosen, n = name] { chosen = n; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        return execute(chosen, opt, commands.at(chosen).second);
    } catch (const rydlock::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const rydlock::NumericError& e) {
        std::cerr << "numeric failure at t=" << e.failure_time() << " s: " << e.what() << "\n";
        return 3;
    } catch (const rydlock::AnalysisError& e) {
        std::cerr << "analysis failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
