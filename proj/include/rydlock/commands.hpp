#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rydlock/config.hpp"
#include "rydlock/csv_io.hpp"
#include "rydlock/locking.hpp"
#include "rydlock/spectral.hpp"

namespace rydlock::cli {

struct CommandContext {
    std::filesystem::path out_dir;
    std::size_t threads = 1;  ///< 0 = hardware concurrency
    std::string command;
};

/// Manifest header carried by every output file.
io::Metadata manifest(const RunConfig& cfg, const std::string& command);

/// Omega_rs of the [drive] block, mapping field_mv_cm through the calibration.
double drive_rabi(const RunConfig& cfg);
/// Omega_rs for a field (V/m); throws ConfigError without a calibration block.
double field_to_rabi(const RunConfig& cfg, double field);
/// Injection offset (rad/s) from the [drive] block relative to osc.f_osc.
double drive_offset(const RunConfig& cfg, const locking::OscReference& osc);
locking::OscReference reference_from(const RunConfig& cfg);

/// Spectrum plus lock decision for one sweep cell.
struct CellResult {
    Spectrum spectrum;
    locking::LockReport report;
};
/// Replaces the simulator in sweeps. Called with (row index, Omega_rs, delta_inj).
using CellEvaluator = std::function<CellResult(std::size_t, double, double)>;

struct ColormapResult {
    io::Matrix matrix;  ///< rows: sweep axis, cols: spectral frequency (Hz)
    std::vector<double> omega_rs;
    std::vector<double> delta_inj;
    std::vector<locking::LockReport> reports;
    std::optional<std::size_t> first_locked;
    std::optional<locking::InterceptResult> intercept;
};

/// Field sweep at the configured injection offset (rows in mV/cm).
ColormapResult sweep_field(const RunConfig& cfg, const locking::OscReference& osc,
                           std::size_t threads, const CellEvaluator& eval = {});
/// Independent-mode frequency sweep at the configured Omega_rs (rows in Hz).
ColormapResult sweep_frequency(const RunConfig& cfg, const locking::OscReference& osc,
                               std::size_t threads, const CellEvaluator& eval = {});

struct RampColumn {
    double time = 0.0;       ///< s, window centre
    double injection = 0.0;  ///< Hz, instantaneous at the centre
    double readout = 0.0;
    bool locked = false;
};
struct RampResult {
    io::Matrix matrix;  ///< rows: instantaneous injection frequency
    std::vector<RampColumn> columns;
    double rate = 0.0;  ///< Hz/s
    /// Largest contiguous locked run, as injection frequencies at its ends.
    std::optional<std::pair<double, double>> locked_band;
};
RampResult sweep_frequency_ramp(const RunConfig& cfg, const locking::OscReference& osc);

struct StepOnResult {
    io::Matrix matrix;  ///< rows: window centre times
    std::vector<double> times;
    std::vector<double> readout;
    std::vector<bool> locked;
    double pre_step_magnitude = 0.0;
    double final_quarter_ratio = 0.0;  ///< natural-line magnitude, last quarter / pre-step
    std::optional<double> acquisition_time;  ///< s after t_on
    double omega_rs = 0.0;
};
StepOnResult step_on(const RunConfig& cfg, const locking::OscReference& osc, double omega_rs);

std::vector<locking::CriticalPoint> critical_points(const RunConfig& cfg,
                                                    const locking::OscReference& osc,
                                                    std::size_t threads);

/// Subcommands. Each writes its files plus manifest.txt under ctx.out_dir.
void run_simulate(const RunConfig& cfg, const CommandContext& ctx);
void run_sweep_field(const RunConfig& cfg, const CommandContext& ctx);
void run_sweep_frequency(const RunConfig& cfg, const CommandContext& ctx);
void run_step_on(const RunConfig& cfg, const CommandContext& ctx);
void run_critical_points(const RunConfig& cfg, const CommandContext& ctx);
void run_fit_bandwidth(const RunConfig& cfg, const CommandContext& ctx);
void run_calibrate(const RunConfig& cfg, const CommandContext& ctx);
void run_scan_osc(const RunConfig& cfg, const CommandContext& ctx);

}  // namespace rydlock::cli
