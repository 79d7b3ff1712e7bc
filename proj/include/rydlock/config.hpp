#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rydlock/calibration.hpp"
#include "rydlock/integrator.hpp"
#include "rydlock/locking.hpp"
#include "rydlock/model.hpp"
#include "rydlock/spectral.hpp"

namespace rydlock {

inline constexpr int kConfigSchema = 1;

enum class DriveProtocol { None, Constant, StepOn };
enum class SweepMode { Independent, Ramp };

/// Fully resolved run description. Everything is SI / rad/s; the text format
/// accepts kHz, ms, mV/cm, G and multiples of gamma and converts on load.
struct RunConfig {
    ModelParams model;
    EquationVariant variant = EquationVariant::Methods;
    IntegrationSpec integration;

    DriveProtocol protocol = DriveProtocol::None;
    double drive_omega_rs = 0.0;              ///< rad/s
    std::optional<double> drive_field;        ///< V/m; mapped through calibration
    std::optional<double> injection_hz;       ///< absolute injection frequency
    std::optional<double> offset_hz;          ///< injection relative to f_osc
    double t_on = 0.0;                        ///< s
    int injection_sign = 1;

    Window window = Window::Hann;
    double transient = 0.0;                   ///< s
    double lock_record = 16e-3;               ///< s, locking probes
    double lock_transient = 8e-3;             ///< s
    double suppression = 0.1;
    double band_lo = 0.0;                     ///< Hz, 0 = automatic
    double band_hi = 0.0;
    std::size_t harmonics = 3;
    double spectrogram_window = 2e-3;         ///< s
    double spectrogram_hop = 0.5e-3;          ///< s
    std::size_t intercept_rows = 6;
    std::string critical_points_file;

    std::optional<calibration::MixingInputs> calibration;
    std::optional<double> k_forcing;          ///< overrides the fitted K in calibrate

    std::vector<double> fields;               ///< V/m
    std::vector<double> injection_axis;       ///< Hz
    std::vector<double> offsets;              ///< rad/s
    std::vector<double> step_rabi;            ///< rad/s, step-on comparison runs
    SweepMode mode = SweepMode::Independent;
    double ramp_rate = 0.0;                   ///< Hz/s, 0 = quasi-adiabatic default
    double omega_lo = 0.0;                    ///< rad/s, critical-point bracket
    double omega_hi = 0.0;
    std::vector<double> scan_omega, scan_delta_r, scan_delta_s, scan_chi;  ///< rad/s
    double scan_target = 23.45e3;             ///< Hz
    double scan_record = 10e-3;               ///< s

    std::string out_dir = "out";

    /// Canonical resolved form, one "section.key=value" per line, SI units.
    std::string canonical() const;
    /// Probe settings for the locking analysis derived from this config.
    locking::ProbeSettings probe_settings() const;
    locking::ScanGrid scan_grid() const;
};

/// Throws ConfigError naming the offending line/key on syntax errors, unknown
/// sections or keys, duplicates, bad values or a missing/unsupported schema.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// "a:b:n" (inclusive linspace) or a comma-separated list.
std::vector<double> parse_axis(std::string_view text);

}  // namespace rydlock
