#include "rydlock/commands.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numeric>

#include "rydlock/calibration.hpp"
#include "rydlock/errors.hpp"
#include "rydlock/integrator.hpp"
#include "rydlock/units.hpp"
#include "rydlock/work_pool.hpp"

#ifndef RYDLOCK_VERSION
#define RYDLOCK_VERSION "0.0.0"
#endif

namespace rydlock::cli {
namespace {

using io::format_double;

// rad; a 10% residual line moves the phase by about this much.
constexpr double kSettleTolerance = 0.1;

std::ofstream open_output(const CommandContext& ctx, const std::string& name) {
    std::error_code ec;
    std::filesystem::create_directories(ctx.out_dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + ctx.out_dir.string());
    std::ofstream os(ctx.out_dir / name, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + (ctx.out_dir / name).string());
    return os;
}

void write_manifest_file(const RunConfig& cfg, const CommandContext& ctx) {
    auto os = open_output(ctx, "manifest.txt");
    io::write_metadata(os, manifest(cfg, ctx.command));
    os << cfg.canonical();
}

io::Metadata with(io::Metadata meta, const std::string& key, const std::string& value) {
    meta.emplace_back(key, value);
    return meta;
}

std::string flag(bool b) { return b ? "1" : "0"; }

void write_summary(const CommandContext& ctx, const std::string& name, const io::Metadata& meta,
                   const std::vector<std::pair<std::string, std::string>>& entries) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [k, v] : entries) rows.push_back({k, v});
    auto os = open_output(ctx, name);
    io::write_table(os, {"key", "value"}, rows, meta);
}

// Rethrows a cell failure with the cell named, keeping the error category.
template <class F>
auto run_cell(const std::string& label, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const NumericError& e) {
        throw NumericError(label + ": " + e.what(), e.failure_time());
    } catch (const ConfigError& e) {
        throw ConfigError(label + ": " + e.what());
    } catch (const AnalysisError& e) {
        throw AnalysisError(label + ": " + e.what());
    }
}

// Column range of the colormap: configured band or f_osc +- max(3 |offset|, 40 bins).
std::pair<std::size_t, std::size_t> band_indices(const RunConfig& cfg, const Spectrum& sp,
                                                 double centre, double spread) {
    double lo = cfg.band_lo, hi = cfg.band_hi;
    if (hi == 0.0) {
        const double w = std::max(3.0 * spread, 40.0 * sp.bin_width());
        lo = std::max(centre - w, sp.bin_width());
        hi = centre + w;
    }
    std::size_t a = sp.size(), b = 0;
    for (std::size_t k = 0; k < sp.size(); ++k) {
        if (sp.freqs[k] >= lo && sp.freqs[k] <= hi) {
            a = std::min(a, k);
            b = std::max(b, k);
        }
    }
    if (a > b) throw ConfigError("colormap band holds no spectral bins");
    return {a, b + 1};
}

CellResult simulate_cell(const locking::OscReference& osc, double omega_rs, double delta_inj) {
    const locking::LockRequest req{omega_rs, delta_inj, locking::Protocol::Steady, 0.0};
    CellResult r;
    r.spectrum = locking::lock_spectrum(osc, req);
    r.report = locking::read_lock(osc, r.spectrum, delta_inj);
    return r;
}

ColormapResult run_sweep(const RunConfig& cfg, const locking::OscReference& osc,
                         const std::vector<double>& rows, const std::vector<double>& omega_rs,
                         const std::vector<double>& delta_inj, const std::string& row_name,
                         std::size_t threads, const CellEvaluator& eval) {
    if (rows.empty()) throw ConfigError("sweep axis is empty");
    std::vector<CellResult> cells(rows.size());
    parallel_for(rows.size(), threads, [&](std::size_t i) {
        cells[i] = run_cell(row_name + "=" + format_double(rows[i]), [&] {
            return eval ? eval(i, omega_rs[i], delta_inj[i])
                        : simulate_cell(osc, omega_rs[i], delta_inj[i]);
        });
    });

    ColormapResult out;
    out.omega_rs = omega_rs;
    out.delta_inj = delta_inj;
    double spread = 0.0;
    for (double d : delta_inj) spread = std::max(spread, std::abs(units::rad_to_hz(d)));
    const auto [a, b] = band_indices(cfg, cells.front().spectrum, osc.f_osc, spread);
    out.matrix.corner = row_name + "\\freq_hz";
    out.matrix.rows = rows;
    out.matrix.cols.assign(cells.front().spectrum.freqs.begin() + static_cast<std::ptrdiff_t>(a),
                           cells.front().spectrum.freqs.begin() + static_cast<std::ptrdiff_t>(b));
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& amp = cells[i].spectrum.amplitude;
        if (amp.size() != cells.front().spectrum.size())
            throw AnalysisError("sweep cells produced spectra of different lengths");
        out.matrix.values.emplace_back(amp.begin() + static_cast<std::ptrdiff_t>(a),
                                       amp.begin() + static_cast<std::ptrdiff_t>(b));
        out.reports.push_back(cells[i].report);
        if (cells[i].report.locked && !out.first_locked) out.first_locked = i;
    }
    return out;
}

std::vector<std::vector<std::string>> report_rows(const ColormapResult& r, double gamma) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < r.reports.size(); ++i) {
        const auto& rep = r.reports[i];
        auto h = [&](std::size_t k) {
            return k < rep.harmonics.size() ? format_double(rep.harmonics[k].frequency) : "nan";
        };
        rows.push_back({format_double(r.matrix.rows[i]), format_double(r.omega_rs[i]),
                        format_double(r.omega_rs[i] / gamma), format_double(rep.injection_frequency),
                        format_double(rep.readout), flag(rep.locked),
                        format_double(rep.residual_ratio), h(1), h(2)});
    }
    return rows;
}

Spectrum column_spectrum(const Spectrogram& sg, std::size_t c, double sample_rate) {
    Spectrum s;
    s.freqs = sg.freqs;
    s.amplitude = sg.magnitude[c];
    s.asd.assign(s.freqs.size(), 0.0);
    s.window = Window::Hann;
    s.record_length = sg.window_length;
    s.sample_rate = sample_rate;
    return s;
}

double max_near(const Spectrum& s, double centre, double half_width) {
    double best = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k)
        if (std::abs(s.freqs[k] - centre) <= half_width) best = std::max(best, s.amplitude[k]);
    return best;
}

io::Matrix spectrogram_matrix(const RunConfig& cfg, const Spectrogram& sg, const std::vector<double>& rows,
                              const std::string& corner, double centre, double spread, double fs) {
    const Spectrum first = column_spectrum(sg, 0, fs);
    const auto [a, b] = band_indices(cfg, first, centre, spread);
    io::Matrix m;
    m.corner = corner;
    m.rows = rows;
    m.cols.assign(sg.freqs.begin() + static_cast<std::ptrdiff_t>(a),
                  sg.freqs.begin() + static_cast<std::ptrdiff_t>(b));
    for (const auto& col : sg.magnitude)
        m.values.emplace_back(col.begin() + static_cast<std::ptrdiff_t>(a),
                              col.begin() + static_cast<std::ptrdiff_t>(b));
    return m;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? format_double(*v) : "nan"; }

// Phase of the observable relative to the injection, demodulated over ~20
// injection periods. Returns the time after t_on from which it stays within
// `tol` rad of its final-quarter mean, or nothing if it never settles.
std::optional<double> phase_settle_time(const std::vector<double>& x, double fs, double t0,
                                        double t_on, double f_inj, double tol) {
    const auto len = static_cast<std::size_t>(std::llround(20.0 * fs / f_inj));
    const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fs / f_inj)));
    if (x.size() < 2 * len) return std::nullopt;
    std::vector<double> w(len);
    for (std::size_t k = 0; k < len; ++k)
        w[k] = 0.5 - 0.5 * std::cos(units::two_pi * (static_cast<double>(k) + 0.5) / static_cast<double>(len));
    std::vector<double> times, phase;
    for (std::size_t a = 0; a + len <= x.size(); a += hop) {
        std::complex<double> z{};
        for (std::size_t k = 0; k < len; ++k) {
            const double t = t0 + static_cast<double>(a + k) / fs;
            z += w[k] * x[a + k] * std::polar(1.0, -units::two_pi * f_inj * t);
        }
        times.push_back(t0 + (static_cast<double>(a) + 0.5 * static_cast<double>(len)) / fs);
        phase.push_back(std::arg(z));
    }
    const double t_end = times.back();
    std::complex<double> ref{};
    for (std::size_t i = 0; i < times.size(); ++i)
        if (times[i] >= t_on + 0.75 * (t_end - t_on)) ref += std::polar(1.0, phase[i]);
    if (std::abs(ref) == 0.0) return std::nullopt;
    const double psi = std::arg(ref);
    std::size_t i = times.size();
    while (i > 0 && times[i - 1] > t_on &&
           std::abs(std::remainder(phase[i - 1] - psi, units::two_pi)) <= tol)
        --i;
    if (i == times.size()) return std::nullopt;
    return times[i] - t_on;
}

}  // namespace

io::Metadata manifest(const RunConfig& cfg, const std::string& command) {
    return {{"tool", "rydlock"},
            {"version", RYDLOCK_VERSION},
            {"command", command},
            {"config_hash", io::fnv1a_hex(cfg.canonical())},
            {"variant", std::string(to_string(cfg.variant))},
            {"units", "time s; frequency Hz; angular rad/s; field V/m (axes in mV/cm where named)"}};
}

double field_to_rabi(const RunConfig& cfg, double field) {
    if (!cfg.calibration) throw ConfigError("field values need a [calibration] block");
    const auto& m = *cfg.calibration;
    return calibration::rabi_from_field(field, calibration::induced_dipole(m), m.alpha);
}

double drive_rabi(const RunConfig& cfg) {
    return cfg.drive_field ? field_to_rabi(cfg, *cfg.drive_field) : cfg.drive_omega_rs;
}

double drive_offset(const RunConfig& cfg, const locking::OscReference& osc) {
    if (cfg.offset_hz) return units::hz_to_rad(*cfg.offset_hz);
    if (cfg.injection_hz) return units::hz_to_rad(*cfg.injection_hz - osc.f_osc);
    throw ConfigError("drive.offset_khz or drive.f_inj_khz is required");
}

locking::OscReference reference_from(const RunConfig& cfg) {
    return locking::characterize(cfg.model, cfg.probe_settings());
}

ColormapResult sweep_field(const RunConfig& cfg, const locking::OscReference& osc,
                           std::size_t threads, const CellEvaluator& eval) {
    if (cfg.fields.empty()) throw ConfigError("sweep.field_mv_cm is required");
    const double delta = drive_offset(cfg, osc);
    std::vector<double> rows, rabi, deltas;
    for (double e : cfg.fields) {
        rows.push_back(10.0 * e);  // V/m -> mV/cm
        rabi.push_back(field_to_rabi(cfg, e));
        deltas.push_back(delta);
    }
    ColormapResult r = run_sweep(cfg, osc, rows, rabi, deltas, "field_mv_cm", threads, eval);
    std::vector<locking::SweepRow> sweep;
    for (std::size_t i = 0; i < rows.size(); ++i)
        sweep.push_back({rows[i], r.reports[i].readout, r.reports[i].locked});
    try {
        r.intercept = locking::bandwidth_by_intercept(
            sweep, locking::injection_frequency(osc, delta), osc.f_osc,
            r.reports.front().bin_width, cfg.intercept_rows);
    } catch (const AnalysisError&) {
        r.intercept.reset();
    }
    return r;
}

ColormapResult sweep_frequency(const RunConfig& cfg, const locking::OscReference& osc,
                               std::size_t threads, const CellEvaluator& eval) {
    if (cfg.injection_axis.empty()) throw ConfigError("sweep.f_inj_khz is required");
    const double rabi = drive_rabi(cfg);
    std::vector<double> omega(cfg.injection_axis.size(), rabi), deltas;
    for (double f : cfg.injection_axis) {
        if (!(f < 0.5 * osc.settings.sample_rate)) throw ConfigError("sweep.f_inj_khz exceeds Nyquist");
        deltas.push_back(units::hz_to_rad(f - osc.f_osc));
    }
    return run_sweep(cfg, osc, cfg.injection_axis, omega, deltas, "f_inj_hz", threads, eval);
}

RampResult sweep_frequency_ramp(const RunConfig& cfg, const locking::OscReference& osc) {
    if (cfg.injection_axis.size() < 2) throw ConfigError("ramp mode needs a sweep.f_inj_khz range");
    const double f0 = cfg.injection_axis.front(), f1 = cfg.injection_axis.back();
    const double fs = cfg.integration.sample_rate;
    if (std::max(f0, f1) >= 0.5 * fs) throw ConfigError("sweep.f_inj_khz exceeds Nyquist");
    const double bin = 1.0 / cfg.spectrogram_window;
    RampResult out;
    // Default: at most one spectral bin per 20 natural periods and per window,
    // so no column sees more than a bin of sweep.
    out.rate = cfg.ramp_rate > 0.0 ? cfg.ramp_rate
                                   : std::min(bin * osc.f_osc / 20.0, bin / cfg.spectrogram_window);
    const double settle = cfg.lock_transient;
    const double duration = std::abs(f1 - f0) / out.rate;
    const int sign = cfg.injection_sign;
    const DriveSchedule drive =
        DriveSchedule::ramp(drive_rabi(cfg), settle, sign * units::hz_to_rad(f0), settle + duration,
                            sign * units::hz_to_rad(f1));
    IntegrationSpec spec = cfg.integration;
    spec.t_start = 0.0;
    spec.t_end = settle + duration;
    spec.expected_frequency = 0.0;
    const Trajectory tr = integrate(osc.params, {}, spec, drive, cfg.variant);
    const auto skip = static_cast<std::size_t>(std::llround(settle * fs));
    const std::span<const double> series(tr.observable);
    const Spectrogram sg = spectrogram(series.subspan(skip), fs, cfg.spectrogram_window,
                                       cfg.spectrogram_hop, settle, osc.f_osc);

    std::vector<double> rows;
    std::size_t run = 0, best_len = 0, best_end = 0;
    for (std::size_t c = 0; c < sg.times.size(); ++c) {
        RampColumn col;
        col.time = sg.times[c];
        col.injection = std::abs(units::rad_to_hz(drive.delta_at(col.time)));
        const Spectrum s = column_spectrum(sg, c, fs);
        const double gap = std::abs(col.injection - osc.f_osc);
        const double margin = std::max(0.5 * gap, 8.0 * s.bin_width());
        col.readout = track_peak(s, std::max(std::min(osc.f_osc, col.injection) - margin, s.bin_width()),
                                 std::max(osc.f_osc, col.injection) + margin)
                          .frequency;
        const bool captured = std::abs(col.readout - col.injection) <= s.bin_width();
        // Within 4 bins of f_osc the natural and injected lines cannot be told apart.
        const bool separable = gap >= 4.0 * s.bin_width();
        const double residual = max_near(s, osc.f_osc, std::max(0.5 * gap, 2.0 * s.bin_width()));
        col.locked = captured && (!separable || residual <= cfg.suppression * osc.a0);
        run = col.locked ? run + 1 : 0;
        if (run > best_len) {
            best_len = run;
            best_end = c;
        }
        rows.push_back(col.injection);
        out.columns.push_back(col);
    }
    if (best_len > 0)
        out.locked_band = {{out.columns[best_end + 1 - best_len].injection, out.columns[best_end].injection}};
    out.matrix = spectrogram_matrix(cfg, sg, rows, "f_inj_hz\\freq_hz", osc.f_osc,
                                    std::max(std::abs(f0 - osc.f_osc), std::abs(f1 - osc.f_osc)), fs);
    return out;
}

StepOnResult step_on(const RunConfig& cfg, const locking::OscReference& osc, double omega_rs) {
    const double t_on = cfg.t_on;
    const double t_end = cfg.integration.t_end;
    if (!(t_on > cfg.integration.t_start && t_on < t_end))
        throw ConfigError("drive.t_on_ms must lie inside the record");
    if ((t_end - t_on) * osc.f_osc < 40.0)
        throw ConfigError("step-on needs >= 40 natural periods after t_on");
    const double delta = drive_offset(cfg, osc);
    const double gap = std::abs(units::rad_to_hz(delta));
    const double bin = 1.0 / cfg.spectrogram_window;
    if (gap < 4.0 * bin * (1.0 - 1e-12))
        throw ConfigError("step-on: offset must be >= 4 spectrogram bins; lengthen the window");

    const double fs = cfg.integration.sample_rate;
    const double f_inj = osc.f_osc + gap * (delta < 0 ? -1.0 : 1.0);
    const DriveSchedule drive =
        DriveSchedule::step_on(t_on, omega_rs, cfg.injection_sign * units::hz_to_rad(f_inj));
    IntegrationSpec spec = cfg.integration;
    spec.expected_frequency = 0.0;
    const Trajectory tr = integrate(osc.params, {}, spec, drive, cfg.variant);
    const Spectrogram sg = spectrogram(tr.observable, fs, cfg.spectrogram_window,
                                       cfg.spectrogram_hop, spec.t_start, osc.f_osc);

    StepOnResult out;
    out.omega_rs = omega_rs;
    const double half_width = std::max(0.5 * gap, 2.0 * bin);
    std::vector<double> natural(sg.times.size());
    std::size_t pre = 0;
    for (std::size_t c = 0; c < sg.times.size(); ++c) {
        const Spectrum s = column_spectrum(sg, c, fs);
        natural[c] = max_near(s, osc.f_osc, half_width);
        if (sg.times[c] + 0.5 * sg.window_length <= t_on) {
            out.pre_step_magnitude += natural[c];
            ++pre;
        }
        const double margin = std::max(0.5 * gap, 8.0 * s.bin_width());
        out.readout.push_back(track_peak(s, std::max(std::min(osc.f_osc, f_inj) - margin, s.bin_width()),
                                         std::max(osc.f_osc, f_inj) + margin)
                                  .frequency);
        out.times.push_back(sg.times[c]);
    }
    if (pre == 0) throw ConfigError("step-on: no spectrogram window ends before t_on");
    out.pre_step_magnitude /= static_cast<double>(pre);

    double tail = 0.0;
    std::size_t tail_n = 0;
    for (std::size_t c = 0; c < sg.times.size(); ++c) {
        const bool after = sg.times[c] > t_on;
        out.locked.push_back(after && std::abs(out.readout[c] - f_inj) <= bin &&
                             natural[c] <= cfg.suppression * out.pre_step_magnitude);
        if (sg.times[c] >= t_on + 0.75 * (t_end - t_on)) {
            tail += natural[c];
            ++tail_n;
        }
    }
    out.final_quarter_ratio = tail_n ? tail / static_cast<double>(tail_n) / out.pre_step_magnitude : 1.0;
    // Acquisition is read from the demodulated phase, whose resolution is a few
    // periods rather than a spectrogram window; it needs the run to end locked.
    if (!out.locked.empty() && out.locked.back())
        out.acquisition_time =
            phase_settle_time(tr.observable, fs, spec.t_start, t_on, f_inj, kSettleTolerance);
    out.matrix = spectrogram_matrix(cfg, sg, out.times, "t_s\\freq_hz", osc.f_osc, gap, fs);
    return out;
}

std::vector<locking::CriticalPoint> critical_points(const RunConfig& cfg,
                                                    const locking::OscReference& osc,
                                                    std::size_t threads) {
    if (cfg.offsets.empty()) throw ConfigError("sweep.offsets_khz is required");
    if (!(cfg.omega_hi > cfg.omega_lo)) throw ConfigError("sweep.omega_rs_lo/hi bracket is required");
    std::vector<locking::CriticalPoint> out(cfg.offsets.size());
    parallel_for(out.size(), threads, [&](std::size_t i) {
        out[i] = run_cell("offset_hz=" + format_double(units::rad_to_hz(cfg.offsets[i])), [&] {
            return locking::critical_point(osc, cfg.offsets[i], cfg.omega_lo, cfg.omega_hi);
        });
    });
    return out;
}

void run_simulate(const RunConfig& cfg, const CommandContext& ctx) {
    const auto meta = manifest(cfg, ctx.command);
    const double rabi = drive_rabi(cfg);
    DriveSchedule drive = DriveSchedule::constant(0.0, 0.0);
    std::optional<double> f_inj;
    if (cfg.protocol != DriveProtocol::None) {
        if (cfg.injection_hz) f_inj = *cfg.injection_hz;
        else if (cfg.offset_hz) f_inj = reference_from(cfg).f_osc + *cfg.offset_hz;
        else throw ConfigError("a drive needs drive.f_inj_khz or drive.offset_khz");
        const double delta = cfg.injection_sign * units::hz_to_rad(*f_inj);
        drive = cfg.protocol == DriveProtocol::StepOn ? DriveSchedule::step_on(cfg.t_on, rabi, delta)
                                                      : DriveSchedule::constant(rabi, delta);
    }
    const Trajectory tr = integrate(cfg.model, {}, cfg.integration, drive, cfg.variant);
    PeriodogramOptions opt;
    opt.window = cfg.window;
    opt.transient_skip = cfg.transient;
    const Spectrum sp = periodogram(tr.observable, cfg.integration.sample_rate, opt);

    const auto run_meta = with(meta, "drive", drive.describe());
    {
        auto os = open_output(ctx, "trajectory.csv");
        io::write_trajectory(os, tr, run_meta);
    }
    {
        auto os = open_output(ctx, "spectrum.csv");
        io::write_spectrum(os, sp, run_meta);
    }
    const double nyq = 0.5 * cfg.integration.sample_rate;
    const double lo = cfg.band_hi > 0.0 ? cfg.band_lo : std::max(10.0 * sp.bin_width(), 1e3);
    const double hi = cfg.band_hi > 0.0 ? cfg.band_hi : std::min(400e3, 0.9 * nyq);
    std::vector<std::vector<std::string>> rows;
    const PeakReport fund = track_peak(sp, lo, hi);
    const double floor = detection_floor(sp);
    const bool detected = fund.amplitude > floor && !fund.on_edge;
    std::vector<PeakReport> peaks{fund};
    if (detected) {
        std::size_t n = cfg.harmonics;
        while (n > 1 && (static_cast<double>(n) + 0.25) * fund.frequency > nyq) --n;
        peaks = harmonic_peaks(sp, fund.frequency, n);
    }
    for (std::size_t k = 0; k < peaks.size(); ++k)
        rows.push_back({std::to_string(k + 1), format_double(peaks[k].frequency),
                        format_double(peaks[k].amplitude), format_double(peaks[k].bandwidth_3db),
                        flag(peaks[k].amplitude > floor)});
    {
        auto os = open_output(ctx, "peaks.csv");
        io::write_table(os, {"harmonic", "frequency_hz", "amplitude", "bandwidth_3db_hz", "detected"},
                        rows, with(run_meta, "detection_floor", format_double(floor)));
    }
    write_summary(ctx, "summary.csv", run_meta,
                  {{"accepted_steps", std::to_string(tr.metadata.accepted_steps)},
                   {"rejected_steps", std::to_string(tr.metadata.rejected_steps)},
                   {"oscillation_detected", flag(detected)},
                   {"peak_hz", format_double(fund.frequency)},
                   {"injection_hz", fmt_opt(f_inj)}});
    write_manifest_file(cfg, ctx);
}

void run_sweep_field(const RunConfig& cfg, const CommandContext& ctx) {
    const auto osc = reference_from(cfg);
    const ColormapResult r = sweep_field(cfg, osc, ctx.threads);
    auto meta = with(manifest(cfg, ctx.command), "f_osc_hz", format_double(osc.f_osc));
    meta = with(meta, "f_inj_hz", format_double(r.reports.front().injection_frequency));
    {
        auto m = r.matrix;
        m.metadata = meta;
        auto os = open_output(ctx, "colormap_field.csv");
        io::write_matrix(os, m);
    }
    {
        auto os = open_output(ctx, "sweep_field.csv");
        io::write_table(os, {"field_mv_cm", "omega_rs_rad_s", "omega_rs_over_gamma", "f_inj_hz", "readout_hz",
                             "locked", "residual_ratio", "h2_hz", "h3_hz"},
                        report_rows(r, osc.params.gamma), meta);
    }
    std::vector<std::pair<std::string, std::string>> s{
        {"critical_field_mv_cm", r.first_locked ? format_double(r.matrix.rows[*r.first_locked]) : "none"}};
    if (r.intercept) {
        s.push_back({"intercept_critical_field_mv_cm", format_double(r.intercept->critical_field)});
        s.push_back({"intercept_slope_hz_per_mv_cm", format_double(r.intercept->slope)});
        s.push_back({"intercept_rows", std::to_string(r.intercept->fitted_rows)});
    } else {
        s.push_back({"intercept_critical_field_mv_cm", "none"});
    }
    write_summary(ctx, "summary.csv", meta, s);
    write_manifest_file(cfg, ctx);
}

void run_sweep_frequency(const RunConfig& cfg, const CommandContext& ctx) {
    const auto osc = reference_from(cfg);
    auto meta = with(manifest(cfg, ctx.command), "f_osc_hz", format_double(osc.f_osc));
    if (cfg.mode == SweepMode::Independent) {
        const ColormapResult r = sweep_frequency(cfg, osc, ctx.threads);
        meta = with(meta, "mode", "independent");
        {
            auto m = r.matrix;
            m.metadata = meta;
            auto os = open_output(ctx, "colormap_frequency.csv");
            io::write_matrix(os, m);
        }
        auto os = open_output(ctx, "sweep_frequency.csv");
        io::write_table(os, {"f_inj_hz", "omega_rs_rad_s", "omega_rs_over_gamma", "f_inj_hz_check", "readout_hz",
                             "locked", "residual_ratio", "h2_hz", "h3_hz"},
                        report_rows(r, osc.params.gamma), meta);
    } else {
        const RampResult r = sweep_frequency_ramp(cfg, osc);
        meta = with(meta, "mode", "ramp");
        meta = with(meta, "ramp_rate_hz_per_s", format_double(r.rate));
        {
            auto m = r.matrix;
            m.metadata = meta;
            auto os = open_output(ctx, "colormap_frequency.csv");
            io::write_matrix(os, m);
        }
        std::vector<std::vector<std::string>> rows;
        for (const auto& c : r.columns)
            rows.push_back({format_double(c.time), format_double(c.injection), format_double(c.readout),
                            flag(c.locked)});
        {
            auto os = open_output(ctx, "sweep_frequency.csv");
            io::write_table(os, {"t_s", "f_inj_hz", "readout_hz", "locked"}, rows, meta);
        }
        write_summary(ctx, "summary.csv", meta,
                      {{"locked_band_start_hz", r.locked_band ? format_double(r.locked_band->first) : "none"},
                       {"locked_band_end_hz", r.locked_band ? format_double(r.locked_band->second) : "none"},
                       {"locked_band_width_hz",
                        r.locked_band ? format_double(std::abs(r.locked_band->second - r.locked_band->first))
                                      : "0"}});
    }
    write_manifest_file(cfg, ctx);
}

void run_step_on(const RunConfig& cfg, const CommandContext& ctx) {
    const auto osc = reference_from(cfg);
    const StepOnResult main = step_on(cfg, osc, drive_rabi(cfg));
    auto meta = with(manifest(cfg, ctx.command), "f_osc_hz", format_double(osc.f_osc));
    {
        auto m = main.matrix;
        m.metadata = meta;
        auto os = open_output(ctx, "spectrogram.csv");
        io::write_matrix(os, m);
    }
    std::vector<std::vector<std::string>> rows;
    for (std::size_t c = 0; c < main.times.size(); ++c)
        rows.push_back({format_double(main.times[c]), format_double(main.readout[c]), flag(main.locked[c])});
    {
        auto os = open_output(ctx, "step_on.csv");
        io::write_table(os, {"t_s", "readout_hz", "locked"}, rows, meta);
    }
    std::vector<StepOnResult> extra(cfg.step_rabi.size());
    parallel_for(extra.size(), ctx.threads, [&](std::size_t i) {
        extra[i] = run_cell("omega_rs=" + format_double(cfg.step_rabi[i]),
                            [&] { return step_on(cfg, osc, cfg.step_rabi[i]); });
    });
    std::vector<std::vector<std::string>> acq;
    auto acq_row = [&](const StepOnResult& r) {
        acq.push_back({format_double(r.omega_rs), format_double(r.omega_rs / osc.params.gamma),
                       fmt_opt(r.acquisition_time), format_double(r.final_quarter_ratio)});
    };
    acq_row(main);
    for (const auto& r : extra) acq_row(r);
    {
        auto os = open_output(ctx, "acquisition.csv");
        io::write_table(os, {"omega_rs_rad_s", "omega_rs_over_gamma", "acquisition_time_s", "final_quarter_ratio"},
                        acq, meta);
    }
    write_summary(ctx, "summary.csv", meta,
                  {{"locked", flag(main.acquisition_time.has_value())},
                   {"acquisition_time_s", fmt_opt(main.acquisition_time)},
                   {"pre_step_magnitude", format_double(main.pre_step_magnitude)},
                   {"final_quarter_ratio", format_double(main.final_quarter_ratio)}});
    write_manifest_file(cfg, ctx);
}

namespace {

std::vector<std::vector<std::string>> critical_rows(const std::vector<locking::CriticalPoint>& pts,
                                                    double gamma) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : pts)
        rows.push_back({format_double(units::rad_to_hz(p.delta_inj)), format_double(p.delta_inj),
                        format_double(p.omega_rs_crit), format_double(p.omega_rs_crit / gamma),
                        format_double(p.bracket_low), format_double(p.suppression_ratio),
                        std::to_string(p.probes)});
    return rows;
}

const std::vector<std::string> kCriticalHeader = {"offset_hz", "delta_inj_rad_s", "omega_rs_crit_rad_s",
                                                  "omega_rs_crit_over_gamma", "bracket_low_rad_s",
                                                  "suppression_ratio", "probes"};

std::vector<std::pair<std::string, std::string>> fit_entries(const locking::KFit& fit) {
    return {{"k_angular", format_double(fit.k)},
            {"k_over_2pi", format_double(fit.k / units::two_pi)},
            {"r2_centred", format_double(fit.r2)}};
}

}  // namespace

void run_critical_points(const RunConfig& cfg, const CommandContext& ctx) {
    const auto osc = reference_from(cfg);
    const auto pts = critical_points(cfg, osc, ctx.threads);
    auto meta = with(manifest(cfg, ctx.command), "f_osc_hz", format_double(osc.f_osc));
    meta = with(meta, "a0", format_double(osc.a0));
    {
        auto os = open_output(ctx, "critical_points.csv");
        io::write_table(os, kCriticalHeader, critical_rows(pts, osc.params.gamma), meta);
    }
    std::vector<std::pair<std::string, std::string>> s;
    try {
        s = fit_entries(locking::fit_forcing_k(pts));
    } catch (const AnalysisError& e) {
        s = {{"k_angular", "nan"}, {"fit_error", e.what()}};
    }
    write_summary(ctx, "k_fit.csv", meta, s);
    write_manifest_file(cfg, ctx);
}

void run_fit_bandwidth(const RunConfig& cfg, const CommandContext& ctx) {
    if (!cfg.calibration) throw ConfigError("fit-bandwidth: kappa needs a [calibration] block");
    std::vector<locking::CriticalPoint> pts;
    double gamma = cfg.model.gamma;
    if (!cfg.critical_points_file.empty()) {
        std::ifstream in(cfg.critical_points_file);
        if (!in) throw ConfigError("cannot read " + cfg.critical_points_file);
        const io::Table t = io::read_table(in);
        const auto d = t.column("delta_inj_rad_s");
        const auto w = t.column("omega_rs_crit_rad_s");
        for (const auto& row : t.rows) {
            locking::CriticalPoint p;
            p.delta_inj = row[d];
            p.omega_rs_crit = row[w];
            pts.push_back(p);
        }
    } else {
        const auto osc = reference_from(cfg);
        pts = critical_points(cfg, osc, ctx.threads);
    }
    const auto fit = locking::fit_forcing_k(pts);
    const auto& m = *cfg.calibration;
    const double d_ind = calibration::induced_dipole(m);
    const double kap = calibration::kappa(fit.k, m.alpha, d_ind);
    const auto meta = manifest(cfg, ctx.command);
    auto s = fit_entries(fit);
    s.push_back({"d_ind_c_m", format_double(d_ind)});
    s.push_back({"alpha", format_double(m.alpha)});
    s.push_back({"kappa_rad_s_per_v_m", format_double(kap)});
    write_summary(ctx, "fit_report.csv", meta, s);

    std::vector<std::vector<std::string>> rows;
    for (const auto& p : pts) {
        const double e = calibration::field_from_rabi(p.omega_rs_crit, d_ind, m.alpha);
        rows.push_back({format_double(units::rad_to_hz(p.delta_inj)), format_double(p.omega_rs_crit),
                        format_double(10.0 * e), format_double(kap * e),
                        format_double(2.0 * kap * e)});
    }
    {
        auto os = open_output(ctx, "bandwidth.csv");
        io::write_table(os, {"offset_hz", "omega_rs_crit_rad_s", "critical_field_mv_cm",
                             "half_bandwidth_kappa_e_rad_s", "full_bandwidth_2kappa_e_rad_s"},
                        rows, with(meta, "gamma_rad_s", format_double(gamma)));
    }
    write_manifest_file(cfg, ctx);
}

void run_calibrate(const RunConfig& cfg, const CommandContext& ctx) {
    if (!cfg.calibration) throw ConfigError("calibrate needs a [calibration] block");
    const auto& m = *cfg.calibration;
    const double k = cfg.k_forcing.value_or(0.014);
    const double hb = calibration::zeeman_energy(m);
    const double d_ind = calibration::induced_dipole(m);
    const double kap = calibration::kappa(k, m.alpha, d_ind);
    std::vector<double> fields = cfg.fields;
    if (fields.empty() && cfg.drive_field) fields.push_back(*cfg.drive_field);
    if (fields.empty()) throw ConfigError("calibrate needs sweep.field_mv_cm or drive.field_mv_cm");
    const auto meta = manifest(cfg, ctx.command);
    std::vector<std::vector<std::string>> rows;
    for (double e : fields) {
        const double rabi = calibration::rabi_from_field(e, d_ind, m.alpha);
        rows.push_back({format_double(10.0 * e), format_double(e), format_double(rabi),
                        format_double(rabi / cfg.model.gamma), format_double(kap * e),
                        format_double(2.0 * kap * e), format_double(units::rad_to_hz(kap * e)),
                        format_double(units::rad_to_hz(2.0 * kap * e))});
    }
    {
        auto os = open_output(ctx, "calibration.csv");
        io::write_table(os, {"field_mv_cm", "field_v_m", "omega_rs_rad_s", "omega_rs_over_gamma",
                             "half_bandwidth_rad_s", "full_bandwidth_rad_s", "half_bandwidth_hz",
                             "full_bandwidth_hz"},
                        rows, meta);
    }
    write_summary(ctx, "summary.csv", meta,
                  {{"zeeman_energy_j", format_double(hb)},
                   {"induced_dipole_c_m", format_double(d_ind)},
                   {"alpha", format_double(m.alpha)},
                   {"k_forcing", format_double(k)},
                   {"kappa_rad_s_per_v_m", format_double(kap)}});
    write_manifest_file(cfg, ctx);
}

void run_scan_osc(const RunConfig& cfg, const CommandContext& ctx) {
    const auto grid = cfg.scan_grid();
    const auto ref = locking::find_osc_regime(grid, cfg.probe_settings(), ctx.threads);
    const double g = grid.gamma;
    auto meta = manifest(cfg, ctx.command);
    std::vector<std::vector<std::string>> rows;
    for (const auto& c : ref.scan)
        rows.push_back({format_double(c.params.omega / g), format_double(c.params.delta_r / g),
                        format_double(c.params.delta_s_state / g), format_double(c.params.chi / g),
                        flag(c.oscillating), format_double(c.peak_to_peak), format_double(c.drift),
                        format_double(c.frequency), flag(c.failed)});
    {
        auto os = open_output(ctx, "osc_map.csv");
        io::write_table(os, {"omega_over_gamma", "delta_r_over_gamma", "delta_s_over_gamma", "chi_over_gamma",
                             "oscillating", "peak_to_peak", "drift", "frequency_hz", "failed"},
                        rows, meta);
    }
    const auto n_osc = std::count_if(ref.scan.begin(), ref.scan.end(), [](const auto& c) { return c.oscillating; });
    write_summary(ctx, "reference.csv", meta,
                  {{"omega_over_gamma", format_double(ref.params.omega / g)},
                   {"delta_r_over_gamma", format_double(ref.params.delta_r / g)},
                   {"delta_s_over_gamma", format_double(ref.params.delta_s_state / g)},
                   {"chi_over_gamma", format_double(ref.params.chi / g)},
                   {"f_osc_hz", format_double(ref.f_osc)},
                   {"a0", format_double(ref.a0)},
                   {"target_hz", format_double(grid.target_frequency)},
                   {"oscillating_cells", std::to_string(n_osc)},
                   {"cells", std::to_string(ref.scan.size())}});
    write_manifest_file(cfg, ctx);
}

}  // namespace rydlock::cli
