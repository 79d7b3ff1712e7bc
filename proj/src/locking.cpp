#include "rydlock/locking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rydlock/errors.hpp"
#include "rydlock/units.hpp"
#include "rydlock/work_pool.hpp"

namespace rydlock::locking {
namespace {

constexpr double kMinPeakToPeak = 1e-4;
constexpr double kMaxDrift = 0.02;
constexpr double kMinPeriods = 100.0;

IntegrationSpec probe_spec(const ProbeSettings& s, double record) {
    IntegrationSpec spec;
    spec.t_end = record;
    spec.sample_rate = s.sample_rate;
    spec.rel_tol = s.rel_tol;
    spec.abs_tol = s.abs_tol;
    spec.max_step = s.max_step;
    return spec;
}

double peak_to_peak(const std::vector<double>& x, std::size_t a, std::size_t b) {
    const auto [lo, hi] = std::minmax_element(x.begin() + static_cast<std::ptrdiff_t>(a),
                                              x.begin() + static_cast<std::ptrdiff_t>(b));
    return *hi - *lo;
}

// Largest bin amplitude with |f - centre| <= half_width.
double max_amplitude_near(const Spectrum& sp, double centre, double half_width) {
    double best = 0.0;
    for (std::size_t k = 0; k < sp.size(); ++k)
        if (std::abs(sp.freqs[k] - centre) <= half_width) best = std::max(best, sp.amplitude[k]);
    return best;
}

double residual_half_width(const Spectrum& sp, double delta_inj) {
    return std::max(0.5 * std::abs(units::rad_to_hz(delta_inj)), 2.0 * sp.bin_width());
}

Spectrum spectrum_of(const OscReference& osc, const LockRequest& req) {
    const ProbeSettings& s = osc.settings;
    const Trajectory tr = integrate(osc.params, {}, probe_spec(s, s.record),
                                    injection_drive(osc, req), s.variant);
    PeriodogramOptions opt;
    opt.transient_skip = req.protocol == Protocol::StepOn
                             ? req.t_on + 0.5 * (s.record - req.t_on)
                             : s.transient;
    return periodogram(tr.observable, s.sample_rate, opt);
}

std::string describe_axis(const char* name, const std::vector<double>& axis, double gamma) {
    std::ostringstream os;
    os << name << "/gamma in [";
    if (!axis.empty()) {
        const auto [lo, hi] = std::minmax_element(axis.begin(), axis.end());
        os << *lo / gamma << ", " << *hi / gamma;
    }
    os << "] (" << axis.size() << " values)";
    return os.str();
}

}  // namespace

void validate(const ProbeSettings& s) {
    if (!(s.record > 0.0) || !(s.transient >= 0.0) || !(s.transient < s.record))
        throw ConfigError("locking: need 0 <= transient < record");
    if (!(s.sample_rate > 0.0)) throw ConfigError("locking: sample_rate must be > 0");
    if (!(s.suppression > 0.0 && s.suppression < 1.0))
        throw ConfigError("locking: suppression must lie in (0, 1)");
    if (s.injection_sign != 1 && s.injection_sign != -1)
        throw ConfigError("locking: injection_sign must be +1 or -1");
}

ModelParams ScanGrid::cell(std::size_t i) const {
    ModelParams p;
    p.gamma = gamma;
    p.chi = chi[i % chi.size()];
    i /= chi.size();
    p.delta_s_state = delta_s[i % delta_s.size()];
    i /= delta_s.size();
    p.delta_r = delta_r[i % delta_r.size()];
    i /= delta_r.size();
    p.omega = omega[i];
    return p;
}

ScanCell classify(const ModelParams& params, double record, EquationVariant variant) {
    ScanCell cell;
    cell.params = params;
    ProbeSettings s;
    s.rel_tol = 1e-7;
    s.abs_tol = 1e-9;
    Trajectory tr;
    try {
        tr = integrate(params, {}, probe_spec(s, record), DriveSchedule::constant(0.0, 0.0),
                       variant);
    } catch (const NumericError&) {
        cell.failed = true;
        return cell;
    }
    const auto& x = tr.observable;
    const std::size_t n = x.size();
    const double middle = peak_to_peak(x, n * 2 / 5, n * 3 / 5);
    cell.peak_to_peak = peak_to_peak(x, n * 4 / 5, n);
    cell.drift = middle > 0.0 ? std::abs(cell.peak_to_peak - middle) / middle
                              : std::numeric_limits<double>::infinity();
    if (cell.peak_to_peak <= kMinPeakToPeak || !(cell.drift < kMaxDrift)) return cell;

    PeriodogramOptions opt;
    opt.transient_skip = 0.4 * record;
    const Spectrum sp = periodogram(x, s.sample_rate, opt);
    const double f_hi = std::min(400e3, 0.45 * s.sample_rate);
    const PeakReport pk = track_peak(sp, 10.0 * sp.bin_width(), f_hi);
    if (pk.frequency * 0.6 * record < kMinPeriods) return cell;
    cell.oscillating = true;
    cell.frequency = pk.frequency;
    return cell;
}

OscReference find_osc_regime(const ScanGrid& grid, const ProbeSettings& settings,
                             std::size_t threads) {
    validate(settings);
    if (grid.size() == 0) throw ConfigError("scan grid is empty");
    if (!(grid.gamma > 0.0)) throw ConfigError("scan grid gamma must be > 0");
    std::vector<ScanCell> cells(grid.size());
    parallel_for(cells.size(), threads, [&](std::size_t i) {
        ModelParams p = grid.cell(i);
        // No drive, no dynamics: skip the integration.
        if (p.omega == 0.0) {
            cells[i].params = p;
            return;
        }
        cells[i] = classify(p, grid.record, settings.variant);
    });

    std::size_t best = cells.size();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!cells[i].oscillating) continue;
        if (best == cells.size() ||
            std::abs(cells[i].frequency - grid.target_frequency) <
                std::abs(cells[best].frequency - grid.target_frequency))
            best = i;
    }
    if (best == cells.size()) {
        std::ostringstream os;
        os << "no oscillating point in scan: " << describe_axis("omega", grid.omega, grid.gamma)
           << ", " << describe_axis("delta_r", grid.delta_r, grid.gamma) << ", "
           << describe_axis("delta_s", grid.delta_s, grid.gamma) << ", "
           << describe_axis("chi", grid.chi, grid.gamma);
        throw AnalysisError(os.str());
    }
    OscReference ref = characterize(cells[best].params, settings);
    ref.scan = std::move(cells);
    ref.origin = "scan";
    return ref;
}

OscReference characterize(const ModelParams& params, const ProbeSettings& settings) {
    validate(settings);
    validate(params);
    ModelParams p = params;
    p.omega_rs = 0.0;
    p.delta_inj = 0.0;
    const ScanCell check = classify(p, settings.record, settings.variant);
    if (!check.oscillating)
        throw AnalysisError("parameter set is not in the oscillating regime");

    OscReference ref;
    ref.params = p;
    ref.settings = settings;
    ref.origin = "explicit";
    const Trajectory tr = integrate(p, {}, probe_spec(settings, settings.record),
                                    DriveSchedule::constant(0.0, 0.0), settings.variant);
    PeriodogramOptions opt;
    opt.transient_skip = settings.transient;
    const Spectrum sp = periodogram(tr.observable, settings.sample_rate, opt);
    const double bw = sp.bin_width();
    const PeakReport pk = track_peak(sp, std::max(check.frequency - 0.1 * check.frequency, 8.0 * bw),
                                     check.frequency + 0.1 * check.frequency + 8.0 * bw);
    ref.f_osc = pk.frequency;
    ref.a0 = max_amplitude_near(sp, ref.f_osc, 2.0 * bw);
    return ref;
}

double injection_frequency(const OscReference& osc, double delta_inj) {
    return osc.f_osc + units::rad_to_hz(delta_inj);
}

DriveSchedule injection_drive(const OscReference& osc, const LockRequest& req) {
    if (!(req.omega_rs >= 0.0)) throw ConfigError("omega_rs must be >= 0");
    const double f_inj = injection_frequency(osc, req.delta_inj);
    if (!(f_inj > 0.0) || !(f_inj < 0.5 * osc.settings.sample_rate))
        throw ConfigError("injection frequency outside (0, Nyquist)");
    const double delta = osc.settings.injection_sign * units::hz_to_rad(f_inj);
    if (req.protocol == Protocol::StepOn) {
        if (!(req.t_on > 0.0 && req.t_on < osc.settings.record))
            throw ConfigError("t_on must lie inside the record");
        return DriveSchedule::step_on(req.t_on, req.omega_rs, delta);
    }
    return DriveSchedule::constant(req.omega_rs, delta);
}

Spectrum lock_spectrum(const OscReference& osc, const LockRequest& req) {
    return spectrum_of(osc, req);
}

LockReport lock_readout(const OscReference& osc, const LockRequest& req) {
    return read_lock(osc, spectrum_of(osc, req), req.delta_inj);
}

LockReport read_lock(const OscReference& osc, const Spectrum& sp, double delta_inj) {
    LockReport rep;
    rep.injection_frequency = injection_frequency(osc, delta_inj);
    rep.bin_width = sp.bin_width();
    const double gap = std::abs(rep.injection_frequency - osc.f_osc);
    const double margin = std::max(0.5 * gap, 8.0 * rep.bin_width);
    const double lo = std::max(std::min(osc.f_osc, rep.injection_frequency) - margin, rep.bin_width);
    const PeakReport pk =
        track_peak(sp, lo, std::max(osc.f_osc, rep.injection_frequency) + margin);
    rep.readout = pk.frequency;
    rep.residual = max_amplitude_near(sp, osc.f_osc, residual_half_width(sp, delta_inj));
    rep.residual_ratio = osc.a0 > 0.0 ? rep.residual / osc.a0 : 0.0;
    const bool captured = std::abs(rep.readout - rep.injection_frequency) <= rep.bin_width;
    rep.locked = captured && rep.residual_ratio <= osc.settings.suppression;
    if (3.0 * 1.25 * rep.readout < 0.5 * sp.sample_rate)
        rep.harmonics = harmonic_peaks(sp, rep.readout, 3);
    return rep;
}

CriticalPoint critical_point(const OscReference& osc, double delta_inj, double omega_lo,
                             double omega_hi) {
    if (!(omega_lo >= 0.0) || !(omega_hi > omega_lo))
        throw ConfigError("critical_point: need 0 <= omega_lo < omega_hi");
    const double bin = 1.0 / (osc.settings.record - osc.settings.transient);
    if (std::abs(units::rad_to_hz(delta_inj)) < 4.0 * bin * (1.0 - 1e-12))
        throw ConfigError("critical_point: offset must be at least 4 spectral bins");

    CriticalPoint cp;
    cp.delta_inj = delta_inj;
    auto ratio = [&](double omega_rs) {
        ++cp.probes;
        return lock_readout(osc, {omega_rs, delta_inj, Protocol::Steady, 0.0}).residual_ratio;
    };
    const double thr = osc.settings.suppression;
    const double r_lo = ratio(omega_lo);
    double r_hi = ratio(omega_hi);
    if (r_lo <= thr || r_hi > thr) {
        std::ostringstream os;
        os << "critical_point: criterion not bracketed; residual ratio " << r_lo << " at "
           << omega_lo << " rad/s and " << r_hi << " at " << omega_hi << " rad/s";
        throw AnalysisError(os.str());
    }
    double lo = omega_lo, hi = omega_hi;
    while (hi - lo > 0.01 * hi) {
        const double mid = 0.5 * (lo + hi);
        const double r = ratio(mid);
        if (r <= thr) {
            hi = mid;
            r_hi = r;
        } else {
            lo = mid;
        }
    }
    cp.omega_rs_crit = hi;
    cp.bracket_low = lo;
    cp.suppression_ratio = r_hi;
    return cp;
}

KFit fit_forcing_k(const std::vector<CriticalPoint>& points) {
    if (points.size() < 4) throw AnalysisError("fit_forcing_k needs at least 4 points");
    double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
    double sxy = 0.0, sxx = 0.0, sy = 0.0;
    for (const auto& p : points) {
        const double y = std::abs(p.delta_inj);
        dmin = std::min(dmin, y);
        dmax = std::max(dmax, y);
        sxy += p.omega_rs_crit * y;
        sxx += p.omega_rs_crit * p.omega_rs_crit;
        sy += y;
    }
    if (!(dmin > 0.0) || dmax < 2.0 * dmin)
        throw AnalysisError("fit_forcing_k: offsets must span a factor of 2");
    if (!(sxx > 0.0)) throw AnalysisError("fit_forcing_k: all critical Rabi frequencies are zero");

    KFit fit;
    fit.k = sxy / sxx;
    const double mean = sy / static_cast<double>(points.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (const auto& p : points) {
        const double y = std::abs(p.delta_inj);
        const double r = y - fit.k * p.omega_rs_crit;
        fit.residuals.push_back(r);
        ss_res += r * r;
        ss_tot += (y - mean) * (y - mean);
    }
    fit.r2 = 1.0 - ss_res / ss_tot;
    return fit;
}

InterceptResult bandwidth_by_intercept(const std::vector<SweepRow>& rows, double f_inj,
                                       double f_osc, double min_shift, std::size_t fit_rows) {
    if (fit_rows < 2) throw ConfigError("bandwidth_by_intercept: fit_rows must be >= 2");
    std::size_t first_locked = rows.size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0 && !(rows[i].field > rows[i - 1].field))
            throw ConfigError("bandwidth_by_intercept: field axis must increase");
        if (rows[i].locked && first_locked == rows.size()) first_locked = i;
    }
    std::vector<const SweepRow*> pulled;
    for (std::size_t i = first_locked; i-- > 0 && pulled.size() < fit_rows;) {
        if (std::abs(rows[i].readout - f_osc) < min_shift) break;
        pulled.push_back(&rows[i]);
    }
    if (pulled.size() < fit_rows)
        throw AnalysisError("bandwidth_by_intercept: no pulled region below lock");

    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const SweepRow* r : pulled) {
        sx += r->field;
        sy += r->readout;
        sxx += r->field * r->field;
        sxy += r->field * r->readout;
    }
    const double n = static_cast<double>(pulled.size());
    const double den = n * sxx - sx * sx;
    InterceptResult res;
    res.slope = (n * sxy - sx * sy) / den;
    res.intercept = (sy - res.slope * sx) / n;
    if (!(std::abs(res.slope) > 0.0) || (f_inj - f_osc) * res.slope <= 0.0)
        throw AnalysisError("bandwidth_by_intercept: readout is not pulled toward the injection");
    res.critical_field = (f_inj - res.intercept) / res.slope;
    res.offset = f_inj - f_osc;
    res.fitted_rows = pulled.size();
    return res;
}

double two_sided_bandwidth(const std::vector<InterceptResult>& above,
                           const std::vector<InterceptResult>& below, double field) {
    auto offset_at = [field](std::vector<InterceptResult> side) {
        if (side.size() < 2) throw AnalysisError("two_sided_bandwidth needs 2 intercepts per side");
        std::sort(side.begin(), side.end(), [](const auto& a, const auto& b) {
            return a.critical_field < b.critical_field;
        });
        for (std::size_t i = 1; i < side.size(); ++i) {
            const auto& a = side[i - 1];
            const auto& b = side[i];
            if (field >= a.critical_field && field <= b.critical_field) {
                const double t = (field - a.critical_field) / (b.critical_field - a.critical_field);
                return a.offset + t * (b.offset - a.offset);
            }
        }
        throw AnalysisError("two_sided_bandwidth: field outside the intercept range");
    };
    return std::abs(offset_at(above) - offset_at(below));
}

}  // namespace rydlock::locking
