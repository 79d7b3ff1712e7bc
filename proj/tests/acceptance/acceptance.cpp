// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "rydlock/adler.hpp"
#include "rydlock/calibration.hpp"
#include "rydlock/commands.hpp"
#include "rydlock/config.hpp"
#include "rydlock/errors.hpp"
#include "rydlock/integrator.hpp"
#include "rydlock/locking.hpp"
#include "rydlock/spectral.hpp"
#include "rydlock/units.hpp"

using namespace rydlock;
namespace fs = std::filesystem;

namespace {

const double kGamma = units::khz_to_rad(25.4);

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::size_t threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// Oscillating reference point used by the locking criteria.
const char* kReferenceConfig = R"(schema = 1
[model]
variant = supplementary
gamma_khz = 25.4
omega_gamma = 0.5
delta_r_gamma = 4
delta_s_gamma = 1
chi_gamma = 32
[integration]
t_end_ms = 16
[drive]
omega_rs_gamma = 1
offset_khz = 0.5
[calibration]
preset = reference
)";

const locking::OscReference& reference() {
    static const locking::OscReference osc = cli::reference_from(parse_config(kReferenceConfig));
    return osc;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// 1. Lock condition: numeric phase integration vs |dw| < 2 K Omega_rs.
Outcome adler_lock_condition() {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> ratio(0.0, 2.0), logk(std::log(0.005), std::log(0.05)),
        logw(std::log(1e4), std::log(1e6)), sign(-1.0, 1.0);
    std::vector<adler::AdlerParams> ps;
    std::vector<double> phi0, t_end;
    std::uniform_real_distribution<double> phase(-M_PI, M_PI);
    while (ps.size() < 1200) {
        const double r = ratio(rng);
        if (std::abs(r - 1.0) < 0.01) continue;
        const double k = std::exp(logk(rng)), w = std::exp(logw(rng));
        ps.push_back({(sign(rng) < 0 ? -1.0 : 1.0) * r * 2.0 * k * w, k, w});
        phi0.push_back(phase(rng));
        t_end.push_back(400.0 / (k * w));
    }
    // dt = t_end / steps stays below 1% of the fastest period for ratios up to 2.
    const auto out = adler::integrate_phase_batch(ps, phi0, t_end, 120000);
    std::size_t agree = 0, locked = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        agree += out[i].locked == adler::is_locked(ps[i]);
        locked += adler::is_locked(ps[i]);
    }
    return {agree == ps.size(),
            fmt("%zu/%zu triples agree (%zu locked), 1%% boundary band excluded", agree, ps.size(), locked)};
}

// 2. Pulled frequency: numeric mean dphi/dt vs the closed form.
Outcome adler_pulled_frequency() {
    const double k = 0.014, w = 1e5, kw = k * w;
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double half = (i % 2 ? -1.0 : 1.0) * kw * (1.1 + 0.4 * (i / 2));
        const adler::AdlerParams p{2.0 * half, k, w};
        const double analytic = (half > 0 ? 1.0 : -1.0) * std::sqrt(half * half - kw * kw);
        const double t = 20000.0 / kw;
        const double dt = 0.01 * units::two_pi / (std::abs(half) + kw);
        const auto tr = adler::integrate_phase(p, 0.0, t, dt);
        worst = std::max(worst, std::abs(tr.mean_frequency - analytic) / std::abs(analytic));
    }
    return {worst <= 0.005, fmt("20-point grid, |dw/2| from 1.1 to 4.7 K*Omega_rs, worst relative error %.2e",
                                worst)};
}

// 3. Limit cycle in the target band from a 10^3-point scan.
Outcome limit_cycle_scan() {
    locking::ScanGrid g;
    g.gamma = kGamma;
    for (double v : {0.1, 0.15, 0.2, 0.3, 0.4, 0.5}) g.omega.push_back(v * kGamma);
    for (double v : {0, 1, 2, 3, 4, 5}) {
        g.delta_r.push_back(v * kGamma);
        g.delta_s.push_back(v * kGamma);
    }
    for (double v : {8, 16, 32, 64, 128}) g.chi.push_back(v * kGamma);
    g.target_frequency = 23.45e3;
    locking::ProbeSettings s;
    s.variant = EquationVariant::Supplementary;
    const auto ref = locking::find_osc_regime(g, s, threads());
    std::size_t n_osc = 0;
    double lowest = 1e300;
    for (const auto& c : ref.scan)
        if (c.oscillating) {
            ++n_osc;
            lowest = std::min(lowest, c.frequency);
        }
    const auto check = locking::classify(ref.params, 16e-3, s.variant);
    const double periods = 0.6 * 16e-3 * ref.f_osc;
    bool in_band = ref.f_osc >= 20e3 && ref.f_osc <= 27e3 && check.oscillating && check.drift < 0.02 &&
                   periods >= 100.0;

    // The other equation form, for completeness.
    std::string other;
    locking::ProbeSettings m = s;
    m.variant = EquationVariant::Methods;
    try {
        const auto alt = locking::find_osc_regime(g, m, threads());
        const auto alt_check = locking::classify(alt.params, 16e-3, m.variant);
        const bool alt_ok = alt.f_osc >= 20e3 && alt.f_osc <= 27e3 && alt_check.oscillating &&
                            alt_check.drift < 0.02 && 0.6 * 16e-3 * alt.f_osc >= 100.0;
        in_band = in_band || alt_ok;
        other = fmt("; methods form: closest %.3f kHz", alt.f_osc / 1e3);
    } catch (const AnalysisError&) {
        other = "; methods form: no oscillating cell";
    }
    return {in_band,
            fmt("supplementary form: %zu cells, %zu oscillating; closest to 23.45 kHz is %.3f kHz at (Omega, Dr, Ds, chi)/gamma = "
                "(%.2f, %.0f, %.0f, %.0f), drift %.4f over %.0f periods; lowest oscillating %.3f kHz; "
                "band [20, 27] kHz",
                g.size(), n_osc, ref.f_osc / 1e3, ref.params.omega / kGamma, ref.params.delta_r / kGamma,
                ref.params.delta_s_state / kGamma, ref.params.chi / kGamma, check.drift, periods, lowest / 1e3) +
                other};
}

// 4. Step-on lock at Omega_rs = gamma.
Outcome step_on_lock() {
    RunConfig cfg = parse_config(std::string(kReferenceConfig) +
                                 "[analysis]\nspectrogram_window_ms = 8\nspectrogram_hop_ms = 0.5\n");
    cfg.integration.t_end = 40e-3;
    cfg.t_on = 10e-3;
    const auto& osc = reference();
    const auto r = cli::step_on(cfg, osc, kGamma);
    const double f_inj = osc.f_osc + *cfg.offset_hz;
    const double bin = 1.0 / cfg.spectrogram_window;
    bool captured = true;
    for (std::size_t c = 0; c < r.times.size(); ++c)
        if (r.times[c] >= cfg.t_on + 0.75 * (cfg.integration.t_end - cfg.t_on))
            captured = captured && std::abs(r.readout[c] - f_inj) <= bin;
    const bool suppressed = r.final_quarter_ratio <= 0.1;
    return {captured && suppressed && r.acquisition_time.has_value(),
            fmt("offset +0.5 kHz, f_inj %.2f Hz; natural line suppressed to %.2f%% of pre-step; final-quarter "
                "readout within one %.0f Hz bin: %s; acquisition %.3f ms",
                f_inj, 100.0 * r.final_quarter_ratio, bin, captured ? "yes" : "no",
                r.acquisition_time.value_or(NAN) * 1e3)};
}

std::vector<locking::CriticalPoint> g_critical;

// 5. Linear bandwidth law.
Outcome bandwidth_law() {
    RunConfig cfg = parse_config(std::string(kReferenceConfig) +
                                 "[sweep]\noffsets_khz = 0.5, 1, 1.5, 2\nomega_rs_lo_gamma = 0.1\n"
                                 "omega_rs_hi_gamma = 3\n");
    g_critical = cli::critical_points(cfg, reference(), threads());
    const auto fit = locking::fit_forcing_k(g_critical);
    std::string pts;
    for (const auto& p : g_critical)
        pts += fmt(" %.1f kHz->%.3f", units::rad_to_hz(p.delta_inj) / 1e3, p.omega_rs_crit / kGamma);
    const bool ok = fit.r2 >= 0.95 && fit.k > 0.0 && fit.k >= 0.0014 && fit.k <= 0.14;
    return {ok, fmt("K = %.4f (angular), R^2 = %.4f; Omega_rs_crit/gamma:%s", fit.k, fit.r2, pts.c_str())};
}

// 6. Critical field grows with offset, from field sweeps.
Outcome monotone_threshold() {
    const auto& osc = reference();
    std::vector<double> crit;
    std::string detail;
    for (double off : {0.5, 1.0, 1.5}) {
        RunConfig cfg = parse_config(std::string(kReferenceConfig) + "[sweep]\nfield_mv_cm = 0.5:6:111\n");
        cfg.offset_hz = off * 1e3;
        const auto r = cli::sweep_field(cfg, osc, threads());
        const double first = r.first_locked ? r.matrix.rows[*r.first_locked] : NAN;
        crit.push_back(first);
        detail += fmt(" %.1f kHz->%.2f mV/cm", off, first);
        if (r.intercept) detail += fmt(" (intercept %.2f)", r.intercept->critical_field);
    }
    const bool ok = std::isfinite(crit[0]) && crit[1] > crit[0] && crit[2] > crit[1];
    return {ok, "first locked field:" + detail};
}

// 7. Harmonics follow the injection in locked states.
Outcome harmonic_entrainment() {
    const auto& osc = reference();
    std::size_t locked = 0, good = 0;
    double worst = 0.0;
    for (double off : {500.0, 1000.0, -500.0, 1500.0})
        for (double w : {1.0, 1.5, 2.0}) {
            const auto r = locking::lock_readout(osc, {w * kGamma, units::hz_to_rad(off), locking::Protocol::Steady, 0.0});
            if (!r.locked) continue;
            ++locked;
            bool ok = r.harmonics.size() == 3;
            for (std::size_t k = 1; ok && k < 3; ++k) {
                const double err = std::abs(r.harmonics[k].frequency - (k + 1) * r.injection_frequency);
                worst = std::max(worst, err / r.bin_width);
                ok = err <= r.bin_width;
            }
            good += ok;
        }
    return {locked > 0 && good == locked,
            fmt("%zu locked states, %zu with 2f and 3f within one bin; worst offset %.3g bins", locked, good, worst)};
}

// 8. Calibration chain against hand arithmetic.
Outcome calibration_chain() {
    const double hbar = 1.054571817e-34, d = 4.96e-28, alpha = 0.11, e = 0.42;
    const double oracle = alpha * d * e / hbar;
    const double got = calibration::rabi_from_field(e, d, alpha);
    const double rel = std::abs(got - oracle) / oracle;
    const double chain = calibration::rabi_from_field(e, calibration::induced_dipole(calibration::reference_mixing()),
                                                      calibration::reference_mixing().alpha);
    const double ratio = got / kGamma;
    const bool ok = rel <= 1e-12 && std::abs(chain - oracle) / oracle <= 1e-12 && ratio >= 0.5 && ratio <= 2.5;
    return {ok, fmt("Omega_rs(4.2 mV/cm) = %.6e rad/s, oracle %.6e, rel diff %.1e; Omega_rs/gamma = %.3f", got,
                    oracle, rel, ratio)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// 9. Decay accuracy, convergence order, Parseval, determinism.
Outcome numerics_hygiene() {
    std::string detail;
    bool ok = true;
    {
        ModelParams p;
        p.gamma = kGamma;
        MeanFieldState init;
        init.n_r = 1.0;
        IntegrationSpec spec;
        spec.t_end = 5.0 / kGamma;
        spec.sample_rate = 1e8;
        const auto tr = integrate(p, init, spec, DriveSchedule::constant(0.0, 0.0), EquationVariant::Methods);
        double worst = 0.0;
        for (std::size_t k = 0; k < tr.size(); ++k) {
            const double want = std::exp(-kGamma * tr.times[k]);
            worst = std::max(worst, std::abs(tr.states[k].n_r - want) / want);
        }
        ok = ok && worst <= 10.0 * spec.rel_tol;
        detail += fmt("decay error %.1e (limit %.0e)", worst, 10.0 * spec.rel_tol);
    }
    {
        const auto& osc = reference();
        IntegrationSpec spec;
        spec.t_end = 0.2e-3;
        const auto drive = DriveSchedule::constant(kGamma, units::hz_to_rad(osc.f_osc + 500.0));
        auto run = [&](double h) {
            IntegrationSpec s = spec;
            s.fixed_step = h;
            return integrate(osc.params, {}, s, drive, EquationVariant::Supplementary);
        };
        const auto a = run(1e-6), b = run(0.5e-6), c = run(0.25e-6);
        double e1 = 0.0, e2 = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            e1 = std::max(e1, std::abs(a.observable[k] - b.observable[k]));
            e2 = std::max(e2, std::abs(b.observable[k] - c.observable[k]));
        }
        const double order = std::log2(e1 / e2);
        ok = ok && order >= 4.0;
        detail += fmt("; step-halving order %.2f", order);
    }
    {
        std::mt19937_64 rng(99);
        std::normal_distribution<double> n(0.0, 1.0);
        std::vector<double> x(4001);
        for (auto& v : x) v = n(rng);
        const Spectrum sp = periodogram(x, 1e6);
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= static_cast<double>(x.size());
        double lhs = 0.0, w2 = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double w = 0.5 - 0.5 * std::cos(units::two_pi * static_cast<double>(k) / x.size());
            lhs += w * w * (x[k] - mean) * (x[k] - mean);
            w2 += w * w;
        }
        double rhs = 0.0;
        for (double a : sp.asd) rhs += a * a;
        rhs *= w2 * sp.bin_width();
        const double rel = std::abs(rhs - lhs) / lhs;
        ok = ok && rel <= 1e-9;
        detail += fmt("; Parseval rel %.1e", rel);
    }
    {
        RunConfig cfg = parse_config(std::string(kReferenceConfig) + "[sweep]\nfield_mv_cm = 1, 2, 3, 4\n");
        const fs::path base = fs::temp_directory_path() / "rydlock_acceptance";
        fs::remove_all(base);
        cli::run_sweep_field(cfg, {base / "a", 1, "sweep-field"});
        cli::run_sweep_field(cfg, {base / "b", 1, "sweep-field"});
        cli::run_sweep_field(cfg, {base / "c", 4, "sweep-field"});
        bool same = true;
        for (const char* f : {"colormap_field.csv", "sweep_field.csv", "summary.csv", "manifest.txt"})
            same = same && slurp(base / "a" / f) == slurp(base / "b" / f) &&
                   slurp(base / "a" / f) == slurp(base / "c" / f) && !slurp(base / "a" / f).empty();
        ok = ok && same;
        detail += same ? "; repeated and 4-thread sweeps byte identical" : "; sweep outputs differ";
        fs::remove_all(base);
    }
    return {ok, detail};
}

struct Criterion {
    int id;
    const char* name;
    double budget;  // s
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> all = {
        {1, "Adler lock-condition equivalence", 10, adler_lock_condition},
        {2, "pulled-frequency analytics", 10, adler_pulled_frequency},
        {3, "limit-cycle existence in [20, 27] kHz", 300, limit_cycle_scan},
        {4, "step-on injection locking", 60, step_on_lock},
        {5, "linear bandwidth law", 600, bandwidth_law},
        {6, "monotone threshold", 600, monotone_threshold},
        {7, "harmonic entrainment", 60, harmonic_entrainment},
        {8, "calibration chain", 1, calibration_chain},
        {9, "numerics hygiene", 60, numerics_hygiene},
    };
    int failed = 0;
    for (const auto& c : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool pass = o.pass && dt <= c.budget;
        failed += !pass;
        std::printf("criterion %d %s: %s [%.2f s / %.0f s] %s\n", c.id, c.name, pass ? "PASS" : "FAIL", dt, c.budget,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
    return failed ? 1 : 0;
}
