#include "rydlock/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rydlock/errors.hpp"

namespace rydlock {
namespace {

using Vec = StateVector;

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// Dense output (Hairer & Wanner, DOPRI5 continuous extension).
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

bool all_finite(const Vec& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

class Stepper {
public:
    Stepper(const ModelParams& p, const DriveSchedule& drive, EquationVariant variant)
        : params_(p), drive_(drive), variant_(variant) {}

    void set_segment_rabi(double omega_rs) { rabi_ = omega_rs; }

    Vec rhs(double t, const Vec& y) const {
        const DriveSample sample{rabi_, drive_.phase_at(t)};
        return to_vector(derivative(from_vector(y), params_, sample, variant_));
    }

private:
    const ModelParams& params_;
    const DriveSchedule& drive_;
    EquationVariant variant_;
    double rabi_ = 0.0;
};

struct StepResult {
    Vec y_new;
    Vec k7;
    Vec err;
    std::array<Vec, 5> dense;  // r1..r5
};

StepResult dp_step(const Stepper& f, double t, const Vec& y, const Vec& k1, double h) {
    Vec tmp;
    auto stage = [&](std::initializer_list<std::pair<double, const Vec*>> terms) {
        for (std::size_t i = 0; i < kStateDim; ++i) {
            double acc = y[i];
            for (const auto& [a, k] : terms) acc += h * a * (*k)[i];
            tmp[i] = acc;
        }
        return tmp;
    };
    const Vec k2 = f.rhs(t + c2 * h, stage({{a21, &k1}}));
    const Vec k3 = f.rhs(t + c3 * h, stage({{a31, &k1}, {a32, &k2}}));
    const Vec k4 = f.rhs(t + c4 * h, stage({{a41, &k1}, {a42, &k2}, {a43, &k3}}));
    const Vec k5 = f.rhs(t + c5 * h, stage({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
    const Vec k6 = f.rhs(t + h, stage({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));

    StepResult r;
    r.y_new = stage({{a71, &k1}, {a73, &k3}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
    r.k7 = f.rhs(t + h, r.y_new);
    for (std::size_t i = 0; i < kStateDim; ++i) {
        r.err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                        e7 * r.k7[i]);
        const double ydiff = r.y_new[i] - y[i];
        const double bspl = h * k1[i] - ydiff;
        r.dense[0][i] = y[i];
        r.dense[1][i] = ydiff;
        r.dense[2][i] = bspl;
        r.dense[3][i] = ydiff - h * r.k7[i] - bspl;
        r.dense[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                             d7 * r.k7[i]);
    }
    return r;
}

Vec dense_eval(const std::array<Vec, 5>& r, double theta) {
    const double theta1 = 1.0 - theta;
    Vec out;
    for (std::size_t i = 0; i < kStateDim; ++i)
        out[i] = r[0][i] + theta * (r[1][i] + theta1 * (r[2][i] + theta * (r[3][i] + theta1 * r[4][i])));
    return out;
}

double error_norm(const Vec& err, const Vec& y0, const Vec& y1, double rtol, double atol) {
    double sum = 0.0;
    for (std::size_t i = 0; i < kStateDim; ++i) {
        const double scale = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double q = err[i] / scale;
        sum += q * q;
    }
    return std::sqrt(sum / kStateDim);
}

double initial_step(const Stepper& f, double t, const Vec& y, const Vec& k1,
                    const IntegrationSpec& spec, double span) {
    double d0 = 0.0, d1n = 0.0;
    for (std::size_t i = 0; i < kStateDim; ++i) {
        const double sc = spec.abs_tol + spec.rel_tol * std::abs(y[i]);
        d0 += (y[i] / sc) * (y[i] / sc);
        d1n += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / kStateDim);
    d1n = std::sqrt(d1n / kStateDim);
    double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1n;
    h0 = std::min({h0, spec.max_step, span});
    Vec y1;
    for (std::size_t i = 0; i < kStateDim; ++i) y1[i] = y[i] + h0 * k1[i];
    const Vec k2 = f.rhs(t + h0, y1);
    double d2 = 0.0;
    for (std::size_t i = 0; i < kStateDim; ++i) {
        const double sc = spec.abs_tol + spec.rel_tol * std::abs(y[i]);
        d2 += ((k2[i] - k1[i]) / sc) * ((k2[i] - k1[i]) / sc);
    }
    d2 = std::sqrt(d2 / kStateDim) / h0;
    const double dmax = std::max(d1n, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
    return std::min({100.0 * h0, h1, spec.max_step, span});
}

}  // namespace

std::size_t IntegrationSpec::sample_count() const {
    const double n = std::floor((t_end - t_start) * sample_rate * (1.0 + 1e-12));
    return static_cast<std::size_t>(n) + 1;
}

void validate(const IntegrationSpec& spec) {
    if (!std::isfinite(spec.t_start) || !std::isfinite(spec.t_end) || !(spec.t_end > spec.t_start))
        throw ConfigError("integration.t_end must exceed integration.t_start");
    if (!(spec.sample_rate > 0.0) || !std::isfinite(spec.sample_rate))
        throw ConfigError("integration.sample_rate must be > 0");
    if (!(spec.rel_tol > 0.0) || !(spec.abs_tol > 0.0))
        throw ConfigError("integration tolerances must be > 0");
    if (!(spec.max_step > 0.0)) throw ConfigError("integration.max_step must be > 0");
    if (spec.fixed_step < 0.0) throw ConfigError("integration.fixed_step must be >= 0");
    if (spec.expected_frequency > 0.0 && spec.sample_rate < 16.0 * spec.expected_frequency)
        throw ConfigError("integration.sample_rate must give >= 16 samples per expected period");
    if (spec.sample_count() < 2) throw ConfigError("integration grid has fewer than 2 samples");
}

Trajectory integrate(const ModelParams& params, const MeanFieldState& init,
                     const IntegrationSpec& spec, const DriveSchedule& drive,
                     EquationVariant variant) {
    validate(params);
    validate(spec);
    if (!init.finite()) throw NumericError("non-finite initial state", spec.t_start);

    Trajectory traj;
    traj.metadata.params = params;
    traj.metadata.spec = spec;
    traj.metadata.variant = variant;
    traj.metadata.drive = drive.describe();

    const std::size_t n_out = spec.sample_count();
    traj.times.reserve(n_out);
    traj.states.reserve(n_out);
    traj.observable.reserve(n_out);
    std::size_t next_out = 0;
    auto emit = [&](const Vec& v) {
        traj.times.push_back(spec.sample_time(next_out));
        const MeanFieldState s = from_vector(v);
        traj.states.push_back(s);
        traj.observable.push_back(s.sigma_gr.imag());
        ++next_out;
    };

    // Segment boundaries: the drive breakpoints strictly inside (t_start, t_end).
    std::vector<double> bounds{spec.t_start};
    for (double b : drive.breakpoints())
        if (b > spec.t_start && b < spec.t_end) bounds.push_back(b);
    bounds.push_back(spec.t_end);

    Stepper f(params, drive, variant);
    Vec y = to_vector(init);
    double t = spec.t_start;
    double h = 0.0;
    double err_prev = 1e-4;
    constexpr double safety = 0.9, fac_min = 0.2, fac_max = 5.0;
    constexpr double beta = 0.04, alpha = 0.2 - 0.75 * beta;

    emit(y);
    for (std::size_t seg = 0; seg + 1 < bounds.size(); ++seg) {
        const double seg_end = bounds[seg + 1];
        f.set_segment_rabi(drive.omega_rs_at(0.5 * (bounds[seg] + seg_end)));
        Vec k1 = f.rhs(t, y);
        if (spec.fixed_step > 0.0) h = spec.fixed_step;
        else if (h <= 0.0) h = initial_step(f, t, y, k1, spec, seg_end - t);

        while (t < seg_end) {
            double step = std::min(spec.fixed_step > 0.0 ? spec.fixed_step : h, spec.max_step);
            bool last = false;
            if (t + step >= seg_end || seg_end - (t + step) < 1e-12 * step) {
                step = seg_end - t;
                last = true;
            }
            if (step <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t)))
                throw NumericError("step size underflow", t);

            StepResult r = dp_step(f, t, y, k1, step);
            if (!all_finite(r.y_new)) {
                if (spec.fixed_step > 0.0) throw NumericError("non-finite state", t);
                h = 0.25 * step;
                ++traj.metadata.rejected_steps;
                if (h < 1e-300) throw NumericError("non-finite state", t);
                continue;
            }

            if (spec.fixed_step <= 0.0) {
                const double err = std::max(error_norm(r.err, y, r.y_new, spec.rel_tol, spec.abs_tol), 1e-10);
                if (err > 1.0) {
                    ++traj.metadata.rejected_steps;
                    h = step * std::max(fac_min, safety * std::pow(err, -0.2));
                    continue;
                }
                double fac = safety * std::pow(err, -alpha) * std::pow(err_prev, beta);
                fac = std::clamp(fac, fac_min, fac_max);
                err_prev = err;
                if (!last) h = step * fac;
                else h = std::max(h, step * fac);
            }
            ++traj.metadata.accepted_steps;

            const double t_new = last ? seg_end : t + step;
            while (next_out < n_out) {
                const double ts = spec.sample_time(next_out);
                if (ts > t_new) break;
                emit(dense_eval(r.dense, std::clamp((ts - t) / step, 0.0, 1.0)));
            }
            t = t_new;
            y = r.y_new;
            k1 = r.k7;
        }
    }
    // Floating-point slack at t_end.
    while (next_out < n_out) emit(y);
    return traj;
}

}  // namespace rydlock
