#include "rydlock/adler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rydlock/errors.hpp"
#include "rydlock/kernels/kernels.hpp"

namespace rydlock::adler {
namespace {

double lock_scale(const AdlerParams& p) {
    return std::max(std::abs(0.5 * p.delta_omega), p.coupling());
}

bool rate_is_locked(double rate, const AdlerParams& p) {
    return std::abs(rate) < 1e-6 * lock_scale(p);
}

}  // namespace

void validate(const AdlerParams& p) {
    if (!(p.forcing_k > 0.0) || !std::isfinite(p.forcing_k))
        throw ConfigError("adler forcing_k must be > 0");
    if (!(p.omega_rs >= 0.0) || !std::isfinite(p.omega_rs))
        throw ConfigError("adler omega_rs must be >= 0");
    if (!std::isfinite(p.delta_omega)) throw ConfigError("adler delta_omega must be finite");
}

double phase_rhs(double phi, const AdlerParams& p) {
    return 0.5 * p.delta_omega + p.coupling() * std::cos(phi);
}

bool is_locked(const AdlerParams& p) { return std::abs(p.delta_omega) < 2.0 * p.coupling(); }

double steady_phase(const AdlerParams& p) {
    if (!is_locked(p)) throw AnalysisError("steady_phase: parameters are not locked");
    return std::acos(-p.delta_omega / (2.0 * p.coupling()));
}

double pulled_frequency(const AdlerParams& p) {
    if (is_locked(p)) return 0.0;
    const double half = 0.5 * p.delta_omega;
    const double c = p.coupling();
    return std::copysign(std::sqrt(half * half - c * c), half);
}

PhaseTrajectory integrate_phase(const AdlerParams& p, double phi0, double t_end, double dt) {
    validate(p);
    if (!(t_end > 0.0) || !(dt > 0.0)) throw AnalysisError("integrate_phase needs t_end, dt > 0");
    const double fastest = std::abs(0.5 * p.delta_omega) + p.coupling();
    if (fastest > 0.0 && dt > 0.01 * 2.0 * std::numbers::pi / fastest * (1.0 + 1e-12))
        throw AnalysisError("integrate_phase: dt exceeds 1% of the fastest period");

    const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
    const double h = t_end / static_cast<double>(steps);
    PhaseTrajectory out;
    out.times.resize(steps + 1);
    out.phase.resize(steps + 1);
    double phi = phi0;
    out.times[0] = 0.0;
    out.phase[0] = phi;
    for (std::size_t s = 1; s <= steps; ++s) {
        const double k1 = phase_rhs(phi, p);
        const double k2 = phase_rhs(phi + 0.5 * h * k1, p);
        const double k3 = phase_rhs(phi + 0.5 * h * k2, p);
        const double k4 = phase_rhs(phi + h * k3, p);
        phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.times[s] = static_cast<double>(s) * h;
        out.phase[s] = phi;
    }
    const std::size_t mid = steps / 2;
    const double span = out.times[steps] - out.times[mid];
    out.mean_frequency = (out.phase[steps] - out.phase[mid]) / span;
    out.locked = rate_is_locked(phase_rhs(phi, p), p);
    return out;
}

std::vector<PhaseSummary> integrate_phase_batch(std::span<const AdlerParams> params,
                                                std::span<const double> phi0,
                                                std::span<const double> t_end, std::size_t steps) {
    const std::size_t n = params.size();
    if (phi0.size() != n || t_end.size() != n)
        throw AnalysisError("integrate_phase_batch: mismatched lane counts");
    if (steps < 2) throw AnalysisError("integrate_phase_batch needs >= 2 steps");

    std::vector<double> half(n), coupling(n), dt(n), phi(phi0.begin(), phi0.end());
    for (std::size_t i = 0; i < n; ++i) {
        validate(params[i]);
        if (!(t_end[i] > 0.0)) throw AnalysisError("integrate_phase_batch needs t_end > 0");
        half[i] = 0.5 * params[i].delta_omega;
        coupling[i] = params[i].coupling();
        dt[i] = t_end[i] / static_cast<double>(steps);
    }
    const auto& k = kernels::active_kernels();
    const std::size_t first = steps / 2;
    k.adler_rk4({half, coupling, dt, phi}, first);
    const std::vector<double> phi_mid = phi;
    k.adler_rk4({half, coupling, dt, phi}, steps - first);

    std::vector<PhaseSummary> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].final_phase = phi[i];
        out[i].final_rate = phase_rhs(phi[i], params[i]);
        out[i].locked = rate_is_locked(out[i].final_rate, params[i]);
        out[i].mean_frequency =
            (phi[i] - phi_mid[i]) / (dt[i] * static_cast<double>(steps - first));
    }
    return out;
}

}  // namespace rydlock::adler
