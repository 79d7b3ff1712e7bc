#pragma once

#include <span>
#include <vector>

namespace rydlock::adler {

/// Reduced phase model dphi/dt = delta_omega/2 + K Omega_rs cos(phi),
/// with delta_omega/2 = omega_osc - delta_s.
struct AdlerParams {
    double delta_omega = 0.0;  ///< rad/s
    double forcing_k = 0.014;  ///< dimensionless, K = (n_r - n_s) / 2A treated as a fit constant
    double omega_rs = 0.0;     ///< rad/s

    double coupling() const { return forcing_k * omega_rs; }
};

/// Throws ConfigError unless forcing_k > 0 and omega_rs >= 0.
void validate(const AdlerParams& p);

struct PhaseTrajectory {
    std::vector<double> times;
    std::vector<double> phase;  ///< unwrapped, rad
    bool locked = false;
    double mean_frequency = 0.0;  ///< (phi(T) - phi(T/2)) / (T/2), rad/s
};

double phase_rhs(double phi, const AdlerParams& p);

/// |delta_omega| < 2 K Omega_rs, strict: the boundary is semi-stable and counts as unlocked.
bool is_locked(const AdlerParams& p);

/// Stable fixed point: cos(phi*) = -delta_omega / (2 K Omega_rs), phi* in (0, pi).
/// Throws AnalysisError when unlocked.
double steady_phase(const AdlerParams& p);

/// Mean beat frequency: 0 when locked, else sign(dw/2) sqrt((dw/2)^2 - (K Omega_rs)^2).
/// The observed oscillation sits at delta_s + pulled_frequency.
double pulled_frequency(const AdlerParams& p);

/// Classical RK4 with step dt. Locked iff the terminal |dphi/dt| is below
/// 1e-6 * max(|dw/2|, K Omega_rs). Throws AnalysisError when dt exceeds
/// 1% of the fastest period, 2 pi / (|dw/2| + K Omega_rs).
PhaseTrajectory integrate_phase(const AdlerParams& p, double phi0, double t_end, double dt);

/// Terminal summary of one lane of integrate_phase_batch.
struct PhaseSummary {
    double final_phase = 0.0;
    double final_rate = 0.0;
    bool locked = false;
    double mean_frequency = 0.0;
};

/// Many independent phase equations through the SIMD kernels; lane i runs
/// `steps` RK4 steps of size t_end[i] / steps.
std::vector<PhaseSummary> integrate_phase_batch(std::span<const AdlerParams> params,
                                                std::span<const double> phi0,
                                                std::span<const double> t_end, std::size_t steps);

}  // namespace rydlock::adler
