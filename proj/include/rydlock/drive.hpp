#pragma once

#include <string>
#include <vector>

#include "rydlock/model.hpp"

namespace rydlock {

/// Time profile of the RF injection: a piecewise-constant Rabi frequency and a
/// piecewise-linear detuning. The drive phase is the exact integral of the
/// detuning, so chirped sweeps keep a continuous carrier.
class DriveSchedule {
public:
    struct RabiLevel {
        double t;         ///< level applies from this time on (s)
        double omega_rs;  ///< rad/s
    };
    struct DetuningKnot {
        double t;      ///< s
        double delta;  ///< rad/s
    };

    /// Omega_rs before the first level is `initial_rabi`. Detuning is held constant
    /// outside the knot range. Throws ConfigError on unsorted times, negative Rabi
    /// frequencies or an empty knot list.
    DriveSchedule(double initial_rabi, std::vector<RabiLevel> levels,
                  std::vector<DetuningKnot> knots);

    static DriveSchedule constant(double omega_rs, double delta);
    static DriveSchedule step_on(double t_on, double omega_rs, double delta);
    /// Linear detuning ramp from delta0 at t0 to delta1 at t1, constant Rabi frequency.
    static DriveSchedule ramp(double omega_rs, double t0, double delta0, double t1, double delta1);

    double omega_rs_at(double t) const;
    double delta_at(double t) const;
    /// Accumulated carrier phase, integral of delta from 0 to t.
    double phase_at(double t) const;
    DriveSample sample(double t) const { return {omega_rs_at(t), phase_at(t)}; }

    /// Times where the drive is not smooth; the integrator never steps across them.
    std::vector<double> breakpoints() const;

    /// One-line human-readable form for metadata headers.
    std::string describe() const;

    const std::vector<RabiLevel>& levels() const { return levels_; }
    const std::vector<DetuningKnot>& knots() const { return knots_; }
    double initial_rabi() const { return initial_rabi_; }

private:
    double initial_rabi_;
    std::vector<RabiLevel> levels_;
    std::vector<DetuningKnot> knots_;
    std::vector<double> knot_phase_;  // phase_at(knots_[k].t)
};

}  // namespace rydlock
