#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rydlock/drive.hpp"
#include "rydlock/model.hpp"

namespace rydlock {

struct IntegrationSpec {
    double t_start = 0.0;
    double t_end = 1e-3;
    double sample_rate = 1e6;  ///< output grid, samples/s
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double max_step = 1e-5;    ///< lower this if a parameter set turns stiff
    /// When > 0, take Dormand-Prince steps of exactly this size with no error
    /// control. Used for step-halving convergence studies.
    double fixed_step = 0.0;
    /// When > 0, validate() requires >= 16 output samples per period of this frequency (Hz).
    double expected_frequency = 0.0;

    std::size_t sample_count() const;
    double sample_time(std::size_t k) const { return t_start + static_cast<double>(k) / sample_rate; }
};

/// Throws ConfigError on an empty interval, non-positive rates/tolerances or an
/// output grid that under-samples expected_frequency.
void validate(const IntegrationSpec& spec);

struct TrajectoryMetadata {
    ModelParams params;
    IntegrationSpec spec;
    EquationVariant variant = EquationVariant::Methods;
    std::string drive;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<MeanFieldState> states;
    std::vector<double> observable;  ///< Im(sigma_gr)
    TrajectoryMetadata metadata;

    std::size_t size() const { return times.size(); }
};

/// Adaptive Dormand-Prince 5(4) integration of the mean-field equations with
/// 4th-order dense output onto the uniform grid of `spec`. Never steps across a
/// drive breakpoint. `params.omega_rs` and `params.delta_inj` are ignored in
/// favour of the schedule. Throws NumericError (carrying the time) on a
/// non-finite state or step-size underflow.
Trajectory integrate(const ModelParams& params, const MeanFieldState& init,
                     const IntegrationSpec& spec, const DriveSchedule& drive,
                     EquationVariant variant);

}  // namespace rydlock
