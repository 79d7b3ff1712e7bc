#pragma once

#include <array>
#include <complex>
#include <string_view>

namespace rydlock {

using complex = std::complex<double>;

/// Rates and detunings of the V-type mean-field model. All angular, rad/s.
struct ModelParams {
    double omega = 0.0;          ///< ground <-> excited Rabi frequency
    double delta_r = 0.0;        ///< detuning of |r>
    double delta_s_state = 0.0;  ///< detuning of |s>
    double gamma = 1.0;          ///< upper-state decay rate
    double chi = 0.0;            ///< mean-field interaction strength
    double omega_rs = 0.0;       ///< injection Rabi frequency (|r> <-> |s>)
    double delta_inj = 0.0;      ///< injection detuning relative to the r-s separation
};

/// Throws ConfigError unless gamma > 0, omega_rs >= 0 and every field is finite.
void validate(const ModelParams& p);

/// Populations and the three independent coherences. The conjugate
/// coherences (sigma_rg, sigma_sg, sigma_sr) are never stored.
struct MeanFieldState {
    double n_r = 0.0;
    double n_s = 0.0;
    complex sigma_gr{};
    complex sigma_gs{};
    complex sigma_rs{};

    complex sigma_rg() const { return std::conj(sigma_gr); }
    complex sigma_sg() const { return std::conj(sigma_gs); }
    complex sigma_sr() const { return std::conj(sigma_rs); }

    bool finite() const;

    friend bool operator==(const MeanFieldState&, const MeanFieldState&) = default;
};

inline constexpr std::size_t kStateDim = 8;
using StateVector = std::array<double, kStateDim>;

StateVector to_vector(const MeanFieldState& s);
MeanFieldState from_vector(const StateVector& v);

/// Which published form of the population equations is evaluated.
///
/// METHODS:        dn_r/dt = (Omega/2) Im(sigma_gr) - gamma n_r + (Omega_rs/2) Im(sigma_rs e^{i phi})
/// SUPPLEMENTARY:  dn_r/dt = i(Omega/2)(sigma_gr - sigma_rg) - gamma n_r
///                           + i(Omega_rs/2)(sigma_rs e^{i phi} - c.c.)
///                         = -Omega Im(sigma_gr) - gamma n_r - Omega_rs Im(sigma_rs e^{i phi})
/// The coherence equations are shared. n_s mirrors n_r with the drive sign flipped.
enum class EquationVariant { Methods, Supplementary };

std::string_view to_string(EquationVariant v);
/// Accepts "methods"/"supplementary" (case-insensitive); throws ConfigError otherwise.
EquationVariant parse_variant(std::string_view text);

/// E_NL = chi (n_r + n_s)
double nonlinear_shift(const MeanFieldState& s, const ModelParams& p);

/// Instantaneous injection drive: Rabi frequency and accumulated phase (integral of delta_inj dt).
struct DriveSample {
    double omega_rs = 0.0;
    double phase = 0.0;
};

/// Right-hand side with the drive supplied explicitly. Used by the integrator,
/// which tracks the drive phase itself so that chirped drives stay exact.
MeanFieldState derivative(const MeanFieldState& s, const ModelParams& p, DriveSample drive,
                          EquationVariant variant);

/// Right-hand side for a constant drive: Omega_rs = p.omega_rs and phase = p.delta_inj * t.
/// Throws NumericError if the state is not finite.
MeanFieldState derivative(const MeanFieldState& s, const ModelParams& p, double t,
                          EquationVariant variant);

}  // namespace rydlock
