#pragma once

namespace rydlock::calibration {

/// CODATA 2018 exact/recommended values.
struct PhysicalConstants {
    static constexpr double mu_b = 9.2740100783e-24;  ///< Bohr magneton, J/T
    static constexpr double hbar = 1.054571817e-34;   ///< J s
    static constexpr double h = 6.62607015e-34;       ///< J s (exact)
};

/// Inputs of the perturbative Zeeman-mixing estimate of the |r>-|s> dipole.
struct MixingInputs {
    double b_field = 4e-4;   ///< T
    double g_j = 1.2;        ///< Lande factor of the D5/2 level
    double m_j = 2.5;
    double delta_e = 0.0;    ///< J, gap between |r> and the dipole-allowed |r'>
    double d_ref = 0.0;      ///< C m, dipole of the nearby allowed transition
    double alpha = 0.11;     ///< empirical coupling correction, in (0, 1]
};

/// Reference inputs for the 76D5/2 <-> 77P3/2 pair at B = 4 G: the gap is the
/// quantum-defect estimate h * 1.54 GHz and d_ref is back-solved so that
/// induced_dipole() returns 4.96e-28 C m.
MixingInputs reference_mixing();
inline constexpr double kReferenceInducedDipole = 4.96e-28;  ///< C m

/// Throws ConfigError on delta_e == 0, b_field < 0 or alpha outside (0, 1].
void validate(const MixingInputs& m);

/// H_B = mu_B g_J m_J B, J.
double zeeman_energy(const MixingInputs& m);

/// d_ind = (H_B / delta_E) d_ref, no alpha. Throws AnalysisError when delta_e == 0.
double induced_dipole(const MixingInputs& m);

/// Omega_rs = alpha d_ind E / hbar, rad/s. E in V/m.
double rabi_from_field(double e_field, double d_ind, double alpha);

/// kappa = K alpha d_ind / hbar, (rad/s)/(V/m). Predicted bandwidth is kappa * E.
double kappa(double k_forcing, double alpha, double d_ind);

/// Inverse of rabi_from_field: field (V/m) giving the requested Omega_rs.
double field_from_rabi(double omega_rs, double d_ind, double alpha);

}  // namespace rydlock::calibration
