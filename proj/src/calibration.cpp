#include "rydlock/calibration.hpp"

#include <cmath>

#include "rydlock/errors.hpp"

namespace rydlock::calibration {

MixingInputs reference_mixing() {
    MixingInputs m;
    m.b_field = 4e-4;
    m.g_j = 1.2;
    m.m_j = 2.5;
    m.delta_e = PhysicalConstants::h * 1.54e9;
    m.d_ref = kReferenceInducedDipole * m.delta_e / zeeman_energy(m);
    m.alpha = 0.11;
    return m;
}

void validate(const MixingInputs& m) {
    if (!std::isfinite(m.b_field) || m.b_field < 0.0)
        throw ConfigError("calibration.b_gauss must be finite and >= 0");
    if (!(m.delta_e != 0.0) || !std::isfinite(m.delta_e))
        throw ConfigError("calibration.delta_e must be finite and nonzero");
    if (!(m.alpha > 0.0 && m.alpha <= 1.0)) throw ConfigError("calibration.alpha must lie in (0, 1]");
    if (!std::isfinite(m.g_j) || !std::isfinite(m.m_j) || !std::isfinite(m.d_ref))
        throw ConfigError("calibration inputs must be finite");
}

double zeeman_energy(const MixingInputs& m) {
    return PhysicalConstants::mu_b * m.g_j * m.m_j * m.b_field;
}

double induced_dipole(const MixingInputs& m) {
    if (m.delta_e == 0.0) throw AnalysisError("induced_dipole: degenerate mixing (delta_e = 0)");
    return zeeman_energy(m) / m.delta_e * m.d_ref;
}

double rabi_from_field(double e_field, double d_ind, double alpha) {
    return alpha * d_ind * e_field / PhysicalConstants::hbar;
}

double kappa(double k_forcing, double alpha, double d_ind) {
    return k_forcing * alpha * d_ind / PhysicalConstants::hbar;
}

double field_from_rabi(double omega_rs, double d_ind, double alpha) {
    return omega_rs * PhysicalConstants::hbar / (alpha * d_ind);
}

}  // namespace rydlock::calibration
