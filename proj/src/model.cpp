#include "rydlock/model.hpp"

#include <cctype>
#include <cmath>
#include <string>

#include "rydlock/errors.hpp"

namespace rydlock {

void validate(const ModelParams& p) {
    const double fields[] = {p.omega, p.delta_r, p.delta_s_state, p.gamma,
                             p.chi,   p.omega_rs, p.delta_inj};
    for (double f : fields) {
        if (!std::isfinite(f)) throw ConfigError("model parameters must be finite");
    }
    if (!(p.gamma > 0.0)) throw ConfigError("model.gamma must be > 0");
    if (p.omega_rs < 0.0) throw ConfigError("model.omega_rs must be >= 0");
}

bool MeanFieldState::finite() const {
    return std::isfinite(n_r) && std::isfinite(n_s) && std::isfinite(sigma_gr.real()) &&
           std::isfinite(sigma_gr.imag()) && std::isfinite(sigma_gs.real()) &&
           std::isfinite(sigma_gs.imag()) && std::isfinite(sigma_rs.real()) &&
           std::isfinite(sigma_rs.imag());
}

StateVector to_vector(const MeanFieldState& s) {
    return {s.n_r,
            s.n_s,
            s.sigma_gr.real(),
            s.sigma_gr.imag(),
            s.sigma_gs.real(),
            s.sigma_gs.imag(),
            s.sigma_rs.real(),
            s.sigma_rs.imag()};
}

MeanFieldState from_vector(const StateVector& v) {
    return {v[0], v[1], {v[2], v[3]}, {v[4], v[5]}, {v[6], v[7]}};
}

std::string_view to_string(EquationVariant v) {
    return v == EquationVariant::Methods ? "methods" : "supplementary";
}

EquationVariant parse_variant(std::string_view text) {
    std::string lower(text);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "methods") return EquationVariant::Methods;
    if (lower == "supplementary") return EquationVariant::Supplementary;
    throw ConfigError("unknown equation variant '" + std::string(text) +
                      "' (expected methods|supplementary)");
}

double nonlinear_shift(const MeanFieldState& s, const ModelParams& p) {
    return p.chi * (s.n_r + s.n_s);
}

MeanFieldState derivative(const MeanFieldState& s, const ModelParams& p, DriveSample drive,
                          EquationVariant variant) {
    constexpr complex i{0.0, 1.0};
    const double half_omega = 0.5 * p.omega;
    const double half_rs = 0.5 * drive.omega_rs;
    const double e_nl = nonlinear_shift(s, p);
    const complex carrier{std::cos(drive.phase), std::sin(drive.phase)};
    const double drive_im = (s.sigma_rs * carrier).imag();

    MeanFieldState d;
    if (variant == EquationVariant::Methods) {
        d.n_r = half_omega * s.sigma_gr.imag() - p.gamma * s.n_r + half_rs * drive_im;
        d.n_s = half_omega * s.sigma_gs.imag() - p.gamma * s.n_s - half_rs * drive_im;
    } else {
        d.n_r = -p.omega * s.sigma_gr.imag() - p.gamma * s.n_r - drive.omega_rs * drive_im;
        d.n_s = -p.omega * s.sigma_gs.imag() - p.gamma * s.n_s + drive.omega_rs * drive_im;
    }

    const complex decay_half{0.0, 0.5 * p.gamma};
    d.sigma_gr = i * half_omega * (2.0 * s.n_r + s.n_s + s.sigma_sr() - 1.0) +
                 i * (p.delta_r - e_nl + decay_half) * s.sigma_gr;
    d.sigma_gs = i * half_omega * (2.0 * s.n_s + s.n_r + s.sigma_rs - 1.0) +
                 i * (p.delta_s_state - e_nl + decay_half) * s.sigma_gs;
    d.sigma_rs = i * half_omega * (s.sigma_gs - s.sigma_rg()) -
                 i * (p.delta_r - p.delta_s_state - complex{0.0, p.gamma}) * s.sigma_rs +
                 i * half_rs * (s.n_r - s.n_s) * carrier;
    return d;
}

MeanFieldState derivative(const MeanFieldState& s, const ModelParams& p, double t,
                          EquationVariant variant) {
    if (!s.finite()) throw NumericError("non-finite mean-field state", t);
    return derivative(s, p, DriveSample{p.omega_rs, p.delta_inj * t}, variant);
}

}  // namespace rydlock
