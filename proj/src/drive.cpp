#include "rydlock/drive.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rydlock/errors.hpp"

namespace rydlock {

DriveSchedule::DriveSchedule(double initial_rabi, std::vector<RabiLevel> levels,
                             std::vector<DetuningKnot> knots)
    : initial_rabi_(initial_rabi), levels_(std::move(levels)), knots_(std::move(knots)) {
    if (knots_.empty()) throw ConfigError("drive schedule needs at least one detuning knot");
    if (!(initial_rabi_ >= 0.0) || !std::isfinite(initial_rabi_))
        throw ConfigError("drive Omega_rs must be finite and >= 0");
    for (std::size_t k = 0; k < levels_.size(); ++k) {
        if (!(levels_[k].omega_rs >= 0.0) || !std::isfinite(levels_[k].omega_rs) ||
            !std::isfinite(levels_[k].t))
            throw ConfigError("drive Omega_rs levels must be finite and >= 0");
        if (k > 0 && !(levels_[k].t > levels_[k - 1].t))
            throw ConfigError("drive Omega_rs level times must be strictly increasing");
    }
    for (std::size_t k = 0; k < knots_.size(); ++k) {
        if (!std::isfinite(knots_[k].t) || !std::isfinite(knots_[k].delta))
            throw ConfigError("drive detuning knots must be finite");
        if (k > 0 && !(knots_[k].t > knots_[k - 1].t))
            throw ConfigError("drive detuning knot times must be strictly increasing");
    }

    // Before the first knot the detuning is constant, so the phase there is delta0 * t.
    knot_phase_.resize(knots_.size());
    knot_phase_[0] = knots_[0].delta * knots_[0].t;
    for (std::size_t k = 1; k < knots_.size(); ++k) {
        const double dt = knots_[k].t - knots_[k - 1].t;
        knot_phase_[k] = knot_phase_[k - 1] + 0.5 * (knots_[k].delta + knots_[k - 1].delta) * dt;
    }
}

DriveSchedule DriveSchedule::constant(double omega_rs, double delta) {
    return DriveSchedule(omega_rs, {}, {{0.0, delta}});
}

DriveSchedule DriveSchedule::step_on(double t_on, double omega_rs, double delta) {
    return DriveSchedule(0.0, {{t_on, omega_rs}}, {{0.0, delta}});
}

DriveSchedule DriveSchedule::ramp(double omega_rs, double t0, double delta0, double t1,
                                  double delta1) {
    return DriveSchedule(omega_rs, {}, {{t0, delta0}, {t1, delta1}});
}

double DriveSchedule::omega_rs_at(double t) const {
    double value = initial_rabi_;
    for (const auto& level : levels_) {
        if (t >= level.t) value = level.omega_rs;
        else break;
    }
    return value;
}

double DriveSchedule::delta_at(double t) const {
    if (t <= knots_.front().t) return knots_.front().delta;
    if (t >= knots_.back().t) return knots_.back().delta;
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                                     [](double v, const DetuningKnot& k) { return v < k.t; });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double w = (t - lo.t) / (hi.t - lo.t);
    return lo.delta + w * (hi.delta - lo.delta);
}

double DriveSchedule::phase_at(double t) const {
    if (t <= knots_.front().t) return knots_.front().delta * t;
    if (t >= knots_.back().t) return knot_phase_.back() + knots_.back().delta * (t - knots_.back().t);
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                                     [](double v, const DetuningKnot& k) { return v < k.t; });
    const std::size_t k = static_cast<std::size_t>(it - knots_.begin()) - 1;
    const double tau = t - knots_[k].t;
    const double slope = (knots_[k + 1].delta - knots_[k].delta) / (knots_[k + 1].t - knots_[k].t);
    return knot_phase_[k] + knots_[k].delta * tau + 0.5 * slope * tau * tau;
}

std::vector<double> DriveSchedule::breakpoints() const {
    std::vector<double> out;
    for (const auto& l : levels_) out.push_back(l.t);
    for (const auto& k : knots_) out.push_back(k.t);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::string DriveSchedule::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "omega_rs0=" << initial_rabi_;
    for (const auto& l : levels_) os << ";step@" << l.t << "->" << l.omega_rs;
    for (const auto& k : knots_) os << ";delta@" << k.t << "=" << k.delta;
    return os.str();
}

}  // namespace rydlock
