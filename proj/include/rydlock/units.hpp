#pragma once

#include <numbers>

namespace rydlock::units {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

constexpr double hz_to_rad(double hz) { return two_pi * hz; }
constexpr double rad_to_hz(double rad_per_s) { return rad_per_s / two_pi; }
constexpr double khz_to_rad(double khz) { return two_pi * 1e3 * khz; }

/// 1 mV/cm = 0.1 V/m
constexpr double mv_per_cm_to_v_per_m(double mv_cm) { return 0.1 * mv_cm; }
constexpr double gauss_to_tesla(double gauss) { return 1e-4 * gauss; }

}  // namespace rydlock::units
