#include <cmath>

#include "kernels_impl.hpp"

namespace rydlock::kernels::scalar {

double sum(std::span<const double> x) {
    double acc = 0.0;
    for (double v : x) acc += v;
    return acc;
}

double sum_squares(std::span<const double> x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return acc;
}

void center_and_window(std::span<const double> x, double offset, std::span<const double> w,
                       std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - offset) * w[i];
}

void power(std::span<const double> interleaved, std::span<double> out) {
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double re = interleaved[2 * k];
        const double im = interleaved[2 * k + 1];
        out[k] = re * re + im * im;
    }
}

void adler_rk4(const AdlerBatch& b, std::size_t steps) {
    for (std::size_t lane = 0; lane < b.phi.size(); ++lane) {
        const double a = b.half_detuning[lane];
        const double c = b.coupling[lane];
        const double h = b.dt[lane];
        double phi = b.phi[lane];
        for (std::size_t s = 0; s < steps; ++s) {
            const double k1 = a + c * std::cos(phi);
            const double k2 = a + c * std::cos(phi + 0.5 * h * k1);
            const double k3 = a + c * std::cos(phi + 0.5 * h * k2);
            const double k4 = a + c * std::cos(phi + h * k3);
            phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        b.phi[lane] = phi;
    }
}

}  // namespace rydlock::kernels::scalar
