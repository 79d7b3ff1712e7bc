#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel inner loops. Every kernel has a scalar reference
// implementation; an AVX2+FMA variant is selected at runtime when the CPU
// supports it. RYDLOCK_KERNELS=scalar|avx2 forces a choice.

namespace rydlock::kernels {

/// Lane-wise parameters of a batch of Adler phase equations
/// dphi/dt = half_detuning + coupling * cos(phi).
struct AdlerBatch {
    std::span<const double> half_detuning;  ///< rad/s
    std::span<const double> coupling;       ///< K * Omega_rs, rad/s
    std::span<const double> dt;             ///< per-lane step, s
    std::span<double> phi;                  ///< in: initial phase, out: final phase
};

struct KernelSet {
    std::string_view name;

    double (*sum)(std::span<const double> x);
    double (*sum_squares)(std::span<const double> x);
    /// out[i] = (x[i] - offset) * w[i]
    void (*center_and_window)(std::span<const double> x, double offset,
                              std::span<const double> w, std::span<double> out);
    /// out[k] = re^2 + im^2 for interleaved complex input of out.size() bins.
    void (*power)(std::span<const double> interleaved, std::span<double> out);
    /// `steps` classical RK4 steps on every lane of the batch.
    void (*adler_rk4)(const AdlerBatch& batch, std::size_t steps);
};

const KernelSet& scalar_kernels();
/// nullptr when the AVX2 variant is not compiled in or the CPU lacks AVX2/FMA.
const KernelSet* avx2_kernels();
/// Selected once per process.
const KernelSet& active_kernels();

}  // namespace rydlock::kernels
