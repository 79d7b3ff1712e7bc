#pragma once

#include "rydlock/kernels/kernels.hpp"

namespace rydlock::kernels {

namespace scalar {
double sum(std::span<const double> x);
double sum_squares(std::span<const double> x);
void center_and_window(std::span<const double> x, double offset, std::span<const double> w,
                       std::span<double> out);
void power(std::span<const double> interleaved, std::span<double> out);
void adler_rk4(const AdlerBatch& b, std::size_t steps);
}  // namespace scalar

#if defined(RYDLOCK_HAVE_AVX2)
namespace avx2 {
double sum(std::span<const double> x);
double sum_squares(std::span<const double> x);
void center_and_window(std::span<const double> x, double offset, std::span<const double> w,
                       std::span<double> out);
void power(std::span<const double> interleaved, std::span<double> out);
void adler_rk4(const AdlerBatch& b, std::size_t steps);
}  // namespace avx2
#endif

}  // namespace rydlock::kernels
