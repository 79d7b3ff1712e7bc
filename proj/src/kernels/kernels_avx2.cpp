// Compiled with -mavx2 -mfma. Only reached through avx2_kernels() after a
// runtime CPU check.

#include <immintrin.h>

#include <array>
#include <cmath>

#include "kernels_impl.hpp"

namespace rydlock::kernels::avx2 {
namespace {

double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// cos(x) for |x| < ~1e9: Cody-Waite reduction by pi/4 and the Cephes
// minimax polynomials on [-pi/4, pi/4].
__m256d cos_pd(__m256d x) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    const __m256d ax = _mm256_andnot_pd(sign_mask, x);

    __m256d y = _mm256_floor_pd(_mm256_mul_pd(ax, _mm256_set1_pd(1.27323954473516268615)));
    // Round the octant up to even.
    const __m256d half_y = _mm256_mul_pd(y, _mm256_set1_pd(0.5));
    const __m256d odd = _mm256_cmp_pd(_mm256_floor_pd(half_y), half_y, _CMP_NEQ_OQ);
    y = _mm256_add_pd(y, _mm256_and_pd(odd, _mm256_set1_pd(1.0)));

    __m256d z = _mm256_fnmadd_pd(y, _mm256_set1_pd(7.85398125648498535156e-1), ax);
    z = _mm256_fnmadd_pd(y, _mm256_set1_pd(3.77489470793079817668e-8), z);
    z = _mm256_fnmadd_pd(y, _mm256_set1_pd(2.69515142907905952645e-15), z);
    const __m256d zz = _mm256_mul_pd(z, z);

    // octant mod 8, one of {0, 2, 4, 6}
    const __m256d eighth = _mm256_floor_pd(_mm256_mul_pd(y, _mm256_set1_pd(0.125)));
    const __m256d oct = _mm256_fnmadd_pd(eighth, _mm256_set1_pd(8.0), y);

    __m256d ps = _mm256_set1_pd(1.58962301576546568060e-10);
    ps = _mm256_fmadd_pd(ps, zz, _mm256_set1_pd(-2.50507477628578072866e-8));
    ps = _mm256_fmadd_pd(ps, zz, _mm256_set1_pd(2.75573136213857245213e-6));
    ps = _mm256_fmadd_pd(ps, zz, _mm256_set1_pd(-1.98412698295895385996e-4));
    ps = _mm256_fmadd_pd(ps, zz, _mm256_set1_pd(8.33333333332211858878e-3));
    ps = _mm256_fmadd_pd(ps, zz, _mm256_set1_pd(-1.66666666666666307295e-1));
    const __m256d sin_z = _mm256_fmadd_pd(_mm256_mul_pd(z, zz), ps, z);

    __m256d pc = _mm256_set1_pd(-1.13585365213876817300e-11);
    pc = _mm256_fmadd_pd(pc, zz, _mm256_set1_pd(2.08757008419747316778e-9));
    pc = _mm256_fmadd_pd(pc, zz, _mm256_set1_pd(-2.75573141792967388112e-7));
    pc = _mm256_fmadd_pd(pc, zz, _mm256_set1_pd(2.48015872888517045348e-5));
    pc = _mm256_fmadd_pd(pc, zz, _mm256_set1_pd(-1.38888888888730564116e-3));
    pc = _mm256_fmadd_pd(pc, zz, _mm256_set1_pd(4.16666666666665929218e-2));
    const __m256d cos_z = _mm256_fmadd_pd(_mm256_mul_pd(zz, zz), pc,
                                          _mm256_fnmadd_pd(_mm256_set1_pd(0.5), zz, _mm256_set1_pd(1.0)));

    const __m256d two = _mm256_set1_pd(2.0), four = _mm256_set1_pd(4.0), six = _mm256_set1_pd(6.0);
    const __m256d use_sin = _mm256_or_pd(_mm256_cmp_pd(oct, two, _CMP_EQ_OQ),
                                         _mm256_cmp_pd(oct, six, _CMP_EQ_OQ));
    const __m256d negate = _mm256_or_pd(_mm256_cmp_pd(oct, two, _CMP_EQ_OQ),
                                        _mm256_cmp_pd(oct, four, _CMP_EQ_OQ));
    const __m256d r = _mm256_blendv_pd(cos_z, sin_z, use_sin);
    return _mm256_xor_pd(r, _mm256_and_pd(negate, sign_mask));
}

void adler_rk4_block(const double* a_in, const double* c_in, const double* h_in, double* phi_io,
                     std::size_t steps) {
    const __m256d a = _mm256_loadu_pd(a_in);
    const __m256d c = _mm256_loadu_pd(c_in);
    const __m256d h = _mm256_loadu_pd(h_in);
    const __m256d half_h = _mm256_mul_pd(h, _mm256_set1_pd(0.5));
    const __m256d sixth_h = _mm256_div_pd(h, _mm256_set1_pd(6.0));
    const __m256d two = _mm256_set1_pd(2.0);
    __m256d phi = _mm256_loadu_pd(phi_io);
    for (std::size_t s = 0; s < steps; ++s) {
        const __m256d k1 = _mm256_fmadd_pd(c, cos_pd(phi), a);
        const __m256d k2 = _mm256_fmadd_pd(c, cos_pd(_mm256_fmadd_pd(half_h, k1, phi)), a);
        const __m256d k3 = _mm256_fmadd_pd(c, cos_pd(_mm256_fmadd_pd(half_h, k2, phi)), a);
        const __m256d k4 = _mm256_fmadd_pd(c, cos_pd(_mm256_fmadd_pd(h, k3, phi)), a);
        const __m256d acc = _mm256_add_pd(_mm256_add_pd(k1, k4), _mm256_mul_pd(two, _mm256_add_pd(k2, k3)));
        phi = _mm256_fmadd_pd(sixth_h, acc, phi);
    }
    _mm256_storeu_pd(phi_io, phi);
}

}  // namespace

double sum(std::span<const double> x) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= x.size(); i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x.data() + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x.data() + i + 4));
    }
    double total = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < x.size(); ++i) total += x[i];
    return total;
}

double sum_squares(std::span<const double> x) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= x.size(); i += 8) {
        const __m256d v0 = _mm256_loadu_pd(x.data() + i);
        const __m256d v1 = _mm256_loadu_pd(x.data() + i + 4);
        acc0 = _mm256_fmadd_pd(v0, v0, acc0);
        acc1 = _mm256_fmadd_pd(v1, v1, acc1);
    }
    double total = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < x.size(); ++i) total += x[i] * x[i];
    return total;
}

void center_and_window(std::span<const double> x, double offset, std::span<const double> w,
                       std::span<double> out) {
    const __m256d off = _mm256_set1_pd(offset);
    std::size_t i = 0;
    for (; i + 4 <= x.size(); i += 4) {
        const __m256d v = _mm256_sub_pd(_mm256_loadu_pd(x.data() + i), off);
        _mm256_storeu_pd(out.data() + i, _mm256_mul_pd(v, _mm256_loadu_pd(w.data() + i)));
    }
    for (; i < x.size(); ++i) out[i] = (x[i] - offset) * w[i];
}

void power(std::span<const double> interleaved, std::span<double> out) {
    std::size_t k = 0;
    for (; k + 4 <= out.size(); k += 4) {
        const __m256d p0 = _mm256_loadu_pd(interleaved.data() + 2 * k);      // re0 im0 re1 im1
        const __m256d p1 = _mm256_loadu_pd(interleaved.data() + 2 * k + 4);  // re2 im2 re3 im3
        const __m256d s0 = _mm256_mul_pd(p0, p0);
        const __m256d s1 = _mm256_mul_pd(p1, p1);
        // hadd gives (s0[0]+s0[1], s1[0]+s1[1], s0[2]+s0[3], s1[2]+s1[3])
        const __m256d h = _mm256_hadd_pd(s0, s1);
        _mm256_storeu_pd(out.data() + k, _mm256_permute4x64_pd(h, 0b11011000));
    }
    for (; k < out.size(); ++k) {
        const double re = interleaved[2 * k];
        const double im = interleaved[2 * k + 1];
        out[k] = re * re + im * im;
    }
}

void adler_rk4(const AdlerBatch& b, std::size_t steps) {
    const std::size_t n = b.phi.size();
    std::size_t lane = 0;
    for (; lane + 4 <= n; lane += 4)
        adler_rk4_block(b.half_detuning.data() + lane, b.coupling.data() + lane,
                        b.dt.data() + lane, b.phi.data() + lane, steps);
    if (lane < n) {
        // Pad the tail to a full block with inert lanes.
        std::array<double, 4> a{}, c{}, h{}, phi{};
        for (std::size_t j = 0; lane + j < n; ++j) {
            a[j] = b.half_detuning[lane + j];
            c[j] = b.coupling[lane + j];
            h[j] = b.dt[lane + j];
            phi[j] = b.phi[lane + j];
        }
        adler_rk4_block(a.data(), c.data(), h.data(), phi.data(), steps);
        for (std::size_t j = 0; lane + j < n; ++j) b.phi[lane + j] = phi[j];
    }
}

}  // namespace rydlock::kernels::avx2
