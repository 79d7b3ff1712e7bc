#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "rydlock/drive.hpp"
#include "rydlock/errors.hpp"
#include "rydlock/integrator.hpp"
#include "rydlock/spectral.hpp"
#include "rydlock/units.hpp"

using namespace rydlock;

namespace {

std::vector<double> tone(double f, double fs, std::size_t n, double amp = 1.0, double phase = 0.0) {
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k)
        x[k] = amp * std::sin(units::two_pi * f * static_cast<double>(k) / fs + phase);
    return x;
}

}  // namespace

TEST_CASE("constant series has no content off DC") {
    const std::vector<double> x(1024, 3.5);
    const Spectrum sp = periodogram(x, 1e6);
    for (std::size_t k = 1; k < sp.size(); ++k) CHECK(sp.amplitude[k] <= 1e-12);
}

TEST_CASE("sinusoid normalization") {
    const double fs = 1e6;
    const Spectrum sp = periodogram(tone(23450.0, fs, 1u << 18), fs);
    CHECK(sp.bin_width() == doctest::Approx(fs / (1u << 18)));
    const PeakReport pk = track_peak(sp, 20e3, 27e3);
    CHECK(std::abs(pk.frequency - 23450.0) <= sp.bin_width());
    CHECK(pk.amplitude == doctest::Approx(1.0).epsilon(0.01));

    // At a bin centre the raw bin carries the full amplitude for both windows.
    const double fc = 6000 * sp.bin_width();
    for (Window w : {Window::Hann, Window::Rectangular}) {
        PeriodogramOptions opt;
        opt.window = w;
        const Spectrum s = periodogram(tone(fc, fs, 1u << 18), fs, opt);
        CHECK(s.amplitude[6000] == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("spectrum invariants") {
    const Spectrum sp = periodogram(tone(11.2e3, 1e6, 5000), 1e6);
    for (std::size_t k = 1; k < sp.size(); ++k) CHECK(sp.freqs[k] > sp.freqs[k - 1]);
    CHECK(sp.freqs.front() >= 0.0);
    for (double a : sp.asd) CHECK(std::isfinite(a));
}

TEST_CASE("Parseval") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 1.0);
    for (Window w : {Window::Hann, Window::Rectangular}) {
        for (std::size_t len : {1000u, 1024u, 4097u}) {
            std::vector<double> x(len);
            for (auto& v : x) v = n(rng);
            PeriodogramOptions opt;
            opt.window = w;
            const Spectrum sp = periodogram(x, 2e5, opt);
            // Left side from the definition, independent of the library kernels.
            const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(len);
            double lhs = 0.0, w2 = 0.0;
            for (std::size_t k = 0; k < len; ++k) {
                const double wk = w == Window::Hann
                                      ? 0.5 - 0.5 * std::cos(units::two_pi * static_cast<double>(k) /
                                                             static_cast<double>(len))
                                      : 1.0;
                lhs += (wk * (x[k] - mean)) * (wk * (x[k] - mean));
                w2 += wk * wk;
            }
            double rhs = 0.0;
            for (double a : sp.asd) rhs += a * a;
            rhs *= w2 * sp.bin_width();
            CHECK(rhs == doctest::Approx(lhs).epsilon(1e-9));
        }
    }
}

TEST_CASE("magnitude is linear and shift invariant") {
    const double fs = 1e6;
    const auto x = tone(23450.0, fs, 20000);
    const Spectrum a = periodogram(x, fs);
    std::vector<double> y(x);
    for (auto& v : y) v *= -2.5;
    const Spectrum b = periodogram(y, fs);
    for (std::size_t k = 0; k < a.size(); ++k)
        CHECK(b.amplitude[k] == doctest::Approx(2.5 * a.amplitude[k]).epsilon(1e-9));

    const Spectrum c = periodogram(tone(23450.0, fs, 20000, 1.0, 1.1), fs);
    const auto ka = std::max_element(a.amplitude.begin(), a.amplitude.end()) - a.amplitude.begin();
    CHECK(c.amplitude[ka] == doctest::Approx(a.amplitude[ka]).epsilon(0.01));
}

TEST_CASE("periodogram preconditions") {
    CHECK_THROWS_AS(periodogram(std::vector<double>(100, 0.0), 1e6), AnalysisError);
    auto x = tone(1e3, 1e6, 1000);
    x[10] = std::nan("");
    CHECK_THROWS(periodogram(x, 1e6));
    PeriodogramOptions opt;
    opt.transient_skip = 0.9e-3;
    CHECK_THROWS_AS(periodogram(tone(1e3, 1e6, 1000), 1e6, opt), AnalysisError);
}

TEST_CASE("peak interpolation") {
    const double fs = 1e6;
    const std::size_t n = 10000;
    const double bin = fs / static_cast<double>(n);
    const Spectrum on = periodogram(tone(1170 * bin, fs, n), fs);
    CHECK(track_peak(on, 100e3, 130e3).frequency == doctest::Approx(1170 * bin).epsilon(1e-12));

    for (double frac : {0.13, 0.37, 0.5, 0.81}) {
        const double f = (1170 + frac) * bin;
        const Spectrum sp = periodogram(tone(f, fs, n), fs);
        CHECK(std::abs(track_peak(sp, 100e3, 130e3).frequency - f) <= 0.01 * bin);
    }
}

TEST_CASE("band masking and edge flag") {
    const double fs = 1e6;
    const std::size_t n = 1u << 16;
    auto x = tone(10.25e3, fs, n, 2.0);
    const auto y = tone(11.2e3, fs, n);
    for (std::size_t k = 0; k < n; ++k) x[k] += y[k];
    const Spectrum sp = periodogram(x, fs);
    CHECK(track_peak(sp, 10.8e3, 11.6e3).frequency == doctest::Approx(11.2e3).epsilon(1e-3));
    CHECK(track_peak(sp, 10.4e3, 11.0e3).on_edge);
    CHECK_THROWS_AS(track_peak(sp, 11.0e3, 11.0e3 + 3 * sp.bin_width()), AnalysisError);
    const PeakReport pk = track_peak(sp, 10.8e3, 11.6e3);
    CHECK(pk.bandwidth_3db >= 0.0);
    CHECK(pk.frequency >= 10.8e3);
    CHECK(pk.frequency <= 11.6e3);
}

TEST_CASE("harmonics of a square wave") {
    const double fs = 1e6, f = 5e3;
    const std::size_t n = 1u << 16;
    auto x = tone(f, fs, n);
    for (auto& v : x) v = v >= 0.0 ? 1.0 : -1.0;
    const Spectrum sp = periodogram(x, fs);
    const auto h = harmonic_peaks(sp, f, 5);
    REQUIRE(h.size() == 5);
    const double floor = detection_floor(sp);
    CHECK(std::abs(h[2].frequency - 3 * f) <= sp.bin_width());
    CHECK(std::abs(h[4].frequency - 5 * f) <= sp.bin_width());
    // Fourier series: odd harmonic k carries 4/(pi k).
    CHECK(h[2].amplitude == doctest::Approx(4.0 / (M_PI * 3)).epsilon(0.02));
    CHECK(h[1].amplitude < 0.05 * h[2].amplitude);
    CHECK(h[2].amplitude > floor);

    CHECK_THROWS_AS(harmonic_peaks(sp, 200e3, 3), AnalysisError);
}

TEST_CASE("pure sinusoid has no harmonics above the floor") {
    const double fs = 1e6;
    const Spectrum sp = periodogram(tone(20e3, fs, 1u << 15), fs);
    const auto h = harmonic_peaks(sp, 20e3, 3);
    const double floor = detection_floor(sp);
    CHECK(h[0].amplitude > floor);
    CHECK(h[1].amplitude <= floor);
    CHECK(h[2].amplitude <= floor);
}

TEST_CASE("spectrogram of a stationary tone") {
    const double fs = 1e6;
    const auto x = tone(23.45e3, fs, 20000);
    const Spectrogram sg = spectrogram(x, fs, 2e-3, 0.5e-3);
    REQUIRE(!sg.times.empty());
    CHECK(sg.magnitude.size() == sg.times.size());
    double rms_ref = 0.0;
    for (double v : sg.magnitude[0]) rms_ref += v * v;
    for (const auto& col : sg.magnitude) {
        CHECK(col.size() == sg.freqs.size());
        for (double v : col) CHECK(v >= 0.0);
        const auto k = std::max_element(col.begin(), col.end()) - col.begin();
        CHECK(std::abs(sg.freqs[k] - 23.45e3) <= 1.0 / sg.window_length);
        double diff = 0.0;
        for (std::size_t j = 0; j < col.size(); ++j)
            diff += (col[j] - sg.magnitude[0][j]) * (col[j] - sg.magnitude[0][j]);
        CHECK(std::sqrt(diff / rms_ref) <= 0.02);
    }
}

TEST_CASE("spectrogram follows a frequency step") {
    const double fs = 1e6, f1 = 20e3, f2 = 30e3, t_step = 10e-3, win = 1e-3;
    std::vector<double> x(20000);
    double phase = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double t = static_cast<double>(k) / fs;
        x[k] = std::sin(phase);
        phase += units::two_pi * (t < t_step ? f1 : f2) / fs;
    }
    const Spectrogram sg = spectrogram(x, fs, win, 0.25e-3);
    for (std::size_t c = 0; c < sg.times.size(); ++c) {
        const auto& col = sg.magnitude[c];
        const double peak = sg.freqs[std::max_element(col.begin(), col.end()) - col.begin()];
        if (sg.times[c] < t_step - win) CHECK(std::abs(peak - f1) <= 1.0 / win);
        if (sg.times[c] > t_step + win) CHECK(std::abs(peak - f2) <= 1.0 / win);
    }
}

TEST_CASE("spectrogram preconditions") {
    const auto x = tone(20e3, 1e6, 5000);
    CHECK_THROWS(spectrogram(x, 1e6, 1e-3, 2e-3));
    CHECK_THROWS(spectrogram(x, 1e6, 0.1e-3, 0.05e-3));
    // Fewer than 8 periods of the expected line in one window.
    CHECK_THROWS(spectrogram(x, 1e6, 0.3e-3, 0.1e-3, 0.0, 20e3));
}

TEST_CASE("simulated limit cycle carries harmonics") {
    const double g = units::khz_to_rad(25.4);
    ModelParams p;
    p.gamma = g;
    p.omega = 0.5 * g;
    p.delta_r = 4 * g;
    p.delta_s_state = g;
    p.chi = 32 * g;
    IntegrationSpec spec;
    spec.t_end = 16e-3;
    const Trajectory tr = integrate(p, {}, spec, DriveSchedule::constant(0.0, 0.0),
                                    EquationVariant::Supplementary);
    PeriodogramOptions opt;
    opt.transient_skip = 8e-3;
    const Spectrum sp = periodogram(tr.observable, spec.sample_rate, opt);
    const PeakReport f = track_peak(sp, 10e3, 100e3);
    const auto h = harmonic_peaks(sp, f.frequency, 3);
    const double floor = detection_floor(sp);
    int detected = 0;
    for (const auto& pk : h) detected += pk.amplitude > floor;
    CHECK(detected >= 2);
}
