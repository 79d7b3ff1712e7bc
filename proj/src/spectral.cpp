#include "rydlock/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include "rydlock/errors.hpp"
#include "rydlock/kernels/kernels.hpp"

namespace rydlock {
namespace {

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwBuffers {
    explicit FftwBuffers(std::size_t n)
        : n(n),
          in(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
          out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
    }
    ~FftwBuffers() {
        {
            std::lock_guard lock(fftw_planner_mutex());
            fftw_destroy_plan(plan);
        }
        fftw_free(in);
        fftw_free(out);
    }
    FftwBuffers(const FftwBuffers&) = delete;
    FftwBuffers& operator=(const FftwBuffers&) = delete;

    std::size_t n;
    double* in;
    fftw_complex* out;
    fftw_plan plan;
};

std::vector<double> make_window(Window w, std::size_t n) {
    std::vector<double> out(n, 1.0);
    if (w == Window::Hann) {
        // Periodic Hann: a tone on a bin centre leaks into exactly two neighbours.
        for (std::size_t i = 0; i < n; ++i)
            out[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                          static_cast<double>(n));
    }
    return out;
}

void remove_line(std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    const double t_mean = 0.5 * (n - 1.0);
    double sx = 0.0, stt = 0.0, sty = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sx += x[i];
    const double y_mean = sx / n;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dt = static_cast<double>(i) - t_mean;
        stt += dt * dt;
        sty += dt * (x[i] - y_mean);
    }
    const double slope = stt > 0.0 ? sty / stt : 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] -= y_mean + slope * (static_cast<double>(i) - t_mean);
}

Spectrum transform(std::span<const double> x, double sample_rate, Window window, bool detrend) {
    const auto& k = kernels::active_kernels();
    const std::size_t n = x.size();
    const std::vector<double> w = make_window(window, n);

    FftwBuffers fft(n);
    std::span<double> buffer(fft.in, n);
    if (detrend) {
        std::vector<double> tmp(x.begin(), x.end());
        remove_line(tmp);
        k.center_and_window(tmp, 0.0, w, buffer);
    } else {
        const double mean = k.sum(x) / static_cast<double>(n);
        k.center_and_window(x, mean, w, buffer);
    }
    fftw_execute(fft.plan);

    const std::size_t bins = n / 2 + 1;
    std::vector<double> power(bins);
    k.power(std::span<const double>(reinterpret_cast<const double*>(fft.out), 2 * bins), power);

    Spectrum s;
    s.window = window;
    s.sample_rate = sample_rate;
    s.record_length = static_cast<double>(n) / sample_rate;
    s.window_sum = k.sum(w);
    s.window_sum_squares = k.sum_squares(w);
    s.freqs.resize(bins);
    s.asd.resize(bins);
    s.amplitude.resize(bins);
    const double df = sample_rate / static_cast<double>(n);
    for (std::size_t b = 0; b < bins; ++b) {
        const bool single = b == 0 || (n % 2 == 0 && b == bins - 1);
        const double c = single ? 1.0 : 2.0;
        s.freqs[b] = static_cast<double>(b) * df;
        s.amplitude[b] = c * std::sqrt(power[b]) / s.window_sum;
        s.asd[b] = std::sqrt(c * power[b] / (sample_rate * s.window_sum_squares));
    }
    return s;
}

std::size_t bin_at_or_above(const Spectrum& s, double f) {
    return static_cast<std::size_t>(std::max(0.0, std::ceil(f / s.bin_width() - 1e-9)));
}

double half_power_crossing(const Spectrum& s, std::size_t peak, double level, int dir) {
    const auto& a = s.amplitude;
    std::size_t j = peak;
    while (true) {
        if ((dir < 0 && j == 0) || (dir > 0 && j + 1 >= a.size())) return s.freqs[j];
        const std::size_t next = dir < 0 ? j - 1 : j + 1;
        if (a[next] < level) {
            const double frac = (a[j] - level) / (a[j] - a[next]);
            return s.freqs[j] + dir * frac * s.bin_width();
        }
        j = next;
    }
}

enum class Refine { Auto, LogParabolic };

PeakReport find_peak(const Spectrum& s, double f_lo, double f_hi, Refine mode) {
    if (s.size() < 3) throw AnalysisError("spectrum too short for peak tracking");
    if (!(f_hi > f_lo)) throw AnalysisError("empty peak-search band");
    const std::size_t lo = bin_at_or_above(s, f_lo);
    const std::size_t hi_raw = static_cast<std::size_t>(std::floor(f_hi / s.bin_width() + 1e-9));
    const std::size_t hi = std::min(hi_raw, s.size() - 1);
    if (lo >= s.size() || hi < lo || hi - lo + 1 < 8)
        throw AnalysisError("peak-search band [" + std::to_string(f_lo) + ", " +
                            std::to_string(f_hi) + "] Hz holds fewer than 8 bins");

    const auto& a = s.amplitude;
    std::size_t k = lo;
    for (std::size_t b = lo; b <= hi; ++b)
        if (a[b] > a[k]) k = b;

    PeakReport r;
    r.frequency = s.freqs[k];
    r.amplitude = a[k];
    r.on_edge = (k == lo || k == hi);
    if (!r.on_edge && k > 0 && k + 1 < s.size() && a[k - 1] > 0.0 && a[k + 1] > 0.0) {
        double offset = 0.0;
        double gain = 1.0;
        if (s.window == Window::Hann && mode == Refine::Auto) {
            // Hann line shape |W(d)| ~ sinc(d) / (1 - d^2): the neighbour ratio
            // R = (1 + d)(2 + d) / ((1 - d)(2 - d)) inverts in closed form.
            const double ratio = a[k + 1] / a[k - 1];
            const double qa = 1.0 - ratio, qb = 3.0 * (1.0 + ratio), qc = 2.0 * (1.0 - ratio);
            offset = -2.0 * qc / (qb + std::sqrt(std::max(0.0, qb * qb - 4.0 * qa * qc)));
            offset = std::clamp(offset, -0.5, 0.5);
            const double pd = std::numbers::pi * offset;
            const double sinc = std::abs(offset) < 1e-12 ? 1.0 : std::sin(pd) / pd;
            gain = (1.0 - offset * offset) / sinc;
        } else {
            const double la = std::log(a[k - 1]), lb = std::log(a[k]), lc = std::log(a[k + 1]);
            const double denom = la - 2.0 * lb + lc;
            if (denom < 0.0) {
                offset = std::clamp(0.5 * (la - lc) / denom, -0.5, 0.5);
                gain = std::exp(-0.25 * (la - lc) * offset);
            }
        }
        r.frequency = (static_cast<double>(k) + offset) * s.bin_width();
        r.amplitude = a[k] * gain;
        r.interpolated = true;
    }
    const double level = a[k] / std::numbers::sqrt2;
    r.bandwidth_3db = std::max(0.0, half_power_crossing(s, k, level, +1) -
                                        half_power_crossing(s, k, level, -1));
    return r;
}

}  // namespace

std::string_view to_string(Window w) { return w == Window::Hann ? "hann" : "rectangular"; }

Window parse_window(std::string_view text) {
    std::string lower(text);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "hann") return Window::Hann;
    if (lower == "rectangular" || lower == "rect") return Window::Rectangular;
    throw ConfigError("unknown window '" + std::string(text) + "' (expected hann|rectangular)");
}

Spectrum periodogram(std::span<const double> series, double sample_rate,
                     const PeriodogramOptions& options) {
    if (!(sample_rate > 0.0)) throw AnalysisError("sample rate must be > 0");
    if (options.transient_skip < 0.0) throw AnalysisError("transient skip must be >= 0");
    const auto skip = static_cast<std::size_t>(std::llround(options.transient_skip * sample_rate));
    if (skip >= series.size() || series.size() - skip < 256)
        throw AnalysisError("periodogram needs >= 256 samples after the transient skip, have " +
                            std::to_string(series.size() > skip ? series.size() - skip : 0));
    const auto x = series.subspan(skip);
    for (double v : x)
        if (std::isnan(v)) throw AnalysisError("NaN in periodogram input");
    return transform(x, sample_rate, options.window, options.detrend);
}

Spectrogram spectrogram(std::span<const double> series, double sample_rate, double window_length,
                        double hop, double t0, double expected_frequency) {
    if (!(window_length > 0.0) || !(hop > 0.0) || hop > window_length)
        throw AnalysisError("spectrogram needs 0 < hop <= window_length");
    if (expected_frequency > 0.0 && window_length * expected_frequency < 8.0)
        throw AnalysisError("spectrogram window must span >= 8 oscillation periods");
    const auto len = static_cast<std::size_t>(std::llround(window_length * sample_rate));
    const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(hop * sample_rate)));
    if (len < 256) throw AnalysisError("spectrogram window holds fewer than 256 samples");
    if (len > series.size()) throw AnalysisError("spectrogram window longer than the series");
    for (double v : series)
        if (std::isnan(v)) throw AnalysisError("NaN in spectrogram input");

    Spectrogram out;
    out.window_length = static_cast<double>(len) / sample_rate;
    out.hop = static_cast<double>(step) / sample_rate;
    for (std::size_t start = 0; start + len <= series.size(); start += step) {
        Spectrum col = transform(series.subspan(start, len), sample_rate, Window::Hann, false);
        if (out.freqs.empty()) out.freqs = col.freqs;
        out.times.push_back(t0 + (static_cast<double>(start) + 0.5 * static_cast<double>(len)) / sample_rate);
        out.magnitude.push_back(std::move(col.amplitude));
    }
    return out;
}

PeakReport track_peak(const Spectrum& spectrum, double f_lo, double f_hi) {
    return find_peak(spectrum, f_lo, f_hi, Refine::Auto);
}

PeakReport track_peak_log_parabolic(const Spectrum& spectrum, double f_lo, double f_hi) {
    return find_peak(spectrum, f_lo, f_hi, Refine::LogParabolic);
}

std::vector<PeakReport> harmonic_peaks(const Spectrum& spectrum, double fundamental,
                                       std::size_t n_harmonics) {
    if (!(fundamental > 0.0)) throw AnalysisError("fundamental must be > 0");
    const double nyquist = 0.5 * spectrum.sample_rate;
    const double top = (static_cast<double>(n_harmonics) + 0.25) * fundamental;
    if (top > nyquist) throw AnalysisError("harmonic band exceeds Nyquist");
    std::vector<PeakReport> out;
    out.reserve(n_harmonics);
    for (std::size_t k = 1; k <= n_harmonics; ++k) {
        const double centre = static_cast<double>(k) * fundamental;
        out.push_back(track_peak(spectrum, centre - 0.25 * fundamental, centre + 0.25 * fundamental));
    }
    return out;
}

double detection_floor(const Spectrum& spectrum) {
    if (spectrum.amplitude.empty()) return 0.0;
    std::vector<double> a(spectrum.amplitude.begin() + 1, spectrum.amplitude.end());
    const auto mid = a.begin() + static_cast<std::ptrdiff_t>(a.size() / 2);
    std::nth_element(a.begin(), mid, a.end());
    const double median = *mid;
    const double top = *std::max_element(spectrum.amplitude.begin() + 1, spectrum.amplitude.end());
    return std::max(10.0 * median, 1e-4 * top);
}

}  // namespace rydlock
