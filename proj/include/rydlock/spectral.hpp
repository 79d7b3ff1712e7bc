#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace rydlock {

enum class Window { Rectangular, Hann };

std::string_view to_string(Window w);
Window parse_window(std::string_view text);

/// One-sided spectrum of a real series.
///
/// Normalization, with w the window, X the DFT of the centered windowed
/// series, c_k = 1 at DC/Nyquist and 2 elsewhere:
///   amplitude[k] = c_k |X_k| / sum(w)           (unit sinusoid at a bin centre -> 1)
///   asd[k]       = sqrt(c_k |X_k|^2 / (fs sum(w^2)))   (units / sqrt(Hz))
/// and Parseval reads  sum((w x)^2) = sum(w^2) * sum_k asd[k]^2 * bin_width.
struct Spectrum {
    std::vector<double> freqs;      ///< Hz, bin k at k * bin_width
    std::vector<double> asd;
    std::vector<double> amplitude;
    Window window = Window::Hann;
    double record_length = 0.0;     ///< s
    double sample_rate = 0.0;       ///< Hz
    double window_sum = 0.0;        ///< sum(w)
    double window_sum_squares = 0.0;

    double bin_width() const { return 1.0 / record_length; }
    std::size_t size() const { return freqs.size(); }
};

struct PeriodogramOptions {
    Window window = Window::Hann;
    double transient_skip = 0.0;  ///< s discarded from the start of the series
    bool detrend = false;         ///< remove a least-squares line instead of just the mean
};

/// Throws AnalysisError with fewer than 256 samples left after the skip or any NaN.
Spectrum periodogram(std::span<const double> series, double sample_rate,
                     const PeriodogramOptions& options = {});

/// Short-time amplitude spectra, Hann-windowed segments; magnitude = Spectrum::amplitude.
struct Spectrogram {
    std::vector<double> times;  ///< segment centres, s
    std::vector<double> freqs;  ///< Hz
    std::vector<std::vector<double>> magnitude;  ///< [time][freq]
    double window_length = 0.0;
    double hop = 0.0;
};

/// `t0` is the time of series[0]. When expected_frequency > 0 the window must
/// span >= 8 periods of it.
Spectrogram spectrogram(std::span<const double> series, double sample_rate, double window_length,
                        double hop, double t0 = 0.0, double expected_frequency = 0.0);

struct PeakReport {
    double frequency = 0.0;    ///< Hz
    double amplitude = 0.0;
    double bandwidth_3db = 0.0;  ///< Hz, FWHM of the power line
    bool interpolated = false;
    bool on_edge = false;      ///< maximum sat on the first/last bin of the band
};

/// Maximum bin in [f_lo, f_hi] refined to sub-bin precision. Hann spectra use
/// the exact three-bin Hann line-shape inversion; rectangular spectra use
/// parabolic interpolation on log-magnitude. The 3 dB width comes from linear
/// interpolation of the half-power crossings. Throws AnalysisError if the band
/// holds fewer than 8 bins or lies outside the spectrum.
PeakReport track_peak(const Spectrum& spectrum, double f_lo, double f_hi);

/// Same, forcing log-parabolic refinement regardless of window.
PeakReport track_peak_log_parabolic(const Spectrum& spectrum, double f_lo, double f_hi);

/// track_peak in a +-25% band around k * fundamental, k = 1..n_harmonics.
/// Throws AnalysisError if the last band crosses Nyquist.
std::vector<PeakReport> harmonic_peaks(const Spectrum& spectrum, double fundamental,
                                       std::size_t n_harmonics);

/// Level a peak must exceed to count as a detected line:
/// max(10 * median amplitude, 1e-4 * largest amplitude).
double detection_floor(const Spectrum& spectrum);

}  // namespace rydlock
