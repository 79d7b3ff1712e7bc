#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rydlock/integrator.hpp"
#include "rydlock/model.hpp"
#include "rydlock/spectral.hpp"

namespace rydlock::locking {

/// Simulation and readout settings shared by every locking run.
struct ProbeSettings {
    EquationVariant variant = EquationVariant::Supplementary;
    double record = 16e-3;       ///< s, total simulated time
    double transient = 8e-3;     ///< s skipped before the spectrum (steady protocol)
    double sample_rate = 1e6;    ///< Hz
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double max_step = 5e-6;
    double suppression = 0.1;    ///< locked needs residual <= suppression * A0
    /// The injection detuning is delta_s = sign * 2 pi f_inj.
    int injection_sign = 1;
};

/// Throws ConfigError on inconsistent settings.
void validate(const ProbeSettings& s);

/// Scan over (Omega, Delta_r, Delta_s, chi) at fixed gamma, all rad/s.
struct ScanGrid {
    double gamma = 0.0;
    std::vector<double> omega;
    std::vector<double> delta_r;
    std::vector<double> delta_s;
    std::vector<double> chi;
    double target_frequency = 23.45e3;  ///< Hz
    double record = 10e-3;              ///< s, per-cell simulation length
    std::size_t size() const { return omega.size() * delta_r.size() * delta_s.size() * chi.size(); }
    /// Cell i in row-major order (omega slowest, chi fastest).
    ModelParams cell(std::size_t i) const;
};

struct ScanCell {
    ModelParams params;
    bool oscillating = false;
    double peak_to_peak = 0.0;  ///< Im(sigma_gr), last 20% of the record
    double drift = 0.0;         ///< |ptp(last 20%) - ptp(middle 20%)| / ptp(middle 20%)
    double frequency = 0.0;     ///< Hz, 0 unless oscillating
    bool failed = false;        ///< integration failure; counted as not oscillating
};

/// Runs one cell: OSC iff ptp > 1e-4, drift < 2% and the window between 40%
/// and 100% of the record spans >= 100 periods.
ScanCell classify(const ModelParams& params, double record, EquationVariant variant);

struct OscReference {
    ModelParams params;  ///< omega_rs = 0
    double f_osc = 0.0;  ///< Hz
    double a0 = 0.0;     ///< undriven peak amplitude, same record as the probes
    ProbeSettings settings;
    std::vector<ScanCell> scan;  ///< empty when built from explicit parameters
    std::string origin;          ///< how the point was obtained
};

/// Classifies every cell on `threads` workers and returns the oscillating
/// cell closest to grid.target_frequency (lowest index on ties). Throws
/// AnalysisError listing the scanned ranges if nothing oscillates.
OscReference find_osc_regime(const ScanGrid& grid, const ProbeSettings& settings,
                             std::size_t threads);

/// Measures f_osc and A0 of an explicit parameter set. Throws AnalysisError
/// unless the point passes the OSC classification.
OscReference characterize(const ModelParams& params, const ProbeSettings& settings);

enum class Protocol { Steady, StepOn };

struct LockRequest {
    double omega_rs = 0.0;   ///< rad/s
    double delta_inj = 0.0;  ///< rad/s, injection offset from f_osc
    Protocol protocol = Protocol::Steady;
    double t_on = 0.0;       ///< s, StepOn only
};

struct LockReport {
    double injection_frequency = 0.0;  ///< Hz
    double readout = 0.0;              ///< Hz
    bool locked = false;
    double residual = 0.0;             ///< largest amplitude within |offset|/2 of f_osc
    double residual_ratio = 0.0;       ///< residual / A0
    double bin_width = 0.0;            ///< Hz
    std::vector<PeakReport> harmonics; ///< k = 1..3 around the readout
};

double injection_frequency(const OscReference& osc, double delta_inj);

/// Drive that realises a request: constant or stepped Rabi frequency at
/// delta_s = sign * 2 pi (f_osc + delta_inj / 2 pi).
DriveSchedule injection_drive(const OscReference& osc, const LockRequest& req);

/// Simulates, skips the transient (for StepOn, the first half of the record
/// after t_on) and reads the spectrum. Locked iff the readout is within one
/// bin of the injection frequency and residual <= suppression * A0.
LockReport lock_readout(const OscReference& osc, const LockRequest& req);

/// The spectrum lock_readout analyses.
Spectrum lock_spectrum(const OscReference& osc, const LockRequest& req);

/// Lock decision on an already computed spectrum; lock_readout is
/// read_lock(osc, lock_spectrum(osc, req), req.delta_inj).
LockReport read_lock(const OscReference& osc, const Spectrum& spectrum, double delta_inj);

struct CriticalPoint {
    double delta_inj = 0.0;       ///< rad/s
    double omega_rs_crit = 0.0;   ///< rad/s, upper end of the final bracket
    double suppression_ratio = 0.0;
    double bracket_low = 0.0;     ///< rad/s, still above threshold
    std::size_t probes = 0;
};

/// Bisection on Omega_rs for the smallest value with residual <= suppression * A0.
/// Stops at a bracket <= 1% relative. Requires |delta_inj| / 2 pi >= 4 bins.
/// Throws AnalysisError if [lo, hi] does not bracket the criterion.
CriticalPoint critical_point(const OscReference& osc, double delta_inj, double omega_lo,
                             double omega_hi);

struct KFit {
    double k = 0.0;   ///< |delta| = K Omega_rs_crit, angular units
    double r2 = 0.0;  ///< centred coefficient of determination
    std::vector<double> residuals;  ///< rad/s, in input order
};

/// Least squares through the origin. Needs >= 4 points whose |delta_inj|
/// span a factor >= 2.
KFit fit_forcing_k(const std::vector<CriticalPoint>& points);

/// One row of a field sweep at fixed injection frequency.
struct SweepRow {
    double field = 0.0;    ///< any monotone drive-strength unit
    double readout = 0.0;  ///< Hz
    bool locked = false;
};

struct InterceptResult {
    double critical_field = 0.0;
    double offset = 0.0;   ///< Hz, f_inj - f_osc
    double slope = 0.0;    ///< Hz per field unit
    double intercept = 0.0;
    std::size_t fitted_rows = 0;
};

/// Linear fit of readout against field over the `fit_rows` unlocked rows just
/// below the first locked row (all unlocked rows when the sweep never locks);
/// the critical field is where the line reaches f_inj. Rows whose readout
/// differs from f_osc by less than `min_shift` Hz do not count as pulled.
/// Throws AnalysisError with fewer than `fit_rows` pulled rows.
InterceptResult bandwidth_by_intercept(const std::vector<SweepRow>& rows, double f_inj,
                                       double f_osc, double min_shift,
                                       std::size_t fit_rows = 6);

/// Full bandwidth (Hz) from intercepts on both sides at a common field:
/// linear interpolation of offset against critical field on each side.
double two_sided_bandwidth(const std::vector<InterceptResult>& above,
                           const std::vector<InterceptResult>& below, double field);

}  // namespace rydlock::locking
