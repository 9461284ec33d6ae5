#pragma once

// Multimodal-oscillation detection from norm-threshold crossings and
// interspike-interval statistics.

#include "hopfscope/asymptotics.hpp"
#include "hopfscope/integrate.hpp"
#include "hopfscope/linalg.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace hopfscope::isi {

struct SpikeOptions {
    double r1 = 1.0;   // entry ball |x| <= r1 eps^2
    double r2 = 0.3;   // spike threshold |x| > r2
    double epsilon = 0.0;
    /// Strict: a second spike crossing before the entry ball is reached rejects the train
    /// instead of being merged into the running spike.
    bool strict = false;

    double entry_radius() const { return r1 * epsilon * epsilon; }
    void validate() const;
};

struct SpikeTrain {
    /// t_1 < t_2 < ...: spikes at odd positions, entries at even positions.
    std::vector<double> times;
    std::vector<double> spikes;
    std::vector<double> entries;
    /// Every threshold crossing that fed the state machine.
    std::vector<integrate::EventRecord> raw;
    SpikeOptions opt;
    bool multimodal = false;
    std::string reason;
};

/// Rising |x| = r2 (spec index 0) and falling |x| = r1 eps^2 (spec index 1).
std::vector<integrate::EventSpec> spike_events(const SpikeOptions& opt);

/// Builds the alternating train from crossing records of spike_events(opt) (spec 0/1).
SpikeTrain detect_multimodal(const std::vector<integrate::EventRecord>& events,
                             const SpikeOptions& opt);
/// Uses the dense output when stored, the event log (spec 0/1) otherwise.
SpikeTrain detect_multimodal(const integrate::Trajectory& traj, const SpikeOptions& opt);

/// Integrates with the spike events attached (no dense output) and detects the train.
SpikeTrain run_spike_train(const VectorField& field, const Vec3& x0, double t_end,
                           const SpikeOptions& opt, integrate::IntegratorConfig cfg = {});

struct IsiSeries {
    std::vector<double> tau;      // tau_i = spike_{i+1} - spike_i
    std::vector<double> t_spike;  // start spike of each interval

    std::size_t size() const { return tau.size(); }
    /// Mean over tau_i with i >= skip + 1.
    double mean(std::size_t skip = 1) const;
    double stddev(std::size_t skip = 1) const;
    double cv(std::size_t skip = 1) const;
};

/// Throws DomainError with fewer than two spikes.
IsiSeries isi_series(const SpikeTrain& st);

struct BoundsReport {
    std::size_t n = 0;
    std::size_t inside = 0;
    double fraction_inside = 0.0;
    double min_tau = 0.0;
    double max_tau = 0.0;
    double tau_minus = 0.0;
    double tau_plus = 0.0;
};

BoundsReport check_bounds(const IsiSeries& s, const asymptotics::IsiBounds& b, std::size_t skip = 1);

struct IsiRun {
    double alpha = 0.0;
    double gamma = 0.0;
    double epsilon = 0.0;
    std::vector<double> tau;  // intervals used for fitting
};

struct BoundConstants {
    double C_minus = 0.0;
    double C_plus = 0.0;
    double chi = 0.0;
};

/// C implied by inverting the tau^-/tau^+ formulas on each interval; C^- is the smallest,
/// C^+ the largest over all runs.
BoundConstants fit_bound_constants(const std::vector<IsiRun>& runs, double chi = 0.0);

enum class ScalingMode { vs_alpha, vs_ln_gamma };

std::string to_string(ScalingMode m);

struct ScalingPoint {
    double x = 0.0;  // alpha or gamma
    double mean_isi = 0.0;
};

struct ScalingFit {
    ScalingMode mode = ScalingMode::vs_ln_gamma;
    std::size_t n = 0;
    double slope = 0.0;               // vs_ln_gamma: d tau / d ln gamma
    double intercept = 0.0;
    double theoretical_slope = 0.0;   // -1 / (2 alpha)
    double relative_error = 0.0;      // |slope / theoretical - 1|
    double C_fit = 0.0;               // vs_alpha: C in ln(1 + C alpha) / (2 alpha)
    double r2 = 0.0;
    std::vector<double> residuals;
    bool strictly_decreasing = false; // mean ISI in increasing x
    std::string warning;
};

/// vs_ln_gamma: affine regression of the mean ISI on ln gamma, compared with -1/(2 alpha).
/// vs_alpha: least-squares C of the ln(1 + C alpha)/(2 alpha) template.
ScalingFit fit_isi_scaling(std::vector<ScalingPoint> runs, ScalingMode mode, double alpha = 0.0);

/// `i,t_spike,tau`, one row per interval, 1-based.
void write_isi_csv(std::ostream& os, const IsiSeries& s);

}  // namespace hopfscope::isi
