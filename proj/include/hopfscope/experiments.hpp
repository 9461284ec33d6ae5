#pragma once

// Reproduction recipes shared by the command-line tool and the acceptance suite.
// Each returns raw measurements; pass/fail thresholds live with the callers.

#include "hopfscope/asymptotics.hpp"
#include "hopfscope/integrate.hpp"
#include "hopfscope/isi.hpp"
#include "hopfscope/maps.hpp"
#include "hopfscope/model.hpp"
#include "hopfscope/serialize.hpp"

#include <array>
#include <complex>
#include <string>
#include <vector>

namespace hopfscope::experiments {

using serialize::Json;

// ---------------------------------------------------------------- Hopf point

struct HopfCheck {
    model::HopfPoint point;
    std::array<std::complex<double>, 3> eigenvalues{};  // sorted by imaginary part
    double eigen_error = 0.0;  // max distance to {-1, +-i beta}
};

HopfCheck hopf_check();
Json to_json(const HopfCheck& h);

// ---------------------------------------------------------------- gamma(p)

struct GammaScan {
    std::vector<double> p;
    std::vector<double> gamma;
    /// Grid intervals [p_k, p_{k+1}] where gamma changes sign.
    std::vector<std::pair<double, double>> brackets;
    std::vector<double> zeros;  // bisected inside each bracket
};

GammaScan gamma_scan(double p_lo, double p_hi, int steps, int jobs = 1, bool refine = true);
Json to_json(const GammaScan& g);

// ---------------------------------------------------------------- periodic orbit

struct OrbitRun {
    double alpha = 0.0;
    double p = 0.0;
    double gamma = 0.0;
    double a = 0.0;
    double t_span = 0.0;
    double rho_bar = 0.0;    // sqrt(alpha / -gamma)
    double rho_mean = 0.0;   // time mean of sqrt(x2^2 + x3^2) over the analysis window
    double freq_x1 = 0.0;
    double freq_x2 = 0.0;
    double freq_ratio = 0.0;
    double x1_mean = 0.0;
    double x1_predicted = 0.0;  // a rho_bar^2
    std::size_t steps = 0;
};

struct WindowStats {
    double freq_x1 = 0.0;
    double freq_x2 = 0.0;
    double freq_ratio = 0.0;
    double rho_mean = 0.0;
    double x1_mean = 0.0;
};

/// Dominant frequencies and time means over the final `fraction` of a trajectory with dense output.
WindowStats window_stats(const integrate::Trajectory& traj, double fraction = 0.5);
Json to_json(const WindowStats& w);

/// Starts on the leading-order cycle and analyzes the final `fraction` of [0, t_span].
OrbitRun supercritical_orbit(double alpha, double p, double t_span = 2000.0, double fraction = 0.5,
                             const integrate::IntegratorConfig& cfg = {});
Json to_json(const OrbitRun& r);

// ---------------------------------------------------------------- slow manifold

struct ResidualRun {
    double alpha = 0.0;
    double epsilon = 0.0;
    double max_residual = 0.0;  // max |x1 - U(theta) rho^2| over the window
    double rho_max = 0.0;
};

struct ResidualScaling {
    double p = 0.0;
    double t_lo = 0.0;
    double t_hi = 0.0;
    std::vector<ResidualRun> runs;
    std::vector<double> ratios;  // residual(run k) / residual(run k+1)
};

/// Starts on the leading-order cycle (requires gamma(p) < 0) and samples the residual
/// on the dense output for t in [t_lo, t_hi].
ResidualScaling slow_manifold_residual(double p, const std::vector<double>& alphas, double t_lo = 30.0,
                                       double t_hi = 130.0, const integrate::IntegratorConfig& cfg = {});
Json to_json(const ResidualScaling& r);

// ---------------------------------------------------------------- transit time

struct TransitRun {
    double alpha = 0.0;
    double p = 0.0;
    double gamma = 0.0;
    double I0 = 0.0;      // scaled levels eps^2 / rho^2
    double I_bar = 0.0;
    double predicted = 0.0;
    /// gamma from Taylor data taken at the run's alpha instead of at the Hopf point
    double gamma_local = 0.0;
    double predicted_local = 0.0;
    double measured = 0.0;           // from the turn-averaged ln rho^2
    double measured_cylinder = 0.0;  // first crossings of the two cylinders
    /// "turn_average", or "cylinder" when the averaged radius never reaches the outer level
    std::string method;
    std::size_t turns = 0;
};

/// Starts on the slow manifold inside rho^2 = alpha / I0 and times the outward flight
/// between the levels rho^2 = alpha / I0 and rho^2 = alpha / I_bar of the radius averaged
/// over each turn of the polar angle.
TransitRun transit_experiment(double alpha, double p, double I0 = 3.0, double I_bar = 1.0,
                              const integrate::IntegratorConfig& cfg = {});
Json to_json(const TransitRun& r);

// ---------------------------------------------------------------- ISI

struct IsiRunResult {
    double alpha = 0.0;
    double p = 0.0;
    double gamma = 0.0;
    double t_end = 0.0;
    isi::SpikeTrain train;
    isi::IsiSeries series;
    double mean_isi = 0.0;  // first interval discarded
    double cv = 0.0;
    bool ok = false;
    std::string error;
};

struct IsiRunOptions {
    double t_end = 4000.0;
    double r1 = 1.0;
    double r2 = 0.3;
    Vec3 seed = Vec3(0.0, 0.01, 0.0);
    integrate::IntegratorConfig cfg{};
};

IsiRunResult isi_run(double alpha, double p, const IsiRunOptions& opt = {});
/// Runs in index order of `params`; `by_gamma` reads them as gamma values (p inverted near the
/// upper zero of gamma), otherwise as alpha values at fixed gamma.
std::vector<IsiRunResult> isi_sweep(const std::vector<double>& params, bool by_gamma, double fixed,
                                    const IsiRunOptions& opt = {}, int jobs = 1);
Json to_json(const IsiRunResult& r);

struct IsiScaling {
    std::vector<IsiRunResult> runs;
    isi::ScalingFit fit;
};

/// Mean ISI vs ln gamma at fixed alpha.
IsiScaling isi_scaling_vs_gamma(double alpha, const std::vector<double>& gammas, const IsiRunOptions& opt = {},
                                int jobs = 1);
/// Mean ISI vs alpha at fixed gamma.
IsiScaling isi_scaling_vs_alpha(double gamma, const std::vector<double>& alphas, const IsiRunOptions& opt = {},
                                int jobs = 1);
Json to_json(const IsiScaling& s);

// ---------------------------------------------------------------- return map

struct ReturnMapRun {
    double alpha = 0.0;
    double p = 0.0;
    double gamma = 0.0;
    double omega = 0.0;
    maps::ReturnMapResult map;
    maps::BranchSlopes slopes;
    double predicted_outer_slope = 0.0;  // 1 - 2 alpha omega
    asymptotics::SecondLyapunovFit c_fit;
};

struct ReturnMapRunOptions {
    double theta_bar = 0.0;
    int n_transient = 0;
    int n_samples = 60;
    /// Seeds on the slow manifold at these radii.
    std::vector<double> seed_radii{0.005, 0.01, 0.02, 0.04, 0.08};
    integrate::IntegratorConfig cfg{};
};

ReturnMapRun return_map_experiment(double alpha, double p, const ReturnMapRunOptions& opt = {});
Json to_json(const ReturnMapRun& r);

// ---------------------------------------------------------------- global conditions

struct GlobalCheck {
    double alpha = 0.0;
    double p = 0.0;
    maps::SectionGeometry geometry;
    int ni = 0;
    int nj = 0;
    std::vector<maps::FlowMapSample> samples;
    std::vector<maps::ImageStats> stats;
    std::size_t failed = 0;
    bool diameter_monotone = false;  // shrinking toward the origin
    /// zeta fitted on a staggered calibration mesh (half its smallest |(y1, y2)|).
    double zeta = 0.0;
    double holdout_min_norm = 0.0;
    maps::ContractionProfile contraction;
};

GlobalCheck global_check(double alpha, double p, int ni = 20, int nj = 20, const maps::SectionGeometry& geo = {},
                         int calibration_mesh = 10, const integrate::IntegratorConfig& cfg = {}, int jobs = 1);
Json to_json(const GlobalCheck& g);

// ---------------------------------------------------------------- helpers

/// Point (U(theta) rho^2, rho cos theta, rho sin theta) on the leading-order slow manifold.
Vec3 slow_manifold_point(const asymptotics::HopfAsymptotics& ha, double rho, double theta);

}  // namespace hopfscope::experiments
