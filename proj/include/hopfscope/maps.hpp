#pragma once

// Cross-section machinery: flow map between the cylinder section near the origin
// and the plane section on the returning branch, contraction diagnostics along
// the x1-axis, the numeric first-return map in I = 1/rho^2, orbit
// classification and parameter sweeps.

#include "hopfscope/asymptotics.hpp"
#include "hopfscope/integrate.hpp"
#include "hopfscope/linalg.hpp"
#include "hopfscope/return_map.hpp"

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace hopfscope::maps {

using integrate::IntegratorConfig;

// ---------------------------------------------------------------- flow map

struct SectionGeometry {
    double rho = 0.1;  // cylinder radius of the entry section
    double x1_lo = -0.02;
    double x1_hi = 0.02;
    /// Planes x1 = d of the exit section, outermost first; the first entry is the
    /// reference plane, the others are probed on the way back toward the origin.
    std::vector<double> planes{-0.65};
    double max_flight_time = 2000.0;
    double theta_offset = 0.0;  // mesh angles are theta_offset + 2 pi j / nj
};

struct FlowMapSample {
    int i = 0;
    int j = 0;
    double x1_start = 0.0;
    double theta_start = 0.0;
    Vec3 start = Vec3::Zero();
    /// (y1, y2) = (x2, x3) at the first crossing of each plane from the left, after the spike
    std::vector<Eigen::Vector2d> ends;
    std::vector<double> flight_times;
    bool ok = false;
    std::string status;
};

Vec3 cylinder_point(double rho, double x1, double theta);

std::vector<FlowMapSample> flow_map_Q(int ni, int nj, double alpha, double p,
                                      const SectionGeometry& geo = {},
                                      const IntegratorConfig& cfg = {}, int jobs = 1);

/// Same, for any vector field.
std::vector<FlowMapSample> flow_map_Q(const VectorField& field, int ni, int nj,
                                      const SectionGeometry& geo, const IntegratorConfig& cfg,
                                      int jobs = 1);

struct ImageStats {
    double plane = 0.0;
    std::size_t n = 0;
    double diameter = 0.0;  // max pairwise distance
    double min_norm = 0.0;  // min |(y1, y2)|
};

/// One entry per plane of the geometry, using the successful samples.
std::vector<ImageStats> image_stats(const std::vector<FlowMapSample>& samples,
                                    const SectionGeometry& geo);

// ---------------------------------------------------------------- contraction

struct SymEig2 {
    double lambda1 = 0.0;  // smaller
    double lambda2 = 0.0;
};

/// Eigenvalues of the symmetric part of a 2x2 matrix, closed form.
SymEig2 sym2_eigenvalues(const Eigen::Matrix2d& m);

struct ContractionProfile {
    std::vector<double> x1;
    std::vector<double> w;             // f1 on the axis
    std::vector<double> lambda_bar;    // -lambda2
    std::vector<double> lambda_under;  // -lambda1
    std::vector<double> ratio_bar;     // lambda_bar / w
    std::vector<double> ratio_under;   // lambda_under / w
    std::optional<double> x_star;      // root of lambda_bar
    double d1 = 0.0;
    double d2 = 0.0;  // right end of the positivity interval of lambda_bar starting at d1
    double d3 = 0.0;
    bool monotone_ok = true;  // lambda_bar strictly decreasing in x1
    bool positive_ok = true;  // lambda_bar > 0 on [d1, d2] with d2 > d1
    bool w_positive_ok = true;
    double min_ratio_bar = 0.0;    // over [d1, d2]
    double max_ratio_under = 0.0;  // over the whole grid
    std::vector<double> monotonicity_violations;
    std::vector<double> w_violations;
};

struct ContractionGrid {
    double d1 = -0.65;
    /// Right end; unset: -M^2 eps^2 with the smallest integer M putting it left of x_star.
    std::optional<double> d3;
    int n = 131;
    double epsilon = 0.0;  // only used for the automatic d3
};

ContractionProfile contraction_profile(const VectorField& field, const ContractionGrid& grid);
ContractionProfile contraction_profile(double alpha, double p, ContractionGrid grid = {});

// ---------------------------------------------------------------- return map

struct ReturnMapOptions {
    std::optional<double> theta_bar;  // unset: chosen automatically
    int n_transient = 50;
    int n_samples = 200;
    std::vector<Vec3> seeds;  // unset: a single seed near the origin
    IntegratorConfig cfg{};
    double max_time = 1e6;
};

struct ReturnMapResult {
    ReturnMapData data;
    /// Raw I = 1/rho^2 crossing sequence per seed (post-transient).
    std::vector<std::vector<double>> sequences;
    bool phase_gaps_ok = true;
    double min_phase_gap = 0.0;
    double max_phase_gap = 0.0;
};

/// Angle whose crossings are one per cycle on a probe trajectory: maximizes the
/// minimum unwrapped phase gap, ties broken by the larger minimum time gap.
double choose_theta_bar(const VectorField& field, const Vec3& x0, double t_probe,
                        const IntegratorConfig& cfg, int candidates = 24);

ReturnMapResult first_return_map(const VectorField& field, const ReturnMapOptions& opt);
ReturnMapResult first_return_map(double alpha, double p, const ReturnMapOptions& opt = {});

/// I = 1/rho^2 at the counterclockwise crossings of theta_bar along a trajectory's event log.
std::vector<double> crossing_sequence(const integrate::Trajectory& traj, int spec);

/// Two sample sub-clouds at equal abscissa (checked on quantile bins of I_k).
bool detect_multivalued(const ReturnMapData& data, int bins = 40);

struct BranchSlopes {
    double inner_slope = 0.0;  // regression on the smallest-I part of the cloud
    double outer_slope = 0.0;  // regression on the upper part of the cloud
    double inner_lo = 0.0, inner_hi = 0.0;
    double outer_lo = 0.0, outer_hi = 0.0;
    double outer_r2 = 0.0;
    std::size_t n_inner = 0;
    std::size_t n_outer = 0;
};

/// Splits the cloud at the minimum of the binned graph: samples left of it form the
/// decreasing inner branch, samples above the geometric midpoint of the remaining range the outer branch.
BranchSlopes branch_slopes(const ReturnMapData& data);

// ---------------------------------------------------------------- classification

enum class OrbitKind { fixed, periodic, chaotic, escaped, unresolved };

std::string to_string(OrbitKind k);

struct OrbitClass {
    OrbitKind kind = OrbitKind::unresolved;
    int period = 0;  // 1 for fixed
    double map_lyapunov = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::size_t n_used = 0;

    std::string label() const;
};

struct ClassifyOptions {
    int max_period = 64;
    double closure_rtol = 1e-6;
    int closure_window = 64;  // trailing iterates that must close
    int knn = 8;
    int bootstrap = 1000;
    unsigned seed = 12345;
    double domain_lo = -std::numeric_limits<double>::infinity();
    double domain_hi = std::numeric_limits<double>::infinity();
};

/// Period by n-fold closure on the trailing window (smallest n <= max_period).
int detect_period(const std::vector<double>& seq, double rtol, int max_period, int window);

/// Classifies an iterate sequence; slopes from local k-nearest-neighbour secants of the
/// graph (x_k, x_{k+1}).
OrbitClass classify_orbit(const std::vector<double>& seq, const ClassifyOptions& opt = {});

/// Classifies the orbit of an analytic map from I0: n_transient + n_iter iterates,
/// exponent from the mean of ln|map'|.
OrbitClass classify_orbit(const std::function<double(double)>& map,
                          const std::function<double(double)>& deriv, double I0, int n_transient,
                          int n_iter, const ClassifyOptions& opt = {});

/// Percentile bootstrap CI of the mean (fixed-seed mt19937, moving blocks of length `block`).
std::pair<double, double> bootstrap_mean_ci(const std::vector<double>& v, int resamples,
                                            unsigned seed, std::size_t block = 1,
                                            double level = 0.95);

// ---------------------------------------------------------------- sweeps

enum class SweepParam { alpha, p, gamma_proxy };

std::string to_string(SweepParam s);

struct SweepConfig {
    SweepParam param = SweepParam::p;
    double lo = 0.0;
    double hi = 0.0;
    int steps = 0;
    double alpha = 0.0445;  // fixed when sweeping p or gamma
    double p = 3.0;         // fixed when sweeping alpha
    double theta_bar = 0.0;
    Vec3 seed = Vec3(0.0, 0.02, 0.0);
    int n_transient = 300;
    int n_samples = 200;
    IntegratorConfig cfg{};
    ClassifyOptions classify{};
    int jobs = 1;
};

struct SweepPoint {
    double param = 0.0;
    double p = 0.0;
    double alpha = 0.0;
    double gamma = 0.0;
    std::vector<double> attractor;
    OrbitClass cls;
    bool ok = true;
    std::string error;
};

struct Doubling {
    double param_before = 0.0;
    double param_after = 0.0;
    int from = 0;
    int to = 0;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    std::vector<Doubling> doublings;
    /// Longest chain of successive doublings 1 -> 2 -> 4 ... read in either sweep direction.
    int longest_cascade = 0;
    bool chaotic_window = false;
};

std::vector<double> sweep_grid(double lo, double hi, int steps);

/// Inverts gamma(p) on its increasing upper branch (bracket grown from [p0, p1], then bisection).
double p_for_gamma(double gamma, double p0 = 2.75, double p1 = 2.8);

SweepResult sweep_bifurcation(const SweepConfig& sc);

/// Sweep of the analytic map G in gamma.
SweepResult sweep_analytic_G(const asymptotics::MapParams& base, double gamma_lo, double gamma_hi,
                             int steps, int n_transient = 2000, int n_iter = 2000,
                             const ClassifyOptions& opt = {});

/// Finds period-doubling events along a sweep and fills the cascade summary.
void summarize_sweep(SweepResult& res);

/// Runs f(i) for i in [0, n) on at most `jobs` threads; results are index-addressed by the caller.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& f);

}  // namespace hopfscope::maps
