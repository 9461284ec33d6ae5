#pragma once

// Closed-form asymptotics near the Hopf point: slow-manifold shape U(theta),
// first Lyapunov coefficient, leading-order periodic orbit and its Frenet
// invariants, transit time, ISI bounds and the one-dimensional cycle map G.
//
// All trigonometric polynomials are written in the angle theta = beta * phi.

#include "hopfscope/linalg.hpp"
#include "hopfscope/return_map.hpp"
#include "hopfscope/taylor.hpp"
#include "hopfscope/trig_poly.hpp"

#include <functional>
#include <optional>

namespace hopfscope::asymptotics {

struct TrigPolys {
    TrigPoly P1;  // quadratic x1-equation forcing on the circle
    TrigPoly Q1;  // quadratic radial terms
    TrigPoly Q2;  // x1-coupling in the radial equation
    TrigPoly Q3;  // cubic radial terms
    TrigPoly L1;  // quadratic angular terms, enters through the phase reparametrization
};

TrigPolys build_trig_polys(const taylor::TaylorData& td);

struct SlowManifoldConstants {
    double a = 0.0;
    double A = 0.0;
    /// Two-argument arctangent of the tabulated numerator/denominator pair;
    /// empty when A = 0.
    std::optional<double> vartheta;
    /// Phase for which U(theta) = a + A cos(2 theta - phase) solves the x1 balance
    /// U' * beta + U = P1; empty when A = 0. Used by every orbit-level computation.
    std::optional<double> phase;
    double beta = 0.0;

    /// a + A cos(2 theta - phase)
    TrigPoly U() const;
};

SlowManifoldConstants slow_manifold_constants(const taylor::TaylorData& td);

/// p1 = (P1~ - dP1~/dphi) / (1 + 4 beta^2), as a polynomial in theta.
TrigPoly p1_poly(const taylor::TaylorData& td);
/// xi0 = mean(P1) + p1.
TrigPoly xi0_poly(const taylor::TaylorData& td);
double xi0(double phi, const taylor::TaylorData& td);

struct LyapunovReport {
    double gamma = 0.0;             // mean(xi0 Q2 + Q3 - Q1 L1 / beta), Fourier route
    double gamma_quadrature = 0.0;  // same integrand, 1024-point trapezoid
    double gamma_truncated = 0.0;   // mean(xi0 Q2 + Q3), without the phase-coupling term
};

LyapunovReport lyapunov1_report(const taylor::TaylorData& td);
double lyapunov1(const taylor::TaylorData& td);

struct HopfAsymptotics {
    double p = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double a = 0.0;
    double A = 0.0;
    std::optional<double> vartheta;
    std::optional<double> phase;
    std::optional<double> c_fit;
    double omega = 0.0;  // 2 pi / beta

    TrigPoly U() const;
};

HopfAsymptotics hopf_asymptotics(const taylor::TaylorData& td);
/// Extracts Taylor data of the combustion model at alpha = 0 and assembles everything.
HopfAsymptotics hopf_asymptotics_for(double p);

/// gamma(p) of the combustion model.
double gamma_of_p(double p);

struct OrbitApprox {
    double rho_bar = 0.0;  // sqrt(alpha / -gamma)
    double a = 0.0;
    double A = 0.0;
    double phase = 0.0;

    Vec3 point(double theta) const;
    /// d^k/dtheta^k of point(theta), k = 1, 2, 3
    Vec3 derivative(double theta, int k) const;
};

/// Leading-order cycle; DomainError unless alpha * gamma < 0.
OrbitApprox orbit_approx(double alpha, const HopfAsymptotics& ha);

struct CurvatureTorsion {
    double curvature = 0.0;
    double torsion = 0.0;
};

/// Frenet curvature and torsion of theta -> (rho^2 (a + A cos 2theta), rho cos theta, rho sin theta),
/// rho = sqrt(alpha / -gamma), exact in A and rho.
CurvatureTorsion curvature_torsion(double theta, double A, double alpha, double gamma);
/// Tabulated leading-order forms:
///   k = sqrt(1 + 2A^2 (3 cos 4theta + 5)),  kappa = (-gamma/alpha) 6A sin 2theta / (1 + 2A^2 (3 cos 4theta + 5)).
CurvatureTorsion curvature_torsion_leading(double theta, double A, double alpha, double gamma);

/// Frenet curvature and torsion of any parametrized curve from fourth-order central differences
/// with step h.
CurvatureTorsion frenet_fd(const std::function<Vec3(double)>& curve, double s, double h = 1e-2);

/// Delta = ln((I0 + gamma/mu) / (I_bar + gamma/mu)) / (2 mu eps^2).
double transit_time(double I0, double I_bar, double mu, double gamma, double epsilon);

struct IsiBounds {
    double tau_minus = 0.0;
    double tau_plus = 0.0;
    double C_minus = 0.0;
    double C_plus = 0.0;
    double chi = 0.0;
    double epsilon = 0.0;
    double alpha = 0.0;
    double gamma = 0.0;
};

/// tau^- = ln(1 + alpha C^- / (gamma eps^4)) / (2 alpha),
/// tau^+ = ln(1 + alpha C^+ / (gamma eps^(4 + chi))) / (2 alpha).
IsiBounds isi_bounds(double alpha, double gamma, double epsilon, double C_minus, double C_plus,
                     double chi = 0.0);
/// ln(1 + C alpha) / (2 alpha): bound template at fixed gamma.
double isi_bound_vs_alpha(double C_tilde, double alpha);
/// C - ln(gamma) / (2 alpha): bound template at fixed alpha.
double isi_bound_vs_gamma(double C_bar, double alpha, double gamma);

struct MapParams {
    double mu = 1.0;
    double gamma = 0.0;
    double c = 0.0;
    double epsilon = 0.0;
    double omega = 0.0;
};

/// G(I) = I - 2 eps^2 omega (mu I + gamma + eps^2 c / I)
double analytic_map_G(double I, const MapParams& mp);
double analytic_map_G_prime(double I, const MapParams& mp);

enum class GammaCase { negative, zero, positive };

/// Leading-order fixed point by sign of gamma:
///   gamma < 0: -gamma/mu + (c/gamma) eps^2;  gamma = 0: sqrt(-c/mu) eps;  gamma > 0: -c eps^2 / gamma.
double fixed_point_G_leading(const MapParams& mp, GammaCase* which = nullptr);
/// Leading order refined by Newton on G(I) = I.
double fixed_point_G(const MapParams& mp);

struct SecondLyapunovFit {
    double c = 0.0;
    double mu = 1.0;      // fitted or fixed
    double gamma = 0.0;   // fitted or fixed
    double rms_residual = 0.0;
    double condition = 0.0;
    bool ill_conditioned = false;
    std::size_t n_used = 0;
};

struct SecondLyapunovOptions {
    /// Fit mu and gamma alongside c instead of holding them at the given values.
    bool fit_affine = false;
    double mu = 1.0;
    /// Samples with I = eps^2 / rho^2 above this are not used.
    double max_scaled_I = 1e300;
};

/// Least squares for c in (I_{k+1} - I_k) / (-2 eps^2 omega) = mu I + gamma + eps^2 c / I
/// on scaled I = eps^2 * (1/rho^2). Flags an ill-conditioned fit when the 1/I column
/// carries no independent information (samples never reach the boundary layer).
SecondLyapunovFit fit_second_lyapunov(const ReturnMapData& samples, double alpha, double gamma,
                                      double epsilon, double omega,
                                      const SecondLyapunovOptions& opt = {});

}  // namespace hopfscope::asymptotics
