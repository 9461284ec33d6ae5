#pragma once

// Three-mode combustion model: vector field in original coordinates (v1, v2, v3),
// its linearization at the origin, the Hopf point and the linear change of
// coordinates that brings the Jacobian to block form diag(-1, [[a, -b], [b, a]]).

#include "hopfscope/linalg.hpp"

#include <vector>

namespace hopfscope::model {

struct KineticParams {
    double nu;
    double p;

    KineticParams(double nu_, double p_);
};

// v1: interface velocity; v2, v3: leading temperature-profile coefficients.
struct OriginalState {
    double v1 = 0.0;
    double v2 = 0.0;
    double v3 = 0.0;

    Vec3 vec() const { return {v1, v2, v3}; }
    static OriginalState from(const Vec3& v) { return {v[0], v[1], v[2]}; }
};

/// k(v) = ((1-v)^p - (1-v)^{-1}) / (p+1). Throws DomainError for v >= 1 or p <= 0.
double kinetic(double v, double p);
/// k'(v), closed form.
double kinetic_deriv(double v, double p);

/// Time derivative of the three-mode model. Throws DomainError if v1 >= 1 or k'(v1) = 0.
Vec3 rhs_original(const OriginalState& s, const KineticParams& kp);

/// Jacobian of rhs_original at the origin. Does not depend on p.
Mat3 jacobian_origin(double nu);

/// Real part of the complex eigenvalue pair of jacobian_origin(nu); NumericalError
/// when the spectrum has no genuine complex pair at this nu.
double alpha_of_nu(double nu);
/// Imaginary part (b > 0) of the complex pair.
double beta_of_nu(double nu);
/// Local inverse of alpha_of_nu around the Hopf point (Newton, bisection fallback).
double nu_of_alpha(double alpha);

struct HopfPoint {
    double nu = 0.0;
    double beta = 0.0;            // b(nu_AH)
    double real_eig = 0.0;        // the real (stable) eigenvalue at nu_AH
    double transversality = 0.0;  // a'(nu_AH), central difference
};

/// Root of a(nu) = 0 in [0.2, 0.5]; NumericalError if no sign change is found.
HopfPoint find_hopf_nu();

struct LinearData {
    double nu = 0.0;
    double alpha = 0.0;     // Re of the complex pair
    double beta = 0.0;      // b(alpha) > 0
    double real_eig = 0.0;  // negative real eigenvalue
    Mat3 T = Mat3::Identity();      // v = T x
    Mat3 T_inv = Mat3::Identity();  // x = T_inv v

    /// diag(real_eig, [[alpha, -beta], [beta, alpha]])
    Mat3 block() const;
};

/// Normalization: stable eigenvector has unit norm and positive first nonzero
/// component; the complex eigenvector q is rotated so q[0] is real positive and
/// scaled so |Re q| = 1. Columns of T are (v_s, Re q, -Im q).
LinearData normal_transform(double nu);

/// The model written in normal coordinates x = T^{-1} v, parametrized by
/// (alpha, p). Linear part at the origin is exactly LinearData::block().
class NormalField {
public:
    NormalField(double alpha, double p);

    Vec3 operator()(const Vec3& x) const;
    /// h(x) = f(x) - block * x
    Vec3 nonlinear(const Vec3& x) const;

    Vec3 to_original(const Vec3& x) const { return lin_.T * x; }
    Vec3 to_normal(const Vec3& v) const { return lin_.T_inv * v; }

    const LinearData& linear() const { return lin_; }
    double alpha() const { return lin_.alpha; }
    double p() const { return kp_.p; }
    double nu() const { return kp_.nu; }

    VectorField as_field() const;

private:
    LinearData lin_;
    KineticParams kp_;
    Mat3 block_;
};

/// How far the x1-axis is from being invariant: h2, h3 sampled along (x1, 0, 0).
struct AxisDeviation {
    std::vector<double> x1;
    std::vector<double> h2;
    std::vector<double> h3;
    double max_abs = 0.0;
    double argmax_x1 = 0.0;
};

AxisDeviation stable_axis_deviation(const NormalField& field, double x1_lo = -0.6,
                                    double x1_hi = 0.0, int n = 61);

}  // namespace hopfscope::model
