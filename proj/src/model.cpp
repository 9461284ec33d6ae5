#include "hopfscope/model.hpp"

#include "hopfscope/errors.hpp"

#include <cmath>
#include <complex>
#include <optional>
#include <string>

namespace hopfscope::model {

namespace {

struct Spectrum {
    double real_eig;
    std::complex<double> pair;  // Im > 0
    Eigen::Vector3d real_vec;
    Eigen::Vector3cd pair_vec;
};

std::optional<Spectrum> spectrum(double nu) {
    const Mat3 A = jacobian_origin(nu);
    Eigen::EigenSolver<Mat3> es(A);
    if (es.info() != Eigen::Success) return std::nullopt;
    const auto& ev = es.eigenvalues();
    const double scale = std::max(1.0, A.norm());
    int ic = -1;
    int ir = -1;
    for (int i = 0; i < 3; ++i) {
        if (ev[i].imag() > 1e-12 * scale) ic = i;
        else if (std::abs(ev[i].imag()) <= 1e-12 * scale) ir = i;
    }
    if (ic < 0 || ir < 0) return std::nullopt;
    Spectrum s;
    s.real_eig = ev[ir].real();
    s.pair = ev[ic];
    s.real_vec = es.eigenvectors().col(ir).real();
    s.pair_vec = es.eigenvectors().col(ic);
    return s;
}

Spectrum spectrum_or_throw(double nu) {
    auto s = spectrum(nu);
    if (!s) {
        throw NumericalError("jacobian at nu=" + std::to_string(nu) +
                             " has no complex eigenvalue pair");
    }
    return *s;
}

}  // namespace

KineticParams::KineticParams(double nu_, double p_) : nu(nu_), p(p_) {
    if (!(nu > 0.0)) throw DomainError("kinetic parameter nu must be positive");
    if (!(p > 0.0)) throw DomainError("kinetic exponent p must be positive");
}

double kinetic(double v, double p) {
    if (!(v < 1.0)) throw DomainError("kinetic function is singular for v >= 1");
    if (!(p > 0.0)) throw DomainError("kinetic exponent p must be positive");
    const double u = 1.0 - v;
    return (std::pow(u, p) - 1.0 / u) / (p + 1.0);
}

double kinetic_deriv(double v, double p) {
    if (!(v < 1.0)) throw DomainError("kinetic function is singular for v >= 1");
    if (!(p > 0.0)) throw DomainError("kinetic exponent p must be positive");
    const double u = 1.0 - v;
    return (-p * std::pow(u, p - 1.0) - 1.0 / (u * u)) / (p + 1.0);
}

Vec3 rhs_original(const OriginalState& s, const KineticParams& kp) {
    const double k = kinetic(s.v1, kp.p);
    const double kd = kinetic_deriv(s.v1, kp.p);
    if (kd == 0.0) throw DomainError("k'(v1) vanishes");
    const double v1sq = s.v1 * s.v1;
    Vec3 out;
    out[0] = (3.0 * (s.v3 + s.v2 - s.v1) - kp.nu * k - v1sq) / (kp.nu * kd);
    out[1] = s.v3 - s.v1;
    out[2] = 9.0 * (s.v1 - s.v3) - 6.0 * s.v2 + kp.nu * (s.v1 + 1.0) * k + 2.0 * v1sq;
    return out;
}

Mat3 jacobian_origin(double nu) {
    if (nu == 0.0) throw DomainError("jacobian_origin: nu must be nonzero");
    Mat3 A;
    A << (3.0 - nu) / nu, -3.0 / nu, -3.0 / nu,
         -1.0, 0.0, 1.0,
         9.0 - nu, -6.0, -9.0;
    return A;
}

double alpha_of_nu(double nu) { return spectrum_or_throw(nu).pair.real(); }

double beta_of_nu(double nu) { return spectrum_or_throw(nu).pair.imag(); }

HopfPoint find_hopf_nu() {
    constexpr double lo = 0.2;
    constexpr double hi = 0.5;
    constexpr int n_grid = 60;

    std::optional<double> prev_nu;
    double prev_a = 0.0;
    double a_lo = 0.0;
    double b_lo = 0.0;
    bool found = false;
    for (int i = 0; i <= n_grid && !found; ++i) {
        const double nu = lo + (hi - lo) * i / n_grid;
        const auto s = spectrum(nu);
        if (!s) {
            prev_nu.reset();
            continue;
        }
        const double a = s->pair.real();
        if (prev_nu && ((prev_a <= 0.0) != (a <= 0.0))) {
            a_lo = *prev_nu;
            b_lo = nu;
            found = true;
        }
        prev_nu = nu;
        prev_a = a;
    }
    if (!found) throw NumericalError("find_hopf_nu: no sign change of Re(lambda) in [0.2, 0.5]");

    double fa = alpha_of_nu(a_lo);
    for (int it = 0; it < 200 && b_lo - a_lo > 1e-15; ++it) {
        const double mid = 0.5 * (a_lo + b_lo);
        const double fm = alpha_of_nu(mid);
        if ((fm <= 0.0) == (fa <= 0.0)) {
            a_lo = mid;
            fa = fm;
        } else {
            b_lo = mid;
        }
    }
    HopfPoint hp;
    hp.nu = 0.5 * (a_lo + b_lo);
    const auto s = spectrum_or_throw(hp.nu);
    hp.beta = s.pair.imag();
    hp.real_eig = s.real_eig;
    const double d = 1e-5;
    hp.transversality = (alpha_of_nu(hp.nu + d) - alpha_of_nu(hp.nu - d)) / (2.0 * d);
    if (std::abs(hp.transversality) < 0.1) {
        throw NumericalError("find_hopf_nu: eigenvalue crossing is not transversal");
    }
    return hp;
}

double nu_of_alpha(double alpha) {
    static const double nu_ah = find_hopf_nu().nu;
    auto g = [alpha](double nu) { return alpha_of_nu(nu) - alpha; };

    double nu = nu_ah;
    for (int it = 0; it < 50; ++it) {
        const double gv = g(nu);
        if (std::abs(gv) < 1e-14) return nu;
        const double d = 1e-6 * std::max(1.0, std::abs(nu));
        const double slope = (g(nu + d) - g(nu - d)) / (2.0 * d);
        if (slope == 0.0 || !std::isfinite(slope)) break;
        const double next = nu - gv / slope;
        if (!(next > 0.2 && next < 0.5)) break;
        if (std::abs(next - nu) < 1e-15) return next;
        nu = next;
    }

    // bisection fallback on the bracket used for the Hopf point; a is decreasing there
    double lo = 0.25;
    double hi = 0.5;
    double glo = g(lo);
    if ((glo > 0.0) == (g(hi) > 0.0)) {
        throw NumericalError("nu_of_alpha: alpha=" + std::to_string(alpha) + " outside local range");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if ((gm > 0.0) == (glo > 0.0)) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

Mat3 LinearData::block() const {
    Mat3 B = Mat3::Zero();
    B(0, 0) = real_eig;
    B(1, 1) = alpha;
    B(1, 2) = -beta;
    B(2, 1) = beta;
    B(2, 2) = alpha;
    return B;
}

LinearData normal_transform(double nu) {
    const auto s = spectrum(nu);
    if (!s) throw NumericalError("normal_transform: complex pair collides with the real axis");

    Eigen::Vector3d vs = s->real_vec.normalized();
    for (int i = 0; i < 3; ++i) {
        if (std::abs(vs[i]) > 1e-14) {
            if (vs[i] < 0.0) vs = -vs;
            break;
        }
    }

    Eigen::Vector3cd q = s->pair_vec;
    int lead = 0;
    while (lead < 3 && std::abs(q[lead]) < 1e-14) ++lead;
    if (lead == 3) throw NumericalError("normal_transform: zero eigenvector");
    q *= std::polar(1.0, -std::arg(q[lead]));
    q /= q.real().norm();

    LinearData ld;
    ld.nu = nu;
    ld.alpha = s->pair.real();
    ld.beta = s->pair.imag();
    ld.real_eig = s->real_eig;
    ld.T.col(0) = vs;
    ld.T.col(1) = q.real();
    ld.T.col(2) = -q.imag();
    ld.T_inv = ld.T.inverse();
    return ld;
}

NormalField::NormalField(double alpha, double p)
    : lin_(normal_transform(nu_of_alpha(alpha))), kp_(lin_.nu, p), block_(lin_.block()) {}

Vec3 NormalField::operator()(const Vec3& x) const {
    const Vec3 v = lin_.T * x;
    return lin_.T_inv * rhs_original(OriginalState::from(v), kp_);
}

Vec3 NormalField::nonlinear(const Vec3& x) const { return (*this)(x) - block_ * x; }

VectorField NormalField::as_field() const {
    return [self = *this](const Vec3& x) { return self(x); };
}

AxisDeviation stable_axis_deviation(const NormalField& field, double x1_lo, double x1_hi, int n) {
    AxisDeviation out;
    for (int i = 0; i < n; ++i) {
        const double x1 = x1_lo + (x1_hi - x1_lo) * i / std::max(1, n - 1);
        const Vec3 h = field.nonlinear(Vec3(x1, 0.0, 0.0));
        out.x1.push_back(x1);
        out.h2.push_back(h[1]);
        out.h3.push_back(h[2]);
        const double m = std::max(std::abs(h[1]), std::abs(h[2]));
        if (m > out.max_abs) {
            out.max_abs = m;
            out.argmax_x1 = x1;
        }
    }
    return out;
}

}  // namespace hopfscope::model
