#include "hopfscope/asymptotics.hpp"

#include "hopfscope/errors.hpp"
#include "hopfscope/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace hopfscope::asymptotics {

using taylor::Component;
using taylor::TaylorData;

namespace {

constexpr Component ca = Component::a;
constexpr Component cb = Component::b;
constexpr Component cc = Component::c;

void require_beta(const TaylorData& td) {
    if (!(td.beta > 0.0)) throw DomainError("asymptotics: beta must be positive");
}

}  // namespace

TrigPolys build_trig_polys(const TaylorData& td) {
    require_beta(td);
    const auto q = [&td](Component s, int i, int j) { return td.quad(s, i, j); };
    const auto k = [&td](Component s, int i, int j, int l) { return td.cubic(s, i, j, l); };
    TrigPolys t;
    t.P1 = TrigPoly::from_cos_sin_monomials({q(ca, 2, 2), q(ca, 2, 3), q(ca, 3, 3)});
    t.Q1 = TrigPoly::from_cos_sin_monomials(
        {q(cb, 2, 2), q(cb, 2, 3) + q(cc, 2, 2), q(cb, 3, 3) + q(cc, 2, 3), q(cc, 3, 3)});
    t.Q2 = TrigPoly::from_cos_sin_monomials({q(cb, 1, 2), q(cb, 1, 3) + q(cc, 1, 2), q(cc, 1, 3)});
    t.Q3 = TrigPoly::from_cos_sin_monomials({k(cb, 2, 2, 2), k(cb, 2, 2, 3) + k(cc, 2, 2, 2),
                                             k(cb, 2, 3, 3) + k(cc, 2, 2, 3),
                                             k(cb, 3, 3, 3) + k(cc, 2, 3, 3), k(cc, 3, 3, 3)});
    t.L1 = TrigPoly::from_cos_sin_monomials(
        {q(cc, 2, 2), q(cc, 2, 3) - q(cb, 2, 2), q(cc, 3, 3) - q(cb, 2, 3), -q(cb, 3, 3)});
    return t;
}

TrigPoly SlowManifoldConstants::U() const {
    TrigPoly u(a);
    if (phase) {
        u.set(2, A * std::cos(*phase), A * std::sin(*phase));
    }
    return u;
}

SlowManifoldConstants slow_manifold_constants(const TaylorData& td) {
    require_beta(td);
    const double a22 = td.quad(ca, 2, 2);
    const double a23 = td.quad(ca, 2, 3);
    const double a33 = td.quad(ca, 3, 3);
    const double b = td.beta;
    const double d = a22 - a33;
    SlowManifoldConstants s;
    s.beta = b;
    s.a = 0.5 * (a22 + a33);
    s.A = std::sqrt((a23 * a23 + d * d) / (4.0 * (1.0 + 4.0 * b * b)));
    if (s.A > 0.0) {
        s.vartheta = std::atan2(2.0 * b * a23 + d, a23 + 2.0 * b * d);
        s.phase = std::atan2(a23 + 2.0 * b * d, d - 2.0 * b * a23);
    }
    return s;
}

TrigPoly p1_poly(const TaylorData& td) {
    require_beta(td);
    const TrigPoly osc = build_trig_polys(td).P1.oscillating();
    // d/dphi = beta d/dtheta
    return (osc - osc.derivative() * td.beta) * (1.0 / (1.0 + 4.0 * td.beta * td.beta));
}

TrigPoly xi0_poly(const TaylorData& td) {
    const TrigPoly P1 = build_trig_polys(td).P1;
    return TrigPoly(P1.mean()) + p1_poly(td);
}

double xi0(double phi, const TaylorData& td) { return xi0_poly(td)(td.beta * phi); }

LyapunovReport lyapunov1_report(const TaylorData& td) {
    const TrigPolys t = build_trig_polys(td);
    const TrigPoly x0 = xi0_poly(td);
    LyapunovReport r;
    r.gamma_truncated = TrigPoly::mean_of_product(x0, t.Q2) + t.Q3.mean();
    r.gamma = r.gamma_truncated - TrigPoly::mean_of_product(t.Q1, t.L1) / td.beta;
    const TrigPoly integrand = x0 * t.Q2 + t.Q3 - t.Q1 * t.L1 * (1.0 / td.beta);
    r.gamma_quadrature = integrand.quadrature_mean(1024);
    return r;
}

double lyapunov1(const TaylorData& td) { return lyapunov1_report(td).gamma; }

TrigPoly HopfAsymptotics::U() const {
    TrigPoly u(a);
    if (phase) u.set(2, A * std::cos(*phase), A * std::sin(*phase));
    return u;
}

HopfAsymptotics hopf_asymptotics(const TaylorData& td) {
    const auto s = slow_manifold_constants(td);
    HopfAsymptotics h;
    h.beta = td.beta;
    h.gamma = lyapunov1(td);
    h.a = s.a;
    h.A = s.A;
    h.vartheta = s.vartheta;
    h.phase = s.phase;
    h.omega = 2.0 * kPi / td.beta;
    return h;
}

HopfAsymptotics hopf_asymptotics_for(double p) {
    const model::NormalField field(0.0, p);
    auto h = hopf_asymptotics(taylor::extract_taylor(field.as_field(), 0.0));
    h.p = p;
    return h;
}

double gamma_of_p(double p) {
    const model::NormalField field(0.0, p);
    return lyapunov1(taylor::extract_taylor(field.as_field(), 0.0));
}

Vec3 OrbitApprox::point(double theta) const {
    const double r2 = rho_bar * rho_bar;
    return {r2 * (a + A * std::cos(2.0 * theta - phase)), rho_bar * std::cos(theta),
            rho_bar * std::sin(theta)};
}

Vec3 OrbitApprox::derivative(double theta, int k) const {
    if (k < 1 || k > 3) throw DomainError("OrbitApprox::derivative: order must be 1..3");
    const double r2 = rho_bar * rho_bar;
    const double shift = 0.5 * kPi * k;
    return {r2 * A * std::pow(2.0, k) * std::cos(2.0 * theta - phase + shift),
            rho_bar * std::cos(theta + shift), rho_bar * std::sin(theta + shift)};
}

OrbitApprox orbit_approx(double alpha, const HopfAsymptotics& ha) {
    if (!(alpha * ha.gamma < 0.0)) {
        throw DomainError("orbit_approx: small cycle requires alpha * gamma < 0");
    }
    OrbitApprox o;
    o.rho_bar = std::sqrt(-alpha / ha.gamma);
    o.a = ha.a;
    o.A = ha.A;
    o.phase = ha.phase.value_or(0.0);
    return o;
}

CurvatureTorsion curvature_torsion(double theta, double A, double alpha, double gamma) {
    if (!(alpha * gamma < 0.0)) throw DomainError("curvature_torsion: requires alpha * gamma < 0");
    const double s = std::sqrt(-alpha / gamma);
    const double As2 = A * A * s * s;
    const double sin2 = std::sin(2.0 * theta);
    const double cross2 = 1.0 + 2.0 * As2 * (3.0 * std::cos(4.0 * theta) + 5.0);
    const double speed2 = 1.0 + 4.0 * As2 * sin2 * sin2;
    CurvatureTorsion ct;
    ct.curvature = std::sqrt(cross2) / (s * std::pow(speed2, 1.5));
    ct.torsion = 6.0 * A * sin2 / cross2;
    return ct;
}

CurvatureTorsion curvature_torsion_leading(double theta, double A, double alpha, double gamma) {
    if (!(alpha * gamma < 0.0)) throw DomainError("curvature_torsion: requires alpha * gamma < 0");
    const double den = 1.0 + 2.0 * A * A * (3.0 * std::cos(4.0 * theta) + 5.0);
    CurvatureTorsion ct;
    ct.curvature = std::sqrt(den);
    ct.torsion = (-gamma / alpha) * 6.0 * A * std::sin(2.0 * theta) / den;
    return ct;
}

CurvatureTorsion frenet_fd(const std::function<Vec3(double)>& curve, double s, double h) {
    if (!(h > 0.0)) throw DomainError("frenet_fd: step must be positive");
    const Vec3 m3 = curve(s - 3 * h), m2 = curve(s - 2 * h), m1 = curve(s - h), c0 = curve(s);
    const Vec3 p1 = curve(s + h), p2 = curve(s + 2 * h), p3 = curve(s + 3 * h);
    const Vec3 d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
    const Vec3 d2 = (-m2 + 16.0 * m1 - 30.0 * c0 + 16.0 * p1 - p2) / (12.0 * h * h);
    const Vec3 d3 = (m3 - 8.0 * m2 + 13.0 * m1 - 13.0 * p1 + 8.0 * p2 - p3) / (8.0 * h * h * h);
    const Vec3 b = d1.cross(d2);
    const double v = d1.norm();
    CurvatureTorsion ct;
    ct.curvature = b.norm() / (v * v * v);
    ct.torsion = b.squaredNorm() > 0.0 ? b.dot(d3) / b.squaredNorm() : 0.0;
    return ct;
}

double transit_time(double I0, double I_bar, double mu, double gamma, double epsilon) {
    if (!(I0 > 0.0) || !(I_bar > 0.0)) throw DomainError("transit_time: I levels must be positive");
    if (!(mu > 0.0) || !(epsilon > 0.0)) throw DomainError("transit_time: mu and epsilon must be positive");
    const double g = gamma / mu;
    const double ratio = (I0 + g) / (I_bar + g);
    if (!(ratio > 0.0) || !std::isfinite(ratio)) {
        throw DomainError("transit_time: logarithm argument must be positive");
    }
    return std::log(ratio) / (2.0 * mu * epsilon * epsilon);
}

IsiBounds isi_bounds(double alpha, double gamma, double epsilon, double C_minus, double C_plus,
                     double chi) {
    if (!(alpha > 0.0) || !(gamma > 0.0) || !(epsilon > 0.0)) {
        throw DomainError("isi_bounds: alpha, gamma and epsilon must be positive");
    }
    if (!(C_minus > 0.0) || !(C_plus > 0.0)) throw DomainError("isi_bounds: C+- must be positive");
    if (!(chi >= 0.0)) throw DomainError("isi_bounds: chi must be nonnegative");
    IsiBounds b;
    b.alpha = alpha;
    b.gamma = gamma;
    b.epsilon = epsilon;
    b.C_minus = C_minus;
    b.C_plus = C_plus;
    b.chi = chi;
    const double e4 = std::pow(epsilon, 4.0);
    b.tau_minus = std::log1p(alpha * C_minus / (gamma * e4)) / (2.0 * alpha);
    b.tau_plus = std::log1p(alpha * C_plus / (gamma * e4 * std::pow(epsilon, chi))) / (2.0 * alpha);
    return b;
}

double isi_bound_vs_alpha(double C_tilde, double alpha) {
    if (!(alpha > 0.0)) throw DomainError("isi_bound_vs_alpha: alpha must be positive");
    if (!(C_tilde * alpha > -1.0)) throw DomainError("isi_bound_vs_alpha: 1 + C alpha must be positive");
    return std::log1p(C_tilde * alpha) / (2.0 * alpha);
}

double isi_bound_vs_gamma(double C_bar, double alpha, double gamma) {
    if (!(alpha > 0.0) || !(gamma > 0.0)) {
        throw DomainError("isi_bound_vs_gamma: alpha and gamma must be positive");
    }
    return C_bar - std::log(gamma) / (2.0 * alpha);
}

double analytic_map_G(double I, const MapParams& mp) {
    if (I == 0.0) throw DomainError("analytic_map_G: I = 0");
    const double e2 = mp.epsilon * mp.epsilon;
    return I - 2.0 * e2 * mp.omega * (mp.mu * I + mp.gamma + e2 * mp.c / I);
}

double analytic_map_G_prime(double I, const MapParams& mp) {
    if (I == 0.0) throw DomainError("analytic_map_G_prime: I = 0");
    const double e2 = mp.epsilon * mp.epsilon;
    return 1.0 - 2.0 * e2 * mp.omega * (mp.mu - e2 * mp.c / (I * I));
}

double fixed_point_G_leading(const MapParams& mp, GammaCase* which) {
    if (!(mp.mu > 0.0)) throw DomainError("fixed_point_G: mu must be positive");
    const double e2 = mp.epsilon * mp.epsilon;
    GammaCase gc;
    double I;
    if (mp.gamma < 0.0) {
        gc = GammaCase::negative;
        I = -mp.gamma / mp.mu + mp.c / mp.gamma * e2;
    } else if (mp.gamma == 0.0) {
        gc = GammaCase::zero;
        if (!(mp.c < 0.0)) throw DomainError("fixed_point_G: gamma = 0 needs c < 0");
        I = std::sqrt(-mp.c / mp.mu) * mp.epsilon;
    } else {
        gc = GammaCase::positive;
        if (!(mp.c < 0.0)) throw DomainError("fixed_point_G: gamma > 0 needs c < 0");
        I = -mp.c * e2 / mp.gamma;
    }
    if (which) *which = gc;
    return I;
}

double fixed_point_G(const MapParams& mp) {
    double I = fixed_point_G_leading(mp);
    const double e2 = mp.epsilon * mp.epsilon;
    // G(I) = I  <=>  F(I) = mu I + gamma + eps^2 c / I = 0
    for (int it = 0; it < 100; ++it) {
        const double F = mp.mu * I + mp.gamma + e2 * mp.c / I;
        const double dF = mp.mu - e2 * mp.c / (I * I);
        if (dF == 0.0) break;
        double next = I - F / dF;
        if (!(next > 0.0)) next = 0.5 * I;
        if (std::abs(next - I) <= 1e-15 * std::abs(I)) {
            I = next;
            break;
        }
        I = next;
    }
    if (!(I > 0.0) || !std::isfinite(I)) throw NumericalError("fixed_point_G: Newton failed");
    return I;
}

SecondLyapunovFit fit_second_lyapunov(const ReturnMapData& samples, double alpha, double gamma,
                                      double epsilon, double omega,
                                      const SecondLyapunovOptions& opt) {
    if (!(alpha > 0.0) || !(epsilon > 0.0) || !(omega > 0.0)) {
        throw DomainError("fit_second_lyapunov: alpha, epsilon and omega must be positive");
    }
    const double e2 = epsilon * epsilon;
    std::vector<double> I;
    std::vector<double> y;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const double ik = e2 * samples.I_k[k];
        const double ik1 = e2 * samples.I_k1[k];
        if (!(ik > 0.0) || ik > opt.max_scaled_I) continue;
        I.push_back(ik);
        y.push_back((ik1 - ik) / (-2.0 * e2 * omega));
    }
    const int n = static_cast<int>(I.size());
    const int m = opt.fit_affine ? 3 : 1;
    if (n < m + 1) throw DomainError("fit_second_lyapunov: not enough samples");

    Eigen::MatrixXd X(n, m);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
        if (opt.fit_affine) {
            X(i, 0) = e2 / I[i];
            X(i, 1) = I[i];
            X(i, 2) = 1.0;
            rhs[i] = y[i];
        } else {
            X(i, 0) = e2 / I[i];
            rhs[i] = y[i] - opt.mu * I[i] - gamma;
        }
    }
    // column scaling before the SVD so the condition number reflects collinearity, not units
    Eigen::VectorXd scale = X.colwise().norm().transpose();
    for (int j = 0; j < m; ++j) {
        if (scale[j] == 0.0) scale[j] = 1.0;
    }
    const Eigen::MatrixXd Xs = X * scale.cwiseInverse().asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xs, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd beta_s = svd.solve(rhs);
    const Eigen::VectorXd coef = beta_s.cwiseQuotient(scale);
    const auto& sv = svd.singularValues();

    SecondLyapunovFit fit;
    fit.n_used = static_cast<std::size_t>(n);
    fit.c = coef[0];
    fit.mu = opt.fit_affine ? coef[1] : opt.mu;
    fit.gamma = opt.fit_affine ? coef[2] : gamma;
    fit.condition = sv[m - 1] > 0.0 ? sv[0] / sv[m - 1] : std::numeric_limits<double>::infinity();
    const Eigen::VectorXd res = rhs - X * coef;
    fit.rms_residual = std::sqrt(res.squaredNorm() / n);

    // standard error of c from the residual variance
    double t_stat = std::numeric_limits<double>::infinity();
    if (n > m) {
        const double s2 = res.squaredNorm() / (n - m);
        if (s2 > 0.0) {
            Eigen::MatrixXd cov = (Xs.transpose() * Xs).inverse() * s2;
            const double se = std::sqrt(cov(0, 0)) / scale[0];
            t_stat = std::abs(fit.c) / se;
        }
    }
    fit.ill_conditioned = !(fit.condition < 1e8) || !(t_stat > 3.0);
    return fit;
}

}  // namespace hopfscope::asymptotics
