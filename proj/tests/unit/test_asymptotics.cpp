#include <catch_amalgamated.hpp>

#include "hopfscope/asymptotics.hpp"
#include "hopfscope/errors.hpp"
#include "hopfscope/experiments.hpp"
#include "hopfscope/model.hpp"
#include "hopfscope/taylor.hpp"

#include <cmath>
#include <complex>

using namespace hopfscope;
using namespace hopfscope::asymptotics;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

using cd = std::complex<double>;
using CVec = Eigen::Vector3cd;

// First Lyapunov coefficient through the projection formula on the critical eigenvectors,
// with all multilinear forms taken by finite differences of the field itself.
double radial_cubic_coefficient(double p) {
    const model::NormalField f(0.0, p);
    auto D2 = [&](const Vec3& u, const Vec3& v, double h) {
        return Vec3((f(h * (u + v)) - f(h * (u - v)) - f(h * (v - u)) + f(-h * (u + v))) / (4 * h * h));
    };
    auto B = [&](const Vec3& u, const Vec3& v) -> Vec3 {
        const double h = 2e-3;
        return (4.0 * D2(u, v, h / 2) - D2(u, v, h)) / 3.0;
    };
    auto T3 = [&](const Vec3& w, double h) {
        return Vec3((f(2 * h * w) - 2.0 * f(h * w) + 2.0 * f(-h * w) - f(-2 * h * w)) / (2 * h * h * h));
    };
    auto T = [&](const Vec3& w) -> Vec3 {
        const double h = 1e-2;
        return (4.0 * T3(w, h / 2) - T3(w, h)) / 3.0;
    };
    auto Cuuv = [&](const Vec3& u, const Vec3& v) -> Vec3 { return (T(u + v) - T(u - v) - 2.0 * T(v)) / 6.0; };
    auto Bc = [&](const CVec& u, const CVec& v) -> CVec {
        const Vec3 ur = u.real(), ui = u.imag(), vr = v.real(), vi = v.imag();
        const Vec3 re = B(ur, vr) - B(ui, vi);
        const Vec3 im = B(ur, vi) + B(ui, vr);
        return re.cast<cd>() + cd(0, 1) * im.cast<cd>();
    };

    Mat3 A;
    for (int c = 0; c < 3; ++c) {
        Vec3 e = Vec3::Zero();
        e[c] = 1e-6;
        A.col(c) = (f(e) - f(-e)) / 2e-6;
    }
    const double omega = A(2, 1);
    const Vec3 a(0, 1, 0), b(0, 0, -1);
    const CVec q = a.cast<cd>() + cd(0, 1) * b.cast<cd>();
    const CVec pv = q / 2.0;
    auto dot = [&](const CVec& v) { return pv.dot(v); };  // conjugate-linear in pv

    const CVec Bqqb = (B(a, a) + B(b, b)).cast<cd>();
    const CVec Bqq = (B(a, a) - B(b, b)).cast<cd>() + cd(0, 2) * B(a, b).cast<cd>();
    const CVec Cqqqb = (T(a) + Cuuv(b, a)).cast<cd>() + cd(0, 1) * (Cuuv(a, b) + T(b)).cast<cd>();

    const Eigen::Matrix3cd Ac = A.cast<cd>();
    const CVec s1 = Ac.lu().solve(Bqqb);
    const CVec s2 = (cd(0, 2 * omega) * Eigen::Matrix3cd::Identity() - Ac).lu().solve(Bqq);
    const cd bracket = dot(Cqqqb) - 2.0 * dot(Bc(q, s1)) + dot(Bc(q.conjugate(), s2));
    const double re_c1 = 0.5 * bracket.real();
    // (x2, x3) = (2 Re z, 2 Im z): rho = 2|z|
    return re_c1 / 4.0;
}

double rk4_radial_time(double alpha, double gamma, double rho0, double rho1) {
    // time for rho' = alpha rho + gamma rho^3 to go from rho0 to rho1, integrated in rho
    const int n = 200000;
    const double h = (rho1 - rho0) / n;
    auto g = [&](double r) { return 1.0 / (alpha * r + gamma * r * r * r); };
    double t = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = rho0 + h * i;
        t += h / 6.0 * (g(r) + 4.0 * g(r + 0.5 * h) + g(r + h));
    }
    return t;
}

Vec3 fd_derivative(const std::function<Vec3(double)>& c, double s, int k, double h) {
    switch (k) {
        case 1: return (c(s + h) - c(s - h)) / (2 * h);
        case 2: return (c(s + h) - 2.0 * c(s) + c(s - h)) / (h * h);
        default: return (c(s + 2 * h) - 2.0 * c(s + h) + 2.0 * c(s - h) - c(s - 2 * h)) / (2 * h * h * h);
    }
}

CurvatureTorsion frenet_second_order(const std::function<Vec3(double)>& c, double s) {
    // Richardson over two second-order step sizes
    auto at = [&](double h) {
        const Vec3 d1 = fd_derivative(c, s, 1, h), d2 = fd_derivative(c, s, 2, h), d3 = fd_derivative(c, s, 3, h);
        const Vec3 b = d1.cross(d2);
        return std::pair<double, double>{b.norm() / std::pow(d1.norm(), 3), b.dot(d3) / b.squaredNorm()};
    };
    const auto [k1, t1] = at(2e-3);
    const auto [k2, t2] = at(1e-3);
    return {(4 * k2 - k1) / 3, (4 * t2 - t1) / 3};
}

}  // namespace

TEST_CASE("gamma matches the eigenvector projection formula", "[asymptotics]") {
    for (double p : {0.5, 1.0, 2.2, 3.0}) {
        const double oracle = radial_cubic_coefficient(p);
        const double g = gamma_of_p(p);
        INFO("p = " << p << " oracle " << oracle << " gamma " << g);
        CHECK_THAT(g, WithinAbs(oracle, 1e-6 * std::max(1.0, std::abs(oracle))));
    }
}

TEST_CASE("gamma: Fourier and quadrature routes agree, zeros bracket", "[asymptotics]") {
    for (double p : {0.3, 1.6, 2.75, 3.2}) {
        const model::NormalField f(0.0, p);
        const auto rep = lyapunov1_report(taylor::extract_taylor(f.as_field()));
        CHECK_THAT(rep.gamma_quadrature, WithinAbs(rep.gamma, 1e-12));
    }
    CHECK(gamma_of_p(0.29) > 0.0);
    CHECK(gamma_of_p(0.39) < 0.0);
    CHECK(gamma_of_p(2.68) < 0.0);
    CHECK(gamma_of_p(2.78) > 0.0);
}

TEST_CASE("slow manifold shape solves the x1 balance", "[asymptotics]") {
    for (double p : {2.2, 3.0}) {
        const model::NormalField f(0.0, p);
        const auto td = taylor::extract_taylor(f.as_field());
        const auto tp = build_trig_polys(td);
        const auto smc = slow_manifold_constants(td);
        const TrigPoly U = smc.U();
        const TrigPoly dU = U.derivative();
        for (int i = 0; i < 64; ++i) {
            const double th = 2 * kPi * i / 64;
            CHECK_THAT(td.beta * dU(th) + U(th), WithinAbs(tp.P1(th), 1e-12));
        }
        CHECK(smc.A >= 0.0);
        REQUIRE(smc.phase.has_value());
    }
}

TEST_CASE("slow manifold residual shrinks with the amplitude", "[asymptotics]") {
    const auto r = experiments::slow_manifold_residual(2.2, {4e-3, 1e-3}, 30.0, 80.0);
    REQUIRE(r.ratios.size() == 1);
    CHECK(r.ratios[0] > 2.0);
}

TEST_CASE("leading-order cycle radius", "[asymptotics]") {
    const auto ha = hopf_asymptotics_for(2.2);
    const auto orb = orbit_approx(1e-3, ha);
    CHECK_THAT(orb.rho_bar, WithinRel(std::sqrt(1e-3 / -ha.gamma), 1e-14));
    CHECK_THROWS_AS(orbit_approx(-1e-3, ha), DomainError);
    const Vec3 x = orb.point(0.3);
    CHECK_THAT(std::hypot(x[1], x[2]), WithinRel(orb.rho_bar, 1e-14));
    for (int k = 1; k <= 3; ++k) {
        const Vec3 fd = fd_derivative([&](double s) { return orb.point(s); }, 0.3, k, 1e-3);
        CHECK((orb.derivative(0.3, k) - fd).norm() < 1e-5 * std::max(1.0, fd.norm()));
    }
}

TEST_CASE("closed-form curvature and torsion match finite differences", "[asymptotics]") {
    const double alpha = 1e-3, gamma = -0.56, A = 0.7;
    const double rho = std::sqrt(-alpha / gamma);
    auto curve = [&](double t) {
        return Vec3(rho * rho * (0.2 + A * std::cos(2 * t)), rho * std::cos(t), rho * std::sin(t));
    };
    for (int i = 0; i < 24; ++i) {
        const double th = 2 * kPi * i / 24 + 0.01;
        const auto ex = curvature_torsion(th, A, alpha, gamma);
        const auto fd = frenet_second_order(curve, th);
        CHECK_THAT(ex.curvature, WithinRel(fd.curvature, 1e-6));
        CHECK_THAT(ex.torsion, WithinAbs(fd.torsion, 1e-6 * std::max(1.0, std::abs(fd.torsion))));
        const auto mirror = curvature_torsion(-th, A, alpha, gamma);
        CHECK_THAT(mirror.torsion, WithinAbs(-ex.torsion, 1e-12 * std::abs(ex.torsion) + 1e-300));
        CHECK(curvature_torsion(th, 0.0, alpha, gamma).torsion == 0.0);
        CHECK_THAT(curvature_torsion(th, 0.0, alpha, gamma).curvature, WithinRel(1.0 / rho, 1e-12));
    }
}

TEST_CASE("leading forms are the tabulated expressions", "[asymptotics]") {
    const double th = 0.4, A = 0.3, alpha = 2e-3, gamma = -0.5;
    const auto ct = curvature_torsion_leading(th, A, alpha, gamma);
    const double den = 1 + 2 * A * A * (3 * std::cos(4 * th) + 5);
    CHECK_THAT(ct.curvature, WithinRel(std::sqrt(den), 1e-15));
    CHECK_THAT(ct.torsion, WithinRel((-gamma / alpha) * 6 * A * std::sin(2 * th) / den, 1e-15));
    CHECK_THROWS_AS(curvature_torsion_leading(th, A, alpha, 0.5), DomainError);
}

TEST_CASE("finite-difference Frenet on a helix", "[asymptotics]") {
    const double r = 0.7, c = 0.3;
    auto helix = [&](double t) { return Vec3(r * std::cos(t), r * std::sin(t), c * t); };
    const auto ct = frenet_fd(helix, 0.9);
    CHECK_THAT(ct.curvature, WithinRel(r / (r * r + c * c), 1e-8));
    CHECK_THAT(ct.torsion, WithinRel(c / (r * r + c * c), 1e-8));
}

TEST_CASE("transit time equals the time of flight of the radial equation", "[asymptotics]") {
    for (double gamma : {-0.3, 0.2, 0.8}) {
        const double eps = 0.1, mu = 1.0, I0 = 3.0, Ib = 1.0;
        const double alpha = eps * eps * mu;
        const double oracle = rk4_radial_time(alpha, gamma, eps / std::sqrt(I0), eps / std::sqrt(Ib));
        CHECK_THAT(transit_time(I0, Ib, mu, gamma, eps), WithinRel(oracle, 1e-9));
    }
    CHECK_THROWS_AS(transit_time(-1.0, 1.0, 1.0, 0.1, 0.1), DomainError);
    CHECK_THROWS_AS(transit_time(3.0, 1.0, 1.0, -2.0, 0.1), DomainError);
}

TEST_CASE("ISI bound templates", "[asymptotics]") {
    const double alpha = 0.04, gamma = 0.5, eps = 0.2;
    const auto b = isi_bounds(alpha, gamma, eps, 2.0, 3.0, 0.5);
    CHECK_THAT(b.tau_minus, WithinRel(std::log(1 + alpha * 2.0 / (gamma * std::pow(eps, 4))) / (2 * alpha), 1e-14));
    CHECK_THAT(b.tau_plus, WithinRel(std::log(1 + alpha * 3.0 / (gamma * std::pow(eps, 4.5))) / (2 * alpha), 1e-14));
    CHECK(b.tau_plus > b.tau_minus);
    CHECK_THAT(isi_bound_vs_alpha(50.0, 0.1), WithinRel(std::log(6.0) / 0.2, 1e-14));
    CHECK_THAT(isi_bound_vs_gamma(3.0, 0.05, 0.5), WithinRel(3.0 - std::log(0.5) / 0.1, 1e-14));
    CHECK_THROWS_AS(isi_bounds(alpha, -gamma, eps, 2.0, 3.0), DomainError);
}

TEST_CASE("fixed points of the cycle map by sign of gamma", "[asymptotics]") {
    MapParams mp;
    mp.mu = 1.0;
    mp.c = -2.0;
    mp.epsilon = 0.05;
    mp.omega = 2 * kPi / std::sqrt(3.0);
    const double e2 = mp.epsilon * mp.epsilon;
    for (double gamma : {-0.3, 0.0, 0.3}) {
        mp.gamma = gamma;
        GammaCase which;
        const double lead = fixed_point_G_leading(mp, &which);
        const double exact = fixed_point_G(mp);
        CHECK_THAT(analytic_map_G(exact, mp), WithinRel(exact, 1e-12));
        // exact root of mu I^2 + gamma I + eps^2 c = 0
        const double root = (-gamma + std::sqrt(gamma * gamma - 4 * mp.mu * e2 * mp.c)) / (2 * mp.mu);
        CHECK_THAT(exact, WithinRel(root, 1e-12));
        if (gamma < 0) {
            CHECK(which == GammaCase::negative);
            CHECK_THAT(lead, WithinAbs(root, 2 * mp.mu * mp.c * mp.c * e2 * e2 / std::pow(std::abs(gamma), 3)));
        } else if (gamma == 0) {
            CHECK(which == GammaCase::zero);
            CHECK_THAT(lead, WithinRel(root, 1e-14));
        } else {
            CHECK(which == GammaCase::positive);
            CHECK_THAT(lead, WithinAbs(root, 2 * mp.mu * mp.c * mp.c * e2 * e2 / std::pow(std::abs(gamma), 3)));
        }
    }
    mp.gamma = 0.1;
    const double I = 0.37, h = 1e-6;
    CHECK_THAT(analytic_map_G_prime(I, mp),
               WithinRel((analytic_map_G(I + h, mp) - analytic_map_G(I - h, mp)) / (2 * h), 1e-8));
}

TEST_CASE("second Lyapunov fit recovers c from exact map data", "[asymptotics]") {
    const double alpha = 0.0445, eps = std::sqrt(alpha), omega = 2 * kPi / std::sqrt(3.0);
    MapParams mp{1.0, -0.05, -3.0, eps, omega};
    ReturnMapData d;
    for (int i = 0; i < 40; ++i) {
        const double J = 0.05 + 0.02 * i;
        d.push(J / (eps * eps), analytic_map_G(J, mp) / (eps * eps), i);
    }
    const auto fit = fit_second_lyapunov(d, alpha, mp.gamma, eps, omega);
    CHECK_THAT(fit.c, WithinRel(-3.0, 1e-9));
    CHECK(fit.rms_residual < 1e-10);

    SecondLyapunovOptions so;
    so.fit_affine = true;
    const auto aff = fit_second_lyapunov(d, alpha, 0.0, eps, omega, so);
    CHECK_THAT(aff.c, WithinRel(-3.0, 1e-8));
    CHECK_THAT(aff.mu, WithinRel(1.0, 1e-9));
    CHECK_THAT(aff.gamma, WithinRel(-0.05, 1e-8));
}

TEST_CASE("measured transit time converges to the prediction as alpha shrinks", "[asymptotics]") {
    const auto a = experiments::transit_experiment(0.005, 3.0);
    const auto b = experiments::transit_experiment(0.01, 3.0);
    const double ea = std::abs(a.measured / a.predicted - 1.0);
    const double eb = std::abs(b.measured / b.predicted - 1.0);
    INFO("rel err " << ea << " at 0.005, " << eb << " at 0.01");
    CHECK(ea < eb);
    CHECK(ea < 0.05);
}
