#include <catch_amalgamated.hpp>

#include "hopfscope/errors.hpp"
#include "hopfscope/model.hpp"

#include <cmath>
#include <complex>

using namespace hopfscope;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::complex<double> char_poly(const Mat3& J, std::complex<double> lambda) {
    Eigen::Matrix3cd M = J.cast<std::complex<double>>();
    for (int i = 0; i < 3; ++i) M(i, i) -= lambda;
    return M.determinant();
}

Mat3 fd_jacobian(const model::NormalField& f, const Vec3& x, double h = 1e-6) {
    Mat3 J;
    for (int c = 0; c < 3; ++c) {
        Vec3 e = Vec3::Zero();
        e[c] = h;
        J.col(c) = (f(x + e) - f(x - e)) / (2.0 * h);
    }
    return J;
}

}  // namespace

TEST_CASE("kinetic function and derivative", "[model]") {
    CHECK(model::kinetic(0.0, 3.0) == 0.0);
    for (double p : {0.5, 2.2, 3.0}) {
        for (double v : {-0.4, -0.1, 0.2, 0.6}) {
            const double h = 1e-6;
            const double fd = (model::kinetic(v + h, p) - model::kinetic(v - h, p)) / (2 * h);
            CHECK_THAT(model::kinetic_deriv(v, p), WithinRel(fd, 1e-7));
        }
    }
    CHECK_THROWS_AS(model::kinetic(1.0, 2.0), DomainError);
    CHECK_THROWS_AS(model::kinetic(0.1, 0.0), DomainError);
}

TEST_CASE("Hopf point: characteristic polynomial vanishes on {-1, +-i sqrt3}", "[model]") {
    const auto hp = model::find_hopf_nu();
    CHECK_THAT(hp.nu, WithinAbs(1.0 / 3.0, 1e-12));
    CHECK_THAT(hp.beta, WithinAbs(std::sqrt(3.0), 1e-10));
    CHECK_THAT(hp.real_eig, WithinAbs(-1.0, 1e-10));
    CHECK(hp.transversality != 0.0);
    const Mat3 J = model::jacobian_origin(1.0 / 3.0);
    CHECK(std::abs(char_poly(J, {-1.0, 0.0})) < 1e-12);
    CHECK(std::abs(char_poly(J, {0.0, std::sqrt(3.0)})) < 1e-12);
    CHECK(std::abs(char_poly(J, {0.0, -std::sqrt(3.0)})) < 1e-12);
    CHECK(std::abs(char_poly(J, {0.0, 0.0})) > 1.0);
}

TEST_CASE("real eigenvalue stays at -1 along the alpha family", "[model]") {
    for (double alpha : {-0.05, -0.01, 0.0, 0.01, 0.0445, 0.1}) {
        const auto lin = model::normal_transform(model::nu_of_alpha(alpha));
        CHECK_THAT(lin.real_eig, WithinAbs(-1.0, 1e-9));
        CHECK_THAT(lin.alpha, WithinAbs(alpha, 1e-10));
        CHECK_THAT(model::alpha_of_nu(model::nu_of_alpha(alpha)), WithinAbs(alpha, 1e-12));
    }
}

TEST_CASE("normal coordinates block-diagonalize the linear part", "[model]") {
    for (double alpha : {0.0, 0.02, -0.03}) {
        const model::NormalField f(alpha, 2.2);
        const Mat3 J = fd_jacobian(f, Vec3::Zero());
        const Mat3 B = f.linear().block();
        CHECK((J - B).cwiseAbs().maxCoeff() < 1e-7);
        CHECK_THAT(B(0, 0), WithinAbs(-1.0, 1e-9));
        CHECK_THAT(B(1, 1), WithinAbs(alpha, 1e-10));
        CHECK_THAT(B(2, 1), WithinAbs(f.linear().beta, 0.0));
        CHECK(f(Vec3::Zero()).norm() < 1e-15);

        const Vec3 x(0.03, -0.02, 0.05);
        CHECK((f.to_normal(f.to_original(x)) - x).norm() < 1e-14);
        CHECK((f.nonlinear(x) - (f(x) - B * x)).norm() < 1e-15);
        // same field as the original model after the change of coordinates
        const model::KineticParams kp(f.nu(), f.p());
        const Vec3 v = f.to_original(x);
        const Vec3 dv = model::rhs_original(model::OriginalState::from(v), kp);
        CHECK((f.to_normal(dv) - f(x)).norm() < 1e-13);
    }
}

TEST_CASE("eigenvector normalization", "[model]") {
    const auto lin = model::normal_transform(1.0 / 3.0);
    const Vec3 vs = lin.T.col(0);
    CHECK_THAT(vs.norm(), WithinAbs(1.0, 1e-12));
    CHECK(vs[0] > 0.0);
    CHECK((lin.T * lin.T_inv - Mat3::Identity()).norm() < 1e-12);
}

TEST_CASE("model domain errors", "[model]") {
    const model::KineticParams kp(1.0 / 3.0, 2.0);
    CHECK_THROWS_AS(model::rhs_original({1.5, 0.0, 0.0}, kp), DomainError);
}

TEST_CASE("stable axis deviation is sampled on the requested grid", "[model]") {
    const model::NormalField f(0.0, 3.0);
    const auto d = model::stable_axis_deviation(f, -0.6, 0.0, 31);
    REQUIRE(d.x1.size() == 31);
    CHECK(d.x1.front() == -0.6);
    CHECK(d.x1.back() == 0.0);
    CHECK(std::abs(d.h2.back()) < 1e-15);
    CHECK(d.max_abs >= 0.0);
}
