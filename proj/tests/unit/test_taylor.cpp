#include <catch_amalgamated.hpp>

#include "hopfscope/errors.hpp"
#include "hopfscope/model.hpp"
#include "hopfscope/taylor.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

using namespace hopfscope;
using taylor::Component;
using Catch::Matchers::WithinAbs;

namespace {

constexpr Component kComp[] = {Component::a, Component::b, Component::c};

// Random cubic field with known ordered-monomial coefficients.
struct CubicField {
    taylor::TaylorData td;
    explicit CubicField(unsigned seed) {
        std::mt19937 rng(seed);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        td.linear << -1.0, 0.3, 0.0, 0.1, 0.0, -1.5, 0.0, 1.5, 0.0;
        td.beta = 1.5;
        for (auto s : kComp) {
            for (int i = 1; i <= 3; ++i)
                for (int j = i; j <= 3; ++j) td.set_quad(s, i, j, u(rng));
            for (int i = 1; i <= 3; ++i)
                for (int j = i; j <= 3; ++j)
                    for (int k = j; k <= 3; ++k) td.set_cubic(s, i, j, k, u(rng));
        }
    }
    Vec3 operator()(const Vec3& x) const {
        Vec3 f = td.linear * x;
        for (int c = 0; c < 3; ++c) {
            for (int i = 1; i <= 3; ++i)
                for (int j = i; j <= 3; ++j) f[c] += td.quad(kComp[c], i, j) * x[i - 1] * x[j - 1];
            for (int i = 1; i <= 3; ++i)
                for (int j = i; j <= 3; ++j)
                    for (int k = j; k <= 3; ++k)
                        f[c] += td.cubic(kComp[c], i, j, k) * x[i - 1] * x[j - 1] * x[k - 1];
        }
        return f;
    }
};

struct Monomial {
    std::vector<int> idx;  // 1-based, nondecreasing
};

std::vector<Monomial> monomials(int degree) {
    std::vector<Monomial> out;
    std::vector<int> cur;
    std::function<void(int)> rec = [&](int start) {
        if (static_cast<int>(cur.size()) == degree) {
            out.push_back({cur});
            return;
        }
        for (int i = start; i <= 3; ++i) {
            cur.push_back(i);
            rec(i);
            cur.pop_back();
        }
    };
    rec(1);
    return out;
}

}  // namespace

TEST_CASE("index order is normalized", "[taylor]") {
    taylor::TaylorData td;
    td.set_quad(Component::b, 2, 1, 4.0);
    CHECK(td.quad(Component::b, 1, 2) == 4.0);
    td.set_cubic(Component::c, 3, 1, 2, -2.0);
    CHECK(td.cubic(Component::c, 1, 2, 3) == -2.0);
    CHECK(td.cubic(Component::c, 2, 3, 1) == -2.0);
}

TEST_CASE("extraction recovers the coefficients of a cubic polynomial field", "[taylor]") {
    const CubicField poly(7);
    taylor::ExtractOptions opt;
    opt.verify = false;
    const auto td = taylor::extract_taylor(poly, 0.0, opt);
    CHECK((td.linear - poly.td.linear).cwiseAbs().maxCoeff() < 1e-9);
    for (auto s : kComp) {
        for (int i = 1; i <= 3; ++i)
            for (int j = i; j <= 3; ++j) CHECK_THAT(td.quad(s, i, j), WithinAbs(poly.td.quad(s, i, j), 1e-7));
        for (int i = 1; i <= 3; ++i)
            for (int j = i; j <= 3; ++j)
                for (int k = j; k <= 3; ++k)
                    CHECK_THAT(td.cubic(s, i, j, k), WithinAbs(poly.td.cubic(s, i, j, k), 1e-5));
    }
    CHECK_THAT(td.beta, WithinAbs(1.5, 1e-9));
    const auto chk = taylor::check_reconstruction(poly, td);
    CHECK(chk.max_residual[0] < 1e-8);
}

TEST_CASE("extraction agrees with a least-squares polynomial fit of the combustion field", "[taylor]") {
    const model::NormalField field(0.0, 3.0);
    const auto td = taylor::extract_taylor(field.as_field(), 0.0);

    // degree-6 least squares on a small ball, independent of the stencil route
    std::vector<Monomial> basis;
    for (int d = 1; d <= 6; ++d) {
        for (auto& m : monomials(d)) basis.push_back(m);
    }
    const int n = 2000;
    const double r = 0.03;
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-r, r);
    Eigen::MatrixXd A(n, static_cast<int>(basis.size()));
    Eigen::MatrixXd Y(n, 3);
    for (int row = 0; row < n; ++row) {
        const Vec3 x(u(rng), u(rng), u(rng));
        for (std::size_t b = 0; b < basis.size(); ++b) {
            double v = 1.0;
            for (int i : basis[b].idx) v *= x[i - 1];
            A(row, static_cast<int>(b)) = v;
        }
        Y.row(row) = field(x).transpose();
    }
    const Eigen::MatrixXd coef = A.colPivHouseholderQr().solve(Y);
    for (std::size_t b = 0; b < basis.size(); ++b) {
        const auto& idx = basis[b].idx;
        for (int c = 0; c < 3; ++c) {
            const double ls = coef(static_cast<int>(b), c);
            if (idx.size() == 1) {
                CHECK_THAT(td.linear(c, idx[0] - 1), WithinAbs(ls, 1e-8));
            } else if (idx.size() == 2) {
                CHECK_THAT(td.quad(kComp[c], idx[0], idx[1]), WithinAbs(ls, 1e-6 * std::max(1.0, std::abs(ls))));
            } else if (idx.size() == 3) {
                CHECK_THAT(td.cubic(kComp[c], idx[0], idx[1], idx[2]),
                           WithinAbs(ls, 2e-3 * std::max(1.0, std::abs(ls))));
            }
        }
    }
}

TEST_CASE("reconstruction residual of the combustion field scales like r^4", "[taylor]") {
    for (double p : {0.5, 2.2, 3.0}) {
        const model::NormalField field(0.0, p);
        const auto td = taylor::extract_taylor(field.as_field(), 0.0);
        const auto chk = taylor::check_reconstruction(field.as_field(), td);
        CHECK_FALSE(chk.exact);
        CHECK(chk.exponent > 3.5);
        CHECK(chk.exponent < 4.5);
    }
}

TEST_CASE("eval reproduces the polynomial", "[taylor]") {
    const CubicField poly(3);
    const Vec3 x(0.2, -0.1, 0.3);
    CHECK((poly.td.eval(x) - poly(x)).norm() < 1e-14);
}

TEST_CASE("invalid step is rejected", "[taylor]") {
    taylor::ExtractOptions opt;
    opt.h = 0.0;
    CHECK_THROWS_AS(taylor::extract_taylor(CubicField(1), 0.0, opt), DomainError);
}
