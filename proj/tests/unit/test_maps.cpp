#include <catch_amalgamated.hpp>

#include "hopfscope/asymptotics.hpp"
#include "hopfscope/errors.hpp"
#include "hopfscope/maps.hpp"

#include <Eigen/Eigenvalues>

#include <atomic>
#include <cmath>
#include <random>
#include <stdexcept>

using namespace hopfscope;
using namespace hopfscope::maps;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> logistic_orbit(double r, double x0, int skip, int n) {
    double x = x0;
    for (int i = 0; i < skip; ++i) x = r * x * (1.0 - x);
    std::vector<double> s;
    for (int i = 0; i < n; ++i) {
        s.push_back(x);
        x = r * x * (1.0 - x);
    }
    return s;
}

asymptotics::MapParams g_params(double gamma) {
    asymptotics::MapParams mp;
    mp.mu = 1.0;
    mp.gamma = gamma;
    mp.c = -3.0;
    mp.epsilon = std::sqrt(0.0445);
    mp.omega = 2.0 * kPi / std::sqrt(3.0);
    return mp;
}

SweepPoint point(double param, OrbitKind kind, int period) {
    SweepPoint pt;
    pt.param = param;
    pt.cls.kind = kind;
    pt.cls.period = period;
    return pt;
}

}  // namespace

TEST_CASE("symmetric 2x2 eigenvalues match Eigen", "[maps]") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int t = 0; t < 50; ++t) {
        Eigen::Matrix2d m;
        m(0, 0) = u(rng);
        m(1, 1) = u(rng);
        m(0, 1) = m(1, 0) = u(rng);
        const auto ev = sym2_eigenvalues(m);
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> ref(m);
        CHECK_THAT(ev.lambda1, WithinAbs(ref.eigenvalues()[0], 1e-12));
        CHECK_THAT(ev.lambda2, WithinAbs(ref.eigenvalues()[1], 1e-12));
    }
}

TEST_CASE("logistic map: period two and ln 2 exponent", "[maps]") {
    const auto f32 = [](double x) { return 3.2 * x * (1.0 - x); };
    const auto d32 = [](double x) { return 3.2 * (1.0 - 2.0 * x); };
    const auto p2 = classify_orbit(f32, d32, 0.3, 2000, 500);
    CHECK(p2.kind == OrbitKind::periodic);
    CHECK(p2.period == 2);
    CHECK(p2.map_lyapunov < 0.0);

    const auto f4 = [](double x) { return 4.0 * x * (1.0 - x); };
    const auto d4 = [](double x) { return 4.0 * (1.0 - 2.0 * x); };
    ClassifyOptions opt;
    opt.domain_lo = 0.0;
    opt.domain_hi = 1.0;
    const auto ch = classify_orbit(f4, d4, 0.2345, 1000, 100000, opt);
    CHECK(ch.kind == OrbitKind::chaotic);
    CHECK_THAT(ch.map_lyapunov, WithinRel(std::log(2.0), 0.05));
    CHECK(ch.ci_lo > 0.0);
    CHECK(ch.ci_lo <= ch.map_lyapunov);
    CHECK(ch.map_lyapunov <= ch.ci_hi);
}

TEST_CASE("sequence classifier on logistic orbits", "[maps]") {
    const auto p2 = classify_orbit(logistic_orbit(3.2, 0.3, 2000, 300));
    CHECK(p2.kind == OrbitKind::periodic);
    CHECK(p2.period == 2);
    const auto p4 = classify_orbit(logistic_orbit(3.5, 0.3, 4000, 300));
    CHECK(p4.period == 4);
    const auto fx = classify_orbit(logistic_orbit(2.8, 0.3, 2000, 300));
    CHECK(fx.kind == OrbitKind::fixed);
    const auto ch = classify_orbit(logistic_orbit(4.0, 0.2345, 100, 4000));
    CHECK(ch.kind == OrbitKind::chaotic);
    CHECK_THAT(ch.map_lyapunov, WithinRel(std::log(2.0), 0.15));

    ClassifyOptions opt;
    opt.domain_hi = 1.0;
    CHECK(classify_orbit(std::vector<double>{0.5, 2.0, 0.5}, opt).kind == OrbitKind::escaped);
}

TEST_CASE("period detection", "[maps]") {
    CHECK(detect_period(std::vector<double>(40, 1.5), 1e-9, 8, 10) == 1);
    std::vector<double> alt;
    for (int i = 0; i < 40; ++i) alt.push_back(i % 3 == 0 ? 1.0 : (i % 3 == 1 ? 2.0 : 3.0));
    CHECK(detect_period(alt, 1e-9, 8, 10) == 3);
    CHECK(detect_period(logistic_orbit(4.0, 0.2345, 10, 200), 1e-6, 16, 20) == 0);
}

TEST_CASE("bootstrap interval is deterministic and brackets the mean", "[maps]") {
    std::mt19937 rng(1);
    std::normal_distribution<double> nd(2.0, 1.0);
    std::vector<double> v(500);
    for (auto& x : v) x = nd(rng);
    const auto a = bootstrap_mean_ci(v, 500, 42);
    const auto b = bootstrap_mean_ci(v, 500, 42);
    CHECK(a == b);
    double m = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    CHECK(a.first < m);
    CHECK(m < a.second);
    // roughly +-1.96 / sqrt(n)
    CHECK_THAT(a.second - a.first, WithinRel(2 * 1.96 / std::sqrt(500.0), 0.25));
    const auto c = bootstrap_mean_ci(std::vector<double>(10, 3.0), 100, 1, 3);
    CHECK(c.first == 3.0);
    CHECK(c.second == 3.0);
    CHECK_THROWS_AS(bootstrap_mean_ci({}, 10, 1), DomainError);
}

TEST_CASE("multivalued return-map detection", "[maps]") {
    ReturnMapData two, one;
    for (int i = 0; i < 400; ++i) {
        const double x = 0.01 * i;
        two.push(x, x + (i % 2 == 0 ? 0.0 : 1.0), i);
        one.push(x, x * x, i);
    }
    CHECK(detect_multivalued(two));
    CHECK_FALSE(detect_multivalued(one));
}

TEST_CASE("branch slopes of the analytic cycle map", "[maps]") {
    const auto mp = g_params(-0.0126);
    ReturnMapData d;
    for (int i = 0; i < 400; ++i) {
        const double I = 0.01 * std::pow(500.0, i / 399.0);
        d.push(I, asymptotics::analytic_map_G(I, mp), i);
    }
    const auto bs = branch_slopes(d);
    CHECK(bs.inner_slope < 0.0);
    // outer regression slope lies between the extreme derivatives on its range
    const double g_lo = asymptotics::analytic_map_G_prime(bs.outer_lo, mp);
    const double g_hi = asymptotics::analytic_map_G_prime(bs.outer_hi, mp);
    CHECK(bs.outer_slope >= std::min(g_lo, g_hi) - 1e-12);
    CHECK(bs.outer_slope <= std::max(g_lo, g_hi) + 1e-12);
    const double asymptote = 1.0 - 2.0 * mp.epsilon * mp.epsilon * mp.omega * mp.mu;
    CHECK_THAT(bs.outer_slope, WithinRel(asymptote, 0.10));
    CHECK(bs.n_inner + bs.n_outer <= d.size());
    CHECK(bs.outer_r2 > 0.99);
    CHECK_THROWS_AS(branch_slopes(ReturnMapData{}), DomainError);
}

TEST_CASE("sweep grids", "[maps]") {
    const auto g = sweep_grid(2.6, 2.8, 5);
    REQUIRE(g.size() == 5);
    CHECK(g.front() == 2.6);
    CHECK(g.back() == 2.8);
    CHECK_THAT(g[2], WithinAbs(2.7, 1e-15));
    CHECK(sweep_grid(1.0, 2.0, 1) == std::vector<double>{1.0});
    CHECK(sweep_grid(1.0, 2.0, 0).empty());
}

TEST_CASE("p_for_gamma inverts gamma on the upper branch", "[maps]") {
    for (double g : {-0.05, -0.0126, 0.0, 0.01, 0.2}) {
        const double p = p_for_gamma(g);
        CHECK(p > 2.0);
        // gamma_of_p carries finite-difference noise near 1e-8
        CHECK_THAT(asymptotics::gamma_of_p(p), WithinAbs(g, 1e-6));
    }
}

TEST_CASE("sweep summary finds cascades and chaos", "[maps]") {
    SweepResult r;
    r.points = {point(0.0, OrbitKind::fixed, 1),    point(0.1, OrbitKind::fixed, 1),
                point(0.2, OrbitKind::periodic, 2), point(0.3, OrbitKind::periodic, 2),
                point(0.4, OrbitKind::periodic, 4), point(0.5, OrbitKind::periodic, 8),
                point(0.6, OrbitKind::chaotic, 0),  point(0.7, OrbitKind::periodic, 3)};
    summarize_sweep(r);
    CHECK(r.longest_cascade == 3);
    CHECK(r.doublings.size() == 3);
    CHECK(r.chaotic_window);
    CHECK(r.doublings[0].from == 1);
    CHECK(r.doublings[0].param_before == 0.1);
    CHECK(r.doublings[0].param_after == 0.2);

    SweepResult flat;
    flat.points = {point(0.0, OrbitKind::fixed, 1), point(1.0, OrbitKind::unresolved, 0)};
    summarize_sweep(flat);
    CHECK(flat.longest_cascade == 0);
    CHECK_FALSE(flat.chaotic_window);
}

TEST_CASE("parallel_for covers each index once and rethrows", "[maps]") {
    for (int jobs : {1, 3}) {
        std::vector<std::atomic<int>> hits(101);
        parallel_for(hits.size(), jobs, [&](std::size_t i) { hits[i]++; });
        bool once = true;
        for (auto& h : hits) once = once && h.load() == 1;
        CHECK(once);
        CHECK_THROWS_AS(parallel_for(10, jobs,
                                     [](std::size_t i) {
                                         if (i == 7) throw std::runtime_error("boom");
                                     }),
                        std::runtime_error);
    }
}

TEST_CASE("return map of a linear focus contracts geometrically", "[maps]") {
    const double alpha = 0.01, beta = 1.7;
    const VectorField focus = [=](const Vec3& x) {
        return Vec3(-x[0], alpha * x[1] - beta * x[2], beta * x[1] + alpha * x[2]);
    };
    ReturnMapOptions opt;
    opt.theta_bar = 0.3;
    opt.n_transient = 2;
    opt.n_samples = 20;
    opt.seeds = {Vec3(0.1, 0.05, 0.0)};
    const auto res = first_return_map(focus, opt);
    REQUIRE(res.data.size() >= 19);
    const double factor = std::exp(-4.0 * kPi * alpha / beta);
    for (std::size_t k = 0; k < res.data.size(); ++k) {
        CHECK_THAT(res.data.I_k1[k] / res.data.I_k[k], WithinRel(factor, 1e-8));
        if (k > 0) CHECK_THAT(res.data.t_k[k] - res.data.t_k[k - 1], WithinRel(2.0 * kPi / beta, 1e-9));
    }
    CHECK(res.phase_gaps_ok);
    CHECK_FALSE(res.data.multivalued);
    CHECK(res.data.theta_bar == 0.3);
}

TEST_CASE("flow map from the entry cylinder reaches every plane", "[maps]") {
    SectionGeometry geo;
    geo.planes = {-0.65, -0.45};
    const auto s = flow_map_Q(3, 4, 0.045, 3.0, geo);
    REQUIRE(s.size() == 12);
    for (const auto& q : s) {
        CHECK(q.ok);
        CHECK(q.ends.size() == 2);
        CHECK_THAT(std::hypot(q.start[1], q.start[2]), WithinAbs(geo.rho, 1e-14));
    }
    const auto st = image_stats(s, geo);
    REQUIRE(st.size() == 2);
    CHECK(st[0].n == 12);
    CHECK(st[0].diameter > st[1].diameter);
}
