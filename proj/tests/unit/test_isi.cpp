#include <catch_amalgamated.hpp>

#include "hopfscope/asymptotics.hpp"
#include "hopfscope/errors.hpp"
#include "hopfscope/isi.hpp"

#include <cmath>
#include <sstream>

using namespace hopfscope;
using namespace hopfscope::isi;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// planar loop r = 0.3 + 0.28 cos(theta), theta' = 1
Vec3 loop_field(const Vec3& x) {
    const double r = std::hypot(x[1], x[2]);
    const double c = x[1] / r, s = x[2] / r;
    const double dr = -0.28 * s;
    return {-x[0], dr * c - r * s, dr * s + r * c};
}

integrate::EventRecord ev(int spec, double t) {
    integrate::EventRecord e;
    e.spec = spec;
    e.t = t;
    return e;
}

SpikeOptions options(bool strict = false) {
    SpikeOptions o;
    o.epsilon = std::sqrt(0.05);
    o.strict = strict;
    return o;
}

}  // namespace

TEST_CASE("spike train of a synthetic loop has period 2 pi", "[isi]") {
    const auto st = run_spike_train(loop_field, Vec3(0.0, 0.58, 0.0), 40.0, options());
    CHECK(st.multimodal);
    REQUIRE(st.spikes.size() == 6);
    CHECK_THAT(st.spikes[0], WithinAbs(1.5 * kPi, 1e-8));
    const auto s = isi_series(st);
    for (double t : s.tau) CHECK_THAT(t, WithinAbs(2.0 * kPi, 1e-8));
    CHECK_THAT(s.mean(), WithinAbs(2.0 * kPi, 1e-8));
    CHECK(s.cv() < 1e-8);
    REQUIRE(st.entries.size() >= 5);
    CHECK(st.entries[0] > st.spikes[0]);
    CHECK(st.entries[0] < st.spikes[1]);
}

TEST_CASE("hysteresis and strict spike detection", "[isi]") {
    const std::vector<integrate::EventRecord> events{ev(0, 1.0), ev(0, 2.0), ev(1, 3.0),
                                                     ev(0, 4.0), ev(1, 5.0), ev(0, 6.0)};
    const auto h = detect_multimodal(events, options());
    CHECK(h.multimodal);
    CHECK(h.spikes == std::vector<double>{1.0, 4.0, 6.0});
    CHECK(h.entries == std::vector<double>{3.0, 5.0});

    const auto s = detect_multimodal(events, options(true));
    CHECK_FALSE(s.multimodal);
    CHECK_FALSE(s.reason.empty());

    const auto none = detect_multimodal(std::vector<integrate::EventRecord>{ev(1, 1.0)}, options());
    CHECK_FALSE(none.multimodal);
    const auto no_entry = detect_multimodal(std::vector<integrate::EventRecord>{ev(0, 1.0)}, options());
    CHECK_FALSE(no_entry.multimodal);

    SpikeOptions bad = options();
    bad.r2 = 0.01;
    CHECK_THROWS_AS(spike_events(bad), DomainError);
}

TEST_CASE("ISI series, moments and bounds", "[isi]") {
    SpikeTrain st;
    st.spikes = {10.0, 110.0};
    const auto one = isi_series(st);
    REQUIRE(one.size() == 1);
    CHECK(one.tau[0] == 100.0);
    CHECK(one.t_spike[0] == 10.0);
    CHECK(one.mean(0) == 100.0);
    CHECK_THROWS_AS(one.mean(1), DomainError);

    st.spikes = {0.0, 1.0, 3.0, 6.0, 10.0};
    const auto s = isi_series(st);
    CHECK(s.mean(0) == 2.5);
    CHECK(s.mean() == 3.0);
    CHECK_THAT(s.stddev(), WithinAbs(1.0, 1e-15));
    CHECK_THAT(s.cv(), WithinAbs(1.0 / 3.0, 1e-15));

    asymptotics::IsiBounds b;
    b.tau_minus = 2.5;
    b.tau_plus = 3.5;
    const auto r = check_bounds(s, b);
    CHECK(r.n == 3);
    CHECK(r.inside == 1);
    CHECK(r.min_tau == 2.0);
    CHECK(r.max_tau == 4.0);

    st.spikes = {1.0};
    CHECK_THROWS_AS(isi_series(st), DomainError);
}

TEST_CASE("bound constants invert the bound formulas", "[isi]") {
    for (double chi : {0.0, 0.5}) {
        const double alpha = 0.05, gamma = 0.3, eps = 0.2;
        const auto b = asymptotics::isi_bounds(alpha, gamma, eps, 2.0, 5.0, chi);
        const auto bc = fit_bound_constants({IsiRun{alpha, gamma, eps, {b.tau_minus, b.tau_plus}}}, chi);
        CHECK_THAT(bc.C_minus, WithinRel(2.0, 1e-10));
        CHECK_THAT(bc.C_plus, WithinRel(5.0, 1e-10));
        CHECK(bc.chi == chi);
    }
    CHECK_THROWS_AS(fit_bound_constants({}), DomainError);
}

TEST_CASE("ISI scaling fits recover synthetic laws", "[isi]") {
    const double alpha = 0.045;
    std::vector<ScalingPoint> g;
    for (double gamma : {0.32, 0.01, 0.08, 0.02, 0.16, 0.04}) {
        g.push_back({gamma, 3.0 - std::log(gamma) / (2.0 * alpha)});
    }
    const auto fg = fit_isi_scaling(g, ScalingMode::vs_ln_gamma, alpha);
    CHECK_THAT(fg.slope, WithinRel(-1.0 / (2.0 * alpha), 1e-10));
    CHECK_THAT(fg.intercept, WithinAbs(3.0, 1e-9));
    CHECK(fg.relative_error < 1e-10);
    CHECK_THAT(fg.r2, WithinAbs(1.0, 1e-12));
    CHECK(fg.strictly_decreasing);
    CHECK(fg.warning.empty());

    std::vector<ScalingPoint> a;
    for (double al : {0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.1}) {
        a.push_back({al, std::log1p(8000.0 * al) / (2.0 * al)});
    }
    const auto fa = fit_isi_scaling(a, ScalingMode::vs_alpha);
    CHECK_THAT(fa.C_fit, WithinRel(8000.0, 1e-6));
    CHECK(fa.r2 > 0.999999);
    CHECK(fa.strictly_decreasing);
    CHECK_FALSE(fa.warning.empty());  // span 0.1 / 0.03 < 10

    CHECK_THROWS_AS(fit_isi_scaling({{0.1, 1.0}}, ScalingMode::vs_alpha), DomainError);
    CHECK_THROWS_AS(fit_isi_scaling(g, ScalingMode::vs_ln_gamma, 0.0), DomainError);
}

TEST_CASE("ISI CSV layout", "[isi]") {
    SpikeTrain st;
    st.spikes = {0.5, 2.0, 4.25};
    std::ostringstream os;
    write_isi_csv(os, isi_series(st));
    CHECK(os.str() == "i,t_spike,tau\n1,0.5,1.5\n2,2,2.25\n");
}
