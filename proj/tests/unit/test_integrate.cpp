#include <catch_amalgamated.hpp>

#include "hopfscope/errors.hpp"
#include "hopfscope/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace hopfscope;
using namespace hopfscope::integrate;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// x1' = -x1, rotation with rate w in (x2, x3)
VectorField decay_rotation(double w) {
    return [w](const Vec3& x) { return Vec3(-x[0], -w * x[2], w * x[1]); };
}

Vec3 decay_rotation_exact(const Vec3& x0, double w, double t) {
    const double c = std::cos(w * t), s = std::sin(w * t);
    return {x0[0] * std::exp(-t), c * x0[1] - s * x0[2], s * x0[1] + c * x0[2]};
}

}  // namespace

TEST_CASE("solution accuracy against the exact flow", "[integrate]") {
    const Vec3 x0(1.0, 0.5, -0.2);
    const auto traj = integrate::integrate(decay_rotation(2.0), x0, 0.0, 10.0);
    REQUIRE(traj.status == Status::completed);
    CHECK_THAT(traj.t_end(), WithinAbs(10.0, 1e-12));
    CHECK((traj.x_end() - decay_rotation_exact(x0, 2.0, 10.0)).norm() < 1e-8);
    CHECK(traj.accepted > 10);
}

TEST_CASE("dense output interpolates between steps", "[integrate]") {
    const Vec3 x0(1.0, 0.5, -0.2);
    IntegratorConfig cfg;
    cfg.rtol = 1e-9;
    cfg.atol = 1e-11;
    const auto traj = integrate::integrate(decay_rotation(1.3), x0, 0.0, 7.0, cfg);
    double worst = 0.0;
    for (int i = 0; i <= 700; ++i) {
        const double t = 0.01 * i;
        worst = std::max(worst, (traj.at(t) - decay_rotation_exact(x0, 1.3, t)).norm());
    }
    CHECK(worst < 1e-7);
    CHECK_THROWS(traj.at(8.0));
}

TEST_CASE("event location: planes, angles, norms", "[integrate]") {
    const Vec3 x0(0.0, 1.0, 0.0);
    const std::vector<EventSpec> ev{EventSpec::plane(1, 0.0, Direction::falling),
                                    EventSpec::angle(kPi / 2, Direction::rising),
                                    EventSpec::norm(0.5, Direction::falling)};
    const auto traj = integrate::integrate(
        [](const Vec3& x) { return Vec3(0.0, -x[2] - 0.01 * x[1], x[1] - 0.01 * x[2]); }, x0, 0.0, 100.0, {}, ev);
    const auto planes = traj.events_of(0);
    REQUIRE(planes.size() >= 10);
    // x2 = e^{-0.01 t} cos t falls through 0 at t = pi/2 + 2 pi k
    for (std::size_t k = 0; k < planes.size(); ++k) CHECK_THAT(planes[k].t, WithinAbs(kPi / 2 + 2 * kPi * k, 1e-9));
    const auto angles = traj.events_of(1);
    REQUIRE(!angles.empty());
    CHECK_THAT(angles[0].t, WithinAbs(kPi / 2, 1e-9));
    const auto norms = traj.events_of(2);
    REQUIRE(norms.size() == 1);
    // radial error of the integration divided by the decay rate 0.01
    CHECK_THAT(norms[0].t, WithinAbs(std::log(2.0) / 0.01, 1e-7));
    CHECK_FALSE(norms[0].rising);
}

TEST_CASE("angle events only fire on their own half-line", "[integrate]") {
    const auto traj = integrate::integrate(decay_rotation(1.0), Vec3(0.0, 1.0, 0.0), 0.0, 4 * kPi + 0.1, {},
                                           {EventSpec::angle(0.0, Direction::rising)});
    const auto ev = traj.events_of(0);
    REQUIRE(ev.size() == 2);
    CHECK_THAT(ev[0].t, WithinAbs(2 * kPi, 1e-9));
    CHECK(ev[0].x[1] > 0.0);
}

TEST_CASE("cylinder window and terminal events", "[integrate]") {
    const auto f = [](const Vec3& x) { return Vec3(1.0, 0.1 * x[1], 0.1 * x[2]); };
    const std::vector<EventSpec> ev{EventSpec::cylinder(2.0, 5.0, 100.0, Direction::rising),
                                    EventSpec::plane(0, 20.0, Direction::rising, true)};
    const auto traj = integrate::integrate(f, Vec3(0.0, 1.0, 0.0), 0.0, 100.0, {}, ev);
    CHECK(traj.status == Status::terminal_event);
    CHECK_THAT(traj.t_end(), WithinAbs(20.0, 1e-9));
    const auto cyl = traj.events_of(0);
    REQUIRE(cyl.size() == 1);
    CHECK_THAT(cyl[0].t, WithinRel(10.0 * std::log(2.0), 1e-9));
}

TEST_CASE("located events agree with the integrator log", "[integrate]") {
    const std::vector<EventSpec> ev{EventSpec::plane(2, 0.0, Direction::both)};
    const auto traj = integrate::integrate(decay_rotation(1.7), Vec3(1.0, 1.0, 0.0), 0.0, 20.0, {}, ev);
    const auto again = locate_events(traj, ev);
    REQUIRE(again.size() == traj.events.size());
    for (std::size_t i = 0; i < again.size(); ++i) CHECK_THAT(again[i].t, WithinAbs(traj.events[i].t, 1e-11));
}

TEST_CASE("stop conditions", "[integrate]") {
    IntegratorConfig cfg;
    cfg.max_time = 5.0;
    const auto a = integrate::integrate(decay_rotation(1.0), Vec3(1, 1, 1), 0.0, 10.0, cfg);
    CHECK(a.status == Status::max_time_exceeded);
    CHECK_FALSE(a.ok());

    IntegratorConfig c2;
    c2.max_events = 3;
    const auto b = integrate::integrate(decay_rotation(1.0), Vec3(1, 1, 0), 0.0, 100.0, c2,
                                        {EventSpec::plane(2, 0.0)});
    CHECK(b.events.size() == 3);
    CHECK(b.status == Status::terminal_event);

    const auto blowup = integrate::integrate([](const Vec3& x) { return Vec3(x[0] * x[0], 0, 0); },
                                             Vec3(1, 0, 0), 0.0, 2.0);
    CHECK_FALSE(blowup.ok());

    const auto dom = integrate::integrate(
        [](const Vec3& x) -> Vec3 {
            if (x[0] > 0.5) throw DomainError("outside");
            return Vec3(1, 0, 0);
        },
        Vec3(0, 0, 0), 0.0, 2.0);
    CHECK(dom.status == Status::domain_error);
}

TEST_CASE("step observer sees contiguous segments", "[integrate]") {
    double last = 0.0;
    bool contiguous = true;
    std::size_t n = 0;
    const auto traj = integrate::integrate(decay_rotation(1.0), Vec3(1, 1, 1), 0.0, 5.0, {}, {},
                                           [&](const DenseSegment& s) {
                                               contiguous = contiguous && std::abs(s.t0 - last) < 1e-15;
                                               last = s.t1();
                                               ++n;
                                           });
    CHECK(contiguous);
    CHECK(n == traj.accepted);
    CHECK_THAT(last, WithinAbs(5.0, 1e-12));
}

TEST_CASE("configuration validation", "[integrate]") {
    IntegratorConfig cfg;
    cfg.rtol = -1.0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    CHECK_THROWS_AS(EventSpec::norm(-1.0).validate(), DomainError);
}

TEST_CASE("dominant frequency of a sampled sinusoid", "[integrate]") {
    const double dt = 0.05;
    std::vector<double> s;
    for (int i = 0; i < 8192; ++i) s.push_back(std::sin(2 * kPi * 0.3137 * i * dt) + 0.2 * std::sin(2 * kPi * 1.1 * i * dt));
    CHECK_THAT(dominant_frequency(s, dt), WithinAbs(0.3137, 0.25 / (8192 * dt)));
    CHECK_THROWS_AS(dominant_frequency(std::vector<double>(64, 1.0), dt), NumericalError);

    const auto traj = integrate::integrate(decay_rotation(2.0), Vec3(0, 1, 0), 0.0, 200.0);
    CHECK_THAT(dominant_frequencies(traj, 1), WithinAbs(2.0 / (2 * kPi), 0.25 / 100.0));
}

TEST_CASE("CSV writers", "[integrate]") {
    IntegratorConfig cfg;
    cfg.record_stride = 1000000;
    const auto traj = integrate::integrate(decay_rotation(1.0), Vec3(1, 0, 0), 0.0, 1.0, cfg,
                                           {EventSpec::plane(0, 0.5, Direction::falling)});
    std::ostringstream a, b;
    write_csv(a, traj);
    write_events_csv(b, traj);
    const std::string sa = a.str(), sb = b.str();
    CHECK(sa.rfind("t,x1,x2,x3\n", 0) == 0);
    CHECK(std::count(sa.begin(), sa.end(), '\n') == static_cast<long>(traj.times.size()) + 1);
    CHECK(sb.rfind("t,kind,x1,x2,x3\n", 0) == 0);
    CHECK(std::count(sb.begin(), sb.end(), '\n') == 2);
}
