#include "hopfscope/integrate.hpp"

#include "hopfscope/errors.hpp"
#include "hopfscope/format.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <ostream>
#include <sstream>

namespace hopfscope::integrate {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

bool finite(const Vec3& v) { return v.allFinite(); }

struct Crossing {
    bool found = false;
    bool rising = true;
    double t = 0.0;
    Vec3 x = Vec3::Zero();
};

// Illinois-modified regula falsi on the interpolant, bracket [ta, tb] with g(ta) g(tb) <= 0.
Crossing locate(const DenseSegment& seg, const EventSpec& ev, double ga, double gb, double tol) {
    Crossing c;
    const bool rising = ga < 0.0 && gb >= 0.0;
    const bool falling = ga > 0.0 && gb <= 0.0;
    if (!rising && !falling) return c;
    if (ev.direction == Direction::rising && !rising) return c;
    if (ev.direction == Direction::falling && !falling) return c;

    // work in the unit step fraction so backward segments need no special casing
    const double tol_s = tol / std::abs(seg.h);
    double sa = 0.0;
    double sb = (seg.t1() - seg.t0) / seg.h;
    double fa = ga;
    double fb = gb;
    int side = 0;
    for (int it = 0; it < 200 && (sb - sa) > tol_s; ++it) {
        double sm = (sa * fb - sb * fa) / (fb - fa);
        if (!(sm > sa && sm < sb)) sm = 0.5 * (sa + sb);
        const double fm = ev.g(seg.eval(seg.t0 + sm * seg.h));
        if (fm == 0.0) {
            sa = sb = sm;
            break;
        }
        if ((fm < 0.0) == (fa < 0.0)) {
            sa = sm;
            fa = fm;
            if (side == -1) fb *= 0.5;
            side = -1;
        } else {
            sb = sm;
            fb = fm;
            if (side == 1) fa *= 0.5;
            side = 1;
        }
    }
    c.t = seg.t0 + sb * seg.h;
    c.x = seg.eval(c.t);
    if (!ev.admissible(c.x)) return c;
    c.found = true;
    c.rising = rising;
    return c;
}

void scan_segment(const DenseSegment& seg, const std::vector<EventSpec>& events,
                  std::vector<double>& g_prev, double tol, std::vector<EventRecord>& out,
                  int& terminal_index) {
    const Vec3 x1 = seg.eval(seg.t1());
    std::vector<EventRecord> hits;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const double g1 = events[i].g(x1);
        const Crossing c = locate(seg, events[i], g_prev[i], g1, tol);
        g_prev[i] = g1;
        if (!c.found) continue;
        EventRecord r;
        r.t = c.t;
        r.spec = static_cast<int>(i);
        r.kind = events[i].name();
        r.x = c.x;
        r.rising = c.rising;
        hits.push_back(r);
    }
    std::stable_sort(hits.begin(), hits.end(),
                     [](const EventRecord& a, const EventRecord& b) { return a.t < b.t; });
    for (const auto& h : hits) {
        out.push_back(h);
        if (events[h.spec].terminal) {
            terminal_index = static_cast<int>(out.size()) - 1;
            return;
        }
    }
}

double rms_norm(const Vec3& err, const Vec3& y0, const Vec3& y1, const IntegratorConfig& cfg) {
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double sk = cfg.atol + cfg.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double q = err[i] / sk;
        acc += q * q;
    }
    return std::sqrt(acc / 3.0);
}

double initial_step(const VectorField& f, const Vec3& x0, const Vec3& k0, double dir,
                    const IntegratorConfig& cfg, std::size_t& evals) {
    Vec3 sk;
    for (int i = 0; i < 3; ++i) sk[i] = cfg.atol + cfg.rtol * std::abs(x0[i]);
    const double dnf = std::sqrt((k0.cwiseQuotient(sk)).squaredNorm() / 3.0);
    const double dny = std::sqrt((x0.cwiseQuotient(sk)).squaredNorm() / 3.0);
    double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * dny / dnf;
    h = std::min(h, cfg.max_step);
    const Vec3 k1 = f(x0 + dir * h * k0);
    ++evals;
    const double der2 = std::sqrt(((k1 - k0).cwiseQuotient(sk)).squaredNorm() / 3.0) / h;
    const double der12 = std::max(std::abs(der2), std::sqrt(dnf));
    const double h1 = der12 <= 1e-15 ? std::max(1e-6, std::abs(h) * 1e-3)
                                     : std::pow(0.01 / der12, 1.0 / 5.0);
    return std::min({100.0 * std::abs(h), h1, cfg.max_step});
}

}  // namespace

void IntegratorConfig::validate() const {
    if (!(atol > 0.0) || !(rtol > 0.0) || !(atol <= rtol) || !(rtol < 1.0)) {
        throw DomainError("IntegratorConfig: need 0 < atol <= rtol < 1");
    }
    if (!(max_step > 0.0)) throw DomainError("IntegratorConfig: max_step must be positive");
    if (!(max_time > 0.0)) throw DomainError("IntegratorConfig: max_time must be positive");
    if (record_stride == 0) throw DomainError("IntegratorConfig: record_stride must be >= 1");
}

EventSpec EventSpec::plane(int axis, double offset, Direction dir, bool terminal) {
    EventSpec e;
    e.kind = EventKind::plane;
    e.axis = axis;
    e.value = offset;
    e.direction = dir;
    e.terminal = terminal;
    return e;
}

EventSpec EventSpec::cylinder(double radius, double x1_lo, double x1_hi, Direction dir,
                              bool terminal) {
    EventSpec e;
    e.kind = EventKind::cylinder;
    e.value = radius;
    e.window_lo = x1_lo;
    e.window_hi = x1_hi;
    e.direction = dir;
    e.terminal = terminal;
    return e;
}

EventSpec EventSpec::angle(double theta, Direction dir, bool terminal) {
    EventSpec e;
    e.kind = EventKind::angle;
    e.value = theta;
    e.direction = dir;
    e.terminal = terminal;
    return e;
}

EventSpec EventSpec::norm(double radius, Direction dir, bool terminal) {
    EventSpec e;
    e.kind = EventKind::norm;
    e.value = radius;
    e.direction = dir;
    e.terminal = terminal;
    return e;
}

double EventSpec::g(const Vec3& x) const {
    switch (kind) {
        case EventKind::plane: return x[axis] - value;
        case EventKind::cylinder: return std::hypot(x[1], x[2]) - value;
        case EventKind::angle: return -std::sin(value) * x[1] + std::cos(value) * x[2];
        case EventKind::norm: return x.norm() - value;
    }
    return 0.0;
}

bool EventSpec::admissible(const Vec3& x) const {
    switch (kind) {
        case EventKind::cylinder: return x[0] >= window_lo && x[0] <= window_hi;
        case EventKind::angle: return std::cos(value) * x[1] + std::sin(value) * x[2] > 0.0;
        default: return true;
    }
}

std::string EventSpec::name() const {
    if (!label.empty()) return label;
    switch (kind) {
        case EventKind::plane: return "plane";
        case EventKind::cylinder: return "cylinder";
        case EventKind::angle: return "angle";
        case EventKind::norm: return "norm";
    }
    return "event";
}

void EventSpec::validate() const {
    if ((kind == EventKind::cylinder || kind == EventKind::norm) && !(value > 0.0)) {
        throw DomainError("EventSpec: radius must be positive");
    }
    if (kind == EventKind::plane && (axis < 0 || axis > 2)) {
        throw DomainError("EventSpec: plane axis must be 0, 1 or 2");
    }
    if (kind == EventKind::cylinder && !(window_lo <= window_hi)) {
        throw DomainError("EventSpec: empty cylinder window");
    }
}

Vec3 DenseSegment::eval(double t) const {
    const double s = (t - t0) / h;
    const double s1 = 1.0 - s;
    return r[0] + s * (r[1] + s1 * (r[2] + s * (r[3] + s1 * r[4])));
}

std::string to_string(Status s) {
    switch (s) {
        case Status::completed: return "completed";
        case Status::terminal_event: return "terminal_event";
        case Status::max_time_exceeded: return "max_time_exceeded";
        case Status::step_underflow: return "step_underflow";
        case Status::domain_error: return "domain_error";
        case Status::max_steps: return "max_steps";
    }
    return "unknown";
}

Vec3 Trajectory::at(double t) const {
    if (dense.empty()) throw DomainError("Trajectory::at: no dense output stored");
    const double lo = std::min(dense.front().t0, dense.back().t1());
    const double hi = std::max(dense.front().t0, dense.back().t1());
    if (t < lo || t > hi) throw DomainError("Trajectory::at: time outside the integrated span");
    const bool fwd = dense.front().h > 0.0;
    auto it = std::lower_bound(dense.begin(), dense.end(), t, [fwd](const DenseSegment& s, double v) {
        return fwd ? s.t1() < v : s.t1() > v;
    });
    if (it == dense.end()) it = std::prev(dense.end());
    return it->eval(t);
}

std::vector<EventRecord> Trajectory::events_of(int spec) const {
    std::vector<EventRecord> out;
    for (const auto& e : events) {
        if (e.spec == spec) out.push_back(e);
    }
    return out;
}

Trajectory integrate(const VectorField& f, const Vec3& x0, double t0, double t1,
                     const IntegratorConfig& cfg, const std::vector<EventSpec>& events,
                     const StepObserver& observer) {
    cfg.validate();
    for (const auto& e : events) e.validate();
    if (!std::isfinite(t0) || std::isnan(t1)) throw DomainError("integrate: invalid time span");
    if (!finite(x0)) throw DomainError("integrate: initial state not finite");

    Trajectory tr;
    tr.times.push_back(t0);
    tr.states.push_back(x0);
    if (t1 == t0) return tr;

    const double dir = t1 > t0 ? 1.0 : -1.0;
    double t_stop = t1;
    bool capped = false;
    if (std::abs(t1 - t0) > cfg.max_time) {
        t_stop = t0 + dir * cfg.max_time;
        capped = true;
    }

    Vec3 y = x0;
    double t = t0;
    Vec3 k1;
    try {
        k1 = f(y);
    } catch (const DomainError& e) {
        tr.status = Status::domain_error;
        tr.message = e.what();
        return tr;
    }
    ++tr.rhs_evals;

    double h = cfg.initial_step > 0.0 ? cfg.initial_step : initial_step(f, y, k1, dir, cfg, tr.rhs_evals);
    std::vector<double> g_prev(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) g_prev[i] = events[i].g(y);

    constexpr double safe = 0.9;
    constexpr double beta = 0.04;
    constexpr double expo1 = 0.2 - beta * 0.75;
    constexpr double facc1 = 1.0 / 0.2;
    constexpr double facc2 = 1.0 / 10.0;
    double facold = 1e-4;
    bool last_rejected = false;
    int domain_failures = 0;
    std::size_t since_domain = std::numeric_limits<std::size_t>::max();
    std::string domain_msg;
    std::size_t since_record = 0;

    while (true) {
        if (tr.accepted + tr.rejected >= cfg.max_steps) {
            tr.status = Status::max_steps;
            break;
        }
        const double remaining = std::abs(t_stop - t);
        if (remaining <= 1e-14 * std::max(1.0, std::abs(t))) {
            tr.status = capped ? Status::max_time_exceeded : Status::completed;
            break;
        }
        h = std::min({h, cfg.max_step, remaining});
        if (h < 1e-14 * std::max(1.0, std::abs(t))) {
            // squeezed against the edge of the field's domain
            if (since_domain < 200) {
                tr.status = Status::domain_error;
                tr.message = domain_msg;
                break;
            }
            tr.status = Status::step_underflow;
            std::ostringstream os;
            os << "step size underflow at t=" << t;
            tr.message = os.str();
            break;
        }
        if (since_domain != std::numeric_limits<std::size_t>::max()) ++since_domain;
        const double hs = dir * h;

        Vec3 k2, k3, k4, k5, k6, k7, y1;
        try {
            k2 = f(y + hs * (a21 * k1));
            k3 = f(y + hs * (a31 * k1 + a32 * k2));
            k4 = f(y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
            k5 = f(y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
            k6 = f(y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            y1 = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
            k7 = f(y1);
        } catch (const DomainError& e) {
            tr.rhs_evals += 6;
            since_domain = 0;
            domain_msg = e.what();
            if (++domain_failures > 40) {
                tr.status = Status::domain_error;
                tr.message = e.what();
                break;
            }
            h *= 0.25;
            ++tr.rejected;
            last_rejected = true;
            continue;
        }
        tr.rhs_evals += 6;

        const Vec3 errv = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double err = finite(y1) && finite(k7) ? rms_norm(errv, y, y1, cfg)
                                               : std::numeric_limits<double>::infinity();
        if (!std::isfinite(err)) {
            h *= 0.1;
            ++tr.rejected;
            last_rejected = true;
            continue;
        }
        const double fac11 = std::pow(err, expo1);
        if (err <= 1.0) {
            domain_failures = 0;
            double fac = fac11 / std::pow(facold, beta);
            fac = std::clamp(fac / safe, facc2, facc1);
            double hnew = h / fac;
            facold = std::max(err, 1e-4);

            DenseSegment seg;
            seg.t0 = t;
            seg.h = hs;
            const Vec3 ydiff = y1 - y;
            const Vec3 bspl = hs * k1 - ydiff;
            seg.r[0] = y;
            seg.r[1] = ydiff;
            seg.r[2] = bspl;
            seg.r[3] = ydiff - hs * k7 - bspl;
            seg.r[4] = hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);

            const bool at_end = h >= remaining;
            const double tn = at_end ? t_stop : t + hs;
            seg.t_end = tn;

            int terminal = -1;
            if (!events.empty()) {
                scan_segment(seg, events, g_prev, cfg.event_time_tol, tr.events, terminal);
                if (cfg.max_events > 0 && tr.events.size() >= cfg.max_events) {
                    tr.events.resize(cfg.max_events);
                    terminal = static_cast<int>(cfg.max_events) - 1;
                }
            }
            ++tr.accepted;
            if (terminal >= 0) {
                const EventRecord& ev = tr.events[terminal];
                seg.t_end = ev.t;
                if (observer) observer(seg);
                if (cfg.store_dense) tr.dense.push_back(seg);
                tr.times.push_back(ev.t);
                tr.states.push_back(ev.x);
                tr.status = Status::terminal_event;
                return tr;
            }
            if (observer) observer(seg);
            if (cfg.store_dense) tr.dense.push_back(seg);

            t = tn;
            y = y1;
            k1 = k7;
            if (++since_record >= cfg.record_stride) {
                tr.times.push_back(t);
                tr.states.push_back(y);
                since_record = 0;
            }
            if (last_rejected) hnew = std::min(hnew, h);
            last_rejected = false;
            h = hnew;
        } else {
            h /= std::min(facc1, fac11 / safe);
            ++tr.rejected;
            last_rejected = true;
        }
    }
    if (tr.times.back() != t) {
        tr.times.push_back(t);
        tr.states.push_back(y);
    }
    return tr;
}

std::vector<EventRecord> locate_events(const Trajectory& traj, const std::vector<EventSpec>& events,
                                       double time_tol) {
    if (traj.dense.empty()) throw DomainError("locate_events: trajectory has no dense output");
    std::vector<EventRecord> out;
    std::vector<double> g_prev(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) g_prev[i] = events[i].g(traj.dense.front().r[0]);
    for (const auto& seg : traj.dense) {
        int terminal = -1;
        scan_segment(seg, events, g_prev, time_tol, out, terminal);
        if (terminal >= 0) break;
    }
    return out;
}

namespace {

void put(std::ostream& os, double v) { write_double(os, v); }

}  // namespace

void write_csv(std::ostream& os, const Trajectory& traj) {
    os << "t,x1,x2,x3\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        put(os, traj.times[i]);
        for (int c = 0; c < 3; ++c) {
            os << ',';
            put(os, traj.states[i][c]);
        }
        os << '\n';
    }
}

void write_events_csv(std::ostream& os, const Trajectory& traj) {
    os << "t,kind,x1,x2,x3\n";
    for (const auto& e : traj.events) {
        put(os, e.t);
        os << ',' << e.kind;
        for (int c = 0; c < 3; ++c) {
            os << ',';
            put(os, e.x[c]);
        }
        os << '\n';
    }
}

double dominant_frequency(const std::vector<double>& samples, double dt) {
    const std::size_t n = samples.size();
    if (n < 8) throw DomainError("dominant_frequency: need at least 8 samples");
    if (!(dt > 0.0)) throw DomainError("dominant_frequency: dt must be positive");

    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : samples) var += (v - mean) * (v - mean);
    const double rms = std::sqrt(var / static_cast<double>(n));
    if (!(rms > 1e-13 * std::max(1.0, std::abs(mean)))) {
        throw NumericalError("dominant_frequency: flat signal");
    }

    std::vector<double> in(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n - 1));
        in[i] = w * (samples[i] - mean);
    }
    const std::size_t nc = n / 2 + 1;
    std::vector<fftw_complex> out(nc);
    {
        // the FFTW planner is not thread safe
        static std::mutex planner;
        std::lock_guard<std::mutex> lock(planner);
        fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(), FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }
    std::vector<double> mag(nc);
    for (std::size_t k = 0; k < nc; ++k) mag[k] = std::hypot(out[k][0], out[k][1]);

    std::size_t kmax = 1;
    for (std::size_t k = 2; k < nc; ++k) {
        if (mag[k] > mag[kmax]) kmax = k;
    }
    double total = 0.0;
    for (std::size_t k = 1; k < nc; ++k) total += mag[k];
    if (!(mag[kmax] > 1e-12 * total) || total == 0.0) {
        throw NumericalError("dominant_frequency: no spectral peak above the noise floor");
    }
    double shift = 0.0;
    if (kmax + 1 < nc) {
        const double a = mag[kmax - 1];
        const double b = mag[kmax];
        const double c = mag[kmax + 1];
        const double den = a - 2.0 * b + c;
        if (den != 0.0) shift = 0.5 * (a - c) / den;
    }
    return (static_cast<double>(kmax) + shift) / (static_cast<double>(n) * dt);
}

double dominant_frequencies(const Trajectory& traj, int component, double fraction, std::size_t n) {
    if (component < 0 || component > 2) throw DomainError("dominant_frequencies: component must be 0..2");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw DomainError("dominant_frequencies: fraction in (0, 1]");
    if (traj.dense.empty()) throw DomainError("dominant_frequencies: trajectory has no dense output");
    const double ta = traj.dense.front().t0;
    const double tb = traj.dense.back().t1();
    const double start = tb - fraction * (tb - ta);
    const double dt = (tb - start) / static_cast<double>(n);
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = traj.at(start + dt * static_cast<double>(i))[component];
    return dominant_frequency(s, dt);
}

}  // namespace hopfscope::integrate
