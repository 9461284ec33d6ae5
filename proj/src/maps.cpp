#include "hopfscope/maps.hpp"

#include "hopfscope/errors.hpp"
#include "hopfscope/model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <thread>

namespace hopfscope::maps {

using integrate::Direction;
using integrate::EventSpec;
using integrate::Status;
using integrate::Trajectory;

namespace {

double wrap_pi(double a) {
    a = std::fmod(a + kPi, 2.0 * kPi);
    if (a < 0.0) a += 2.0 * kPi;
    return a - kPi;
}

double polar_angle(const Vec3& x) { return std::atan2(x[2], x[1]); }

double rho2(const Vec3& x) { return x[1] * x[1] + x[2] * x[2]; }

// Unwrapped polar angle at the start of every accepted step.
struct PhaseTrack {
    std::vector<double> t0;
    std::vector<double> phi0;
    std::vector<double> th0;
    double phi = 0.0;
    double last = 0.0;
    bool started = false;

    void observe(const integrate::DenseSegment& seg) {
        const double th_start = polar_angle(seg.r[0]);
        if (!started) {
            phi = th_start;
            started = true;
        } else {
            phi += wrap_pi(th_start - last);
        }
        t0.push_back(seg.t0);
        phi0.push_back(phi);
        th0.push_back(th_start);
        last = th_start;
    }

    double phase_at(double t, double theta) const {
        auto it = std::upper_bound(t0.begin(), t0.end(), t);
        std::size_t k = it == t0.begin() ? 0 : static_cast<std::size_t>(it - t0.begin()) - 1;
        return phi0[k] + wrap_pi(theta - th0[k]);
    }
};

// gamma(p) increases for p above this value; its minimum sits near p = 1.6
constexpr double kUpperBranchStart = 1.7;

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t m = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + m, v.end());
    double hi = v[m];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + m);
    return 0.5 * (lo + hi);
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    LineFit f;
    const std::size_t n = x.size();
    if (n < 2) return f;
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

}  // namespace

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& f) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next++; i < n; i = next++) f(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

// ---------------------------------------------------------------- flow map

Vec3 cylinder_point(double rho, double x1, double theta) {
    return {x1, rho * std::cos(theta), rho * std::sin(theta)};
}

std::vector<FlowMapSample> flow_map_Q(const VectorField& field, int ni, int nj,
                                      const SectionGeometry& geo, const IntegratorConfig& cfg,
                                      int jobs) {
    if (ni < 1 || nj < 1) throw DomainError("flow_map_Q: mesh must be at least 1x1");
    if (!(geo.rho > 0.0)) throw DomainError("flow_map_Q: rho must be positive");
    if (geo.planes.empty()) throw DomainError("flow_map_Q: no exit plane");
    if (!(geo.x1_lo <= geo.x1_hi)) throw DomainError("flow_map_Q: empty x1 range");
    std::vector<double> planes = geo.planes;
    for (std::size_t k = 1; k < planes.size(); ++k) {
        if (!(planes[k] > planes[k - 1])) throw DomainError("flow_map_Q: planes must increase toward the origin");
    }
    if (!(planes.back() < geo.x1_lo)) throw DomainError("flow_map_Q: planes must lie left of the entry section");

    std::vector<FlowMapSample> out(static_cast<std::size_t>(ni) * nj);
    parallel_for(out.size(), jobs, [&](std::size_t idx) {
        FlowMapSample s;
        s.i = static_cast<int>(idx) / nj;
        s.j = static_cast<int>(idx) % nj;
        s.x1_start = ni == 1 ? 0.5 * (geo.x1_lo + geo.x1_hi)
                             : geo.x1_lo + (geo.x1_hi - geo.x1_lo) * s.i / (ni - 1);
        s.theta_start = geo.theta_offset + 2.0 * kPi * s.j / nj;
        s.start = cylinder_point(geo.rho, s.x1_start, s.theta_start);

        IntegratorConfig c = cfg;
        c.store_dense = false;
        c.record_stride = 1u << 30;
        c.max_time = geo.max_flight_time;
        // leave the entry region: first crossing of the outer plane going left
        const auto out1 = integrate::integrate(field, s.start, 0.0, geo.max_flight_time, c,
                                               {EventSpec::plane(0, planes.front(), Direction::falling, true)});
        if (out1.status != Status::terminal_event) {
            s.status = "no_departure:" + integrate::to_string(out1.status);
            out[idx] = s;
            return;
        }
        std::vector<EventSpec> ev;
        for (std::size_t k = 0; k < planes.size(); ++k) {
            ev.push_back(EventSpec::plane(0, planes[k], Direction::rising, k + 1 == planes.size()));
        }
        const double t_left = out1.t_end();
        c.max_time = std::max(1e-9, geo.max_flight_time - t_left);
        const auto out2 = integrate::integrate(field, out1.x_end(), t_left, geo.max_flight_time, c, ev);
        if (out2.status != Status::terminal_event) {
            s.status = "no_return:" + integrate::to_string(out2.status);
            out[idx] = s;
            return;
        }
        s.ends.assign(planes.size(), Eigen::Vector2d::Zero());
        s.flight_times.assign(planes.size(), -1.0);
        for (const auto& e : out2.events) {
            auto& ft = s.flight_times[e.spec];
            if (ft >= 0.0) continue;
            ft = e.t;
            s.ends[e.spec] = Eigen::Vector2d(e.x[1], e.x[2]);
        }
        s.ok = std::all_of(s.flight_times.begin(), s.flight_times.end(), [](double t) { return t >= 0.0; });
        s.status = s.ok ? "ok" : "missing_plane";
        out[idx] = s;
    });
    return out;
}

std::vector<FlowMapSample> flow_map_Q(int ni, int nj, double alpha, double p,
                                      const SectionGeometry& geo, const IntegratorConfig& cfg,
                                      int jobs) {
    const model::NormalField field(alpha, p);
    return flow_map_Q(field.as_field(), ni, nj, geo, cfg, jobs);
}

std::vector<ImageStats> image_stats(const std::vector<FlowMapSample>& samples,
                                    const SectionGeometry& geo) {
    std::vector<ImageStats> out;
    for (std::size_t k = 0; k < geo.planes.size(); ++k) {
        ImageStats st;
        st.plane = geo.planes[k];
        std::vector<Eigen::Vector2d> pts;
        for (const auto& s : samples) {
            if (s.ok && k < s.ends.size()) pts.push_back(s.ends[k]);
        }
        st.n = pts.size();
        st.min_norm = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < pts.size(); ++a) {
            st.min_norm = std::min(st.min_norm, pts[a].norm());
            for (std::size_t b = a + 1; b < pts.size(); ++b) {
                st.diameter = std::max(st.diameter, (pts[a] - pts[b]).norm());
            }
        }
        if (pts.empty()) st.min_norm = 0.0;
        out.push_back(st);
    }
    return out;
}

// ---------------------------------------------------------------- contraction

SymEig2 sym2_eigenvalues(const Eigen::Matrix2d& m) {
    const double a = m(0, 0);
    const double d = m(1, 1);
    const double b = 0.5 * (m(0, 1) + m(1, 0));
    const double mean = 0.5 * (a + d);
    const double r = std::hypot(0.5 * (a - d), b);
    return {mean - r, mean + r};
}

namespace {

Eigen::Matrix2d transverse_jacobian(const VectorField& f, double x1) {
    constexpr double h = 1e-4;
    Eigen::Matrix2d J;
    for (int j = 0; j < 2; ++j) {
        Vec3 e = Vec3::Zero();
        e[j + 1] = h;
        const Vec3 base(x1, 0.0, 0.0);
        const Vec3 d = (f(base - 2.0 * e) - 8.0 * f(base - e) + 8.0 * f(base + e) - f(base + 2.0 * e)) / (12.0 * h);
        J(0, j) = d[1];
        J(1, j) = d[2];
    }
    return J;
}

double lambda_bar_at(const VectorField& f, double x1) {
    return -sym2_eigenvalues(transverse_jacobian(f, x1)).lambda2;
}

}  // namespace

ContractionProfile contraction_profile(const VectorField& field, const ContractionGrid& grid) {
    if (!(grid.d1 < 0.0)) throw DomainError("contraction_profile: d1 must be negative");
    if (grid.n < 2) throw DomainError("contraction_profile: need at least two grid points");

    ContractionProfile cp;
    cp.d1 = grid.d1;

    // x_star: sign change of lambda_bar on [d1, 0]
    {
        constexpr int scan = 400;
        double prev_x = grid.d1;
        double prev_v = lambda_bar_at(field, prev_x);
        for (int i = 1; i <= scan; ++i) {
            const double x = grid.d1 * (1.0 - static_cast<double>(i) / scan);
            const double v = lambda_bar_at(field, x);
            if (v == 0.0) {
                cp.x_star = x;
                break;
            }
            if ((prev_v > 0.0) != (v > 0.0)) {
                double lo = prev_x, hi = x, flo = prev_v;
                for (int it = 0; it < 100 && hi - lo > 1e-14; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const double fm = lambda_bar_at(field, mid);
                    if ((fm > 0.0) == (flo > 0.0)) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                cp.x_star = 0.5 * (lo + hi);
                break;
            }
            prev_x = x;
            prev_v = v;
        }
    }

    if (grid.d3) {
        cp.d3 = *grid.d3;
    } else if (cp.x_star && grid.epsilon > 0.0 && *cp.x_star < 0.0) {
        const double M = std::floor(std::sqrt(-*cp.x_star) / grid.epsilon) + 1.0;
        cp.d3 = -M * M * grid.epsilon * grid.epsilon;
    } else {
        cp.d3 = grid.d1 / grid.n;
    }
    if (!(cp.d3 > grid.d1) || !(cp.d3 < 0.0)) throw DomainError("contraction_profile: need d1 < d3 < 0");

    for (int i = 0; i < grid.n; ++i) {
        const double x1 = grid.d1 + (cp.d3 - grid.d1) * i / (grid.n - 1);
        const SymEig2 e = sym2_eigenvalues(transverse_jacobian(field, x1));
        const double w = field(Vec3(x1, 0.0, 0.0))[0];
        cp.x1.push_back(x1);
        cp.w.push_back(w);
        cp.lambda_bar.push_back(-e.lambda2);
        cp.lambda_under.push_back(-e.lambda1);
        cp.ratio_bar.push_back(-e.lambda2 / w);
        cp.ratio_under.push_back(-e.lambda1 / w);
        if (!(w > 0.0)) {
            cp.w_positive_ok = false;
            cp.w_violations.push_back(x1);
        }
    }
    for (int i = 1; i < grid.n; ++i) {
        if (!(cp.lambda_bar[i] < cp.lambda_bar[i - 1])) {
            cp.monotone_ok = false;
            cp.monotonicity_violations.push_back(0.5 * (cp.x1[i] + cp.x1[i - 1]));
        }
    }
    int last_pos = -1;
    for (int i = 0; i < grid.n && cp.lambda_bar[i] > 0.0; ++i) last_pos = i;
    cp.positive_ok = last_pos >= 1;
    cp.d2 = last_pos >= 0 ? cp.x1[last_pos] : cp.d1;
    cp.min_ratio_bar = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= last_pos; ++i) cp.min_ratio_bar = std::min(cp.min_ratio_bar, cp.ratio_bar[i]);
    if (last_pos < 0) cp.min_ratio_bar = 0.0;
    cp.max_ratio_under = *std::max_element(cp.ratio_under.begin(), cp.ratio_under.end());
    return cp;
}

ContractionProfile contraction_profile(double alpha, double p, ContractionGrid grid) {
    const model::NormalField field(alpha, p);
    if (grid.epsilon == 0.0 && alpha > 0.0) grid.epsilon = std::sqrt(alpha);
    return contraction_profile(field.as_field(), grid);
}

// ---------------------------------------------------------------- return map

std::vector<double> crossing_sequence(const Trajectory& traj, int spec) {
    std::vector<double> out;
    for (const auto& e : traj.events) {
        if (e.spec == spec) out.push_back(1.0 / rho2(e.x));
    }
    return out;
}

double choose_theta_bar(const VectorField& field, const Vec3& x0, double t_probe,
                        const IntegratorConfig& cfg, int candidates) {
    if (candidates < 1) throw DomainError("choose_theta_bar: need candidates");
    std::vector<EventSpec> ev;
    for (int k = 0; k < candidates; ++k) {
        ev.push_back(EventSpec::angle(-kPi + 2.0 * kPi * k / candidates, Direction::rising));
    }
    PhaseTrack track;
    IntegratorConfig c = cfg;
    c.store_dense = false;
    c.record_stride = 1u << 30;
    const auto tr = integrate::integrate(field, x0, 0.0, t_probe, c, ev,
                                         [&track](const integrate::DenseSegment& s) { track.observe(s); });
    double best = ev.front().value;
    double best_gap = -1.0;
    double best_tgap = -1.0;
    // discard the first half of the probe as transient
    const double t_cut = 0.5 * tr.t_end();
    for (int k = 0; k < candidates; ++k) {
        std::vector<double> ph;
        std::vector<double> ts;
        for (const auto& e : tr.events) {
            if (e.spec != k || e.t < t_cut) continue;
            ph.push_back(track.phase_at(e.t, ev[k].value));
            ts.push_back(e.t);
        }
        if (ph.size() < 3) continue;
        double gap = std::numeric_limits<double>::infinity();
        double tgap = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < ph.size(); ++i) {
            gap = std::min(gap, ph[i] - ph[i - 1]);
            tgap = std::min(tgap, ts[i] - ts[i - 1]);
        }
        const double gq = std::round(gap * 1e3) / 1e3;
        if (gq > best_gap || (gq == best_gap && tgap > best_tgap)) {
            best_gap = gq;
            best_tgap = tgap;
            best = ev[k].value;
        }
    }
    if (best_gap < 0.0) throw NumericalError("choose_theta_bar: probe trajectory does not rotate");
    return best;
}

ReturnMapResult first_return_map(const VectorField& field, const ReturnMapOptions& opt) {
    if (opt.n_samples < 1 || opt.n_transient < 0) throw DomainError("first_return_map: invalid sample counts");
    std::vector<Vec3> seeds = opt.seeds;
    if (seeds.empty()) seeds.push_back(Vec3(0.0, 0.02, 0.0));

    ReturnMapResult res;
    const double theta = opt.theta_bar ? *opt.theta_bar : choose_theta_bar(field, seeds.front(), 2000.0, opt.cfg);
    res.data.theta_bar = theta;
    res.min_phase_gap = std::numeric_limits<double>::infinity();
    res.max_phase_gap = 0.0;

    for (const auto& seed : seeds) {
        IntegratorConfig c = opt.cfg;
        c.store_dense = false;
        c.record_stride = 1u << 30;
        c.max_time = opt.max_time;
        c.max_events = static_cast<std::size_t>(opt.n_transient + opt.n_samples + 1);
        PhaseTrack track;
        const auto tr = integrate::integrate(field, seed, 0.0, opt.max_time, c,
                                             {EventSpec::angle(theta, Direction::rising)},
                                             [&track](const integrate::DenseSegment& s) { track.observe(s); });
        if (tr.events.size() < 2) {
            throw NumericalError("first_return_map: trajectory does not return to the section (" +
                                 integrate::to_string(tr.status) + ")");
        }
        std::vector<double> seq;
        for (std::size_t k = static_cast<std::size_t>(opt.n_transient); k < tr.events.size(); ++k) {
            seq.push_back(1.0 / rho2(tr.events[k].x));
        }
        for (std::size_t k = static_cast<std::size_t>(opt.n_transient); k + 1 < tr.events.size(); ++k) {
            res.data.push(1.0 / rho2(tr.events[k].x), 1.0 / rho2(tr.events[k + 1].x), tr.events[k].t);
            const double gap = track.phase_at(tr.events[k + 1].t, theta) - track.phase_at(tr.events[k].t, theta);
            res.min_phase_gap = std::min(res.min_phase_gap, gap);
            res.max_phase_gap = std::max(res.max_phase_gap, gap);
        }
        res.sequences.push_back(std::move(seq));
    }
    res.phase_gaps_ok = std::abs(res.min_phase_gap - 2.0 * kPi) < 0.5 && std::abs(res.max_phase_gap - 2.0 * kPi) < 0.5;
    res.data.multivalued = detect_multivalued(res.data);
    return res;
}

ReturnMapResult first_return_map(double alpha, double p, const ReturnMapOptions& opt) {
    const model::NormalField field(alpha, p);
    return first_return_map(field.as_field(), opt);
}

bool detect_multivalued(const ReturnMapData& data, int bins) {
    const std::size_t n = data.size();
    if (n < static_cast<std::size_t>(4 * bins) || bins < 3) return false;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return data.I_k[a] < data.I_k[b]; });
    const std::size_t per = n / bins;
    std::vector<double> xc(bins), med(bins), width(bins);
    std::vector<std::vector<double>> ys(bins);
    for (int b = 0; b < bins; ++b) {
        const std::size_t lo = b * per;
        const std::size_t hi = b + 1 == bins ? n : lo + per;
        std::vector<double> xs;
        for (std::size_t i = lo; i < hi; ++i) {
            xs.push_back(data.I_k[order[i]]);
            ys[b].push_back(data.I_k1[order[i]]);
        }
        xc[b] = median(xs);
        width[b] = xs.back() - xs.front();
        med[b] = median(ys[b]);
    }
    for (int b = 1; b + 1 < bins; ++b) {
        const double dx = xc[b + 1] - xc[b - 1];
        const double slope = dx > 0.0 ? (med[b + 1] - med[b - 1]) / dx : 0.0;
        auto y = ys[b];
        std::sort(y.begin(), y.end());
        double gap = 0.0;
        for (std::size_t i = 1; i < y.size(); ++i) gap = std::max(gap, y[i] - y[i - 1]);
        const double spread = y.back() - y.front();
        const double expected = std::abs(slope) * width[b];
        const double floor = 1e-9 * std::max(1.0, std::abs(med[b]));
        if (gap > 0.5 * spread && gap > 3.0 * std::max(expected, floor)) return true;
    }
    return false;
}

BranchSlopes branch_slopes(const ReturnMapData& data) {
    BranchSlopes bs;
    const std::size_t n = data.size();
    if (n < 8) throw DomainError("branch_slopes: too few samples");
    std::size_t imin = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (data.I_k1[i] < data.I_k1[imin]) imin = i;
    }
    const double x_min = data.I_k[imin];
    const double x_max = *std::max_element(data.I_k.begin(), data.I_k.end());
    const double x_lo = *std::min_element(data.I_k.begin(), data.I_k.end());
    const double split = x_min > 0.0 ? std::sqrt(x_min * x_max) : 0.5 * (x_min + x_max);
    std::vector<double> xi, yi, xo, yo;
    for (std::size_t i = 0; i < n; ++i) {
        if (data.I_k[i] <= x_min) {
            xi.push_back(data.I_k[i]);
            yi.push_back(data.I_k1[i]);
        } else if (data.I_k[i] >= split) {
            xo.push_back(data.I_k[i]);
            yo.push_back(data.I_k1[i]);
        }
    }
    const LineFit fi = fit_line(xi, yi);
    const LineFit fo = fit_line(xo, yo);
    bs.inner_slope = fi.slope;
    bs.outer_slope = fo.slope;
    bs.outer_r2 = fo.r2;
    bs.inner_lo = x_lo;
    bs.inner_hi = x_min;
    bs.outer_lo = split;
    bs.outer_hi = x_max;
    bs.n_inner = xi.size();
    bs.n_outer = xo.size();
    return bs;
}

// ---------------------------------------------------------------- classification

std::string to_string(OrbitKind k) {
    switch (k) {
        case OrbitKind::fixed: return "fixed";
        case OrbitKind::periodic: return "periodic";
        case OrbitKind::chaotic: return "chaotic";
        case OrbitKind::escaped: return "escaped";
        case OrbitKind::unresolved: return "unresolved";
    }
    return "unknown";
}

std::string OrbitClass::label() const {
    if (kind == OrbitKind::periodic) return "period-" + std::to_string(period);
    return to_string(kind);
}

int detect_period(const std::vector<double>& seq, double rtol, int max_period, int window) {
    const int n = static_cast<int>(seq.size());
    for (int per = 1; per <= max_period; ++per) {
        const int w = std::max(window, 2 * per);
        if (n < w + per) break;
        bool closed = true;
        for (int k = n - w; k < n && closed; ++k) {
            const double a = seq[k];
            const double b = seq[k - per];
            closed = std::abs(a - b) <= rtol * std::max(std::abs(a), 1e-300);
        }
        if (closed) return per;
    }
    return 0;
}

std::pair<double, double> bootstrap_mean_ci(const std::vector<double>& v, int resamples,
                                            unsigned seed, std::size_t block, double level) {
    const std::size_t n = v.size();
    if (n == 0) throw DomainError("bootstrap_mean_ci: empty sample");
    block = std::clamp<std::size_t>(block, 1, n);
    std::mt19937 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - block);
    std::vector<double> means;
    means.reserve(resamples);
    for (int r = 0; r < resamples; ++r) {
        double acc = 0.0;
        std::size_t count = 0;
        while (count < n) {
            const std::size_t s = pick(rng);
            for (std::size_t j = 0; j < block && count < n; ++j, ++count) acc += v[s + j];
        }
        means.push_back(acc / static_cast<double>(n));
    }
    std::sort(means.begin(), means.end());
    const double a = 0.5 * (1.0 - level);
    const auto at = [&means](double q) {
        const double pos = q * (means.size() - 1);
        const std::size_t i = static_cast<std::size_t>(pos);
        const double f = pos - i;
        return i + 1 < means.size() ? means[i] * (1.0 - f) + means[i + 1] * f : means.back();
    };
    return {at(a), at(1.0 - a)};
}

namespace {

void finish_exponent(OrbitClass& oc, const std::vector<double>& terms, const ClassifyOptions& opt) {
    oc.n_used = terms.size();
    if (terms.empty()) return;
    oc.map_lyapunov = std::accumulate(terms.begin(), terms.end(), 0.0) / terms.size();
    const std::size_t block = std::max<std::size_t>(1, static_cast<std::size_t>(std::cbrt(terms.size())));
    const auto ci = bootstrap_mean_ci(terms, opt.bootstrap, opt.seed, block);
    oc.ci_lo = ci.first;
    oc.ci_hi = ci.second;
}

double safe_log_abs(double s) { return std::log(std::max(std::abs(s), 1e-12)); }

}  // namespace

OrbitClass classify_orbit(const std::vector<double>& seq, const ClassifyOptions& opt) {
    OrbitClass oc;
    for (double v : seq) {
        if (!std::isfinite(v) || v < opt.domain_lo || v > opt.domain_hi) {
            oc.kind = OrbitKind::escaped;
            return oc;
        }
    }
    if (seq.size() < 2) return oc;
    const int per = detect_period(seq, opt.closure_rtol, opt.max_period,
                                  std::min<int>(opt.closure_window, static_cast<int>(seq.size()) / 2));
    if (per > 0) {
        oc.kind = per == 1 ? OrbitKind::fixed : OrbitKind::periodic;
        oc.period = per;
        return oc;
    }
    // local secant slopes of the graph (x_k, x_{k+1}) from k nearest abscissae
    const std::size_t m = seq.size() - 1;
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(std::max(2, opt.knn)), m - 1);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return seq[a] < seq[b]; });
    std::vector<std::size_t> rank(m);
    for (std::size_t r = 0; r < m; ++r) rank[order[r]] = r;
    std::vector<double> terms;
    terms.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t lo = rank[i];
        std::size_t hi = rank[i];
        while (hi - lo < k) {
            const bool can_l = lo > 0;
            const bool can_r = hi + 1 < m;
            if (!can_l && !can_r) break;
            if (can_l && (!can_r || seq[i] - seq[order[lo - 1]] <= seq[order[hi + 1]] - seq[i])) {
                --lo;
            } else {
                ++hi;
            }
        }
        std::vector<double> xs, ys;
        for (std::size_t r = lo; r <= hi; ++r) {
            xs.push_back(seq[order[r]]);
            ys.push_back(seq[order[r] + 1]);
        }
        terms.push_back(safe_log_abs(fit_line(xs, ys).slope));
    }
    finish_exponent(oc, terms, opt);
    oc.kind = oc.ci_lo > 0.0 ? OrbitKind::chaotic : OrbitKind::unresolved;
    return oc;
}

OrbitClass classify_orbit(const std::function<double(double)>& map,
                          const std::function<double(double)>& deriv, double I0, int n_transient,
                          int n_iter, const ClassifyOptions& opt) {
    OrbitClass oc;
    double x = I0;
    auto escaped = [&opt](double v) { return !std::isfinite(v) || v < opt.domain_lo || v > opt.domain_hi; };
    for (int i = 0; i < n_transient; ++i) {
        x = map(x);
        if (escaped(x)) {
            oc.kind = OrbitKind::escaped;
            return oc;
        }
    }
    std::vector<double> seq{x};
    std::vector<double> terms;
    for (int i = 0; i < n_iter; ++i) {
        terms.push_back(safe_log_abs(deriv(x)));
        x = map(x);
        if (escaped(x)) {
            oc.kind = OrbitKind::escaped;
            return oc;
        }
        seq.push_back(x);
    }
    finish_exponent(oc, terms, opt);
    const int per = detect_period(seq, opt.closure_rtol, opt.max_period,
                                  std::min<int>(opt.closure_window, static_cast<int>(seq.size()) / 2));
    if (per > 0) {
        oc.kind = per == 1 ? OrbitKind::fixed : OrbitKind::periodic;
        oc.period = per;
    } else {
        oc.kind = oc.ci_lo > 0.0 ? OrbitKind::chaotic : OrbitKind::unresolved;
    }
    return oc;
}

// ---------------------------------------------------------------- sweeps

std::string to_string(SweepParam s) {
    switch (s) {
        case SweepParam::alpha: return "alpha";
        case SweepParam::p: return "p";
        case SweepParam::gamma_proxy: return "gamma";
    }
    return "unknown";
}

std::vector<double> sweep_grid(double lo, double hi, int steps) {
    std::vector<double> g;
    if (steps <= 0) return g;
    if (steps == 1) return {lo};
    for (int i = 0; i < steps; ++i) g.push_back(lo + (hi - lo) * i / (steps - 1));
    return g;
}

double p_for_gamma(double gamma, double p0, double p1) {
    // gamma increases in p on the upper branch; grow a bracket from [p0, p1], then bisect
    double lo = std::min(p0, p1), hi = std::max(p0, p1);
    double flo = asymptotics::gamma_of_p(lo) - gamma;
    double fhi = asymptotics::gamma_of_p(hi) - gamma;
    for (int it = 0; it < 60 && flo > 0.0; ++it) {
        hi = lo;
        fhi = flo;
        lo = 0.5 * (lo + kUpperBranchStart);
        flo = asymptotics::gamma_of_p(lo) - gamma;
    }
    for (int it = 0; it < 60 && fhi < 0.0; ++it) {
        lo = hi;
        flo = fhi;
        hi *= 1.5;
        fhi = asymptotics::gamma_of_p(hi) - gamma;
    }
    if (flo > 0.0 || fhi < 0.0) throw NumericalError("p_for_gamma: gamma is out of reach on the upper branch");
    for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = asymptotics::gamma_of_p(mid) - gamma;
        if (fm == 0.0) return mid;
        (fm < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

void summarize_sweep(SweepResult& res) {
    res.doublings.clear();
    res.longest_cascade = 0;
    res.chaotic_window = false;
    std::vector<std::pair<double, int>> per;
    for (const auto& pt : res.points) {
        if (!pt.ok) continue;
        if (pt.cls.kind == OrbitKind::chaotic) res.chaotic_window = true;
        if (pt.cls.kind == OrbitKind::fixed || pt.cls.kind == OrbitKind::periodic) {
            per.emplace_back(pt.param, pt.cls.period);
        }
    }
    for (std::size_t i = 1; i < per.size(); ++i) {
        const int a = per[i - 1].second;
        const int b = per[i].second;
        if (b == 2 * a) res.doublings.push_back({per[i - 1].first, per[i].first, a, b});
        if (a == 2 * b) res.doublings.push_back({per[i].first, per[i - 1].first, b, a});
    }
    // successive doublings: period never drops along the run, every change is x2
    for (int dir = 0; dir < 2; ++dir) {
        int run = 0;
        for (std::size_t s = 1; s < per.size(); ++s) {
            const int a = dir == 0 ? per[s - 1].second : per[per.size() - s].second;
            const int b = dir == 0 ? per[s].second : per[per.size() - s - 1].second;
            if (b == a) continue;
            if (b == 2 * a) {
                ++run;
                res.longest_cascade = std::max(res.longest_cascade, run);
            } else {
                run = 0;
            }
        }
    }
}

SweepResult sweep_bifurcation(const SweepConfig& sc) {
    SweepResult res;
    const auto grid = sweep_grid(sc.lo, sc.hi, sc.steps);
    res.points.resize(grid.size());
    parallel_for(grid.size(), sc.jobs, [&](std::size_t i) {
        SweepPoint pt;
        pt.param = grid[i];
        try {
            pt.alpha = sc.alpha;
            pt.p = sc.p;
            switch (sc.param) {
                case SweepParam::alpha: pt.alpha = grid[i]; break;
                case SweepParam::p: pt.p = grid[i]; break;
                case SweepParam::gamma_proxy: pt.p = p_for_gamma(grid[i]); break;
            }
            pt.gamma = asymptotics::gamma_of_p(pt.p);
            const model::NormalField field(pt.alpha, pt.p);
            IntegratorConfig c = sc.cfg;
            c.store_dense = false;
            c.record_stride = 1u << 30;
            c.max_events = static_cast<std::size_t>(sc.n_transient + sc.n_samples);
            const auto tr = integrate::integrate(field.as_field(), sc.seed, 0.0, 1e7, c,
                                                 {EventSpec::angle(sc.theta_bar, Direction::rising)});
            const auto seq = crossing_sequence(tr, 0);
            if (seq.size() < static_cast<std::size_t>(sc.n_transient + 2)) {
                pt.ok = false;
                pt.cls.kind = OrbitKind::escaped;
                pt.error = "too few section crossings (" + integrate::to_string(tr.status) + ")";
            } else {
                pt.attractor.assign(seq.begin() + sc.n_transient, seq.end());
                pt.cls = classify_orbit(pt.attractor, sc.classify);
            }
        } catch (const std::exception& e) {
            pt.ok = false;
            pt.error = e.what();
        }
        res.points[i] = std::move(pt);
    });
    summarize_sweep(res);
    return res;
}

SweepResult sweep_analytic_G(const asymptotics::MapParams& base, double gamma_lo, double gamma_hi,
                             int steps, int n_transient, int n_iter, const ClassifyOptions& opt) {
    SweepResult res;
    for (double g : sweep_grid(gamma_lo, gamma_hi, steps)) {
        SweepPoint pt;
        pt.param = g;
        pt.gamma = g;
        asymptotics::MapParams mp = base;
        mp.gamma = g;
        try {
            const double I0 = 1.05 * asymptotics::fixed_point_G(mp);
            ClassifyOptions o = opt;
            o.domain_lo = 0.0;
            pt.cls = classify_orbit([&mp](double I) { return asymptotics::analytic_map_G(I, mp); },
                                    [&mp](double I) { return asymptotics::analytic_map_G_prime(I, mp); }, I0,
                                    n_transient, n_iter, o);
            double x = I0;
            for (int i = 0; i < n_transient; ++i) x = asymptotics::analytic_map_G(x, mp);
            for (int i = 0; i < std::min(n_iter, 200); ++i) {
                x = asymptotics::analytic_map_G(x, mp);
                pt.attractor.push_back(x);
            }
        } catch (const std::exception& e) {
            pt.ok = false;
            pt.error = e.what();
        }
        res.points.push_back(std::move(pt));
    }
    summarize_sweep(res);
    return res;
}

}  // namespace hopfscope::maps
