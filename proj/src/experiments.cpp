#include "hopfscope/experiments.hpp"

#include "hopfscope/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace hopfscope::experiments {

using integrate::Direction;
using integrate::EventSpec;
using integrate::IntegratorConfig;

Vec3 slow_manifold_point(const asymptotics::HopfAsymptotics& ha, double rho, double theta) {
    const TrigPoly U = ha.U();
    return {U(theta) * rho * rho, rho * std::cos(theta), rho * std::sin(theta)};
}

// ---------------------------------------------------------------- Hopf point

HopfCheck hopf_check() {
    HopfCheck h;
    h.point = model::find_hopf_nu();
    Eigen::EigenSolver<Mat3> es(model::jacobian_origin(h.point.nu));
    for (int i = 0; i < 3; ++i) h.eigenvalues[i] = es.eigenvalues()[i];
    std::sort(h.eigenvalues.begin(), h.eigenvalues.end(),
              [](const auto& a, const auto& b) { return a.imag() < b.imag(); });
    const double b = std::sqrt(3.0);
    const std::array<std::complex<double>, 3> want{std::complex<double>(0.0, -b), std::complex<double>(-1.0, 0.0),
                                                   std::complex<double>(0.0, b)};
    for (int i = 0; i < 3; ++i) h.eigen_error = std::max(h.eigen_error, std::abs(h.eigenvalues[i] - want[i]));
    return h;
}

Json to_json(const HopfCheck& h) {
    Json j = serialize::to_json(h.point);
    Json ev = Json::array();
    for (const auto& z : h.eigenvalues) ev.push_back({z.real(), z.imag()});
    j["eigenvalues"] = ev;
    j["eigen_error"] = h.eigen_error;
    return j;
}

// ---------------------------------------------------------------- gamma(p)

GammaScan gamma_scan(double p_lo, double p_hi, int steps, int jobs, bool refine) {
    if (!(p_lo > 0.0) || !(p_hi >= p_lo) || steps < 1) throw DomainError("gamma_scan: invalid p grid");
    GammaScan g;
    g.p = maps::sweep_grid(p_lo, p_hi, steps);
    g.gamma.assign(g.p.size(), 0.0);
    maps::parallel_for(g.p.size(), jobs, [&](std::size_t i) { g.gamma[i] = asymptotics::gamma_of_p(g.p[i]); });
    for (std::size_t i = 1; i < g.p.size(); ++i) {
        if ((g.gamma[i - 1] > 0.0) == (g.gamma[i] > 0.0)) continue;
        g.brackets.emplace_back(g.p[i - 1], g.p[i]);
        if (!refine) continue;
        double lo = g.p[i - 1], hi = g.p[i], flo = g.gamma[i - 1];
        for (int it = 0; it < 60 && hi - lo > 1e-10; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double fm = asymptotics::gamma_of_p(mid);
            if ((fm > 0.0) == (flo > 0.0)) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        g.zeros.push_back(0.5 * (lo + hi));
    }
    return g;
}

Json to_json(const GammaScan& g) {
    Json br = Json::array();
    for (const auto& b : g.brackets) br.push_back({b.first, b.second});
    return Json{{"n", g.p.size()}, {"brackets", br}, {"zeros", g.zeros}};
}

// ---------------------------------------------------------------- periodic orbit

WindowStats window_stats(const integrate::Trajectory& traj, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw DomainError("window_stats: fraction must be in (0, 1]");
    if (traj.dense.empty()) throw DomainError("window_stats: trajectory has no dense output");
    WindowStats w;
    w.freq_x1 = integrate::dominant_frequencies(traj, 0, fraction);
    w.freq_x2 = integrate::dominant_frequencies(traj, 1, fraction);
    w.freq_ratio = w.freq_x1 / w.freq_x2;
    constexpr int n = 16384;
    const double t_lo = traj.dense.front().t0;
    const double t_hi = traj.dense.back().t1();
    const double t0 = t_hi - (t_hi - t_lo) * fraction;
    double rho_sum = 0.0, x1_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const Vec3 x = traj.at(t0 + (t_hi - t0) * i / n);
        rho_sum += std::hypot(x[1], x[2]);
        x1_sum += x[0];
    }
    w.rho_mean = rho_sum / n;
    w.x1_mean = x1_sum / n;
    return w;
}

Json to_json(const WindowStats& w) {
    return Json{{"freq_x1", w.freq_x1},
                {"freq_x2", w.freq_x2},
                {"freq_ratio", w.freq_ratio},
                {"rho_mean", w.rho_mean},
                {"x1_mean", w.x1_mean}};
}

OrbitRun supercritical_orbit(double alpha, double p, double t_span, double fraction, const IntegratorConfig& cfg) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw DomainError("supercritical_orbit: fraction must be in (0, 1]");
    OrbitRun r;
    r.alpha = alpha;
    r.p = p;
    r.t_span = t_span;
    const auto ha = asymptotics::hopf_asymptotics_for(p);
    r.gamma = ha.gamma;
    r.a = ha.a;
    const auto orb = asymptotics::orbit_approx(alpha, ha);
    r.rho_bar = orb.rho_bar;
    r.x1_predicted = ha.a * orb.rho_bar * orb.rho_bar;

    const model::NormalField field(alpha, p);
    IntegratorConfig c = cfg;
    c.store_dense = true;
    const auto traj = integrate::integrate(field.as_field(), orb.point(0.0), 0.0, t_span, c);
    if (traj.status != integrate::Status::completed) {
        throw NumericalError("supercritical_orbit: integration stopped (" + integrate::to_string(traj.status) + ")");
    }
    r.steps = traj.accepted;
    const auto w = window_stats(traj, fraction);
    r.freq_x1 = w.freq_x1;
    r.freq_x2 = w.freq_x2;
    r.freq_ratio = w.freq_ratio;
    r.rho_mean = w.rho_mean;
    r.x1_mean = w.x1_mean;
    return r;
}

Json to_json(const OrbitRun& r) {
    return Json{{"alpha", r.alpha},       {"p", r.p},
                {"gamma", r.gamma},       {"a", r.a},
                {"t_span", r.t_span},     {"rho_bar", r.rho_bar},
                {"rho_mean", r.rho_mean}, {"freq_x1", r.freq_x1},
                {"freq_x2", r.freq_x2},   {"freq_ratio", r.freq_ratio},
                {"x1_mean", r.x1_mean},   {"x1_predicted", r.x1_predicted},
                {"steps", r.steps}};
}

// ---------------------------------------------------------------- slow manifold

ResidualScaling slow_manifold_residual(double p, const std::vector<double>& alphas, double t_lo, double t_hi,
                                       const IntegratorConfig& cfg) {
    if (!(t_hi > t_lo) || t_lo < 0.0) throw DomainError("slow_manifold_residual: invalid window");
    ResidualScaling out;
    out.p = p;
    out.t_lo = t_lo;
    out.t_hi = t_hi;
    const auto ha = asymptotics::hopf_asymptotics_for(p);
    const TrigPoly U = ha.U();
    for (double alpha : alphas) {
        ResidualRun run;
        run.alpha = alpha;
        run.epsilon = std::sqrt(alpha);
        if (ha.gamma == 0.0 || alpha == 0.0) throw DomainError("slow_manifold_residual: need alpha, gamma nonzero");
        // start on the slow manifold at the cycle radius scale sqrt(|alpha / gamma|)
        const Vec3 x0 = slow_manifold_point(ha, std::sqrt(std::abs(alpha / ha.gamma)), 0.0);
        const model::NormalField field(alpha, p);
        IntegratorConfig c = cfg;
        c.store_dense = false;
        c.record_stride = 1u << 30;
        auto sample = [&](const Vec3& x) {
            const double r2 = x[1] * x[1] + x[2] * x[2];
            const double res = std::abs(x[0] - U(std::atan2(x[2], x[1])) * r2);
            run.max_residual = std::max(run.max_residual, res);
            run.rho_max = std::max(run.rho_max, std::sqrt(r2));
        };
        const auto traj = integrate::integrate(
            field.as_field(), x0, 0.0, t_hi, c, {}, [&](const integrate::DenseSegment& seg) {
                for (int k = 0; k < 4; ++k) {
                    const double t = seg.t0 + (seg.t1() - seg.t0) * k / 4.0;
                    if (t >= t_lo && t <= t_hi) sample(seg.eval(t));
                }
            });
        if (traj.status != integrate::Status::completed) {
            throw NumericalError("slow_manifold_residual: integration stopped (" +
                                 integrate::to_string(traj.status) + ")");
        }
        sample(traj.x_end());
        out.runs.push_back(run);
    }
    for (std::size_t k = 1; k < out.runs.size(); ++k) {
        out.ratios.push_back(out.runs[k - 1].max_residual / out.runs[k].max_residual);
    }
    return out;
}

Json to_json(const ResidualScaling& r) {
    Json runs = Json::array();
    for (const auto& x : r.runs) {
        runs.push_back({{"alpha", x.alpha}, {"epsilon", x.epsilon}, {"max_residual", x.max_residual}, {"rho_max", x.rho_max}});
    }
    return Json{{"p", r.p}, {"window", {r.t_lo, r.t_hi}}, {"runs", runs}, {"ratios", r.ratios}};
}

// ---------------------------------------------------------------- transit time

namespace {

// First upward crossing of `level` by the sampled series, linear in t.
std::optional<double> first_up_crossing(const std::vector<std::pair<double, double>>& s, double level) {
    for (std::size_t j = 1; j < s.size(); ++j) {
        if (s[j - 1].second < level && s[j].second >= level) {
            const double f = (level - s[j - 1].second) / (s[j].second - s[j - 1].second);
            return s[j - 1].first + f * (s[j].first - s[j - 1].first);
        }
    }
    return std::nullopt;
}

// Angle-weighted mean of ln rho^2 and of t over each full turn of the polar angle.
struct TurnAverager {
    std::vector<std::pair<double, double>> turns;  // (mean t, mean ln rho^2)
    double swept = 0.0;
    double acc_l = 0.0;
    double acc_t = 0.0;
    double last = 0.0;
    bool started = false;

    void observe(const integrate::DenseSegment& seg) {
        const Vec3 a = seg.r[0];
        const Vec3 b = seg.eval(seg.t1());
        const double th_a = std::atan2(a[2], a[1]);
        const double th_b = std::atan2(b[2], b[1]);
        if (!started) {
            started = true;
            last = th_a;
        }
        const double d = std::remainder(th_b - th_a, 2.0 * kPi);
        const double l = 0.5 * (std::log(a[1] * a[1] + a[2] * a[2]) + std::log(b[1] * b[1] + b[2] * b[2]));
        acc_l += l * d;
        acc_t += 0.5 * (seg.t0 + seg.t1()) * d;
        swept += d;
        if (swept >= 2.0 * kPi) {
            turns.emplace_back(acc_t / swept, acc_l / swept);
            swept = acc_l = acc_t = 0.0;
        }
    }
};

}  // namespace

TransitRun transit_experiment(double alpha, double p, double I0, double I_bar, const IntegratorConfig& cfg) {
    if (!(alpha > 0.0)) throw DomainError("transit_experiment: alpha must be positive");
    if (!(I0 > I_bar && I_bar > 0.0)) throw DomainError("transit_experiment: need I0 > I_bar > 0");
    TransitRun r;
    r.alpha = alpha;
    r.p = p;
    r.I0 = I0;
    r.I_bar = I_bar;
    const auto ha = asymptotics::hopf_asymptotics_for(p);
    r.gamma = ha.gamma;
    const double eps = std::sqrt(alpha);
    r.predicted = asymptotics::transit_time(I0, I_bar, 1.0, ha.gamma, eps);

    const model::NormalField field(alpha, p);
    const auto f = field.as_field();
    r.gamma_local = asymptotics::lyapunov1(taylor::extract_taylor(f, alpha));
    r.predicted_local = asymptotics::transit_time(I0, I_bar, 1.0, r.gamma_local, eps);

    const double rho_in = std::sqrt(alpha / I0);
    const double rho_out = std::sqrt(alpha / I_bar);
    const std::vector<EventSpec> ev{EventSpec::cylinder(rho_in, -1.0, 1.0, Direction::rising),
                                    EventSpec::cylinder(rho_out, -1.0, 1.0, Direction::rising),
                                    EventSpec::norm(0.6, Direction::rising, true)};
    IntegratorConfig c = cfg;
    c.store_dense = false;
    c.record_stride = 1u << 30;
    const Vec3 x0 = slow_manifold_point(ha, rho_in / std::sqrt(2.0), 0.0);
    TurnAverager avg;
    const auto traj = integrate::integrate(f, x0, 0.0, 5.0 * r.predicted + 50.0, c, ev,
                                           [&avg](const integrate::DenseSegment& s) { avg.observe(s); });
    if (!traj.ok()) {
        throw NumericalError("transit_experiment: integration stopped (" + integrate::to_string(traj.status) + ")");
    }
    std::optional<double> t_in, t_out;
    for (const auto& e : traj.events) {
        if (e.spec == 0 && !t_in) t_in = e.t;
        if (e.spec == 1 && !t_out) t_out = e.t;
    }
    if (!t_in || !t_out) throw NumericalError("transit_experiment: missing cylinder crossing");
    r.measured_cylinder = *t_out - *t_in;
    r.turns = avg.turns.size();
    const auto a = first_up_crossing(avg.turns, std::log(rho_in * rho_in));
    const auto b = first_up_crossing(avg.turns, std::log(rho_out * rho_out));
    if (a && b) {
        r.measured = *b - *a;
        r.method = "turn_average";
    } else {
        // the orbit leaves the neighbourhood within the turn that would reach the outer level
        r.measured = r.measured_cylinder;
        r.method = "cylinder";
    }
    return r;
}

Json to_json(const TransitRun& r) {
    return Json{{"alpha", r.alpha},
                {"p", r.p},
                {"gamma", r.gamma},
                {"I0", r.I0},
                {"I_bar", r.I_bar},
                {"predicted", r.predicted},
                {"gamma_local", r.gamma_local},
                {"predicted_local", r.predicted_local},
                {"measured", r.measured},
                {"measured_cylinder", r.measured_cylinder},
                {"method", r.method},
                {"turns", r.turns}};
}

// ---------------------------------------------------------------- ISI

IsiRunResult isi_run(double alpha, double p, const IsiRunOptions& opt) {
    IsiRunResult r;
    r.alpha = alpha;
    r.p = p;
    r.t_end = opt.t_end;
    try {
        r.gamma = asymptotics::gamma_of_p(p);
        const model::NormalField field(alpha, p);
        isi::SpikeOptions so;
        so.r1 = opt.r1;
        so.r2 = opt.r2;
        so.epsilon = std::sqrt(alpha);
        r.train = isi::run_spike_train(field.as_field(), opt.seed, opt.t_end, so, opt.cfg);
        if (!r.train.multimodal) {
            r.error = "not multimodal: " + r.train.reason;
            return r;
        }
        r.series = isi::isi_series(r.train);
        if (r.series.size() < 2) {
            r.error = "fewer than two intervals";
            return r;
        }
        r.mean_isi = r.series.mean(1);
        r.cv = r.series.cv(1);
        r.ok = true;
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    return r;
}

std::vector<IsiRunResult> isi_sweep(const std::vector<double>& params, bool by_gamma, double fixed,
                                    const IsiRunOptions& opt, int jobs) {
    std::vector<IsiRunResult> out(params.size());
    const double p_fixed = by_gamma ? 0.0 : maps::p_for_gamma(fixed);
    maps::parallel_for(params.size(), jobs, [&](std::size_t i) {
        if (by_gamma) {
            double p = 0.0;
            try {
                p = maps::p_for_gamma(params[i]);
            } catch (const std::exception& e) {
                out[i].error = e.what();
                out[i].alpha = fixed;
                out[i].gamma = params[i];
                return;
            }
            out[i] = isi_run(fixed, p, opt);
        } else {
            out[i] = isi_run(params[i], p_fixed, opt);
        }
    });
    return out;
}

Json to_json(const IsiRunResult& r) {
    Json j{{"alpha", r.alpha}, {"p", r.p}, {"gamma", r.gamma}, {"t_end", r.t_end}, {"ok", r.ok}};
    j["n_spikes"] = r.train.spikes.size();
    j["n_entries"] = r.train.entries.size();
    j["mean_isi"] = r.ok ? Json(r.mean_isi) : Json(nullptr);
    j["cv"] = r.ok ? Json(r.cv) : Json(nullptr);
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

namespace {

IsiScaling finish_scaling(std::vector<IsiRunResult> runs, isi::ScalingMode mode, double alpha) {
    IsiScaling s;
    std::vector<isi::ScalingPoint> pts;
    for (const auto& r : runs) {
        if (!r.ok) continue;
        pts.push_back({mode == isi::ScalingMode::vs_alpha ? r.alpha : r.gamma, r.mean_isi});
    }
    s.runs = std::move(runs);
    if (pts.size() < 2) throw NumericalError("ISI scaling: fewer than two multimodal runs");
    s.fit = isi::fit_isi_scaling(pts, mode, alpha);
    return s;
}

}  // namespace

IsiScaling isi_scaling_vs_gamma(double alpha, const std::vector<double>& gammas, const IsiRunOptions& opt, int jobs) {
    return finish_scaling(isi_sweep(gammas, true, alpha, opt, jobs), isi::ScalingMode::vs_ln_gamma, alpha);
}

IsiScaling isi_scaling_vs_alpha(double gamma, const std::vector<double>& alphas, const IsiRunOptions& opt, int jobs) {
    return finish_scaling(isi_sweep(alphas, false, gamma, opt, jobs), isi::ScalingMode::vs_alpha, 0.0);
}

Json to_json(const IsiScaling& s) {
    Json runs = Json::array();
    for (const auto& r : s.runs) runs.push_back(to_json(r));
    return Json{{"runs", runs}, {"fit", serialize::to_json(s.fit)}};
}

// ---------------------------------------------------------------- return map

ReturnMapRun return_map_experiment(double alpha, double p, const ReturnMapRunOptions& opt) {
    ReturnMapRun r;
    r.alpha = alpha;
    r.p = p;
    const auto ha = asymptotics::hopf_asymptotics_for(p);
    r.gamma = ha.gamma;
    r.omega = ha.omega;
    r.predicted_outer_slope = 1.0 - 2.0 * alpha * ha.omega;

    maps::ReturnMapOptions mo;
    mo.theta_bar = opt.theta_bar;
    mo.n_transient = opt.n_transient;
    mo.n_samples = opt.n_samples;
    mo.cfg = opt.cfg;
    for (double rho : opt.seed_radii) mo.seeds.push_back(slow_manifold_point(ha, rho, opt.theta_bar + 0.5));
    r.map = maps::first_return_map(alpha, p, mo);
    r.slopes = maps::branch_slopes(r.map.data);
    asymptotics::SecondLyapunovOptions so;
    so.fit_affine = true;
    r.c_fit = asymptotics::fit_second_lyapunov(r.map.data, alpha, ha.gamma, std::sqrt(alpha), ha.omega, so);
    return r;
}

Json to_json(const ReturnMapRun& r) {
    return Json{{"alpha", r.alpha},
                {"p", r.p},
                {"gamma", r.gamma},
                {"omega", r.omega},
                {"theta_bar", r.map.data.theta_bar},
                {"n_samples", r.map.data.size()},
                {"multivalued", r.map.data.multivalued},
                {"phase_gaps_ok", r.map.phase_gaps_ok},
                {"branches", serialize::to_json(r.slopes)},
                {"predicted_outer_slope", r.predicted_outer_slope},
                {"second_lyapunov", serialize::to_json(r.c_fit)}};
}

// ---------------------------------------------------------------- global conditions

GlobalCheck global_check(double alpha, double p, int ni, int nj, const maps::SectionGeometry& geo,
                         int calibration_mesh, const IntegratorConfig& cfg, int jobs) {
    GlobalCheck g;
    g.alpha = alpha;
    g.p = p;
    g.geometry = geo;
    g.ni = ni;
    g.nj = nj;
    const model::NormalField field(alpha, p);
    const auto f = field.as_field();

    if (calibration_mesh > 0) {
        maps::SectionGeometry cal = geo;
        cal.planes = {geo.planes.front()};
        cal.theta_offset = geo.theta_offset + kPi / calibration_mesh;
        const auto cs = maps::flow_map_Q(f, calibration_mesh, calibration_mesh, cal, cfg, jobs);
        const auto st = maps::image_stats(cs, cal);
        if (st.front().n == 0) throw NumericalError("global_check: calibration mesh produced no images");
        g.zeta = 0.5 * st.front().min_norm;
    }

    g.samples = maps::flow_map_Q(f, ni, nj, geo, cfg, jobs);
    for (const auto& s : g.samples) {
        if (!s.ok) ++g.failed;
    }
    g.stats = maps::image_stats(g.samples, geo);
    g.holdout_min_norm = g.stats.front().min_norm;
    g.diameter_monotone = true;
    for (std::size_t k = 1; k < g.stats.size(); ++k) {
        if (!(g.stats[k].diameter < g.stats[k - 1].diameter)) g.diameter_monotone = false;
    }
    maps::ContractionGrid grid;
    grid.d1 = geo.planes.front();
    grid.epsilon = std::sqrt(alpha);
    g.contraction = maps::contraction_profile(f, grid);
    return g;
}

Json to_json(const GlobalCheck& g) {
    Json st = Json::array();
    for (const auto& s : g.stats) st.push_back(serialize::to_json(s));
    return Json{{"alpha", g.alpha},
                {"p", g.p},
                {"rho", g.geometry.rho},
                {"x1_window", {g.geometry.x1_lo, g.geometry.x1_hi}},
                {"planes", g.geometry.planes},
                {"mesh", {g.ni, g.nj}},
                {"failed", g.failed},
                {"images", st},
                {"diameter_monotone", g.diameter_monotone},
                {"zeta", g.zeta},
                {"holdout_min_norm", g.holdout_min_norm},
                {"contraction", serialize::to_json(g.contraction)}};
}

}  // namespace hopfscope::experiments
