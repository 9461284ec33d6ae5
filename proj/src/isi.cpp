#include "hopfscope/isi.hpp"

#include "hopfscope/errors.hpp"
#include "hopfscope/format.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace hopfscope::isi {

using integrate::Direction;
using integrate::EventRecord;
using integrate::EventSpec;

void SpikeOptions::validate() const {
    if (!(epsilon > 0.0)) throw DomainError("spike detection: epsilon must be positive");
    if (!(r1 > 0.0)) throw DomainError("spike detection: r1 must be positive");
    if (!(r2 > entry_radius())) throw DomainError("spike detection: need r2 > r1 eps^2");
}

std::vector<EventSpec> spike_events(const SpikeOptions& opt) {
    opt.validate();
    auto spike = EventSpec::norm(opt.r2, Direction::rising);
    spike.label = "spike";
    auto entry = EventSpec::norm(opt.entry_radius(), Direction::falling);
    entry.label = "entry";
    return {spike, entry};
}

SpikeTrain detect_multimodal(const std::vector<EventRecord>& events, const SpikeOptions& opt) {
    opt.validate();
    SpikeTrain st;
    st.opt = opt;
    enum class State { before_first, in_spike, in_ball } state = State::before_first;
    for (const auto& e : events) {
        if (e.spec != 0 && e.spec != 1) continue;
        st.raw.push_back(e);
        if (e.spec == 0) {
            if (state == State::in_spike) {
                if (opt.strict) {
                    st.multimodal = false;
                    st.reason = "spike at t = " + format_double(e.t) + " before the orbit re-entered the ball";
                    return st;
                }
                continue;
            }
            st.spikes.push_back(e.t);
            st.times.push_back(e.t);
            state = State::in_spike;
        } else if (state == State::in_spike) {
            st.entries.push_back(e.t);
            st.times.push_back(e.t);
            state = State::in_ball;
        }
    }
    if (st.spikes.empty()) {
        st.reason = "no crossing of |x| = r2";
    } else if (st.entries.empty()) {
        st.reason = "orbit never re-enters |x| <= r1 eps^2 after a spike";
    } else if (st.spikes.size() < 2) {
        st.reason = "fewer than two spikes";
    } else {
        st.multimodal = true;
    }
    return st;
}

SpikeTrain detect_multimodal(const integrate::Trajectory& traj, const SpikeOptions& opt) {
    if (!traj.dense.empty()) return detect_multimodal(integrate::locate_events(traj, spike_events(opt)), opt);
    return detect_multimodal(traj.events, opt);
}

SpikeTrain run_spike_train(const VectorField& field, const Vec3& x0, double t_end,
                           const SpikeOptions& opt, integrate::IntegratorConfig cfg) {
    cfg.store_dense = false;
    cfg.record_stride = std::max<std::size_t>(cfg.record_stride, 1u << 30);
    const auto traj = integrate::integrate(field, x0, 0.0, t_end, cfg, spike_events(opt));
    if (!traj.ok()) {
        throw NumericalError("run_spike_train: integration stopped early (" + integrate::to_string(traj.status) +
                             "): " + traj.message);
    }
    return detect_multimodal(traj.events, opt);
}

double IsiSeries::mean(std::size_t skip) const {
    if (tau.size() <= skip) throw DomainError("IsiSeries::mean: no intervals after skipping");
    return std::accumulate(tau.begin() + skip, tau.end(), 0.0) / static_cast<double>(tau.size() - skip);
}

double IsiSeries::stddev(std::size_t skip) const {
    const double m = mean(skip);
    const std::size_t n = tau.size() - skip;
    if (n < 2) return 0.0;
    double s = 0.0;
    for (std::size_t i = skip; i < tau.size(); ++i) s += (tau[i] - m) * (tau[i] - m);
    return std::sqrt(s / static_cast<double>(n - 1));
}

double IsiSeries::cv(std::size_t skip) const { return stddev(skip) / mean(skip); }

IsiSeries isi_series(const SpikeTrain& st) {
    if (st.spikes.size() < 2) throw DomainError("isi_series: empty series (fewer than two spikes)");
    IsiSeries s;
    for (std::size_t i = 1; i < st.spikes.size(); ++i) {
        s.tau.push_back(st.spikes[i] - st.spikes[i - 1]);
        s.t_spike.push_back(st.spikes[i - 1]);
    }
    return s;
}

BoundsReport check_bounds(const IsiSeries& s, const asymptotics::IsiBounds& b, std::size_t skip) {
    if (s.tau.size() <= skip) throw DomainError("check_bounds: empty series");
    BoundsReport r;
    r.tau_minus = b.tau_minus;
    r.tau_plus = b.tau_plus;
    r.min_tau = *std::min_element(s.tau.begin() + skip, s.tau.end());
    r.max_tau = *std::max_element(s.tau.begin() + skip, s.tau.end());
    for (std::size_t i = skip; i < s.tau.size(); ++i) {
        ++r.n;
        if (s.tau[i] >= b.tau_minus && s.tau[i] <= b.tau_plus) ++r.inside;
    }
    r.fraction_inside = static_cast<double>(r.inside) / static_cast<double>(r.n);
    return r;
}

BoundConstants fit_bound_constants(const std::vector<IsiRun>& runs, double chi) {
    if (chi < 0.0) throw DomainError("fit_bound_constants: chi must be nonnegative");
    BoundConstants bc;
    bc.chi = chi;
    bc.C_minus = std::numeric_limits<double>::infinity();
    bc.C_plus = 0.0;
    std::size_t used = 0;
    for (const auto& r : runs) {
        if (!(r.alpha > 0.0 && r.gamma > 0.0 && r.epsilon > 0.0)) {
            throw DomainError("fit_bound_constants: alpha, gamma, epsilon must be positive");
        }
        for (double t : r.tau) {
            const double g = std::expm1(2.0 * r.alpha * t) * r.gamma / r.alpha;
            bc.C_minus = std::min(bc.C_minus, g * std::pow(r.epsilon, 4.0));
            bc.C_plus = std::max(bc.C_plus, g * std::pow(r.epsilon, 4.0 + chi));
            ++used;
        }
    }
    if (used == 0) throw DomainError("fit_bound_constants: no intervals");
    return bc;
}

std::string to_string(ScalingMode m) {
    return m == ScalingMode::vs_alpha ? "vs-alpha" : "vs-ln-gamma";
}

namespace {

double vs_alpha_ssr(const std::vector<ScalingPoint>& runs, double C) {
    double s = 0.0;
    for (const auto& r : runs) {
        const double d = r.mean_isi - asymptotics::isi_bound_vs_alpha(C, r.x);
        s += d * d;
    }
    return s;
}

}  // namespace

ScalingFit fit_isi_scaling(std::vector<ScalingPoint> runs, ScalingMode mode, double alpha) {
    if (runs.size() < 2) throw DomainError("fit_isi_scaling: need at least two runs");
    for (const auto& r : runs) {
        if (!(r.x > 0.0) || !std::isfinite(r.mean_isi)) throw DomainError("fit_isi_scaling: invalid run");
    }
    std::sort(runs.begin(), runs.end(), [](const ScalingPoint& a, const ScalingPoint& b) { return a.x < b.x; });

    ScalingFit f;
    f.mode = mode;
    f.n = runs.size();
    f.strictly_decreasing = true;
    for (std::size_t i = 1; i < runs.size(); ++i) {
        if (!(runs[i].mean_isi < runs[i - 1].mean_isi)) f.strictly_decreasing = false;
    }
    const double span = runs.back().x / runs.front().x;
    if (runs.size() < 5) f.warning = "fewer than 5 runs";
    if (span < 10.0) {
        if (!f.warning.empty()) f.warning += "; ";
        f.warning += "insufficient span: x covers a factor " + format_double(span) + " < 10";
    }

    const double n = static_cast<double>(runs.size());
    double my = 0.0;
    for (const auto& r : runs) my += r.mean_isi;
    my /= n;
    double sst = 0.0;
    for (const auto& r : runs) sst += (r.mean_isi - my) * (r.mean_isi - my);

    if (mode == ScalingMode::vs_ln_gamma) {
        if (!(alpha > 0.0)) throw DomainError("fit_isi_scaling: vs-ln-gamma needs alpha > 0");
        double mx = 0.0;
        for (const auto& r : runs) mx += std::log(r.x);
        mx /= n;
        double sxx = 0.0, sxy = 0.0;
        for (const auto& r : runs) {
            const double dx = std::log(r.x) - mx;
            sxx += dx * dx;
            sxy += dx * (r.mean_isi - my);
        }
        if (sxx == 0.0) throw DomainError("fit_isi_scaling: all gamma values equal");
        f.slope = sxy / sxx;
        f.intercept = my - f.slope * mx;
        f.theoretical_slope = -1.0 / (2.0 * alpha);
        f.relative_error = std::abs(f.slope / f.theoretical_slope - 1.0);
        double ssr = 0.0;
        for (const auto& r : runs) {
            const double res = r.mean_isi - (f.intercept + f.slope * std::log(r.x));
            f.residuals.push_back(res);
            ssr += res * res;
        }
        f.r2 = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
        return f;
    }

    // one-parameter fit in u = ln C: coarse scan, then golden section
    constexpr int scan = 600;
    const double ulo = -20.0, uhi = 40.0;
    int best = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= scan; ++i) {
        const double v = vs_alpha_ssr(runs, std::exp(ulo + (uhi - ulo) * i / scan));
        if (v < best_v) {
            best_v = v;
            best = i;
        }
    }
    const double du = (uhi - ulo) / scan;
    double a = ulo + du * std::max(0, best - 1);
    double b = ulo + du * std::min(scan, best + 1);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = vs_alpha_ssr(runs, std::exp(c)), fd = vs_alpha_ssr(runs, std::exp(d));
    for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = vs_alpha_ssr(runs, std::exp(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = vs_alpha_ssr(runs, std::exp(d));
        }
    }
    f.C_fit = std::exp(0.5 * (a + b));
    double ssr = 0.0;
    for (const auto& r : runs) {
        const double res = r.mean_isi - asymptotics::isi_bound_vs_alpha(f.C_fit, r.x);
        f.residuals.push_back(res);
        ssr += res * res;
    }
    f.r2 = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
    return f;
}

void write_isi_csv(std::ostream& os, const IsiSeries& s) {
    os << "i,t_spike,tau\n";
    for (std::size_t i = 0; i < s.tau.size(); ++i) {
        os << (i + 1) << ',';
        write_double(os, s.t_spike[i]);
        os << ',';
        write_double(os, s.tau[i]);
        os << '\n';
    }
}

}  // namespace hopfscope::isi
