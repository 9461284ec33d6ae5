#include "cli.hpp"

#include "hopfscope/asymptotics.hpp"
#include "hopfscope/errors.hpp"
#include "hopfscope/experiments.hpp"
#include "hopfscope/format.hpp"
#include "hopfscope/isi.hpp"
#include "hopfscope/maps.hpp"
#include "hopfscope/model.hpp"
#include "hopfscope/serialize.hpp"
#include "hopfscope/taylor.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <utility>

namespace hopfscope::cli {

using serialize::Json;
using serialize::number_or_null;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// validity ranges; --force lifts them
constexpr double kAlphaMax = 0.2;
constexpr double kPMin = 0.05;
constexpr double kPMax = 10.0;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::string& what) {
    const std::string t = trim(text);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        throw DomainError(what + ": '" + t + "' is not a number");
    }
    if (used != t.size()) throw DomainError(what + ": '" + t + "' is not a number");
    return v;
}

// Typed option registry: binds flags to variables and echoes their final values.
class Params {
public:
    explicit Params(CLI::App* app) : app_(app) {}

    template <class T>
    CLI::Option* add(const std::string& name, T& var, const std::string& help) {
        auto* o = app_->add_option("--" + name, var, help)->capture_default_str();
        echo_.emplace_back(name, [&var] { return to_value(var); });
        return o;
    }

    CLI::Option* flag(const std::string& name, bool& var, const std::string& help) {
        auto* o = app_->add_flag("--" + name, var, help);
        echo_.emplace_back(name, [&var] { return Json(var); });
        return o;
    }

    Json echo() const {
        Json j = Json::object();
        for (const auto& [name, get] : echo_) j[name] = get();
        return j;
    }

    CLI::App* app() const { return app_; }

private:
    static Json to_value(double v) { return number_or_null(v); }
    template <class T>
    static Json to_value(const T& v) {
        return Json(v);
    }

    CLI::App* app_;
    std::vector<std::pair<std::string, std::function<Json()>>> echo_;
};

struct Outputs {
    std::string config;
    std::string json;
    std::string csv;
};

void add_outputs(CLI::App* app, Outputs& o, bool with_csv = true) {
    app->add_option("--config", o.config, "key = value file; command-line flags take precedence")
        ->check(CLI::ExistingFile);
    app->add_option("--json", o.json, "write the JSON summary here instead of stdout");
    if (with_csv) app->add_option("--csv", o.csv, "write the data table here");
}

// Applies `key = value` lines to options not given on the command line.
void apply_config(CLI::App* app, const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open config file " + path);
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigBase().from_config(in);
    } catch (const CLI::ParseError& e) {
        throw DomainError("config file " + path + ": " + e.what());
    }
    for (const auto& item : items) {
        if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == app->get_name())) {
            throw DomainError("config file " + path + ": section [" + item.parents[0] + "] does not belong to '" +
                              app->get_name() + "'");
        }
        std::string key = item.name;
        std::replace(key.begin(), key.end(), '_', '-');
        if (key == "config" || key == "json" || key == "csv") {
            throw DomainError("config file " + path + ": '" + key + "' may only be given on the command line");
        }
        CLI::Option* opt = app->get_option_no_throw("--" + key);
        if (opt == nullptr) throw DomainError("config file " + path + ": unknown key '" + item.name + "'");
        if (opt->count() > 0) continue;
        std::string value;
        for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
        try {
            opt->add_result(value);
            opt->run_callback();
        } catch (const CLI::ParseError& e) {
            throw DomainError("config file " + path + ": key '" + item.name + "': " + e.what());
        }
    }
}

void check_alpha(double alpha, bool force, bool allow_zero = true) {
    if (!std::isfinite(alpha)) throw DomainError("alpha must be finite");
    if (!allow_zero && alpha == 0.0) throw DomainError("alpha must be nonzero");
    if (!force && std::abs(alpha) > kAlphaMax) {
        throw DomainError("alpha = " + format_double(alpha) + " outside [-0.2, 0.2] (use --force)");
    }
}

void check_p(double p, bool force) {
    if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("p must be positive");
    if (!force && (p < kPMin || p > kPMax)) {
        throw DomainError("p = " + format_double(p) + " outside [0.05, 10] (use --force)");
    }
}

integrate::IntegratorConfig integrator(double rtol, double atol) {
    integrate::IntegratorConfig c;
    c.rtol = rtol;
    c.atol = atol;
    c.validate();
    return c;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DomainError("cannot write " + path);
    return f;
}

using Checks = std::vector<std::pair<std::string, bool>>;

// Writes the summary; returns the exit code implied by the checks.
int finish(std::ostream& out, const Outputs& o, const std::string& command, const Json& params, Json result,
           const Checks& checks) {
    Json doc;
    doc["command"] = command;
    doc["parameters"] = params;
    doc["result"] = std::move(result);
    Json cj = Json::object();
    bool pass = true;
    for (const auto& [name, ok] : checks) {
        cj[name] = ok;
        pass = pass && ok;
    }
    doc["checks"] = cj;
    doc["pass"] = pass;
    const std::string text = doc.dump(2) + "\n";
    if (o.json.empty()) {
        out << text;
    } else {
        auto f = open_out(o.json);
        f << text;
    }
    return pass ? kExitOk : kExitCheckFailed;
}

void csv_row(std::ostream& os, std::initializer_list<double> vals) {
    bool first = true;
    for (double v : vals) {
        if (!first) os << ',';
        first = false;
        if (std::isfinite(v)) write_double(os, v);
    }
    os << '\n';
}

bool has(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

void require_known(const std::vector<std::string>& given, const std::vector<std::string>& known,
                   const std::string& what) {
    for (const auto& g : given) {
        if (!has(known, g)) throw DomainError("unknown " + what + " '" + g + "'");
    }
}

Vec3 parse_vec3(const std::string& text, const std::string& what) {
    const auto v = parse_list(text);
    if (v.size() != 3) throw DomainError(what + ": expected three comma-separated numbers");
    return {v[0], v[1], v[2]};
}

struct Command {
    CLI::App* app = nullptr;
    std::function<int(std::ostream&)> run;
};

// ---------------------------------------------------------------- hopf-locate

Command make_hopf_locate(CLI::App& root) {
    auto* app = root.add_subcommand("hopf-locate", "Hopf point of the model and its linear spectrum");
    auto o = std::make_shared<Outputs>();
    add_outputs(app, *o, false);
    auto prm = std::make_shared<Params>(app);
    return {app, [=](std::ostream& out) {
                const auto h = experiments::hopf_check();
                const Checks checks{{"nu_AH", std::abs(h.point.nu - 1.0 / 3.0) <= 1e-6},
                                    {"eigenvalues", h.eigen_error <= 1e-8}};
                return finish(out, *o, "hopf-locate", prm->echo(), experiments::to_json(h), checks);
            }};
}

// ---------------------------------------------------------------- lyapunov

struct LyapunovArgs {
    std::string p_range = "0.2:3.2:0.05";
    double p = kNaN;
    bool no_refine = false;
    bool force = false;
    int jobs = 1;
};

Command make_lyapunov(CLI::App& root) {
    auto* app = root.add_subcommand("lyapunov", "First Lyapunov coefficient gamma(p)");
    auto o = std::make_shared<Outputs>();
    add_outputs(app, *o);
    auto a = std::make_shared<LyapunovArgs>();
    auto prm = std::make_shared<Params>(app);
    prm->add("p-range", a->p_range, "grid lo:hi:step");
    prm->add("p", a->p, "single p: Taylor data and slow-manifold constants instead of a scan");
    prm->flag("no-refine", a->no_refine, "skip bisection of the sign changes");
    prm->flag("force", a->force, "allow parameters outside the validity ranges");
    prm->add("jobs", a->jobs, "worker threads (default HOPFSCOPE_JOBS)");
    return {app, [=](std::ostream& out) {
                if (std::isfinite(a->p)) {
                    check_p(a->p, a->force);
                    const model::NormalField field(0.0, a->p);
                    const auto td = taylor::extract_taylor(field.as_field(), 0.0);
                    auto ha = asymptotics::hopf_asymptotics(td);
                    ha.p = a->p;
                    Json res{{"asymptotics", serialize::to_json(ha)},
                             {"lyapunov", serialize::to_json(asymptotics::lyapunov1_report(td))},
                             {"taylor", serialize::to_json(td)}};
                    if (!o->csv.empty()) {
                        auto f = open_out(o->csv);
                        f << "p,gamma\n";
                        csv_row(f, {a->p, ha.gamma});
                    }
                    return finish(out, *o, "lyapunov", prm->echo(), std::move(res), {});
                }
                const auto grid = parse_range(a->p_range);
                for (double p : grid) check_p(p, a->force);
                const auto scan = experiments::gamma_scan(grid.front(), grid.back(), static_cast<int>(grid.size()),
                                                          a->jobs, !a->no_refine);
                if (!o->csv.empty()) {
                    auto f = open_out(o->csv);
                    f << "p,gamma\n";
                    for (std::size_t i = 0; i < scan.p.size(); ++i) csv_row(f, {scan.p[i], scan.gamma[i]});
                }
                return finish(out, *o, "lyapunov", prm->echo(), experiments::to_json(scan), {});
            }};
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    double alpha = 1e-3;
    double p = 2.2;
    double t_end = 2000.0;
    std::string x0;
    double fraction = 0.5;
    std::size_t stride = 1;
    double r1 = 1.0;
    double r2 = 0.3;
    double rtol = 1e-10;
    double atol = 1e-12;
    std::vector<std::string> checks;
    bool force = false;
};

Command make_simulate(CLI::App& root) {
    auto* app = root.add_subcommand("simulate", "Integrate the model in normal coordinates");
    auto o = std::make_shared<Outputs>();
    add_outputs(app, *o);
    auto a = std::make_shared<SimulateArgs>();
    auto prm = std::make_shared<Params>(app);
    prm->add("alpha", a->alpha, "real part of the complex eigenvalue pair");
    prm->add("p", a->p, "kinetic exponent");
    prm->add("t-end", a->t_end, "integration horizon");
    prm->add("x0", a->x0, "start x1,x2,x3 (default: leading-order cycle if it exists, else 0,0.01,0)");
    prm->add("fraction", a->fraction, "trailing fraction of the run used for frequencies and means");
    prm->add("record-stride", a->stride, "keep every n-th accepted step in the CSV");
    prm->add("r1", a->r1, "entry ball radius factor, |x| <= r1 alpha");
    prm->add("r2", a->r2, "spike threshold |x| > r2");
    prm->add("rtol", a->rtol, "relative tolerance");
    prm->add("atol", a->atol, "absolute tolerance");
    prm->add("check", a->checks, "freq-doubling, mean-radius, x1-mean, multimodal")->delimiter(',');
    prm->flag("force", a->force, "allow parameters outside the validity ranges");
    return {app, [=](std::ostream& out) {
                check_alpha(a->alpha, a->force);
                check_p(a->p, a->force);
                if (!(a->t_end > 0.0)) throw DomainError("t-end must be positive");
                if (a->stride == 0) throw DomainError("record-stride must be positive");
                require_known(a->checks, {"freq-doubling", "mean-radius", "x1-mean", "multimodal"}, "check");

                const auto ha = asymptotics::hopf_asymptotics_for(a->p);
                const bool cycle = a->alpha * ha.gamma < 0.0;
                const double rho_bar = cycle ? std::sqrt(-a->alpha / ha.gamma) : kNaN;
                Vec3 x0(0.0, 0.01, 0.0);
                if (!a->x0.empty()) {
                    x0 = parse_vec3(a->x0, "x0");
                } else if (cycle) {
                    x0 = asymptotics::orbit_approx(a->alpha, ha).point(0.0);
                }
                const model::NormalField field(a->alpha, a->p);
                auto cfg = integrator(a->rtol, a->atol);
                cfg.record_stride = a->stride;
                const auto traj = integrate::integrate(field.as_field(), x0, 0.0, a->t_end, cfg);
                if (!o->csv.empty()) {
                    auto f = open_out(o->csv);
                    integrate::write_csv(f, traj);
                }

                Json res{{"status", integrate::to_string(traj.status)},
                         {"t_end", traj.t_end()},
                         {"x0", {x0[0], x0[1], x0[2]}},
                         {"x_end", {traj.x_end()[0], traj.x_end()[1], traj.x_end()[2]}},
                         {"accepted", traj.accepted},
                         {"rejected", traj.rejected},
                         {"gamma", ha.gamma},
                         {"rho_bar", number_or_null(rho_bar)},
                         {"x1_predicted", number_or_null(cycle ? ha.a * rho_bar * rho_bar : kNaN)}};
                if (!traj.message.empty()) res["message"] = traj.message;

                std::optional<experiments::WindowStats> w;
                try {
                    w = experiments::window_stats(traj, a->fraction);
                    res["window"] = experiments::to_json(*w);
                } catch (const std::exception& e) {
                    res["window"] = nullptr;
                    res["window_error"] = e.what();
                }

                Checks checks;
                if (has(a->checks, "freq-doubling")) {
                    checks.emplace_back("freq-doubling", w && std::abs(w->freq_ratio / 2.0 - 1.0) <= 0.05);
                }
                if (has(a->checks, "mean-radius")) {
                    checks.emplace_back("mean-radius", w && cycle && std::abs(w->rho_mean / rho_bar - 1.0) <= 0.10);
                }
                if (has(a->checks, "x1-mean")) {
                    const double pred = ha.a * rho_bar * rho_bar;
                    checks.emplace_back("x1-mean", w && cycle && std::abs(w->x1_mean / pred - 1.0) <= 0.15);
                }
                if (has(a->checks, "multimodal")) {
                    isi::SpikeOptions so;
                    so.r1 = a->r1;
                    so.r2 = a->r2;
                    so.epsilon = std::sqrt(std::abs(a->alpha));
                    const auto train = isi::detect_multimodal(traj, so);
                    res["multimodal"] = {{"multimodal", train.multimodal},
                                         {"spikes", train.spikes.size()},
                                         {"reason", train.reason}};
                    checks.emplace_back("multimodal", train.multimodal);
                }
                if (!traj.ok()) checks.emplace_back("integration", false);
                return finish(out, *o, "simulate", prm->echo(), std::move(res), checks);
            }};
}

// ---------------------------------------------------------------- orbit-geometry

struct GeometryArgs {
    double alpha = 1e-3;
    double p = 2.2;
    int n = 256;
    double h = 1e-2;
    bool force = false;
};

Command make_orbit_geometry(CLI::App& root) {
    auto* app = root.add_subcommand("orbit-geometry", "Curvature and torsion of the leading-order cycle");
    auto o = std::make_shared<Outputs>();
    add_outputs(app, *o);
    auto a = std::make_shared<GeometryArgs>();
    auto prm = std::make_shared<Params>(app);
    prm->add("alpha", a->alpha, "real part of the complex eigenvalue pair");
    prm->add("p", a->p, "kinetic exponent");
    prm->add("n", a->n, "angle samples over one turn");
    prm->add("fd-step", a->h, "finite-difference step in the angle");
    prm->flag("force", a->force, "allow parameters outside the validity ranges");
    return {app, [=](std::ostream& out) {
                check_alpha(a->alpha, a->force, false);
                check_p(a->p, a->force);
                if (a->n < 4) throw DomainError("n must be at least 4");
                const auto ha = asymptotics::hopf_asymptotics_for(a->p);
                const auto orb = asymptotics::orbit_approx(a->alpha, ha);
                auto planar = orb;
                planar.A = 0.0;
                const double shift = 0.5 * orb.phase;

                std::ofstream f;
                if (!o->csv.empty()) {
                    f = open_out(o->csv);
                    f << "theta,x1,x2,x3,curvature,torsion,curvature_fd,torsion_fd,curvature_leading,torsion_leading\n";
                }
                double fd_dev = 0.0, odd_dev = 0.0, planar_torsion = 0.0, planar_torsion_fd = 0.0;
                for (int i = 0; i < a->n; ++i) {
                    const double th = 2.0 * kPi * i / a->n;
                    // the phase only rotates the cycle in the (x2, x3) plane
                    const auto ex = asymptotics::curvature_torsion(th - shift, orb.A, a->alpha, ha.gamma);
                    const auto mirror = asymptotics::curvature_torsion(shift - th, orb.A, a->alpha, ha.gamma);
                    const auto lead = asymptotics::curvature_torsion_leading(th - shift, orb.A, a->alpha, ha.gamma);
                    const auto fd = asymptotics::frenet_fd([&](double s) { return orb.point(s); }, th, a->h);
                    const auto pl = asymptotics::curvature_torsion(th, 0.0, a->alpha, ha.gamma);
                    const auto pl_fd = asymptotics::frenet_fd([&](double s) { return planar.point(s); }, th, a->h);
                    fd_dev = std::max({fd_dev, std::abs(ex.curvature - fd.curvature) / std::max(1.0, ex.curvature),
                                       std::abs(ex.torsion - fd.torsion) / std::max(1.0, std::abs(ex.torsion))});
                    odd_dev = std::max(odd_dev, std::abs(ex.torsion + mirror.torsion));
                    planar_torsion = std::max(planar_torsion, std::abs(pl.torsion));
                    planar_torsion_fd = std::max(planar_torsion_fd, std::abs(pl_fd.torsion));
                    if (f.is_open()) {
                        const Vec3 x = orb.point(th);
                        csv_row(f, {th, x[0], x[1], x[2], ex.curvature, ex.torsion, fd.curvature, fd.torsion,
                                    lead.curvature, lead.torsion});
                    }
                }
                Json res{{"asymptotics", serialize::to_json(ha)},
                         {"rho_bar", orb.rho_bar},
                         {"max_fd_deviation", fd_dev},
                         {"max_torsion_odd_deviation", odd_dev},
                         {"planar_max_torsion", planar_torsion},
                         {"planar_max_torsion_fd", planar_torsion_fd}};
                const Checks checks{{"fd_match", fd_dev <= 1e-6},
                                    {"torsion_odd", odd_dev <= 1e-12 * std::max(1.0, std::abs(ha.gamma / a->alpha))},
                                    {"planar", planar_torsion == 0.0}};
                return finish(out, *o, "orbit-geometry", prm->echo(), std::move(res), checks);
            }};
}

// ---------------------------------------------------------------- return-map

struct ReturnMapArgs {
    double alpha = 0.0445;
    double p = kNaN;
    double gamma = -0.0126;
    double theta_bar = 0.0;
    int n_transient = 0;
    int n_samples = 60;
    std::string seed_radii = "0.005,0.01,0.02,0.04,0.08";
    double rtol = 1e-10;
    double atol = 1e-12;
    bool force = false;
};

Command make_return_map(CLI::App& root) {
    auto* app = root.add_subcommand("return-map", "Numeric first-return map in I = 1/rho^2");
    auto o = std::make_shared<Outputs>();
    add_outputs(app, *o);
    auto a = std::make_shared<ReturnMapArgs>();
    auto prm = std::make_shared<Params>(app);
    prm->add("alpha", a->alpha, "real part of the complex eigenvalue pair");
    prm->add("p", a->p, "kinetic exponent (default: solved from --gamma)");
    prm->add("gamma", a->gamma, "target first Lyapunov coefficient when --p is not given");
    prm->add("theta-bar", a->theta_bar, "section angle");
    prm->add("n-transient", a->n_transient, "crossings discarded per seed");
    prm->add("n-samples", a->n_samples, "crossings kept per seed");
    prm->add("seed-radii", a->seed_radii, "comma-separated start radii on the slow manifold");
    prm->add("rtol", a->rtol, "relative tolerance");
    prm->add("atol", a->atol, "absolute tolerance");
    prm->flag("force", a->force, "allow parameters outside the validity ranges");
    return {app, [=](std::ostream& out) {
                check_alpha(a->alpha, a->force, false);
                const double p = std::isfinite(a->p) ? a->p : maps::p_for_gamma(a->gamma);
                check_p(p, a->force);
                if (a->n_samples < 2 || a->n_transient < 0) throw DomainError("invalid sample counts");
                experiments::ReturnMapRunOptions ro;
                ro.theta_bar = a->theta_bar;
                ro.n_transient = a->n_transient;
                ro.n_samples = a->n_samples;
                ro.seed_radii = parse_list(a->seed_radii);
                ro.cfg = integrator(a->rtol, a->atol);
                const auto r = experiments::return_map_experiment(a->alpha, p, ro);
                if (!o->csv.empty()) {
                    auto f = open_out(o->csv);
                    f << "I_k,I_k1,t_k\n";
                    for (std::size_t i = 0; i < r.map.data.size(); ++i) {
                        csv_row(f, {r.map.data.I_k[i], r.map.data.I_k1[i], r.map.data.t_k[i]});
                    }
                }
                const Checks checks{
                    {"inner_decreasing", r.slopes.n_inner >= 2 && r.slopes.inner_slope < 0.0},
                    {"outer_slope", std::abs(r.slopes.outer_slope / r.predicted_outer_slope - 1.0) <= 0.10}};
                return finish(out, *o, "return-map", prm->echo(), experiments::to_json(r), checks);
            }};
}

// ---------------------------------------------------------------- isi-scan

struct IsiArgs {
    std::string vary = "gamma";
    std::string values;
    double alpha = 0.045;
    double gamma = 0.778;
    double p = kNaN;
    double t_end = 4000.0;
    double r1 = 1.0;
    double r2 = 0.3;
    double rtol = 1e-10;
    double atol = 1e-12;
    std::vector<std::string> checks;
    bool force = false;
    int jobs = 1;
};

Command make_isi_scan(CLI::App& root) {
    auto* app = root.add_subcommand("isi-scan", "Interspike intervals of multimodal oscillations");
    auto o = std::make_shared<Outputs>();
    add_outputs(app, *o);
    auto a = std::make_shared<IsiArgs>();
    auto prm = std::make_shared<Params>(app);
    prm->add("vary", a->vary, "gamma (alpha fixed) or alpha (gamma fixed)")
        ->check(CLI::IsMember({"gamma", "alpha"}));
    prm->add("values", a->values, "comma-separated sweep values (defaults depend on --vary)");
    prm->add("alpha", a->alpha, "alpha held fixed in a gamma sweep, or used for a single run");
    prm->add("gamma", a->gamma, "gamma held fixed in an alpha sweep");
    prm->add("p", a->p, "single run at (alpha, p); writes the interval series");
    prm->add("t-end", a->t_end, "integration horizon per run");
    prm->add("r1", a->r1, "entry ball radius factor, |x| <= r1 alpha");
    prm->add("r2", a->r2, "spike threshold |x| > r2");
    prm->add("rtol", a->rtol, "relative tolerance");
    prm->add("atol", a->atol, "absolute tolerance");
    prm->add("check", a->checks, "scaling")->delimiter(',');
    prm->flag("force", a->force, "allow parameters outside the validity ranges");
    prm->add("jobs", a->jobs, "worker threads (default HOPFSCOPE_JOBS)");
    return {app, [=](std::ostream& out) {
                require_known(a->checks, {"scaling"}, "check");
                if (!(a->t_end > 0.0)) throw DomainError("t-end must be positive");
                experiments::IsiRunOptions ro;
                ro.t_end = a->t_end;
                ro.r1 = a->r1;
                ro.r2 = a->r2;
                ro.cfg = integrator(a->rtol, a->atol);

                if (std::isfinite(a->p)) {
                    check_alpha(a->alpha, a->force, false);
                    check_p(a->p, a->force);
                    const auto r = experiments::isi_run(a->alpha, a->p, ro);
                    if (!o->csv.empty() && r.ok) {
                        auto f = open_out(o->csv);
                        isi::write_isi_csv(f, r.series);
                    }
                    Checks checks;
                    if (has(a->checks, "scaling")) throw DomainError("--check scaling needs a sweep, not --p");
                    checks.emplace_back("multimodal", r.ok);
                    return finish(out, *o, "isi-scan", prm->echo(), experiments::to_json(r), checks);
                }

                const bool by_gamma = a->vary == "gamma";
                const std::string dflt = by_gamma ? "0.01,0.02,0.04,0.08,0.16,0.32" : "0.03,0.04,0.05,0.06,0.07,0.08,0.1";
                const auto values = parse_list(a->values.empty() ? dflt : a->values);
                if (by_gamma) {
                    check_alpha(a->alpha, a->force, false);
                    for (double g : values) {
                        if (!(g > 0.0)) throw DomainError("gamma values must be positive");
                    }
                } else {
                    if (!(a->gamma > 0.0)) throw DomainError("gamma must be positive");
                    for (double al : values) check_alpha(al, a->force, false);
                }
                const auto s = by_gamma ? experiments::isi_scaling_vs_gamma(a->alpha, values, ro, a->jobs)
                                        : experiments::isi_scaling_vs_alpha(a->gamma, values, ro, a->jobs);
                if (!o->csv.empty()) {
                    auto f = open_out(o->csv);
                    f << "param,alpha,p,gamma,ok,n_spikes,mean_isi,cv\n";
                    for (std::size_t i = 0; i < s.runs.size(); ++i) {
                        const auto& r = s.runs[i];
                        csv_row(f, {values[i], r.alpha, r.p, r.gamma, r.ok ? 1.0 : 0.0,
                                    static_cast<double>(r.train.spikes.size()), r.ok ? r.mean_isi : kNaN,
                                    r.ok ? r.cv : kNaN});
                    }
                }
                Checks checks;
                if (has(a->checks, "scaling")) {
                    if (by_gamma) {
                        checks.emplace_back("slope", s.fit.relative_error <= 0.15);
                    } else {
                        checks.emplace_back("strictly_decreasing", s.fit.strictly_decreasing);
                        checks.emplace_back("template_r2", s.fit.r2 > 0.95);
                    }
                }
                return finish(out, *o, "isi-scan", prm->echo(), experiments::to_json(s), checks);
            }};
}

// ---------------------------------------------------------------- verify-global

struct GlobalArgs {
    double alpha = 0.045;
    double p = 3.0;
    int ni = 20;
    int nj = 20;
    double rho = 0.1;
    double x1_lo = -0.02;
    double x1_hi = 0.02;
    std::string planes = "-0.65,-0.55,-0.45,-0.35,-0.25";
    double max_flight = 2000.0;
    int calibration = 10;
    double rtol = 1e-10;
    double atol = 1e-12;
    bool force = false;
    int jobs = 1;
};

Command make_verify_global(CLI::App& root) {
    auto* app = root.add_subcommand("verify-global", "Flow map from the cylinder section to the return planes");
    auto o = std::make_shared<Outputs>();
    add_outputs(app, *o);
    auto a = std::make_shared<GlobalArgs>();
    auto prm = std::make_shared<Params>(app);
    prm->add("alpha", a->alpha, "real part of the complex eigenvalue pair");
    prm->add("p", a->p, "kinetic exponent");
    prm->add("ni", a->ni, "mesh points in x1");
    prm->add("nj", a->nj, "mesh points in the angle");
    prm->add("rho", a->rho, "cylinder radius");
    prm->add("x1-lo", a->x1_lo, "lower x1 edge of the cylinder window");
    prm->add("x1-hi", a->x1_hi, "upper x1 edge of the cylinder window");
    prm->add("planes", a->planes, "comma-separated x1 planes, outermost first");
    prm->add("max-flight", a->max_flight, "flight time limit per mesh point");
    prm->add("calibration-mesh", a->calibration, "side of the staggered mesh used to fit zeta");
    prm->add("rtol", a->rtol, "relative tolerance");
    prm->add("atol", a->atol, "absolute tolerance");
    prm->flag("force", a->force, "allow parameters outside the validity ranges");
    prm->add("jobs", a->jobs, "worker threads (default HOPFSCOPE_JOBS)");
    return {app, [=](std::ostream& out) {
                check_alpha(a->alpha, a->force, false);
                check_p(a->p, a->force);
                if (a->ni < 1 || a->nj < 1 || a->calibration < 1) throw DomainError("mesh sizes must be positive");
                maps::SectionGeometry geo;
                geo.rho = a->rho;
                geo.x1_lo = a->x1_lo;
                geo.x1_hi = a->x1_hi;
                geo.planes = parse_list(a->planes);
                geo.max_flight_time = a->max_flight;
                const auto g = experiments::global_check(a->alpha, a->p, a->ni, a->nj, geo, a->calibration,
                                                         integrator(a->rtol, a->atol), a->jobs);
                if (!o->csv.empty()) {
                    auto f = open_out(o->csv);
                    f << "i,j,x1_start,theta_start,ok,plane,y1,y2,flight_time\n";
                    for (const auto& s : g.samples) {
                        if (!s.ok) {
                            csv_row(f, {double(s.i), double(s.j), s.x1_start, s.theta_start, 0.0, kNaN, kNaN, kNaN,
                                        kNaN});
                            continue;
                        }
                        for (std::size_t k = 0; k < s.ends.size(); ++k) {
                            csv_row(f, {double(s.i), double(s.j), s.x1_start, s.theta_start, 1.0, geo.planes[k],
                                        s.ends[k][0], s.ends[k][1], s.flight_times[k]});
                        }
                    }
                }
                const Checks checks{{"diameter_monotone", g.diameter_monotone},
                                    {"zeta_positive", g.zeta > 0.0},
                                    {"min_norm_above_zeta", g.holdout_min_norm >= g.zeta}};
                return finish(out, *o, "verify-global", prm->echo(), experiments::to_json(g), checks);
            }};
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
    std::string param = "p";
    std::string range = "2.6:2.8:0.005";
    double alpha = 0.0445;
    double p = 3.0;
    double theta_bar = 0.0;
    std::string seed = "0,0.02,0";
    int n_transient = 300;
    int n_samples = 200;
    bool analytic = false;
    double mu = 1.0;
    double c = -1.0;
    std::string attractor_csv;
    double rtol = 1e-10;
    double atol = 1e-12;
    std::vector<std::string> checks;
    bool force = false;
    int jobs = 1;
};

Command make_sweep(CLI::App& root) {
    auto* app = root.add_subcommand("sweep", "Orbit classification of the return map along a parameter grid");
    auto o = std::make_shared<Outputs>();
    add_outputs(app, *o);
    auto a = std::make_shared<SweepArgs>();
    auto prm = std::make_shared<Params>(app);
    prm->add("param", a->param, "p, alpha or gamma")->check(CLI::IsMember({"p", "alpha", "gamma"}));
    prm->add("range", a->range, "grid lo:hi:step");
    prm->add("alpha", a->alpha, "alpha held fixed when sweeping p or gamma");
    prm->add("p", a->p, "p held fixed when sweeping alpha");
    prm->add("theta-bar", a->theta_bar, "section angle");
    prm->add("seed", a->seed, "start x1,x2,x3");
    prm->add("n-transient", a->n_transient, "crossings discarded");
    prm->add("n-samples", a->n_samples, "crossings classified");
    prm->flag("analytic", a->analytic, "iterate the analytic cycle map in gamma instead of the flow");
    prm->add("mu", a->mu, "analytic map: linear coefficient");
    prm->add("c", a->c, "analytic map: second Lyapunov coefficient");
    prm->add("rtol", a->rtol, "relative tolerance");
    prm->add("atol", a->atol, "absolute tolerance");
    prm->add("check", a->checks, "cascade, chaos")->delimiter(',');
    prm->flag("force", a->force, "allow parameters outside the validity ranges");
    prm->add("jobs", a->jobs, "worker threads (default HOPFSCOPE_JOBS)");
    app->add_option("--attractor-csv", a->attractor_csv, "write the post-transient iterates here");
    return {app, [=](std::ostream& out) {
                require_known(a->checks, {"cascade", "chaos"}, "check");
                const auto grid = parse_range(a->range);
                maps::SweepResult res;
                if (a->analytic) {
                    if (a->param != "gamma") throw DomainError("--analytic sweeps gamma (use --param gamma)");
                    check_alpha(a->alpha, a->force, false);
                    asymptotics::MapParams mp;
                    mp.mu = a->mu;
                    mp.c = a->c;
                    mp.epsilon = std::sqrt(std::abs(a->alpha));
                    mp.omega = 2.0 * kPi / std::sqrt(3.0);
                    res = maps::sweep_analytic_G(mp, grid.front(), grid.back(), static_cast<int>(grid.size()),
                                                 a->n_transient, a->n_samples);
                } else {
                    maps::SweepConfig sc;
                    sc.param = a->param == "p" ? maps::SweepParam::p
                               : a->param == "alpha" ? maps::SweepParam::alpha
                                                     : maps::SweepParam::gamma_proxy;
                    sc.lo = grid.front();
                    sc.hi = grid.back();
                    sc.steps = static_cast<int>(grid.size());
                    sc.alpha = a->alpha;
                    sc.p = a->p;
                    if (sc.param == maps::SweepParam::alpha) {
                        check_p(a->p, a->force);
                        for (double al : grid) check_alpha(al, a->force, false);
                    } else {
                        check_alpha(a->alpha, a->force, false);
                        if (sc.param == maps::SweepParam::p) {
                            for (double p : grid) check_p(p, a->force);
                        }
                    }
                    sc.theta_bar = a->theta_bar;
                    sc.seed = parse_vec3(a->seed, "seed");
                    sc.n_transient = a->n_transient;
                    sc.n_samples = a->n_samples;
                    sc.cfg = integrator(a->rtol, a->atol);
                    sc.jobs = a->jobs;
                    res = maps::sweep_bifurcation(sc);
                }
                if (!o->csv.empty()) {
                    auto f = open_out(o->csv);
                    f << "param,p,alpha,gamma,kind,period,map_lyapunov,ci_lo,ci_hi,ok\n";
                    for (const auto& pt : res.points) {
                        for (double v : {pt.param, pt.p, pt.alpha, pt.gamma}) {
                            write_double(f, v);
                            f << ',';
                        }
                        f << maps::to_string(pt.cls.kind) << ',' << pt.cls.period << ',';
                        if (pt.cls.n_used > 0) {
                            write_double(f, pt.cls.map_lyapunov);
                            f << ',';
                            write_double(f, pt.cls.ci_lo);
                            f << ',';
                            write_double(f, pt.cls.ci_hi);
                        } else {
                            f << ",,";
                        }
                        f << ',' << (pt.ok ? 1 : 0) << '\n';
                    }
                }
                if (!a->attractor_csv.empty()) {
                    auto f = open_out(a->attractor_csv);
                    f << "param,value\n";
                    for (const auto& pt : res.points) {
                        for (double v : pt.attractor) csv_row(f, {pt.param, v});
                    }
                }
                Checks checks;
                if (has(a->checks, "cascade")) checks.emplace_back("cascade", res.longest_cascade >= 2);
                if (has(a->checks, "chaos")) checks.emplace_back("chaos", res.chaotic_window);
                return finish(out, *o, "sweep", prm->echo(), serialize::to_json(res), checks);
            }};
}

}  // namespace

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (trim(item).empty()) throw DomainError("empty entry in list '" + text + "'");
        v.push_back(parse_number(item, "list"));
    }
    if (v.empty()) throw DomainError("empty list");
    return v;
}

std::vector<double> parse_range(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw DomainError("range '" + text + "': expected lo:hi:step");
    const double lo = parse_number(parts[0], "range");
    const double hi = parse_number(parts[1], "range");
    const double step = parse_number(parts[2], "range");
    if (!(step > 0.0) || !(hi >= lo)) throw DomainError("range '" + text + "': need hi >= lo and step > 0");
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
    if (n > 1'000'000) throw DomainError("range '" + text + "': too many points");
    std::vector<double> g(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + step * static_cast<double>(i);
    return g;
}

int default_jobs() {
    const char* env = std::getenv("HOPFSCOPE_JOBS");
    if (env == nullptr) return 1;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) return 1;
    return static_cast<int>(std::min<long>(v, 1024));
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App root("Multimodal oscillations near an Andronov-Hopf point of the three-mode combustion model",
                  "hopfscope");
    root.require_subcommand(1);
    std::vector<Command> commands{make_simulate(root),       make_hopf_locate(root), make_lyapunov(root),
                                  make_orbit_geometry(root), make_return_map(root),  make_isi_scan(root),
                                  make_verify_global(root),  make_sweep(root)};
    try {
        root.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << root.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << root.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
    for (const auto& c : commands) {
        if (!c.app->parsed()) continue;
        try {
            CLI::Option* cfg = c.app->get_option_no_throw("--config");
            if (cfg != nullptr && cfg->count() > 0) apply_config(c.app, cfg->as<std::string>());
            CLI::Option* jobs = c.app->get_option_no_throw("--jobs");
            if (jobs != nullptr && jobs->count() == 0) {
                jobs->add_result(std::to_string(default_jobs()));
                jobs->run_callback();
            }
            return c.run(out);
        } catch (const std::exception& e) {
            err << "error: " << c.app->get_name() << ": " << e.what() << "\n";
            return kExitError;
        }
    }
    return kExitError;
}

}  // namespace hopfscope::cli
