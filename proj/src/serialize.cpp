#include "hopfscope/serialize.hpp"

#include "hopfscope/errors.hpp"

#include <cmath>
#include <string>

namespace hopfscope::serialize {

using taylor::Component;

namespace {

char letter(Component s) { return "abc"[static_cast<int>(s)]; }

constexpr Component kComponents[] = {Component::a, Component::b, Component::c};

std::string quad_key(Component s, int i, int j) {
    return std::string(1, letter(s)) + "_" + std::to_string(i) + std::to_string(j);
}

std::string cubic_key(Component s, int i, int j, int k) {
    return std::string(1, letter(s)) + "_" + std::to_string(i) + std::to_string(j) + std::to_string(k);
}

}  // namespace

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json number_or_null(const std::optional<double>& v) { return v ? number_or_null(*v) : Json(nullptr); }

Json to_json(const taylor::TaylorData& td) {
    Json j;
    j["alpha"] = td.alpha;
    j["beta"] = td.beta;
    Json lin = Json::array();
    for (int r = 0; r < 3; ++r) lin.push_back({td.linear(r, 0), td.linear(r, 1), td.linear(r, 2)});
    j["linear"] = lin;
    for (auto s : kComponents) {
        for (int i = 1; i <= 3; ++i)
            for (int k = i; k <= 3; ++k) j[quad_key(s, i, k)] = td.quad(s, i, k);
    }
    for (auto s : kComponents) {
        for (int i = 1; i <= 3; ++i)
            for (int k = i; k <= 3; ++k)
                for (int l = k; l <= 3; ++l) j[cubic_key(s, i, k, l)] = td.cubic(s, i, k, l);
    }
    return j;
}

taylor::TaylorData taylor_from_json(const Json& j) {
    taylor::TaylorData td;
    try {
        td.alpha = j.value("alpha", 0.0);
        td.beta = j.value("beta", 0.0);
        if (j.contains("linear")) {
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) td.linear(r, c) = j["linear"].at(r).at(c).get<double>();
        }
        for (auto s : kComponents) {
            for (int i = 1; i <= 3; ++i)
                for (int k = i; k <= 3; ++k) td.set_quad(s, i, k, j.value(quad_key(s, i, k), 0.0));
            for (int i = 1; i <= 3; ++i)
                for (int k = i; k <= 3; ++k)
                    for (int l = k; l <= 3; ++l) td.set_cubic(s, i, k, l, j.value(cubic_key(s, i, k, l), 0.0));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DomainError(std::string("taylor_from_json: ") + e.what());
    }
    return td;
}

Json to_json(const asymptotics::HopfAsymptotics& ha) {
    Json j;
    j["p"] = ha.p;
    j["beta"] = ha.beta;
    j["gamma"] = ha.gamma;
    j["a"] = ha.a;
    j["A"] = ha.A;
    j["vartheta"] = number_or_null(ha.vartheta);
    j["phase"] = number_or_null(ha.phase);
    j["c_fit"] = number_or_null(ha.c_fit);
    j["omega"] = ha.omega;
    return j;
}

Json to_json(const asymptotics::LyapunovReport& r) {
    return Json{{"gamma", r.gamma}, {"gamma_quadrature", r.gamma_quadrature}, {"gamma_truncated", r.gamma_truncated}};
}

Json to_json(const asymptotics::IsiBounds& b) {
    return Json{{"tau_minus", number_or_null(b.tau_minus)},
                {"tau_plus", number_or_null(b.tau_plus)},
                {"C_minus", b.C_minus},
                {"C_plus", b.C_plus},
                {"chi", b.chi},
                {"epsilon", b.epsilon},
                {"alpha", b.alpha},
                {"gamma", b.gamma}};
}

Json to_json(const asymptotics::SecondLyapunovFit& f) {
    return Json{{"c", number_or_null(f.c)},
                {"mu", f.mu},
                {"gamma", f.gamma},
                {"rms_residual", number_or_null(f.rms_residual)},
                {"condition", number_or_null(f.condition)},
                {"ill_conditioned", f.ill_conditioned},
                {"n_used", f.n_used}};
}

Json to_json(const model::HopfPoint& h) {
    return Json{{"nu_AH", h.nu}, {"beta", h.beta}, {"real_eigenvalue", h.real_eig}, {"transversality", h.transversality}};
}

Json to_json(const maps::OrbitClass& oc) {
    Json j{{"kind", maps::to_string(oc.kind)}, {"label", oc.label()}, {"period", oc.period}};
    if (oc.n_used > 0) {
        j["map_lyapunov"] = number_or_null(oc.map_lyapunov);
        j["ci"] = {number_or_null(oc.ci_lo), number_or_null(oc.ci_hi)};
    } else {
        j["map_lyapunov"] = nullptr;
        j["ci"] = nullptr;
    }
    j["n_used"] = oc.n_used;
    return j;
}

Json to_json(const maps::BranchSlopes& bs) {
    return Json{{"inner_slope", number_or_null(bs.inner_slope)},
                {"outer_slope", number_or_null(bs.outer_slope)},
                {"outer_r2", number_or_null(bs.outer_r2)},
                {"inner_range", {bs.inner_lo, bs.inner_hi}},
                {"outer_range", {bs.outer_lo, bs.outer_hi}},
                {"n_inner", bs.n_inner},
                {"n_outer", bs.n_outer}};
}

Json to_json(const maps::ImageStats& st) {
    return Json{{"plane", st.plane}, {"n", st.n}, {"diameter", st.diameter}, {"min_norm", st.min_norm}};
}

Json to_json(const maps::ContractionProfile& cp) {
    return Json{{"d1", cp.d1},
                {"d2", cp.d2},
                {"d3", cp.d3},
                {"x_star", number_or_null(cp.x_star)},
                {"monotone_ok", cp.monotone_ok},
                {"positive_ok", cp.positive_ok},
                {"w_positive_ok", cp.w_positive_ok},
                {"min_ratio_bar", number_or_null(cp.min_ratio_bar)},
                {"max_ratio_under", number_or_null(cp.max_ratio_under)},
                {"monotonicity_violations", cp.monotonicity_violations},
                {"w_violations", cp.w_violations}};
}

Json to_json(const maps::SweepResult& sr) {
    Json pts = Json::array();
    for (const auto& p : sr.points) {
        Json j{{"param", p.param}, {"p", p.p}, {"alpha", p.alpha}, {"gamma", p.gamma}, {"ok", p.ok}};
        j["class"] = to_json(p.cls);
        if (!p.error.empty()) j["error"] = p.error;
        pts.push_back(std::move(j));
    }
    Json dbl = Json::array();
    for (const auto& d : sr.doublings) {
        dbl.push_back({{"param_before", d.param_before}, {"param_after", d.param_after}, {"from", d.from}, {"to", d.to}});
    }
    return Json{{"points", pts},
                {"doublings", dbl},
                {"longest_cascade", sr.longest_cascade},
                {"chaotic_window", sr.chaotic_window}};
}

Json to_json(const isi::ScalingFit& f) {
    Json j{{"mode", isi::to_string(f.mode)}, {"n", f.n}};
    if (f.mode == isi::ScalingMode::vs_ln_gamma) {
        j["slope"] = f.slope;
        j["intercept"] = f.intercept;
        j["theoretical_slope"] = f.theoretical_slope;
        j["relative_error"] = f.relative_error;
    } else {
        j["C_fit"] = f.C_fit;
    }
    j["r2"] = number_or_null(f.r2);
    j["residuals"] = f.residuals;
    j["strictly_decreasing"] = f.strictly_decreasing;
    j["warning"] = f.warning.empty() ? Json(nullptr) : Json(f.warning);
    return j;
}

Json to_json(const isi::BoundsReport& r) {
    return Json{{"n", r.n},
                {"inside", r.inside},
                {"fraction_inside", r.fraction_inside},
                {"min_tau", r.min_tau},
                {"max_tau", r.max_tau},
                {"tau_minus", number_or_null(r.tau_minus)},
                {"tau_plus", number_or_null(r.tau_plus)}};
}

Json to_json(const isi::BoundConstants& c) {
    return Json{{"C_minus", c.C_minus}, {"C_plus", c.C_plus}, {"chi", c.chi}};
}

}  // namespace hopfscope::serialize
