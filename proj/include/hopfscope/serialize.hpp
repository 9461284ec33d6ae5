#pragma once

// JSON views of result types. Undefined quantities serialize as null.

#include "hopfscope/asymptotics.hpp"
#include "hopfscope/isi.hpp"
#include "hopfscope/maps.hpp"
#include "hopfscope/model.hpp"
#include "hopfscope/taylor.hpp"

#include <json.hpp>

#include <optional>

namespace hopfscope::serialize {

using Json = nlohmann::ordered_json;

Json number_or_null(double v);
Json number_or_null(const std::optional<double>& v);

/// Keys "a_22", "b_122", ... for every ordered monomial, plus alpha, beta and the linear part.
Json to_json(const taylor::TaylorData& td);
taylor::TaylorData taylor_from_json(const Json& j);

/// Keys beta, gamma, a, A, vartheta, c_fit, omega; phase and p alongside.
Json to_json(const asymptotics::HopfAsymptotics& ha);
Json to_json(const asymptotics::LyapunovReport& r);
Json to_json(const asymptotics::IsiBounds& b);
Json to_json(const asymptotics::SecondLyapunovFit& f);
Json to_json(const model::HopfPoint& h);

Json to_json(const maps::OrbitClass& oc);
Json to_json(const maps::BranchSlopes& bs);
Json to_json(const maps::ImageStats& st);
/// Scalars and violation lists; the per-grid arrays are left to CSV.
Json to_json(const maps::ContractionProfile& cp);
Json to_json(const maps::SweepResult& sr);

Json to_json(const isi::ScalingFit& f);
Json to_json(const isi::BoundsReport& r);
Json to_json(const isi::BoundConstants& c);

}  // namespace hopfscope::serialize
