#pragma once

// Scenario / parameter-path files (JSON, schema version "1"), report
// serialisation, and CSV helpers.
//
// Scenario file:
//   {
//     "version": "1", "d": 1, "r": 0.0, "x0": 1.0,
//     "utility": {"kind": "log"} | {"kind": "power", "gamma": 0.5}
//                                | {"kind": "exponential", "beta": 1.0},
//     "cells": [
//       {"t_start": 0, "t_end": 1,
//        "drift": {"kind": "box", "lower": [..], "upper": [..]}
//               | {"kind": "ball", "center": [..], "radius": 0.02},
//        "vol": {"eig_min": 0.04, "eig_max": 0.09}}
//     ]
//   }
// Unknown fields are rejected. Schema problems raise ParseError; semantic
// problems (gaps, eig_min <= 0, ...) are left to validate_scenario.

#include "robust_merton/core.hpp"
#include "robust_merton/simulator.hpp"
#include "robust_merton/solver.hpp"
#include "robust_merton/verification.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace robust_merton::io {

using json = nlohmann::json;

inline constexpr const char* kSchemaVersion = "1";

namespace detail {

inline void require_object(const json& j, std::string_view where) {
    if (!j.is_object()) throw ParseError(std::string(where) + ": expected an object");
}

inline void only_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) throw ParseError(std::string(where) + ": unknown field '" + key + "'");
    }
}

inline const json& field(const json& j, const char* key, std::string_view where) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(std::string(where) + ": missing field '" + key + "'");
    return *it;
}

inline double number(const json& j, const char* key, std::string_view where) {
    const auto& v = field(j, key, where);
    if (!v.is_number()) throw ParseError(std::string(where) + ": field '" + key + "' must be a number");
    return v.get<double>();
}

inline Vector vector_of(const json& j, const char* key, std::string_view where) {
    const auto& v = field(j, key, where);
    if (!v.is_array()) throw ParseError(std::string(where) + ": field '" + key + "' must be an array");
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw ParseError(std::string(where) + ": '" + key + "' must hold numbers");
        out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    }
    return out;
}

inline Matrix matrix_of(const json& j, const char* key, std::string_view where) {
    const auto& v = field(j, key, where);
    if (!v.is_array() || v.empty()) throw ParseError(std::string(where) + ": '" + key + "' must be a matrix");
    const std::size_t rows = v.size();
    const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
    Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        if (!v[i].is_array() || v[i].size() != cols) {
            throw ParseError(std::string(where) + ": '" + key + "' rows must have equal length");
        }
        for (std::size_t k = 0; k < cols; ++k) {
            if (!v[i][k].is_number()) throw ParseError(std::string(where) + ": '" + key + "' must hold numbers");
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v[i][k].get<double>();
        }
    }
    return out;
}

inline void check_version(const json& j, std::string_view where) {
    const auto& v = field(j, "version", where);
    if (!v.is_string() || v.get<std::string>() != kSchemaVersion) {
        throw ParseError(std::string(where) + ": version must be the string \"1\"");
    }
}

inline json parse_text(const std::string& text, std::string_view where) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string(where) + ": " + e.what());
    }
}

}  // namespace detail

inline json to_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline json to_json(const Matrix& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        a.push_back(std::move(row));
    }
    return a;
}

inline json to_json(const UtilitySpec& u) {
    json j{{"kind", utility_name(u)}};
    if (const auto* p = std::get_if<PowerUtility>(&u)) j["gamma"] = p->gamma;
    if (const auto* e = std::get_if<ExponentialUtility>(&u)) j["beta"] = e->beta;
    return j;
}

inline json to_json(const DriftSet& set) {
    if (const auto* box = std::get_if<BoxSet>(&set)) {
        return json{{"kind", "box"}, {"lower", to_json(box->lower)}, {"upper", to_json(box->upper)}};
    }
    const auto& ball = std::get<BallSet>(set);
    return json{{"kind", "ball"}, {"center", to_json(ball.center)}, {"radius", ball.radius}};
}

inline json to_json(const Scenario& s) {
    json cells = json::array();
    for (const auto& c : s.schedule.cells) {
        cells.push_back(json{{"t_start", c.t_start},
                             {"t_end", c.t_end},
                             {"drift", to_json(c.drift)},
                             {"vol", json{{"eig_min", c.vol.eig_min}, {"eig_max", c.vol.eig_max}}}});
    }
    return json{{"version", kSchemaVersion}, {"d", s.d},       {"r", s.r},
                {"x0", s.x0},                {"utility", to_json(s.utility)}, {"cells", std::move(cells)}};
}

inline UtilitySpec utility_from_json(const json& j) {
    constexpr std::string_view where = "utility";
    detail::require_object(j, where);
    const auto& kind = detail::field(j, "kind", where);
    if (!kind.is_string()) throw ParseError("utility: kind must be a string");
    const auto k = kind.get<std::string>();
    if (k == "log") {
        detail::only_keys(j, {"kind"}, where);
        return LogUtility{};
    }
    if (k == "power") {
        detail::only_keys(j, {"kind", "gamma"}, where);
        return PowerUtility{detail::number(j, "gamma", where)};
    }
    if (k == "exponential") {
        detail::only_keys(j, {"kind", "beta"}, where);
        return ExponentialUtility{detail::number(j, "beta", where)};
    }
    throw ParseError("utility: unknown kind '" + k + "'");
}

inline DriftSet drift_from_json(const json& j, std::string_view where) {
    detail::require_object(j, where);
    const auto& kind = detail::field(j, "kind", where);
    if (!kind.is_string()) throw ParseError(std::string(where) + ": kind must be a string");
    const auto k = kind.get<std::string>();
    if (k == "box") {
        detail::only_keys(j, {"kind", "lower", "upper"}, where);
        return BoxSet{detail::vector_of(j, "lower", where), detail::vector_of(j, "upper", where)};
    }
    if (k == "ball") {
        detail::only_keys(j, {"kind", "center", "radius"}, where);
        return BallSet{detail::vector_of(j, "center", where), detail::number(j, "radius", where)};
    }
    throw ParseError(std::string(where) + ": unknown drift kind '" + k + "'");
}

inline Scenario scenario_from_json(const json& j) {
    detail::require_object(j, "scenario");
    detail::only_keys(j, {"version", "d", "r", "x0", "utility", "cells"}, "scenario");
    detail::check_version(j, "scenario");
    Scenario s;
    const auto& d = detail::field(j, "d", "scenario");
    if (!d.is_number_integer()) throw ParseError("scenario: d must be an integer");
    s.d = d.get<Eigen::Index>();
    s.r = detail::number(j, "r", "scenario");
    s.x0 = detail::number(j, "x0", "scenario");
    s.utility = utility_from_json(detail::field(j, "utility", "scenario"));
    const auto& cells = detail::field(j, "cells", "scenario");
    if (!cells.is_array()) throw ParseError("scenario: cells must be an array");
    s.schedule.dimension = s.d;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::string where = "cells[" + std::to_string(i) + "]";
        const auto& c = cells[i];
        detail::require_object(c, where);
        detail::only_keys(c, {"t_start", "t_end", "drift", "vol"}, where);
        UncertaintyCell cell;
        cell.t_start = detail::number(c, "t_start", where);
        cell.t_end = detail::number(c, "t_end", where);
        cell.drift = drift_from_json(detail::field(c, "drift", where), where + ".drift");
        const auto& vol = detail::field(c, "vol", where);
        detail::require_object(vol, where + ".vol");
        detail::only_keys(vol, {"eig_min", "eig_max"}, where + ".vol");
        cell.vol = {detail::number(vol, "eig_min", where + ".vol"), detail::number(vol, "eig_max", where + ".vol")};
        s.schedule.cells.push_back(std::move(cell));
    }
    return s;
}

inline Scenario parse_scenario(const std::string& text) {
    return scenario_from_json(detail::parse_text(text, "scenario"));
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Scenario load_scenario(const std::filesystem::path& path) { return parse_scenario(read_file(path)); }

/// Parameter path file: {"version": "1", "segments": [{"t_start", "t_end", "mu": [..], "sigma": [[..]]}]}
inline ParameterPath parameter_path_from_json(const json& j) {
    detail::require_object(j, "parameter path");
    detail::only_keys(j, {"version", "segments"}, "parameter path");
    detail::check_version(j, "parameter path");
    const auto& segs = detail::field(j, "segments", "parameter path");
    if (!segs.is_array()) throw ParseError("parameter path: segments must be an array");
    ParameterPath path;
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const std::string where = "segments[" + std::to_string(i) + "]";
        detail::require_object(segs[i], where);
        detail::only_keys(segs[i], {"t_start", "t_end", "mu", "sigma"}, where);
        path.segments.push_back({detail::number(segs[i], "t_start", where), detail::number(segs[i], "t_end", where),
                                 detail::vector_of(segs[i], "mu", where), detail::matrix_of(segs[i], "sigma", where)});
    }
    return path;
}

inline json to_json(const ParameterPath& path) {
    json segs = json::array();
    for (const auto& s : path.segments) {
        segs.push_back(json{{"t_start", s.t_start}, {"t_end", s.t_end}, {"mu", to_json(s.mu)}, {"sigma", to_json(s.sigma)}});
    }
    return json{{"version", kSchemaVersion}, {"segments", std::move(segs)}};
}

inline ParameterPath load_parameter_path(const std::filesystem::path& path) {
    return parameter_path_from_json(detail::parse_text(read_file(path), "parameter path"));
}

/// Violations when a parameter path leaves the schedule's uncertainty sets.
inline std::vector<Violation> check_path_within_schedule(const ParameterPath& path, const UncertaintySchedule& sched,
                                                         double tol = 1e-9) {
    std::vector<Violation> out;
    if (std::abs(path.t_start()) > tol || std::abs(path.t_end() - sched.horizon()) > tol) {
        out.push_back({std::nullopt, "path_span", "parameter path must cover [0, T]"});
    }
    for (std::size_t i = 0; i < path.segments.size(); ++i) {
        const auto& seg = path.segments[i];
        if (seg.mu.size() != sched.dimension) {
            out.push_back({i, "dimension", "segment dimension differs from the scenario"});
            continue;
        }
        const Matrix cov = seg.sigma * seg.sigma.transpose();
        const Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(cov, Eigen::EigenvaluesOnly).eigenvalues();
        for (const auto& cell : sched.cells) {
            if (!(std::min(seg.t_end, cell.t_end) > std::max(seg.t_start, cell.t_start))) continue;
            if ((project(cell.drift, seg.mu) - seg.mu).norm() > tol) {
                out.push_back({i, "drift_set", "segment drift lies outside the overlapping cell's drift set"});
            }
            if (eig.minCoeff() < cell.vol.eig_min * (1 - tol) || eig.maxCoeff() > cell.vol.eig_max * (1 + tol)) {
                out.push_back({i, "vol_set", "segment covariance eigenvalues lie outside the cell's interval"});
            }
        }
    }
    return out;
}

inline json to_json(const RobustSolution& sol) {
    json cells = json::array();
    const bool cash = uses_cash_strategy(sol.utility());
    for (const auto& c : sol.cells()) {
        cells.push_back(json{{"index", c.cell_index},
                             {"t_start", c.t_start},
                             {"t_end", c.t_end},
                             {"mu_star", to_json(c.mu_star)},
                             {"sigma_star_scalar", c.vol_bound},
                             {"strategy", to_json(c.strategy)},
                             {"strategy_kind", cash ? "cash" : "fraction"},
                             {"rate", c.rate}});
    }
    return json{{"utility", to_json(sol.utility())},
                {"cells", std::move(cells)},
                {"value_at_origin", value_at(sol, 0.0, sol.scenario().x0)}};
}

inline json to_json(const SimEstimate& e) {
    return json{{"mean", e.mean}, {"std_error", e.std_error}, {"n_paths", e.n_paths}, {"seed", e.seed}};
}

inline json to_json(const SaddleScanReport& r) {
    return json{{"maximin", r.maximin},
                {"minimax", r.minimax},
                {"gap", r.gap},
                {"arg_pi", to_json(r.arg_pi)},
                {"arg_theta", json{{"mu", to_json(r.arg_theta.mu)}, {"sigma", to_json(r.arg_theta.sigma)},
                                   {"label", r.arg_theta.label}}},
                {"grid", json{{"lower", to_json(r.initial_grid.lower)},
                              {"upper", to_json(r.initial_grid.upper)},
                              {"step", r.initial_grid.step},
                              {"refinements", r.refinements},
                              {"final_step", r.final_step}}},
                {"evaluations", r.evaluations}};
}

/// %.17g: exact double round trip.
inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Residual rows as CSV: t,x,relative_residual (LF line endings).
inline std::string residual_csv(const ResidualReport& rep) {
    std::string out = "t,x,relative_residual\n";
    for (std::size_t i = 0; i < rep.points.size(); ++i) {
        out += format_number(rep.points[i].t) + "," + format_number(rep.points[i].x) + "," +
               format_number(rep.residuals[i]) + "\n";
    }
    return out;
}

/// Writes through a sibling temporary file and renames it into place.
inline void write_atomically(const std::filesystem::path& path, std::string_view contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw Error("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error("cannot move output into '" + path.string() + "'");
    }
}

}  // namespace robust_merton::io
