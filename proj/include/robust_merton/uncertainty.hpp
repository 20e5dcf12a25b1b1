#pragma once

// Time-dependent compact uncertainty sets for the drift and covariance of the
// risky assets, and the worst-case parameters an adversarial market picks
// from each of them.
//
// A schedule is a sequence of cells [t_i, t_{i+1}) (the last one closed) that
// tile [0, T]. Each cell bounds the drift by a box or a Euclidean ball and the
// covariance by an eigenvalue interval [eig_min, eig_max].

#include "robust_merton/core.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace robust_merton {

struct TimeGrid {
    std::vector<double> instants;

    double horizon() const { return instants.back(); }
    std::size_t intervals() const { return instants.size() - 1; }
};

inline std::vector<Violation> validate_time_grid(const TimeGrid& grid) {
    std::vector<Violation> out;
    if (grid.instants.size() < 2) {
        out.push_back({std::nullopt, "length", "time grid needs at least two instants"});
        return out;
    }
    for (std::size_t i = 0; i < grid.instants.size(); ++i) {
        const double t = grid.instants[i];
        if (!std::isfinite(t) || t < 0.0) {
            out.push_back({i, "finite", "instant must be finite and non-negative"});
        }
        if (i > 0 && !(t > grid.instants[i - 1])) {
            out.push_back({i, "increasing", "instants must be strictly increasing"});
        }
    }
    if (grid.instants.front() != 0.0) {
        out.push_back({0, "start_at_zero", "first instant must be 0"});
    }
    return out;
}

struct BoxSet {
    Vector lower;
    Vector upper;
};

struct BallSet {
    Vector center;
    double radius = 0.0;
};

/// Compact drift set: either an axis-aligned box or a closed Euclidean ball.
using DriftSet = std::variant<BoxSet, BallSet>;

inline Eigen::Index dimension_of(const DriftSet& set) {
    return std::visit(
        [](const auto& s) -> Eigen::Index {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, BoxSet>) {
                return s.lower.size();
            } else {
                return s.center.size();
            }
        },
        set);
}

/// All SPD covariances whose eigenvalues lie in [eig_min, eig_max].
struct VolSet {
    double eig_min = 0.0;
    double eig_max = 0.0;
};

struct UncertaintyCell {
    double t_start = 0.0;
    double t_end = 0.0;
    DriftSet drift;
    VolSet vol;

    double length() const { return t_end - t_start; }
};

struct UncertaintySchedule {
    Eigen::Index dimension = 0;
    std::vector<UncertaintyCell> cells;

    double horizon() const { return cells.empty() ? 0.0 : cells.back().t_end; }

    TimeGrid time_grid() const {
        TimeGrid g;
        for (const auto& c : cells) {
            g.instants.push_back(c.t_start);
        }
        if (!cells.empty()) {
            g.instants.push_back(cells.back().t_end);
        }
        return g;
    }
};

/// Builds a schedule from grid instants and one drift/vol set per interval.
inline UncertaintySchedule make_schedule(const TimeGrid& grid, const std::vector<DriftSet>& drifts,
                                         const std::vector<VolSet>& vols) {
    if (grid.instants.size() < 2 || drifts.size() != grid.intervals() ||
        vols.size() != grid.intervals()) {
        throw InvalidInput("make_schedule: need one drift set and one vol set per grid interval");
    }
    UncertaintySchedule s;
    s.dimension = dimension_of(drifts.front());
    for (std::size_t i = 0; i < grid.intervals(); ++i) {
        s.cells.push_back({grid.instants[i], grid.instants[i + 1], drifts[i], vols[i]});
    }
    return s;
}

namespace detail {

inline void check_drift_set(const DriftSet& set, Eigen::Index d, std::size_t index,
                            std::vector<Violation>& out) {
    if (const auto* box = std::get_if<BoxSet>(&set)) {
        if (box->lower.size() != d || box->upper.size() != d) {
            out.push_back({index, "dimension", "box bounds must have length " + std::to_string(d)});
            return;
        }
        if (!box->lower.allFinite() || !box->upper.allFinite()) {
            out.push_back({index, "finite", "box bounds must be finite"});
            return;
        }
        if ((box->lower.array() > box->upper.array()).any()) {
            out.push_back({index, "box_order", "box lower bound exceeds upper bound"});
        }
    } else {
        const auto& ball = std::get<BallSet>(set);
        if (ball.center.size() != d) {
            out.push_back({index, "dimension", "ball center must have length " + std::to_string(d)});
            return;
        }
        if (!ball.center.allFinite() || !std::isfinite(ball.radius)) {
            out.push_back({index, "finite", "ball center and radius must be finite"});
            return;
        }
        if (ball.radius < 0.0) {
            out.push_back({index, "ball_radius", "ball radius must be non-negative"});
        }
    }
}

inline void check_vol_set(const VolSet& vol, std::size_t index, std::vector<Violation>& out) {
    if (!std::isfinite(vol.eig_min) || !std::isfinite(vol.eig_max)) {
        out.push_back({index, "finite", "eigenvalue bounds must be finite"});
        return;
    }
    if (!(vol.eig_min > 0.0)) {
        out.push_back({index, "positivity", "eig_min must be strictly positive"});
    }
    if (vol.eig_min > vol.eig_max) {
        out.push_back({index, "eig_order", "eig_min exceeds eig_max"});
    }
}

}  // namespace detail

/// Lists every broken schedule invariant; empty means the schedule is valid.
inline std::vector<Violation> validate_schedule(const UncertaintySchedule& schedule) {
    std::vector<Violation> out;
    if (schedule.dimension < 1) {
        out.push_back({std::nullopt, "dimension", "dimension must be at least 1"});
    }
    if (schedule.cells.empty()) {
        out.push_back({std::nullopt, "empty", "schedule has no cells"});
        return out;
    }
    for (std::size_t i = 0; i < schedule.cells.size(); ++i) {
        const auto& c = schedule.cells[i];
        if (!std::isfinite(c.t_start) || !std::isfinite(c.t_end)) {
            out.push_back({i, "finite", "cell times must be finite"});
        } else if (!(c.t_start < c.t_end)) {
            out.push_back({i, "interval", "t_start must be strictly less than t_end"});
        }
        if (i == 0) {
            if (c.t_start != 0.0) {
                out.push_back({i, "start_at_zero", "first cell must start at 0"});
            }
        } else {
            const double prev_end = schedule.cells[i - 1].t_end;
            if (c.t_start > prev_end) {
                out.push_back({i, "gap", "cell starts after the previous cell ends"});
            } else if (c.t_start < prev_end) {
                out.push_back({i, "overlap", "cell starts before the previous cell ends"});
            }
        }
        if (schedule.dimension >= 1) {
            detail::check_drift_set(c.drift, schedule.dimension, i, out);
        }
        detail::check_vol_set(c.vol, i, out);
    }
    return out;
}

/// Euclidean projection of `point` onto the drift set.
inline Vector project(const DriftSet& set, const Vector& point) {
    if (point.size() != dimension_of(set)) {
        throw InvalidInput("project: point dimension does not match drift set");
    }
    if (const auto* box = std::get_if<BoxSet>(&set)) {
        return point.cwiseMax(box->lower).cwiseMin(box->upper);
    }
    const auto& ball = std::get<BallSet>(set);
    const Vector offset = point - ball.center;
    const double dist = offset.norm();
    if (dist <= ball.radius) {
        return point;
    }
    return ball.center + (ball.radius / dist) * offset;
}

/// Drift in the cell closest to r*1; the adversary minimises the excess return.
/// `dimension` defaults to the drift set's own dimension.
inline Vector worst_case_drift(const UncertaintyCell& cell, double r, Eigen::Index dimension = -1) {
    if (!std::isfinite(r)) {
        throw InvalidInput("worst_case_drift: r must be finite");
    }
    const Eigen::Index d = dimension < 0 ? dimension_of(cell.drift) : dimension;
    return project(cell.drift, Vector::Constant(d, r));
}

/// eig_max * I, which dominates every admissible covariance in quadratic form.
inline Matrix worst_case_covariance(const UncertaintyCell& cell) {
    const Eigen::Index d = dimension_of(cell.drift);
    return cell.vol.eig_max * Matrix::Identity(d, d);
}

/// A volatility factor sigma with sigma*sigma^T equal to the worst-case covariance.
inline Matrix worst_case_vol_factor(const UncertaintyCell& cell) {
    const Eigen::Index d = dimension_of(cell.drift);
    return std::sqrt(cell.vol.eig_max) * Matrix::Identity(d, d);
}

}  // namespace robust_merton
