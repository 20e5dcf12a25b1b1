#pragma once

// Value function when the uncertainty sets are re-evaluated continuously.
// The sum of per-cell rates becomes R(t) = ∫_t^T ||mu*(s) - r1||^2 / (2 C(s)) ds
// (times gamma/(1-gamma) for power utility), evaluated by composite Simpson.

#include "robust_merton/core.hpp"
#include "robust_merton/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace robust_merton {

/// Worst-case drift and variance bound as functions of time.
/// `breakpoints` lists jump locations of piecewise-continuous profiles; the
/// integrator never straddles one.
struct RateProfile {
    Eigen::Index d = 1;
    double r = 0.0;
    double horizon = 1.0;
    std::function<Vector(double)> mu_star;
    std::function<double(double)> vol_bound;
    std::vector<double> breakpoints;

    /// Step-function profile reproducing a schedule's worst-case parameters.
    static RateProfile from_schedule(const UncertaintySchedule& schedule, double r) {
        std::vector<double> starts;
        std::vector<Vector> mus;
        std::vector<double> bounds;
        for (const auto& cell : schedule.cells) {
            starts.push_back(cell.t_start);
            mus.push_back(worst_case_drift(cell, r, schedule.dimension));
            bounds.push_back(cell.vol.eig_max);
        }
        auto locate = [starts](double t) {
            auto it = std::upper_bound(starts.begin(), starts.end(), t);
            const auto idx = static_cast<std::size_t>(std::distance(starts.begin(), it));
            return idx == 0 ? std::size_t{0} : idx - 1;
        };
        RateProfile p;
        p.d = schedule.dimension;
        p.r = r;
        p.horizon = schedule.horizon();
        p.mu_star = [mus, locate](double t) { return mus[locate(t)]; };
        p.vol_bound = [bounds, locate](double t) { return bounds[locate(t)]; };
        p.breakpoints.assign(starts.begin() + 1, starts.end());
        return p;
    }
};

struct ContinuousLimitResult {
    double value = 0.0;
    double rate_integral = 0.0;       ///< R(t)
    double integral_error_bound = 0.0;
    double value_error_bound = 0.0;
};

namespace detail {

inline double rate_scale(const UtilitySpec& u) {
    if (const auto* p = std::get_if<PowerUtility>(&u)) {
        return p->gamma / (1.0 - p->gamma);
    }
    return 1.0;
}

inline double rate_density(const RateProfile& profile, double s) {
    const Vector mu = profile.mu_star(s);
    const double c = profile.vol_bound(s);
    if (mu.size() != profile.d) {
        throw InvalidInput("rate profile: mu*(t) has the wrong dimension");
    }
    const double value = (mu.array() - profile.r).matrix().squaredNorm() / (2.0 * c);
    if (!std::isfinite(value)) {
        throw DomainError("rate profile: non-finite integrand at t = " + std::to_string(s));
    }
    return value;
}

/// Composite Simpson over [a, b] with an even panel count. The right endpoint is
/// sampled one ulp inside so step profiles use the value of the current piece.
inline double simpson(const RateProfile& profile, double a, double b, std::size_t panels) {
    const double h = (b - a) / static_cast<double>(panels);
    double acc = rate_density(profile, a) + rate_density(profile, std::nextafter(b, a));
    for (std::size_t k = 1; k < panels; ++k) {
        const double s = a + h * static_cast<double>(k);
        acc += (k % 2 == 1 ? 4.0 : 2.0) * rate_density(profile, s);
    }
    return acc * h / 3.0;
}

/// Splits [t, T] at breakpoints and spreads at least `panels` panels across pieces.
inline double integrate_rate(const RateProfile& profile, double t, std::size_t panels) {
    std::vector<double> knots{t};
    for (double b : profile.breakpoints) {
        if (b > t && b < profile.horizon) knots.push_back(b);
    }
    std::sort(knots.begin() + 1, knots.end());
    knots.push_back(profile.horizon);
    const double span = profile.horizon - t;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        const double a = knots[i];
        const double b = knots[i + 1];
        if (!(b > a)) continue;
        auto n = static_cast<std::size_t>(std::ceil(static_cast<double>(panels) * (b - a) / span));
        n = std::max<std::size_t>(n, 2);
        n += n % 2;
        total += simpson(profile, a, b, n);
    }
    return total;
}

}  // namespace detail

/// Value at (t, x) under a continuously re-evaluated uncertainty profile.
/// `panels` is clamped to at least 1000 and rounded up to an even count.
inline ContinuousLimitResult continuous_limit_value(const RateProfile& profile, const UtilitySpec& utility,
                                                    double t, double x, std::size_t panels = 1000) {
    if (!profile.mu_star || !profile.vol_bound) {
        throw InvalidInput("rate profile needs mu* and C callables");
    }
    if (!(profile.horizon > 0.0) || !(t >= 0.0 && t <= profile.horizon)) {
        throw DomainError("time outside [0, T]");
    }
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError("wealth must be positive and finite");
    }
    for (auto& v : validate_utility(utility)) {
        throw InvalidInput(describe(v));
    }
    panels = std::max<std::size_t>(panels, 1000);
    panels += panels % 2;

    ContinuousLimitResult out;
    if (t < profile.horizon) {
        const double fine = detail::integrate_rate(profile, t, panels);
        const double coarse = detail::integrate_rate(profile, t, panels / 2);
        const double scale = detail::rate_scale(utility);
        out.rate_integral = scale * fine;
        // Richardson estimate for a fourth-order rule.
        out.integral_error_bound = scale * std::abs(fine - coarse) / 15.0;
    }
    out.value = detail::value_from_rate(utility, out.rate_integral, x);
    if (std::holds_alternative<LogUtility>(utility)) {
        out.value_error_bound = out.integral_error_bound;
    } else {
        out.value_error_bound = std::abs(out.value) * std::expm1(out.integral_error_bound);
    }
    return out;
}

struct MeshPoint {
    std::size_t cells = 0;
    double mesh = 0.0;
    double value = 0.0;
};

/// Samples the profile at left endpoints of 2^j uniform cells (j = 0..k) and
/// returns V(0, x0) of each resulting piecewise schedule.
inline std::vector<MeshPoint> mesh_refinement_series(const RateProfile& profile, const UtilitySpec& utility,
                                                     double x0, unsigned k) {
    if (!profile.mu_star || !profile.vol_bound) {
        throw InvalidInput("rate profile needs mu* and C callables");
    }
    std::vector<MeshPoint> out;
    for (unsigned j = 0; j <= k; ++j) {
        const std::size_t n = std::size_t{1} << j;
        const double dt = profile.horizon / static_cast<double>(n);
        Scenario sc;
        sc.d = profile.d;
        sc.r = profile.r;
        sc.x0 = x0;
        sc.utility = utility;
        sc.schedule.dimension = profile.d;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = dt * static_cast<double>(i);
            const double b = i + 1 == n ? profile.horizon : dt * static_cast<double>(i + 1);
            const Vector mu = profile.mu_star(a);
            const double c = profile.vol_bound(a);
            sc.schedule.cells.push_back({a, b, BoxSet{mu, mu}, VolSet{c, c}});
        }
        const auto sol = solve(sc);
        out.push_back({n, dt, value_at(sol, 0.0, x0)});
    }
    return out;
}

}  // namespace robust_merton
