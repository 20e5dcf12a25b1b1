#pragma once

// Closed-form robust Merton solutions for log, power and exponential utility.
//
// On every cell the adversary plays (mu*, C*I) with mu* the projection of r*1
// onto the drift set and C the largest admissible eigenvalue. The investor
// then faces a classical Merton problem whose value grows at a constant rate
// kappa_i across the cell, so the value function is assembled backwards from
// the per-cell rates:
//
//   log:          V(t,x) = log(x) + R(t)
//   power:        V(t,x) = x^gamma * exp(R(t))
//   exponential:  V(t,x) = -beta * exp(-beta*x) * exp(-R(t))
//
// with R(t) = sum_i kappa_i * |cell_i ∩ [t,T]|.

#include "robust_merton/core.hpp"
#include "robust_merton/uncertainty.hpp"
#include "robust_merton/utility.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace robust_merton {

struct Scenario {
    Eigen::Index d = 1;
    double r = 0.0;
    double x0 = 1.0;
    UtilitySpec utility = LogUtility{};
    UncertaintySchedule schedule;

    double horizon() const { return schedule.horizon(); }
};

inline std::vector<Violation> validate_scenario(const Scenario& s) {
    std::vector<Violation> out;
    if (s.d < 1) {
        out.push_back({std::nullopt, "dimension", "d must be at least 1"});
    }
    if (s.schedule.dimension != s.d) {
        out.push_back({std::nullopt, "dimension", "schedule dimension differs from d"});
    }
    if (!std::isfinite(s.r)) {
        out.push_back({std::nullopt, "finite", "r must be finite"});
    }
    if (!(s.x0 > 0.0) || !std::isfinite(s.x0)) {
        out.push_back({std::nullopt, "x0", "initial wealth must be positive and finite"});
    }
    for (auto& v : validate_utility(s.utility)) out.push_back(std::move(v));
    for (auto& v : validate_schedule(s.schedule)) out.push_back(std::move(v));
    return out;
}

struct CellSolution {
    std::size_t cell_index = 0;
    double t_start = 0.0;
    double t_end = 0.0;
    Vector mu_star;
    Matrix sigma_star;
    double vol_bound = 0.0;  ///< C_i, so sigma_star == vol_bound * I
    Vector strategy;         ///< fraction for log/power, cash amount for exponential
    double rate = 0.0;       ///< kappa_i, per year
};

class RobustSolution {
public:
    RobustSolution(Scenario scenario, std::vector<CellSolution> cells)
        : scenario_(std::move(scenario)), cells_(std::move(cells)), tail_(cells_.size() + 1, 0.0) {
        // tail_[i] = accumulated rate over cells i..n-1
        for (std::size_t i = cells_.size(); i-- > 0;) {
            tail_[i] = tail_[i + 1] + cells_[i].rate * (cells_[i].t_end - cells_[i].t_start);
        }
    }

    const Scenario& scenario() const noexcept { return scenario_; }
    const UtilitySpec& utility() const noexcept { return scenario_.utility; }
    const std::vector<CellSolution>& cells() const noexcept { return cells_; }
    double horizon() const { return scenario_.horizon(); }

    /// Index of the cell containing t: left-closed, right-open, last cell closed.
    std::size_t cell_index_at(double t) const {
        if (!(t >= 0.0 && t <= horizon())) {
            throw DomainError("time " + std::to_string(t) + " outside [0, T]");
        }
        auto it = std::upper_bound(cells_.begin(), cells_.end(), t,
                                   [](double v, const CellSolution& c) { return v < c.t_start; });
        const auto idx = static_cast<std::size_t>(std::distance(cells_.begin(), it));
        return std::min(idx == 0 ? 0 : idx - 1, cells_.size() - 1);
    }

    /// R(t): remaining-time weighted sum of per-cell rates.
    double remaining_rate(double t) const {
        const std::size_t i = cell_index_at(t);
        if (t >= cells_[i].t_end) {
            return 0.0;
        }
        return cells_[i].rate * (cells_[i].t_end - t) + tail_[i + 1];
    }

private:
    Scenario scenario_;
    std::vector<CellSolution> cells_;
    std::vector<double> tail_;
};

/// Optimal strategy and value rate on one cell given its worst-case parameters.
inline CellSolution solve_cell(const UncertaintyCell& cell, std::size_t index, double r,
                               Eigen::Index d, const UtilitySpec& utility) {
    CellSolution out;
    out.cell_index = index;
    out.t_start = cell.t_start;
    out.t_end = cell.t_end;
    out.mu_star = worst_case_drift(cell, r, d);
    out.sigma_star = worst_case_covariance(cell);
    out.vol_bound = cell.vol.eig_max;

    const Vector excess = out.mu_star - Vector::Constant(d, r);
    const double c = out.vol_bound;
    const double merton_rate = excess.squaredNorm() / (2.0 * c);

    if (std::holds_alternative<LogUtility>(utility)) {
        out.strategy = excess / c;
        out.rate = merton_rate;
    } else if (const auto* p = std::get_if<PowerUtility>(&utility)) {
        const double g = p->gamma;
        out.strategy = excess / (c * (1.0 - g));
        out.rate = g * merton_rate / (1.0 - g);
    } else {
        const double beta = std::get<ExponentialUtility>(utility).beta;
        out.strategy = excess / (c * beta);
        out.rate = merton_rate;
    }
    return out;
}

/// Solves every cell of a validated scenario. Throws ValidationError listing violations.
inline RobustSolution solve(const Scenario& scenario) {
    auto violations = validate_scenario(scenario);
    if (!violations.empty()) {
        throw ValidationError(std::move(violations));
    }
    std::vector<CellSolution> cells;
    cells.reserve(scenario.schedule.cells.size());
    for (std::size_t i = 0; i < scenario.schedule.cells.size(); ++i) {
        cells.push_back(solve_cell(scenario.schedule.cells[i], i, scenario.r, scenario.d, scenario.utility));
    }
    return RobustSolution(scenario, std::move(cells));
}

namespace detail {

inline void check_state(const RobustSolution& s, double t, double x) {
    if (!(t >= 0.0 && t <= s.horizon())) {
        throw DomainError("time " + std::to_string(t) + " outside [0, T]");
    }
    if (!in_domain(s.utility(), x)) {
        throw DomainError("wealth " + std::to_string(x) + " outside the utility's domain");
    }
}

/// Value as a function of the accumulated rate; shared with the continuous-limit evaluator.
inline double value_from_rate(const UtilitySpec& u, double remaining, double x) {
    if (std::holds_alternative<LogUtility>(u)) {
        return std::log(x) + remaining;
    }
    if (const auto* p = std::get_if<PowerUtility>(&u)) {
        return std::pow(x, p->gamma) * std::exp(remaining);
    }
    const double beta = std::get<ExponentialUtility>(u).beta;
    return -beta * std::exp(-beta * x) * std::exp(-remaining);
}

}  // namespace detail

inline double value_at(const RobustSolution& solution, double t, double x) {
    detail::check_state(solution, t, x);
    return detail::value_from_rate(solution.utility(), solution.remaining_rate(t), x);
}

/// Cash amounts held in the risky assets at (t, x).
inline Vector strategy_at(const RobustSolution& solution, double t, double x) {
    detail::check_state(solution, t, x);
    const auto& cell = solution.cells()[solution.cell_index_at(t)];
    if (uses_cash_strategy(solution.utility())) {
        return cell.strategy;
    }
    return x * cell.strategy;
}

}  // namespace robust_merton
