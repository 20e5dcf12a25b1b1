#pragma once

// Independent checks of a closed-form solution:
//   * exact expected utility under constant parameters (lognormal / Gaussian moments),
//   * exhaustive maximin / minimax scans over strategy grids and parameter candidates,
//   * finite-difference residuals of the optimised HJB equation,
//   * Monte Carlo martingale-optimality checks of v(t, X_t),
//   * monotonicity and concavity of x -> V(t, x).

#include "robust_merton/core.hpp"
#include "robust_merton/random.hpp"
#include "robust_merton/simulator.hpp"
#include "robust_merton/solver.hpp"
#include "robust_merton/uncertainty.hpp"
#include "robust_merton/utility.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace robust_merton {

// ---------------------------------------------------------------------------
// Analytic expected utility
// ---------------------------------------------------------------------------

/// E[u(X_h)] for constant strategy and parameters over a horizon h, starting from x.
/// `pi` is a wealth fraction for log/power and a cash amount for exponential utility.
inline double analytic_expected_utility(const Vector& pi, const Vector& mu, const Matrix& sigma_cov,
                                        double horizon, double x, double r, const UtilitySpec& utility) {
    if (pi.size() != mu.size() || sigma_cov.rows() != mu.size() || sigma_cov.cols() != mu.size()) {
        throw InvalidInput("analytic_expected_utility: dimension mismatch");
    }
    if (!pi.allFinite() || !mu.allFinite() || !sigma_cov.allFinite() || !std::isfinite(horizon) ||
        !std::isfinite(r) || horizon < 0.0) {
        throw DomainError("analytic_expected_utility: non-finite input or negative horizon");
    }
    if (!in_domain(utility, x)) {
        throw DomainError("analytic_expected_utility: x outside the utility's domain");
    }
    double excess = 0.0;
    for (Eigen::Index k = 0; k < mu.size(); ++k) excess += pi(k) * (mu(k) - r);
    const double q = detail::quad_form(pi, sigma_cov);
    if (q < -1e-12 * std::max(1.0, sigma_cov.cwiseAbs().maxCoeff())) {
        throw DomainError("analytic_expected_utility: covariance is not positive semidefinite");
    }

    if (std::holds_alternative<LogUtility>(utility)) {
        return std::log(x) + (excess - 0.5 * q) * horizon;
    }
    if (const auto* p = std::get_if<PowerUtility>(&utility)) {
        const double g = p->gamma;
        return std::pow(x, g) * std::exp(g * (excess - 0.5 * q) * horizon + 0.5 * g * g * q * horizon);
    }
    const double beta = std::get<ExponentialUtility>(utility).beta;
    return -beta * std::exp(-beta * x - beta * excess * horizon + 0.5 * beta * beta * q * horizon);
}

/// E[v(t, X_t)] from (s, x) when the strategy and worst-case parameters are
/// piecewise constant on the solution's cells. Exact: increments on disjoint
/// cells are independent, so log moments add and exponential moments multiply.
inline double analytic_expected_value(const RobustSolution& solution, const PiecewiseStrategy& strategy,
                                      double s, double t, double x) {
    const double r = solution.scenario().r;
    const auto& u = solution.utility();
    double log_sum = 0.0;   // log utility: sum of (excess - q/2) * dt
    double exponent = 0.0;  // power / exponential: exponent of the multiplicative factor
    for (const auto& seg : strategy.segments) {
        const double lo = std::max(seg.t_start, s);
        const double hi = std::min(seg.t_end, t);
        if (!(hi > lo)) continue;
        // Split the strategy segment further at cell boundaries.
        for (const auto& c : solution.cells()) {
            const double a = std::max(lo, c.t_start);
            const double b = std::min(hi, c.t_end);
            if (!(b > a)) continue;
            const double dt = b - a;
            const Vector& pi = seg.value;
            const double excess = pi.dot(c.mu_star - Vector::Constant(c.mu_star.size(), r));
            const double q = detail::quad_form(pi, c.sigma_star);
            if (std::holds_alternative<LogUtility>(u)) {
                log_sum += (excess - 0.5 * q) * dt;
            } else if (const auto* p = std::get_if<PowerUtility>(&u)) {
                const double g = p->gamma;
                exponent += (g * (excess - 0.5 * q) + 0.5 * g * g * q) * dt;
            } else {
                const double beta = std::get<ExponentialUtility>(u).beta;
                exponent += (-beta * excess + 0.5 * beta * beta * q) * dt;
            }
        }
    }
    const double remaining = solution.remaining_rate(t);
    if (std::holds_alternative<LogUtility>(u)) {
        return std::log(x) + log_sum + remaining;
    }
    if (const auto* p = std::get_if<PowerUtility>(&u)) {
        return std::pow(x, p->gamma) * std::exp(exponent + remaining);
    }
    const double beta = std::get<ExponentialUtility>(u).beta;
    return -beta * std::exp(-beta * x + exponent - remaining);
}

// ---------------------------------------------------------------------------
// Saddle-point scan
// ---------------------------------------------------------------------------

struct ThetaCandidate {
    Vector mu;
    Matrix sigma;  ///< covariance
    std::string label;
};

/// Uniformly distributed covariance with eigenvalues in [lo, hi] and a random orientation.
template <typename Rng>
Matrix random_covariance(Eigen::Index d, double lo, double hi, Rng& rng) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(lo, hi);
    Matrix g(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    const Matrix q = qr.householderQ();
    Vector eig(d);
    for (Eigen::Index i = 0; i < d; ++i) eig(i) = unif(rng);
    Matrix sigma = q * eig.asDiagonal() * q.transpose();
    return 0.5 * (sigma + sigma.transpose());
}

/// Drift extremes (projection first, then box vertices or the ball points toward
/// and away from r*1) crossed with eig_max*I, eig_min*I and random interior covariances.
inline std::vector<ThetaCandidate> theta_candidates(const UncertaintyCell& cell, double r,
                                                    std::size_t random_covariances = 50,
                                                    std::uint64_t seed = 1) {
    const Eigen::Index d = dimension_of(cell.drift);
    std::vector<std::pair<Vector, std::string>> drifts;
    drifts.emplace_back(worst_case_drift(cell, r), "projection");
    if (const auto* box = std::get_if<BoxSet>(&cell.drift)) {
        if (d > 16) throw InvalidInput("theta_candidates: box vertex enumeration limited to d <= 16");
        const std::size_t n = std::size_t{1} << d;
        for (std::size_t mask = 0; mask < n; ++mask) {
            Vector v(d);
            for (Eigen::Index k = 0; k < d; ++k) {
                v(k) = (mask >> k) & 1U ? box->upper(k) : box->lower(k);
            }
            drifts.emplace_back(v, "vertex" + std::to_string(mask));
        }
    } else {
        const auto& ball = std::get<BallSet>(cell.drift);
        Vector dir = Vector::Constant(d, r) - ball.center;
        if (dir.norm() == 0.0) {
            dir = Vector::Unit(d, 0);
        } else {
            dir.normalize();
        }
        drifts.emplace_back(ball.center + ball.radius * dir, "ball_toward");
        drifts.emplace_back(ball.center - ball.radius * dir, "ball_away");
    }

    std::vector<std::pair<Matrix, std::string>> covs;
    covs.emplace_back(cell.vol.eig_max * Matrix::Identity(d, d), "eig_max");
    covs.emplace_back(cell.vol.eig_min * Matrix::Identity(d, d), "eig_min");
    CounterStream rng(seed, 0);
    for (std::size_t i = 0; i < random_covariances; ++i) {
        covs.emplace_back(random_covariance(d, cell.vol.eig_min, cell.vol.eig_max, rng),
                          "random" + std::to_string(i));
    }

    std::vector<ThetaCandidate> out;
    out.reserve(drifts.size() * covs.size());
    for (const auto& [mu, ml] : drifts) {
        for (const auto& [cov, cl] : covs) {
            out.push_back({mu, cov, ml + "/" + cl});
        }
    }
    return out;
}

/// Regular strategy grid lower + k*step (inclusive of upper) in every coordinate.
struct PiGrid {
    Vector lower;
    Vector upper;
    double step = 1e-3;
};

/// One-cell problem seen by the scan: horizon, starting wealth, rate, utility.
struct SaddleProblem {
    double horizon = 1.0;
    double x = 1.0;
    double r = 0.0;
    UtilitySpec utility = LogUtility{};
};

struct SaddleScanReport {
    double maximin = 0.0;
    double minimax = 0.0;
    Vector arg_pi;              ///< maximiser of min_theta
    ThetaCandidate arg_theta;   ///< minimiser of max_pi
    double gap = 0.0;           ///< minimax - maximin
    PiGrid initial_grid;
    double final_step = 0.0;
    unsigned refinements = 0;
    std::size_t evaluations = 0;
};

namespace detail {

struct ScanPass {
    double maximin = -std::numeric_limits<double>::infinity();
    double minimax = std::numeric_limits<double>::infinity();
    Vector arg_pi;
    std::size_t arg_theta = 0;
    std::size_t evaluations = 0;
};

inline std::vector<std::size_t> grid_counts(const PiGrid& g) {
    std::vector<std::size_t> counts;
    for (Eigen::Index k = 0; k < g.lower.size(); ++k) {
        const double span = g.upper(k) - g.lower(k);
        counts.push_back(static_cast<std::size_t>(std::floor(span / g.step + 1e-9)) + 1);
    }
    return counts;
}

inline ScanPass scan_pass(const SaddleProblem& prob, const PiGrid& grid,
                          const std::vector<ThetaCandidate>& thetas) {
    const Eigen::Index d = grid.lower.size();
    const auto counts = grid_counts(grid);
    std::size_t total = 1;
    for (auto c : counts) {
        if (c > 0 && total > std::numeric_limits<std::size_t>::max() / c) {
            throw InvalidInput("saddle scan grid is too large");
        }
        total *= c;
    }
    if (total > 50'000'000) throw InvalidInput("saddle scan grid is too large");

    ScanPass out;
    std::vector<double> col_max(thetas.size(), -std::numeric_limits<double>::infinity());
    std::vector<std::size_t> index(static_cast<std::size_t>(d), 0);
    Vector pi(d);
    for (std::size_t n = 0; n < total; ++n) {
        for (Eigen::Index k = 0; k < d; ++k) {
            pi(k) = grid.lower(k) + grid.step * static_cast<double>(index[static_cast<std::size_t>(k)]);
        }
        double row_min = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < thetas.size(); ++j) {
            const double v = analytic_expected_utility(pi, thetas[j].mu, thetas[j].sigma, prob.horizon, prob.x,
                                                       prob.r, prob.utility);
            row_min = std::min(row_min, v);
            col_max[j] = std::max(col_max[j], v);
        }
        out.evaluations += thetas.size();
        if (row_min > out.maximin) {
            out.maximin = row_min;
            out.arg_pi = pi;
        }
        for (std::size_t k = 0; k < index.size(); ++k) {
            if (++index[k] < counts[k]) break;
            index[k] = 0;
        }
    }
    for (std::size_t j = 0; j < thetas.size(); ++j) {
        if (col_max[j] < out.minimax) {
            out.minimax = col_max[j];
            out.arg_theta = j;
        }
    }
    return out;
}

}  // namespace detail

/// Exhaustive maximin / minimax over a strategy grid and parameter candidates,
/// followed by `refinements` passes that halve the step around the maximin
/// argument (window of +-`half_width` steps per coordinate).
inline SaddleScanReport saddle_point_scan(const SaddleProblem& problem, const PiGrid& grid,
                                          const std::vector<ThetaCandidate>& thetas, unsigned refinements = 10,
                                          std::size_t half_width = 16) {
    if (thetas.empty()) throw InvalidInput("saddle scan: no theta candidates");
    const Eigen::Index d = grid.lower.size();
    if (d < 1 || grid.upper.size() != d || !(grid.step > 0.0) || (grid.upper.array() < grid.lower.array()).any()) {
        throw InvalidInput("saddle scan: empty or malformed strategy grid");
    }
    for (const auto& th : thetas) {
        if (th.mu.size() != d || th.sigma.rows() != d || th.sigma.cols() != d) {
            throw InvalidInput("saddle scan: theta candidate dimension mismatch");
        }
    }

    SaddleScanReport rep;
    rep.initial_grid = grid;
    auto pass = detail::scan_pass(problem, grid, thetas);
    rep.evaluations = pass.evaluations;
    double step = grid.step;
    for (unsigned i = 0; i < refinements; ++i) {
        step *= 0.5;
        const double w = step * static_cast<double>(half_width);
        PiGrid local{pass.arg_pi.array() - w, pass.arg_pi.array() + w, step};
        auto next = detail::scan_pass(problem, local, thetas);
        rep.evaluations += next.evaluations;
        pass = std::move(next);
    }
    rep.maximin = pass.maximin;
    rep.minimax = pass.minimax;
    rep.arg_pi = pass.arg_pi;
    rep.arg_theta = thetas[pass.arg_theta];
    rep.gap = pass.minimax - pass.maximin;
    rep.final_step = step;
    rep.refinements = refinements;
    return rep;
}

// ---------------------------------------------------------------------------
// HJB residual
// ---------------------------------------------------------------------------

struct FdSteps {
    double t_abs = 1e-5;        ///< multiplied by T
    double x_rel_first = 1e-5;  ///< V_x
    double x_rel_second = 1e-4; ///< V_xx
};

struct SamplePoint {
    double t = 0.0;
    double x = 0.0;
};

struct ResidualReport {
    std::vector<SamplePoint> points;
    std::vector<double> residuals;  ///< relative to the largest term of the equation
    double max_abs_relative_residual = 0.0;
};

/// Lattice of interior (t, x) points: `per_cell` points in every cell with t
/// kept away from the cell edges and x log-spaced in [x_lo, x_hi].
inline std::vector<SamplePoint> interior_sample_points(const RobustSolution& solution, std::size_t per_cell,
                                                       double x_lo, double x_hi) {
    std::vector<SamplePoint> pts;
    const std::size_t nt = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(per_cell))));
    const std::size_t nx = (per_cell + nt - 1) / nt;
    for (const auto& c : solution.cells()) {
        const double len = c.t_end - c.t_start;
        std::size_t count = 0;
        for (std::size_t i = 0; i < nt && count < per_cell; ++i) {
            const double t = c.t_start + len * (0.05 + 0.9 * (static_cast<double>(i) + 0.5) / static_cast<double>(nt));
            for (std::size_t j = 0; j < nx && count < per_cell; ++j, ++count) {
                const double frac = nx == 1 ? 0.5 : static_cast<double>(j) / static_cast<double>(nx - 1);
                pts.push_back({t, x_lo * std::pow(x_hi / x_lo, frac)});
            }
        }
    }
    return pts;
}

/// Finite-difference residual of V_t + H(V_x, V_xx) = 0 with the cell's (mu*, Sigma*, pi*).
/// Fraction form: H = x pi^T(mu - r1) V_x + x^2/2 pi^T Sigma pi V_xx.
/// Cash form:     H = pi^T(mu - r1) V_x + 1/2 pi^T Sigma pi V_xx.
inline ResidualReport hjb_residual(const RobustSolution& solution, const std::vector<SamplePoint>& points,
                                   const FdSteps& steps = {}) {
    ResidualReport rep;
    const double r = solution.scenario().r;
    const double ht = steps.t_abs * solution.horizon();
    const bool cash = uses_cash_strategy(solution.utility());
    for (const auto& pt : points) {
        if (!(pt.x > 0.0)) throw DomainError("hjb_residual: sample wealth must be positive");
        const auto& cell = solution.cells()[solution.cell_index_at(pt.t)];
        if (pt.t - ht <= cell.t_start || pt.t + ht >= cell.t_end) {
            throw InvalidInput("hjb_residual: sample point at t = " + std::to_string(pt.t) +
                               " is not interior to its cell");
        }
        const double scale_x = cash ? std::max(1.0, std::abs(pt.x)) : pt.x;
        const double h1 = steps.x_rel_first * scale_x;
        const double h2 = steps.x_rel_second * scale_x;
        auto v = [&](double t, double x) { return value_at(solution, t, x); };
        const double v0 = v(pt.t, pt.x);
        const double v_t = (v(pt.t + ht, pt.x) - v(pt.t - ht, pt.x)) / (2.0 * ht);
        const double v_x = (v(pt.t, pt.x + h1) - v(pt.t, pt.x - h1)) / (2.0 * h1);
        const double v_xx = (v(pt.t, pt.x + h2) - 2.0 * v0 + v(pt.t, pt.x - h2)) / (h2 * h2);

        const Vector& pi = cell.strategy;
        const double excess = pi.dot(cell.mu_star - Vector::Constant(pi.size(), r));
        const double q = detail::quad_form(pi, cell.sigma_star);
        const double lin = cash ? excess * v_x : pt.x * excess * v_x;
        const double quad = cash ? 0.5 * q * v_xx : 0.5 * pt.x * pt.x * q * v_xx;
        const double res = v_t + lin + quad;
        const double scale = std::max({std::abs(v_t), std::abs(lin), std::abs(quad)});
        const double rel = res == 0.0 ? 0.0 : std::abs(res) / scale;
        rep.points.push_back(pt);
        rep.residuals.push_back(rel);
        rep.max_abs_relative_residual = std::max(rep.max_abs_relative_residual, rel);
    }
    return rep;
}

/// Copy of the solution with every per-cell rate multiplied by `factor`.
inline RobustSolution with_scaled_rates(const RobustSolution& solution, double factor) {
    auto cells = solution.cells();
    for (auto& c : cells) c.rate *= factor;
    return RobustSolution(solution.scenario(), std::move(cells));
}

// ---------------------------------------------------------------------------
// Martingale optimality
// ---------------------------------------------------------------------------

struct MartingaleReport {
    SimEstimate lhs;               ///< Monte Carlo estimate of E[v(t, X_t)]
    double rhs = 0.0;              ///< v(s, x)
    double analytic_lhs = 0.0;     ///< exact E[v(t, X_t)] under the worst-case parameters
    double expected_deficit = 0.0; ///< rhs - analytic_lhs
    bool martingale = false;       ///< |lhs - rhs| <= 3 SE
    bool not_above = false;        ///< lhs <= rhs + 3 SE
    bool strictly_below = false;   ///< rhs - lhs >= 3 SE
};

struct MartingaleOptions {
    std::size_t max_paths = std::size_t{1} << 22;
    /// Grow the path count until SE < deficit / power_ratio (only when the deficit is positive).
    double power_ratio = 5.0;
    double deficit_floor = 1e-12;
};

/// Estimates E[v(t, X_t) | X_s = x] under the worst-case parameter path for a
/// candidate piecewise strategy (fraction or cash per the solution's utility).
inline MartingaleReport martingale_check(const RobustSolution& solution, const PiecewiseStrategy& strategy,
                                         double s, double t, double x, PathConfig config,
                                         const MartingaleOptions& opts = {}) {
    const double T = solution.horizon();
    if (!(s >= 0.0 && s <= t && t <= T)) throw DomainError("martingale_check: need 0 <= s <= t <= T");
    if (!in_domain(solution.utility(), x) || (!uses_cash_strategy(solution.utility()) && !(x > 0.0))) {
        throw DomainError("martingale_check: starting wealth outside the domain");
    }
    const auto& u = solution.utility();
    auto v = [&](double tt, double xx) { return detail::value_from_rate(u, solution.remaining_rate(tt), xx); };

    MartingaleReport rep;
    rep.rhs = v(s, x);
    if (t == s) {
        std::vector<double> vals(config.n_paths, rep.rhs);
        rep.lhs = summarize(vals, config.seed);
        rep.analytic_lhs = rep.rhs;
    } else {
        const auto path = restrict_to(worst_case_path(solution), s, t);
        PiecewiseStrategy pi;
        try {
            pi = restrict_to(strategy, s, t);
            detail::validate_strategy(pi, path);
        } catch (const InvalidInput& e) {
            throw InvalidInput(std::string("martingale_check: strategy inadmissible: ") + e.what());
        }
        rep.analytic_lhs = analytic_expected_value(solution, pi, s, t, x);
        rep.expected_deficit = rep.rhs - rep.analytic_lhs;
        for (;;) {
            const auto wealth = simulate_wealth(solution, path, pi, x, config);
            if (!wealth.crossed_zero.empty()) {
                throw InvalidInput("martingale_check: strategy inadmissible (wealth reached zero)");
            }
            std::vector<double> vals(wealth.terminal.size());
            for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = v(t, wealth.terminal[i]);
            rep.lhs = summarize(vals, config.seed);
            const bool need_power = rep.expected_deficit > opts.deficit_floor &&
                                    rep.lhs.std_error >= rep.expected_deficit / opts.power_ratio;
            if (!need_power || config.n_paths * 2 > opts.max_paths) break;
            config.n_paths *= 2;
        }
    }
    const double diff = rep.lhs.mean - rep.rhs;
    const double band = 3.0 * rep.lhs.std_error;
    rep.martingale = std::abs(diff) <= band;
    rep.not_above = diff <= band;
    rep.strictly_below = -diff >= band && diff < 0.0;
    return rep;
}

// ---------------------------------------------------------------------------
// Shape of x -> V(t, x)
// ---------------------------------------------------------------------------

struct ShapeReport {
    bool increasing = true;
    bool concave = true;
    double worst_chord_excess = 0.0;  ///< largest (chord - V) > 0 seen, 0 if concave

    bool pass() const { return increasing && concave; }
};

/// Strict monotonicity on consecutive points, plus concavity checked against
/// chords of consecutive triples and at midpoints of every second pair.
inline ShapeReport shape_check(const RobustSolution& solution, double t, const std::vector<double>& x_grid) {
    ShapeReport rep;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    std::vector<double> vals;
    vals.reserve(x_grid.size());
    for (double x : x_grid) vals.push_back(value_at(solution, t, x));
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        if (!(x_grid[i + 1] > x_grid[i])) throw InvalidInput("shape_check: grid must be increasing");
        if (!(vals[i + 1] > vals[i])) rep.increasing = false;
    }
    auto record = [&](double chord, double actual, double tol) {
        const double excess = chord - actual;
        if (excess > tol) {
            rep.concave = false;
            rep.worst_chord_excess = std::max(rep.worst_chord_excess, excess);
        }
    };
    for (std::size_t i = 0; i + 2 < vals.size(); ++i) {
        const double x1 = x_grid[i], x2 = x_grid[i + 1], x3 = x_grid[i + 2];
        const double v1 = vals[i], v2 = vals[i + 1], v3 = vals[i + 2];
        const double tol = 8.0 * eps * (std::abs(v1) + std::abs(v2) + std::abs(v3));
        record(((x3 - x2) * v1 + (x2 - x1) * v3) / (x3 - x1), v2, tol);
        const double vm = value_at(solution, t, 0.5 * (x1 + x3));
        record(0.5 * (v1 + v3), vm, tol + 8.0 * eps * std::abs(vm));
    }
    return rep;
}

inline std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double frac = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
        out.push_back(lo * std::pow(hi / lo, frac));
    }
    return out;
}

}  // namespace robust_merton
