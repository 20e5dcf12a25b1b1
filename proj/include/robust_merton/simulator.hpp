#pragma once

// Seeded Monte Carlo for asset prices and wealth under piecewise-constant
// market parameters.
//
// Each path owns a CounterStream keyed by (seed, path index) and paths are
// split into contiguous blocks across worker threads, so results are
// bitwise-identical for any thread count. Steps are aligned to every segment
// and strategy breakpoint plus the uniform grid k / steps_per_year.

#include "robust_merton/core.hpp"
#include "robust_merton/random.hpp"
#include "robust_merton/solver.hpp"
#include "robust_merton/utility.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <thread>
#include <vector>

namespace robust_merton {

struct ParameterSegment {
    double t_start = 0.0;
    double t_end = 0.0;
    Vector mu;
    Matrix sigma;  ///< volatility factor; covariance is sigma * sigma^T
};

struct ParameterPath {
    std::vector<ParameterSegment> segments;

    double t_start() const { return segments.front().t_start; }
    double t_end() const { return segments.back().t_end; }
    Eigen::Index dimension() const { return segments.front().mu.size(); }
};

struct StrategySegment {
    double t_start = 0.0;
    double t_end = 0.0;
    Vector value;
};

/// Piecewise-constant allocation; fractions of wealth or cash amounts depending on context.
struct PiecewiseStrategy {
    std::vector<StrategySegment> segments;
};

enum class Scheme { Exact, Euler };

struct PathConfig {
    std::size_t n_paths = 10000;
    std::size_t steps_per_year = 252;
    std::uint64_t seed = 0;
    Scheme scheme = Scheme::Exact;
    unsigned threads = 0;  ///< 0 = hardware concurrency
};

struct SimEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
};

struct AssetPaths {
    Matrix terminal;                          ///< n_paths x d
    std::vector<std::size_t> crossed_zero;    ///< Euler paths that hit a non-positive price
    std::uint64_t seed = 0;
};

struct WealthPaths {
    std::vector<double> terminal;
    std::vector<std::size_t> crossed_zero;
    std::uint64_t seed = 0;
};

namespace detail {

inline constexpr double kTimeTol = 1e-12;

inline void validate_path(const ParameterPath& path) {
    if (path.segments.empty()) {
        throw InvalidInput("parameter path has no segments");
    }
    const Eigen::Index d = path.dimension();
    if (d < 1) {
        throw InvalidInput("parameter path has zero dimension");
    }
    for (std::size_t i = 0; i < path.segments.size(); ++i) {
        const auto& seg = path.segments[i];
        if (!(seg.t_end > seg.t_start) || !std::isfinite(seg.t_start) || !std::isfinite(seg.t_end)) {
            throw InvalidInput("parameter segment " + std::to_string(i) + " has an empty time interval");
        }
        if (i > 0 && std::abs(seg.t_start - path.segments[i - 1].t_end) > kTimeTol) {
            throw InvalidInput("parameter segments do not tile their interval at segment " + std::to_string(i));
        }
        if (seg.mu.size() != d || seg.sigma.rows() != d || seg.sigma.cols() != d) {
            throw InvalidInput("parameter segment " + std::to_string(i) + " has inconsistent dimensions");
        }
        if (!seg.mu.allFinite() || !seg.sigma.allFinite()) {
            throw InvalidInput("parameter segment " + std::to_string(i) + " is not finite");
        }
    }
}

inline void validate_strategy(const PiecewiseStrategy& strategy, const ParameterPath& path) {
    if (strategy.segments.empty()) {
        throw InvalidInput("strategy has no segments");
    }
    if (std::abs(strategy.segments.front().t_start - path.t_start()) > kTimeTol ||
        std::abs(strategy.segments.back().t_end - path.t_end()) > kTimeTol) {
        throw InvalidInput("strategy does not cover the parameter path's time span");
    }
    for (std::size_t i = 0; i < strategy.segments.size(); ++i) {
        const auto& seg = strategy.segments[i];
        if (!(seg.t_end > seg.t_start)) {
            throw InvalidInput("strategy segment " + std::to_string(i) + " has an empty time interval");
        }
        if (i > 0 && std::abs(seg.t_start - strategy.segments[i - 1].t_end) > kTimeTol) {
            throw InvalidInput("strategy segments do not tile their interval at segment " + std::to_string(i));
        }
        if (seg.value.size() != path.dimension()) {
            throw InvalidInput("strategy segment " + std::to_string(i) + " has the wrong dimension");
        }
        if (!seg.value.allFinite()) {
            throw InvalidInput("strategy segment " + std::to_string(i) + " is not finite");
        }
    }
}

template <typename Segments>
std::size_t locate_segment(const Segments& segs, double t) {
    auto it = std::upper_bound(segs.begin(), segs.end(), t,
                               [](double v, const auto& s) { return v < s.t_start; });
    const auto idx = static_cast<std::size_t>(std::distance(segs.begin(), it));
    return std::min(idx == 0 ? 0 : idx - 1, segs.size() - 1);
}

struct Step {
    double dt = 0.0;
    std::size_t segment = 0;
    std::size_t strategy = 0;
};

inline std::vector<Step> build_steps(const ParameterPath& path, const PiecewiseStrategy* strategy,
                                     std::size_t steps_per_year) {
    const double a = path.t_start();
    const double b = path.t_end();
    std::vector<double> knots{a, b};
    for (const auto& s : path.segments) knots.push_back(s.t_start);
    if (strategy) {
        for (const auto& s : strategy->segments) knots.push_back(s.t_start);
    }
    const auto spy = static_cast<double>(steps_per_year);
    for (auto k = static_cast<long long>(std::floor(a * spy)) + 1; static_cast<double>(k) / spy < b; ++k) {
        knots.push_back(static_cast<double>(k) / spy);
    }
    std::sort(knots.begin(), knots.end());
    std::vector<double> uniq;
    for (double k : knots) {
        if (k < a || k > b) continue;
        if (uniq.empty() || k - uniq.back() > kTimeTol) uniq.push_back(k);
    }
    uniq.back() = b;

    std::vector<Step> steps;
    steps.reserve(uniq.size());
    for (std::size_t i = 0; i + 1 < uniq.size(); ++i) {
        const double mid = 0.5 * (uniq[i] + uniq[i + 1]);
        Step st;
        st.dt = uniq[i + 1] - uniq[i];
        st.segment = locate_segment(path.segments, mid);
        st.strategy = strategy ? locate_segment(strategy->segments, mid) : 0;
        steps.push_back(st);
    }
    return steps;
}

/// Runs body(begin, end) over contiguous blocks of [0, n).
template <typename Body>
void parallel_blocks(std::size_t n, unsigned threads, Body&& body) {
    unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
    if (workers <= 1) {
        body(std::size_t{0}, n);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = std::min(n, chunk * w);
        const std::size_t end = std::min(n, begin + chunk);
        if (begin == end) break;
        pool.emplace_back([&body, begin, end] { body(begin, end); });
    }
}

inline void check_config(const PathConfig& config) {
    if (config.n_paths < 1) throw InvalidInput("n_paths must be at least 1");
    if (config.steps_per_year < 1) throw InvalidInput("steps_per_year must be at least 1");
}

/// Per-step constants of a wealth process driven by pi^T(mu - r1) dt + pi^T sigma dW.
struct WealthStep {
    double drift = 0.0;     ///< pi^T (mu - r1) dt
    double variance = 0.0;  ///< pi^T Sigma pi dt
    Vector loading;         ///< sigma^T pi * sqrt(dt)
};

inline std::vector<WealthStep> wealth_steps(const ParameterPath& path, const PiecewiseStrategy& strategy,
                                            double r, std::size_t steps_per_year) {
    std::vector<WealthStep> out;
    for (const auto& st : build_steps(path, &strategy, steps_per_year)) {
        const auto& seg = path.segments[st.segment];
        const Vector& pi = strategy.segments[st.strategy].value;
        WealthStep ws;
        ws.drift = pi.dot(seg.mu - Vector::Constant(seg.mu.size(), r)) * st.dt;
        ws.loading = seg.sigma.transpose() * pi;
        ws.variance = ws.loading.squaredNorm() * st.dt;
        ws.loading *= std::sqrt(st.dt);
        out.push_back(std::move(ws));
    }
    return out;
}

inline double draw_loading(const Vector& loading, std::normal_distribution<double>& normal, CounterStream& rng) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < loading.size(); ++k) {
        acc += loading(k) * normal(rng);
    }
    return acc;
}

}  // namespace detail

/// Terminal prices of dS = Diag(S)(mu dt + sigma dW) over the path's time span.
inline AssetPaths simulate_assets(const ParameterPath& path, const Vector& s0, const PathConfig& config) {
    detail::validate_path(path);
    detail::check_config(config);
    const Eigen::Index d = path.dimension();
    if (s0.size() != d) throw InvalidInput("s0 has the wrong dimension");
    if (!s0.allFinite() || (s0.array() <= 0.0).any()) {
        throw DomainError("initial prices must be strictly positive");
    }

    struct AssetStep {
        Vector drift;  ///< per-step log drift (exact) or arithmetic drift (Euler)
        Matrix vol;    ///< sigma * sqrt(dt)
    };
    std::vector<AssetStep> steps;
    for (const auto& st : detail::build_steps(path, nullptr, config.steps_per_year)) {
        const auto& seg = path.segments[st.segment];
        AssetStep as;
        if (config.scheme == Scheme::Exact) {
            const Vector half_var = 0.5 * (seg.sigma * seg.sigma.transpose()).diagonal();
            as.drift = (seg.mu - half_var) * st.dt;
        } else {
            as.drift = seg.mu * st.dt;
        }
        as.vol = seg.sigma * std::sqrt(st.dt);
        steps.push_back(std::move(as));
    }

    AssetPaths out;
    out.seed = config.seed;
    out.terminal.resize(static_cast<Eigen::Index>(config.n_paths), d);
    std::vector<char> crossed(config.n_paths, 0);

    detail::parallel_blocks(config.n_paths, config.threads, [&](std::size_t begin, std::size_t end) {
        Vector z(d);
        Vector state(d);
        for (std::size_t p = begin; p < end; ++p) {
            CounterStream rng(config.seed, p);
            std::normal_distribution<double> normal;
            if (config.scheme == Scheme::Exact) {
                state.setZero();
            } else {
                state = s0;
            }
            for (const auto& st : steps) {
                for (Eigen::Index k = 0; k < d; ++k) z(k) = normal(rng);
                if (config.scheme == Scheme::Exact) {
                    state += st.drift + st.vol * z;
                } else {
                    state.array() *= 1.0 + (st.drift + st.vol * z).array();
                    if ((state.array() <= 0.0).any()) crossed[p] = 1;
                }
            }
            const auto row = static_cast<Eigen::Index>(p);
            if (config.scheme == Scheme::Exact) {
                out.terminal.row(row) = (s0.array() * state.array().exp()).matrix().transpose();
            } else {
                out.terminal.row(row) = state.transpose();
            }
        }
    });
    for (std::size_t p = 0; p < crossed.size(); ++p) {
        if (crossed[p]) out.crossed_zero.push_back(p);
    }
    return out;
}

/// Discounted wealth when a fraction pi of wealth is held in the risky assets.
/// The exact scheme applies the exponential solution step by step, so wealth stays positive.
inline WealthPaths simulate_wealth_fraction(const ParameterPath& path, const PiecewiseStrategy& pi, double x0,
                                            double r, const PathConfig& config) {
    detail::validate_path(path);
    detail::validate_strategy(pi, path);
    detail::check_config(config);
    if (!(x0 > 0.0) || !std::isfinite(x0)) throw DomainError("x0 must be positive and finite");
    if (!std::isfinite(r)) throw InvalidInput("r must be finite");

    const auto steps = detail::wealth_steps(path, pi, r, config.steps_per_year);
    WealthPaths out;
    out.seed = config.seed;
    out.terminal.assign(config.n_paths, 0.0);
    std::vector<char> crossed(config.n_paths, 0);
    const double log_x0 = std::log(x0);

    detail::parallel_blocks(config.n_paths, config.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            CounterStream rng(config.seed, p);
            std::normal_distribution<double> normal;
            if (config.scheme == Scheme::Exact) {
                double log_x = log_x0;
                for (const auto& st : steps) {
                    log_x += st.drift - 0.5 * st.variance + detail::draw_loading(st.loading, normal, rng);
                }
                out.terminal[p] = std::exp(log_x);
            } else {
                double x = x0;
                for (const auto& st : steps) {
                    x *= 1.0 + st.drift + detail::draw_loading(st.loading, normal, rng);
                    if (x <= 0.0) crossed[p] = 1;
                }
                out.terminal[p] = x;
            }
        }
    });
    for (std::size_t p = 0; p < crossed.size(); ++p) {
        if (crossed[p]) out.crossed_zero.push_back(p);
    }
    return out;
}

/// Discounted wealth when fixed cash amounts pi_hat are held in the risky assets.
/// The increment is Gaussian and both schemes coincide.
inline WealthPaths simulate_wealth_cash(const ParameterPath& path, const PiecewiseStrategy& pi_hat, double x0,
                                        double r, const PathConfig& config) {
    detail::validate_path(path);
    detail::validate_strategy(pi_hat, path);
    detail::check_config(config);
    if (!std::isfinite(x0)) throw DomainError("x0 must be finite");
    if (!std::isfinite(r)) throw InvalidInput("r must be finite");

    const auto steps = detail::wealth_steps(path, pi_hat, r, config.steps_per_year);
    WealthPaths out;
    out.seed = config.seed;
    out.terminal.assign(config.n_paths, 0.0);

    detail::parallel_blocks(config.n_paths, config.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            CounterStream rng(config.seed, p);
            std::normal_distribution<double> normal;
            double x = x0;
            for (const auto& st : steps) {
                x += st.drift + detail::draw_loading(st.loading, normal, rng);
            }
            out.terminal[p] = x;
        }
    });
    return out;
}

/// Sample mean and standard error of an arbitrary per-path statistic.
inline SimEstimate summarize(std::span<const double> values, std::uint64_t seed = 0) {
    SimEstimate est;
    est.n_paths = values.size();
    est.seed = seed;
    if (values.empty()) return est;
    // Welford: constant samples give an exact mean and zero variance.
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t k = 0;
    for (double v : values) {
        ++k;
        const double delta = v - mean;
        mean += delta / static_cast<double>(k);
        m2 += delta * (v - mean);
    }
    est.mean = mean;
    if (k > 1) {
        const double var = m2 / static_cast<double>(k - 1);
        est.std_error = std::sqrt(var / static_cast<double>(k));
    }
    return est;
}

inline std::vector<double> utility_values(std::span<const double> wealth, const UtilitySpec& utility) {
    std::vector<double> out(wealth.size());
    for (std::size_t i = 0; i < wealth.size(); ++i) {
        if (!in_domain(utility, wealth[i])) {
            throw DomainError("terminal wealth outside the utility's domain on path " + std::to_string(i));
        }
        out[i] = evaluate(utility, wealth[i]);
    }
    return out;
}

/// Mean and standard error of u(X_T) across paths.
inline SimEstimate estimate_expected_utility(std::span<const double> wealth, const UtilitySpec& utility,
                                             std::uint64_t seed = 0) {
    const auto values = utility_values(wealth, utility);
    return summarize(values, seed);
}

inline SimEstimate estimate_expected_utility(const WealthPaths& paths, const UtilitySpec& utility) {
    return estimate_expected_utility(paths.terminal, utility, paths.seed);
}

// Bridges from a solved scenario to simulator inputs.

/// Worst-case parameter path (mu*, sqrt(C) I) on every cell.
inline ParameterPath worst_case_path(const RobustSolution& solution) {
    ParameterPath path;
    const auto& sched = solution.scenario().schedule;
    for (std::size_t i = 0; i < solution.cells().size(); ++i) {
        const auto& c = solution.cells()[i];
        path.segments.push_back({c.t_start, c.t_end, c.mu_star, worst_case_vol_factor(sched.cells[i])});
    }
    return path;
}

/// Optimal per-cell strategy (fractions, or cash for exponential utility).
inline PiecewiseStrategy optimal_strategy(const RobustSolution& solution) {
    PiecewiseStrategy s;
    for (const auto& c : solution.cells()) {
        s.segments.push_back({c.t_start, c.t_end, c.strategy});
    }
    return s;
}

inline PiecewiseStrategy shifted(PiecewiseStrategy s, double delta) {
    for (auto& seg : s.segments) seg.value.array() += delta;
    return s;
}

/// Restriction of a piecewise object to [a, b].
template <typename Piecewise>
Piecewise restrict_to(const Piecewise& in, double a, double b) {
    if (!(b > a)) throw InvalidInput("restrict_to: empty interval");
    Piecewise out;
    for (const auto& seg : in.segments) {
        const double lo = std::max(seg.t_start, a);
        const double hi = std::min(seg.t_end, b);
        if (hi - lo > detail::kTimeTol) {
            auto piece = seg;
            piece.t_start = lo;
            piece.t_end = hi;
            out.segments.push_back(std::move(piece));
        }
    }
    if (out.segments.empty()) throw InvalidInput("restrict_to: interval outside the object's span");
    return out;
}

/// Simulates wealth under the solution's own convention (fraction or cash).
inline WealthPaths simulate_wealth(const RobustSolution& solution, const ParameterPath& path,
                                   const PiecewiseStrategy& strategy, double x0, const PathConfig& config) {
    if (uses_cash_strategy(solution.utility())) {
        return simulate_wealth_cash(path, strategy, x0, solution.scenario().r, config);
    }
    return simulate_wealth_fraction(path, strategy, x0, solution.scenario().r, config);
}

}  // namespace robust_merton
