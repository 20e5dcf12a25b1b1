// End-to-end acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

using namespace robust_merton;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Criterion {
public:
    explicit Criterion(Outcome& o) : o_(o) {}
    void check(bool ok, const std::string& what) {
        if (!ok) {
            o_.pass = false;
            if (!o_.detail.empty()) o_.detail += "; ";
            o_.detail += what;
        }
    }

private:
    Outcome& o_;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PathConfig paths(std::size_t n, std::uint64_t seed, std::size_t spy) {
    PathConfig c;
    c.n_paths = n;
    c.seed = seed;
    c.steps_per_year = spy;
    c.scheme = Scheme::Exact;
    c.threads = 0;
    return c;
}

// 1. Saddle point on the canonical cell.
Outcome saddle() {
    Outcome o;
    Criterion c(o);
    const auto utilities = support::all_utilities();
    const double stated[] = {0.5556, 1.1111, 0.5556};
    const double analytic[] = {0.05 / 0.09, 0.05 / (0.09 * 0.5), 0.05 / 0.09};
    for (std::size_t k = 0; k < utilities.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto sc = support::canonical(utilities[k]);
        const auto rep = saddle_point_scan({1.0, 1.0, 0.0, utilities[k]},
                                           PiGrid{support::vec({-2.0}), support::vec({2.0}), 1e-3},
                                           theta_candidates(sc.schedule.cells[0], 0.0));
        const double elapsed = seconds_since(t0);
        const auto name = utility_name(utilities[k]);
        c.check(rep.arg_theta.mu(0) == 0.05 && rep.arg_theta.sigma(0, 0) == 0.09,
                name + " arg_theta=(" + fmt(rep.arg_theta.mu(0)) + "," + fmt(rep.arg_theta.sigma(0, 0)) + ")");
        c.check(std::abs(rep.arg_pi(0) - analytic[k]) <= rep.final_step, name + " arg_pi=" + fmt(rep.arg_pi(0)));
        c.check(std::abs(analytic[k] - stated[k]) <= 5e-5, name + " stated pi* disagrees at 4 decimals");
        c.check(rep.gap <= 1e-8 && rep.gap >= -1e-12, name + " gap=" + fmt(rep.gap));
        c.check(elapsed <= 10.0, name + " took " + fmt(elapsed) + "s");
    }
    return o;
}

// 2. Analytic value vs Monte Carlo under (pi*, mu*, Sigma*).
Outcome value_agreement() {
    Outcome o;
    Criterion c(o);
    const auto t0 = std::chrono::steady_clock::now();
    std::uint64_t seed = 20240517;
    for (const auto& u : support::all_utilities()) {
        const auto sol = solve(support::canonical(u));
        const auto w = simulate_wealth(sol, worst_case_path(sol), optimal_strategy(sol), 1.0, paths(100000, seed++, 252));
        const auto est = estimate_expected_utility(w, u);
        const double v0 = value_at(sol, 0.0, 1.0);
        c.check(std::abs(est.mean - v0) <= 3.0 * est.std_error,
                utility_name(u) + " |" + fmt(est.mean) + " - " + fmt(v0) + "| > 3*" + fmt(est.std_error));
    }
    const double elapsed = seconds_since(t0);
    c.check(elapsed <= 30.0, "took " + fmt(elapsed) + "s");
    return o;
}

// 3. HJB residual and its power against a 1% rate corruption.
Outcome hjb() {
    Outcome o;
    Criterion c(o);
    for (const auto& u : support::all_utilities()) {
        for (const auto& sc : {support::canonical(u), support::three_cell(u)}) {
            const auto sol = solve(sc);
            const auto pts = interior_sample_points(sol, 100, 0.5 * sc.x0, 2.0 * sc.x0);
            const double clean = hjb_residual(sol, pts).max_abs_relative_residual;
            const double bad = hjb_residual(with_scaled_rates(sol, 1.01), pts).max_abs_relative_residual;
            const auto tag = utility_name(u) + "/" + std::to_string(sc.schedule.cells.size()) + "cell";
            c.check(pts.size() >= 100 * sol.cells().size(), tag + " too few points");
            c.check(clean <= 1e-6, tag + " residual " + fmt(clean));
            c.check(bad > 1e-3, tag + " corrupted residual " + fmt(bad));
        }
    }
    return o;
}

// 4. Martingale optimality and strict loss under a perturbation.
Outcome martingale() {
    Outcome o;
    Criterion c(o);
    std::uint64_t seed = 777;
    for (const auto& u : support::all_utilities()) {
        const auto sol = solve(support::canonical(u));
        const auto opt = martingale_check(sol, optimal_strategy(sol), 0.0, 0.5, 1.0, paths(100000, seed++, 252));
        c.check(opt.martingale, utility_name(u) + " optimal: " + fmt(opt.lhs.mean) + " vs " + fmt(opt.rhs) +
                                    " SE " + fmt(opt.lhs.std_error));
        const auto pert =
            martingale_check(sol, shifted(optimal_strategy(sol), 0.5), 0.0, 0.5, 1.0, paths(100000, seed++, 252));
        c.check(pert.strictly_below, utility_name(u) + " perturbed not strictly below: " + fmt(pert.lhs.mean) +
                                         " vs " + fmt(pert.rhs) + " SE " + fmt(pert.lhs.std_error));
        c.check(pert.lhs.std_error < pert.expected_deficit / 5.0,
                utility_name(u) + " SE " + fmt(pert.lhs.std_error) + " not under deficit/5");
    }
    return o;
}

// 5. Increasing and concave in wealth.
Outcome shape() {
    Outcome o;
    Criterion c(o);
    std::mt19937_64 rng(55);
    for (const auto& u : support::all_utilities()) {
        for (const auto& sc : {support::canonical(u), support::three_cell(u)}) {
            const auto sol = solve(sc);
            std::uniform_real_distribution<double> when(0.0, sol.horizon());
            const auto grid = log_spaced(0.1 * sc.x0, 10.0 * sc.x0, 50);
            for (int i = 0; i < 10; ++i) {
                const double t = when(rng);
                const auto rep = shape_check(sol, t, grid);
                c.check(rep.pass(), utility_name(u) + " t=" + fmt(t));
            }
        }
    }
    return o;
}

// 6. First-order convergence of the mesh sequence to the continuous limit.
Outcome mesh_limit() {
    Outcome o;
    Criterion c(o);
    RateProfile p;
    p.d = 1;
    p.r = 0.0;
    p.horizon = 1.0;
    p.mu_star = [](double t) { return support::vec({0.05 + 0.05 * t}); };
    p.vol_bound = [](double) { return 0.09; };
    for (const auto& u : support::all_utilities()) {
        const double limit = continuous_limit_value(p, u, 0.0, 1.0).value;
        const auto series = mesh_refinement_series(p, u, 1.0, 8);
        // Least-squares slope of log|error| against log(mesh) over n = 2..256.
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        double prev = std::numeric_limits<double>::infinity();
        bool decreasing = true;
        for (std::size_t j = 1; j < series.size(); ++j) {
            const double err = std::abs(series[j].value - limit);
            decreasing = decreasing && err < prev;
            prev = err;
            const double x = std::log(series[j].mesh), y = std::log(err);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++n;
        }
        const double order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        c.check(decreasing, utility_name(u) + " error not decreasing");
        c.check(order >= 0.8 && order <= 1.2, utility_name(u) + " order " + fmt(order));
        std::cout << "    " << utility_name(u) << ": observed order " << fmt(order) << "\n";
    }
    return o;
}

// Worst-case drift recomputed without the library's projection.
Vector independent_mu_star(const UncertaintyCell& cell, double r) {
    if (const auto* b = std::get_if<BoxSet>(&cell.drift)) {
        Vector m(b->lower.size());
        for (Eigen::Index k = 0; k < m.size(); ++k) m(k) = std::min(std::max(r, b->lower(k)), b->upper(k));
        return m;
    }
    const auto& ball = std::get<BallSet>(cell.drift);
    const Vector to = Vector::Constant(ball.center.size(), r) - ball.center;
    const double dist = to.norm();
    if (dist <= ball.radius) return Vector::Constant(ball.center.size(), r);
    return ball.center + (ball.radius / dist) * to;
}

// 7. Multi-cell composition and invariance under cell splitting.
Outcome composition() {
    Outcome o;
    Criterion c(o);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (const auto& u : support::all_utilities()) {
        const auto sc = support::three_cell(u);
        const auto sol = solve(sc);
        double total = 0.0;  // sum of kappa_i * length_i
        for (const auto& cell : sc.schedule.cells) {
            const Vector m = independent_mu_star(cell, sc.r);
            const double e2 = (m.array() - sc.r).square().sum();
            double kappa = e2 / (2.0 * cell.vol.eig_max);
            if (const auto* pw = std::get_if<PowerUtility>(&u)) kappa *= pw->gamma / (1.0 - pw->gamma);
            total += kappa * cell.length();
        }
        double closed = 0.0;
        if (std::holds_alternative<LogUtility>(u)) {
            closed = std::log(sc.x0) + total;
        } else if (const auto* pw = std::get_if<PowerUtility>(&u)) {
            closed = std::pow(sc.x0, pw->gamma) * std::exp(total);
        } else {
            const double beta = std::get<ExponentialUtility>(u).beta;
            closed = -beta * std::exp(-beta * sc.x0) * std::exp(-total);
        }
        const double v0 = value_at(sol, 0.0, sc.x0);
        c.check(std::abs(v0 - closed) <= 1e-12, utility_name(u) + " V0 " + fmt(v0) + " vs " + fmt(closed));

        for (std::size_t k = 0; k < sc.schedule.cells.size(); ++k) {
            for (int rep = 0; rep < 5; ++rep) {
                auto split = sc;
                auto& cells = split.schedule.cells;
                const double cut = cells[k].t_start + (0.05 + 0.9 * unif(rng)) * cells[k].length();
                auto right = cells[k];
                right.t_start = cut;
                cells[k].t_end = cut;
                cells.insert(cells.begin() + static_cast<long>(k) + 1, right);
                const auto sol2 = solve(split);
                for (double t : {0.0, 0.15, 0.3, 0.5, 0.69, 0.7, 1.0, 1.2}) {
                    for (double x : {0.3, sc.x0, 4.0}) {
                        const double a = value_at(sol, t, x), b = value_at(sol2, t, x);
                        if (std::abs(a - b) > 1e-12) {
                            c.check(false, utility_name(u) + " split cell " + std::to_string(k) + " changed V(" +
                                               fmt(t) + "," + fmt(x) + ") by " + fmt(std::abs(a - b)));
                        }
                        const double ds = (strategy_at(sol, t, x) - strategy_at(sol2, t, x)).cwiseAbs().maxCoeff();
                        if (ds > 1e-12) c.check(false, utility_name(u) + " split changed strategy");
                    }
                }
            }
        }
    }
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 8. Byte-identical CLI outputs across thread counts.
Outcome determinism() {
    Outcome o;
    Criterion c(o);
    const fs::path dir = fs::temp_directory_path() / "robust_merton_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cli = CLI_BINARY;
    const std::string scen = std::string(SCENARIO_DIR) + "/three_cell_two_assets.json";
    const std::string canon = std::string(SCENARIO_DIR) + "/canonical_exponential.json";
    auto run = [&](const std::string& args) {
        const std::string cmd = "\"" + cli + "\" " + args + " 2>/dev/null";
        return std::system(cmd.c_str());
    };
    std::vector<std::string> sims, sums, verifies;
    for (int threads : {1, 2, 3, 8}) {
        const auto t = std::to_string(threads);
        const auto csv = dir / ("sim_" + t + ".csv");
        const auto sum = dir / ("sum_" + t + ".json");
        const auto ver = dir / ("verify_" + t + ".json");
        for (int repeat = 0; repeat < 2; ++repeat) {
            c.check(run("simulate \"" + scen + "\" --paths 20000 --seed 42 --threads " + t + " -o \"" + csv.string() +
                        "\" --summary \"" + sum.string() + "\"") == 0,
                    "simulate failed (threads " + t + ")");
            sims.push_back(slurp(csv));
            sums.push_back(slurp(sum));
            c.check(run("verify \"" + canon + "\" --suite martingale --paths 20000 --seed 42 --threads " + t +
                        " -o \"" + ver.string() + "\"") == 0,
                    "verify failed (threads " + t + ")");
            verifies.push_back(slurp(ver));
        }
    }
    auto all_same = [](const std::vector<std::string>& v) {
        return !v.empty() && !v.front().empty() && std::all_of(v.begin(), v.end(), [&](auto& s) { return s == v.front(); });
    };
    c.check(all_same(sims), "simulate CSV differs");
    c.check(all_same(sums), "simulate JSON summary differs");
    c.check(all_same(verifies), "verify JSON differs");
    fs::remove_all(dir);
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 saddle point reproduction", saddle},
        {"2 analytic vs Monte Carlo value", value_agreement},
        {"3 HJB residual and test power", hjb},
        {"4 martingale optimality", martingale},
        {"5 increasing and concave value", shape},
        {"6 mesh-to-integral first-order limit", mesh_limit},
        {"7 multi-cell composition", composition},
        {"8 CLI determinism across threads", determinism},
    };
    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome out;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            out = fn();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail = std::string("exception: ") + e.what();
        }
        const double elapsed = seconds_since(t0);
        std::cout << (out.pass ? "PASS " : "FAIL ") << name << " (" << fmt(elapsed) << " s)";
        if (!out.detail.empty()) std::cout << " -- " << out.detail;
        std::cout << std::endl;
        if (!out.pass) ++failures;
    }
    std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
