#include "cli.hpp"

#include "robust_merton/robust_merton.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace robust_merton::cli {
namespace {

using io::json;

struct CommonOptions {
    std::string scenario;
    std::string output = "-";
};

struct SolveOptions : CommonOptions {
    std::vector<std::string> value_at;
};

struct SimulateOptions : CommonOptions {
    long long paths = 100000;
    long long steps_per_year = 252;
    std::optional<unsigned long long> seed;
    std::string theta = "worst";
    std::string scheme = "exact";
    unsigned threads = 0;
    std::string summary;
};

struct VerifyOptions : CommonOptions {
    std::string suite = "all";
    double inject_rate_scale = 1.0;
    long long paths = 100000;
    long long steps_per_year = 12;
    std::optional<unsigned long long> seed;
    unsigned threads = 0;
    std::string residual_csv;
};

/// Thrown inside command handlers to leave with a specific exit code.
struct Exit {
    int code;
};

void emit(const std::string& target, const std::string& text, std::ostream& out) {
    if (target == "-") {
        out << text;
    } else {
        io::write_atomically(target, text);
    }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::uint64_t resolve_seed(const std::optional<unsigned long long>& flag, std::ostream& err) {
    if (flag) return *flag;
    if (const char* env = std::getenv(kSeedEnv)) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(env, &used);
            if (used == std::string(env).size()) return v;
        } catch (const std::exception&) {
        }
        err << "error: " << kSeedEnv << " must be an unsigned integer\n";
        throw Exit{kIoOrParse};
    }
    return kDefaultSeed;
}

Scenario load(const std::string& path) { return io::load_scenario(path); }

RobustSolution solve_or_exit(const Scenario& scenario, std::ostream& err) {
    try {
        return solve(scenario);
    } catch (const ValidationError& e) {
        err << "invalid scenario:\n";
        for (const auto& v : e.violations()) err << "  " << describe(v) << "\n";
        throw Exit{kValidation};
    }
}

json provenance(const Scenario& scenario) {
    return json{{"tool", "robust-merton"}, {"version", kVersion}, {"scenario", io::to_json(scenario)}};
}

// ---------------------------------------------------------------------------

int cmd_solve(const SolveOptions& opt, std::ostream& out, std::ostream& err) {
    const auto scenario = load(opt.scenario);
    const auto sol = solve_or_exit(scenario, err);
    json report = provenance(scenario);
    report["solution"] = io::to_json(sol);
    json values = json::array();
    for (const auto& pair : opt.value_at) {
        const auto comma = pair.find(',');
        double t = 0.0, x = 0.0;
        try {
            if (comma == std::string::npos) throw std::invalid_argument(pair);
            t = std::stod(pair.substr(0, comma));
            x = std::stod(pair.substr(comma + 1));
        } catch (const std::exception&) {
            err << "error: --value-at expects t,x but got '" << pair << "'\n";
            return kIoOrParse;
        }
        try {
            values.push_back(json{{"t", t}, {"x", x}, {"value", value_at(sol, t, x)}});
        } catch (const DomainError& e) {
            err << "error: " << e.what() << "\n";
            return kValidation;
        }
    }
    report["values"] = std::move(values);
    emit(opt.output, dump(report), out);
    return kOk;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err) {
    if (opt.paths < 1) {
        err << "error: --paths must be at least 1\n";
        return kValidation;
    }
    if (opt.steps_per_year < 1) {
        err << "error: --steps-per-year must be at least 1\n";
        return kValidation;
    }
    if (opt.scheme != "exact" && opt.scheme != "euler") {
        err << "error: --scheme must be exact or euler\n";
        return kIoOrParse;
    }
    const auto scenario = load(opt.scenario);
    const auto sol = solve_or_exit(scenario, err);

    ParameterPath path;
    if (opt.theta == "worst") {
        path = worst_case_path(sol);
    } else {
        path = io::load_parameter_path(opt.theta);
        try {
            detail::validate_path(path);
        } catch (const InvalidInput& e) {
            err << "invalid parameter path: " << e.what() << "\n";
            return kValidation;
        }
        const auto violations = io::check_path_within_schedule(path, scenario.schedule);
        if (!violations.empty()) {
            err << "parameter path leaves the uncertainty sets:\n";
            for (const auto& v : violations) err << "  segment " << describe(v) << "\n";
            return kValidation;
        }
    }

    PathConfig cfg;
    cfg.n_paths = static_cast<std::size_t>(opt.paths);
    cfg.steps_per_year = static_cast<std::size_t>(opt.steps_per_year);
    cfg.seed = resolve_seed(opt.seed, err);
    cfg.scheme = opt.scheme == "euler" ? Scheme::Euler : Scheme::Exact;
    cfg.threads = opt.threads;

    const auto wealth = simulate_wealth(sol, path, optimal_strategy(sol), scenario.x0, cfg);
    if (!in_domain(scenario.utility, *std::min_element(wealth.terminal.begin(), wealth.terminal.end()))) {
        err << "error: " << wealth.crossed_zero.size() << " path(s) reached non-positive wealth; "
            << "utility undefined (use --scheme exact)\n";
        return kValidation;
    }
    const auto utilities = utility_values(wealth.terminal, scenario.utility);
    const double growth = std::exp(scenario.r * scenario.horizon());
    std::vector<double> undiscounted(wealth.terminal.size());
    for (std::size_t i = 0; i < undiscounted.size(); ++i) undiscounted[i] = wealth.terminal[i] * growth;

    const auto w_est = summarize(wealth.terminal, cfg.seed);
    const auto u_est = summarize(utilities, cfg.seed);
    const auto g_est = summarize(undiscounted, cfg.seed);

    std::string csv = "path_id,terminal_wealth,utility_value,undiscounted_wealth\n";
    csv.reserve(csv.size() + wealth.terminal.size() * 64);
    for (std::size_t i = 0; i < wealth.terminal.size(); ++i) {
        csv += std::to_string(i) + "," + io::format_number(wealth.terminal[i]) + "," +
               io::format_number(utilities[i]) + "," + io::format_number(undiscounted[i]) + "\n";
    }
    csv += "mean," + io::format_number(w_est.mean) + "," + io::format_number(u_est.mean) + "," +
           io::format_number(g_est.mean) + "\n";
    csv += "std_error," + io::format_number(w_est.std_error) + "," + io::format_number(u_est.std_error) + "," +
           io::format_number(g_est.std_error) + "\n";
    emit(opt.output, csv, out);

    const double v0 = value_at(sol, 0.0, scenario.x0);
    if (!opt.summary.empty()) {
        json report = provenance(scenario);
        report["run"] = json{{"paths", cfg.n_paths},
                             {"steps_per_year", cfg.steps_per_year},
                             {"seed", cfg.seed},
                             {"scheme", opt.scheme},
                             {"theta", opt.theta == "worst" ? json("worst") : io::to_json(path)}};
        report["expected_utility"] = io::to_json(u_est);
        report["terminal_wealth"] = io::to_json(w_est);
        report["undiscounted_terminal_wealth"] = io::to_json(g_est);
        report["value_at_origin"] = v0;
        emit(opt.summary, dump(report), out);
    }
    err << std::setprecision(10) << "mean utility " << u_est.mean << " (SE " << u_est.std_error << "), V(0,x0) "
        << v0 << ", seed " << cfg.seed << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------

struct SuiteResult {
    bool pass = true;
    json report;
};

PiGrid default_grid(const CellSolution& cell) {
    const Eigen::Index d = cell.strategy.size();
    const double bound = std::max(2.0, std::ceil(1.5 * cell.strategy.cwiseAbs().maxCoeff()));
    double step = 1e-3;
    if (d > 1) {
        const double per_dim = std::max(5.0, std::floor(std::pow(2.0e5, 1.0 / static_cast<double>(d))));
        step = std::max(step, 2.0 * bound / (per_dim - 1.0));
    }
    return {Vector::Constant(d, -bound), Vector::Constant(d, bound), step};
}

SuiteResult saddle_suite(const RobustSolution& sol, std::uint64_t seed) {
    SuiteResult res;
    res.report["cells"] = json::array();
    const auto& sc = sol.scenario();
    for (const auto& c : sol.cells()) {
        const auto& cell = sc.schedule.cells[c.cell_index];
        SaddleProblem prob{c.t_end - c.t_start, sc.x0, sc.r, sc.utility};
        const auto grid = default_grid(c);
        const auto rep = saddle_point_scan(prob, grid, theta_candidates(cell, sc.r, 50, seed));
        const double pi_err = (rep.arg_pi - c.strategy).cwiseAbs().maxCoeff();
        const bool theta_ok = (rep.arg_theta.mu - c.mu_star).cwiseAbs().maxCoeff() <= 1e-12 &&
                              (rep.arg_theta.sigma - c.sigma_star).cwiseAbs().maxCoeff() <= 1e-12;
        const bool pass = theta_ok && pi_err <= rep.final_step && rep.gap <= 1e-8 && rep.gap >= -1e-12;
        res.pass = res.pass && pass;
        json j = io::to_json(rep);
        j["cell"] = c.cell_index;
        j["analytic_pi"] = io::to_json(c.strategy);
        j["pi_error"] = pi_err;
        j["theta_matches_worst_case"] = theta_ok;
        j["pass"] = pass;
        res.report["cells"].push_back(std::move(j));
    }
    return res;
}

SuiteResult hjb_suite(const RobustSolution& sol, std::string* csv) {
    SuiteResult res;
    const double x0 = sol.scenario().x0;
    const auto pts = interior_sample_points(sol, 100, 0.5 * x0, 2.0 * x0);
    const auto rep = hjb_residual(sol, pts);
    res.pass = rep.max_abs_relative_residual <= 1e-6;
    res.report = json{{"points", pts.size()},
                      {"max_abs_relative_residual", rep.max_abs_relative_residual},
                      {"tolerance", 1e-6},
                      {"fd_steps", json{{"t_abs_times_T", 1e-5}, {"x_rel_first", 1e-5}, {"x_rel_second", 1e-4}}},
                      {"pass", res.pass}};
    if (csv) *csv = io::residual_csv(rep);
    return res;
}

SuiteResult martingale_suite(const RobustSolution& sol, const PathConfig& cfg) {
    SuiteResult res;
    const double s = 0.0;
    const double t = 0.5 * sol.horizon();
    const double x = sol.scenario().x0;
    const auto optimal = optimal_strategy(sol);
    const auto opt_rep = martingale_check(sol, optimal, s, t, x, cfg);
    const auto bad_rep = martingale_check(sol, shifted(optimal, 0.5), s, t, x, cfg);
    auto to_json = [](const MartingaleReport& r) {
        return json{{"estimate", io::to_json(r.lhs)},        {"v_s_x", r.rhs},
                    {"analytic_estimate", r.analytic_lhs},   {"expected_deficit", r.expected_deficit},
                    {"martingale", r.martingale},            {"strictly_below", r.strictly_below}};
    };
    res.pass = opt_rep.martingale && bad_rep.strictly_below;
    res.report = json{{"s", s},
                      {"t", t},
                      {"optimal", to_json(opt_rep)},
                      {"perturbed_by_0_5", to_json(bad_rep)},
                      {"pass", res.pass}};
    return res;
}

SuiteResult shape_suite(const RobustSolution& sol) {
    SuiteResult res;
    const double x0 = sol.scenario().x0;
    const auto grid = log_spaced(0.1 * x0, 10.0 * x0, 50);
    res.report["times"] = json::array();
    for (int k = 0; k < 10; ++k) {
        const double t = (k + 0.5) / 10.0 * sol.horizon();
        const auto rep = shape_check(sol, t, grid);
        res.pass = res.pass && rep.pass();
        res.report["times"].push_back(
            json{{"t", t}, {"increasing", rep.increasing}, {"concave", rep.concave}, {"pass", rep.pass()}});
    }
    res.report["pass"] = res.pass;
    return res;
}

int cmd_verify(const VerifyOptions& opt, std::ostream& out, std::ostream& err) {
    static const std::vector<std::string> known{"saddle", "hjb", "martingale", "shape", "all"};
    if (std::find(known.begin(), known.end(), opt.suite) == known.end()) {
        err << "error: unknown suite '" << opt.suite << "' (expected saddle|hjb|martingale|shape|all)\n";
        return kIoOrParse;
    }
    if (opt.paths < 1 || opt.steps_per_year < 1) {
        err << "error: --paths and --steps-per-year must be at least 1\n";
        return kValidation;
    }
    if (!(opt.inject_rate_scale > 0.0) || !std::isfinite(opt.inject_rate_scale)) {
        err << "error: --inject-rate-scale must be positive\n";
        return kValidation;
    }
    const auto scenario = load(opt.scenario);
    auto sol = solve_or_exit(scenario, err);
    if (opt.inject_rate_scale != 1.0) sol = with_scaled_rates(sol, opt.inject_rate_scale);

    PathConfig cfg;
    cfg.n_paths = static_cast<std::size_t>(opt.paths);
    cfg.steps_per_year = static_cast<std::size_t>(opt.steps_per_year);
    cfg.seed = resolve_seed(opt.seed, err);
    cfg.threads = opt.threads;

    json report = provenance(scenario);
    report["run"] = json{{"suite", opt.suite},
                         {"inject_rate_scale", opt.inject_rate_scale},
                         {"paths", cfg.n_paths},
                         {"steps_per_year", cfg.steps_per_year},
                         {"seed", cfg.seed}};
    report["suites"] = json::object();
    bool all_pass = true;
    auto run_suite = [&](const std::string& name, auto&& fn) {
        if (opt.suite != "all" && opt.suite != name) return;
        SuiteResult r = fn();
        all_pass = all_pass && r.pass;
        report["suites"][name] = std::move(r.report);
        err << std::left << std::setw(12) << name << (r.pass ? "PASS" : "FAIL") << "\n";
    };
    std::string csv;
    run_suite("saddle", [&] { return saddle_suite(sol, cfg.seed); });
    run_suite("hjb", [&] { return hjb_suite(sol, opt.residual_csv.empty() ? nullptr : &csv); });
    run_suite("martingale", [&] { return martingale_suite(sol, cfg); });
    run_suite("shape", [&] { return shape_suite(sol); });
    report["pass"] = all_pass;

    emit(opt.output, dump(report), out);
    if (!opt.residual_csv.empty() && !csv.empty()) emit(opt.residual_csv, csv, out);
    return all_pass ? kOk : kVerificationFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Robust Merton portfolio solver, simulator and verifier", "robust-merton"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    SolveOptions solve_opt;
    auto* solve_cmd = app.add_subcommand("solve", "Compute worst-case parameters, strategies and values");
    solve_cmd->add_option("scenario", solve_opt.scenario, "Scenario JSON file")->required();
    solve_cmd->add_option("-o,--output", solve_opt.output, "Report path ('-' for stdout)");
    solve_cmd->add_option("--value-at", solve_opt.value_at, "Extra value evaluations as t,x");

    SimulateOptions sim_opt;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo of terminal wealth under the optimal strategy");
    sim_cmd->add_option("scenario", sim_opt.scenario, "Scenario JSON file")->required();
    sim_cmd->add_option("-o,--output", sim_opt.output, "CSV path ('-' for stdout)");
    sim_cmd->add_option("--paths", sim_opt.paths, "Number of paths");
    sim_cmd->add_option("--steps-per-year", sim_opt.steps_per_year, "Time steps per year");
    sim_cmd->add_option("--seed", sim_opt.seed, std::string("Master seed (default: $") + kSeedEnv + " or built-in)");
    sim_cmd->add_option("--theta", sim_opt.theta, "'worst' or a parameter-path JSON file");
    sim_cmd->add_option("--scheme", sim_opt.scheme, "exact or euler");
    sim_cmd->add_option("--threads", sim_opt.threads, "Worker threads (0 = all cores)");
    sim_cmd->add_option("--summary", sim_opt.summary, "Optional JSON summary path");

    VerifyOptions ver_opt;
    auto* ver_cmd = app.add_subcommand("verify", "Run saddle, HJB, martingale and shape checks");
    ver_cmd->add_option("scenario", ver_opt.scenario, "Scenario JSON file")->required();
    ver_cmd->add_option("-o,--output", ver_opt.output, "Report path ('-' for stdout)");
    ver_cmd->add_option("--suite", ver_opt.suite, "saddle|hjb|martingale|shape|all");
    ver_cmd->add_option("--inject-rate-scale", ver_opt.inject_rate_scale, "Multiply every per-cell rate (test power)");
    ver_cmd->add_option("--paths", ver_opt.paths, "Monte Carlo paths for the martingale suite");
    ver_cmd->add_option("--steps-per-year", ver_opt.steps_per_year, "Time steps per year for the martingale suite");
    ver_cmd->add_option("--seed", ver_opt.seed, "Master seed");
    ver_cmd->add_option("--threads", ver_opt.threads, "Worker threads (0 = all cores)");
    ver_cmd->add_option("--residual-csv", ver_opt.residual_csv, "Optional CSV of HJB residuals");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kIoOrParse;
    }

    try {
        if (solve_cmd->parsed()) return cmd_solve(solve_opt, out, err);
        if (sim_cmd->parsed()) return cmd_simulate(sim_opt, out, err);
        return cmd_verify(ver_opt, out, err);
    } catch (const Exit& e) {
        return e.code;
    } catch (const ValidationError& e) {
        err << e.what() << "\n";
        return kValidation;
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kIoOrParse;
    }
}

}  // namespace robust_merton::cli
