#include "cli.hpp"
#include "robust_merton/robust_merton.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace robust_merton;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string scenario(const char* name) { return std::string(SCENARIO_DIR) + "/" + name; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("robust_merton_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::create_directories(dir_);
        unsetenv(cli::kSeedEnv);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const char* name) const { return (dir_ / name).string(); }
    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SolveWritesRateAndValue) {
    const auto r = run({"solve", scenario("canonical_log.json"), "-o", path("solve.json"), "--value-at", "0.5,2"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = io::json::parse(slurp(path("solve.json")));
    EXPECT_NEAR(j["solution"]["cells"][0]["rate"].get<double>(), 0.013889, 5e-7);
    EXPECT_NEAR(j["solution"]["value_at_origin"].get<double>(), 0.013889, 5e-7);
    EXPECT_EQ(j["version"], kVersion);
    EXPECT_EQ(j["scenario"]["version"], "1");
}

TEST_F(CliTest, SolveExitCodes) {
    const auto bad = run({"solve", scenario("invalid_zero_eig.json"), "-o", "-"});
    EXPECT_EQ(bad.code, cli::kValidation);
    EXPECT_NE(bad.err.find("positivity"), std::string::npos);
    EXPECT_EQ(run({"solve", path("missing.json")}).code, cli::kIoOrParse);
    std::ofstream(path("broken.json")) << "{\"version\": \"1\", \"d\": 1, \"oops\": true}";
    EXPECT_EQ(run({"solve", path("broken.json")}).code, cli::kIoOrParse);
    EXPECT_EQ(run({"frobnicate"}).code, cli::kIoOrParse);
}

TEST_F(CliTest, SimulateIsDeterministicAndWellFormed) {
    const std::vector<std::string> base{"simulate", scenario("three_cell_two_assets.json"), "--paths", "2000",
                                        "--seed", "7"};
    auto a = base, b = base;
    a.insert(a.end(), {"-o", path("a.csv"), "--threads", "1"});
    b.insert(b.end(), {"-o", path("b.csv"), "--threads", "3"});
    ASSERT_EQ(run(a).code, 0);
    ASSERT_EQ(run(b).code, 0);
    const auto csv = slurp(path("a.csv"));
    EXPECT_EQ(csv, slurp(path("b.csv")));
    EXPECT_EQ(csv.rfind("path_id,terminal_wealth,utility_value,undiscounted_wealth\n", 0), 0u);
    EXPECT_NE(csv.find("\nmean,"), std::string::npos);
    EXPECT_NE(csv.find("\nstd_error,"), std::string::npos);
    EXPECT_EQ(csv.find('\r'), std::string::npos);

    auto c = base;
    c[5] = "8";
    c.insert(c.end(), {"-o", path("c.csv")});
    ASSERT_EQ(run(c).code, 0);
    EXPECT_NE(csv, slurp(path("c.csv")));
}

TEST_F(CliTest, SimulateSeedFromEnvironment) {
    setenv(cli::kSeedEnv, "7", 1);
    ASSERT_EQ(run({"simulate", scenario("canonical_log.json"), "--paths", "100", "-o", path("env.csv")}).code, 0);
    unsetenv(cli::kSeedEnv);
    ASSERT_EQ(run({"simulate", scenario("canonical_log.json"), "--paths", "100", "--seed", "7", "-o",
                   path("flag.csv")})
                  .code,
              0);
    EXPECT_EQ(slurp(path("env.csv")), slurp(path("flag.csv")));
    setenv(cli::kSeedEnv, "seven", 1);
    EXPECT_EQ(run({"simulate", scenario("canonical_log.json"), "--paths", "10", "-o", "-"}).code, cli::kIoOrParse);
    unsetenv(cli::kSeedEnv);
}

TEST_F(CliTest, SimulateMeanMatchesValue) {
    for (const char* name : {"canonical_log.json", "canonical_power.json", "canonical_exponential.json"}) {
        const auto r = run({"simulate", scenario(name), "--paths", "100000", "--steps-per-year", "12", "--seed", "11",
                            "-o", path("sim.csv"), "--summary", path("sum.json")});
        ASSERT_EQ(r.code, 0) << r.err;
        const auto j = io::json::parse(slurp(path("sum.json")));
        const double mean = j["expected_utility"]["mean"].get<double>();
        const double se = j["expected_utility"]["std_error"].get<double>();
        const double v0 = j["value_at_origin"].get<double>();
        EXPECT_LE(std::abs(mean - v0), 3.0 * se) << name;
        EXPECT_EQ(j["run"]["seed"].get<std::uint64_t>(), 11u);
    }
}

TEST_F(CliTest, SimulateRejectsZeroPathsAndForeignTheta) {
    EXPECT_EQ(run({"simulate", scenario("canonical_log.json"), "--paths", "0", "-o", "-"}).code, cli::kValidation);
    std::ofstream(path("theta.json")) << R"({"version": "1", "segments": [
        {"t_start": 0.0, "t_end": 1.0, "mu": [0.5], "sigma": [[0.3]]}]})";
    EXPECT_EQ(run({"simulate", scenario("canonical_log.json"), "--paths", "10", "--theta", path("theta.json"), "-o",
                   "-"})
                  .code,
              cli::kValidation);
    std::ofstream(path("theta_ok.json")) << R"({"version": "1", "segments": [
        {"t_start": 0.0, "t_end": 1.0, "mu": [0.08], "sigma": [[0.25]]}]})";
    EXPECT_EQ(run({"simulate", scenario("canonical_log.json"), "--paths", "10", "--theta", path("theta_ok.json"),
                   "-o", "-"})
                  .code,
              0);
}

TEST_F(CliTest, VerifyAllSuitesPass) {
    const auto r = run({"verify", scenario("canonical_log.json"), "--suite", "all", "-o", path("v.json"),
                        "--residual-csv", path("res.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = io::json::parse(slurp(path("v.json")));
    EXPECT_TRUE(j["pass"].get<bool>());
    for (const char* s : {"saddle", "hjb", "martingale", "shape"}) EXPECT_TRUE(j["suites"].contains(s)) << s;
    EXPECT_EQ(slurp(path("res.csv")).rfind("t,x,relative_residual\n", 0), 0u);
}

TEST_F(CliTest, VerifyDetectsInjectedCorruption) {
    EXPECT_EQ(run({"verify", scenario("canonical_log.json"), "--suite", "hjb", "-o", "-"}).code, 0);
    EXPECT_EQ(run({"verify", scenario("canonical_log.json"), "--suite", "hjb", "--inject-rate-scale", "1.01", "-o",
                   "-"})
                  .code,
              cli::kVerificationFailed);
    EXPECT_EQ(run({"verify", scenario("canonical_log.json"), "--suite", "bogus", "-o", "-"}).code, cli::kIoOrParse);
}
