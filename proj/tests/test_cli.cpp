#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcmerge/cli.hpp"

namespace {

struct Outcome {
    int code = 0;
    std::string out, err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "dcmerge");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = dcmerge::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

nlohmann::json json_of(const Outcome& o) { return nlohmann::json::parse(o.out); }

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("dcmerge_cli_" + name)).string();
}

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string p = temp_path(name);
    std::ofstream(p) << content;
    return p;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Cli, BoundsCorollary1) {
    const auto o = run({"bounds", "--corollary1", "--sigma", "1", "--rho3", "1", "--n", "100", "--k", "10", "--s", "1"});
    ASSERT_EQ(o.code, 0) << o.err;
    const auto j = json_of(o);
    EXPECT_NEAR(j["bound"].get<double>(), 0.109168, 1e-6);
    EXPECT_EQ(j["condition_holds"], false);
    EXPECT_EQ(j["theorem"], "corollary1");
    EXPECT_EQ(j["threshold"].get<double>(), 0.33);
}

TEST(Cli, BoundsOtherTheorems) {
    auto j = json_of(run({"bounds", "--legacy", "--sigma", "1", "--n-total", "6000", "--k", "100"}));
    EXPECT_NEAR(j["bound"].get<double>(), dcmerge::bound_legacy(1.0, 6000, 100).bound, 0);
    j = json_of(run({"bounds", "--theorem1", "--k", "50", "--sigma", "2", "--g", "0.01", "--s", "1"}));
    EXPECT_EQ(j["bound"].get<double>(),
              dcmerge::bound_theorem1(dcmerge::GroupProfile::uniform(50, 2.0, 0.01), 1.0).bound);
    j = json_of(run({"bounds", "--theorem2", "--sigmas", "1,2,3", "--gs", "0,0.01,0.02", "--s", "0.5", "--c-rho",
                     "0.5"}));
    EXPECT_EQ(j["theorem"], "theorem2");
    j = json_of(run({"bounds", "--theorem5", "--sigmas", "1,2", "--g", "0.01", "--k", "100", "--s", "1", "--c-rho",
                     "0.5"}));
    ASSERT_TRUE(j.is_array());
    EXPECT_EQ(j.size(), 2u);
    j = json_of(run({"bounds", "--delta-squared"}));
    EXPECT_DOUBLE_EQ(j["delta_squared"].get<double>(), std::numbers::pi / 2.0);
    j = json_of(run({"bounds", "--theorem1-exact", "--k", "4", "--sigma", "1", "--g", "0.4", "--s", "1"}));
    EXPECT_TRUE(j["bound"].is_null());  // +inf outside the validity region
    EXPECT_EQ(j["condition_holds"], false);
}

TEST(Cli, BoundsUsageErrors) {
    EXPECT_EQ(run({"bounds", "--sigma", "1"}).code, 2);
    EXPECT_EQ(run({"bounds", "--corollary1", "--legacy", "--sigma", "1"}).code, 2);
    const auto bad = run({"bounds", "--corollary1", "--sigma", "-1", "--rho3", "1", "--n", "10", "--k", "10", "--s", "1"});
    EXPECT_EQ(bad.code, 1);
    EXPECT_NE(bad.err.find("sigma"), std::string::npos);
}

TEST(Cli, EstimateContiguousBlocks) {
    const std::string input = write_temp("one_to_six.txt", "1\n2\n# comment\n3\n\n4\n5\n6\n");
    auto o = run({"estimate", "--input", input, "--k", "3", "--strategy", "median_of_means"});
    ASSERT_EQ(o.code, 0) << o.err;
    EXPECT_EQ(json_of(o)["point"].get<double>(), 3.5);
    // Contiguous blocks {1,2,3,4}, {5,6,7}, {8,9,10}: means 2.5, 6, 9.
    o = run({"estimate", "--values", "1,2,3,4,5,6,7,8,9,10", "--k", "3"});
    EXPECT_EQ(json_of(o)["point"].get<double>(), 6.0);
    o = run({"estimate", "--values", "1,2,3,4,5,6", "--strategy", "sample_mean", "--ci-level", "0.95"});
    const auto j = json_of(o);
    EXPECT_EQ(j["point"].get<double>(), 3.5);
    EXPECT_LT(j["ci_lo"].get<double>(), 3.5);
    std::remove(input.c_str());
}

TEST(Cli, EstimateWithIntervalAndHuber) {
    auto o = run({"estimate", "--values", "1,2,3,4,5,6,7,8,9,10,11,12", "--k", "4", "--ci-level", "0.9"});
    ASSERT_EQ(o.code, 0) << o.err;
    auto j = json_of(o);
    EXPECT_EQ(j["point"].get<double>(), 6.5);
    EXPECT_LT(j["ci_lo"].get<double>(), 6.5);
    EXPECT_GT(j["ci_hi"].get<double>(), 6.5);
    EXPECT_EQ(j["ci_level"].get<double>(), 0.9);
    o = run({"estimate", "--values", "1,2,3,4,5,6,7,8,9,1000", "--k", "5", "--strategy", "huber_merge", "--huber-m",
             "1.5"});
    j = json_of(o);
    EXPECT_EQ(j["huber_m"].get<double>(), 1.5);
    EXPECT_LT(j["point"].get<double>(), 20.0);
}

TEST(Cli, EstimateUQuantileIsSeeded) {
    const std::vector<std::string> args = {"estimate", "--values",  "3,1,4,1,5,9,2,6", "--strategy", "u_quantile",
                                           "--subset-size", "3", "--subsets", "50", "--seed", "7"};
    const auto a = run(args), b = run(args);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(run({"estimate", "--values", "1,2", "--strategy", "u_quantile"}).code, 1);
}

TEST(Cli, EstimateErrors) {
    EXPECT_EQ(run({"estimate", "--k", "3"}).code, 2);
    EXPECT_EQ(run({"estimate", "--values", "1,2", "--k", "3"}).code, 1);
    EXPECT_EQ(run({"estimate", "--values", "1,2", "--strategy", "trimmed"}).code, 2);
    EXPECT_EQ(run({"estimate", "--input", "/nonexistent/values.txt", "--k", "1"}).code, 1);
    const std::string junk = write_temp("junk.txt", "1\nabc\n");
    const auto o = run({"estimate", "--input", junk, "--k", "1"});
    EXPECT_EQ(o.code, 1);
    EXPECT_NE(o.err.find(":2:"), std::string::npos);
    std::remove(junk.c_str());
}

TEST(Cli, UsageAndVersion) {
    const auto v = run({"--version"});
    EXPECT_EQ(v.code, 0);
    EXPECT_NE(v.out.find(dcmerge::version), std::string::npos);
    const auto unknown = run({"estimate", "--values", "1", "--frobnicate"});
    EXPECT_EQ(unknown.code, 2);
    EXPECT_NE((unknown.out + unknown.err).find("--values"), std::string::npos);  // usage text
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"launch"}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, SimulateMissingConfigExitsTwo) {
    const auto o = run({"simulate", "--config", "missing.toml"});
    EXPECT_EQ(o.code, 2);
    EXPECT_NE(o.err.find("missing.toml"), std::string::npos);
    EXPECT_EQ(run({"simulate"}).code, 2);
    const std::string bad = write_temp("bad.toml", "N = 10\nbogus = 1\n");
    EXPECT_EQ(run({"sweep", "--config", bad}).code, 2);
    std::remove(bad.c_str());
}

TEST(Cli, SimulateWritesCsvAndSvg) {
    const std::string cfg = write_temp("small.toml", R"toml(
N = 1000
k_values = [1, 10, 100]
replicates = 40
master_seed = 5
strategies = ["median_of_means", "sample_mean"]
[data]
kind = "lomax"
alpha = 4
lambda = 1
)toml");
    const std::string csv = temp_path("small.csv"), svg = temp_path("small.svg");
    const auto o = run({"sweep", "--config", cfg, "--out-csv", csv, "--out-svg", svg, "--threads", "2"});
    ASSERT_EQ(o.code, 0) << o.err;
    const std::string text = slurp(csv);
    EXPECT_EQ(text.substr(0, text.find('\n')), dcmerge::csv_header);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
    EXPECT_NE(slurp(svg).find("<svg"), std::string::npos);

    const auto piped = run({"simulate", "--config", cfg, "--threads", "1"});
    ASSERT_EQ(piped.code, 0);
    EXPECT_EQ(piped.out, text);

    EXPECT_EQ(run({"coverage", "--config", cfg}).code, 2);  // no ci_level
    EXPECT_EQ(run({"simulate", "--config", cfg, "--out-csv", "/nonexistent/dir/x.csv"}).code, 1);
    for (const auto& p : {cfg, csv, svg}) std::remove(p.c_str());
}

TEST(Cli, CoverageOnShippedConfigShape) {
    const std::string cfg = write_temp("cov.toml", R"toml(
N = 400
k_values = [20]
replicates = 30
strategies = ["sample_mean", "median_of_means"]
ci_level = 0.95
[data]
kind = "half_t"
dof = 3
[contamination.outlier]
kind = "normal"
mean = 0
stddev = 1e5
)toml");
    const auto o = run({"coverage", "--config", cfg});
    ASSERT_EQ(o.code, 0) << o.err;
    EXPECT_EQ(std::count(o.out.begin(), o.out.end(), '\n'), 13);
    std::remove(cfg.c_str());
}
