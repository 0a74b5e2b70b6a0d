#ifndef DCMERGE_CLI_HPP
#define DCMERGE_CLI_HPP

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bounds.hpp"
#include "harness/config.hpp"
#include "harness/emit.hpp"
#include "harness/experiment.hpp"
#include "loss.hpp"
#include "merge_univariate.hpp"
#include "partition.hpp"

namespace dcmerge {

inline constexpr const char* version = "0.1.0";

namespace cli {

using Json = nlohmann::ordered_json;

/// Non-finite numbers are rendered as null; JSON has no infinity.
inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline std::vector<double> read_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input file '" + path + "'");
    std::vector<double> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        const std::string tok = line.substr(b, e - b + 1);
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size() || !std::isfinite(v))
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": not a finite number: '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

inline Json report_json(const BoundReport& r) {
    Json j;
    j["theorem"] = r.theorem;
    j["bound"] = number(r.bound);
    j["failure_probability"] = number(r.failure_probability);
    j["condition_holds"] = r.condition_holds;
    j["condition_value"] = number(r.condition_value);
    j["threshold"] = number(r.threshold);
    return j;
}

struct EstimateArgs {
    std::string input;
    std::vector<double> values;
    std::size_t k = 0;
    std::string strategy = "median_of_means";
    std::optional<double> huber_m;
    std::optional<double> ci_level;
    std::uint64_t seed = 0;
    std::size_t subset_size = 0;
    std::size_t subsets = 0;
};

inline Json run_estimate(const EstimateArgs& a) {
    const std::vector<double> x = a.input.empty() ? a.values : read_values(a.input);
    if (x.empty()) throw std::invalid_argument("no input values");
    Json j;
    j["strategy"] = a.strategy;
    j["n"] = x.size();

    if (a.strategy == "sample_mean") {
        const double mean = mean_of(x);
        j["point"] = mean;
        if (a.ci_level) {
            if (x.size() < 2) throw std::invalid_argument("sample-mean interval needs at least two values");
            double ss = 0.0;
            for (double v : x) ss += (v - mean) * (v - mean);
            const double half = normal_two_sided_z(*a.ci_level) * std::sqrt(ss / static_cast<double>(x.size() - 1)) /
                                std::sqrt(static_cast<double>(x.size()));
            j["ci_lo"] = mean - half;
            j["ci_hi"] = mean + half;
            j["ci_level"] = *a.ci_level;
        }
        return j;
    }
    if (a.strategy == "u_quantile") {
        if (a.subset_size == 0 || a.subsets == 0)
            throw std::invalid_argument("u_quantile needs --subset-size and --subsets");
        Stream stream(a.seed, {"estimate", "uq"});
        const auto rep = u_quantile_median(x, a.subset_size, a.subsets, LocalEstimator::Mean, stream);
        j["point"] = rep.point;
        j["subset_size"] = a.subset_size;
        j["subsets"] = a.subsets;
        j["seed"] = a.seed;
        return j;
    }

    if (a.k == 0) throw std::invalid_argument("--k is required for " + a.strategy);
    const LocalEstimates e = local_means(x, partition_contiguous(x.size(), a.k));
    j["k"] = a.k;
    EstimateReport rep;
    if (a.strategy == "median_of_means") {
        rep = a.ci_level ? confidence_interval(e, LossSpec::absolute_value(), *a.ci_level) : merge_median(e);
    } else if (a.strategy == "huber_merge") {
        const double m = a.huber_m.value_or(1.0);
        j["huber_m"] = m;
        if (a.ci_level) {
            rep = confidence_interval(e, LossSpec::huber(m), *a.ci_level);
        } else {
            rep.point = detail::huber_point(e, m);
            if (e.k() >= 2) rep.scale_hat = mad_scale(e);
        }
    } else {
        throw std::invalid_argument("unknown strategy '" + a.strategy + "'");
    }
    j["point"] = rep.point;
    if (rep.scale_hat) j["scale_hat"] = *rep.scale_hat;
    if (rep.ci) {
        j["ci_lo"] = rep.ci->lo;
        j["ci_hi"] = rep.ci->hi;
        j["ci_level"] = rep.ci->level;
        j["ci_degenerate"] = rep.ci->degenerate;
    }
    if (rep.solver.iterations > 0) j["solver_iterations"] = rep.solver.iterations;
    return j;
}

struct BoundsArgs {
    std::string theorem;
    double sigma = 0.0, rho3 = 0.0, rho = 0.0, delta = 1.0, s = 0.0, g = 0.0, c_rho = 0.0, sigma_n = 0.0;
    double g_s = 0.0, inv_sqrt_norm = 0.0, sqrt_cov_norm = 0.0, cond = 0.0, third_moment = 0.0;
    std::optional<double> c1, c2;
    std::size_t n = 0, k = 0, n_total = 0, m = 0, d = 0;
    std::vector<double> sigmas, gs, c_rhos;
    bool displayed_c1 = false;
    std::string loss = "absolute";
    double huber_m = 1.0;
};

inline GroupProfile profile_from(const BoundsArgs& a) {
    if (!a.sigmas.empty()) {
        GroupProfile p{a.sigmas, a.gs.empty() ? std::vector<double>(a.sigmas.size(), a.g) : a.gs};
        return p;
    }
    if (a.k == 0) throw std::invalid_argument("give --sigmas or --k with --sigma");
    return GroupProfile::uniform(a.k, a.sigma, a.g);
}

inline Json run_bounds(const BoundsArgs& a) {
    const std::string& t = a.theorem;
    if (t == "legacy") return report_json(bound_legacy(a.sigma, a.n_total, a.k));
    if (t == "theorem1") return report_json(bound_theorem1(profile_from(a), a.s));
    if (t == "theorem1_exact") return report_json(bound_theorem1_exact(profile_from(a), a.s));
    if (t == "corollary1") return report_json(bound_corollary1(a.sigma, a.rho3, a.n, a.k, a.s));
    if (t == "corollary2")
        return report_json(bound_corollary2(a.sigma, a.rho, a.delta, a.n, a.k, a.s,
                                            a.c1.value_or(constants::median_condition), a.c2.value_or(3.0)));
    if (t == "theorem2") return report_json(bound_theorem2(profile_from(a), a.s, a.c_rho));
    if (t == "theorem4") return report_json(bound_theorem4(a.sigma_n, a.g, a.k, a.s));
    if (t == "u_quantile_m") return report_json(bound_u_quantile_m(a.sigma_n, a.g, a.k, a.s, a.c_rho));
    if (t == "theorem5") {
        if (a.sigmas.empty()) throw std::invalid_argument("theorem5 needs --sigmas");
        const std::vector<double> c = a.c_rhos.empty() ? std::vector<double>(a.sigmas.size(), a.c_rho) : a.c_rhos;
        Json arr = Json::array();
        for (const auto& r : bound_theorem5(a.sigmas, a.g, a.k, a.s, c)) arr.push_back(report_json(r));
        return arr;
    }
    if (t == "theorem7") return report_json(bound_theorem7(a.m, a.k, a.s, a.g_s, a.inv_sqrt_norm, a.displayed_c1));
    if (t == "corollary5")
        return report_json(bound_corollary5(a.sqrt_cov_norm, a.cond, a.third_moment, a.d, a.n, a.k, a.s));
    if (t == "delta_squared") {
        const LossSpec loss = a.loss == "huber" ? LossSpec::huber(a.huber_m) : LossSpec::absolute_value();
        Json j;
        j["loss"] = loss.name();
        j["delta_squared"] = delta_squared(loss);
        return j;
    }
    throw std::invalid_argument("select a bound, e.g. --corollary1");
}

struct RunArgs {
    std::string config;
    std::string out_csv;
    std::string out_svg;
    unsigned threads = 0;
};

inline void emit_outputs(const ResultTable& table, const RunArgs& a, const PlotSpec& plot, std::ostream& out,
                         std::ostream& err) {
    for (const auto& w : table.warnings) err << "warning: " << w << "\n";
    if (a.out_csv.empty()) out << render_csv(table);
    else emit_csv(table, a.out_csv);
    if (!a.out_svg.empty()) emit_svg(table, plot, a.out_svg);
}

}  // namespace cli

/*
 * Command-line entry point. Exit codes: 0 success, 1 runtime failure,
 * 2 usage or configuration error.
 *
 * `estimate` splits the input into contiguous blocks (first N/k values form
 * group 1, and so on), so the same command always gives the same answer;
 * the simulation subcommands use seeded random partitions.
 */
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Divide-and-conquer robust mean estimation: merges, bounds and Monte Carlo experiments", "dcmerge"};
    app.set_version_flag("--version", std::string(version));
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    cli::EstimateArgs ea;
    auto* est = app.add_subcommand("estimate", "Merge local means of a sample read from a file or the command line");
    auto* in_opt = est->add_option("--input", ea.input, "Newline-delimited numeric file");
    auto* val_opt = est->add_option("--values", ea.values, "Inline values, comma separated")->delimiter(',');
    in_opt->excludes(val_opt);
    est->add_option("--k", ea.k, "Number of contiguous blocks");
    est->add_option("--strategy", ea.strategy, "sample_mean | median_of_means | huber_merge | u_quantile")
        ->check(CLI::IsMember({"sample_mean", "median_of_means", "huber_merge", "u_quantile"}));
    est->add_option("--huber-m", ea.huber_m, "Huber threshold in MAD units (default 1)");
    est->add_option("--ci-level", ea.ci_level, "Nominal level of the confidence interval")->check(CLI::Range(0.0, 1.0));
    est->add_option("--seed", ea.seed, "Seed for u_quantile subsets");
    est->add_option("--subset-size", ea.subset_size, "u_quantile subset size n");
    est->add_option("--subsets", ea.subsets, "u_quantile number of subsets");

    cli::BoundsArgs ba;
    auto* bnd = app.add_subcommand("bounds", "Evaluate a deviation bound");
    auto* group = bnd->add_option_group("bound", "Which bound to evaluate");
    const std::vector<std::pair<std::string, std::string>> flags = {
        {"--legacy", "legacy"},         {"--theorem1", "theorem1"},     {"--theorem1-exact", "theorem1_exact"},
        {"--corollary1", "corollary1"}, {"--corollary2", "corollary2"}, {"--theorem2", "theorem2"},
        {"--theorem4", "theorem4"},     {"--u-quantile-m", "u_quantile_m"}, {"--theorem5", "theorem5"},
        {"--theorem7", "theorem7"},     {"--corollary5", "corollary5"}, {"--delta-squared", "delta_squared"}};
    for (const auto& [flag, name] : flags) {
        const std::string id = name;
        group->add_flag_callback(flag, [&ba, id] { ba.theorem = id; });
    }
    group->require_option(1);
    bnd->add_option("--sigma", ba.sigma, "Common group normalizer / standard deviation");
    bnd->add_option("--sigmas", ba.sigmas, "Per-group (or per-coordinate) normalizers")->delimiter(',');
    bnd->add_option("--g", ba.g, "Normal-approximation error g (or g_m)");
    bnd->add_option("--gs", ba.gs, "Per-group normal-approximation errors")->delimiter(',');
    bnd->add_option("--rho3", ba.rho3, "Third absolute central moment");
    bnd->add_option("--rho", ba.rho, "(2+delta)-th absolute central moment");
    bnd->add_option("--delta", ba.delta, "Moment excess delta in (0, 1]");
    bnd->add_option("--c1", ba.c1, "Corollary 2 condition constant");
    bnd->add_option("--c2", ba.c2, "Corollary 2 bound constant");
    bnd->add_option("--n", ba.n, "Group size n");
    bnd->add_option("--k", ba.k, "Number of groups");
    bnd->add_option("--n-total", ba.n_total, "Total sample size N");
    bnd->add_option("--s", ba.s, "Confidence parameter s");
    bnd->add_option("--c-rho", ba.c_rho, "Loss constant C_rho");
    bnd->add_option("--c-rhos", ba.c_rhos, "Per-coordinate C_rho")->delimiter(',');
    bnd->add_option("--sigma-n", ba.sigma_n, "Subset-estimator normalizer sigma_n");
    bnd->add_option("--m", ba.m, "Dimension m");
    bnd->add_option("--g-s", ba.g_s, "Multivariate normal-approximation error g_S");
    bnd->add_option("--inv-sqrt-norm", ba.inv_sqrt_norm, "||Sigma^{-1/2}||");
    bnd->add_flag("--displayed-c1", ba.displayed_c1, "Use the displayed C1 constant instead of the derived one");
    bnd->add_option("--sqrt-cov-norm", ba.sqrt_cov_norm, "||Sigma^{1/2}||");
    bnd->add_option("--cond", ba.cond, "Condition number of Sigma^{1/2}");
    bnd->add_option("--third-moment", ba.third_moment, "E||Sigma^{-1/2}(X - mu)||^3");
    bnd->add_option("--d", ba.d, "Dimension d");
    bnd->add_option("--loss", ba.loss, "absolute | huber (for --delta-squared)")
        ->check(CLI::IsMember({"absolute", "huber"}));
    bnd->add_option("--huber-m", ba.huber_m, "Huber threshold M");

    cli::RunArgs ra;
    auto add_run = [&](const char* name, const char* help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", ra.config, "Experiment config (TOML)")->required();
        sub->add_option("--out-csv", ra.out_csv, "CSV output path (default: standard output)");
        sub->add_option("--out-svg", ra.out_svg, "SVG plot output path");
        sub->add_option("--threads", ra.threads, "Worker threads (0 = all cores)");
        return sub;
    };
    auto* sim = add_run("simulate", "Run the experiment grid of a config");
    auto* swp = add_run("sweep", "Median error over the k grid with the Corollary 1 overlay");
    auto* cov = add_run("coverage", "Confidence-interval coverage under contamination");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 2;
    }

    try {
        if (est->parsed()) {
            if (ea.input.empty() && ea.values.empty()) {
                err << "estimate: give --input or --values\n";
                return 2;
            }
            out << cli::run_estimate(ea).dump() << "\n";
        } else if (bnd->parsed()) {
            out << cli::run_bounds(ba).dump() << "\n";
        } else {
            const ExperimentConfig cfg = load_config(ra.config);
            const RunOptions opts{ra.threads};
            PlotSpec plot;
            ResultTable table;
            if (sim->parsed()) {
                plot.logx = plot.logy = true;
                table = run_experiment(cfg, opts);
            } else if (swp->parsed()) {
                plot.logx = plot.logy = true;
                plot.overlay_bound = true;
                table = sweep_k(cfg, opts);
            } else if (cov->parsed()) {
                plot.x = "contamination";
                plot.y = "coverage";
                table = coverage_table(cfg, opts);
            }
            cli::emit_outputs(table, ra, plot, out, err);
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace dcmerge

#endif  // DCMERGE_CLI_HPP
