#ifndef DCMERGE_HARNESS_CONFIG_HPP
#define DCMERGE_HARNESS_CONFIG_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "../distributions.hpp"
#include "toml.hpp"

namespace dcmerge {

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be a table");
    for (const auto& item : obj.items())
        if (!allowed.count(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

inline double number_at(const nlohmann::json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw ConfigError(where + " is missing '" + key + "'");
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ConfigError("'" + key + "' in " + where + " must be a number");
    return v.get<double>();
}

inline std::uint64_t count_at(const nlohmann::json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw ConfigError(where + " is missing '" + key + "'");
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError("'" + key + "' in " + where + " must be a nonnegative integer");
    return v.get<std::uint64_t>();
}

inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace detail

/*
 * DistSpec as a JSON/TOML table:
 *   {kind = "normal", mean, stddev}
 *   {kind = "lomax", alpha, lambda}          shape alpha, scale lambda
 *   {kind = "pareto", alpha, scale = 1}      mean-centered unless centered = false
 *   {kind = "student_t", dof}
 *   {kind = "half_t", dof}
 * Every kind accepts an optional boolean `centered`.
 */
inline DistSpec dist_from_json(const nlohmann::json& j, const std::string& where = "distribution") {
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
        throw ConfigError(where + " needs a string 'kind'");
    const std::string kind = j.at("kind").get<std::string>();
    const bool pareto = kind == "pareto";
    bool centered = pareto;
    if (j.contains("centered")) {
        if (!j.at("centered").is_boolean()) throw ConfigError("'centered' in " + where + " must be a boolean");
        centered = j.at("centered").get<bool>();
    }
    try {
        if (kind == "normal") {
            detail::reject_unknown_keys(j, {"kind", "mean", "stddev", "centered"}, where);
            return DistSpec(Normal{detail::number_at(j, "mean", where), detail::number_at(j, "stddev", where)},
                            centered);
        }
        if (kind == "lomax") {
            detail::reject_unknown_keys(j, {"kind", "alpha", "lambda", "centered"}, where);
            return DistSpec(Lomax{detail::number_at(j, "alpha", where), detail::number_at(j, "lambda", where)},
                            centered);
        }
        if (pareto) {
            detail::reject_unknown_keys(j, {"kind", "alpha", "scale", "centered"}, where);
            const double scale = j.contains("scale") ? detail::number_at(j, "scale", where) : 1.0;
            return DistSpec(Pareto{detail::number_at(j, "alpha", where), scale}, centered);
        }
        if (kind == "student_t" || kind == "half_t") {
            detail::reject_unknown_keys(j, {"kind", "dof", "centered"}, where);
            const double dof = detail::number_at(j, "dof", where);
            return kind == "student_t" ? DistSpec(StudentT{dof}, centered) : DistSpec(HalfT{dof}, centered);
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError("unknown distribution kind '" + kind + "' in " + where);
}

inline nlohmann::json dist_to_json(const DistSpec& d) {
    nlohmann::json j;
    j["kind"] = d.kind_name();
    std::visit(
        [&](const auto& law) {
            using D = std::decay_t<decltype(law)>;
            if constexpr (std::is_same_v<D, Normal>) {
                j["mean"] = law.mean;
                j["stddev"] = law.stddev;
            } else if constexpr (std::is_same_v<D, Lomax>) {
                j["alpha"] = law.shape;
                j["lambda"] = law.scale;
            } else if constexpr (std::is_same_v<D, Pareto>) {
                j["alpha"] = law.shape;
                j["scale"] = law.scale;
            } else {
                j["dof"] = law.dof;
            }
        },
        d.law());
    j["centered"] = d.centered();
    return j;
}

/// One merging strategy of the harness.
struct Strategy {
    enum class Kind { SampleMean, MedianOfMeans, HuberMerge, CoordinatewiseMedian, GeometricMedian, UQuantile };
    Kind kind = Kind::MedianOfMeans;
    /// HuberMerge: threshold in MAD-standardized units; mad_auto selects M = 1.
    double huber_m = 0.0;
    bool mad_auto = false;
    /// UQuantile: subset size and number of subsets.
    std::size_t subset_size = 0;
    std::size_t subsets = 0;

    std::string name() const {
        switch (kind) {
            case Kind::SampleMean: return "sample_mean";
            case Kind::MedianOfMeans: return "median_of_means";
            case Kind::HuberMerge:
                return mad_auto ? "huber_merge(mad-auto)" : "huber_merge(" + detail::format_number(huber_m) + ")";
            case Kind::CoordinatewiseMedian: return "coordinatewise_median";
            case Kind::GeometricMedian: return "geometric_median";
            case Kind::UQuantile:
                return "u_quantile(" + std::to_string(subset_size) + "," + std::to_string(subsets) + ")";
        }
        return "";
    }

    /// Threshold used on MAD-standardized local estimates.
    double effective_huber_m() const { return mad_auto ? 1.0 : huber_m; }

    bool depends_on_k() const { return kind != Kind::SampleMean && kind != Kind::UQuantile; }
};

namespace detail {

inline std::string strip_spaces(const std::string& s) {
    std::string out;
    for (char c : s)
        if (c != ' ' && c != '\t') out += c;
    return out;
}

inline std::vector<std::string> split_args(const std::string& inner) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : inner) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::size_t parse_positive_count(const std::string& s, const std::string& what) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
        throw ConfigError(what + " must be a positive integer, got '" + s + "'");
    const unsigned long long v = std::stoull(s);
    if (v == 0) throw ConfigError(what + " must be positive");
    return static_cast<std::size_t>(v);
}

}  // namespace detail

/// Parses "sample_mean", "median_of_means", "huber_merge(3)", "huber_merge(mad-auto)",
/// "coordinatewise_median", "geometric_median" or "u_quantile(n, l)".
inline Strategy parse_strategy(const std::string& text) {
    const std::string s = detail::strip_spaces(text);
    Strategy st;
    if (s == "sample_mean") st.kind = Strategy::Kind::SampleMean;
    else if (s == "median_of_means") st.kind = Strategy::Kind::MedianOfMeans;
    else if (s == "coordinatewise_median") st.kind = Strategy::Kind::CoordinatewiseMedian;
    else if (s == "geometric_median") st.kind = Strategy::Kind::GeometricMedian;
    else {
        const auto open = s.find('(');
        if (open == std::string::npos || s.back() != ')') throw ConfigError("unknown strategy '" + text + "'");
        const std::string head = s.substr(0, open);
        const auto args = detail::split_args(s.substr(open + 1, s.size() - open - 2));
        if (head == "huber_merge" && args.size() == 1) {
            st.kind = Strategy::Kind::HuberMerge;
            if (args[0] == "mad-auto") {
                st.mad_auto = true;
            } else {
                char* end = nullptr;
                st.huber_m = std::strtod(args[0].c_str(), &end);
                if (args[0].empty() || end != args[0].c_str() + args[0].size() || !(st.huber_m > 0.0) ||
                    !std::isfinite(st.huber_m))
                    throw ConfigError("huber_merge threshold must be a positive number or mad-auto");
            }
        } else if (head == "u_quantile" && args.size() == 2) {
            st.kind = Strategy::Kind::UQuantile;
            st.subset_size = detail::parse_positive_count(args[0], "u_quantile subset size");
            st.subsets = detail::parse_positive_count(args[1], "u_quantile subset count");
        } else {
            throw ConfigError("unknown strategy '" + text + "'");
        }
    }
    return st;
}

/// Outlier law and the list of contamination counts to sweep.
struct ContaminationSchedule {
    DistSpec outlier = DistSpec::normal(0.0, 1e5);
    std::vector<std::size_t> counts{0};
    /// False when the config had no [contamination] table.
    bool explicit_schedule = false;
};

/// {0, 0.2 sqrt(N), 0.4 sqrt(N), ..., sqrt(N)}, rounded to the nearest integer.
inline std::vector<std::size_t> sqrt_fifths_schedule(std::size_t n_total) {
    std::vector<std::size_t> out;
    const double root = std::sqrt(static_cast<double>(n_total));
    for (int i = 0; i <= 5; ++i) out.push_back(static_cast<std::size_t>(std::llround(0.2 * i * root)));
    return out;
}

enum class MeanCiScale { Sample, Population };

struct ExperimentConfig {
    DistSpec data = DistSpec::normal(0.0, 1.0);
    std::size_t dimension = 1;
    std::size_t n_total = 0;
    std::vector<std::size_t> k_values;
    std::size_t replicates = 1;
    std::vector<Strategy> strategies;
    ContaminationSchedule contamination;
    std::optional<double> s_for_bounds;
    std::uint64_t master_seed = 0;
    std::vector<double> ci_levels;
    MeanCiScale mean_ci_scale = MeanCiScale::Sample;

    /// s used for the bound overlay: ln(8)/2 unless configured, so that 4 e^{-2s} = 1/2.
    double bound_s() const { return s_for_bounds ? *s_for_bounds : 0.5 * std::log(8.0); }

    void validate() const {
        if (n_total == 0) throw ConfigError("N must be at least 1");
        if (dimension == 0 || dimension > 64) throw ConfigError("dimension must lie in 1..64");
        if (replicates == 0) throw ConfigError("replicates must be at least 1");
        if (k_values.empty()) throw ConfigError("at least one k is required");
        for (std::size_t k : k_values)
            if (k == 0 || k > n_total) throw ConfigError("every k must satisfy 1 <= k <= N");
        if (strategies.empty()) throw ConfigError("at least one strategy is required");
        for (const auto& s : strategies) {
            if (s.kind == Strategy::Kind::UQuantile && s.subset_size > n_total)
                throw ConfigError("u_quantile subset size exceeds N");
            if (s.kind == Strategy::Kind::UQuantile && dimension > 1)
                throw ConfigError("u_quantile needs scalar data (dimension = 1)");
        }
        if (!ci_levels.empty() && dimension > 1) throw ConfigError("ci_level needs scalar data (dimension = 1)");
        for (std::size_t c : contamination.counts)
            if (c > n_total) throw ConfigError("contamination count exceeds N");
        for (double l : ci_levels)
            if (!(l > 0.0 && l < 1.0)) throw ConfigError("ci_level must lie in (0, 1)");
        if (s_for_bounds && !(*s_for_bounds > 0.0)) throw ConfigError("s_for_bounds must be positive");
        if (!true_moments(data).mean) throw ConfigError("data distribution has no finite mean to measure errors against");
        if (!ci_levels.empty() && mean_ci_scale == MeanCiScale::Population && !true_moments(data).variance)
            throw ConfigError("mean_ci_scale = \"population\" needs a finite variance");
    }
};

/*
 * Config schema (all keys other than those listed are rejected):
 *   N, replicates, master_seed          integers
 *   k_values = [..] | log_k_grid = [..]  explicit k, or exponents x with k = round(N^x)
 *   strategies = ["median_of_means", ..]
 *   dimension = 1, s_for_bounds, ci_level (number or array), mean_ci_scale = "sample" | "population"
 *   [data]                                DistSpec table
 *   [contamination]                       counts = [..] or schedule = "sqrt_fifths"
 *   [contamination.outlier]               DistSpec table, default normal(0, 1e5)
 */
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(j,
                                {"N", "replicates", "master_seed", "k_values", "log_k_grid", "strategies", "dimension",
                                 "s_for_bounds", "ci_level", "mean_ci_scale", "data", "contamination"},
                                "config");
    ExperimentConfig cfg;
    cfg.n_total = detail::count_at(j, "N", "config");
    cfg.replicates = detail::count_at(j, "replicates", "config");
    cfg.master_seed = j.contains("master_seed") ? detail::count_at(j, "master_seed", "config") : 0;
    if (j.contains("dimension")) cfg.dimension = detail::count_at(j, "dimension", "config");
    if (!j.contains("data")) throw ConfigError("config is missing the [data] table");
    cfg.data = dist_from_json(j.at("data"), "[data]");

    if (j.contains("k_values") == j.contains("log_k_grid"))
        throw ConfigError("config needs exactly one of k_values and log_k_grid");
    if (j.contains("k_values")) {
        if (!j.at("k_values").is_array()) throw ConfigError("k_values must be an array");
        for (const auto& v : j.at("k_values")) {
            if (!v.is_number_integer() || v.get<long long>() <= 0)
                throw ConfigError("k_values entries must be positive integers");
            cfg.k_values.push_back(v.get<std::size_t>());
        }
    } else {
        if (!j.at("log_k_grid").is_array()) throw ConfigError("log_k_grid must be an array");
        for (const auto& v : j.at("log_k_grid")) {
            if (!v.is_number()) throw ConfigError("log_k_grid entries must be numbers");
            const double x = v.get<double>();
            if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("log_k_grid entries must lie in [0, 1]");
            cfg.k_values.push_back(static_cast<std::size_t>(
                std::max(1LL, std::llround(std::pow(static_cast<double>(cfg.n_total), x)))));
        }
    }
    std::sort(cfg.k_values.begin(), cfg.k_values.end());
    cfg.k_values.erase(std::unique(cfg.k_values.begin(), cfg.k_values.end()), cfg.k_values.end());

    if (!j.contains("strategies") || !j.at("strategies").is_array())
        throw ConfigError("config needs a 'strategies' array");
    for (const auto& v : j.at("strategies")) {
        if (!v.is_string()) throw ConfigError("strategies must be strings");
        cfg.strategies.push_back(parse_strategy(v.get<std::string>()));
    }
    std::sort(cfg.strategies.begin(), cfg.strategies.end(),
              [](const Strategy& a, const Strategy& b) { return a.name() < b.name(); });
    for (std::size_t i = 1; i < cfg.strategies.size(); ++i)
        if (cfg.strategies[i].name() == cfg.strategies[i - 1].name())
            throw ConfigError("strategy '" + cfg.strategies[i].name() + "' listed twice");

    if (j.contains("s_for_bounds")) cfg.s_for_bounds = detail::number_at(j, "s_for_bounds", "config");
    if (j.contains("ci_level")) {
        const auto& v = j.at("ci_level");
        if (v.is_number()) cfg.ci_levels.push_back(v.get<double>());
        else if (v.is_array())
            for (const auto& l : v) {
                if (!l.is_number()) throw ConfigError("ci_level entries must be numbers");
                cfg.ci_levels.push_back(l.get<double>());
            }
        else throw ConfigError("ci_level must be a number or an array");
    }
    if (j.contains("mean_ci_scale")) {
        const auto& v = j.at("mean_ci_scale");
        if (v == "sample") cfg.mean_ci_scale = MeanCiScale::Sample;
        else if (v == "population") cfg.mean_ci_scale = MeanCiScale::Population;
        else throw ConfigError("mean_ci_scale must be \"sample\" or \"population\"");
    }
    if (j.contains("contamination")) {
        const auto& c = j.at("contamination");
        cfg.contamination.explicit_schedule = true;
        detail::reject_unknown_keys(c, {"outlier", "counts", "schedule"}, "[contamination]");
        if (c.contains("outlier")) cfg.contamination.outlier = dist_from_json(c.at("outlier"), "[contamination.outlier]");
        if (c.contains("counts") && c.contains("schedule"))
            throw ConfigError("[contamination] takes counts or schedule, not both");
        if (c.contains("counts")) {
            if (!c.at("counts").is_array()) throw ConfigError("contamination counts must be an array");
            cfg.contamination.counts.clear();
            for (const auto& v : c.at("counts")) {
                if (!v.is_number_integer() || v.get<long long>() < 0)
                    throw ConfigError("contamination counts must be nonnegative integers");
                cfg.contamination.counts.push_back(v.get<std::size_t>());
            }
        } else {
            if (c.contains("schedule") && c.at("schedule") != "sqrt_fifths")
                throw ConfigError("unknown contamination schedule; the only schedule is \"sqrt_fifths\"");
            cfg.contamination.counts = sqrt_fifths_schedule(cfg.n_total);
        }
        std::sort(cfg.contamination.counts.begin(), cfg.contamination.counts.end());
        cfg.contamination.counts.erase(std::unique(cfg.contamination.counts.begin(), cfg.contamination.counts.end()),
                                       cfg.contamination.counts.end());
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) { return config_from_json(parse_toml_file(path)); }

}  // namespace dcmerge

#endif  // DCMERGE_HARNESS_CONFIG_HPP
