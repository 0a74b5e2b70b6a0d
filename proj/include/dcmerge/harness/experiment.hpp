#ifndef DCMERGE_HARNESS_EXPERIMENT_HPP
#define DCMERGE_HARNESS_EXPERIMENT_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <vector>

#include "../bounds.hpp"
#include "../distributions.hpp"
#include "../merge_multivariate.hpp"
#include "../merge_univariate.hpp"
#include "../partition.hpp"
#include "../rng.hpp"
#include "config.hpp"

namespace dcmerge {

struct ResultRow {
    std::size_t k = 0;
    std::string strategy;
    std::size_t contamination = 0;
    double median_abs_error = 0.0;
    double mean_abs_error = 0.0;
    std::optional<double> coverage;
    std::optional<double> bound;
    std::optional<bool> condition_holds;
};

struct ResultTable {
    std::vector<ResultRow> rows;
    std::vector<std::string> warnings;

    /// Sorts by k, then strategy label, then contamination count.
    void sort_rows() {
        std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
            return std::tie(a.k, a.strategy, a.contamination) < std::tie(b.k, b.strategy, b.contamination);
        });
    }
};

struct RunOptions {
    /// Worker threads; 0 picks std::thread::hardware_concurrency().
    unsigned threads = 0;
};

namespace detail {

/// Huber merge on MAD-standardized local estimates; falls back to the median when the MAD vanishes.
inline double huber_point(const LocalEstimates& e, double m) {
    if (e.k() < 2) return e.values.front();
    const double scale = mad_scale(e);
    if (scale == 0.0) return median_of(e.values);
    return merge_m_estimator(e, LossSpec::huber(m), scale).point;
}

inline bool strategy_has_interval(const Strategy& s, std::size_t k, std::size_t n_total, MeanCiScale mode) {
    switch (s.kind) {
        case Strategy::Kind::SampleMean: return mode == MeanCiScale::Population || n_total >= 2;
        case Strategy::Kind::MedianOfMeans:
        case Strategy::Kind::HuberMerge: return k >= 2;
        default: return false;
    }
}

inline std::string strategy_label(const Strategy& s, const std::vector<double>& levels, std::size_t li) {
    if (levels.size() <= 1) return s.name();
    return s.name() + "@" + format_number(levels[li]);
}

/// Replaces c whole rows (all m coordinates) of the N x m row-major sample by outlier draws.
inline std::vector<double> contaminate_rows(const std::vector<double>& x, std::size_t m, std::size_t c,
                                            const DistSpec& outlier, Stream& stream) {
    if (m == 1) return contaminate(x, ContaminationSpec{outlier, c}, stream);
    std::vector<double> out = x;
    const std::size_t n = x.size() / m;
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < c; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(stream.below(n - i));
        std::swap(idx[i], idx[j]);
        for (std::size_t d = 0; d < m; ++d) out[idx[i] * m + d] = draw(outlier, stream);
    }
    return out;
}

/// k x m matrix of group means; rows of each group are summed in increasing index order.
inline PointCloud group_means(const std::vector<double>& x, std::size_t m, const std::vector<std::uint32_t>& labels,
                              std::size_t k, std::vector<std::size_t>& sizes) {
    std::vector<double> sums(k * m, 0.0);
    sizes.assign(k, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const std::size_t g = labels[i];
        ++sizes[g];
        for (std::size_t d = 0; d < m; ++d) sums[g * m + d] += x[i * m + d];
    }
    for (std::size_t g = 0; g < k; ++g)
        for (std::size_t d = 0; d < m; ++d) sums[g * m + d] /= static_cast<double>(sizes[g]);
    return PointCloud(k, m, std::move(sums));
}

inline std::vector<double> column_means(const std::vector<double>& x, std::size_t m) {
    const std::size_t n = x.size() / m;
    std::vector<double> s(m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < m; ++d) s[d] += x[i * m + d];
    for (double& v : s) v /= static_cast<double>(n);
    return s;
}

inline double error_norm(const std::vector<double>& est, double truth) {
    double s = 0.0;
    for (double v : est) s += (v - truth) * (v - truth);
    return std::sqrt(s);
}

/*
 * Per-replicate outcome store. Index layout: cell = ((ki * S + si) * C + ci),
 * error[cell * R + r] and covered[(cell * L + li) * R + r].
 */
struct ReplicateStore {
    std::size_t n_k, n_s, n_c, n_l, reps;
    std::vector<double> error;
    std::vector<char> covered;

    ReplicateStore(std::size_t nk, std::size_t ns, std::size_t nc, std::size_t nl, std::size_t r)
        : n_k(nk), n_s(ns), n_c(nc), n_l(nl), reps(r), error(nk * ns * nc * r, 0.0), covered(nk * ns * nc * nl * r, 0) {}

    std::size_t cell(std::size_t ki, std::size_t si, std::size_t ci) const { return (ki * n_s + si) * n_c + ci; }
    double& err(std::size_t ki, std::size_t si, std::size_t ci, std::size_t r) { return error[cell(ki, si, ci) * reps + r]; }
    char& cov(std::size_t ki, std::size_t si, std::size_t ci, std::size_t li, std::size_t r) {
        return covered[(cell(ki, si, ci) * n_l + li) * reps + r];
    }
};

class ExperimentRunner {
public:
    explicit ExperimentRunner(const ExperimentConfig& cfg)
        : cfg_(cfg), moments_(true_moments(cfg.data)), truth_(*moments_.mean),
          store_(cfg.k_values.size(), cfg.strategies.size(), cfg.contamination.counts.size(),
                 std::max<std::size_t>(1, cfg.ci_levels.size()), cfg.replicates) {
        for (double l : cfg.ci_levels) z_.push_back(normal_two_sided_z(l));
        if (cfg.mean_ci_scale == MeanCiScale::Population && moments_.variance)
            population_sd_ = std::sqrt(*moments_.variance);
    }

    void run(unsigned threads) {
        if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
        threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg_.replicates));
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto worker = [&] {
            for (;;) {
                const std::size_t r = next.fetch_add(1);
                if (r >= cfg_.replicates) return;
                try {
                    replicate(r);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next.store(cfg_.replicates);
                    return;
                }
            }
        };
        if (threads <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
        if (failure) std::rethrow_exception(failure);
    }

    ResultTable aggregate() {
        ResultTable table;
        const bool mom_listed = std::any_of(cfg_.strategies.begin(), cfg_.strategies.end(), [](const Strategy& s) {
            return s.kind == Strategy::Kind::MedianOfMeans;
        });
        const bool overlay =
            cfg_.dimension == 1 && moments_.variance && moments_.abs_central && *moments_.variance > 0.0;
        if (mom_listed && cfg_.dimension == 1 && !overlay)
            table.warnings.push_back("data distribution has no finite third absolute moment; Corollary 1 bound overlay omitted");

        const std::size_t n_levels = cfg_.ci_levels.size();
        for (std::size_t ki = 0; ki < cfg_.k_values.size(); ++ki) {
            const std::size_t k = cfg_.k_values[ki];
            for (std::size_t si = 0; si < cfg_.strategies.size(); ++si) {
                const Strategy& st = cfg_.strategies[si];
                const bool has_ci = n_levels > 0 && strategy_has_interval(st, k, cfg_.n_total, cfg_.mean_ci_scale);
                for (std::size_t ci = 0; ci < cfg_.contamination.counts.size(); ++ci) {
                    const double* begin = &store_.err(ki, si, ci, 0);
                    std::vector<double> errs(begin, begin + cfg_.replicates);
                    double sum = 0.0;
                    for (double e : errs) sum += e;
                    ResultRow base;
                    base.k = k;
                    base.contamination = cfg_.contamination.counts[ci];
                    base.median_abs_error = median_of(errs);
                    base.mean_abs_error = sum / static_cast<double>(cfg_.replicates);
                    if (overlay && st.kind == Strategy::Kind::MedianOfMeans && base.contamination == 0) {
                        const auto rep = bound_corollary1(std::sqrt(*moments_.variance), *moments_.abs_central,
                                                          cfg_.n_total / k, k, cfg_.bound_s());
                        base.bound = rep.bound;
                        base.condition_holds = rep.condition_holds;
                    }
                    for (std::size_t li = 0; li < std::max<std::size_t>(1, n_levels); ++li) {
                        ResultRow row = base;
                        row.strategy = strategy_label(st, cfg_.ci_levels, li);
                        if (has_ci) {
                            std::size_t hits = 0;
                            for (std::size_t r = 0; r < cfg_.replicates; ++r) hits += store_.cov(ki, si, ci, li, r) != 0;
                            row.coverage = static_cast<double>(hits) / static_cast<double>(cfg_.replicates);
                        }
                        table.rows.push_back(std::move(row));
                    }
                }
            }
        }
        table.sort_rows();
        return table;
    }

private:
    void replicate(std::size_t r) {
        const std::size_t m = cfg_.dimension;
        const std::uint64_t seed = cfg_.master_seed;
        Stream data_stream(seed, {r, "data"});
        const std::vector<double> clean = sample(cfg_.data, cfg_.n_total * m, data_stream);

        std::vector<std::vector<double>> samples;
        samples.reserve(cfg_.contamination.counts.size());
        for (std::size_t c : cfg_.contamination.counts) {
            Stream cs(seed, {r, "contam", c});
            samples.push_back(contaminate_rows(clean, m, c, cfg_.contamination.outlier, cs));
        }

        // Strategies that ignore k: evaluated once per contamination level.
        struct Fixed {
            double error = 0.0;
            std::vector<char> covered;
        };
        std::vector<std::vector<Fixed>> fixed(cfg_.strategies.size(), std::vector<Fixed>(samples.size()));
        for (std::size_t si = 0; si < cfg_.strategies.size(); ++si) {
            const Strategy& st = cfg_.strategies[si];
            if (st.depends_on_k()) continue;
            for (std::size_t ci = 0; ci < samples.size(); ++ci) {
                const auto& x = samples[ci];
                Fixed& f = fixed[si][ci];
                f.covered.assign(store_.n_l, 0);
                if (st.kind == Strategy::Kind::SampleMean) {
                    const auto mean = column_means(x, m);
                    f.error = error_norm(mean, truth_);
                    if (m == 1 && !z_.empty() && strategy_has_interval(st, 1, cfg_.n_total, cfg_.mean_ci_scale)) {
                        const double sd = population_sd_ ? *population_sd_ : sample_sd(x, mean[0]);
                        for (std::size_t li = 0; li < z_.size(); ++li) {
                            const double half = z_[li] * sd / std::sqrt(static_cast<double>(cfg_.n_total));
                            f.covered[li] = std::fabs(mean[0] - truth_) <= half;
                        }
                    }
                } else {
                    Stream us(seed, {r, "uq", std::string_view(st.name()), cfg_.contamination.counts[ci]});
                    const auto rep = u_quantile_median(x, st.subset_size, st.subsets, LocalEstimator::Mean, us);
                    f.error = std::fabs(rep.point - truth_);
                }
            }
        }

        std::vector<std::size_t> sizes;
        for (std::size_t ki = 0; ki < cfg_.k_values.size(); ++ki) {
            const std::size_t k = cfg_.k_values[ki];
            Stream ps(seed, {r, "part", k});
            const auto labels = random_group_labels(cfg_.n_total, k, ps);
            for (std::size_t ci = 0; ci < samples.size(); ++ci) {
                const PointCloud means = group_means(samples[ci], m, labels, k, sizes);
                for (std::size_t si = 0; si < cfg_.strategies.size(); ++si) {
                    const Strategy& st = cfg_.strategies[si];
                    if (!st.depends_on_k()) {
                        store_.err(ki, si, ci, r) = fixed[si][ci].error;
                        for (std::size_t li = 0; li < store_.n_l; ++li)
                            store_.cov(ki, si, ci, li, r) = fixed[si][ci].covered[li];
                        continue;
                    }
                    if (m == 1) {
                        evaluate_scalar(st, LocalEstimates{means.data(), sizes}, ki, si, ci, r);
                    } else {
                        store_.err(ki, si, ci, r) = error_norm(merge_vector(st, means), truth_);
                    }
                }
            }
        }
    }

    static double sample_sd(const std::vector<double>& x, double mean) {
        double ss = 0.0;
        for (double v : x) ss += (v - mean) * (v - mean);
        return std::sqrt(ss / static_cast<double>(x.size() - 1));
    }

    void evaluate_scalar(const Strategy& st, const LocalEstimates& e, std::size_t ki, std::size_t si, std::size_t ci,
                         std::size_t r) {
        double point = 0.0;
        if (st.kind == Strategy::Kind::HuberMerge) point = huber_point(e, st.effective_huber_m());
        else point = median_of(e.values);
        store_.err(ki, si, ci, r) = std::fabs(point - truth_);

        if (z_.empty() || e.k() < 2) return;
        if (st.kind != Strategy::Kind::MedianOfMeans && st.kind != Strategy::Kind::HuberMerge) return;
        const LossSpec loss = st.kind == Strategy::Kind::HuberMerge ? LossSpec::huber(st.effective_huber_m())
                                                                    : LossSpec::absolute_value();
        for (std::size_t li = 0; li < z_.size(); ++li) {
            const auto rep = confidence_interval(e, loss, cfg_.ci_levels[li]);
            store_.cov(ki, si, ci, li, r) = rep.ci->lo <= truth_ && truth_ <= rep.ci->hi;
        }
    }

    std::vector<double> merge_vector(const Strategy& st, const PointCloud& means) const {
        switch (st.kind) {
            case Strategy::Kind::GeometricMedian: return geometric_median(means).point;
            case Strategy::Kind::HuberMerge: {
                std::vector<double> out(means.dim());
                for (std::size_t d = 0; d < means.dim(); ++d)
                    out[d] = huber_point(LocalEstimates{means.column(d), {}}, st.effective_huber_m());
                return out;
            }
            default: return coordinatewise_median(means);
        }
    }

    const ExperimentConfig& cfg_;
    MomentReport moments_;
    double truth_;
    ReplicateStore store_;
    std::vector<double> z_;
    std::optional<double> population_sd_;
};

}  // namespace detail

/*
 * Monte Carlo experiment. Replicate r draws its sample from
 * Stream(master_seed, {r, "data"}), contaminates with {r, "contam", c},
 * partitions with {r, "part", k} and runs U-quantiles with
 * {r, "uq", strategy, c}. Results are stored by replicate index, so the table
 * does not depend on the thread count.
 *
 * Scalar strategies on k groups: median_of_means and coordinatewise_median
 * take the median of the group means, geometric_median as well (the 1-D
 * geometric median is the median), huber_merge standardizes by the MAD of the
 * group means. In dimension m > 1 the error is the Euclidean distance to
 * (theta*, ..., theta*), median_of_means is the coordinate-wise median and
 * huber_merge is applied per coordinate.
 */
inline ResultTable run_experiment(const ExperimentConfig& cfg, RunOptions opts = {}) {
    cfg.validate();
    detail::ExperimentRunner runner(cfg);
    runner.run(opts.threads);
    return runner.aggregate();
}

/// run_experiment with median_of_means guaranteed among the strategies, so every k carries the bound overlay.
inline ResultTable sweep_k(ExperimentConfig cfg, RunOptions opts = {}) {
    const bool has_mom = std::any_of(cfg.strategies.begin(), cfg.strategies.end(), [](const Strategy& s) {
        return s.kind == Strategy::Kind::MedianOfMeans;
    });
    if (!has_mom) cfg.strategies.push_back(parse_strategy("median_of_means"));
    return run_experiment(cfg, opts);
}

/*
 * Coverage of nominal-level intervals under a contamination schedule. Without
 * a [contamination] table the counts are {0, 0.2 sqrt(N), ..., sqrt(N)}. Every
 * strategy must produce an interval: sample_mean (grand mean +- z s / sqrt(N)),
 * median_of_means (absolute-value merge with MAD scale) or huber_merge.
 */
inline ResultTable coverage_table(ExperimentConfig cfg, RunOptions opts = {}) {
    if (cfg.ci_levels.empty()) throw ConfigError("coverage needs ci_level");
    if (cfg.dimension != 1) throw ConfigError("coverage needs scalar data (dimension = 1)");
    for (const auto& s : cfg.strategies)
        if (s.kind != Strategy::Kind::SampleMean && s.kind != Strategy::Kind::MedianOfMeans &&
            s.kind != Strategy::Kind::HuberMerge)
            throw ConfigError("strategy '" + s.name() + "' has no confidence interval");
    if (!cfg.contamination.explicit_schedule) cfg.contamination.counts = sqrt_fifths_schedule(cfg.n_total);
    if (cfg.contamination.counts.empty()) return {};
    return run_experiment(cfg, opts);
}

}  // namespace dcmerge

#endif  // DCMERGE_HARNESS_EXPERIMENT_HPP
