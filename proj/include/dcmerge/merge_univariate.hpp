#ifndef DCMERGE_MERGE_UNIVARIATE_HPP
#define DCMERGE_MERGE_UNIVARIATE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bounds.hpp"
#include "loss.hpp"
#include "normal.hpp"
#include "partition.hpp"
#include "rng.hpp"

namespace dcmerge {

/// Local estimates theta_1..theta_k together with the sizes of the groups that produced them.
struct LocalEstimates {
    std::vector<double> values;
    std::vector<std::size_t> sizes;

    std::size_t k() const noexcept { return values.size(); }
};

struct ConfidenceInterval {
    double lo = 0.0;
    double hi = 0.0;
    double level = 0.0;
    /// Set when the scale estimate vanished and the interval collapsed to a point.
    bool degenerate = false;
};

struct SolverStats {
    int iterations = 0;
    double bracket_width = 0.0;
};

struct EstimateReport {
    double point = 0.0;
    std::string strategy;
    std::optional<double> scale_hat;
    std::optional<ConfidenceInterval> ci;
    SolverStats solver;
    std::vector<double> group_estimates;
};

/// Median with the even-count convention: midpoint of the two central order statistics.
inline double median_of(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of an empty set");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return lower + 0.5 * (upper - lower);
}

inline double mean_of(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean of an empty set");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Per-group arithmetic means. Each group is summed in increasing index order.
inline LocalEstimates local_means(std::span<const double> x, const Partition& p) {
    if (p.sample_size() != x.size()) throw std::invalid_argument("partition does not cover the sample");
    LocalEstimates e;
    e.values.reserve(p.group_count());
    e.sizes.reserve(p.group_count());
    for (const auto& g : p.groups) {
        if (g.empty()) throw std::invalid_argument("partition contains an empty group");
        double s = 0.0;
        for (std::size_t i : g) s += x[i];
        e.values.push_back(s / static_cast<double>(g.size()));
        e.sizes.push_back(g.size());
    }
    return e;
}

enum class LocalModel { ExponentialRate };

/// Per-group maximum likelihood estimates; ExponentialRate gives 1 / group mean.
inline LocalEstimates local_mle(std::span<const double> x, const Partition& p, LocalModel model) {
    if (model == LocalModel::ExponentialRate) {
        for (double v : x)
            if (!(v > 0.0)) throw std::invalid_argument("exponential-rate MLE requires strictly positive observations");
    }
    LocalEstimates e = local_means(x, p);
    for (double& v : e.values) v = 1.0 / v;
    return e;
}

inline EstimateReport merge_median(const LocalEstimates& e) {
    EstimateReport r;
    r.point = median_of(e.values);
    r.strategy = "median";
    r.group_estimates = e.values;
    return r;
}

namespace detail {

// Transition point of a monotone predicate (false ... false true ... true)
// over the sorted values. The predicate is first located between consecutive
// order statistics, then bisected on that gap only. Returns the bracket end
// on the `true` side when take_true is set, else the end on the `false` side.
template <class Pred>
double monotone_transition(const std::vector<double>& sorted, Pred pred, bool take_true, SolverStats& stats) {
    auto first_true = std::partition_point(sorted.begin(), sorted.end(), [&](double z) { return !pred(z); });
    if (first_true == sorted.end()) return sorted.back();
    if (first_true == sorted.begin()) return sorted.front();
    double lo = *(first_true - 1), hi = *first_true;
    const double tol = 1e-12 * std::max(1.0, hi - lo);
    int it = 0;
    while (hi - lo > tol && it < 200) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        if (pred(mid)) hi = mid;
        else lo = mid;
        ++it;
    }
    stats.iterations += it;
    stats.bracket_width = std::max(stats.bracket_width, hi - lo);
    return take_true ? hi : lo;
}

}  // namespace detail

/*
 * M-estimator merge argmin_z sum_j rho((z - theta_j) / scale).
 *
 * Solves G(z) = sum_j rho'((z - theta_j) / scale) = 0 by bisection inside
 * [min theta, max theta], where G(min) <= 0 <= G(max). G is nondecreasing, so
 * the root set is an interval [inf{G >= 0}, sup{G <= 0}]; both ends are found
 * and their midpoint is returned. That reproduces the median convention for
 * the absolute-value loss with even k.
 */
inline EstimateReport merge_m_estimator(const LocalEstimates& e, const LossSpec& loss, double scale) {
    if (e.values.empty()) throw std::invalid_argument("merge requires at least one local estimate");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("merge scale must be positive");
    std::vector<double> sorted = e.values;
    std::sort(sorted.begin(), sorted.end());

    // Sums of +-sup|rho'| terms cancel only up to round-off on flat stretches of G.
    const double zero_tol = 16.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(sorted.size()) *
                            loss.derivative_sup();
    auto g = [&](double z) {
        double s = 0.0;
        for (double v : sorted) s += loss.derivative((z - v) / scale);
        return std::fabs(s) <= zero_tol ? 0.0 : s;
    };

    EstimateReport r;
    r.strategy = "m_estimator:" + loss.name();
    r.group_estimates = e.values;
    const double lower = detail::monotone_transition(sorted, [&](double z) { return g(z) >= 0.0; }, true, r.solver);
    const double upper = detail::monotone_transition(sorted, [&](double z) { return g(z) > 0.0; }, false, r.solver);
    r.point = lower + 0.5 * (upper - lower);
    return r;
}

inline double mad_consistency_factor() { return 1.0 / normal_quantile(0.75); }

/// Normal-consistent median absolute deviation of the local estimates; 0 when more than half coincide.
inline double mad_scale(const LocalEstimates& e) {
    if (e.values.size() < 2) throw std::invalid_argument("MAD scale needs at least two local estimates");
    const double med = median_of(e.values);
    std::vector<double> dev;
    dev.reserve(e.values.size());
    for (double v : e.values) dev.push_back(std::fabs(v - med));
    return median_of(std::move(dev)) * mad_consistency_factor();
}

/*
 * Asymptotic-normal interval around the M-estimator merge:
 *   point +- z_{(1+level)/2} Delta(loss) scale / sqrt(k).
 * scale defaults to mad_scale(e) and also sets the loss normalization. A zero
 * scale yields the degenerate interval [median, median].
 */
inline EstimateReport confidence_interval(const LocalEstimates& e, const LossSpec& loss, double level,
                                          std::optional<double> scale = std::nullopt) {
    if (e.values.size() < 2) throw std::invalid_argument("confidence interval needs at least two local estimates");
    const double z = normal_two_sided_z(level);
    const double sigma = scale ? *scale : mad_scale(e);
    if (scale && !(sigma > 0.0)) throw std::invalid_argument("confidence interval scale must be positive");

    EstimateReport r;
    if (sigma == 0.0) {
        r = merge_median(e);
        r.ci = ConfidenceInterval{r.point, r.point, level, true};
    } else {
        r = merge_m_estimator(e, loss, sigma);
        const double half = z * std::sqrt(delta_squared(loss)) * sigma / std::sqrt(static_cast<double>(e.k()));
        r.ci = ConfidenceInterval{r.point - half, r.point + half, level, false};
    }
    r.scale_hat = sigma;
    return r;
}

enum class LocalEstimator { Mean, ExponentialRate };

inline double apply_estimator(LocalEstimator est, std::span<const double> x, std::span<const std::size_t> idx) {
    double s = 0.0;
    for (std::size_t i : idx) {
        if (est == LocalEstimator::ExponentialRate && !(x[i] > 0.0))
            throw std::invalid_argument("exponential-rate MLE requires strictly positive observations");
        s += x[i];
    }
    const double m = s / static_cast<double>(idx.size());
    return est == LocalEstimator::Mean ? m : 1.0 / m;
}

/// Median of the estimator over ell random n-subsets of the sample.
inline EstimateReport u_quantile_median(std::span<const double> x, std::size_t n, std::size_t ell, LocalEstimator est,
                                        Stream& stream) {
    const auto fam = sample_subsets(x.size(), n, ell, stream);
    std::vector<double> vals;
    vals.reserve(ell);
    for (const auto& sub : fam.subsets) vals.push_back(apply_estimator(est, x, sub));
    EstimateReport r;
    r.point = median_of(vals);
    r.strategy = "u_quantile";
    r.group_estimates = std::move(vals);
    return r;
}

}  // namespace dcmerge

#endif  // DCMERGE_MERGE_UNIVARIATE_HPP
