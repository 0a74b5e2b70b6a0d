#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "dcmerge/distributions.hpp"
#include "dcmerge/merge_univariate.hpp"

using namespace dcmerge;

namespace {

LocalEstimates values(std::vector<double> v) { return LocalEstimates{std::move(v), {}}; }

// Brute-force sign change of G on a fine grid; returns the midpoint of the zero set.
double brute_root(const std::vector<double>& v, const LossSpec& loss, double scale) {
    const double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
    const int steps = 200000;
    double first = hi, last = lo;
    for (int i = 0; i <= steps; ++i) {
        const double z = lo + (hi - lo) * i / steps;
        double g = 0.0;
        for (double t : v) g += loss.derivative((z - t) / scale);
        if (std::fabs(g) < 1e-12) g = 0.0;
        if (g >= 0.0) first = std::min(first, z);
        if (g <= 0.0) last = std::max(last, z);
    }
    return 0.5 * (first + last);
}

}  // namespace

TEST(LocalMeans, ContiguousGroups) {
    std::vector<double> x{1, 2, 3, 4, 5, 6};
    const auto e = local_means(x, partition_contiguous(6, 3));
    EXPECT_EQ(e.values, (std::vector<double>{1.5, 3.5, 5.5}));
    EXPECT_EQ(e.sizes, (std::vector<std::size_t>{2, 2, 2}));
}

TEST(LocalMeans, SingleGroupIsGrandMean) {
    std::vector<double> x{1, 2, 3, 10};
    EXPECT_DOUBLE_EQ(local_means(x, partition_contiguous(4, 1)).values[0], 4.0);
}

TEST(LocalMeans, WeightedAverageIsGrandMean) {
    Stream s(1);
    const auto x = sample(DistSpec::normal(3, 2), 1003, s);
    const auto e = local_means(x, partition_disjoint(1003, 17, s));
    double weighted = 0.0, grand = 0.0;
    for (std::size_t j = 0; j < e.k(); ++j) weighted += e.sizes[j] * e.values[j];
    for (double v : x) grand += v;
    EXPECT_NEAR(weighted / 1003.0, grand / 1003.0, 1e-12);
}

TEST(LocalMle, ExponentialRate) {
    std::vector<double> x{1, 1, 1, 1, 2, 2};
    Partition p;
    p.group_of = {0, 0, 0, 0, 1, 1};
    p.groups = {{0, 1, 2, 3}, {4, 5}};
    const auto e = local_mle(x, p, LocalModel::ExponentialRate);
    EXPECT_DOUBLE_EQ(e.values[0], 1.0);
    EXPECT_DOUBLE_EQ(e.values[1], 0.5);
    std::vector<double> bad{1, 0};
    EXPECT_THROW(local_mle(bad, partition_contiguous(2, 1), LocalModel::ExponentialRate), std::invalid_argument);
}

TEST(LocalMle, ExponentialRateConsistent) {
    // Exp(rate 2) = Gamma(1) / 2.
    Stream s(2);
    std::vector<double> x(40000);
    for (double& v : x) v = s.gamma(1.0) / 2.0;
    for (double v : local_mle(x, partition_disjoint(40000, 4, s), LocalModel::ExponentialRate).values)
        EXPECT_NEAR(v, 2.0, 0.1);
}

TEST(MergeMedian, Examples) {
    EXPECT_EQ(merge_median(values({1.5, 3.5, 5.5})).point, 3.5);
    EXPECT_EQ(merge_median(values({1, 2, 3, 100})).point, 2.5);
}

TEST(MergeMedian, BreakdownWith101Values) {
    Stream s(3);
    std::vector<double> v(101);
    for (double& x : v) x = s.normal();
    std::vector<std::size_t> idx(101);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), s);
    std::vector<double> clean;
    for (std::size_t i = 50; i < 101; ++i) clean.push_back(v[idx[i]]);
    for (std::size_t i = 0; i < 50; ++i) v[idx[i]] = (i % 3 == 0) ? -1e9 : 1e9;
    const double m = merge_median(values(v)).point;
    EXPECT_GE(m, *std::min_element(clean.begin(), clean.end()));
    EXPECT_LE(m, *std::max_element(clean.begin(), clean.end()));
}

TEST(MergeMedian, TranslationAndScaleEquivariance) {
    Stream s(4);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> v(1 + s.below(30));
        for (double& x : v) x = std::round(s.normal() * 64.0) / 64.0;
        const double base = merge_median(values(v)).point;
        auto shifted = v, scaled = v;
        for (double& x : shifted) x += 3.25;
        for (double& x : scaled) x *= -4.0;
        EXPECT_EQ(merge_median(values(shifted)).point, base + 3.25);
        EXPECT_EQ(merge_median(values(scaled)).point, -4.0 * base);
    }
}

TEST(MergeMEstimator, ConstantValues) {
    EXPECT_EQ(merge_m_estimator(values({2.5, 2.5, 2.5}), LossSpec::huber(1.0), 1.0).point, 2.5);
}

TEST(MergeMEstimator, LargeHuberIsMean) {
    EXPECT_NEAR(merge_m_estimator(values({0, 1, 2}), LossSpec::huber(1e6), 1.0).point, 1.0, 1e-9);
}

TEST(MergeMEstimator, AbsoluteValueEvenK) {
    const std::vector<double> v{0, 1, 2, 100};
    const double r = merge_m_estimator(values(v), LossSpec::absolute_value(), 1.0).point;
    EXPECT_NEAR(r, 1.5, 1e-12);
    EXPECT_NEAR(r, brute_root(v, LossSpec::absolute_value(), 1.0), 1e-4);
    EXPECT_EQ(r, merge_median(values(v)).point);
}

TEST(MergeMEstimator, MatchesGridRootForHuber) {
    Stream s(5);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<double> v(2 + s.below(20));
        for (double& x : v) x = s.normal() * 3.0 + (s.uniform() < 0.2 ? 50.0 : 0.0);
        const auto loss = LossSpec::huber(0.5 + 3.0 * s.uniform());
        const double scale = 0.5 + s.uniform();
        const double range = *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
        EXPECT_NEAR(merge_m_estimator(values(v), loss, scale).point, brute_root(v, loss, scale), 2e-5 * range);
    }
}

TEST(MergeMEstimator, AbsoluteValueAgreesWithMedianOddK) {
    Stream s(6);
    for (int rep = 0; rep < 300; ++rep) {
        std::vector<double> v(1 + 2 * s.below(25));
        for (double& x : v) x = s.normal() * 10.0;
        EXPECT_NEAR(merge_m_estimator(values(v), LossSpec::absolute_value(), 1.0).point, merge_median(values(v)).point,
                    1e-12);
    }
}

TEST(MergeMEstimator, TranslationEquivariance) {
    Stream s(7);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> v(3 + s.below(20));
        for (double& x : v) x = s.normal();
        const auto loss = LossSpec::huber(1.5);
        const double base = merge_m_estimator(values(v), loss, 0.7).point;
        for (double& x : v) x += 12.5;
        EXPECT_NEAR(merge_m_estimator(values(v), loss, 0.7).point, base + 12.5, 1e-10);
    }
}

TEST(MergeMEstimator, HuberLimitIsMean) {
    Stream s(8);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> v(2 + s.below(30));
        for (double& x : v) x = s.normal() * 5.0;
        const double range = *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
        const double m = merge_m_estimator(values(v), LossSpec::huber(1e3 * range), 1.0).point;
        EXPECT_NEAR(m, mean_of(v), 1e-6 * range);
    }
}

TEST(MergeMEstimator, GMonotoneWithBracketSigns) {
    Stream s(9);
    const auto loss = LossSpec::huber(1.0);
    std::vector<double> v(15);
    for (double& x : v) x = s.normal();
    auto g = [&](double z) {
        double t = 0.0;
        for (double x : v) t += loss.derivative(z - x);
        return t;
    };
    const double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
    EXPECT_LE(g(lo), 0.0);
    EXPECT_GE(g(hi), 0.0);
    double prev = g(lo);
    for (int i = 1; i <= 1000; ++i) {
        const double cur = g(lo + (hi - lo) * i / 1000.0);
        EXPECT_GE(cur, prev);
        prev = cur;
    }
}

TEST(MergeMEstimator, Errors) {
    EXPECT_THROW(merge_m_estimator(values({}), LossSpec::absolute_value(), 1.0), std::invalid_argument);
    EXPECT_THROW(merge_m_estimator(values({1.0}), LossSpec::absolute_value(), 0.0), std::invalid_argument);
    EXPECT_THROW(LossSpec::huber(0.0), std::invalid_argument);
}

TEST(MadScale, Examples) {
    EXPECT_NEAR(mad_scale(values({-1, 0, 1})), 1.482602218505602, 1e-12);
    EXPECT_EQ(mad_scale(values({4, 4, 4, 4})), 0.0);
}

TEST(MadScale, ConsistentForNormal) {
    Stream s(10);
    std::vector<double> v(10000);
    for (double& x : v) x = 2.5 * s.normal();
    EXPECT_NEAR(mad_scale(values(v)), 2.5, 0.05 * 2.5);
}

TEST(ConfidenceInterval, AbsoluteValueHalfWidth) {
    Stream s(11);
    std::vector<double> v(50);
    for (double& x : v) x = s.normal();
    const auto r = confidence_interval(values(v), LossSpec::absolute_value(), 0.95);
    ASSERT_TRUE(r.ci && r.scale_hat);
    const double half = 0.5 * (r.ci->hi - r.ci->lo);
    EXPECT_NEAR(half, 1.959963984540054 * std::sqrt(std::numbers::pi / 2.0) * *r.scale_hat / std::sqrt(50.0), 1e-12);
    EXPECT_NEAR(r.point, merge_median(values(v)).point, 1e-12);
}

TEST(ConfidenceInterval, HuberThreeUsesItsVarianceFactor) {
    Stream s(12);
    std::vector<double> v(40);
    for (double& x : v) x = s.normal();
    const auto r = confidence_interval(values(v), LossSpec::huber(3.0), 0.9, 1.0);
    const double half = 0.5 * (r.ci->hi - r.ci->lo);
    const double z = normal_quantile(0.95);
    EXPECT_NEAR(half / (z / std::sqrt(40.0)), std::sqrt(1.0004017476071094), 1e-10);
}

TEST(ConfidenceInterval, DegenerateWhenScaleVanishes) {
    const auto r = confidence_interval(values({1, 1, 1, 2}), LossSpec::absolute_value(), 0.95);
    ASSERT_TRUE(r.ci);
    EXPECT_TRUE(r.ci->degenerate);
    EXPECT_EQ(r.ci->lo, 1.0);
    EXPECT_EQ(r.ci->hi, 1.0);
}

TEST(ConfidenceInterval, CoverageOnNormalData) {
    const std::size_t n_total = 10000, k = 100;
    const int reps = 2000;
    int covered = 0;
    for (int r = 0; r < reps; ++r) {
        Stream s(2718, {r});
        const auto x = sample(DistSpec::normal(0, 1), n_total, s);
        const auto ci = confidence_interval(local_means(x, partition_disjoint(n_total, k, s)),
                                            LossSpec::absolute_value(), 0.95)
                            .ci;
        if (ci->lo <= 0.0 && 0.0 <= ci->hi) ++covered;
    }
    EXPECT_NEAR(covered / double(reps), 0.95, 0.02);
}

TEST(ConfidenceInterval, HalfWidthScalesWithInverseRootK) {
    // Same per-group scale, twice as many groups: half-width shrinks by sqrt(2) up to the MAD fluctuation.
    Stream s(13);
    const std::size_t n = 100;
    auto halfwidth = [&](std::size_t k) {
        const auto x = sample(DistSpec::normal(0, 1), n * k, s);
        const auto r = confidence_interval(local_means(x, partition_disjoint(n * k, k, s)), LossSpec::absolute_value(),
                                           0.95, 1.0 / std::sqrt(double(n)));
        return 0.5 * (r.ci->hi - r.ci->lo);
    };
    EXPECT_NEAR(halfwidth(200) / halfwidth(400), std::sqrt(2.0), 0.15 * std::sqrt(2.0));
}

TEST(UQuantile, SingleSubset) {
    Stream s(14), t(14);
    std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8};
    const auto r = u_quantile_median(x, 3, 1, LocalEstimator::Mean, s);
    const auto sub = sample_subsets(8, 3, 1, t).subsets[0];
    EXPECT_DOUBLE_EQ(r.point, (x[sub[0]] + x[sub[1]] + x[sub[2]]) / 3.0);
}

TEST(UQuantile, FullSubsetIsFullSampleEstimator) {
    Stream s(15);
    std::vector<double> x{1, 2, 4, 8};
    EXPECT_DOUBLE_EQ(u_quantile_median(x, 4, 7, LocalEstimator::Mean, s).point, 3.75);
    EXPECT_DOUBLE_EQ(u_quantile_median(x, 4, 3, LocalEstimator::ExponentialRate, s).point, 1.0 / 3.75);
}

TEST(UQuantile, HodgesLehmannPairs) {
    const std::vector<double> x{0.3, -1.2, 2.5, 0.9, 4.0, -0.4};
    std::vector<double> pairs;
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = i + 1; j < 6; ++j) pairs.push_back(0.5 * (x[i] + x[j]));
    std::sort(pairs.begin(), pairs.end());
    const double exact = pairs[7];
    Stream s(16);
    const double approx = u_quantile_median(x, 2, 100000, LocalEstimator::Mean, s).point;
    // 15 pair averages with distinct values: the sample median of 1e5 draws matches the middle one.
    EXPECT_EQ(approx, exact);
}
