#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "dcmerge/merge_multivariate.hpp"

using namespace dcmerge;

namespace {

PointCloud random_cloud(Stream& s, std::size_t k, std::size_t m) {
    std::vector<double> d(k * m);
    for (double& v : d) v = s.normal() * (1.0 + 2.0 * s.uniform());
    return PointCloud(k, m, std::move(d));
}

// Determinant by LU with partial pivoting.
double lu_det(std::vector<double> a, std::size_t n) {
    double det = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::fabs(a[r * n + c]) > std::fabs(a[piv * n + c])) piv = r;
        if (a[piv * n + c] == 0.0) return 0.0;
        if (piv != c) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a[c * n + j], a[piv * n + j]);
            det = -det;
        }
        det *= a[c * n + c];
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r * n + c] / a[c * n + c];
            for (std::size_t j = c; j < n; ++j) a[r * n + j] -= f * a[c * n + j];
        }
    }
    return det;
}

// Random orthogonal matrix by Gram-Schmidt on Gaussian columns.
std::vector<double> random_orthogonal(Stream& s, std::size_t m) {
    std::vector<double> q(m * m);
    for (double& v : q) v = s.normal();
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t p = 0; p < c; ++p) {
            double dot = 0.0;
            for (std::size_t r = 0; r < m; ++r) dot += q[r * m + c] * q[r * m + p];
            for (std::size_t r = 0; r < m; ++r) q[r * m + c] -= dot * q[r * m + p];
        }
        double nrm = 0.0;
        for (std::size_t r = 0; r < m; ++r) nrm += q[r * m + c] * q[r * m + c];
        nrm = std::sqrt(nrm);
        for (std::size_t r = 0; r < m; ++r) q[r * m + c] /= nrm;
    }
    return q;
}

double objective2(const PointCloud& c, double x, double y) {
    const double z[2] = {x, y};
    return geometric_objective(c, z);
}

}  // namespace

TEST(PointCloud, Validation) {
    EXPECT_THROW(PointCloud(0, 2, {}), std::invalid_argument);
    EXPECT_THROW(PointCloud(1, 2, {1.0}), std::invalid_argument);
    EXPECT_THROW(PointCloud(1, 1, {std::nan("")}), std::invalid_argument);
    EXPECT_THROW(PointCloud(std::vector<std::vector<double>>{{1, 2}, {3}}), std::invalid_argument);
}

TEST(Coordinatewise, Example) {
    const PointCloud c({{0, 0}, {1, 2}, {2, 1}});
    const std::vector<LossSpec> losses(2, LossSpec::absolute_value());
    const std::vector<double> scales{1, 1};
    EXPECT_EQ(merge_coordinatewise(c, losses, scales), (std::vector<double>{1, 1}));
    EXPECT_EQ(coordinatewise_median(c), (std::vector<double>{1, 1}));
}

TEST(Coordinatewise, SinglePoint) {
    const PointCloud c({{3, -1, 2}});
    const std::vector<LossSpec> losses{LossSpec::huber(1), LossSpec::absolute_value(), LossSpec::huber(2)};
    const std::vector<double> scales{1, 1, 1};
    EXPECT_EQ(merge_coordinatewise(c, losses, scales), (std::vector<double>{3, -1, 2}));
}

TEST(Coordinatewise, SeparatesByColumn) {
    Stream s(1);
    const auto c = random_cloud(s, 23, 4);
    const std::vector<LossSpec> losses{LossSpec::huber(0.7), LossSpec::absolute_value(), LossSpec::huber(2.0),
                                       LossSpec::huber(1.0)};
    const std::vector<double> scales{1.0, 1.0, 0.5, 2.0};
    const auto out = merge_coordinatewise(c, losses, scales);
    for (std::size_t i = 0; i < 4; ++i)
        EXPECT_NEAR(out[i], merge_m_estimator({c.column(i), {}}, losses[i], scales[i]).point, 1e-12);
}

TEST(Coordinatewise, PermutationInvariant) {
    Stream s(2);
    const auto c = random_cloud(s, 17, 3);
    std::vector<std::size_t> perm(17);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), s);
    std::vector<double> d;
    for (std::size_t j : perm) d.insert(d.end(), c.row(j).begin(), c.row(j).end());
    const PointCloud p(17, 3, d);
    const std::vector<LossSpec> losses(3, LossSpec::huber(1.3));
    const std::vector<double> scales{1, 1, 1};
    const auto a = merge_coordinatewise(c, losses, scales), b = merge_coordinatewise(p, losses, scales);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Coordinatewise, ArgumentCounts) {
    const PointCloud c({{0, 0}});
    const std::vector<LossSpec> one(1, LossSpec::absolute_value());
    const std::vector<double> scales{1, 1};
    EXPECT_THROW(merge_coordinatewise(c, one, scales), std::invalid_argument);
}

TEST(GeometricMedian, EquilateralTriangle) {
    const double h = std::sqrt(3.0) / 2.0;
    const PointCloud c({{0, 0}, {1, 0}, {0.5, h}});
    const auto r = geometric_median(c);
    EXPECT_NEAR(r.point[0], 0.5, 1e-9);
    EXPECT_NEAR(r.point[1], h / 3.0, 1e-9);
    EXPECT_FALSE(r.collinear);
}

TEST(GeometricMedian, CollinearReturnsLineMedian) {
    const PointCloud c({{0, 0}, {1, 0}, {5, 0}});
    const auto r = geometric_median(c);
    EXPECT_TRUE(r.collinear);
    EXPECT_NEAR(r.point[0], 1.0, 1e-9);
    EXPECT_NEAR(r.point[1], 0.0, 1e-9);
}

TEST(GeometricMedian, SinglePointAndDuplicates) {
    EXPECT_EQ(geometric_median(PointCloud({{2, 3}})).point, (std::vector<double>{2, 3}));
    EXPECT_EQ(geometric_median(PointCloud({{2, 3}, {2, 3}, {2, 3}})).point, (std::vector<double>{2, 3}));
}

TEST(GeometricMedian, VertexMinimizerViaCollisionRule) {
    // Heavy multiplicity at the origin makes it the minimizer; Weiszfeld lands on it and must stop there.
    const PointCloud c({{0, 0}, {0, 0}, {0, 0}, {0, 0}, {1, 0}, {0, 1}, {-1, 0.2}});
    const auto r = geometric_median(c);
    EXPECT_NEAR(r.point[0], 0.0, 1e-9);
    EXPECT_NEAR(r.point[1], 0.0, 1e-9);
    EXPECT_TRUE(r.converged);
}

TEST(GeometricMedian, GridOracle) {
    const PointCloud c({{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {10, 10}});
    const auto r = geometric_median(c, 1e-14, 100000);
    // Coarse grid at resolution 1e-2, then a 1e-4 lattice, then coordinate golden-section refinement.
    double bx = 0, by = 0, best = objective2(c, 0, 0);
    for (double step : {1e-2, 1e-4}) {
        const double cx = bx, cy = by;
        for (int i = -100; i <= 100; ++i)
            for (int j = -100; j <= 100; ++j) {
                const double f = objective2(c, cx + i * step, cy + j * step);
                if (f < best) best = f, bx = cx + i * step, by = cy + j * step;
            }
    }
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int sweep = 0; sweep < 50; ++sweep) {
        for (int axis = 0; axis < 2; ++axis) {
            double a = (axis ? by : bx) - 1e-4, b = (axis ? by : bx) + 1e-4;
            auto f = [&](double t) { return axis ? objective2(c, bx, t) : objective2(c, t, by); };
            for (int it = 0; it < 80; ++it) {
                const double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
                if (f(x1) < f(x2)) b = x2;
                else a = x1;
            }
            (axis ? by : bx) = 0.5 * (a + b);
        }
    }
    EXPECT_NEAR(r.point[0], bx, 1e-6);
    EXPECT_NEAR(r.point[1], by, 1e-6);
    EXPECT_LE(r.objective, objective2(c, bx, by) + 1e-12);
}

TEST(GeometricMedian, DescentConvexWeightsAndConvergence) {
    Stream s(3);
    for (int rep = 0; rep < 300; ++rep) {
        const std::size_t m = 2 + s.below(7), k = 3 + s.below(48);
        const auto c = random_cloud(s, k, m);
        const auto r = geometric_median(c);
        for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
            ASSERT_LE(r.objective_trace[i], r.objective_trace[i - 1] * (1.0 + 1e-14));
        EXPECT_EQ(r.rejected_increase, 0.0);
        double wsum = 0.0;
        std::vector<double> combo(m, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            ASSERT_GE(r.weights[j], 0.0);
            wsum += r.weights[j];
            for (std::size_t i = 0; i < m; ++i) combo[i] += r.weights[j] * c.row(j)[i];
        }
        EXPECT_NEAR(wsum, 1.0, 1e-12);
        for (std::size_t i = 0; i < m; ++i) EXPECT_NEAR(combo[i], r.point[i], 1e-9 * (1.0 + std::fabs(r.point[i])));
        EXPECT_TRUE(r.converged);
    }
}

TEST(GeometricMedian, RotationEquivariance) {
    Stream s(4);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t m = 2 + s.below(5), k = 5 + s.below(20);
        const auto c = random_cloud(s, k, m);
        const auto q = random_orthogonal(s, m);
        std::vector<double> rotated(k * m, 0.0);
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t i = 0; i < m; ++i) rotated[j * m + r] += q[r * m + i] * c.row(j)[i];
        const auto a = geometric_median(c, 1e-15, 100000).point;
        const auto b = geometric_median(PointCloud(k, m, rotated), 1e-15, 100000).point;
        for (std::size_t r = 0; r < m; ++r) {
            double qa = 0.0;
            for (std::size_t i = 0; i < m; ++i) qa += q[r * m + i] * a[i];
            EXPECT_NEAR(qa, b[r], 1e-8);
        }
    }
}

TEST(GeometricMedian, OptimalityCondition) {
    // At an interior minimizer the unit vectors towards the points sum to zero.
    Stream s(5);
    for (int rep = 0; rep < 50; ++rep) {
        const auto c = random_cloud(s, 15, 3);
        const auto r = geometric_median(c, 1e-14, 100000);
        std::vector<double> grad(3, 0.0);
        for (std::size_t j = 0; j < 15; ++j) {
            const double d = detail::distance(c.row(j), r.point);
            ASSERT_GT(d, 1e-9);
            for (std::size_t i = 0; i < 3; ++i) grad[i] += (r.point[i] - c.row(j)[i]) / d;
        }
        EXPECT_LT(detail::norm2(grad), 1e-5);
    }
}

TEST(SymEigenvalues, Examples) {
    const std::vector<double> d{3, 0, 0, 0, 1, 0, 0, 0, 2};
    EXPECT_EQ(sym_eigenvalues(d, 3), (std::vector<double>{3, 2, 1}));
    const auto e = sym_eigenvalues(std::vector<double>{2, 1, 1, 2}, 2);
    EXPECT_NEAR(e[0], 3.0, 1e-13);
    EXPECT_NEAR(e[1], 1.0, 1e-13);
}

TEST(SymEigenvalues, TraceAndDeterminantOracle) {
    Stream s(6);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t m = 1 + s.below(12);
        std::vector<double> a(m * m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i; j < m; ++j) a[i * m + j] = a[j * m + i] = s.normal();
        const auto ev = sym_eigenvalues(a, m);
        ASSERT_TRUE(std::is_sorted(ev.begin(), ev.end(), std::greater<>()));
        double tr = 0.0, sum = 0.0, prod = 1.0;
        for (std::size_t i = 0; i < m; ++i) tr += a[i * m + i];
        for (double v : ev) sum += v, prod *= v;
        EXPECT_NEAR(sum, tr, 1e-10);
        const double det = lu_det(a, m);
        EXPECT_NEAR(prod, det, 1e-8 * std::max(1.0, std::fabs(det)));
    }
}

TEST(SymEigenvalues, Errors) {
    EXPECT_THROW(sym_eigenvalues(std::vector<double>{1, 2, 3, 4}, 2), std::invalid_argument);
    EXPECT_THROW(sym_eigenvalues(std::vector<double>(65 * 65, 0.0), 65), std::invalid_argument);
    EXPECT_THROW(sym_eigenvalues(std::vector<double>{1, 2}, 2), std::invalid_argument);
}

TEST(Proximity, RadiusFormula) {
    EXPECT_EQ(proximity_radius(2.0, 1.0, 0.0), 0.0);
    EXPECT_NEAR(proximity_radius(2.0, 1.0, 1.0), (1.0 + std::sqrt(5.0)) / 2.0, 1e-14);
    EXPECT_THROW(proximity_radius(0.0, 1.0, 1.0), std::domain_error);
    // The returned radius satisfies the defining equality.
    const double a = 0.3, b = 2.0, gap = 0.7;
    const double r = proximity_radius(a, b, gap);
    EXPECT_NEAR(0.5 * a * r * r / (b * b * (r + b)), gap, 1e-12);
}

TEST(Proximity, DiamondCloudHandComputation) {
    const PointCloud c({{1, 0}, {-1, 0}, {0, 1}, {0, -1}});
    const auto cert = proximity_certificate(c);
    EXPECT_NEAR(cert.m1, 1.0, 1e-15);
    EXPECT_NEAR(cert.m2, 1.0, 1e-15);
    EXPECT_NEAR(cert.m3, 1.0, 1e-15);
    EXPECT_NEAR(cert.eigenvalues[0], 0.5, 1e-15);
    EXPECT_NEAR(cert.eigenvalues[1], 0.5, 1e-15);
    EXPECT_NEAR(cert.a, 0.5 / 4.0, 1e-15);
    EXPECT_NEAR(cert.a_proof, 0.5, 1e-15);
    EXPECT_NEAR(cert.b, 27.0 / cert.a, 1e-12);
    double prev = 0.0;
    for (double gap : {0.0, 1e-6, 1e-3, 0.1, 1.0, 10.0}) {
        const double r = cert.radius(gap);
        EXPECT_GE(r, prev);
        EXPECT_GE(r, cert.radius(gap, CertificateConvention::Proof));
        prev = r;
    }
}

TEST(Proximity, CollinearCloudUnavailable) {
    EXPECT_THROW(proximity_certificate(PointCloud({{0, 0}, {1, 1}, {3, 3}})), std::domain_error);
}

TEST(Proximity, SoundOnCandidateGrid) {
    Stream s(7);
    const double tol = 1e-12;
    for (int rep = 0; rep < 20; ++rep) {
        const auto c = random_cloud(s, 6 + s.below(20), 2);
        const auto ref = geometric_median(c, 1e-15, 200000);
        const auto cert = proximity_certificate(c);
        const double kk = static_cast<double>(c.size());
        for (int i = -10; i < 10; ++i)
            for (int j = -10; j < 10; ++j) {
                const double th[2] = {ref.point[0] + 0.15 * i, ref.point[1] + 0.15 * j};
                const double gap = std::max(0.0, (geometric_objective(c, th) - ref.objective) / kk);
                EXPECT_LE(detail::distance(th, ref.point), cert.radius(gap) + 10.0 * tol);
            }
    }
}
