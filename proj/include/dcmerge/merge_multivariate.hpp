#ifndef DCMERGE_MERGE_MULTIVARIATE_HPP
#define DCMERGE_MERGE_MULTIVARIATE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "loss.hpp"
#include "merge_univariate.hpp"

namespace dcmerge {

/// k points in R^m stored row-major.
class PointCloud {
public:
    PointCloud(std::size_t k, std::size_t m, std::vector<double> data) : k_(k), m_(m), data_(std::move(data)) {
        if (k_ == 0) throw std::invalid_argument("point cloud must contain at least one point");
        if (m_ == 0) throw std::invalid_argument("point dimension must be at least 1");
        if (data_.size() != k_ * m_) throw std::invalid_argument("point cloud data size does not match k * m");
        for (double v : data_)
            if (!std::isfinite(v)) throw std::invalid_argument("point cloud contains a non-finite coordinate");
    }

    explicit PointCloud(const std::vector<std::vector<double>>& rows)
        : PointCloud(rows.size(), rows.empty() ? 0 : rows.front().size(), flatten(rows)) {}

    std::size_t size() const noexcept { return k_; }
    std::size_t dim() const noexcept { return m_; }
    std::span<const double> row(std::size_t j) const noexcept { return {data_.data() + j * m_, m_}; }
    const std::vector<double>& data() const noexcept { return data_; }

    std::vector<double> column(std::size_t i) const {
        std::vector<double> c(k_);
        for (std::size_t j = 0; j < k_; ++j) c[j] = data_[j * m_ + i];
        return c;
    }

    std::vector<double> centroid() const {
        std::vector<double> c(m_, 0.0);
        for (std::size_t j = 0; j < k_; ++j)
            for (std::size_t i = 0; i < m_; ++i) c[i] += data_[j * m_ + i];
        for (double& v : c) v /= static_cast<double>(k_);
        return c;
    }

private:
    static std::vector<double> flatten(const std::vector<std::vector<double>>& rows) {
        std::vector<double> out;
        for (const auto& r : rows) {
            if (r.size() != rows.front().size()) throw std::invalid_argument("points have unequal dimensions");
            out.insert(out.end(), r.begin(), r.end());
        }
        return out;
    }

    std::size_t k_, m_;
    std::vector<double> data_;
};

namespace detail {

inline double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline double norm2(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

}  // namespace detail

/*
 * Coordinate-wise M-estimator merge. The objective sum_j sum_i rho_i(z_i - theta_{j,i})
 * separates over coordinates, so coordinate i is the univariate merge of
 * column i with loss i and scale i. All-AbsoluteValue losses give the L1
 * spatial median.
 */
inline std::vector<double> merge_coordinatewise(const PointCloud& cloud, std::span<const LossSpec> losses,
                                                std::span<const double> scales) {
    if (losses.size() != cloud.dim() || scales.size() != cloud.dim())
        throw std::invalid_argument("need one loss and one scale per coordinate");
    std::vector<double> out(cloud.dim());
    for (std::size_t i = 0; i < cloud.dim(); ++i) {
        LocalEstimates col{cloud.column(i), {}};
        out[i] = merge_m_estimator(col, losses[i], scales[i]).point;
    }
    return out;
}

/// Coordinate-wise median (the L1 spatial median).
inline std::vector<double> coordinatewise_median(const PointCloud& cloud) {
    std::vector<double> out(cloud.dim());
    for (std::size_t i = 0; i < cloud.dim(); ++i) out[i] = median_of(cloud.column(i));
    return out;
}

/// F(z) = sum_j ||z - x_j||_2.
inline double geometric_objective(const PointCloud& cloud, std::span<const double> z) {
    double f = 0.0;
    for (std::size_t j = 0; j < cloud.size(); ++j) f += detail::distance(cloud.row(j), z);
    return f;
}

struct GeometricMedianResult {
    std::vector<double> point;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    /// All points on one line: the minimizer may be a segment; the 1-D median along the line is returned.
    bool collinear = false;
    /// Convex weights with point = sum_j weights[j] x_j.
    std::vector<double> weights;
    /// F at the initial point and after every accepted iterate.
    std::vector<double> objective_trace;
    /// Objective increase of a rejected step, 0 if none. Increases within
    /// 64 ulps of F are attributed to round-off and accepted.
    double rejected_increase = 0.0;
};

/*
 * Geometric (L2) median by Weiszfeld iteration with the Vardi-Zhang collision
 * rule.
 *
 * Starts at the centroid. Away from data points the update is the
 * inverse-distance weighted average. When the iterate lands on data points
 * (distance < 1e-14 * scale) with multiplicity eta, let r be the norm of
 * sum_{x_i != z} (x_i - z)/||x_i - z||: r <= eta certifies z as the minimizer,
 * otherwise the step is z' = (1 - eta/r) T(z) + (eta/r) z. Stops when
 * ||z' - z|| <= tol (1 + ||z||) or after max_iter updates. A step that would
 * increase F beyond round-off is rejected and ends the run.
 */
inline GeometricMedianResult geometric_median(const PointCloud& cloud, double tol = 1e-12, int max_iter = 10000) {
    if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
    const std::size_t k = cloud.size(), m = cloud.dim();
    GeometricMedianResult res;
    res.weights.assign(k, 0.0);

    const auto centre = cloud.centroid();
    double spread = 0.0;
    std::size_t far = 0;
    for (std::size_t j = 0; j < k; ++j) {
        const double d = detail::distance(cloud.row(j), centre);
        if (d > spread) {
            spread = d;
            far = j;
        }
    }
    const double scale = 1.0 + spread + detail::norm2(centre);

    if (k == 1 || spread == 0.0) {
        res.point.assign(cloud.row(0).begin(), cloud.row(0).end());
        res.weights[0] = 1.0;
        res.converged = true;
        res.objective = geometric_objective(cloud, res.point);
        res.objective_trace.push_back(res.objective);
        return res;
    }

    // Collinear clouds: project on the line through the centroid and the farthest point.
    std::vector<double> dir(m);
    for (std::size_t i = 0; i < m; ++i) dir[i] = (cloud.row(far)[i] - centre[i]) / spread;
    std::vector<double> proj(k);
    bool collinear = true;
    for (std::size_t j = 0; j < k && collinear; ++j) {
        const auto x = cloud.row(j);
        double t = 0.0;
        for (std::size_t i = 0; i < m; ++i) t += (x[i] - centre[i]) * dir[i];
        double off = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double r = x[i] - centre[i] - t * dir[i];
            off += r * r;
        }
        collinear = std::sqrt(off) <= 1e-12 * scale;
        proj[j] = t;
    }
    if (collinear) {
        std::vector<std::size_t> order(k);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return proj[a] < proj[b]; });
        res.point.assign(m, 0.0);
        auto add = [&](std::size_t j, double w) {
            res.weights[j] += w;
            for (std::size_t i = 0; i < m; ++i) res.point[i] += w * cloud.row(j)[i];
        };
        if (k % 2 == 1) {
            add(order[k / 2], 1.0);
        } else {
            add(order[k / 2 - 1], 0.5);
            add(order[k / 2], 0.5);
        }
        res.collinear = true;
        res.converged = true;
        res.objective = geometric_objective(cloud, res.point);
        res.objective_trace.push_back(res.objective);
        return res;
    }

    std::vector<double> z = centre;
    std::vector<double> w(k, 1.0 / static_cast<double>(k));
    double f = geometric_objective(cloud, z);
    res.objective_trace.push_back(f);
    const double collide = 1e-14 * scale;

    std::vector<double> dist(k), next(m), alpha(k);
    for (int it = 0; it < max_iter; ++it) {
        std::size_t eta = 0, hit = k;
        for (std::size_t j = 0; j < k; ++j) {
            dist[j] = detail::distance(cloud.row(j), z);
            if (dist[j] < collide) {
                ++eta;
                if (hit == k) hit = j;
            }
        }
        if (eta > 0) {
            z.assign(cloud.row(hit).begin(), cloud.row(hit).end());
            std::fill(w.begin(), w.end(), 0.0);
            w[hit] = 1.0;
            for (std::size_t j = 0; j < k; ++j) dist[j] = detail::distance(cloud.row(j), z);
        }

        double inv_sum = 0.0;
        std::fill(next.begin(), next.end(), 0.0);
        std::vector<double> pull(m, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            if (dist[j] < collide) {
                alpha[j] = 0.0;
                continue;
            }
            alpha[j] = 1.0 / dist[j];
            inv_sum += alpha[j];
            const auto x = cloud.row(j);
            for (std::size_t i = 0; i < m; ++i) {
                next[i] += alpha[j] * x[i];
                pull[i] += (x[i] - z[i]) * alpha[j];
            }
        }
        for (double& v : next) v /= inv_sum;
        for (double& a : alpha) a /= inv_sum;

        std::vector<double> w_next = alpha;
        if (eta > 0) {
            const double r = detail::norm2(pull);
            const double e = static_cast<double>(eta);
            if (r <= e) {
                res.converged = true;
                break;
            }
            const double beta = e / r;
            for (std::size_t i = 0; i < m; ++i) next[i] = (1.0 - beta) * next[i] + beta * z[i];
            for (std::size_t j = 0; j < k; ++j) w_next[j] = (1.0 - beta) * alpha[j] + beta * w[j];
        }

        const double f_next = geometric_objective(cloud, next);
        // Near the optimum F is flat to second order and can tick up by a few ulps.
        if (f_next > f * (1.0 + 64.0 * std::numeric_limits<double>::epsilon())) {
            res.rejected_increase = std::max(res.rejected_increase, f_next - f);
            res.converged = true;
            break;
        }
        const double step = detail::distance(next, z);
        const double znorm = detail::norm2(z);
        z = next;
        w = std::move(w_next);
        f = f_next;
        res.objective_trace.push_back(f);
        res.iterations = it + 1;
        if (step <= tol * (1.0 + znorm)) {
            res.converged = true;
            break;
        }
    }
    res.point = std::move(z);
    res.weights = std::move(w);
    res.objective = f;
    return res;
}

/*
 * Eigenvalues of a symmetric m x m matrix (row-major), non-increasing.
 * Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops to
 * 1e-13 ||M||_F. Dimension is capped at 64.
 */
inline std::vector<double> sym_eigenvalues(std::span<const double> matrix, std::size_t m) {
    if (m == 0 || m > 64) throw std::invalid_argument("sym_eigenvalues supports dimensions 1..64");
    if (matrix.size() != m * m) throw std::invalid_argument("matrix size does not match dimension");
    std::vector<double> a(matrix.begin(), matrix.end());
    double frob = 0.0;
    for (double v : a) {
        if (!std::isfinite(v)) throw std::invalid_argument("matrix contains a non-finite entry");
        frob += v * v;
    }
    frob = std::sqrt(frob);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            if (std::fabs(a[i * m + j] - a[j * m + i]) > 1e-12 * std::max(1.0, frob))
                throw std::invalid_argument("matrix is not symmetric");

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (i != j) s += a[i * m + j] * a[i * m + j];
        return std::sqrt(s);
    };
    const double target = 1e-13 * frob;
    for (int sweep = 0; sweep < 100 && off_norm() > target; ++sweep) {
        for (std::size_t p = 0; p + 1 < m; ++p) {
            for (std::size_t q = p + 1; q < m; ++q) {
                const double apq = a[p * m + q];
                if (apq == 0.0) continue;
                const double theta = (a[q * m + q] - a[p * m + p]) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t r = 0; r < m; ++r) {
                    const double arp = a[r * m + p], arq = a[r * m + q];
                    a[r * m + p] = c * arp - s * arq;
                    a[r * m + q] = s * arp + c * arq;
                }
                for (std::size_t r = 0; r < m; ++r) {
                    const double apr = a[p * m + r], aqr = a[q * m + r];
                    a[p * m + r] = c * apr - s * aqr;
                    a[q * m + r] = s * apr + c * aqr;
                }
            }
        }
    }
    std::vector<double> ev(m);
    for (std::size_t i = 0; i < m; ++i) ev[i] = a[i * m + i];
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

/// Which spread constant the certificate uses; see ProximityCertificate.
enum class CertificateConvention { Statement, Proof };

/*
 * Proximity certificate for the geometric median of a cloud.
 *
 * With x_bar the centroid, m_t = (1/k) sum ||x_i - x_bar||^t and the
 * empirical covariance S = (1/k) sum (x_i - x_bar)(x_i - x_bar)^T,
 *   a = (1/k) sum_{j>=2} lambda_j(S),   b = (20 m1^3 + 6 m1 m2 + m3) / a,
 * and for every theta,
 *   (F(theta) - F(median)) / k >= (a/2) r^2 / (b^2 (r + b)),  r = ||theta - median||.
 * The derivation ends with a = sum_{j>=2} lambda_j(S) (no extra 1/k); both
 * variants are kept. The statement variant gives the smaller a and hence the
 * larger, conservative radius.
 */
struct ProximityCertificate {
    double a = 0.0;
    double b = 0.0;
    double a_proof = 0.0;
    double b_proof = 0.0;
    double m1 = 0.0, m2 = 0.0, m3 = 0.0;
    std::vector<double> eigenvalues;

    double radius(double gap, CertificateConvention c = CertificateConvention::Statement) const;
};

/// Largest r >= 0 with (a/2) r^2 / (b^2 (r + b)) <= gap: positive root of a r^2 - 2 gap b^2 r - 2 gap b^3.
inline double proximity_radius(double a, double b, double gap) {
    if (!(a > 0.0)) throw std::domain_error("certificate unavailable: spread constant a must be positive");
    if (!(b > 0.0)) throw std::invalid_argument("certificate constant b must be positive");
    if (!(gap >= 0.0)) throw std::invalid_argument("objective gap must be nonnegative");
    if (gap == 0.0) return 0.0;
    const double gb2 = gap * b * b;
    return (gb2 + std::sqrt(gb2 * gb2 + 2.0 * a * gap * b * b * b)) / a;
}

inline double ProximityCertificate::radius(double gap, CertificateConvention c) const {
    return c == CertificateConvention::Statement ? proximity_radius(a, b, gap) : proximity_radius(a_proof, b_proof, gap);
}

inline ProximityCertificate proximity_certificate(const PointCloud& cloud) {
    const std::size_t k = cloud.size(), m = cloud.dim();
    const auto centre = cloud.centroid();
    ProximityCertificate cert;
    std::vector<double> cov(m * m, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        const auto x = cloud.row(j);
        const double d = detail::distance(x, centre);
        cert.m1 += d;
        cert.m2 += d * d;
        cert.m3 += d * d * d;
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < m; ++c) cov[r * m + c] += (x[r] - centre[r]) * (x[c] - centre[c]);
    }
    const double kk = static_cast<double>(k);
    cert.m1 /= kk;
    cert.m2 /= kk;
    cert.m3 /= kk;
    for (double& v : cov) v /= kk;
    cert.eigenvalues = sym_eigenvalues(cov, m);
    double tail = 0.0;
    for (std::size_t j = 1; j < m; ++j) tail += cert.eigenvalues[j];
    // Round-off level spread counts as zero.
    if (!(tail > 1e-12 * std::max(cert.eigenvalues.front(), 1e-300)))
        throw std::domain_error("certificate unavailable: the cloud has fewer than two directions of spread");
    const double numer = 20.0 * cert.m1 * cert.m1 * cert.m1 + 6.0 * cert.m1 * cert.m2 + cert.m3;
    cert.a_proof = tail;
    cert.b_proof = numer / tail;
    cert.a = tail / kk;
    cert.b = numer / cert.a;
    return cert;
}

/// Certified distance from a candidate to the geometric median given an upper bound on (F(candidate) - min F)/k.
inline double proximity_radius(const PointCloud& cloud, double gap) {
    return proximity_certificate(cloud).radius(gap);
}

}  // namespace dcmerge

#endif  // DCMERGE_MERGE_MULTIVARIATE_HPP
