#ifndef DCMERGE_BOUNDS_HPP
#define DCMERGE_BOUNDS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "loss.hpp"
#include "normal.hpp"

namespace dcmerge {

/// Numerical constants of the deviation bounds.
namespace constants {
/// Berry-Esseen constant for i.i.d. sums (Shevtsova).
inline constexpr double berry_esseen = 0.4748;
/// Validity threshold shared by the median, M-estimator and coordinate-wise bounds.
inline constexpr double median_condition = 0.33;
inline constexpr double corollary1_bias = 1.43;
/// Exact-form threshold for the median and U-quantile bounds.
inline constexpr double half = 0.5;
inline constexpr double theorem7_factor = 26.8;
/// tanh(x) >= 0.83 x whenever tanh(x) <= 1/2.
inline constexpr double tanh_inversion = 0.83;
inline constexpr double corollary5_factor = 32.4;
inline constexpr double corollary5_condition = 0.037;
inline constexpr double corollary5_moment = 400.0;
}  // namespace constants

/// Per-group normalizers sigma_j and normal-approximation errors g_j.
struct GroupProfile {
    std::vector<double> sigma;
    std::vector<double> g;

    static GroupProfile uniform(std::size_t k, double sigma, double g) {
        return {std::vector<double>(k, sigma), std::vector<double>(k, g)};
    }

    void validate() const {
        if (sigma.empty()) throw std::invalid_argument("group profile must contain at least one group");
        if (sigma.size() != g.size()) throw std::invalid_argument("group profile: sigma and g lengths differ");
        for (double s : sigma)
            if (!(s > 0.0)) throw std::invalid_argument("group profile: sigma must be positive");
        for (double e : g)
            if (!(e >= 0.0)) throw std::invalid_argument("group profile: g must be nonnegative");
    }
};

struct BoundReport {
    double bound = 0.0;
    /// Raw failure probability of the bound; may exceed 1 for small s.
    double failure_probability = 1.0;
    bool condition_holds = true;
    /// Left-hand side of the validity inequality.
    double condition_value = 0.0;
    double threshold = 0.0;
    std::string theorem;
};

struct HarmonicMean {
    double h = 0.0;
    std::vector<double> alpha;
};

inline HarmonicMean harmonic_mean(std::span<const double> sigma) {
    if (sigma.empty()) throw std::invalid_argument("harmonic_mean: empty profile");
    double inv = 0.0;
    for (double s : sigma) {
        if (!(s > 0.0)) throw std::invalid_argument("harmonic_mean: sigma must be positive");
        inv += 1.0 / s;
    }
    HarmonicMean out;
    out.h = static_cast<double>(sigma.size()) / inv;
    out.alpha.reserve(sigma.size());
    for (double s : sigma) out.alpha.push_back(out.h / s);
    return out;
}

inline HarmonicMean harmonic_mean(const GroupProfile& p) {
    p.validate();
    return harmonic_mean(std::span<const double>(p.sigma));
}

namespace detail {

inline void require_positive_arg(double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string(name) + " must be positive");
}

inline double four_exp_minus_2s(double s) { return 4.0 * std::exp(-2.0 * s); }

}  // namespace detail

/// Classical median-of-means bound 2 sigma sqrt(6e) sqrt(k/N), probability 1 - e^{-k}.
inline BoundReport bound_legacy(double sigma, std::size_t n_total, std::size_t k) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be nonnegative");
    if (k == 0 || k > n_total) throw std::invalid_argument("need 1 <= k <= N");
    BoundReport r;
    r.theorem = "legacy";
    r.bound = 2.0 * sigma * std::sqrt(6.0 * std::numbers::e) *
              std::sqrt(static_cast<double>(k) / static_cast<double>(n_total));
    r.failure_probability = std::exp(-static_cast<double>(k));
    return r;
}

/*
 * Median merge, explicit form:
 *   |med - theta| <= 3 H_k (1/k) sum_j (g_j + sqrt(s/k))
 * valid when (1/k) sum_i (g_i + sqrt(s/k)) * max_j alpha_j <= 0.33.
 */
inline BoundReport bound_theorem1(const GroupProfile& profile, double s) {
    detail::require_positive_arg(s, "s");
    const auto hm = harmonic_mean(profile);
    const double k = static_cast<double>(profile.sigma.size());
    const double root = std::sqrt(s / k);
    double avg = 0.0;
    for (double g : profile.g) avg += g + root;
    avg /= k;
    const double max_alpha = *std::max_element(hm.alpha.begin(), hm.alpha.end());

    BoundReport r;
    r.theorem = "theorem1";
    r.bound = 3.0 * hm.h * avg;
    r.condition_value = avg * max_alpha;
    r.threshold = constants::median_condition;
    r.condition_holds = r.condition_value <= constants::median_condition;
    r.failure_probability = detail::four_exp_minus_2s(s);
    return r;
}

/*
 * Median merge, exact form: zeta = max_j zeta_j with
 *   Phi(zeta_j / sigma_j) - 1/2 = alpha_j (1/k) sum_i (g_i + sqrt(s/k)),
 * valid under the strict condition (...) * max alpha < 1/2. Outside it the
 * bound is +inf.
 */
inline BoundReport bound_theorem1_exact(const GroupProfile& profile, double s) {
    detail::require_positive_arg(s, "s");
    const auto hm = harmonic_mean(profile);
    const double k = static_cast<double>(profile.sigma.size());
    const double root = std::sqrt(s / k);
    double avg = 0.0;
    for (double g : profile.g) avg += g + root;
    avg /= k;
    const double max_alpha = *std::max_element(hm.alpha.begin(), hm.alpha.end());

    BoundReport r;
    r.theorem = "theorem1_exact";
    r.condition_value = avg * max_alpha;
    r.threshold = constants::half;
    r.condition_holds = r.condition_value < constants::half;
    r.failure_probability = detail::four_exp_minus_2s(s);
    if (!r.condition_holds) {
        r.bound = std::numeric_limits<double>::infinity();
        return r;
    }
    double zeta = 0.0;
    for (std::size_t j = 0; j < profile.sigma.size(); ++j)
        zeta = std::max(zeta, profile.sigma[j] * normal_quantile(0.5 + hm.alpha[j] * avg));
    r.bound = zeta;
    return r;
}

/*
 * Median-of-means with a finite third moment:
 *   sigma (1.43 (rho3/sigma^3)/n + 3 sqrt(s/(k n)))
 * valid when 0.4748 (rho3/sigma^3)/sqrt(n) + sqrt(s/k) <= 0.33.
 */
inline BoundReport bound_corollary1(double sigma, double rho3, std::size_t n, std::size_t k, double s) {
    detail::require_positive_arg(sigma, "sigma");
    if (!(rho3 >= 0.0)) throw std::invalid_argument("third absolute moment must be nonnegative");
    if (n == 0 || k == 0) throw std::invalid_argument("n and k must be at least 1");
    detail::require_positive_arg(s, "s");
    const double nn = static_cast<double>(n), kk = static_cast<double>(k);
    const double skew = rho3 / (sigma * sigma * sigma);
    BoundReport r;
    r.theorem = "corollary1";
    r.bound = sigma * (constants::corollary1_bias * skew / nn + 3.0 * std::sqrt(s / (kk * nn)));
    r.condition_value = constants::berry_esseen * skew / std::sqrt(nn) + std::sqrt(s / kk);
    r.threshold = constants::median_condition;
    r.condition_holds = r.condition_value <= constants::median_condition;
    r.failure_probability = detail::four_exp_minus_2s(s);
    return r;
}

/*
 * Median-of-means with 2 + delta moments. The absolute constants c1 (condition
 * threshold) and c2 (bound factor) are not known numerically and are supplied
 * by the caller; the defaults mirror the delta = 1 case.
 */
inline BoundReport bound_corollary2(double sigma, double rho, double delta, std::size_t n, std::size_t k, double s,
                                    double c1 = constants::median_condition, double c2 = 3.0) {
    detail::require_positive_arg(sigma, "sigma");
    if (!(rho >= 0.0)) throw std::invalid_argument("moment must be nonnegative");
    if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in (0, 1]");
    if (n == 0 || k == 0) throw std::invalid_argument("n and k must be at least 1");
    detail::require_positive_arg(s, "s");
    detail::require_positive_arg(c1, "c1");
    detail::require_positive_arg(c2, "c2");
    const double nn = static_cast<double>(n), kk = static_cast<double>(k);
    const double ratio = rho / std::pow(sigma, 2.0 + delta);
    BoundReport r;
    r.theorem = "corollary2";
    r.bound = c2 * sigma * (ratio / std::pow(nn, 0.5 * (1.0 + delta)) + std::sqrt(s / (kk * nn)));
    r.condition_value = ratio / std::pow(nn, 0.5 * delta) + std::sqrt(s / kk);
    r.threshold = c1;
    r.condition_holds = r.condition_value <= c1;
    r.failure_probability = detail::four_exp_minus_2s(s);
    return r;
}

/*
 * M-estimator merge with loss constant C_rho:
 *   3 H_k max_j e^{(C_rho/sigma_j)^2} (1/k) sum_i (sqrt(s/k) + 2 g_i)
 * valid when max_j alpha_j e^{(C_rho/sigma_j)^2} (1/k) sum_i (...) <= 0.33.
 */
inline BoundReport bound_theorem2(const GroupProfile& profile, double s, double c_rho) {
    detail::require_positive_arg(s, "s");
    if (!(c_rho >= 0.0)) throw std::invalid_argument("C_rho must be nonnegative");
    const auto hm = harmonic_mean(profile);
    const double k = static_cast<double>(profile.sigma.size());
    const double root = std::sqrt(s / k);
    double avg = 0.0;
    for (double g : profile.g) avg += root + 2.0 * g;
    avg /= k;
    double max_factor = 0.0, max_weighted = 0.0;
    for (std::size_t j = 0; j < profile.sigma.size(); ++j) {
        const double ratio = c_rho / profile.sigma[j];
        const double f = std::exp(ratio * ratio);
        max_factor = std::max(max_factor, f);
        max_weighted = std::max(max_weighted, hm.alpha[j] * f);
    }
    BoundReport r;
    r.theorem = "theorem2";
    r.bound = 3.0 * hm.h * max_factor * avg;
    r.condition_value = max_weighted * avg;
    r.threshold = constants::median_condition;
    r.condition_holds = r.condition_value <= constants::median_condition;
    r.failure_probability = detail::four_exp_minus_2s(s);
    return r;
}

/*
 * U-quantile median over n-subsets, exact form: sigma_n zeta(n, s) where
 * Phi(zeta) = 1/2 + g + sqrt(s/k), valid when g + sqrt(s/k) < 1/2.
 */
inline BoundReport bound_theorem4(double sigma_n, double g, std::size_t k, double s) {
    detail::require_positive_arg(sigma_n, "sigma_n");
    if (!(g >= 0.0)) throw std::invalid_argument("g must be nonnegative");
    if (k == 0) throw std::invalid_argument("k must be at least 1");
    detail::require_positive_arg(s, "s");
    BoundReport r;
    r.theorem = "theorem4";
    r.condition_value = g + std::sqrt(s / static_cast<double>(k));
    r.threshold = constants::half;
    r.condition_holds = r.condition_value < constants::half;
    r.failure_probability = detail::four_exp_minus_2s(s);
    r.bound = r.condition_holds ? sigma_n * normal_quantile(0.5 + r.condition_value)
                                : std::numeric_limits<double>::infinity();
    return r;
}

/// U-quantile M-estimator: 3 e^{(C_rho/sigma_n)^2} sigma_n (sqrt(s/k) + 2g), same 0.33 condition shape.
inline BoundReport bound_u_quantile_m(double sigma_n, double g, std::size_t k, double s, double c_rho) {
    detail::require_positive_arg(sigma_n, "sigma_n");
    if (!(g >= 0.0)) throw std::invalid_argument("g must be nonnegative");
    if (k == 0) throw std::invalid_argument("k must be at least 1");
    detail::require_positive_arg(s, "s");
    if (!(c_rho >= 0.0)) throw std::invalid_argument("C_rho must be nonnegative");
    const double ratio = c_rho / sigma_n;
    const double factor = std::exp(ratio * ratio);
    const double term = std::sqrt(s / static_cast<double>(k)) + 2.0 * g;
    BoundReport r;
    r.theorem = "u_quantile_m";
    r.bound = 3.0 * factor * sigma_n * term;
    r.condition_value = factor * term;
    r.threshold = constants::median_condition;
    r.condition_holds = r.condition_value <= constants::median_condition;
    r.failure_probability = detail::four_exp_minus_2s(s);
    return r;
}

/*
 * Coordinate-wise merge in R^m. One report per coordinate:
 *   3 e^{(C_i/sigma_i)^2} sigma_i (sqrt(s/k) + 2 g_m),
 * all sharing the condition max_i e^{(C_i/sigma_i)^2}(sqrt(s/k) + 2 g_m) <= 0.33
 * and the failure probability 4 m e^{-2s}.
 */
inline std::vector<BoundReport> bound_theorem5(std::span<const double> sigma, double g_m, std::size_t k, double s,
                                               std::span<const double> c_rho) {
    if (sigma.empty()) throw std::invalid_argument("need at least one coordinate");
    if (sigma.size() != c_rho.size()) throw std::invalid_argument("sigma and C_rho lengths differ");
    if (!(g_m >= 0.0)) throw std::invalid_argument("g_m must be nonnegative");
    if (k == 0) throw std::invalid_argument("k must be at least 1");
    detail::require_positive_arg(s, "s");
    const double term = std::sqrt(s / static_cast<double>(k)) + 2.0 * g_m;
    std::vector<double> factor(sigma.size());
    double max_factor = 0.0;
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        detail::require_positive_arg(sigma[i], "sigma");
        if (!(c_rho[i] >= 0.0)) throw std::invalid_argument("C_rho must be nonnegative");
        const double ratio = c_rho[i] / sigma[i];
        factor[i] = std::exp(ratio * ratio);
        max_factor = std::max(max_factor, factor[i]);
    }
    const double cond = max_factor * term;
    std::vector<BoundReport> out;
    out.reserve(sigma.size());
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        BoundReport r;
        r.theorem = "theorem5";
        r.bound = 3.0 * factor[i] * sigma[i] * term;
        r.condition_value = cond;
        r.threshold = constants::median_condition;
        r.condition_holds = cond <= constants::median_condition;
        r.failure_probability = static_cast<double>(sigma.size()) * detail::four_exp_minus_2s(s);
        out.push_back(r);
    }
    return out;
}

/// C_2(m) = sqrt(m + 2 sqrt((m - 1) ln 4)).
inline double geometric_c2(std::size_t m) {
    if (m == 0) throw std::invalid_argument("dimension must be positive");
    const double mm = static_cast<double>(m);
    return std::sqrt(mm + 2.0 * std::sqrt((mm - 1.0) * std::log(4.0)));
}

/// C_1(m) = 6 (m + 4) sqrt(ln(4 e^{5/2})) C_2(m), the form carried through the cone-entropy lemmas.
inline double geometric_c1(std::size_t m) {
    return 6.0 * (static_cast<double>(m) + 4.0) * std::sqrt(std::log(4.0) + 2.5) * geometric_c2(m);
}

/// C_1 with (m + 4) under the radical, as it is typeset in the theorem statement.
inline double geometric_c1_displayed(std::size_t m) {
    return 6.0 * std::sqrt((std::log(4.0) + 2.5) * (static_cast<double>(m) + 4.0)) * geometric_c2(m);
}

/*
 * Geometric (L2) median deviation in units of sigma_n. The right-hand side
 *   rhs = 26.8 ||Sigma^{-1/2}|| (C1/sqrt(k) + C2 (sqrt(s/(4k)) + g_S))
 * bounds tanh(||err|| / sigma_n). When rhs <= 1/2 the tanh inverts linearly
 * (bound = rhs / 0.83); otherwise condition_holds is false and the bound falls
 * back to artanh(min(rhs, 1 - 1e-12)).
 */
inline BoundReport bound_theorem7(std::size_t m, std::size_t k, double s, double g_s, double inv_sqrt_norm,
                                  bool displayed_c1 = false) {
    if (m < 2) throw std::invalid_argument("geometric median bound requires dimension >= 2");
    if (k == 0) throw std::invalid_argument("k must be at least 1");
    detail::require_positive_arg(s, "s");
    if (!(g_s >= 0.0)) throw std::invalid_argument("g_S must be nonnegative");
    detail::require_positive_arg(inv_sqrt_norm, "||Sigma^{-1/2}||");
    const double kk = static_cast<double>(k);
    const double c1 = displayed_c1 ? geometric_c1_displayed(m) : geometric_c1(m);
    const double c2 = geometric_c2(m);
    const double rhs =
        constants::theorem7_factor * inv_sqrt_norm * (c1 / std::sqrt(kk) + c2 * (std::sqrt(s / (4.0 * kk)) + g_s));
    BoundReport r;
    r.theorem = "theorem7";
    r.condition_value = rhs;
    r.threshold = constants::half;
    r.condition_holds = rhs <= constants::half;
    r.bound = r.condition_holds ? rhs / constants::tanh_inversion : std::atanh(std::min(rhs, 1.0 - 1e-12));
    r.failure_probability = std::exp(-2.0 * s);
    return r;
}

/*
 * Geometric median-of-means in R^d:
 *   32.4 ||S^{1/2}|| cond(S^{1/2}) (C1/sqrt(kn) + C2 (sqrt(s/(4kn)) + 400 d^{1/4} T / n))
 * valid when cond(S^{1/2}) (C1/sqrt(k) + C2 (sqrt(s/(4k)) + 400 d^{1/4} T / sqrt(n))) <= 0.037,
 * where T = E||S^{-1/2}(X - theta)||^3.
 */
inline BoundReport bound_corollary5(double sqrt_cov_norm, double cond, double third_moment, std::size_t d,
                                    std::size_t n, std::size_t k, double s) {
    if (d < 2) throw std::invalid_argument("geometric median bound requires dimension >= 2");
    detail::require_positive_arg(sqrt_cov_norm, "||Sigma^{1/2}||");
    if (!(cond >= 1.0)) throw std::invalid_argument("condition number must be >= 1");
    if (!(third_moment >= 0.0)) throw std::invalid_argument("third moment term must be nonnegative");
    if (n == 0 || k == 0) throw std::invalid_argument("n and k must be at least 1");
    detail::require_positive_arg(s, "s");
    const double nn = static_cast<double>(n), kk = static_cast<double>(k);
    const double c1 = geometric_c1(d), c2 = geometric_c2(d);
    const double moment = constants::corollary5_moment * std::pow(static_cast<double>(d), 0.25) * third_moment;
    BoundReport r;
    r.theorem = "corollary5";
    r.bound = constants::corollary5_factor * sqrt_cov_norm * cond *
              (c1 / std::sqrt(kk * nn) + c2 * (std::sqrt(s / (4.0 * kk * nn)) + moment / nn));
    r.condition_value = cond * (c1 / std::sqrt(kk) + c2 * (std::sqrt(s / (4.0 * kk)) + moment / std::sqrt(nn)));
    r.threshold = constants::corollary5_condition;
    r.condition_holds = r.condition_value <= constants::corollary5_condition;
    r.failure_probability = std::exp(-2.0 * s);
    return r;
}

/*
 * Asymptotic variance factor Delta^2 = E rho'(Z)^2 / L'(0)^2 of the merged
 * estimator. pi/2 for the median. For Huber(M), with t = 1 - Phi(M),
 * c = 2 Phi(M) - 1 and int_{-M}^{M} x^2 dPhi = c - 2 M phi(M):
 *   Delta^2 = (c - 2 M phi(M) + 2 M^2 t) / c^2
 *           = 1 + 2 (t (c + M^2) - M phi(M)) / c^2,
 * the second form keeps the excess over 1 accurate for large M.
 */
inline double delta_squared(const LossSpec& loss) {
    if (loss.kind() == LossSpec::Kind::AbsoluteValue) return std::numbers::pi / 2.0;
    const double m = loss.huber_m();
    const double t = normal_cdf(-m);
    const double c = 1.0 - 2.0 * t;
    return 1.0 + 2.0 * (t * (c + m * m) - m * normal_pdf(m)) / (c * c);
}

}  // namespace dcmerge

#endif  // DCMERGE_BOUNDS_HPP
