#ifndef DCMERGE_DISTRIBUTIONS_HPP
#define DCMERGE_DISTRIBUTIONS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "rng.hpp"

namespace dcmerge {

struct Normal {
    double mean = 0.0;
    double stddev = 1.0;
};

/// Lomax (Pareto type II): density (shape/scale)(1 + x/scale)^{-(shape+1)} on x >= 0.
struct Lomax {
    double shape = 1.0;
    double scale = 1.0;
};

/// Pareto type I: density shape * scale^shape / x^{shape+1} on x >= scale.
struct Pareto {
    double shape = 1.0;
    double scale = 1.0;
};

struct StudentT {
    double dof = 1.0;
};

/// |T| for T ~ StudentT(dof).
struct HalfT {
    double dof = 1.0;
};

using Law = std::variant<Normal, Lomax, Pareto, StudentT, HalfT>;

namespace detail {

inline void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string("distribution parameter '") + what +
                                    "' must be finite and strictly positive");
    }
}

inline void validate(const Law& law) {
    std::visit(
        [](const auto& d) {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, Normal>) {
                if (!std::isfinite(d.mean)) throw std::invalid_argument("normal mean must be finite");
                require_positive(d.stddev, "stddev");
            } else if constexpr (std::is_same_v<D, Lomax> || std::is_same_v<D, Pareto>) {
                require_positive(d.shape, "shape");
                require_positive(d.scale, "scale");
            } else {
                require_positive(d.dof, "dof");
            }
        },
        law);
}

// Mean of the law before any centering shift; nullopt when it diverges.
inline std::optional<double> raw_mean(const Law& law) {
    return std::visit(
        [](const auto& d) -> std::optional<double> {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, Normal>) {
                return d.mean;
            } else if constexpr (std::is_same_v<D, Lomax>) {
                if (d.shape <= 1.0) return std::nullopt;
                return d.scale / (d.shape - 1.0);
            } else if constexpr (std::is_same_v<D, Pareto>) {
                if (d.shape <= 1.0) return std::nullopt;
                return d.shape * d.scale / (d.shape - 1.0);
            } else if constexpr (std::is_same_v<D, StudentT>) {
                if (d.dof <= 1.0) return std::nullopt;
                return 0.0;
            } else {
                if (d.dof <= 1.0) return std::nullopt;
                const double nu = d.dof;
                return 2.0 * std::sqrt(nu) / (std::sqrt(std::numbers::pi) * (nu - 1.0)) *
                       std::exp(std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu));
            }
        },
        law);
}

}  // namespace detail

/// A validated sampling law, optionally shifted so that its mean is zero.
class DistSpec {
public:
    explicit DistSpec(Law law, bool centered = false) : law_(law), centered_(centered) {
        detail::validate(law_);
        if (centered_) {
            const auto m = detail::raw_mean(law_);
            if (!m) throw std::invalid_argument("cannot center a distribution whose mean is undefined");
            shift_ = *m;
        }
    }

    static DistSpec normal(double mean, double stddev) { return DistSpec(Normal{mean, stddev}); }
    static DistSpec lomax(double shape, double scale) { return DistSpec(Lomax{shape, scale}); }
    static DistSpec pareto(double shape, double scale, bool centered = false) {
        return DistSpec(Pareto{shape, scale}, centered);
    }
    static DistSpec student_t(double dof) { return DistSpec(StudentT{dof}); }
    static DistSpec half_t(double dof) { return DistSpec(HalfT{dof}); }

    const Law& law() const noexcept { return law_; }
    bool centered() const noexcept { return centered_; }
    /// Amount subtracted from every raw draw (zero unless centered).
    double shift() const noexcept { return shift_; }

    std::string kind_name() const {
        static constexpr const char* names[] = {"normal", "lomax", "pareto", "student_t", "half_t"};
        return names[law_.index()];
    }

    friend bool operator==(const DistSpec& a, const DistSpec& b) {
        if (a.law_.index() != b.law_.index() || a.centered_ != b.centered_) return false;
        return std::visit(
            [&](const auto& da) {
                using D = std::decay_t<decltype(da)>;
                const auto& db = std::get<D>(b.law_);
                if constexpr (std::is_same_v<D, Normal>) return da.mean == db.mean && da.stddev == db.stddev;
                else if constexpr (std::is_same_v<D, Lomax> || std::is_same_v<D, Pareto>)
                    return da.shape == db.shape && da.scale == db.scale;
                else return da.dof == db.dof;
            },
            a.law_);
    }

private:
    Law law_;
    bool centered_ = false;
    double shift_ = 0.0;
};

/// One i.i.d. draw from spec.
inline double draw(const DistSpec& spec, Stream& stream) {
    const double raw = std::visit(
        [&](const auto& d) -> double {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, Normal>) {
                return d.mean + d.stddev * stream.normal();
            } else if constexpr (std::is_same_v<D, Lomax>) {
                return d.scale * std::expm1(-std::log(stream.uniform_positive()) / d.shape);
            } else if constexpr (std::is_same_v<D, Pareto>) {
                return d.scale * std::pow(stream.uniform_positive(), -1.0 / d.shape);
            } else {
                const double z = stream.normal();
                const double chi2 = 2.0 * stream.gamma(0.5 * d.dof);
                const double t = z / std::sqrt(chi2 / d.dof);
                if constexpr (std::is_same_v<D, HalfT>) return std::fabs(t);
                else return t;
            }
        },
        spec.law());
    return raw - spec.shift();
}

/// Fills out with i.i.d. draws.
inline void sample_into(const DistSpec& spec, std::span<double> out, Stream& stream) {
    for (double& v : out) v = draw(spec, stream);
}

inline std::vector<double> sample(const DistSpec& spec, std::size_t n, Stream& stream) {
    std::vector<double> out(n);
    sample_into(spec, out, stream);
    return out;
}

struct MomentReport {
    std::optional<double> mean;
    std::optional<double> variance;
    double median = 0.0;
    /// Order p of the reported absolute central moment E|X - mean|^p.
    double order = 3.0;
    std::optional<double> abs_central;
    /// True when abs_central came from numerical quadrature.
    bool numeric = false;
};

namespace detail {

inline double student_t_pdf(double x, double nu) {
    const double logc = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                        0.5 * std::log(nu * std::numbers::pi);
    return std::exp(logc - 0.5 * (nu + 1.0) * std::log1p(x * x / nu));
}

// E|X - mu|^p from the density on [lower, inf), split at mu so the kink of
// |x - mu|^p sits on an endpoint. Double-exponential rules absorb the
// integrable endpoint behaviour and algebraic tail decay.
template <class Density>
double abs_central_by_quadrature(Density f, double lower, double mu, double p) {
    constexpr double tol = 1e-10;
    double left = 0.0;
    if (mu > lower) {
        boost::math::quadrature::tanh_sinh<double> ts;
        left = ts.integrate([&](double x) { return std::pow(mu - x, p) * f(x); }, lower, mu, tol);
    }
    const double start = std::max(mu, lower);
    boost::math::quadrature::exp_sinh<double> es;
    const double right = es.integrate(
        [&](double t) {
            const double x = start + t;
            const double v = std::pow(x - mu, p) * f(x);
            return std::isfinite(v) ? v : 0.0;  // inf * 0 far out in the tail
        },
        0.0, std::numeric_limits<double>::infinity(), tol);
    return left + right;
}

}  // namespace detail

/*
 * Analytic moments of spec, with the p-th absolute central moment (default
 * p = 3). Divergent moments are reported as nullopt. Normal and Student t
 * moments are closed form; for Lomax, Pareto and half-t the absolute central
 * moment is integrated numerically and flagged via MomentReport::numeric.
 * Centering shifts the mean and median but no central moment.
 */
inline MomentReport true_moments(const DistSpec& spec, double p = 3.0) {
    if (!(p > 0.0)) throw std::invalid_argument("moment order must be positive");
    MomentReport r;
    r.order = p;
    const auto mean = detail::raw_mean(spec.law());

    std::visit(
        [&](const auto& d) {
            using D = std::decay_t<decltype(d)>;
            using std::lgamma, std::exp, std::pow, std::sqrt;
            const double sqrt_pi = sqrt(std::numbers::pi);
            if constexpr (std::is_same_v<D, Normal>) {
                r.variance = d.stddev * d.stddev;
                r.median = d.mean;
                r.abs_central = pow(d.stddev, p) * pow(2.0, 0.5 * p) * exp(lgamma(0.5 * (p + 1.0))) / sqrt_pi;
            } else if constexpr (std::is_same_v<D, Lomax> || std::is_same_v<D, Pareto>) {
                const double a = d.shape, s = d.scale;
                if (a > 2.0) r.variance = s * s * a / ((a - 1.0) * (a - 1.0) * (a - 2.0));
                if constexpr (std::is_same_v<D, Lomax>) {
                    r.median = s * (pow(2.0, 1.0 / a) - 1.0);
                } else {
                    r.median = s * pow(2.0, 1.0 / a);
                }
                if (a > p && mean) {
                    const double lower = std::is_same_v<D, Lomax> ? 0.0 : s;
                    auto density = [a, s](double x) {
                        if constexpr (std::is_same_v<D, Lomax>) {
                            return (a / s) * std::exp(-(a + 1.0) * std::log1p(x / s));
                        } else {
                            return a * std::exp(a * std::log(s) - (a + 1.0) * std::log(x));
                        }
                    };
                    r.abs_central = detail::abs_central_by_quadrature(density, lower, *mean, p);
                    r.numeric = true;
                }
            } else if constexpr (std::is_same_v<D, StudentT>) {
                const double nu = d.dof;
                if (nu > 2.0) r.variance = nu / (nu - 2.0);
                r.median = 0.0;
                if (nu > p) {
                    r.abs_central = pow(nu, 0.5 * p) *
                                    exp(lgamma(0.5 * (p + 1.0)) + lgamma(0.5 * (nu - p)) - lgamma(0.5 * nu)) /
                                    sqrt_pi;
                }
            } else {
                const double nu = d.dof;
                if (nu > 2.0) r.variance = nu / (nu - 2.0) - (*mean) * (*mean);
                boost::math::students_t_distribution<double> t(nu);
                r.median = boost::math::quantile(t, 0.75);
                if (nu > p && mean) {
                    auto density = [nu](double x) { return 2.0 * detail::student_t_pdf(x, nu); };
                    r.abs_central = detail::abs_central_by_quadrature(density, 0.0, *mean, p);
                    r.numeric = true;
                }
            }
        },
        spec.law());

    if (mean) r.mean = *mean - spec.shift();
    r.median -= spec.shift();
    return r;
}

struct ContaminationSpec {
    DistSpec outlier;
    std::size_t count = 0;
};

/*
 * Returns a copy of x in which exactly c.count entries, at uniformly chosen
 * distinct positions, are replaced by draws from c.outlier. Positions are the
 * first c.count slots of a partial Fisher-Yates shuffle of the index set.
 */
inline std::vector<double> contaminate(std::span<const double> x, const ContaminationSpec& c, Stream& stream) {
    if (c.count > x.size()) throw std::invalid_argument("contamination count exceeds sample size");
    std::vector<double> out(x.begin(), x.end());
    if (c.count == 0) return out;
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < c.count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(stream.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
        out[idx[i]] = draw(c.outlier, stream);
    }
    return out;
}

}  // namespace dcmerge

#endif  // DCMERGE_DISTRIBUTIONS_HPP
