#ifndef DCMERGE_LOSS_HPP
#define DCMERGE_LOSS_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace dcmerge {

/*
 * Convex even merging loss rho.
 *
 * AbsoluteValue is rho(x) = |x| (the median). Huber(M) is quadratic on
 * [-M, M] and linear outside. derivative() is the average of the one-sided
 * derivatives, so sign(0) = 0 and the Huber derivative is clamp(x, -M, M).
 * c_rho() is the radius beyond which |rho'| >= sup|rho'| / 2.
 */
class LossSpec {
public:
    enum class Kind { AbsoluteValue, Huber };

    static LossSpec absolute_value() noexcept { return LossSpec(Kind::AbsoluteValue, 0.0); }

    static LossSpec huber(double m) {
        if (!(m > 0.0) || !std::isfinite(m)) throw std::invalid_argument("Huber parameter M must be positive and finite");
        return LossSpec(Kind::Huber, m);
    }

    Kind kind() const noexcept { return kind_; }
    double huber_m() const noexcept { return m_; }

    double value(double x) const noexcept {
        if (kind_ == Kind::AbsoluteValue) return std::fabs(x);
        const double a = std::fabs(x);
        return a <= m_ ? 0.5 * x * x : m_ * a - 0.5 * m_ * m_;
    }

    double derivative(double x) const noexcept {
        if (kind_ == Kind::AbsoluteValue) return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
        return std::clamp(x, -m_, m_);
    }

    double c_rho() const noexcept { return kind_ == Kind::AbsoluteValue ? 0.0 : 0.5 * m_; }
    double derivative_sup() const noexcept { return kind_ == Kind::AbsoluteValue ? 1.0 : m_; }

    std::string name() const {
        if (kind_ == Kind::AbsoluteValue) return "absolute_value";
        char buf[64];
        std::snprintf(buf, sizeof buf, "huber(%.12g)", m_);
        return buf;
    }

    friend bool operator==(const LossSpec&, const LossSpec&) = default;

private:
    LossSpec(Kind k, double m) noexcept : kind_(k), m_(m) {}
    Kind kind_;
    double m_;
};

}  // namespace dcmerge

#endif  // DCMERGE_LOSS_HPP
