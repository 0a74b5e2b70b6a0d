#ifndef DCMERGE_RNG_HPP
#define DCMERGE_RNG_HPP

#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string_view>

namespace dcmerge {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t mix(std::uint64_t h, std::uint64_t v) noexcept {
    std::uint64_t s = h ^ (v + 0x632BE59BD9B4E019ULL + (h << 6) + (h >> 2));
    return splitmix64(s);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
}

// FNV-1a; used to turn a stream tag such as "part" into a key component.
constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace detail

/// One component of a stream key: either an integer index or a short tag.
class StreamKey {
public:
    template <std::integral T>
    constexpr StreamKey(T v) noexcept : value_(static_cast<std::uint64_t>(v)) {}
    constexpr StreamKey(std::string_view tag) noexcept : value_(detail::hash_tag(tag)) {}
    constexpr StreamKey(const char* tag) noexcept : StreamKey(std::string_view(tag)) {}
    constexpr std::uint64_t value() const noexcept { return value_; }

private:
    std::uint64_t value_;
};

/*
 * Seeded random stream.
 *
 * Streams are derived by hashing a master seed together with a path of keys,
 * stream(master, r, "part", k), so that every replicate of a Monte Carlo
 * experiment owns an independent generator whose output does not depend on
 * the order in which replicates are executed. The generator behind a stream
 * is xoshiro256**. All variate transforms below are implemented here rather
 * than taken from <random>, whose distributions are implementation-defined,
 * so results are bit-identical across standard libraries.
 */
class Stream {
public:
    using result_type = std::uint64_t;

    explicit Stream(std::uint64_t master_seed) noexcept : Stream(master_seed, {}) {}

    Stream(std::uint64_t master_seed, std::initializer_list<StreamKey> path) noexcept {
        std::uint64_t h = detail::mix(0x5DC3A7F1E2B49C0DULL, master_seed);
        for (const auto& key : path) h = detail::mix(h, key.value());
        std::uint64_t sm = h;
        for (auto& word : state_) word = detail::splitmix64(sm);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_positive() noexcept { return 1.0 - uniform(); }

    /// Uniform integer in [0, bound), Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0) throw std::invalid_argument("Stream::below: bound must be positive");
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via the Marsaglia polar method; caches the second variate.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    /// Gamma(shape, 1) by Marsaglia-Tsang; shape < 1 uses the U^{1/shape} boost.
    double gamma(double shape) {
        if (!(shape > 0.0)) throw std::invalid_argument("Stream::gamma: shape must be positive");
        if (shape < 1.0) {
            const double g = gamma(shape + 1.0);
            return g * std::pow(uniform_positive(), 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_positive();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    bool operator==(const Stream& other) const noexcept {
        return state_ == other.state_ && has_spare_ == other.has_spare_ &&
               (!has_spare_ || spare_ == other.spare_);
    }

private:
    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace dcmerge

#endif  // DCMERGE_RNG_HPP
