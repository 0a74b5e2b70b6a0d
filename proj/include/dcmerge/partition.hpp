#ifndef DCMERGE_PARTITION_HPP
#define DCMERGE_PARTITION_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "rng.hpp"

namespace dcmerge {

/*
 * Assignment of sample indices 0..N-1 to k disjoint groups.
 *
 * Indices are zero-based. group_of[i] is the group of observation i and
 * groups[j] lists the members of group j in increasing index order, so a
 * one-group partition visits the sample in its original order.
 */
struct Partition {
    std::vector<std::uint32_t> group_of;
    std::vector<std::vector<std::size_t>> groups;

    std::size_t sample_size() const noexcept { return group_of.size(); }
    std::size_t group_count() const noexcept { return groups.size(); }
    std::vector<std::size_t> sizes() const {
        std::vector<std::size_t> s;
        s.reserve(groups.size());
        for (const auto& g : groups) s.push_back(g.size());
        return s;
    }
};

namespace detail {

inline void check_partition_args(std::size_t n, std::size_t k) {
    if (k == 0) throw std::invalid_argument("number of groups must be at least 1");
    if (k > n) throw std::invalid_argument("number of groups exceeds sample size");
    if (n > 0xFFFFFFFFu) throw std::invalid_argument("sample size too large for partition");
}

// Balanced labels: the first n % k groups receive one extra member.
inline std::vector<std::uint32_t> balanced_labels(std::size_t n, std::size_t k) {
    std::vector<std::uint32_t> labels(n);
    const std::size_t base = n / k, extra = n % k;
    std::size_t pos = 0;
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t len = base + (j < extra ? 1 : 0);
        std::fill_n(labels.begin() + static_cast<std::ptrdiff_t>(pos), len, static_cast<std::uint32_t>(j));
        pos += len;
    }
    return labels;
}

inline Partition from_labels(std::vector<std::uint32_t> labels, std::size_t k) {
    Partition p;
    p.groups.resize(k);
    const std::size_t n = labels.size();
    for (std::size_t j = 0; j < k; ++j) p.groups[j].reserve(n / k + 1);
    for (std::size_t i = 0; i < n; ++i) p.groups[labels[i]].push_back(i);
    p.group_of = std::move(labels);
    return p;
}

}  // namespace detail

/// Group label of every index under a uniformly random balanced partition; group_of of partition_disjoint.
inline std::vector<std::uint32_t> random_group_labels(std::size_t n, std::size_t k, Stream& stream) {
    detail::check_partition_args(n, k);
    auto labels = detail::balanced_labels(n, k);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(stream.below(i));
        std::swap(labels[i - 1], labels[j]);
    }
    return labels;
}

/*
 * Uniformly random balanced partition of N indices into k groups whose sizes
 * differ by at most one.
 *
 * Equivalent in law to shuffling 0..N-1 and cutting the result into k
 * contiguous blocks: the block labels are shuffled instead of the indices,
 * which yields the same distribution over partitions and keeps group members
 * sorted.
 */
inline Partition partition_disjoint(std::size_t n, std::size_t k, Stream& stream) {
    return detail::from_labels(random_group_labels(n, k, stream), k);
}

/// Sequential blocks 0..n_1-1, n_1..n_1+n_2-1, ...; the first N % k blocks are one longer.
inline Partition partition_contiguous(std::size_t n, std::size_t k) {
    detail::check_partition_args(n, k);
    return detail::from_labels(detail::balanced_labels(n, k), k);
}

/// ell independent uniform n-subsets of 0..N-1; draws may repeat across subsets.
struct SubsetFamily {
    std::size_t population = 0;
    std::vector<std::vector<std::size_t>> subsets;
};

/// Floyd's algorithm: a uniform n-subset of 0..N-1 using n draws. Returned sorted.
inline std::vector<std::size_t> floyd_subset(std::size_t population, std::size_t n, Stream& stream) {
    std::vector<std::size_t> chosen;
    chosen.reserve(n);
    if (n < 64) {
        for (std::size_t j = population - n; j < population; ++j) {
            const auto t = static_cast<std::size_t>(stream.below(j + 1));
            if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) chosen.push_back(t);
            else chosen.push_back(j);
        }
    } else {
        // Same algorithm with hashed membership for large n.
        std::unordered_set<std::size_t> seen;
        seen.reserve(2 * n);
        for (std::size_t j = population - n; j < population; ++j) {
            const auto t = static_cast<std::size_t>(stream.below(j + 1));
            const std::size_t pick = seen.count(t) ? j : t;
            seen.insert(pick);
            chosen.push_back(pick);
        }
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

inline SubsetFamily sample_subsets(std::size_t population, std::size_t n, std::size_t ell, Stream& stream) {
    if (n == 0) throw std::invalid_argument("subset size must be at least 1");
    if (n > population) throw std::invalid_argument("subset size exceeds sample size");
    if (ell == 0) throw std::invalid_argument("number of subsets must be at least 1");
    SubsetFamily fam;
    fam.population = population;
    fam.subsets.reserve(ell);
    for (std::size_t r = 0; r < ell; ++r) fam.subsets.push_back(floyd_subset(population, n, stream));
    return fam;
}

}  // namespace dcmerge

#endif  // DCMERGE_PARTITION_HPP
