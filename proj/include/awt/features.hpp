#pragma once

// Clustering features (N, LS, SS) and the squared distances built on them.
// Every distance in this library is squared; thresholds are compared against
// squared values.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "awt/error.hpp"

namespace awt {

struct ClusteringFeature {
    std::size_t n = 0;
    std::vector<double> ls;
    double ss = 0.0;

    std::size_t dim() const noexcept { return ls.size(); }

    bool operator==(const ClusteringFeature&) const = default;
};

namespace detail {

inline void require_same_dim(std::size_t a, std::size_t b, const char* where) {
    if (a != b)
        throw StructuralError(std::string(where) + ": dimension mismatch (" +
                              std::to_string(a) + " vs " + std::to_string(b) + ")");
}

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace detail

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    detail::require_same_dim(a.size(), b.size(), "squared_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline ClusteringFeature cf_from_point(std::span<const double> v) {
    return ClusteringFeature{1, std::vector<double>(v.begin(), v.end()), detail::dot(v, v)};
}

inline void cf_merge_into(ClusteringFeature& into, const ClusteringFeature& other) {
    if (into.n == 0) {
        into = other;
        return;
    }
    detail::require_same_dim(into.dim(), other.dim(), "cf_merge");
    into.n += other.n;
    for (std::size_t i = 0; i < into.ls.size(); ++i) into.ls[i] += other.ls[i];
    into.ss += other.ss;
}

inline ClusteringFeature cf_merge(ClusteringFeature a, const ClusteringFeature& b) {
    cf_merge_into(a, b);
    return a;
}

inline std::vector<double> centroid(const ClusteringFeature& cf) {
    std::vector<double> c(cf.ls);
    const double inv = 1.0 / static_cast<double>(cf.n);
    for (double& x : c) x *= inv;
    return c;
}

/// Squared average inter-cluster distance from the two features alone:
/// (Na*SSb + Nb*SSa - 2<LSa,LSb>) / (Na*Nb). Rounding can push the result
/// slightly below zero for near-identical clusters; such values are clamped
/// when within 1e-9*(SSa+SSb), anything larger is reported as an error.
inline double avg_intercluster_dist_sq(const ClusteringFeature& a, const ClusteringFeature& b) {
    detail::require_same_dim(a.dim(), b.dim(), "avg_intercluster_dist_sq");
    const double na = static_cast<double>(a.n);
    const double nb = static_cast<double>(b.n);
    const double value = (na * b.ss + nb * a.ss - 2.0 * detail::dot(a.ls, b.ls)) / (na * nb);
    if (value >= 0.0) return value;
    if (-value <= 1e-9 * (a.ss + b.ss)) return 0.0;
    throw DataError("avg_intercluster_dist_sq: negative value " + std::to_string(value) +
                    " exceeds rounding tolerance");
}

/// Mean squared distance over all cross pairs. Used as the reference for the
/// feature-based form.
inline double brute_force_avg_dist_sq(const std::vector<std::vector<double>>& a,
                                      const std::vector<std::vector<double>>& b) {
    if (a.empty() || b.empty()) throw DataError("brute_force_avg_dist_sq: empty set");
    double total = 0.0;
    for (const auto& x : a)
        for (const auto& y : b) total += squared_distance(x, y);
    return total / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

/// Squared panel distance over flat coefficient prefixes (parameters
/// concatenated). Summing per-parameter squared distances is the same as the
/// squared Euclidean distance of the concatenation.
inline double panel_dist_sq(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw StructuralError("panel_dist_sq: prefix length mismatch (" +
                              std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
    return squared_distance(x, y);
}

} // namespace awt
