#pragma once

// K-Means over successively finer wavelet prefixes, seeded from CF-tree
// leaves. k is fixed by the leaf count and never changes; clusters that
// empty out keep their last centroid.

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "awt/cftree.hpp"
#include "awt/error.hpp"
#include "awt/features.hpp"
#include "awt/wavelet.hpp"

namespace awt {

using Matrix = std::vector<std::vector<double>>;

struct LevelHistory {
    std::size_t resolution = 0;
    std::size_t iterations = 0;
    std::size_t reassignments = 0;
    /// Within-cluster SSE at level entry, then after every assign/update pair.
    std::vector<double> sse;
};

struct RefinementState {
    Matrix centroids;
    std::vector<std::size_t> assignments;
    std::size_t resolution = 0;
    std::vector<LevelHistory> history;

    std::size_t k() const noexcept { return centroids.size(); }
};

struct AssignResult {
    std::vector<std::size_t> assignments;
    std::size_t changed = 0;
};

inline RefinementState seed_from_leaves(const std::vector<LeafCluster>& leaves,
                                        std::size_t resolution) {
    if (leaves.empty()) throw DataError("seed_from_leaves: no leaves");
    std::size_t total = 0;
    for (const auto& leaf : leaves) total += leaf.member_ids.size();

    RefinementState state;
    state.resolution = resolution;
    constexpr auto unset = std::numeric_limits<std::size_t>::max();
    state.assignments.assign(total, unset);
    for (std::size_t c = 0; c < leaves.size(); ++c) {
        state.centroids.push_back(centroid(leaves[c].cf));
        for (PointId id : leaves[c].member_ids) {
            if (id >= total || state.assignments[id] != unset)
                throw StructuralError("seed_from_leaves: leaf members are not a partition of 0.." +
                                      std::to_string(total - 1));
            state.assignments[id] = c;
        }
    }
    return state;
}

/// Nearest centroid for every point, lowest cluster index on ties.
inline AssignResult assign_step(const Matrix& centroids, const Matrix& data,
                                std::span<const std::size_t> previous) {
    if (previous.size() != data.size())
        throw StructuralError("assign_step: assignment count differs from point count");
    AssignResult out;
    out.assignments.resize(data.size());
    for (std::size_t p = 0; p < data.size(); ++p) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            const double d = panel_dist_sq(data[p], centroids[c]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        out.assignments[p] = best;
        if (best != previous[p]) ++out.changed;
    }
    return out;
}

/// Member means; a cluster without members keeps its previous centroid.
inline Matrix update_step(const Matrix& previous, const Matrix& data,
                          std::span<const std::size_t> assignments) {
    Matrix sums(previous.size());
    std::vector<std::size_t> counts(previous.size(), 0);
    for (std::size_t p = 0; p < data.size(); ++p) {
        const std::size_t c = assignments[p];
        if (c >= previous.size()) throw StructuralError("update_step: cluster index out of range");
        auto& s = sums[c];
        if (s.empty()) s.assign(data[p].size(), 0.0);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += data[p][i];
        ++counts[c];
    }
    Matrix out(previous.size());
    for (std::size_t c = 0; c < previous.size(); ++c) {
        if (counts[c] == 0) {
            out[c] = previous[c];
            continue;
        }
        const double inv = 1.0 / static_cast<double>(counts[c]);
        out[c] = std::move(sums[c]);
        for (double& x : out[c]) x *= inv;
    }
    return out;
}

inline double within_cluster_sse(const Matrix& centroids, const Matrix& data,
                                 std::span<const std::size_t> assignments) {
    double total = 0.0;
    for (std::size_t p = 0; p < data.size(); ++p)
        total += panel_dist_sq(data[p], centroids[assignments[p]]);
    return total;
}

inline Matrix prefixes_at(const std::vector<WaveletPanel>& panels, std::size_t levels) {
    Matrix out;
    out.reserve(panels.size());
    for (const auto& p : panels) out.push_back(prefix_flat(p, levels));
    return out;
}

/// Re-lays a flat centroid from `from` levels to `to` levels per parameter,
/// zero-filling the newly exposed coefficients.
inline std::vector<double> project_centroid(std::span<const double> c, std::size_t parameters,
                                            std::size_t from, std::size_t to) {
    const std::size_t old_block = prefix_size(from);
    const std::size_t new_block = prefix_size(to);
    if (c.size() != parameters * old_block)
        throw StructuralError("project_centroid: centroid length does not match resolution");
    std::vector<double> out(parameters * new_block, 0.0);
    for (std::size_t p = 0; p < parameters; ++p)
        for (std::size_t i = 0; i < old_block; ++i) out[p * new_block + i] = c[p * old_block + i];
    return out;
}

inline RefinementState refine(const std::vector<WaveletPanel>& data,
                              const std::vector<LeafCluster>& leaves, std::size_t start_level,
                              std::size_t max_level, std::size_t max_iters_per_level) {
    if (data.empty()) throw DataError("refine: no data");
    const std::size_t available = data.front().level_count();
    if (start_level == 0 || start_level > max_level || max_level > available)
        throw RangeError("refine: need 1 <= start (" + std::to_string(start_level) +
                         ") <= max (" + std::to_string(max_level) + ") <= available (" +
                         std::to_string(available) + ")");
    if (max_iters_per_level == 0) throw ConfigError("refine: max_iters_per_level must be positive");

    RefinementState state = seed_from_leaves(leaves, start_level);
    if (state.assignments.size() != data.size())
        throw StructuralError("refine: leaves cover " + std::to_string(state.assignments.size()) +
                              " points, data has " + std::to_string(data.size()));
    const std::size_t parameters = data.front().parameter_count();

    for (std::size_t level = start_level; level <= max_level; ++level) {
        const Matrix points = prefixes_at(data, level);
        if (level != state.resolution) {
            for (auto& c : state.centroids)
                c = project_centroid(c, parameters, state.resolution, level);
            state.resolution = level;
            state.centroids = update_step(state.centroids, points, state.assignments);
        }
        if (state.centroids.front().size() != points.front().size())
            throw StructuralError("refine: seed centroids do not match the start resolution");

        LevelHistory h;
        h.resolution = level;
        h.sse.push_back(within_cluster_sse(state.centroids, points, state.assignments));
        for (std::size_t it = 0; it < max_iters_per_level; ++it) {
            auto step = assign_step(state.centroids, points, state.assignments);
            state.assignments = std::move(step.assignments);
            state.centroids = update_step(state.centroids, points, state.assignments);
            h.sse.push_back(within_cluster_sse(state.centroids, points, state.assignments));
            h.reassignments += step.changed;
            ++h.iterations;
            if (step.changed == 0) break;
        }
        const bool settled = h.reassignments == 0;
        state.history.push_back(std::move(h));
        if (settled) break;
    }
    return state;
}

} // namespace awt
