#pragma once

// End-to-end clustering: CF tree over a coarse wavelet prefix, I-Kmeans
// refinement up to the finest retained level, and size-based outlier
// flagging on the final clusters. The BIRCH baseline builds the tree over the
// full retained resolution and reports its leaves directly.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "awt/cftree.hpp"
#include "awt/error.hpp"
#include "awt/ikmeans.hpp"
#include "awt/wavelet.hpp"

namespace awt {

enum class Mode { awt, birch };

inline const char* to_string(Mode m) noexcept { return m == Mode::awt ? "awt" : "birch"; }

struct AWTConfig {
    double threshold = 1.0; // squared-distance units
    std::size_t tree_levels = 3;
    std::size_t drop_levels = 0;
    std::size_t branching_factor = 8;
    std::size_t max_iters_per_level = 100;
    std::optional<std::size_t> outlier_max_size;
    Mode mode = Mode::awt;
    std::optional<std::uint64_t> shuffle_seed;

    /// Size at or below which a cluster is an outlier when no size step decides.
    std::size_t fallback_outlier_size() const noexcept {
        if (outlier_max_size) return *outlier_max_size;
        return mode == Mode::awt ? 1 : 2;
    }
};

struct Cluster {
    std::size_t cluster_id = 0;
    std::vector<std::string> members; // input order
    std::vector<double> centroid;
    bool is_outlier = false;
};

struct CutoffDecision {
    /// Sorted position after which clusters are outliers, if a clear step exists.
    std::optional<std::size_t> boundary;
    double max_ratio = 0.0;
    bool used_fallback = false;
    std::size_t outlier_max_size = 0; // meaningful when used_fallback
};

struct ClusteringResult {
    AWTConfig config;
    std::vector<Cluster> clusters;
    std::map<std::string, std::size_t> assignments;
    std::vector<std::string> station_order; // input order
    std::size_t k = 0;
    std::size_t tree_leaf_count = 0;
    std::size_t available_levels = 0;
    std::size_t max_resolution = 0;
    std::size_t centroid_resolution = 0;
    CutoffDecision cutoff;
    std::vector<LevelHistory> refinement;

    std::size_t outlier_count() const noexcept {
        return static_cast<std::size_t>(std::count_if(
            clusters.begin(), clusters.end(), [](const Cluster& c) { return c.is_outlier; }));
    }

    /// Labels aligned with station_order.
    std::vector<std::size_t> labels() const {
        std::vector<std::size_t> out;
        out.reserve(station_order.size());
        for (const auto& id : station_order) out.push_back(assignments.at(id));
        return out;
    }
};

/// Largest consecutive size ratio in a descending size list; ties go to the
/// latest position. A step counts as clear only when the ratio exceeds 2.
inline CutoffDecision auto_cutoff(std::span<const std::size_t> sorted_sizes) {
    CutoffDecision d;
    if (sorted_sizes.size() < 2) return d;
    std::size_t at = 0;
    for (std::size_t i = 0; i + 1 < sorted_sizes.size(); ++i) {
        if (sorted_sizes[i] < sorted_sizes[i + 1])
            throw DataError("auto_cutoff: sizes must be sorted in descending order");
        if (sorted_sizes[i + 1] == 0) throw DataError("auto_cutoff: sizes must be positive");
        const double r = static_cast<double>(sorted_sizes[i]) /
                         static_cast<double>(sorted_sizes[i + 1]);
        if (r >= d.max_ratio) {
            d.max_ratio = r;
            at = i;
        }
    }
    if (d.max_ratio > 2.0) d.boundary = at;
    return d;
}

namespace detail {

/// Fisher-Yates driven by mt19937_64 with rejection sampling, so the
/// permutation does not depend on the standard library's distributions.
inline std::vector<std::size_t> insertion_order(std::size_t n, std::optional<std::uint64_t> seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (!seed || n < 2) return order;
    std::mt19937_64 rng(*seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::uint64_t bound = i + 1;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t r;
        do {
            r = rng();
        } while (r >= limit);
        std::swap(order[i], order[static_cast<std::size_t>(r % bound)]);
    }
    return order;
}

struct PanelShape {
    std::size_t parameters = 0;
    std::size_t levels = 0;
};

inline PanelShape validate(const std::vector<WaveletPanel>& panels, const AWTConfig& config) {
    if (panels.empty()) throw DataError("no stations to cluster");
    PanelShape shape{panels.front().parameter_count(), panels.front().level_count()};
    if (shape.parameters == 0) throw DataError("stations carry no parameters");
    for (const auto& p : panels) {
        if (p.parameter_count() != shape.parameters)
            throw StructuralError("station " + p.station_id + " has a different parameter count");
        for (const auto& c : p.per_parameter)
            if (c.level_count() != shape.levels)
                throw StructuralError("station " + p.station_id +
                                      " has a different wavelet level structure");
    }
    if (!(config.threshold > 0.0)) throw ConfigError("threshold must be positive");
    if (config.branching_factor < 2) throw ConfigError("branching factor must be at least 2");
    if (config.max_iters_per_level == 0)
        throw ConfigError("max iterations per level must be positive");
    if (config.tree_levels == 0) throw ConfigError("tree levels must be at least 1");
    if (config.drop_levels >= shape.levels)
        throw ConfigError("cannot drop " + std::to_string(config.drop_levels) + " of " +
                          std::to_string(shape.levels) + " wavelet levels");
    if (config.tree_levels > shape.levels - config.drop_levels)
        throw ConfigError("tree levels (" + std::to_string(config.tree_levels) +
                          ") exceed available levels minus dropped levels (" +
                          std::to_string(shape.levels - config.drop_levels) + ")");
    return shape;
}

inline CFTree build_tree(const std::vector<WaveletPanel>& panels, std::size_t levels,
                         const AWTConfig& config) {
    const std::size_t dim = panels.front().parameter_count() * prefix_size(levels);
    CFTree tree(config.threshold, config.branching_factor, dim);
    for (std::size_t idx : insertion_order(panels.size(), config.shuffle_seed))
        tree.insert(idx, prefix_flat(panels[idx], levels));
    return tree;
}

inline void flag_outliers(ClusteringResult& r) {
    std::vector<const Cluster*> ranked;
    for (const auto& c : r.clusters)
        if (!c.members.empty()) ranked.push_back(&c);
    std::stable_sort(ranked.begin(), ranked.end(), [](const Cluster* a, const Cluster* b) {
        return a->members.size() > b->members.size();
    });
    if (ranked.size() < 2) return;

    std::vector<std::size_t> sizes;
    for (const auto* c : ranked) sizes.push_back(c->members.size());

    std::size_t limit = r.config.fallback_outlier_size();
    if (r.config.mode == Mode::awt && !r.config.outlier_max_size) {
        r.cutoff = auto_cutoff(sizes);
        if (r.cutoff.boundary) limit = sizes[*r.cutoff.boundary + 1];
    }
    if (!r.cutoff.boundary) {
        r.cutoff.used_fallback = true;
        r.cutoff.outlier_max_size = limit;
    }
    for (auto& c : r.clusters) c.is_outlier = !c.members.empty() && c.members.size() <= limit;
}

inline ClusteringResult assemble(const std::vector<WaveletPanel>& panels, const AWTConfig& config,
                                 const Matrix& centroids, std::span<const std::size_t> labels) {
    ClusteringResult r;
    r.config = config;
    r.k = centroids.size();
    r.clusters.resize(centroids.size());
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        r.clusters[c].cluster_id = c;
        r.clusters[c].centroid = centroids[c];
    }
    for (std::size_t i = 0; i < panels.size(); ++i) {
        const auto& id = panels[i].station_id;
        if (!r.assignments.emplace(id, labels[i]).second)
            throw DataError("duplicate station id " + id);
        r.station_order.push_back(id);
        r.clusters[labels[i]].members.push_back(id);
    }
    flag_outliers(r);
    return r;
}

} // namespace detail

inline ClusteringResult birch_baseline(const std::vector<WaveletPanel>& panels,
                                       const AWTConfig& config) {
    const auto shape = detail::validate(panels, config);
    const std::size_t max_level = shape.levels - config.drop_levels;
    std::vector<WaveletPanel> reduced;
    reduced.reserve(panels.size());
    for (const auto& p : panels) reduced.push_back(drop_finest_levels(p, config.drop_levels));

    const CFTree tree = detail::build_tree(reduced, max_level, config);
    const auto leaves = tree.leaf_clusters();
    Matrix centroids;
    std::vector<std::size_t> labels(panels.size());
    for (std::size_t c = 0; c < leaves.size(); ++c) {
        centroids.push_back(centroid(leaves[c].cf));
        for (PointId id : leaves[c].member_ids) labels[id] = c;
    }
    auto r = detail::assemble(panels, config, centroids, labels);
    r.tree_leaf_count = leaves.size();
    r.available_levels = shape.levels;
    r.max_resolution = max_level;
    r.centroid_resolution = max_level;
    return r;
}

inline ClusteringResult awt_cluster(const std::vector<WaveletPanel>& panels,
                                    const AWTConfig& config) {
    if (config.mode == Mode::birch) return birch_baseline(panels, config);
    const auto shape = detail::validate(panels, config);
    const std::size_t max_level = shape.levels - config.drop_levels;
    std::vector<WaveletPanel> reduced;
    reduced.reserve(panels.size());
    for (const auto& p : panels) reduced.push_back(drop_finest_levels(p, config.drop_levels));

    const CFTree tree = detail::build_tree(reduced, config.tree_levels, config);
    const auto leaves = tree.leaf_clusters();
    RefinementState state =
        refine(reduced, leaves, config.tree_levels, max_level, config.max_iters_per_level);

    auto r = detail::assemble(panels, config, state.centroids, state.assignments);
    r.tree_leaf_count = leaves.size();
    r.available_levels = shape.levels;
    r.max_resolution = max_level;
    r.centroid_resolution = state.resolution;
    r.refinement = std::move(state.history);
    return r;
}

/// Leaf count of the CF tree for each threshold. Uses tree_levels in AWT
/// mode and the full retained resolution in BIRCH mode.
inline std::vector<std::pair<double, std::size_t>>
count_clusters_for_threshold(const std::vector<WaveletPanel>& panels,
                             std::span<const double> thresholds, const AWTConfig& config) {
    if (thresholds.empty()) throw ConfigError("threshold grid is empty");
    if (!std::is_sorted(thresholds.begin(), thresholds.end()))
        throw ConfigError("threshold grid must be ascending");
    const auto shape = detail::validate(panels, config);
    const std::size_t max_level = shape.levels - config.drop_levels;
    const std::size_t levels = config.mode == Mode::awt ? config.tree_levels : max_level;
    std::vector<WaveletPanel> reduced;
    for (const auto& p : panels) reduced.push_back(drop_finest_levels(p, config.drop_levels));

    std::vector<std::pair<double, std::size_t>> out;
    for (double t : thresholds) {
        AWTConfig c = config;
        c.threshold = t;
        out.emplace_back(t, detail::build_tree(reduced, levels, c).leaf_count());
    }
    return out;
}

} // namespace awt
