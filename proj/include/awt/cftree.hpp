#pragma once

// Clustering-feature tree with single-pass insertion.
//
// The root is an internal node once the tree is non-empty. Leaves are the
// leaf clusters themselves: a CF plus the ids of the points it absorbed.
// All leaves sit at the same depth because height only grows by root splits.

#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "awt/error.hpp"
#include "awt/features.hpp"

namespace awt {

using PointId = std::size_t;

struct CFNode {
    ClusteringFeature cf;
    std::vector<CFNode> children;
    std::vector<PointId> member_ids;

    bool is_leaf() const noexcept { return children.empty(); }
};

struct LeafCluster {
    ClusteringFeature cf;
    std::vector<PointId> member_ids;
};

/// Farthest-pair split of an internal node into two siblings. Seeds are the
/// pair of children with the largest squared average inter-cluster distance
/// (first pair in (i, j) order on ties); the remaining children go to the
/// nearer seed, the first seed on ties. Child order is preserved.
inline std::pair<CFNode, CFNode> split_node(CFNode node) {
    if (node.is_leaf()) throw StructuralError("split_node: cannot split a leaf");
    auto& kids = node.children;
    if (kids.size() < 2) throw StructuralError("split_node: need at least two children");

    std::size_t seed_a = 0;
    std::size_t seed_b = 1;
    double widest = -1.0;
    for (std::size_t i = 0; i < kids.size(); ++i)
        for (std::size_t j = i + 1; j < kids.size(); ++j) {
            const double d = avg_intercluster_dist_sq(kids[i].cf, kids[j].cf);
            if (d > widest) {
                widest = d;
                seed_a = i;
                seed_b = j;
            }
        }

    std::vector<bool> to_first(kids.size());
    for (std::size_t i = 0; i < kids.size(); ++i) {
        if (i == seed_a || i == seed_b) {
            to_first[i] = i == seed_a;
            continue;
        }
        const double da = avg_intercluster_dist_sq(kids[i].cf, kids[seed_a].cf);
        const double db = avg_intercluster_dist_sq(kids[i].cf, kids[seed_b].cf);
        to_first[i] = da <= db;
    }

    CFNode first;
    CFNode second;
    for (std::size_t i = 0; i < kids.size(); ++i) {
        CFNode& dst = to_first[i] ? first : second;
        cf_merge_into(dst.cf, kids[i].cf);
        dst.children.push_back(std::move(kids[i]));
    }
    return {std::move(first), std::move(second)};
}

class CFTree {
public:
    CFTree(double threshold, std::size_t branching_factor, std::size_t dimensionality)
        : threshold_(threshold), branching_factor_(branching_factor), dim_(dimensionality) {
        if (!(threshold > 0.0)) throw ConfigError("threshold must be positive");
        if (branching_factor < 2) throw ConfigError("branching factor must be at least 2");
        if (dimensionality == 0) throw ConfigError("dimensionality must be positive");
    }

    double threshold() const noexcept { return threshold_; }
    std::size_t branching_factor() const noexcept { return branching_factor_; }
    std::size_t dimensionality() const noexcept { return dim_; }
    const CFNode& root() const noexcept { return root_; }
    bool empty() const noexcept { return root_.cf.n == 0; }
    std::size_t size() const noexcept { return root_.cf.n; }

    std::size_t height() const noexcept {
        std::size_t h = 0;
        for (const CFNode* n = &root_; !n->is_leaf(); n = &n->children.front()) ++h;
        return h;
    }

    void insert(PointId id, std::span<const double> v) {
        if (v.size() != dim_)
            throw StructuralError("CFTree::insert: point has dimension " +
                                  std::to_string(v.size()) + ", tree expects " +
                                  std::to_string(dim_));
        if (!ids_.insert(id).second)
            throw DataError("CFTree::insert: duplicate point id " + std::to_string(id));

        const ClusteringFeature point = cf_from_point(v);
        if (empty()) {
            root_.cf = point;
            root_.children.push_back(CFNode{point, {}, {id}});
            return;
        }
        insert_below(root_, point, id);
        if (root_.children.size() > branching_factor_) {
            auto [a, b] = split_node(std::move(root_));
            root_ = CFNode{};
            cf_merge_into(root_.cf, a.cf);
            cf_merge_into(root_.cf, b.cf);
            root_.children.push_back(std::move(a));
            root_.children.push_back(std::move(b));
        }
    }

    /// Leaf clusters in left-to-right order.
    std::vector<LeafCluster> leaf_clusters() const {
        if (empty()) throw DataError("leaf_clusters: tree is empty");
        std::vector<LeafCluster> out;
        collect(root_, out);
        return out;
    }

    std::size_t leaf_count() const { return empty() ? 0 : count_leaves(root_); }

    void dump_text(std::ostream& os) const { dump(os, root_, 0); }

private:
    static std::size_t nearest_child(const CFNode& node, std::span<const double> v) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < node.children.size(); ++i) {
            const double d = squared_distance(centroid(node.children[i].cf), v);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        return best;
    }

    void insert_below(CFNode& node, const ClusteringFeature& point, PointId id) {
        const std::size_t idx = nearest_child(node, point.ls);
        CFNode& child = node.children[idx];
        if (child.is_leaf()) {
            if (avg_intercluster_dist_sq(child.cf, point) <= threshold_) {
                cf_merge_into(child.cf, point);
                child.member_ids.push_back(id);
            } else {
                node.children.push_back(CFNode{point, {}, {id}});
            }
        } else {
            insert_below(child, point, id);
            if (child.children.size() > branching_factor_) {
                auto [a, b] = split_node(std::move(child));
                node.children[idx] = std::move(a);
                node.children.insert(node.children.begin() + static_cast<std::ptrdiff_t>(idx) + 1,
                                     std::move(b));
            }
        }
        cf_merge_into(node.cf, point);
    }

    static void collect(const CFNode& node, std::vector<LeafCluster>& out) {
        if (node.is_leaf()) {
            out.push_back(LeafCluster{node.cf, node.member_ids});
            return;
        }
        for (const auto& c : node.children) collect(c, out);
    }

    static std::size_t count_leaves(const CFNode& node) {
        if (node.is_leaf()) return 1;
        std::size_t n = 0;
        for (const auto& c : node.children) n += count_leaves(c);
        return n;
    }

    static void dump(std::ostream& os, const CFNode& node, int depth) {
        os << std::string(static_cast<std::size_t>(depth) * 2, ' ')
           << (node.is_leaf() ? "leaf" : "node") << " n=" << node.cf.n << " ss=" << node.cf.ss;
        if (node.is_leaf()) {
            os << " members=[";
            for (std::size_t i = 0; i < node.member_ids.size(); ++i)
                os << (i ? "," : "") << node.member_ids[i];
            os << "]";
        }
        os << '\n';
        for (const auto& c : node.children) dump(os, c, depth + 1);
    }

    double threshold_;
    std::size_t branching_factor_;
    std::size_t dim_;
    CFNode root_;
    std::unordered_set<PointId> ids_;
};

} // namespace awt
