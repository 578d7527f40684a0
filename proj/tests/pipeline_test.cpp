#include <algorithm>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "awt/evaluate.hpp"
#include "awt/pipeline.hpp"
#include "synthetic.hpp"

namespace awt {
namespace {

std::vector<std::size_t> sizes_of(std::initializer_list<std::size_t> s) { return s; }

// Membership check: each cluster's member list agrees with the assignment map
// and every station appears exactly once.
void expect_partition(const ClusteringResult& r, std::size_t n) {
    std::set<std::string> seen;
    for (const auto& c : r.clusters)
        for (const auto& id : c.members) {
            EXPECT_TRUE(seen.insert(id).second) << id;
            EXPECT_EQ(r.assignments.at(id), c.cluster_id);
        }
    EXPECT_EQ(seen.size(), n);
    EXPECT_EQ(r.k, r.clusters.size());
}

TEST(AutoCutoff, StepBetweenEightAndTwo) {
    // Halving sizes, then a factor-4 step from 8 to 2.
    const auto s = sizes_of({300, 160, 80, 40, 20, 10, 8, 2, 1, 1});
    const auto d = auto_cutoff(s);
    ASSERT_TRUE(d.boundary);
    EXPECT_EQ(*d.boundary, 6u);
    EXPECT_DOUBLE_EQ(d.max_ratio, 4.0);
}

TEST(AutoCutoff, LargestRatioWinsEvenWhenEarlier) {
    // 80 -> 8 is the steepest step in this list (ratio 10).
    const auto s = sizes_of({300, 120, 80, 8, 2, 1, 1});
    const auto d = auto_cutoff(s);
    ASSERT_TRUE(d.boundary);
    EXPECT_EQ(*d.boundary, 2u);
    EXPECT_DOUBLE_EQ(d.max_ratio, 10.0);
}

TEST(AutoCutoff, NoClearStep) {
    EXPECT_FALSE(auto_cutoff(sizes_of({10, 9, 8, 7})).boundary);
    EXPECT_FALSE(auto_cutoff(sizes_of({8, 4, 2, 1})).boundary); // exactly 2 is not a step
}

TEST(AutoCutoff, TwoClusters) {
    const auto d = auto_cutoff(sizes_of({100, 1}));
    ASSERT_TRUE(d.boundary);
    EXPECT_EQ(*d.boundary, 0u);
    EXPECT_DOUBLE_EQ(d.max_ratio, 100.0);
}

TEST(AutoCutoff, TiesGoToLatest) {
    const auto d = auto_cutoff(sizes_of({27, 9, 3, 1}));
    ASSERT_TRUE(d.boundary);
    EXPECT_EQ(*d.boundary, 2u);
}

TEST(AutoCutoff, DegenerateAndInvalid) {
    EXPECT_FALSE(auto_cutoff(sizes_of({5})).boundary);
    EXPECT_FALSE(auto_cutoff(std::vector<std::size_t>{}).boundary);
    EXPECT_THROW(auto_cutoff(sizes_of({1, 5})), DataError);
    EXPECT_THROW(auto_cutoff(sizes_of({5, 0})), DataError);
}

TEST(InsertionOrder, IdentityWithoutSeedAndPermutationWithSeed) {
    const auto plain = detail::insertion_order(10, std::nullopt);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(plain[i], i);

    const auto a = detail::insertion_order(50, 7);
    const auto b = detail::insertion_order(50, 7);
    EXPECT_EQ(a, b);
    auto sorted = a;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
    EXPECT_NE(a, detail::insertion_order(50, 8));
}

TEST(AwtCluster, SingleStation) {
    const std::vector<WaveletPanel> panels{make_panel("only", {{1, 2, 3, 4}})};
    AWTConfig cfg;
    cfg.tree_levels = 2;
    const auto r = awt_cluster(panels, cfg);
    EXPECT_EQ(r.k, 1u);
    ASSERT_EQ(r.clusters.size(), 1u);
    EXPECT_EQ(r.clusters[0].members, (std::vector<std::string>{"only"}));
    EXPECT_FALSE(r.clusters[0].is_outlier);
}

TEST(AwtCluster, DuplicatedStationsShareACluster) {
    auto set = testing::planted_sinusoids(12, 3, 6, 0, 32);
    set.panels.push_back(set.panels[4]);
    set.panels.back().station_id = "dup";
    for (double t : {1e-6, 0.5, 1.0, 50.0}) {
        AWTConfig cfg;
        cfg.threshold = t;
        const auto r = awt_cluster(set.panels, cfg);
        EXPECT_EQ(r.assignments.at("dup"), r.assignments.at(set.panels[4].station_id)) << t;
        const auto b = birch_baseline(set.panels, cfg);
        EXPECT_EQ(b.assignments.at("dup"), b.assignments.at(set.panels[4].station_id)) << t;
    }
}

TEST(AwtCluster, PlantedClustersAndOutliers) {
    const auto set = testing::planted_sinusoids(1);
    const auto r = awt_cluster(set.panels, AWTConfig{});
    expect_partition(r, set.panels.size());
    EXPECT_EQ(r.k, r.tree_leaf_count);

    std::size_t inlier_clusters = 0;
    for (const auto& c : r.clusters) inlier_clusters += !c.is_outlier && !c.members.empty();
    EXPECT_GE(inlier_clusters, 5u);

    for (std::size_t i = 0; i < set.panels.size(); ++i) {
        if (!set.is_outlier(i)) continue;
        const auto& c = r.clusters[r.assignments.at(set.panels[i].station_id)];
        EXPECT_LE(c.members.size(), 2u);
        EXPECT_TRUE(c.is_outlier);
    }

    // Inliers are recovered exactly.
    std::vector<std::size_t> got, truth;
    const auto labels = r.labels();
    for (std::size_t i = 0; i < set.panels.size(); ++i)
        if (!set.is_outlier(i)) {
            got.push_back(labels[i]);
            truth.push_back(set.truth[i]);
        }
    EXPECT_DOUBLE_EQ(nmi(got, truth), 1.0);
}

TEST(BirchBaseline, PlantedOutliersAreSingletons) {
    const auto set = testing::planted_sinusoids(2);
    AWTConfig cfg;
    cfg.mode = Mode::birch;
    const auto r = birch_baseline(set.panels, cfg);
    expect_partition(r, set.panels.size());
    EXPECT_TRUE(r.refinement.empty());
    EXPECT_EQ(r.max_resolution, set.panels.front().level_count());
    for (std::size_t i = 0; i < set.panels.size(); ++i) {
        if (!set.is_outlier(i)) continue;
        const auto& c = r.clusters[r.assignments.at(set.panels[i].station_id)];
        EXPECT_EQ(c.members.size(), 1u);
        EXPECT_TRUE(c.is_outlier);
    }
}

TEST(BirchBaseline, MatchesAwtOnSeparableBlobs) {
    const auto set = testing::planted_sinusoids(3, 2, 20, 0, 64);
    AWTConfig cfg;
    const auto a = awt_cluster(set.panels, cfg);
    cfg.mode = Mode::birch;
    const auto b = awt_cluster(set.panels, cfg);
    EXPECT_EQ(a.k, 2u);
    EXPECT_EQ(b.k, 2u);
    EXPECT_DOUBLE_EQ(nmi(a.assignments, b.assignments), 1.0);
}

TEST(Outliers, FallbackAndOverride) {
    // Sizes 4,4,1 have a step of 4: the singleton is flagged by the step rule.
    std::vector<WaveletPanel> panels;
    for (int i = 0; i < 4; ++i) panels.push_back(make_panel("a" + std::to_string(i), {{0, 0, 0, 0}}));
    for (int i = 0; i < 4; ++i) panels.push_back(make_panel("b" + std::to_string(i), {{9, 9, 9, 9}}));
    panels.push_back(make_panel("c", {{-40, 40, -40, 40}}));
    AWTConfig cfg;
    cfg.tree_levels = 3;
    auto r = awt_cluster(panels, cfg);
    ASSERT_EQ(r.k, 3u);
    EXPECT_TRUE(r.cutoff.boundary);
    EXPECT_EQ(r.outlier_count(), 1u);
    EXPECT_TRUE(r.clusters[r.assignments.at("c")].is_outlier);

    // Explicit override skips the step rule.
    cfg.outlier_max_size = 4;
    r = awt_cluster(panels, cfg);
    EXPECT_TRUE(r.cutoff.used_fallback);
    EXPECT_EQ(r.outlier_count(), 3u);

    // BIRCH defaults to size <= 2 with no step rule.
    cfg.outlier_max_size.reset();
    cfg.mode = Mode::birch;
    r = awt_cluster(panels, cfg);
    EXPECT_TRUE(r.cutoff.used_fallback);
    EXPECT_EQ(r.cutoff.outlier_max_size, 2u);
    EXPECT_EQ(r.outlier_count(), 1u);
}

TEST(Outliers, EvenSizesFallBackToSingletons) {
    std::vector<WaveletPanel> panels;
    for (int i = 0; i < 3; ++i) panels.push_back(make_panel("a" + std::to_string(i), {{0, 0}}));
    for (int i = 0; i < 3; ++i) panels.push_back(make_panel("b" + std::to_string(i), {{20, 20}}));
    AWTConfig cfg;
    cfg.tree_levels = 2;
    const auto r = awt_cluster(panels, cfg);
    EXPECT_EQ(r.k, 2u);
    EXPECT_FALSE(r.cutoff.boundary);
    EXPECT_TRUE(r.cutoff.used_fallback);
    EXPECT_EQ(r.cutoff.outlier_max_size, 1u);
    EXPECT_EQ(r.outlier_count(), 0u);
}

TEST(Thresholds, Extremes) {
    const auto set = testing::planted_sinusoids(4, 3, 10, 2, 64);
    const std::vector<double> grid{1e-12, 1.0, 1e9};
    const auto ks = count_clusters_for_threshold(set.panels, grid, AWTConfig{});
    ASSERT_EQ(ks.size(), 3u);
    EXPECT_EQ(ks[0].second, set.panels.size());
    EXPECT_EQ(ks[2].second, 1u);

    AWTConfig cfg;
    cfg.threshold = 1e9;
    EXPECT_EQ(awt_cluster(set.panels, cfg).k, 1u);
}

TEST(Thresholds, GridErrors) {
    const auto set = testing::planted_sinusoids(4, 2, 3, 0, 16);
    EXPECT_THROW(count_clusters_for_threshold(set.panels, std::vector<double>{}, AWTConfig{}),
                 ConfigError);
    EXPECT_THROW(count_clusters_for_threshold(set.panels, std::vector<double>{2, 1}, AWTConfig{}),
                 ConfigError);
}

TEST(AwtCluster, DropLevelsKeepsK) {
    const auto set = testing::planted_sinusoids(5);
    AWTConfig cfg;
    const auto full = awt_cluster(set.panels, cfg);
    for (std::size_t d = 1; d <= 3; ++d) {
        cfg.drop_levels = d;
        const auto r = awt_cluster(set.panels, cfg);
        EXPECT_EQ(r.k, full.k);
        EXPECT_EQ(r.k, r.tree_leaf_count);
        EXPECT_EQ(r.max_resolution, full.available_levels - d);
    }
}

TEST(AwtCluster, ConfigErrors) {
    const auto set = testing::planted_sinusoids(6, 2, 3, 0, 16); // 5 levels
    AWTConfig cfg;
    cfg.tree_levels = 4;
    cfg.drop_levels = 2;
    EXPECT_THROW(awt_cluster(set.panels, cfg), ConfigError);
    cfg = {};
    cfg.threshold = 0;
    EXPECT_THROW(awt_cluster(set.panels, cfg), ConfigError);
    cfg = {};
    cfg.drop_levels = 5;
    EXPECT_THROW(awt_cluster(set.panels, cfg), ConfigError);
    cfg = {};
    cfg.tree_levels = 0;
    EXPECT_THROW(awt_cluster(set.panels, cfg), ConfigError);
    EXPECT_THROW(awt_cluster({}, AWTConfig{}), DataError);

    auto uneven = set.panels;
    uneven.push_back(make_panel("short", {std::vector<double>(8, 1.0)}));
    EXPECT_THROW(awt_cluster(uneven, AWTConfig{}), StructuralError);

    auto dup = set.panels;
    dup.push_back(set.panels[0]);
    EXPECT_THROW(awt_cluster(dup, AWTConfig{}), DataError);
}

TEST(AwtCluster, ShuffleIsDeterministicPerSeed) {
    const auto set = testing::planted_sinusoids(7);
    AWTConfig cfg;
    cfg.shuffle_seed = 99;
    const auto a = awt_cluster(set.panels, cfg);
    const auto b = awt_cluster(set.panels, cfg);
    EXPECT_EQ(a.assignments, b.assignments);
    for (std::size_t c = 0; c < a.k; ++c) EXPECT_EQ(a.clusters[c].centroid, b.clusters[c].centroid);
}

} // namespace
} // namespace awt
