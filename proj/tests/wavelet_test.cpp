#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "awt/features.hpp"
#include "awt/wavelet.hpp"
#include "synthetic.hpp"

namespace awt {
namespace {

// Orthonormal Haar analysis matrix built row by row (oracle, independent of
// the pyramid implementation). Rows are ordered coarsest first.
std::vector<std::vector<double>> haar_matrix(std::size_t n) {
    std::vector<std::vector<double>> rows;
    rows.emplace_back(n, 1.0 / std::sqrt(static_cast<double>(n)));
    for (std::size_t width = n; width >= 2; width /= 2) {
        const double h = 1.0 / std::sqrt(static_cast<double>(width));
        for (std::size_t start = 0; start < n; start += width) {
            std::vector<double> row(n, 0.0);
            for (std::size_t i = 0; i < width / 2; ++i) row[start + i] = h;
            for (std::size_t i = width / 2; i < width; ++i) row[start + i] = -h;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::vector<double> flatten(const WaveletCoefficients& c) {
    std::vector<double> out;
    for (const auto& l : c.levels) out.insert(out.end(), l.begin(), l.end());
    return out;
}

double sum_sq(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return s;
}

TEST(PadToPow2, ReplicatesLastValue) {
    const std::vector<double> x{1, 2, 3};
    const auto p = pad_to_pow2(x);
    EXPECT_EQ(p.values, (std::vector<double>{1, 2, 3, 3}));
    EXPECT_EQ(p.original_length, 3u);

    const std::vector<double> one{4};
    EXPECT_EQ(pad_to_pow2(one).values, (std::vector<double>{4}));
    EXPECT_EQ(pad_to_pow2(one).original_length, 1u);

    const std::vector<double> five(5, 5.0);
    EXPECT_EQ(pad_to_pow2(five).values, std::vector<double>(8, 5.0));
    EXPECT_EQ(pad_to_pow2(five).original_length, 5u);
}

TEST(PadToPow2, EmptyInputThrows) {
    const std::vector<double> empty;
    EXPECT_THROW(pad_to_pow2(empty), DataError);
}

TEST(HaarDecompose, ConstantSeriesOnlyHasScalingCoefficient) {
    const std::vector<double> x{5, 5, 5, 5};
    const auto c = haar_decompose(x);
    ASSERT_EQ(c.level_count(), 3u);
    EXPECT_NEAR(c.levels[0][0], 10.0, 1e-12);
    for (std::size_t l = 1; l < c.level_count(); ++l)
        for (double d : c.levels[l]) EXPECT_NEAR(d, 0.0, 1e-12);
}

TEST(HaarDecompose, TwoSamplesMatchExplicitMatrix) {
    const std::vector<double> x{8, 4};
    const auto c = haar_decompose(x);
    const auto m = haar_matrix(2);
    const double s0 = m[0][0] * 8 + m[0][1] * 4;
    const double s1 = m[1][0] * 8 + m[1][1] * 4;
    EXPECT_NEAR(c.levels[0][0], s0, 1e-12);
    EXPECT_NEAR(c.levels[1][0], s1, 1e-12);
    EXPECT_NEAR(c.levels[0][0], 8.4853, 1e-4);
    EXPECT_NEAR(c.levels[1][0], 2.8284, 1e-4);
}

TEST(HaarDecompose, ParsevalOnSmallExample) {
    const std::vector<double> x{8, 4, 6, 2};
    EXPECT_NEAR(sum_sq(flatten(haar_decompose(x))), 120.0, 1e-12);
}

TEST(HaarDecompose, MatchesMatrixOracleOnRandomInputs) {
    std::mt19937_64 rng(11);
    for (std::size_t n : {1u, 2u, 4u, 8u, 16u, 64u}) {
        const auto x = testing::uniform_vector(rng, n, -10, 10);
        const auto got = flatten(haar_decompose(x));
        const auto m = haar_matrix(n);
        ASSERT_EQ(got.size(), n);
        for (std::size_t r = 0; r < n; ++r) {
            double expect = 0;
            for (std::size_t i = 0; i < n; ++i) expect += m[r][i] * x[i];
            EXPECT_NEAR(got[r], expect, 1e-12) << "n=" << n << " row=" << r;
        }
    }
}

TEST(HaarDecompose, LevelShapes) {
    const std::vector<double> x(16, 1.0);
    const auto c = haar_decompose(x);
    ASSERT_EQ(c.level_count(), 5u);
    EXPECT_EQ(c.levels[0].size(), 1u);
    for (std::size_t l = 1; l < 5; ++l) EXPECT_EQ(c.levels[l].size(), std::size_t{1} << (l - 1));
    EXPECT_EQ(c.coefficient_count(), 16u);
}

TEST(HaarDecompose, NonDyadicLengthThrows) {
    const std::vector<double> x{1, 2, 3};
    EXPECT_THROW(haar_decompose(x), StructuralError);
}

TEST(HaarReconstruct, InvertsConstantCase) {
    WaveletCoefficients c;
    c.levels = {{10.0}, {0.0}, {0.0, 0.0}};
    c.original_length = 4;
    c.padded_length = 4;
    const auto x = haar_reconstruct(c);
    ASSERT_EQ(x.size(), 4u);
    for (double v : x) EXPECT_NEAR(v, 5.0, 1e-12);
}

TEST(HaarReconstruct, ZeroedFinestLevelGivesPairwiseAverages) {
    const std::vector<double> x{8, 4, 6, 2};
    auto c = haar_decompose(x);
    for (double& d : c.levels.back()) d = 0.0;
    const auto y = haar_reconstruct(c);
    // Brute-force expectation: each sample replaced by the mean of its pair.
    std::vector<double> expect(4);
    for (std::size_t i = 0; i < 4; i += 2) expect[i] = expect[i + 1] = (x[i] + x[i + 1]) / 2;
    ASSERT_EQ(y.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y[i], expect[i], 1e-12);
    EXPECT_NEAR(y[0], 6.0, 1e-12);
    EXPECT_NEAR(y[2], 4.0, 1e-12);
}

TEST(HaarReconstruct, DropsPaddingSamples) {
    const std::vector<double> x{1, 2, 3, 4, 5};
    const auto p = pad_to_pow2(x);
    const auto y = haar_reconstruct(haar_decompose(p.values, p.original_length));
    ASSERT_EQ(y.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(y[i], x[i], 1e-12);
}

TEST(HaarReconstruct, MalformedLevelsThrow) {
    WaveletCoefficients c;
    c.levels = {{1.0}, {0.0, 0.0}};
    c.original_length = 2;
    c.padded_length = 2;
    EXPECT_THROW(haar_reconstruct(c), StructuralError);
}

TEST(WaveletProperties, ParsevalRoundTripAndLinearity) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> len(1, 512);
    std::uniform_real_distribution<double> coef(-3, 3);
    for (int trial = 0; trial < 200; ++trial) {
        const auto raw_x = testing::uniform_vector(rng, len(rng), -50, 50);
        const auto px = pad_to_pow2(raw_x);
        const auto cx = haar_decompose(px.values, px.original_length);

        const double energy = sum_sq(px.values);
        EXPECT_LE(std::abs(sum_sq(flatten(cx)) - energy), 1e-9 * energy);

        const auto back = haar_reconstruct(cx);
        ASSERT_EQ(back.size(), raw_x.size());
        for (std::size_t i = 0; i < back.size(); ++i) ASSERT_NEAR(back[i], raw_x[i], 1e-9);

        const auto y = testing::uniform_vector(rng, px.values.size(), -50, 50);
        const double a = coef(rng), b = coef(rng);
        std::vector<double> mix(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) mix[i] = a * px.values[i] + b * y[i];
        const auto fx = flatten(cx), fy = flatten(haar_decompose(y)), fm = flatten(haar_decompose(mix));
        for (std::size_t i = 0; i < fm.size(); ++i) ASSERT_NEAR(fm[i], a * fx[i] + b * fy[i], 1e-9);
    }
}

TEST(PrefixFlat, SizesAndOrdering) {
    std::vector<double> x(16);
    for (std::size_t i = 0; i < 16; ++i) x[i] = static_cast<double>(i * i);
    const auto panel = make_panel("a", {x});
    EXPECT_EQ(prefix_flat(panel, 1).size(), 1u);
    EXPECT_DOUBLE_EQ(prefix_flat(panel, 1)[0], panel.per_parameter[0].levels[0][0]);
    EXPECT_EQ(prefix_flat(panel, 3).size(), 4u);

    const auto two = make_panel("b", {x, x});
    const auto flat = prefix_flat(two, 3);
    ASSERT_EQ(flat.size(), 8u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(flat[i], flat[i + 4]);
}

TEST(PrefixFlat, OutOfRangeThrows) {
    const auto panel = make_panel("a", {std::vector<double>(8, 1.0)});
    EXPECT_THROW(prefix_flat(panel, 0), RangeError);
    EXPECT_THROW(prefix_flat(panel, 5), RangeError);
    EXPECT_NO_THROW(prefix_flat(panel, 4));
}

TEST(PrefixFlat, FullResolutionDistanceEqualsRawDistance) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a1 = testing::uniform_vector(rng, 32, -5, 5), a2 = testing::uniform_vector(rng, 32, -5, 5);
        const auto b1 = testing::uniform_vector(rng, 32, -5, 5), b2 = testing::uniform_vector(rng, 32, -5, 5);
        const auto pa = make_panel("a", {a1, a2});
        const auto pb = make_panel("b", {b1, b2});
        const std::size_t full = pa.level_count();
        const double coeff = panel_dist_sq(prefix_flat(pa, full), prefix_flat(pb, full));
        const double raw = squared_distance(a1, b1) + squared_distance(a2, b2);
        EXPECT_NEAR(coeff, raw, 1e-9 * raw);
    }
}

TEST(PrefixFlat, DistanceIsNonDecreasingInResolution) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const auto pa = make_panel("a", {testing::uniform_vector(rng, 64, -5, 5)});
        const auto pb = make_panel("b", {testing::uniform_vector(rng, 64, -5, 5)});
        double prev = 0.0;
        for (std::size_t l = 1; l <= pa.level_count(); ++l) {
            const double d = panel_dist_sq(prefix_flat(pa, l), prefix_flat(pb, l));
            EXPECT_GE(d, prev);
            prev = d;
        }
    }
}

TEST(DropFinestLevels, CountsFollowLevelArithmetic) {
    const auto panel = make_panel("a", {std::vector<double>(4096, 1.0), std::vector<double>(4096, 2.0)});
    ASSERT_EQ(panel.level_count(), 13u);

    const auto same = drop_finest_levels(panel, 0);
    EXPECT_EQ(same.level_count(), 13u);
    EXPECT_EQ(same.per_parameter[0].levels, panel.per_parameter[0].levels);

    const auto one = drop_finest_levels(panel, 1);
    EXPECT_EQ(one.level_count(), 12u);
    for (const auto& c : one.per_parameter) EXPECT_EQ(c.coefficient_count(), 4096u / 2);

    const auto three = drop_finest_levels(panel, 3);
    for (const auto& c : three.per_parameter) EXPECT_EQ(c.coefficient_count(), 4096u / 8);

    EXPECT_THROW(drop_finest_levels(panel, 13), RangeError);
}

} // namespace
} // namespace awt
