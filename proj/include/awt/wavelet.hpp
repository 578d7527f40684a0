#pragma once

// Orthonormal Haar decomposition with coarsest-first level storage.
//
// Level 0 holds the single scaling coefficient, level l >= 1 holds
// 2^(l-1) detail coefficients. The transform is orthonormal, so squared
// distances between full coefficient sets equal squared distances between
// the (padded) samples.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "awt/error.hpp"

namespace awt {

struct WaveletCoefficients {
    std::vector<std::vector<double>> levels;
    std::size_t original_length = 0;
    std::size_t padded_length = 0;

    std::size_t level_count() const noexcept { return levels.size(); }

    std::size_t coefficient_count() const noexcept {
        std::size_t n = 0;
        for (const auto& l : levels) n += l.size();
        return n;
    }
};

struct WaveletPanel {
    std::string station_id;
    std::vector<WaveletCoefficients> per_parameter;

    std::size_t parameter_count() const noexcept { return per_parameter.size(); }
    std::size_t level_count() const noexcept {
        return per_parameter.empty() ? 0 : per_parameter.front().level_count();
    }
};

struct PaddedSeries {
    std::vector<double> values;
    std::size_t original_length = 0;
};

constexpr bool is_pow2(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

constexpr std::size_t next_pow2(std::size_t n) noexcept {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

/// Number of coefficients in levels [0, levels).
constexpr std::size_t prefix_size(std::size_t levels) noexcept {
    return levels == 0 ? 0 : std::size_t{1} << (levels - 1);
}

/// Pads to the next power of two by repeating the last sample.
inline PaddedSeries pad_to_pow2(std::span<const double> series) {
    if (series.empty()) throw DataError("empty input");
    PaddedSeries out;
    out.original_length = series.size();
    out.values.assign(series.begin(), series.end());
    out.values.resize(next_pow2(series.size()), series.back());
    return out;
}

inline WaveletCoefficients haar_decompose(std::span<const double> series,
                                          std::size_t original_length) {
    const std::size_t n = series.size();
    if (!is_pow2(n))
        throw StructuralError("haar_decompose: length " + std::to_string(n) +
                              " is not a power of two");
    if (original_length == 0 || original_length > n)
        throw StructuralError("haar_decompose: original_length out of range");

    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    std::size_t level_count = 1;
    while ((std::size_t{1} << (level_count - 1)) < n) ++level_count;

    WaveletCoefficients out;
    out.original_length = original_length;
    out.padded_length = n;
    out.levels.resize(level_count);

    std::vector<double> approx(series.begin(), series.end());
    // Finest details come out first; fill levels from the back.
    for (std::size_t level = level_count - 1; level >= 1; --level) {
        const std::size_t half = approx.size() / 2;
        std::vector<double> sums(half);
        auto& detail = out.levels[level];
        detail.resize(half);
        for (std::size_t i = 0; i < half; ++i) {
            const double a = approx[2 * i];
            const double b = approx[2 * i + 1];
            sums[i] = (a + b) * inv_sqrt2;
            detail[i] = (a - b) * inv_sqrt2;
        }
        approx = std::move(sums);
    }
    out.levels[0] = std::move(approx);
    return out;
}

inline WaveletCoefficients haar_decompose(std::span<const double> series) {
    return haar_decompose(series, series.size());
}

/// Inverse transform of the stored levels. If finer levels were dropped the
/// output has 2^(levels-1) samples (a coarse approximation at the reduced
/// sampling rate); otherwise the first original_length samples are returned.
inline std::vector<double> haar_reconstruct(const WaveletCoefficients& c) {
    if (c.levels.empty()) throw StructuralError("wavelet coefficients have no levels");
    for (std::size_t l = 0; l < c.levels.size(); ++l) {
        const std::size_t expect = l == 0 ? 1 : std::size_t{1} << (l - 1);
        if (c.levels[l].size() != expect)
            throw StructuralError("wavelet level " + std::to_string(l) +
                                  " has wrong coefficient count");
    }
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    std::vector<double> approx = c.levels[0];
    for (std::size_t l = 1; l < c.levels.size(); ++l) {
        const auto& detail = c.levels[l];
        std::vector<double> next(approx.size() * 2);
        for (std::size_t i = 0; i < approx.size(); ++i) {
            next[2 * i] = (approx[i] + detail[i]) * inv_sqrt2;
            next[2 * i + 1] = (approx[i] - detail[i]) * inv_sqrt2;
        }
        approx = std::move(next);
    }
    if (approx.size() == c.padded_length) approx.resize(c.original_length);
    return approx;
}

/// Pads and decomposes each parameter series of one station.
inline WaveletPanel make_panel(std::string station_id,
                               const std::vector<std::vector<double>>& series) {
    WaveletPanel panel;
    panel.station_id = std::move(station_id);
    panel.per_parameter.reserve(series.size());
    for (const auto& s : series) {
        const auto padded = pad_to_pow2(s);
        panel.per_parameter.push_back(haar_decompose(padded.values, padded.original_length));
    }
    for (const auto& c : panel.per_parameter)
        if (c.padded_length != panel.per_parameter.front().padded_length)
            throw StructuralError("panel parameters have different lengths");
    return panel;
}

/// Levels 0..levels-1 of every parameter, concatenated parameter by parameter.
inline std::vector<double> prefix_flat(const WaveletPanel& panel, std::size_t levels) {
    if (levels == 0 || levels > panel.level_count())
        throw RangeError("prefix_flat: requested " + std::to_string(levels) +
                         " levels, panel has " + std::to_string(panel.level_count()));
    std::vector<double> out;
    out.reserve(panel.parameter_count() * prefix_size(levels));
    for (const auto& c : panel.per_parameter)
        for (std::size_t l = 0; l < levels; ++l)
            out.insert(out.end(), c.levels[l].begin(), c.levels[l].end());
    return out;
}

inline WaveletPanel drop_finest_levels(WaveletPanel panel, std::size_t drop) {
    if (drop >= panel.level_count())
        throw RangeError("drop_finest_levels: cannot drop " + std::to_string(drop) +
                         " of " + std::to_string(panel.level_count()) + " levels");
    for (auto& c : panel.per_parameter) {
        c.levels.resize(c.levels.size() - drop);
        c.levels.shrink_to_fit();
    }
    return panel;
}

} // namespace awt
