#pragma once

// Station preparation ahead of clustering. Stages always run in this order:
// filter -> interpolate -> height-correct (temperature only) -> scale.
// Missing samples are NaN in the raw records.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "awt/error.hpp"

namespace awt {

struct RawStationRecord {
    std::string station_id;
    std::optional<double> latitude;
    std::optional<double> longitude;
    std::optional<double> altitude;
    std::vector<std::vector<double>> samples; // [parameter][time], NaN = missing
};

struct Parameter {
    std::string name;
    bool is_temperature = false;
};

struct RawDataset {
    std::vector<Parameter> parameters;
    std::vector<std::int64_t> timestamps; // unix seconds, uniform hourly grid
    std::vector<RawStationRecord> stations;
};

struct PanelSeries {
    std::string station_id;
    std::optional<double> latitude;
    std::optional<double> longitude;
    std::optional<double> altitude;
    std::vector<std::vector<double>> series; // [parameter][time], complete
};

struct ScaleStats {
    double mean = 0.0;
    double stddev = 1.0;
};

struct PanelDataset {
    std::vector<Parameter> parameters;
    std::vector<std::int64_t> timestamps;
    std::vector<ScaleStats> scaling;
    double mean_height = 0.0;
    std::vector<PanelSeries> stations;
};

struct Exclusion {
    std::string station_id;
    std::string reason; // no_coordinates | no_altitude | too_many_missing
    double missing_fraction = 0.0;
};

struct FilterResult {
    std::vector<RawStationRecord> kept;
    std::vector<Exclusion> excluded;
};

inline constexpr double kMissingTolerance = 0.10;
inline constexpr double kLapseRate = 0.0065; // K per metre

inline bool is_missing(double v) noexcept { return std::isnan(v); }

inline double missing_fraction(std::span<const double> samples) noexcept {
    if (samples.empty()) return 1.0;
    std::size_t missing = 0;
    for (double v : samples) missing += is_missing(v) ? 1 : 0;
    return static_cast<double>(missing) / static_cast<double>(samples.size());
}

/// Worst per-parameter missing fraction of a station.
inline double worst_missing_fraction(const RawStationRecord& r) noexcept {
    double worst = r.samples.empty() ? 1.0 : 0.0;
    for (const auto& s : r.samples) worst = std::max(worst, missing_fraction(s));
    return worst;
}

/// Keeps a station iff it has coordinates and altitude and every parameter is
/// missing strictly less than `tolerance` of its samples.
inline FilterResult filter_stations(std::vector<RawStationRecord> records,
                                    double tolerance = kMissingTolerance) {
    FilterResult out;
    for (auto& r : records) {
        const double worst = worst_missing_fraction(r);
        if (!r.latitude || !r.longitude)
            out.excluded.push_back({r.station_id, "no_coordinates", worst});
        else if (!r.altitude)
            out.excluded.push_back({r.station_id, "no_altitude", worst});
        else if (!(worst < tolerance))
            out.excluded.push_back({r.station_id, "too_many_missing", worst});
        else
            out.kept.push_back(std::move(r));
    }
    return out;
}

/// Linear interpolation across interior gaps; leading and trailing gaps take
/// the nearest present value.
inline std::vector<double> interpolate_missing(std::span<const double> series) {
    std::vector<double> out(series.begin(), series.end());
    std::optional<std::size_t> prev;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (is_missing(out[i])) continue;
        if (!prev) {
            for (std::size_t j = 0; j < i; ++j) out[j] = out[i];
        } else if (i - *prev > 1) {
            const double a = out[*prev];
            const double b = out[i];
            const double span = static_cast<double>(i - *prev);
            for (std::size_t j = *prev + 1; j < i; ++j)
                out[j] = a + (b - a) * static_cast<double>(j - *prev) / span;
        }
        prev = i;
    }
    if (!prev) throw DataError("interpolate_missing: series has no present samples");
    for (std::size_t j = *prev + 1; j < out.size(); ++j) out[j] = out[*prev];
    return out;
}

/// Temperature at the network's mean height, lapse rate 0.65 K / 100 m.
inline double height_correct(double t, double z, double mean_z) noexcept {
    return t + kLapseRate * (z - mean_z);
}

template <typename Station>
double mean_height(const std::vector<Station>& stations) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : stations)
        if (s.altitude) {
            sum += *s.altitude;
            ++n;
        }
    if (n == 0) throw DataError("mean_height: no station has an altitude");
    return sum / static_cast<double>(n);
}

/// Pooled (all stations, all timestamps) mean and population stddev per
/// parameter; scales in place and returns the statistics.
inline std::vector<ScaleStats> zscale(std::vector<PanelSeries>& stations,
                                      std::span<const Parameter> parameters) {
    std::vector<ScaleStats> stats(parameters.size());
    for (std::size_t p = 0; p < parameters.size(); ++p) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& s : stations)
            for (double v : s.series.at(p)) {
                sum += v;
                ++n;
            }
        if (n == 0) throw DataError("zscale: no samples for parameter " + parameters[p].name);
        const double mean = sum / static_cast<double>(n);
        double sq = 0.0;
        for (const auto& s : stations)
            for (double v : s.series[p]) sq += (v - mean) * (v - mean);
        const double sd = std::sqrt(sq / static_cast<double>(n));
        if (!(sd > 0.0))
            throw DataError("zscale: parameter " + parameters[p].name +
                            " has zero variance and carries no clustering signal");
        stats[p] = {mean, sd};
        for (auto& s : stations)
            for (double& v : s.series[p]) v = (v - mean) / sd;
    }
    return stats;
}

inline double inverse_scale(double v, const ScaleStats& s) noexcept { return v * s.stddev + s.mean; }

struct PreprocessOutput {
    PanelDataset panels;
    std::vector<Exclusion> excluded;
};

/// Called after each stage with its name (filtered, interpolated,
/// height_corrected, scaled) and the station series at that point.
using AuditHook = std::function<void(std::string_view stage, const std::vector<PanelSeries>&)>;

inline PreprocessOutput preprocess(RawDataset raw, double tolerance = kMissingTolerance,
                                   const AuditHook& audit = {}) {
    for (const auto& s : raw.stations) {
        if (s.samples.size() != raw.parameters.size())
            throw StructuralError("station " + s.station_id + " has " +
                                  std::to_string(s.samples.size()) + " parameters, expected " +
                                  std::to_string(raw.parameters.size()));
        for (const auto& p : s.samples)
            if (p.size() != raw.timestamps.size())
                throw StructuralError("station " + s.station_id +
                                      " is not aligned to the shared time grid");
    }

    auto filtered = filter_stations(std::move(raw.stations), tolerance);
    PreprocessOutput out;
    out.excluded = std::move(filtered.excluded);
    out.panels.parameters = raw.parameters;
    out.panels.timestamps = raw.timestamps;
    if (filtered.kept.empty()) return out;

    if (audit) {
        std::vector<PanelSeries> raw_kept;
        for (const auto& r : filtered.kept)
            raw_kept.push_back({r.station_id, r.latitude, r.longitude, r.altitude, r.samples});
        audit("filtered", raw_kept);
    }

    auto& stations = out.panels.stations;
    for (auto& r : filtered.kept) {
        PanelSeries s{r.station_id, r.latitude, r.longitude, r.altitude, {}};
        for (const auto& p : r.samples) s.series.push_back(interpolate_missing(p));
        stations.push_back(std::move(s));
    }
    if (audit) audit("interpolated", stations);

    out.panels.mean_height = mean_height(stations);
    for (auto& s : stations)
        for (std::size_t p = 0; p < raw.parameters.size(); ++p)
            if (raw.parameters[p].is_temperature)
                for (double& v : s.series[p])
                    v = height_correct(v, *s.altitude, out.panels.mean_height);
    if (audit) audit("height_corrected", stations);

    out.panels.scaling = zscale(stations, raw.parameters);
    if (audit) audit("scaled", stations);
    return out;
}

} // namespace awt
