#pragma once

// File formats used by the command-line tool.
//
//   input CSV (long format):
//     station_id,latitude,longitude,altitude_m,timestamp,parameter,value
//     timestamp is ISO-8601 UTC on an hourly grid; a missing value is an
//     empty field or NaN. Station metadata may be empty.
//   panel file:   JSON, "format": "awt-panels"
//   result file:  JSON, "format": "awt-result"
//   exports:      exclusion report, size profile, mean series, NMI study

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "awt/error.hpp"
#include "awt/evaluate.hpp"
#include "awt/pipeline.hpp"
#include "awt/preprocess.hpp"

namespace awt::io {

using nlohmann::json;

/// A malformed input line; carries the 1-based line number.
class ParseError : public DataError {
public:
    ParseError(std::string_view source, std::size_t line, const std::string& msg)
        : DataError(std::string(source) + ":" + std::to_string(line) + ": " + msg), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

inline constexpr std::string_view kInputHeader =
    "station_id,latitude,longitude,altitude_m,timestamp,parameter,value";
inline constexpr std::int64_t kGridStep = 3600;

/// Shortest round-trip decimal form.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

/// Accepts YYYY-MM-DDTHH:MM:SS followed by Z, +00:00 or nothing (a space may
/// replace the T). Returns unix seconds.
inline std::optional<std::int64_t> parse_timestamp(std::string_view s) {
    if (s.size() < 19) return std::nullopt;
    auto num = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
        int v = 0;
        const auto res = std::from_chars(s.data() + pos, s.data() + pos + len, v);
        if (res.ec != std::errc{} || res.ptr != s.data() + pos + len) return std::nullopt;
        return v;
    };
    if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
        s[16] != ':')
        return std::nullopt;
    const auto tail = s.substr(19);
    if (!(tail.empty() || tail == "Z" || tail == "+00:00")) return std::nullopt;
    const auto y = num(0, 4), mo = num(5, 2), d = num(8, 2), h = num(11, 2), mi = num(14, 2),
               se = num(17, 2);
    if (!y || !mo || !d || !h || !mi || !se) return std::nullopt;
    using namespace std::chrono;
    const year_month_day ymd{year{*y}, month{static_cast<unsigned>(*mo)},
                             day{static_cast<unsigned>(*d)}};
    if (!ymd.ok() || *h > 23 || *mi > 59 || *se > 59) return std::nullopt;
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days) * 86400 + *h * 3600 + *mi * 60 + *se;
}

inline std::string format_timestamp(std::int64_t t) {
    using namespace std::chrono;
    const auto days = static_cast<int>(std::floor(static_cast<double>(t) / 86400.0));
    const std::int64_t secs = t - static_cast<std::int64_t>(days) * 86400;
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60),
                  static_cast<int>(secs % 60));
    return buf;
}

/// Splits one CSV line; double quotes may wrap a field and "" escapes a quote.
inline std::optional<std::vector<std::string>> split_csv_line(std::string_view line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                fields.back() += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.emplace_back();
        } else {
            fields.back() += ch;
        }
    }
    if (quoted) return std::nullopt;
    return fields;
}

inline bool is_missing_token(std::string_view s) {
    if (s.empty()) return true;
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return lower == "nan";
}

/// Reads the long-format input. Parameters named in `temperature_parameters`
/// are tagged for height correction.
inline RawDataset read_long_csv(std::istream& in, const std::set<std::string>& temperature_parameters,
                                std::string_view source = "input") {
    struct Cell {
        std::int64_t t;
        std::size_t param;
        double value;
        std::size_t line;
    };
    struct Station {
        RawStationRecord record;
        std::vector<Cell> cells;
    };

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError(source, 1, "empty file, expected header");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kInputHeader)
        throw ParseError(source, line_no, "bad header, expected '" + std::string(kInputHeader) + "'");

    std::vector<Station> stations;
    std::map<std::string, std::size_t> station_index;
    std::vector<std::string> param_names;
    std::map<std::string, std::size_t> param_index;
    std::optional<std::int64_t> t_min, t_max;

    auto set_meta = [&](std::optional<double>& slot, std::string_view field, std::string_view name,
                        const std::string& station) {
        if (field.empty() || is_missing_token(field)) return;
        const auto v = parse_double(field);
        if (!v || !std::isfinite(*v))
            throw ParseError(source, line_no, "field " + std::string(name) + ": not a number '" +
                                                  std::string(field) + "'");
        if (slot && *slot != *v)
            throw ParseError(source, line_no, "field " + std::string(name) + ": station " +
                                                  station + " changes value from " +
                                                  format_double(*slot) + " to " + format_double(*v));
        slot = *v;
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (!fields) throw ParseError(source, line_no, "unterminated quoted field");
        if (fields->size() != 7)
            throw ParseError(source, line_no,
                             "expected 7 fields, found " + std::to_string(fields->size()));
        const auto& f = *fields;
        if (f[0].empty()) throw ParseError(source, line_no, "field station_id: empty");
        if (f[5].empty()) throw ParseError(source, line_no, "field parameter: empty");
        const auto t = parse_timestamp(f[4]);
        if (!t) throw ParseError(source, line_no, "field timestamp: not ISO-8601 UTC '" + f[4] + "'");

        auto [sit, new_station] = station_index.emplace(f[0], stations.size());
        if (new_station) stations.push_back(Station{RawStationRecord{f[0], {}, {}, {}, {}}, {}});
        Station& st = stations[sit->second];
        set_meta(st.record.latitude, f[1], "latitude", f[0]);
        set_meta(st.record.longitude, f[2], "longitude", f[0]);
        set_meta(st.record.altitude, f[3], "altitude_m", f[0]);

        auto [pit, new_param] = param_index.emplace(f[5], param_names.size());
        if (new_param) param_names.push_back(f[5]);

        double value = std::numeric_limits<double>::quiet_NaN();
        if (!is_missing_token(f[6])) {
            const auto v = parse_double(f[6]);
            if (!v || !std::isfinite(*v))
                throw ParseError(source, line_no, "field value: not a finite number '" + f[6] + "'");
            value = *v;
        }
        st.cells.push_back({*t, pit->second, value, line_no});
        t_min = t_min ? std::min(*t_min, *t) : *t;
        t_max = t_max ? std::max(*t_max, *t) : *t;
    }
    if (stations.empty()) throw ParseError(source, line_no, "no data rows");

    const std::int64_t span = *t_max - *t_min;
    const std::size_t grid = static_cast<std::size_t>(span / kGridStep) + 1;
    if (grid > 50'000'000) throw DataError(std::string(source) + ": time grid is implausibly long");

    RawDataset ds;
    for (const auto& name : param_names)
        ds.parameters.push_back({name, temperature_parameters.count(name) > 0});
    ds.timestamps.resize(grid);
    for (std::size_t i = 0; i < grid; ++i)
        ds.timestamps[i] = *t_min + static_cast<std::int64_t>(i) * kGridStep;

    for (auto& st : stations) {
        auto& rec = st.record;
        rec.samples.assign(param_names.size(),
                           std::vector<double>(grid, std::numeric_limits<double>::quiet_NaN()));
        std::vector<std::vector<bool>> seen(param_names.size(), std::vector<bool>(grid, false));
        for (const auto& c : st.cells) {
            if ((c.t - *t_min) % kGridStep != 0)
                throw ParseError(source, c.line, "field timestamp: not on the hourly grid");
            const auto slot = static_cast<std::size_t>((c.t - *t_min) / kGridStep);
            if (seen[c.param][slot])
                throw ParseError(source, c.line,
                                 "duplicate sample for station " + rec.station_id + ", parameter " +
                                     param_names[c.param] + " at " + format_timestamp(c.t));
            seen[c.param][slot] = true;
            rec.samples[c.param][slot] = c.value;
        }
        ds.stations.push_back(std::move(rec));
    }
    return ds;
}

inline void write_exclusions(std::ostream& os, const std::vector<Exclusion>& excluded) {
    os << "station_id,reason,missing_fraction\n";
    for (const auto& e : excluded)
        os << e.station_id << ',' << e.reason << ',' << format_double(e.missing_fraction) << '\n';
}

/// One row per station, timestamp and parameter, for stage audits.
inline void write_stage_csv(std::ostream& os, const std::vector<PanelSeries>& stations,
                            const std::vector<Parameter>& parameters,
                            const std::vector<std::int64_t>& timestamps) {
    os << "station_id,timestamp,parameter,value\n";
    for (const auto& s : stations)
        for (std::size_t p = 0; p < parameters.size(); ++p)
            for (std::size_t t = 0; t < timestamps.size(); ++t) {
                const double v = s.series[p][t];
                os << s.station_id << ',' << format_timestamp(timestamps[t]) << ','
                   << parameters[p].name << ',' << (std::isnan(v) ? "NaN" : format_double(v))
                   << '\n';
            }
}

// ---- panel file ------------------------------------------------------------

inline json opt_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<double> opt_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

inline json panels_to_json(const PanelDataset& ds) {
    json j;
    j["format"] = "awt-panels";
    j["version"] = 1;
    j["mean_height_m"] = ds.mean_height;
    json params = json::array();
    for (std::size_t p = 0; p < ds.parameters.size(); ++p) {
        const auto s = p < ds.scaling.size() ? ds.scaling[p] : ScaleStats{};
        params.push_back({{"name", ds.parameters[p].name},
                          {"is_temperature", ds.parameters[p].is_temperature},
                          {"mean", s.mean},
                          {"stddev", s.stddev}});
    }
    j["parameters"] = std::move(params);
    json ts = json::array();
    for (auto t : ds.timestamps) ts.push_back(format_timestamp(t));
    j["timestamps"] = std::move(ts);
    json stations = json::array();
    for (const auto& s : ds.stations)
        stations.push_back({{"id", s.station_id},
                            {"latitude", opt_to_json(s.latitude)},
                            {"longitude", opt_to_json(s.longitude)},
                            {"altitude_m", opt_to_json(s.altitude)},
                            {"series", s.series}});
    j["stations"] = std::move(stations);
    return j;
}

inline PanelDataset panels_from_json(const json& j) {
    try {
        if (j.at("format") != "awt-panels") throw DataError("not an awt-panels file");
        PanelDataset ds;
        ds.mean_height = j.at("mean_height_m").get<double>();
        for (const auto& p : j.at("parameters")) {
            ds.parameters.push_back({p.at("name").get<std::string>(), p.at("is_temperature").get<bool>()});
            ds.scaling.push_back({p.at("mean").get<double>(), p.at("stddev").get<double>()});
        }
        for (const auto& t : j.at("timestamps")) {
            const auto v = parse_timestamp(t.get<std::string>());
            if (!v) throw DataError("bad timestamp in panel file");
            ds.timestamps.push_back(*v);
        }
        for (const auto& s : j.at("stations")) {
            PanelSeries ps;
            ps.station_id = s.at("id").get<std::string>();
            ps.latitude = opt_from_json(s.at("latitude"));
            ps.longitude = opt_from_json(s.at("longitude"));
            ps.altitude = opt_from_json(s.at("altitude_m"));
            ps.series = s.at("series").get<std::vector<std::vector<double>>>();
            if (ps.series.size() != ds.parameters.size())
                throw DataError("station " + ps.station_id + " has the wrong parameter count");
            for (const auto& series : ps.series)
                if (series.size() != ds.timestamps.size())
                    throw DataError("station " + ps.station_id + " is not aligned to the time grid");
            ds.stations.push_back(std::move(ps));
        }
        return ds;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed panel file: ") + e.what());
    }
}

inline std::vector<WaveletPanel> to_wavelet_panels(const PanelDataset& ds) {
    std::vector<WaveletPanel> out;
    out.reserve(ds.stations.size());
    for (const auto& s : ds.stations) out.push_back(make_panel(s.station_id, s.series));
    return out;
}

// ---- result file -----------------------------------------------------------

inline json config_to_json(const AWTConfig& c) {
    json j{{"threshold", c.threshold},
           {"tree_levels", c.tree_levels},
           {"drop_levels", c.drop_levels},
           {"branching_factor", c.branching_factor},
           {"max_iters_per_level", c.max_iters_per_level},
           {"mode", to_string(c.mode)}};
    j["outlier_max_size"] = c.outlier_max_size ? json(*c.outlier_max_size) : json(nullptr);
    j["shuffle_seed"] = c.shuffle_seed ? json(*c.shuffle_seed) : json(nullptr);
    return j;
}

inline AWTConfig config_from_json(const json& j) {
    AWTConfig c;
    c.threshold = j.at("threshold").get<double>();
    c.tree_levels = j.at("tree_levels").get<std::size_t>();
    c.drop_levels = j.at("drop_levels").get<std::size_t>();
    c.branching_factor = j.at("branching_factor").get<std::size_t>();
    c.max_iters_per_level = j.at("max_iters_per_level").get<std::size_t>();
    const auto mode = j.at("mode").get<std::string>();
    if (mode != "awt" && mode != "birch") throw DataError("unknown mode '" + mode + "'");
    c.mode = mode == "awt" ? Mode::awt : Mode::birch;
    if (!j.at("outlier_max_size").is_null())
        c.outlier_max_size = j["outlier_max_size"].get<std::size_t>();
    if (!j.at("shuffle_seed").is_null()) c.shuffle_seed = j["shuffle_seed"].get<std::uint64_t>();
    return c;
}

inline json result_to_json(const ClusteringResult& r, const std::string& input_digest) {
    json j;
    j["format"] = "awt-result";
    j["version"] = 1;
    j["input_digest"] = input_digest;
    j["config"] = config_to_json(r.config);
    j["distance_units"] = "squared";
    j["k"] = r.k;
    j["tree_leaf_count"] = r.tree_leaf_count;
    j["outlier_count"] = r.outlier_count();
    j["available_levels"] = r.available_levels;
    j["max_resolution"] = r.max_resolution;
    j["centroid_resolution"] = r.centroid_resolution;

    json cutoff;
    cutoff["clear_step"] = r.cutoff.boundary.has_value();
    cutoff["max_ratio"] = r.cutoff.max_ratio;
    cutoff["boundary_position"] = r.cutoff.boundary ? json(*r.cutoff.boundary) : json(nullptr);
    cutoff["fallback_outlier_max_size"] =
        r.cutoff.used_fallback ? json(r.cutoff.outlier_max_size) : json(nullptr);
    j["cutoff"] = std::move(cutoff);

    json clusters = json::array();
    for (const auto& c : r.clusters)
        clusters.push_back({{"cluster_id", c.cluster_id},
                            {"size", c.members.size()},
                            {"is_outlier", c.is_outlier},
                            {"members", c.members},
                            {"centroid", c.centroid}});
    j["clusters"] = std::move(clusters);

    json assignments = json::object();
    for (const auto& [id, label] : r.assignments) assignments[id] = label;
    j["assignments"] = std::move(assignments);
    j["station_order"] = r.station_order;

    json history = json::array();
    for (const auto& h : r.refinement)
        history.push_back({{"resolution", h.resolution},
                           {"iterations", h.iterations},
                           {"reassignments", h.reassignments},
                           {"sse", h.sse}});
    j["refinement"] = std::move(history);
    return j;
}

struct LoadedResult {
    AWTConfig config;
    std::string input_digest;
    LabelAssignment assignments;
    std::size_t k = 0;
};

inline LoadedResult result_from_json(const json& j) {
    try {
        if (j.at("format") != "awt-result") throw DataError("not an awt-result file");
        LoadedResult r;
        r.config = config_from_json(j.at("config"));
        r.input_digest = j.at("input_digest").get<std::string>();
        r.k = j.at("k").get<std::size_t>();
        for (const auto& [id, label] : j.at("assignments").items())
            r.assignments[id] = label.get<std::size_t>();
        return r;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed result file: ") + e.what());
    }
}

// ---- CSV exports -----------------------------------------------------------

inline void write_size_profile(std::ostream& os, const ClusteringResult& r) {
    const auto profile = size_profile(r);
    os << "cluster_id,size,is_outlier\n";
    for (const auto& [id, size] : profile.sizes)
        os << id << ',' << size << ',' << (r.clusters[id].is_outlier ? "true" : "false") << '\n';
}

inline void write_mean_series(std::ostream& os, const std::vector<ClusterMeanSeries>& means,
                              const std::vector<Parameter>& parameters,
                              const std::vector<std::int64_t>& timestamps) {
    os << "cluster_id,parameter,timestamp,value\n";
    for (const auto& m : means)
        for (std::size_t p = 0; p < m.per_parameter.size(); ++p)
            for (std::size_t t = 0; t < m.per_parameter[p].size(); ++t)
                os << m.cluster_id << ',' << parameters.at(p).name << ','
                   << (t < timestamps.size() ? format_timestamp(timestamps[t]) : std::to_string(t))
                   << ',' << format_double(m.per_parameter[p][t]) << '\n';
}

inline void write_study(std::ostream& os, const std::vector<StudyRow>& rows) {
    os << "tree_levels,max_resolution,nmi\n";
    for (const auto& r : rows)
        os << r.tree_levels << ',' << r.max_resolution << ',' << format_double(r.nmi) << '\n';
}

} // namespace awt::io
