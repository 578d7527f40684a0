#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "awt/error.hpp"
#include "awt/pipeline.hpp"
#include "awt/preprocess.hpp"
#include "awt/wavelet.hpp"

namespace awt {

using LabelAssignment = std::map<std::string, std::size_t>;

/// Raised when two assignments cover different station sets.
class IdMismatchError : public DataError {
public:
    IdMismatchError(const std::string& what, std::vector<std::string> diff)
        : DataError(what), difference_(std::move(diff)) {}
    const std::vector<std::string>& difference() const noexcept { return difference_; }

private:
    std::vector<std::string> difference_;
};

namespace detail {

inline double entropy(const std::map<std::size_t, std::size_t>& counts, double n) {
    std::vector<double> terms;
    for (const auto& [label, c] : counts) {
        const double p = static_cast<double>(c) / n;
        terms.push_back(-p * std::log(p));
    }
    std::sort(terms.begin(), terms.end());
    double h = 0.0;
    for (double t : terms) h += t;
    return h;
}

} // namespace detail

/// Normalized mutual information, I(A;B) / sqrt(H(A) H(B)) with natural logs.
/// Two single-cluster partitions score 1, exactly one single-cluster
/// partition scores 0.
inline double nmi(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size()) throw DataError("nmi: label vectors differ in length");
    if (a.empty()) throw DataError("nmi: no labels");
    const double n = static_cast<double>(a.size());

    std::map<std::size_t, std::size_t> ca;
    std::map<std::size_t, std::size_t> cb;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> joint;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++ca[a[i]];
        ++cb[b[i]];
        ++joint[{a[i], b[i]}];
    }
    const double ha = detail::entropy(ca, n);
    const double hb = detail::entropy(cb, n);
    const bool a_flat = ca.size() == 1;
    const bool b_flat = cb.size() == 1;
    if (a_flat && b_flat) return 1.0;
    if (a_flat || b_flat) return 0.0;

    // Terms are summed in sorted order so that nmi(a,b) == nmi(b,a) bit for bit.
    std::vector<double> terms;
    terms.reserve(joint.size());
    for (const auto& [cell, c] : joint) {
        const double nij = static_cast<double>(c);
        const double ai = static_cast<double>(ca[cell.first]);
        const double bj = static_cast<double>(cb[cell.second]);
        terms.push_back(nij / n * std::log(n * nij / (ai * bj)));
    }
    std::sort(terms.begin(), terms.end());
    double mi = 0.0;
    for (double t : terms) mi += t;
    return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

inline double nmi(const LabelAssignment& a, const LabelAssignment& b) {
    std::vector<std::string> diff;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() || ib != b.end()) {
        if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
            diff.push_back(ia++->first);
        } else if (ia == a.end() || ib->first < ia->first) {
            diff.push_back(ib++->first);
        } else {
            ++ia;
            ++ib;
        }
    }
    if (!diff.empty()) {
        std::string msg = "station sets differ in " + std::to_string(diff.size()) + " ids:";
        for (std::size_t i = 0; i < std::min<std::size_t>(10, diff.size()); ++i)
            msg += " " + diff[i];
        if (diff.size() > 10) msg += " ...";
        throw IdMismatchError(msg, std::move(diff));
    }
    std::vector<std::size_t> la;
    std::vector<std::size_t> lb;
    for (const auto& [id, label] : a) {
        la.push_back(label);
        lb.push_back(b.at(id));
    }
    return nmi(la, lb);
}

struct SizeProfile {
    /// (cluster_id, size), largest first; equal sizes keep cluster order.
    std::vector<std::pair<std::size_t, std::size_t>> sizes;
    /// sizes[i] / sizes[i+1] over the non-empty clusters.
    std::vector<double> ratios;
};

inline SizeProfile size_profile(const ClusteringResult& r) {
    SizeProfile p;
    for (const auto& c : r.clusters) p.sizes.emplace_back(c.cluster_id, c.members.size());
    std::stable_sort(p.sizes.begin(), p.sizes.end(),
                     [](const auto& x, const auto& y) { return x.second > y.second; });
    for (std::size_t i = 0; i + 1 < p.sizes.size() && p.sizes[i + 1].second > 0; ++i)
        p.ratios.push_back(static_cast<double>(p.sizes[i].second) /
                           static_cast<double>(p.sizes[i + 1].second));
    return p;
}

struct ClusterMeanSeries {
    std::size_t cluster_id = 0;
    bool is_outlier = false;
    std::vector<std::vector<double>> per_parameter;
};

/// Pointwise mean of the members' reconstructed series for every non-empty
/// cluster, mapped back to physical units when scaling statistics are given.
inline std::vector<ClusterMeanSeries>
cluster_mean_series(const ClusteringResult& r, const std::vector<WaveletPanel>& panels,
                    std::span<const ScaleStats> scaling = {}) {
    std::map<std::string, const WaveletPanel*> by_id;
    for (const auto& p : panels) by_id.emplace(p.station_id, &p);

    std::vector<ClusterMeanSeries> out;
    for (const auto& c : r.clusters) {
        if (c.members.empty()) continue;
        ClusterMeanSeries m{c.cluster_id, c.is_outlier, {}};
        for (const auto& id : c.members) {
            auto it = by_id.find(id);
            if (it == by_id.end())
                throw DataError("cluster_mean_series: no panel for station " + id);
            const auto& panel = *it->second;
            if (m.per_parameter.empty()) m.per_parameter.resize(panel.parameter_count());
            for (std::size_t p = 0; p < panel.parameter_count(); ++p) {
                const auto series = haar_reconstruct(panel.per_parameter[p]);
                auto& acc = m.per_parameter[p];
                if (acc.empty()) acc.assign(series.size(), 0.0);
                for (std::size_t t = 0; t < series.size(); ++t) acc[t] += series[t];
            }
        }
        const double inv = 1.0 / static_cast<double>(c.members.size());
        for (std::size_t p = 0; p < m.per_parameter.size(); ++p)
            for (double& v : m.per_parameter[p]) {
                v *= inv;
                if (p < scaling.size()) v = inverse_scale(v, scaling[p]);
            }
        out.push_back(std::move(m));
    }
    return out;
}

struct StudyRow {
    std::size_t tree_levels = 0;
    std::size_t drop_levels = 0;
    std::size_t max_resolution = 0;
    std::size_t k = 0;
    double nmi = 0.0;
};

/// NMI of each reduced-resolution run against the drop-0 run for the same
/// configuration.
inline std::vector<StudyRow> resolution_study(const std::vector<WaveletPanel>& panels,
                                              const AWTConfig& config,
                                              std::span<const std::size_t> drop_grid) {
    if (drop_grid.empty()) throw ConfigError("drop grid is empty");
    AWTConfig base = config;
    base.drop_levels = 0;
    const auto reference = awt_cluster(panels, base);
    const auto ref_labels = reference.labels();

    std::vector<StudyRow> rows;
    for (std::size_t d : drop_grid) {
        AWTConfig c = config;
        c.drop_levels = d;
        const auto run = d == 0 ? reference : awt_cluster(panels, c);
        rows.push_back({c.tree_levels, d, run.max_resolution, run.k, nmi(ref_labels, run.labels())});
    }
    return rows;
}

} // namespace awt
