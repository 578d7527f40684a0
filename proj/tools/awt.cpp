// awt: preprocess station data, cluster it, and evaluate results.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
// Log verbosity comes from AWT_LOG_LEVEL (trace, debug, info, warn, error, off).

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "awt/awt.hpp"
#include "awt/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw awt::DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw awt::DataError("cannot write " + path.string());
    out << content;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return "sha256:" + hex;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch());
    return awt::io::format_timestamp(secs.count());
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::istringstream is(item);
        T v{};
        if (!(is >> v) || !is.eof()) throw UsageError(std::string(flag) + ": bad list item '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw UsageError(std::string(flag) + ": empty list");
    return out;
}

// ---- preprocess ------------------------------------------------------------

struct PreprocessArgs {
    std::string input;
    std::string out_panels = "panels.json";
    std::string out_exclusions = "exclusions.csv";
    std::vector<std::string> temperature_params{"temperature"};
    double tolerance = awt::kMissingTolerance;
    std::string audit_dir;
};

int run_preprocess(const PreprocessArgs& a) {
    const std::string bytes = read_file(a.input);
    std::istringstream in(bytes);
    const std::set<std::string> temps(a.temperature_params.begin(), a.temperature_params.end());
    auto raw = awt::io::read_long_csv(in, temps, a.input);
    spdlog::info("read {} stations, {} parameters, {} timestamps", raw.stations.size(),
                 raw.parameters.size(), raw.timestamps.size());
    const std::size_t total = raw.stations.size();

    // raw is moved into preprocess(); the hook keeps its own copies.
    const auto parameters = raw.parameters;
    const auto timestamps = raw.timestamps;
    awt::AuditHook audit;
    if (!a.audit_dir.empty()) {
        audit = [&](std::string_view stage, const std::vector<awt::PanelSeries>& stations) {
            std::ostringstream os;
            awt::io::write_stage_csv(os, stations, parameters, timestamps);
            write_file(fs::path(a.audit_dir) / (std::string(stage) + ".csv"), os.str());
        };
    }
    auto out = awt::preprocess(std::move(raw), a.tolerance, audit);

    std::ostringstream excl;
    awt::io::write_exclusions(excl, out.excluded);
    write_file(a.out_exclusions, excl.str());
    write_file(a.out_panels, awt::io::panels_to_json(out.panels).dump(1) + "\n");

    std::cout << "stations: " << total << " kept: " << out.panels.stations.size()
              << " excluded: " << out.excluded.size() << "\n";
    if (out.panels.stations.empty()) {
        std::cerr << "error: every station was excluded; the panel file is empty\n";
        return kData;
    }
    return kOk;
}

// ---- cluster ---------------------------------------------------------------

struct ClusterArgs {
    std::string panels;
    std::string out_dir = "awt-out";
    awt::AWTConfig config;
    std::string mode = "awt";
    std::optional<std::size_t> outlier_max_size;
    std::optional<std::uint64_t> seed_shuffle;
    std::string dump_tree;
};

int run_cluster(ClusterArgs a) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string started = utc_now();
    a.config.mode = a.mode == "birch" ? awt::Mode::birch : awt::Mode::awt;
    a.config.outlier_max_size = a.outlier_max_size;
    a.config.shuffle_seed = a.seed_shuffle;

    const std::string bytes = read_file(a.panels);
    const std::string digest = sha256_hex(bytes);
    json pj;
    try {
        pj = json::parse(bytes);
    } catch (const json::exception& e) {
        throw awt::DataError(a.panels + ": " + e.what());
    }
    const auto dataset = awt::io::panels_from_json(pj);
    if (dataset.stations.empty()) throw awt::DataError(a.panels + ": no stations");
    const auto panels = awt::io::to_wavelet_panels(dataset);

    const std::size_t available = panels.front().level_count();
    if (a.config.drop_levels >= available ||
        a.config.tree_levels > available - a.config.drop_levels || a.config.tree_levels == 0)
        throw UsageError("--tree-levels " + std::to_string(a.config.tree_levels) +
                         " with --drop-levels " + std::to_string(a.config.drop_levels) +
                         " does not fit the " + std::to_string(available) +
                         " available wavelet levels");

    const auto result = awt::awt_cluster(panels, a.config);
    spdlog::info("k={} outliers={} centroid resolution={}", result.k, result.outlier_count(),
                 result.centroid_resolution);

    const fs::path dir(a.out_dir);
    write_file(dir / "result.json", awt::io::result_to_json(result, digest).dump(1) + "\n");
    {
        std::ostringstream os;
        awt::io::write_size_profile(os, result);
        write_file(dir / "size_profile.csv", os.str());
    }
    {
        std::ostringstream os;
        const auto means = awt::cluster_mean_series(result, panels, dataset.scaling);
        awt::io::write_mean_series(os, means, dataset.parameters, dataset.timestamps);
        write_file(dir / "mean_series.csv", os.str());
    }
    if (!a.dump_tree.empty()) {
        std::vector<awt::WaveletPanel> reduced;
        for (const auto& p : panels) reduced.push_back(awt::drop_finest_levels(p, a.config.drop_levels));
        const std::size_t levels = a.config.mode == awt::Mode::awt
                                       ? a.config.tree_levels
                                       : available - a.config.drop_levels;
        const auto tree = awt::detail::build_tree(reduced, levels, a.config);
        std::ostringstream os;
        tree.dump_text(os);
        write_file(a.dump_tree, os.str());
    }

    const auto elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    json manifest{{"software", "awt"},
                  {"software_version", kVersion},
                  {"command", "cluster"},
                  {"config", awt::io::config_to_json(a.config)},
                  {"inputs", json::array({{{"path", a.panels}, {"digest", digest}}})},
                  {"outputs", {"result.json", "size_profile.csv", "mean_series.csv"}},
                  {"started_utc", started},
                  {"elapsed_ms", elapsed},
                  {"k", result.k},
                  {"outlier_count", result.outlier_count()}};
    write_file(dir / "manifest.json", manifest.dump(1) + "\n");

    std::cout << "clusters: " << result.k << " outliers: " << result.outlier_count() << "\n";
    return kOk;
}

// ---- evaluate --------------------------------------------------------------

struct EvaluateArgs {
    std::string a;
    std::string b;
    std::string result;
    std::string panels;
    std::string drop_grid;
    std::string tree_levels_grid;
    std::string out = "study.csv";
};

awt::io::LoadedResult load_result(const std::string& path) {
    try {
        return awt::io::result_from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw awt::DataError(path + ": " + e.what());
    }
}

int run_evaluate(const EvaluateArgs& a) {
    if (!a.a.empty() || !a.b.empty()) {
        if (a.a.empty() || a.b.empty()) throw UsageError("--a and --b must be given together");
        const auto ra = load_result(a.a);
        const auto rb = load_result(a.b);
        const double v = awt::nmi(ra.assignments, rb.assignments);
        std::cout << "nmi: " << awt::io::format_double(v) << "\n";
        return kOk;
    }
    if (a.drop_grid.empty()) throw UsageError("give --a/--b, or --panels with --drop-grid");
    if (a.panels.empty()) throw UsageError("--drop-grid needs --panels");

    const std::string bytes = read_file(a.panels);
    awt::AWTConfig config;
    if (!a.result.empty()) {
        const auto r = load_result(a.result);
        config = r.config;
        if (r.input_digest != sha256_hex(bytes))
            spdlog::warn("{} was produced from different panel data than {}", a.result, a.panels);
    }
    const auto dataset = awt::io::panels_from_json(json::parse(bytes));
    if (dataset.stations.empty()) throw awt::DataError(a.panels + ": no stations");
    const auto panels = awt::io::to_wavelet_panels(dataset);

    const auto drops = parse_list<std::size_t>(a.drop_grid, "--drop-grid");
    std::vector<std::size_t> tree_levels{config.tree_levels};
    if (!a.tree_levels_grid.empty())
        tree_levels = parse_list<std::size_t>(a.tree_levels_grid, "--tree-levels-grid");

    const std::size_t available = panels.front().level_count();
    for (std::size_t tl : tree_levels)
        for (std::size_t d : drops)
            if (d >= available || tl == 0 || tl > available - d)
                throw UsageError("tree levels " + std::to_string(tl) + " with drop " +
                                 std::to_string(d) + " do not fit " + std::to_string(available) +
                                 " available levels");

    std::vector<awt::StudyRow> rows;
    for (std::size_t tl : tree_levels) {
        auto c = config;
        c.tree_levels = tl;
        const auto part = awt::resolution_study(panels, c, drops);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    std::ostringstream os;
    awt::io::write_study(os, rows);
    write_file(a.out, os.str());
    std::cout << os.str();
    return kOk;
}

// ---- thresholds ------------------------------------------------------------

struct ThresholdArgs {
    std::string panels;
    std::string grid;
    awt::AWTConfig config;
    std::string mode = "awt";
    std::optional<std::uint64_t> seed_shuffle;
};

int run_thresholds(ThresholdArgs a) {
    a.config.mode = a.mode == "birch" ? awt::Mode::birch : awt::Mode::awt;
    a.config.shuffle_seed = a.seed_shuffle;
    const auto grid = parse_list<double>(a.grid, "--grid");
    const auto dataset = awt::io::panels_from_json(json::parse(read_file(a.panels)));
    if (dataset.stations.empty()) throw awt::DataError(a.panels + ": no stations");
    const auto panels = awt::io::to_wavelet_panels(dataset);
    std::cout << "threshold,k\n";
    for (const auto& [t, k] : awt::count_clusters_for_threshold(panels, grid, a.config))
        std::cout << awt::io::format_double(t) << ',' << k << '\n';
    return kOk;
}

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("awt");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("AWT_LOG_LEVEL"))
        spdlog::set_level(spdlog::level::from_str(env));
}

void add_config_flags(CLI::App* cmd, awt::AWTConfig& c, std::string& mode,
                      std::optional<std::uint64_t>& seed, bool with_threshold = true) {
    if (with_threshold)
        cmd->add_option("--threshold", c.threshold,
                        "merge threshold in squared (scaled) distance units")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
    cmd->add_option("--tree-levels", c.tree_levels, "wavelet levels used to build the CF tree")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--drop-levels", c.drop_levels, "finest wavelet levels to discard")
        ->capture_default_str();
    cmd->add_option("--branching-factor", c.branching_factor, "maximum children per tree node")
        ->capture_default_str()
        ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 20));
    cmd->add_option("--max-iters", c.max_iters_per_level, "K-Means iterations per resolution level")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--mode", mode, "awt or birch")
        ->capture_default_str()
        ->check(CLI::IsMember({"awt", "birch"}));
    cmd->add_option("--seed-shuffle", seed, "shuffle insertion order with this seed");
}

} // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"AWT time-series clustering with implicit outlier detection"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    PreprocessArgs pre;
    auto* cmd_pre = app.add_subcommand("preprocess", "filter, interpolate, height-correct and scale");
    cmd_pre->add_option("--input", pre.input, "long-format CSV")->required()->check(CLI::ExistingFile);
    cmd_pre->add_option("--out-panels", pre.out_panels)->capture_default_str();
    cmd_pre->add_option("--out-exclusions", pre.out_exclusions)->capture_default_str();
    cmd_pre->add_option("--temperature-params", pre.temperature_params,
                        "parameters that receive height correction")
        ->delimiter(',')
        ->capture_default_str();
    cmd_pre->add_option("--missing-tolerance", pre.tolerance,
                        "keep a station iff every parameter misses less than this fraction")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    cmd_pre->add_option("--audit-dir", pre.audit_dir, "dump every preprocessing stage as CSV");

    ClusterArgs cl;
    auto* cmd_cl = app.add_subcommand("cluster", "cluster a panel file");
    cmd_cl->add_option("--panels", cl.panels)->required()->check(CLI::ExistingFile);
    cmd_cl->add_option("--out-dir", cl.out_dir)->capture_default_str();
    add_config_flags(cmd_cl, cl.config, cl.mode, cl.seed_shuffle);
    cmd_cl->add_option("--outlier-max-size", cl.outlier_max_size,
                       "flag clusters of at most this size as outliers (disables the size-step rule)");
    cmd_cl->add_option("--dump-tree", cl.dump_tree, "write the CF tree as indented text");

    EvaluateArgs ev;
    auto* cmd_ev = app.add_subcommand("evaluate", "NMI between results, or a resolution study");
    cmd_ev->add_option("--a", ev.a, "first result.json")->check(CLI::ExistingFile);
    cmd_ev->add_option("--b", ev.b, "second result.json")->check(CLI::ExistingFile);
    cmd_ev->add_option("--result", ev.result, "result.json supplying the study configuration")
        ->check(CLI::ExistingFile);
    cmd_ev->add_option("--panels", ev.panels)->check(CLI::ExistingFile);
    cmd_ev->add_option("--drop-grid", ev.drop_grid, "comma-separated drop levels, e.g. 0,1,2,3");
    cmd_ev->add_option("--tree-levels-grid", ev.tree_levels_grid, "comma-separated tree levels");
    cmd_ev->add_option("--out", ev.out, "study CSV")->capture_default_str();

    ThresholdArgs th;
    auto* cmd_th = app.add_subcommand("thresholds", "cluster count for each threshold in a grid");
    cmd_th->add_option("--panels", th.panels)->required()->check(CLI::ExistingFile);
    cmd_th->add_option("--grid", th.grid, "ascending comma-separated thresholds")->required();
    add_config_flags(cmd_th, th.config, th.mode, th.seed_shuffle, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        if (*cmd_pre) return run_preprocess(pre);
        if (*cmd_cl) return run_cluster(cl);
        if (*cmd_ev) return run_evaluate(ev);
        if (*cmd_th) return run_thresholds(th);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const awt::ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const awt::IdMismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    } catch (const awt::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const awt::StructuralError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const awt::RangeError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternal;
    }
    return kInternal;
}
