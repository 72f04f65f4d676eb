#include "iotid/cli.hpp"

#include "iotid/binary_io.hpp"
#include "iotid/cache.hpp"
#include "iotid/error.hpp"
#include "iotid/experiments.hpp"
#include "iotid/parallel.hpp"
#include "iotid/synth.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

namespace iotid::cli {
namespace {

namespace fs = std::filesystem;

enum class Level { Error, Warn, Info, Debug };

class Log {
public:
    Log(std::ostream& err, Level level) : err_(err), level_(level) {}

    template <class... Args>
    void info(fmt::format_string<Args...> f, Args&&... args) {
        emit(Level::Info, "info", fmt::format(f, std::forward<Args>(args)...));
    }
    template <class... Args>
    void warn(fmt::format_string<Args...> f, Args&&... args) {
        emit(Level::Warn, "warn", fmt::format(f, std::forward<Args>(args)...));
    }
    template <class... Args>
    void debug(fmt::format_string<Args...> f, Args&&... args) {
        emit(Level::Debug, "debug", fmt::format(f, std::forward<Args>(args)...));
    }
    void error(const std::string& msg) { emit(Level::Error, "error", msg); }

private:
    void emit(Level at, const char* tag, const std::string& msg) {
        if (at <= level_) err_ << "[" << tag << "] " << msg << "\n";
    }

    std::ostream& err_;
    Level level_;
};

// Everything a run can be configured with; each subcommand binds the part it
// uses. Flags override values read from --config.
struct RunConfig {
    std::uint64_t seed = 42;
    unsigned jobs = 1;
    std::string log_level = "info";

    fs::path manifest;
    fs::path cache_dir;
    bool no_cache = false;
    fs::path model_path;
    fs::path reports_dir;
    fs::path out_path;

    double window = 30.0;
    std::vector<double> windows = kDefaultWindows;
    std::vector<double> fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};

    std::size_t trees = 100;
    std::string max_depth = "none";
    std::size_t min_split = 2;
    std::size_t min_leaf = 1;
    std::string max_features = "sqrt";

    double train_fraction = 0.8;
    std::string oversample = "train";
    std::optional<double> threshold;

    std::size_t n_iter = 25;
    std::size_t folds = 5;

    // synth
    std::size_t devices = 37;
    std::size_t sessions = 20;
    std::size_t sibling_pairs = 0;
    double noise_start = 20.0;
    double duration = 110.0;
    fs::path profiles_in;
    fs::path profiles_out;

    // predict
    fs::path pcap;
    std::optional<double> power_on;

    fs::path meta_log = "meta.log";
};

Error usage(std::string msg) { return Error(ErrorCode::BadConfig, std::move(msg)); }

HyperParams hyper_params(const RunConfig& c) {
    HyperParams p;
    p.n_trees = c.trees;
    if (c.max_depth != "none") {
        std::size_t d = 0;
        auto [ptr, ec] = std::from_chars(c.max_depth.data(), c.max_depth.data() + c.max_depth.size(), d);
        if (ec != std::errc() || ptr != c.max_depth.data() + c.max_depth.size() || d == 0) {
            throw usage(fmt::format("--max-depth: expected 'none' or a positive integer, got '{}'", c.max_depth));
        }
        p.max_depth = d;
    }
    p.min_samples_split = c.min_split;
    p.min_samples_leaf = c.min_leaf;
    const auto mf = MaxFeatures::parse(c.max_features);
    if (!mf) throw usage(fmt::format("--max-features: expected sqrt, log2, all or a fraction, got '{}'", c.max_features));
    p.max_features = *mf;
    try {
        p.validate();
    } catch (const Error& e) {
        throw usage(e.what());
    }
    return p;
}

PipelineConfig pipeline(const RunConfig& c) {
    PipelineConfig p;
    p.params = hyper_params(c);
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw usage("--train-fraction must lie in (0, 1)");
    p.train_fraction = c.train_fraction;
    p.oversample = parse_oversample_mode(c.oversample);
    p.unknown_threshold = c.threshold;
    p.jobs = c.jobs;
    return p;
}

void check_windows(const std::vector<double>& windows) {
    if (windows.empty()) throw usage("--windows: at least one window is required");
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (!(windows[i] > 0.0)) throw usage(fmt::format("--windows: {} is not a positive window", windows[i]));
        if (i > 0 && !(windows[i] > windows[i - 1])) throw usage("--windows: windows must be strictly ascending");
    }
}

std::optional<WindowCache> cache_of(const RunConfig& c) {
    if (c.no_cache || c.cache_dir.empty()) return std::nullopt;
    return WindowCache(c.cache_dir);
}

void write_text(const fs::path& path, const std::string& text) {
    atomic_write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

std::vector<Session> load(const RunConfig& c, Log& log) {
    const auto entries = read_manifest(c.manifest);
    log.info("loading {} sessions from {}", entries.size(), c.manifest.string());
    return load_sessions(entries, c.jobs);
}

// ---- option groups ----

void add_manifest(CLI::App* s, RunConfig& c) {
    s->add_option("--manifest", c.manifest, "Session manifest (TSV)")->required()->check(CLI::ExistingFile);
}

void add_cache(CLI::App* s, RunConfig& c) {
    s->add_option("--cache", c.cache_dir, "Feature cache directory (caching is off without it)");
    s->add_flag("--no-cache", c.no_cache, "Ignore --cache");
}

void add_params(CLI::App* s, RunConfig& c) {
    s->add_option("--trees", c.trees, "Trees per forest")->check(CLI::PositiveNumber);
    s->add_option("--max-depth", c.max_depth, "Depth bound or 'none'");
    s->add_option("--min-split", c.min_split, "Minimum samples to split a node");
    s->add_option("--min-leaf", c.min_leaf, "Minimum samples per leaf");
    s->add_option("--max-features", c.max_features, "sqrt | log2 | all | fraction in (0,1]");
}

void add_pipeline(CLI::App* s, RunConfig& c) {
    add_params(s, c);
    s->add_option("--train-fraction", c.train_fraction, "Share of each device's sessions used for training");
    s->add_option("--oversample", c.oversample, "train | train-and-test")
        ->check(CLI::IsMember({"train", "train-and-test"}));
    s->add_option("--threshold", c.threshold, "Report UNKNOWN when the best device score is below this")
        ->check(CLI::Range(0.0, 1.0));
}

// ---- subcommands ----

int cmd_synth(const RunConfig& c, std::ostream& out, Log& log) {
    std::vector<DeviceProfile> profiles;
    if (!c.profiles_in.empty()) {
        profiles = parse_profiles(read_text(c.profiles_in));
    } else {
        FamilyOptions f;
        f.devices = c.devices;
        f.sibling_pairs = c.sibling_pairs;
        f.noise_start_s = c.noise_start;
        f.session_duration_s = c.duration;
        profiles = make_profile_family(f, c.seed);
    }
    if (!c.profiles_out.empty()) write_text(c.profiles_out, write_profiles(profiles));
    const auto entries = generate_corpus(profiles, c.sessions, c.seed, c.out_path, c.jobs);
    log.info("wrote {} sessions for {} devices", entries.size(), profiles.size());
    out << fmt::format("sessions\t{}\ndevices\t{}\nmanifest\t{}\n", entries.size(), profiles.size(),
                       (c.out_path / "manifest.tsv").string());
    return kOk;
}

int cmd_ingest(const RunConfig& c, std::ostream& out, Log& log) {
    const auto entries = read_manifest(c.manifest);
    std::vector<SessionLoad> loads(entries.size());
    parallel_for(entries.size(), c.jobs, [&](std::size_t i) { loads[i] = load_session(entries[i]); });
    MetaStore store(c.meta_log);
    const double now = std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
    out << "session_id\tdevice_label\tflows\tpackets\tskipped_non_ip\tskipped_malformed\tbefore_power_on\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& l = loads[i];
        SessionMeta m;
        m.session_id = entries[i].session_id;
        m.device_label = entries[i].device_label;
        m.power_on_ts = entries[i].power_on_ts;
        m.flow_count = l.session.flows.size();
        m.packet_count = l.session.packet_count();
        m.source_path = entries[i].pcap_path.string();
        m.ingest_ts = now;
        store.put(m);
        if (l.truncated_records) log.warn("{}: capture ends in a truncated record", m.session_id);
        out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", m.session_id, m.device_label, m.flow_count, m.packet_count,
                           l.skipped_non_ip, l.skipped_malformed, l.before_power_on);
    }
    log.info("{} sessions recorded in {}", entries.size(), c.meta_log.string());
    return kOk;
}

int cmd_features(const RunConfig& c, std::ostream& out, Log& log) {
    check_windows(c.windows);
    if (c.cache_dir.empty() || c.no_cache) throw usage("features: --cache is required");
    const auto sessions = load(c, log);
    const WindowCache cache(c.cache_dir);
    out << "window_s\tsessions\tflows\n";
    for (double w : c.windows) {
        const auto m = window_matrix(sessions, w, &cache, c.jobs);
        out << fmt::format("{}\t{}\t{}\n", w, sessions.size(), m.size());
    }
    return kOk;
}

int cmd_prune(const RunConfig& c, std::ostream& out, Log& log) {
    if (!(c.window > 0.0)) throw usage("--window must be positive");
    const auto sessions = load(c, log);
    const auto cache = cache_of(c);
    const auto m = window_matrix(sessions, c.window, cache ? &*cache : nullptr, c.jobs);
    const auto report = validate_features(m);
    if (!c.out_path.empty()) write_text(c.out_path, report.to_text());
    out << report.to_text();
    return kOk;
}

fs::path split_path_for(const fs::path& model) { return fs::path(model.string() + ".split.tsv"); }

int cmd_train(const RunConfig& c, std::ostream& out, Log& log) {
    if (!(c.window > 0.0)) throw usage("--window must be positive");
    const PipelineConfig p = pipeline(c);
    const auto sessions = load(c, log);
    const auto cache = cache_of(c);
    const auto split = experiment_split(sessions, p, c.seed);
    const TrainRun run = run_window(sessions, split, c.window, p, c.seed, cache ? &*cache : nullptr);
    save_model(run.model, c.model_path);
    write_text(split_path_for(c.model_path), split.to_text());
    if (!c.reports_dir.empty()) {
        SweepResult single{split, {run.result}};
        write_sweep_reports(single, c.reports_dir);
    }
    const auto& s = run.result.eval.summary;
    log.info("model with {} device forests written to {}", run.model.forests.size(), c.model_path.string());
    out << "window_s\tdevices\ttrain_rows\ttest_rows\tmean_accuracy\tperfect_devices\tmulticlass_accuracy\n";
    out << fmt::format("{}\t{}\t{}\t{}\t{:.6f}\t{}\t{:.6f}\n", c.window, s.devices, run.result.train_rows,
                       run.result.eval.test_rows, s.accuracy.mean, s.perfect_devices,
                       run.result.eval.multiclass_accuracy);
    return kOk;
}

int cmd_predict(const RunConfig& c, std::ostream& out, Log& log) {
    const OvRModel model = load_model(c.model_path);
    CaptureParse parsed = read_capture_file(c.pcap);
    ManifestEntry entry;
    entry.session_id = c.pcap.stem().string();
    entry.pcap_path = c.pcap;
    if (c.power_on) {
        entry.power_on_ts = *c.power_on;
    } else {
        if (parsed.packets.empty()) throw Error(ErrorCode::EmptyData, c.pcap.string() + ": no IP packets");
        double first = std::numeric_limits<double>::infinity();
        for (const auto& pkt : parsed.packets) first = std::min(first, pkt.ts);
        entry.power_on_ts = first;
    }
    const Session session = session_from_capture(std::move(parsed), entry).session;
    const SessionPrediction pred = predict_session(model, session, c.threshold);
    log.info("{} of {} flows scored", pred.flows_used, pred.flows_total);
    out << fmt::format("{}\t{:.6f}\t{}\n", pred.device.label, pred.device.score, model.meta.window_s);
    return kOk;
}

int cmd_search(const RunConfig& c, std::ostream& out, Log& log) {
    if (!(c.window > 0.0)) throw usage("--window must be positive");
    if (c.folds < 2) throw usage("--folds must be at least 2");
    if (c.n_iter < 1) throw usage("--n-iter must be at least 1");
    const PipelineConfig p = pipeline(c);
    const auto sessions = load(c, log);
    const auto cache = cache_of(c);
    const auto split = experiment_split(sessions, p, c.seed);
    const auto m = window_matrix(sessions, c.window, cache ? &*cache : nullptr, c.jobs);
    const FeatureMatrix train = split_rows(m, split).train;

    const PruneReport report = validate_features(train, p.prune);
    const NullDrop clean = drop_nulls(apply_prune(report, train));
    const DenseMatrix x = Scaler::fit(clean.matrix).transform(clean.matrix);
    std::vector<std::string> ids;
    for (const auto& row : clean.matrix.rows) ids.push_back(row.provenance.session_id);
    OvrOptions options;
    options.jobs = c.jobs;
    const SearchResult result =
        randomized_search_cv(x, clean.matrix.labels, ids, SearchSpace{}, c.n_iter, c.folds, c.seed, options);
    if (!c.reports_dir.empty()) write_text(c.reports_dir / "search.tsv", result.to_text());
    log.info("evaluated {} candidates", result.candidates.size());
    out << fmt::format("best\t{}\nmean_cv_accuracy\t{:.6f}\n", result.best.to_string(),
                       result.candidates[result.best_index].mean);
    return kOk;
}

int cmd_sweep(const RunConfig& c, std::ostream& out, Log& log) {
    check_windows(c.windows);
    const PipelineConfig p = pipeline(c);
    const auto sessions = load(c, log);
    const auto cache = cache_of(c);
    const SweepResult sweep = window_sweep(sessions, c.windows, p, c.seed, cache ? &*cache : nullptr);
    write_sweep_reports(sweep, c.reports_dir);
    write_text(c.reports_dir / "split.tsv", sweep.split.to_text());
    for (const auto& w : sweep.windows) {
        if (w.empty) log.warn("window {} s is empty: {}", w.window_s, w.empty_reason);
    }
    out << sweep_tsv(sweep);
    return kOk;
}

int cmd_curve(const RunConfig& c, std::ostream& out, Log& log) {
    if (!(c.window > 0.0)) throw usage("--window must be positive");
    for (std::size_t i = 0; i < c.fractions.size(); ++i) {
        if (!(c.fractions[i] > 0.0 && c.fractions[i] <= 1.0) || (i > 0 && !(c.fractions[i] > c.fractions[i - 1]))) {
            throw usage("--fractions must lie in (0, 1] and ascend strictly");
        }
    }
    if (c.fractions.empty()) throw usage("--fractions: at least one fraction is required");
    const PipelineConfig p = pipeline(c);
    const auto sessions = load(c, log);
    const auto cache = cache_of(c);
    const auto m = window_matrix(sessions, c.window, cache ? &*cache : nullptr, c.jobs);
    const auto points = learning_curve(m, c.fractions, p, c.seed);
    const std::string tsv = learning_curve_tsv(points);
    write_text(c.reports_dir / "learning_curve.tsv", tsv);
    out << tsv;
    return kOk;
}

std::string tsv_as_table(const std::string& tsv) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(tsv);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, '\t')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) return {};
    const auto header = rows.front();
    rows.erase(rows.begin());
    return render_table(header, rows);
}

int cmd_report(const RunConfig& c, std::ostream& out, Log&) {
    bool any = false;
    if (fs::exists(c.reports_dir / "sweep.tsv")) {
        out << "window sweep\n" << tsv_as_table(read_text(c.reports_dir / "sweep.tsv")) << "\n";
        any = true;
    }
    if (fs::exists(c.reports_dir / "per_device_metrics.tsv")) {
        const auto windows = parse_per_device_tsv(read_text(c.reports_dir / "per_device_metrics.tsv"));
        out << render_saved_metrics(windows) << "\n";
        any = true;
    }
    if (fs::exists(c.reports_dir / "learning_curve.tsv")) {
        out << "learning curve\n" << tsv_as_table(read_text(c.reports_dir / "learning_curve.tsv"));
        any = true;
    }
    if (!any) throw Error(ErrorCode::EmptyData, "no report files in " + c.reports_dir.string());
    return kOk;
}

int cmd_cache_verify(const RunConfig& c, std::ostream& out, Log& log) {
    const WindowCache cache(c.cache_dir);
    const auto report = cache.verify();
    out << fmt::format("ok\t{}\nfailed\t{}\n", report.files_ok, report.failures.size());
    for (const auto& [path, why] : report.failures) {
        log.error(fmt::format("{}: {}", path.string(), why));
        out << fmt::format("corrupt\t{}\n", path.string());
    }
    return report.failures.empty() ? kOk : kDataError;
}

int cmd_cache_purge(const RunConfig& c, std::ostream& out, Log&) {
    const WindowCache cache(c.cache_dir);
    out << fmt::format("removed\t{}\n", cache.purge());
    return kOk;
}

int exit_code_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::BadConfig:
        case ErrorCode::InvalidParams:
        case ErrorCode::NonPositiveWindow: return kUsage;
        default: return kDataError;
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig c;
    CLI::App app{"Offline IoT device identification from startup traffic", "iotid"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand
    app.set_config("--config", "", "Read options from a config file (flags win)");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.option_defaults()->always_capture_default();
    app.add_option("--seed", c.seed, "Seed for every randomized step");
    app.add_option("--jobs", c.jobs, "Worker threads")->check(CLI::Range(1u, 1024u));
    app.add_option("--log-level", c.log_level, "error | warn | info | debug")
        ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

    auto* synth = app.add_subcommand("synth", "Generate a synthetic labelled corpus");
    synth->add_option("--out", c.out_path, "Corpus directory")->required();
    synth->add_option("--devices", c.devices, "Devices in the procedural family")->check(CLI::Range(2, 37));
    synth->add_option("--sessions", c.sessions, "Sessions per device")->check(CLI::PositiveNumber);
    synth->add_option("--sibling-pairs", c.sibling_pairs, "Near-duplicate device pairs to add");
    synth->add_option("--noise-start", c.noise_start, "Seconds before steady-state traffic begins")
        ->check(CLI::NonNegativeNumber);
    synth->add_option("--duration", c.duration, "Session length in seconds")->check(CLI::PositiveNumber);
    synth->add_option("--profiles", c.profiles_in, "Profile definitions instead of the procedural family")
        ->check(CLI::ExistingFile);
    synth->add_option("--write-profiles", c.profiles_out, "Also write the profiles used");

    auto* ingest = app.add_subcommand("ingest", "Parse captures and record session metadata");
    add_manifest(ingest, c);
    ingest->add_option("--meta", c.meta_log, "Session metadata log");

    auto* features = app.add_subcommand("features", "Extract per-window features into the cache");
    add_manifest(features, c);
    add_cache(features, c);
    features->add_option("--windows", c.windows, "Comma-separated windows in seconds")->delimiter(',');

    auto* prune = app.add_subcommand("prune", "Print the feature validation report");
    add_manifest(prune, c);
    add_cache(prune, c);
    prune->add_option("--window", c.window, "Observation window in seconds");
    prune->add_option("--out", c.out_path, "Also write the report here");

    auto* train = app.add_subcommand("train", "Train the one-vs-rest model and save it");
    add_manifest(train, c);
    add_cache(train, c);
    add_pipeline(train, c);
    train->add_option("--window", c.window, "Observation window in seconds");
    train->add_option("--model", c.model_path, "Model artifact to write")->required();
    train->add_option("--reports", c.reports_dir, "Also write held-out metrics here");

    auto* predict = app.add_subcommand("predict", "Identify the device in one capture");
    predict->add_option("--model", c.model_path, "Model artifact")->required()->check(CLI::ExistingFile);
    predict->add_option("--pcap", c.pcap, "Capture of one power-on session")->required()->check(CLI::ExistingFile);
    predict->add_option("--power-on", c.power_on, "Power-on timestamp (default: first packet)");
    predict->add_option("--threshold", c.threshold, "Report UNKNOWN below this score")->check(CLI::Range(0.0, 1.0));

    auto* search = app.add_subcommand("search", "Randomized hyperparameter search with session-level CV");
    add_manifest(search, c);
    add_cache(search, c);
    search->add_option("--window", c.window, "Observation window in seconds");
    search->add_option("--train-fraction", c.train_fraction, "Share of sessions forming the search set");
    search->add_option("--n-iter", c.n_iter, "Candidates to evaluate");
    search->add_option("--folds", c.folds, "Cross-validation folds");
    search->add_option("--reports", c.reports_dir, "Also write search.tsv here");

    auto* sweep = app.add_subcommand("sweep", "Accuracy across observation windows");
    add_manifest(sweep, c);
    add_cache(sweep, c);
    add_pipeline(sweep, c);
    sweep->add_option("--windows", c.windows, "Comma-separated windows in seconds")->delimiter(',');
    sweep->add_option("--reports", c.reports_dir, "Report directory")->required();

    auto* curve = app.add_subcommand("curve", "Train/test accuracy against training-set size");
    add_manifest(curve, c);
    add_cache(curve, c);
    add_pipeline(curve, c);
    curve->add_option("--window", c.window, "Observation window in seconds");
    curve->add_option("--fractions", c.fractions, "Comma-separated training fractions")->delimiter(',');
    curve->add_option("--reports", c.reports_dir, "Report directory")->required();

    auto* report = app.add_subcommand("report", "Re-render saved report files");
    report->add_option("--reports", c.reports_dir, "Report directory")->required()->check(CLI::ExistingDirectory);

    auto* cache = app.add_subcommand("cache", "Cache maintenance");
    cache->require_subcommand(1);
    auto* verify = cache->add_subcommand("verify", "Check every cached window's checksum");
    verify->add_option("--cache", c.cache_dir, "Cache directory")->required();
    auto* purge = cache->add_subcommand("purge", "Delete every cached window");
    purge->add_option("--cache", c.cache_dir, "Cache directory")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    }

    const Level level = c.log_level == "error" ? Level::Error
                        : c.log_level == "warn" ? Level::Warn
                        : c.log_level == "debug" ? Level::Debug
                                                  : Level::Info;
    Log log(err, level);
    try {
        if (*synth) return cmd_synth(c, out, log);
        if (*ingest) return cmd_ingest(c, out, log);
        if (*features) return cmd_features(c, out, log);
        if (*prune) return cmd_prune(c, out, log);
        if (*train) return cmd_train(c, out, log);
        if (*predict) return cmd_predict(c, out, log);
        if (*search) return cmd_search(c, out, log);
        if (*sweep) return cmd_sweep(c, out, log);
        if (*curve) return cmd_curve(c, out, log);
        if (*report) return cmd_report(c, out, log);
        if (*verify) return cmd_cache_verify(c, out, log);
        if (*purge) return cmd_cache_purge(c, out, log);
        err << "usage error: no subcommand\n";
        return kUsage;
    } catch (const Error& e) {
        const int code = exit_code_for(e);
        log.error(code == kUsage ? fmt::format("usage error: {}", e.what()) : std::string(e.what()));
        return code;
    } catch (const std::exception& e) {
        log.error(fmt::format("internal error: {}", e.what()));
        return kInternal;
    }
}

int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace iotid::cli
