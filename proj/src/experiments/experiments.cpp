#include "iotid/experiments.hpp"

#include "iotid/binary_io.hpp"
#include "iotid/error.hpp"
#include "iotid/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace iotid {

std::string_view to_string(OversampleMode mode) noexcept {
    return mode == OversampleMode::Train ? "train" : "train-and-test";
}

OversampleMode parse_oversample_mode(std::string_view text) {
    if (text == "train") return OversampleMode::Train;
    if (text == "train-and-test") return OversampleMode::TrainAndTest;
    throw Error(ErrorCode::BadConfig, fmt::format("oversample mode must be train or train-and-test, got '{}'", text));
}

std::vector<Session> load_sessions(std::span<const ManifestEntry> entries, unsigned jobs) {
    std::vector<Session> out(entries.size());
    parallel_for(entries.size(), jobs, [&](std::size_t i) { out[i] = load_session(entries[i]).session; });
    return out;
}

std::vector<SessionRef> session_refs(std::span<const Session> sessions) {
    std::vector<SessionRef> out;
    out.reserve(sessions.size());
    for (const auto& s : sessions) out.push_back({s.session_id, s.device_label});
    return out;
}

FeatureMatrix window_matrix(std::span<const Session> sessions, double window_s, const WindowCache* cache,
                            unsigned jobs) {
    const FeatureSchema& schema = FeatureSchema::full();
    std::vector<std::vector<FeatureVector>> per_session(sessions.size());
    parallel_for(sessions.size(), jobs, [&](std::size_t i) {
        const Session& s = sessions[i];
        const CacheKey key{s.session_id, window_s, schema.version()};
        if (cache) {
            if (auto hit = cache->read_window(key)) {
                if (hit->schema != schema) {
                    throw Error(ErrorCode::CorruptFile,
                                fmt::format("cached columns of {} differ from schema {}", s.session_id, schema.version()));
                }
                per_session[i] = std::move(hit->rows);
                return;
            }
        }
        per_session[i] = extract_session_features(truncate_session(s, window_s), window_s);
        if (cache) cache->write_window(key, schema, per_session[i]);
    });

    FeatureMatrix m;
    m.schema = schema;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        for (auto& row : per_session[i]) m.append(std::move(row), sessions[i].device_label);
    }
    return m;
}

OvRModel fit_model(const FeatureMatrix& train, const PipelineConfig& config, double window_s, FitStats* stats) {
    train.check();
    PruneReport report = validate_features(train, config.prune);
    const NullDrop clean = drop_nulls(apply_prune(report, train));
    Scaler scaler = Scaler::fit(clean.matrix);
    const DenseMatrix x = scaler.transform(clean.matrix);

    OvrOptions options;
    options.jobs = config.jobs;
    OvRModel model = train_ovr(x, clean.matrix.labels, config.params, options);
    model.scaler = std::move(scaler);
    model.prune = std::move(report);
    model.schema_version = train.schema.version();
    model.meta.window_s = window_s;
    if (stats) {
        stats->rows_in = train.size();
        stats->rows_dropped = clean.rows_dropped;
    }
    return model;
}

PreparedRows prepare_rows(const OvRModel& model, const FeatureMatrix& m) {
    const FeatureMatrix projected = m.project(model.prune.kept);
    PreparedRows out;
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < projected.size(); ++r) {
        const auto& v = projected.rows[r].values;
        if (std::all_of(v.begin(), v.end(), [](const FeatureValue& x) { return x.has_value(); })) keep.push_back(r);
    }
    out.dropped = projected.size() - keep.size();
    const FeatureMatrix complete = projected.subset(keep);
    out.x = model.scaler.transform(complete);
    out.labels = complete.labels;
    for (const auto& row : complete.rows) out.session_ids.push_back(row.provenance.session_id);
    return out;
}

std::vector<DevicePrediction> predict_rows(const OvRModel& model, const DenseMatrix& x, std::optional<double> threshold,
                                           unsigned jobs) {
    std::vector<DevicePrediction> out(x.rows);
    parallel_for(x.rows, jobs, [&](std::size_t r) { out[r] = predict_device(model, x.row(r), threshold); });
    return out;
}

std::vector<DeviceMetrics> compute_metrics(std::span<const std::string> truth, std::span<const std::string> predicted,
                                           std::span<const std::string> devices) {
    if (truth.size() != predicted.size()) {
        throw Error(ErrorCode::SchemaMismatch, fmt::format("{} labels for {} predictions", truth.size(), predicted.size()));
    }
    std::vector<DeviceMetrics> out;
    for (const auto& d : devices) {
        DeviceMetrics m;
        m.device = d;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const bool actual = truth[i] == d, said = predicted[i] == d;
            if (actual && said) ++m.tp;
            else if (!actual && said) ++m.fp;
            else if (actual && !said) ++m.fn;
            else ++m.tn;
        }
        const auto n = static_cast<double>(truth.size());
        m.support = m.tp + m.fn;
        m.accuracy = truth.empty() ? 0.0 : static_cast<double>(m.tp + m.tn) / n;
        m.precision = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : (m.fn == 0 ? 1.0 : 0.0);
        m.recall = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : (m.fp == 0 ? 1.0 : 0.0);
        m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        out.push_back(std::move(m));
    }
    return out;
}

Stat describe(std::span<const double> values) {
    Stat s;
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size()));
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    return s;
}

namespace {

template <class F>
Stat describe_by(std::span<const DeviceMetrics> metrics, F field) {
    std::vector<double> xs;
    xs.reserve(metrics.size());
    for (const auto& m : metrics) xs.push_back(static_cast<double>(field(m)));
    return describe(xs);
}

}  // namespace

MetricsSummary summarize_metrics(std::span<const DeviceMetrics> metrics) {
    MetricsSummary s;
    s.accuracy = describe_by(metrics, [](const auto& m) { return m.accuracy; });
    s.precision = describe_by(metrics, [](const auto& m) { return m.precision; });
    s.recall = describe_by(metrics, [](const auto& m) { return m.recall; });
    s.f1 = describe_by(metrics, [](const auto& m) { return m.f1; });
    s.support = describe_by(metrics, [](const auto& m) { return m.support; });
    s.devices = metrics.size();
    s.perfect_devices = static_cast<std::size_t>(
        std::count_if(metrics.begin(), metrics.end(), [](const DeviceMetrics& m) { return m.accuracy == 1.0; }));
    return s;
}

ErrorSummary error_analysis(std::span<const DeviceMetrics> metrics) {
    if (metrics.empty()) throw Error(ErrorCode::PreconditionFailed, "error analysis needs at least one device");
    ErrorSummary s;
    s.fp = describe_by(metrics, [](const auto& m) { return m.fp; });
    s.fn = describe_by(metrics, [](const auto& m) { return m.fn; });
    s.devices = metrics.size();
    s.zero_error_devices = static_cast<std::size_t>(
        std::count_if(metrics.begin(), metrics.end(), [](const DeviceMetrics& m) { return m.fp == 0 && m.fn == 0; }));
    return s;
}

std::vector<ConfusionPair> confusion_pairs(std::span<const std::string> truth, std::span<const std::string> predicted) {
    std::map<std::pair<std::string, std::string>, std::size_t> counts;
    for (std::size_t i = 0; i < truth.size() && i < predicted.size(); ++i) {
        if (truth[i] == predicted[i]) continue;
        const auto& [lo, hi] = std::minmax(truth[i], predicted[i]);
        ++counts[{lo, hi}];
    }
    std::vector<ConfusionPair> out;
    for (const auto& [pair, n] : counts) out.push_back({pair.first, pair.second, n});
    std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.count > y.count; });
    return out;
}

Evaluation evaluate(const OvRModel& model, const FeatureMatrix& train, const FeatureMatrix& test,
                    const PipelineConfig& config, std::uint64_t seed) {
    assert_disjoint(train, test);
    PreparedRows rows = prepare_rows(model, test);
    if (rows.x.rows == 0) throw Error(ErrorCode::EmptyData, "no complete test rows to evaluate");
    if (config.oversample == OversampleMode::TrainAndTest) {
        const auto picks = oversample_indices<std::string>(rows.labels, derive_seed(seed, "test-oversample"));
        rows.x = rows.x.subset(picks);
        std::vector<std::string> labels;
        for (std::size_t p : picks) labels.push_back(rows.labels[p]);
        rows.labels = std::move(labels);
    }
    const auto preds = predict_rows(model, rows.x, config.unknown_threshold, config.jobs);
    std::vector<std::string> said;
    said.reserve(preds.size());
    for (const auto& p : preds) said.push_back(p.label);

    Evaluation ev;
    ev.devices = compute_metrics(rows.labels, said, model.devices());
    ev.summary = summarize_metrics(ev.devices);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < said.size(); ++i) correct += said[i] == rows.labels[i] ? 1 : 0;
    ev.multiclass_accuracy = static_cast<double>(correct) / static_cast<double>(said.size());
    ev.test_rows = said.size();
    ev.test_rows_dropped = rows.dropped;
    ev.confusions = confusion_pairs(rows.labels, said);
    return ev;
}

SplitAssignment experiment_split(std::span<const Session> sessions, const PipelineConfig& config, std::uint64_t seed) {
    const auto refs = session_refs(sessions);
    return session_split(refs, config.train_fraction, derive_seed(seed, "split"));
}

TrainRun run_window(std::span<const Session> sessions, const SplitAssignment& split, double window_s,
                    const PipelineConfig& config, std::uint64_t seed, const WindowCache* cache) {
    const FeatureMatrix m = window_matrix(sessions, window_s, cache, config.jobs);
    const TrainTest tt = split_rows(m, split);
    if (tt.train.empty()) throw Error(ErrorCode::EmptyData, fmt::format("no training flows within {} s", window_s));
    if (tt.test.empty()) throw Error(ErrorCode::EmptyData, fmt::format("no test flows within {} s", window_s));

    PipelineConfig cfg = config;
    cfg.params.seed = derive_seed(seed, "model");
    TrainRun run;
    run.result.window_s = window_s;
    run.result.train_rows = tt.train.size();
    run.model = fit_model(tt.train, cfg, window_s, &run.result.fit);
    run.result.prune = run.model.prune;
    run.result.eval = evaluate(run.model, tt.train, tt.test, cfg, seed);
    return run;
}

SweepResult window_sweep(std::span<const Session> sessions, std::span<const double> windows,
                         const PipelineConfig& config, std::uint64_t seed, const WindowCache* cache) {
    if (windows.empty()) throw Error(ErrorCode::PreconditionFailed, "no windows to sweep");
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (!(windows[i] > 0.0) || (i > 0 && !(windows[i] > windows[i - 1]))) {
            throw Error(ErrorCode::PreconditionFailed, "windows must be positive and strictly ascending");
        }
    }
    SweepResult out;
    out.split = experiment_split(sessions, config, seed);
    for (double w : windows) {
        try {
            out.windows.push_back(run_window(sessions, out.split, w, config, seed, cache).result);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::EmptyData && e.code() != ErrorCode::AllRowsDropped &&
                e.code() != ErrorCode::SingleClass) {
                throw;
            }
            WindowResult empty;
            empty.window_s = w;
            empty.empty = true;
            empty.empty_reason = e.what();
            out.windows.push_back(std::move(empty));
        }
    }
    return out;
}

namespace {

double multiclass_accuracy(const OvRModel& model, const FeatureMatrix& m, unsigned jobs, std::size_t* rows) {
    const PreparedRows p = prepare_rows(model, m);
    *rows = p.x.rows;
    if (p.x.rows == 0) return 0.0;
    const auto preds = predict_rows(model, p.x, std::nullopt, jobs);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i].label == p.labels[i] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

}  // namespace

std::vector<CurvePoint> learning_curve(const FeatureMatrix& m, std::span<const double> fractions,
                                       const PipelineConfig& config, std::uint64_t seed) {
    if (fractions.empty()) throw Error(ErrorCode::PreconditionFailed, "no fractions given");
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (!(fractions[i] > 0.0 && fractions[i] <= 1.0) || (i > 0 && !(fractions[i] > fractions[i - 1]))) {
            throw Error(ErrorCode::PreconditionFailed, "fractions must lie in (0, 1] and ascend strictly");
        }
    }
    const SplitAssignment split = session_split(m, config.train_fraction, derive_seed(seed, "split"));
    const TrainTest tt = split_rows(m, split);

    std::map<std::string, std::set<std::string>> by_label;
    for (std::size_t r = 0; r < tt.train.size(); ++r) by_label[tt.train.labels[r]].insert(tt.train.session_id(r));
    std::map<std::string, std::vector<std::string>> order;
    for (const auto& [label, ids] : by_label) {
        std::vector<std::string> v(ids.begin(), ids.end());
        Rng rng(derive_seed(derive_seed(seed, "curve"), label));
        rng.shuffle(std::span(v));
        order.emplace(label, std::move(v));
    }

    PipelineConfig cfg = config;
    cfg.params.seed = derive_seed(seed, "model");
    std::vector<CurvePoint> out;
    for (double f : fractions) {
        std::set<std::string> chosen;
        for (const auto& [label, ids] : order) {
            const auto k = static_cast<std::size_t>(std::floor(f * static_cast<double>(ids.size()) + 1e-9));
            if (k == 0) {
                throw Error(ErrorCode::InsufficientSessions,
                            fmt::format("fraction {} leaves device {} without training sessions", f, label));
            }
            chosen.insert(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
        }
        std::vector<std::size_t> picks;
        for (std::size_t r = 0; r < tt.train.size(); ++r) {
            if (chosen.count(tt.train.session_id(r))) picks.push_back(r);
        }
        const FeatureMatrix subset = tt.train.subset(picks);
        const OvRModel model = fit_model(subset, cfg, 0.0);

        CurvePoint p;
        p.fraction = f;
        p.train_sessions = chosen.size();
        p.train_accuracy = multiclass_accuracy(model, subset, cfg.jobs, &p.train_rows);
        p.test_accuracy = multiclass_accuracy(model, tt.test, cfg.jobs, &p.test_rows);
        out.push_back(p);
    }
    return out;
}

SessionPrediction predict_session(const OvRModel& model, const Session& session, std::optional<double> threshold) {
    const double window = model.meta.window_s;
    const Session cut = window > 0.0 ? truncate_session(session, window) : session;
    FeatureMatrix m;
    m.schema = FeatureSchema::full();
    for (auto& row : extract_session_features(cut, window)) m.append(std::move(row), session.device_label);
    if (m.empty()) throw Error(ErrorCode::EmptyData, fmt::format("session {} has no flows in the window", session.session_id));
    const FeatureMatrix projected = m.project(model.prune.kept);

    std::vector<std::size_t> use;
    for (std::size_t r = 0; r < projected.size(); ++r) {
        const auto& v = projected.rows[r].values;
        if (std::all_of(v.begin(), v.end(), [](const FeatureValue& x) { return x.has_value(); })) use.push_back(r);
    }
    if (use.empty()) {
        for (std::size_t r = 0; r < projected.size(); ++r) use.push_back(r);
    }

    std::map<std::string, double> total;
    std::vector<double> scaled(model.scaler.output_width());
    for (std::size_t r : use) {
        model.scaler.transform_row(projected.rows[r].values, scaled);
        for (const auto& [label, score] : device_scores(model, scaled)) total[label] += score;
    }
    for (auto& [label, score] : total) score /= static_cast<double>(use.size());

    SessionPrediction out;
    out.device = fuse_scores(total, threshold);
    out.flows_used = use.size();
    out.flows_total = projected.size();
    return out;
}

// ---- reports ----

namespace {

std::string num(double v) { return fmt::format("{:.6f}", v); }

std::string window_name(double w) { return fmt::format("{}", w); }

const char* kSweepHeader =
    "window_s\tstatus\ttrain_rows\ttest_rows\tdevices\tmean_accuracy\tstd_accuracy\tmin_accuracy\tmax_accuracy\t"
    "perfect_devices\tmulticlass_accuracy";
const char* kDeviceHeader = "window_s\tdevice\taccuracy\tprecision\trecall\tf1\tsupport\ttp\tfp\tfn\ttn";
const char* kCurveHeader = "fraction\ttrain_sessions\ttrain_rows\ttest_rows\ttrain_accuracy\ttest_accuracy";

std::string stat_row(const char* name, const Stat& s, bool integral = false) {
    if (integral) return fmt::format("{}\t{:.2f}\t{:.2f}\t{:.0f}\t{:.0f}", name, s.mean, s.std, s.min, s.max);
    return fmt::format("{}\t{}\t{}\t{}\t{}", name, num(s.mean), num(s.std), num(s.min), num(s.max));
}

std::vector<std::string> split_tabs(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto tab = line.find('\t', start);
        out.emplace_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return out;
}

std::string table_from_tsv(const std::string& tsv_rows) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(tsv_rows);
    std::string line;
    while (std::getline(in, line)) rows.push_back(split_tabs(line));
    if (rows.empty()) return {};
    const auto header = rows.front();
    rows.erase(rows.begin());
    return render_table(header, rows);
}

std::string window_summary(std::span<const DeviceMetrics> devices) {
    const MetricsSummary s = summarize_metrics(devices);
    std::string out = "  per-device one-vs-rest metrics\n";
    std::string tsv = "metric\tmean\tstd\tmin\tmax\n";
    tsv += stat_row("accuracy", s.accuracy) + "\n";
    tsv += stat_row("precision", s.precision) + "\n";
    tsv += stat_row("recall", s.recall) + "\n";
    tsv += stat_row("f1", s.f1) + "\n";
    tsv += stat_row("support", s.support, true) + "\n";
    out += table_from_tsv(tsv);
    out += fmt::format("  devices at accuracy 1.0: {}/{}\n\n", s.perfect_devices, s.devices);

    const ErrorSummary e = error_analysis(devices);
    out += "  error tallies\n";
    std::string etsv = "kind\tmin\tmax\tmean\n";
    etsv += fmt::format("false positives\t{:.0f}\t{:.0f}\t{:.2f}\n", e.fp.min, e.fp.max, e.fp.mean);
    etsv += fmt::format("false negatives\t{:.0f}\t{:.0f}\t{:.2f}\n", e.fn.min, e.fn.max, e.fn.mean);
    out += table_from_tsv(etsv);
    out += fmt::format("  devices with zero errors: {}/{}\n", e.zero_error_devices, e.devices);
    return out;
}

}  // namespace

std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size(), 0);
    const auto grow = [&](const std::vector<std::string>& r) {
        for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
    };
    grow(header);
    for (const auto& r : rows) grow(r);
    const auto line = [&](const std::vector<std::string>& r) {
        std::string s = "  ";
        for (std::size_t i = 0; i < width.size(); ++i) {
            const std::string cell = i < r.size() ? r[i] : "";
            s += i == 0 ? fmt::format("{:<{}}", cell, width[i]) : fmt::format("  {:>{}}", cell, width[i]);
        }
        while (!s.empty() && s.back() == ' ') s.pop_back();
        return s + "\n";
    };
    std::string out = line(header);
    std::size_t total = 0;
    for (std::size_t w : width) total += w + 2;
    out += "  " + std::string(total >= 2 ? total - 2 : 0, '-') + "\n";
    for (const auto& r : rows) out += line(r);
    return out;
}

std::string sweep_tsv(const SweepResult& sweep) {
    std::string out = std::string(kSweepHeader) + "\n";
    for (const auto& w : sweep.windows) {
        if (w.empty) {
            out += fmt::format("{}\tempty\t-\t-\t-\t-\t-\t-\t-\t-\t-\n", window_name(w.window_s));
            continue;
        }
        const auto& s = w.eval.summary;
        out += fmt::format("{}\tok\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", window_name(w.window_s), w.train_rows,
                           w.eval.test_rows, s.devices, num(s.accuracy.mean), num(s.accuracy.std),
                           num(s.accuracy.min), num(s.accuracy.max), s.perfect_devices, num(w.eval.multiclass_accuracy));
    }
    return out;
}

std::string per_device_tsv(const SweepResult& sweep) {
    std::string out = std::string(kDeviceHeader) + "\n";
    for (const auto& w : sweep.windows) {
        for (const auto& d : w.eval.devices) {
            out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", window_name(w.window_s), d.device,
                               num(d.accuracy), num(d.precision), num(d.recall), num(d.f1), d.support, d.tp, d.fp,
                               d.fn, d.tn);
        }
    }
    return out;
}

std::string error_analysis_text(const SweepResult& sweep) {
    std::string out;
    for (const auto& w : sweep.windows) {
        if (!out.empty()) out += "\n";
        out += fmt::format("window {} s\n", window_name(w.window_s));
        if (w.empty) {
            out += fmt::format("  EMPTY WINDOW: {}\n", w.empty_reason);
            continue;
        }
        out += fmt::format("  train rows {} ({} dropped for missing values), test rows {} ({} dropped)\n",
                           w.train_rows, w.fit.rows_dropped, w.eval.test_rows, w.eval.test_rows_dropped);
        out += fmt::format("  multiclass accuracy: {}\n\n", num(w.eval.multiclass_accuracy));
        out += window_summary(w.eval.devices);
        out += "\n  most confused device pairs\n";
        if (w.eval.confusions.empty()) {
            out += "  (none)\n";
            continue;
        }
        std::vector<std::vector<std::string>> rows;
        for (std::size_t i = 0; i < w.eval.confusions.size() && i < 5; ++i) {
            const auto& c = w.eval.confusions[i];
            rows.push_back({c.a, c.b, std::to_string(c.count)});
        }
        out += render_table({"device", "confused with", "rows"}, rows);
    }
    return out;
}

std::string learning_curve_tsv(std::span<const CurvePoint> points) {
    std::string out = std::string(kCurveHeader) + "\n";
    for (const auto& p : points) {
        out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", p.fraction, p.train_sessions, p.train_rows, p.test_rows,
                           num(p.train_accuracy), num(p.test_accuracy));
    }
    return out;
}

void write_sweep_reports(const SweepResult& sweep, const std::filesystem::path& dir) {
    const auto put = [&](const char* name, const std::string& text) {
        atomic_write_file(dir / name, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    };
    put("sweep.tsv", sweep_tsv(sweep));
    put("per_device_metrics.tsv", per_device_tsv(sweep));
    put("error_analysis.txt", error_analysis_text(sweep));
}

std::vector<WindowMetrics> parse_per_device_tsv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line != kDeviceHeader) {
        throw Error(ErrorCode::CorruptFile, "per-device metrics: unexpected header");
    }
    std::vector<WindowMetrics> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        const auto bad = [&] { return Error(ErrorCode::CorruptFile, fmt::format("per-device metrics line {}", line_no)); };
        if (f.size() != 11) throw bad();
        const auto real = [&](const std::string& s) {
            double v = 0.0;
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || p != s.data() + s.size()) throw bad();
            return v;
        };
        const auto count = [&](const std::string& s) {
            std::size_t v = 0;
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || p != s.data() + s.size()) throw bad();
            return v;
        };
        const double w = real(f[0]);
        if (out.empty() || out.back().window_s != w) out.push_back({w, {}});
        DeviceMetrics d;
        d.device = f[1];
        d.accuracy = real(f[2]);
        d.precision = real(f[3]);
        d.recall = real(f[4]);
        d.f1 = real(f[5]);
        d.support = count(f[6]);
        d.tp = count(f[7]);
        d.fp = count(f[8]);
        d.fn = count(f[9]);
        d.tn = count(f[10]);
        out.back().devices.push_back(std::move(d));
    }
    return out;
}

std::string render_saved_metrics(std::span<const WindowMetrics> windows) {
    std::string out;
    for (const auto& w : windows) {
        if (!out.empty()) out += "\n";
        out += fmt::format("window {} s\n", window_name(w.window_s));
        out += window_summary(w.devices);
    }
    return out;
}

}  // namespace iotid
