#pragma once

#include "iotid/cache.hpp"
#include "iotid/flow.hpp"
#include "iotid/ovr.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace iotid {

enum class OversampleMode : std::uint8_t {
    Train,         // balance each binary training task; test rows untouched
    TrainAndTest,  // additionally balance the test rows by device label
};

std::string_view to_string(OversampleMode mode) noexcept;
// "train" | "train-and-test"; Error{BadConfig} otherwise.
OversampleMode parse_oversample_mode(std::string_view text);

struct PipelineConfig {
    HyperParams params;  // params.seed is replaced by one derived from the run seed
    double train_fraction = 0.8;
    OversampleMode oversample = OversampleMode::Train;
    std::optional<double> unknown_threshold;
    PruneConfig prune;
    unsigned jobs = 1;
};

inline const std::vector<double> kDefaultWindows{10, 20, 30, 45, 60, 75, 90, 105};

// Loads every manifest session, untruncated, in manifest order.
std::vector<Session> load_sessions(std::span<const ManifestEntry> entries, unsigned jobs = 1);

std::vector<SessionRef> session_refs(std::span<const Session> sessions);

// Feature rows of every session truncated to the window, in session order.
// With a cache, hits are read back and misses computed then written; a
// damaged cache file throws Error{CorruptFile}.
FeatureMatrix window_matrix(std::span<const Session> sessions, double window_s, const WindowCache* cache = nullptr,
                            unsigned jobs = 1);

struct FitStats {
    std::size_t rows_in = 0;
    std::size_t rows_dropped = 0;  // rows with a Missing value after pruning
};

// prune -> drop nulls -> scale -> one-vs-rest forests, all fitted on `train`.
OvRModel fit_model(const FeatureMatrix& train, const PipelineConfig& config, double window_s,
                   FitStats* stats = nullptr);

// Model input for a matrix: kept columns, rows without Missing, scaled.
struct PreparedRows {
    DenseMatrix x;
    std::vector<std::string> labels;
    std::vector<std::string> session_ids;
    std::size_t dropped = 0;
};
PreparedRows prepare_rows(const OvRModel& model, const FeatureMatrix& m);

std::vector<DevicePrediction> predict_rows(const OvRModel& model, const DenseMatrix& x,
                                           std::optional<double> threshold = {}, unsigned jobs = 1);

struct DeviceMetrics {
    std::string device;
    double accuracy = 0.0;  // binary "device vs rest" over all test rows
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;  // rows whose true label is the device
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    bool operator==(const DeviceMetrics&) const = default;
};

// Confusion counts per device from multiclass predictions. A device with no
// positive predictions has precision 1 when it also has no support, else 0;
// recall is treated the same way.
std::vector<DeviceMetrics> compute_metrics(std::span<const std::string> truth, std::span<const std::string> predicted,
                                           std::span<const std::string> devices);

struct Stat {
    double mean = 0.0, std = 0.0, min = 0.0, max = 0.0;  // population std
};
Stat describe(std::span<const double> values);

struct MetricsSummary {
    Stat accuracy, precision, recall, f1, support;
    std::size_t perfect_devices = 0;  // accuracy exactly 1
    std::size_t devices = 0;
};
MetricsSummary summarize_metrics(std::span<const DeviceMetrics> metrics);

struct ErrorSummary {
    Stat fp, fn;
    std::size_t zero_error_devices = 0;
    std::size_t devices = 0;
};
// Throws Error{PreconditionFailed} for an empty list.
ErrorSummary error_analysis(std::span<const DeviceMetrics> metrics);

// Unordered device pair and how often either was predicted as the other.
struct ConfusionPair {
    std::string a, b;  // a < b
    std::size_t count = 0;
};
// Most confused first; ties by label order.
std::vector<ConfusionPair> confusion_pairs(std::span<const std::string> truth, std::span<const std::string> predicted);

struct Evaluation {
    std::vector<DeviceMetrics> devices;
    MetricsSummary summary;
    double multiclass_accuracy = 0.0;
    std::size_t test_rows = 0;
    std::size_t test_rows_dropped = 0;
    std::vector<ConfusionPair> confusions;
};

// Throws Error{LeakageDetected} if train and test share a session.
Evaluation evaluate(const OvRModel& model, const FeatureMatrix& train, const FeatureMatrix& test,
                    const PipelineConfig& config, std::uint64_t seed);

struct WindowResult {
    double window_s = 0.0;
    bool empty = false;  // no usable rows survived at this window
    std::string empty_reason;
    std::size_t train_rows = 0;
    FitStats fit;
    PruneReport prune;
    Evaluation eval;
};

struct TrainRun {
    OvRModel model;
    WindowResult result;
};

// One window of an experiment on a fixed split. Throws Error{EmptyData} when
// the window leaves nothing to train or test on.
TrainRun run_window(std::span<const Session> sessions, const SplitAssignment& split, double window_s,
                    const PipelineConfig& config, std::uint64_t seed, const WindowCache* cache = nullptr);

SplitAssignment experiment_split(std::span<const Session> sessions, const PipelineConfig& config, std::uint64_t seed);

struct SweepResult {
    SplitAssignment split;
    std::vector<WindowResult> windows;
};

// Windows must be positive and strictly ascending (Error{PreconditionFailed}).
// The split is drawn once; a window without usable rows is reported as empty.
SweepResult window_sweep(std::span<const Session> sessions, std::span<const double> windows,
                         const PipelineConfig& config, std::uint64_t seed, const WindowCache* cache = nullptr);

struct CurvePoint {
    double fraction = 0.0;
    std::size_t train_sessions = 0;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    double train_accuracy = 0.0;  // multiclass, on the rows the model was fitted on
    double test_accuracy = 0.0;   // multiclass, held-out sessions
};

// Nested session subsets of the training side: per device, the first
// floor(fraction * n) of a seeded ordering. Throws Error{InsufficientSessions}
// when a device would get no session.
std::vector<CurvePoint> learning_curve(const FeatureMatrix& m, std::span<const double> fractions,
                                       const PipelineConfig& config, std::uint64_t seed);

struct SessionPrediction {
    DevicePrediction device;
    std::size_t flows_used = 0;
    std::size_t flows_total = 0;
};

// Truncates to the model's window and averages per-flow device scores. Flows
// with Missing values are skipped unless no complete flow exists. Throws
// Error{EmptyData} if the window holds no flow.
SessionPrediction predict_session(const OvRModel& model, const Session& session,
                                  std::optional<double> threshold = {});

// ---- reports ----

std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

std::string sweep_tsv(const SweepResult& sweep);
std::string per_device_tsv(const SweepResult& sweep);
std::string error_analysis_text(const SweepResult& sweep);
std::string learning_curve_tsv(std::span<const CurvePoint> points);

// sweep.tsv, per_device_metrics.tsv and error_analysis.txt.
void write_sweep_reports(const SweepResult& sweep, const std::filesystem::path& dir);

struct WindowMetrics {
    double window_s = 0.0;
    std::vector<DeviceMetrics> devices;
};
// Inverse of per_device_tsv (Error{CorruptFile} on malformed input).
std::vector<WindowMetrics> parse_per_device_tsv(std::string_view text);

// Per-window metric summaries and error tallies of saved per-device rows.
std::string render_saved_metrics(std::span<const WindowMetrics> windows);

}  // namespace iotid
