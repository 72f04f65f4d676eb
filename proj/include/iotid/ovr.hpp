#pragma once

#include "iotid/forest.hpp"
#include "iotid/preprocess.hpp"
#include "iotid/pruning.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace iotid {

inline constexpr std::string_view kUnknownDevice = "UNKNOWN";

struct TrainingMeta {
    std::uint64_t seed = 0;
    double window_s = 0.0;
    std::uint64_t dataset_fingerprint = 0;
    std::uint64_t train_rows = 0;

    bool operator==(const TrainingMeta&) const = default;
};

// One binary forest per device plus everything inference needs to turn a raw
// feature vector into forest input.
struct OvRModel {
    std::map<std::string, RandomForest> forests;  // device label -> "device vs rest"
    Scaler scaler;
    PruneReport prune;
    std::string schema_version;
    TrainingMeta meta;

    std::vector<std::string> devices() const;
    bool operator==(const OvRModel&) const = default;
};

struct OvrOptions {
    bool balance_tasks = true;  // oversample each binary task to parity
    unsigned jobs = 1;
};

// Seed of a device's forest: depends only on the base seed and the label, so
// a forest never changes when other devices are added.
std::uint64_t device_seed(std::uint64_t base, std::string_view device);

// Trains the binary forest for `device` against every other row.
RandomForest train_device_forest(const DenseMatrix& x, std::span<const std::string> labels, const std::string& device,
                                 const HyperParams& params, const OvrOptions& options = {});

// Throws Error{SingleClass} for fewer than two distinct labels.
OvRModel train_ovr(const DenseMatrix& x, std::span<const std::string> labels, const HyperParams& params,
                   const OvrOptions& options = {});

// Adds (or retrains) exactly one forest; other forests are untouched.
void add_device(OvRModel& model, const std::string& device, const DenseMatrix& x, std::span<const std::string> labels,
                const HyperParams& params, const OvrOptions& options = {});

struct DevicePrediction {
    std::string label;  // kUnknownDevice when below the threshold
    double score = 0.0;

    bool operator==(const DevicePrediction&) const = default;
};

// Positive-class probability per device for one scaled row.
std::map<std::string, double> device_scores(const OvRModel& model, std::span<const double> row);

// argmax over device scores; equal scores resolve to the lexicographically
// smaller label. With a threshold, scores below it yield UNKNOWN.
DevicePrediction fuse_scores(const std::map<std::string, double>& scores, std::optional<double> threshold = {});

DevicePrediction predict_device(const OvRModel& model, std::span<const double> row,
                                std::optional<double> threshold = {});

// Stable fingerprint of a training matrix and its labels.
std::uint64_t dataset_fingerprint(const DenseMatrix& x, std::span<const std::string> labels);

// Self-describing binary artifact with a versioned magic header and CRC.
inline constexpr std::uint32_t kModelFormatVersion = 1;
std::vector<std::uint8_t> serialize_model(const OvRModel& model);
// Throws Error{SchemaVersionMismatch} for other format versions and
// Error{CorruptFile} for damaged files.
OvRModel deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(const OvRModel& model, const std::filesystem::path& path);
OvRModel load_model(const std::filesystem::path& path);

struct SearchSpace {
    std::vector<std::size_t> n_trees{50, 100, 200, 300};
    std::vector<std::optional<std::size_t>> max_depth{std::nullopt, 10, 20, 30};
    std::vector<std::size_t> min_samples_split{2, 5, 10};
    std::vector<std::size_t> min_samples_leaf{1, 2, 4};
    std::vector<MaxFeatures> max_features{{MaxFeatures::Kind::Sqrt, 1.0},
                                          {MaxFeatures::Kind::Log2, 1.0},
                                          {MaxFeatures::Kind::Fraction, 0.5}};

    std::size_t grid_size() const;
    // Grid point by mixed-radix index (n_trees varies slowest).
    HyperParams at(std::size_t index, std::uint64_t seed) const;
};

struct CandidateScore {
    HyperParams params;
    std::vector<double> fold_scores;
    double mean = 0.0;
};

struct SearchResult {
    HyperParams best;
    std::size_t best_index = 0;
    std::vector<CandidateScore> candidates;  // in sampling order

    std::string to_text() const;
};

// Session-level folds, stratified by device: each label's sessions are
// shuffled and dealt round-robin into k folds.
std::vector<std::size_t> session_folds(std::span<const std::string> session_ids, std::span<const std::string> labels,
                                       std::size_t k_folds, std::uint64_t seed);

// Samples n_iter distinct grid points (the whole grid when it is smaller),
// scores each by mean multiclass accuracy over k session-level folds, and
// returns the best; ties go to fewer trees, then shallower trees, then the
// earlier candidate. Throws Error{EmptySpace} when any dimension is empty.
SearchResult randomized_search_cv(const DenseMatrix& x, std::span<const std::string> labels,
                                  std::span<const std::string> session_ids, const SearchSpace& space,
                                  std::size_t n_iter, std::size_t k_folds, std::uint64_t seed,
                                  const OvrOptions& options = {});

}  // namespace iotid
