#pragma once

#include "iotid/matrix.hpp"

#include <string>
#include <vector>

namespace iotid {

// L = linear combination, C = high correlation, V = low variance,
// D = overlapping derived feature.
enum class PruneReason : char { Linear = 'L', Correlated = 'C', LowVariance = 'V', Derived = 'D' };

struct Removal {
    std::string feature;
    PruneReason reason = PruneReason::Linear;
    std::string partner;  // correlate / parent / source column, if any
    double value = 0.0;   // r for C, variance for V, rows checked for L
    std::string evidence;

    bool operator==(const Removal&) const = default;
};

struct PruneReport {
    std::vector<Removal> removed;
    FeatureSchema kept;

    std::string to_text() const;
    bool operator==(const PruneReport&) const = default;
};

// target = sum of parents, verified exactly on every row.
struct LinearRule {
    std::string target;
    std::vector<std::string> parents;
};

// feature carries no information beyond `source`.
struct DerivedRule {
    std::string feature;
    std::string source;
};

struct PruneConfig {
    double correlation_threshold = 0.9;
    double variance_epsilon = 1e-8;
    std::vector<LinearRule> linear_rules = {
        {"pkts_tot", {"pkts_fwd", "pkts_bwd"}},
        {"bytes_tot", {"bytes_fwd", "bytes_bwd"}},
    };
    std::vector<DerivedRule> derived_rules = {
        {"down_up_byte_ratio", "down_up_pkt_ratio"},
    };
};

// Pearson r over rows where both columns are present; nullopt when fewer
// than two such rows exist or either side is constant.
std::optional<double> pearson(const FeatureMatrix& m, std::size_t a, std::size_t b);

// Population variance of the present values (0 when none are present).
double column_variance(const FeatureMatrix& m, std::size_t col);

// Each stage returns only its own removals; none of them mutate the input.
std::vector<Removal> prune_linear_combinations(const FeatureMatrix& m, const std::vector<LinearRule>& rules);
std::vector<Removal> prune_correlated(const FeatureMatrix& m, double threshold);
std::vector<Removal> prune_low_variance(const FeatureMatrix& m, double epsilon);
std::vector<Removal> prune_derived(const FeatureSchema& schema, const std::vector<DerivedRule>& rules);

// L -> C -> V -> D, each stage seeing the columns the previous ones kept.
PruneReport validate_features(const FeatureMatrix& m, const PruneConfig& config = {});

// Replays a fitted report on other data (e.g. the test split).
FeatureMatrix apply_prune(const PruneReport& report, const FeatureMatrix& m);

}  // namespace iotid
