#pragma once

#include "iotid/matrix.hpp"
#include "iotid/random.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace iotid {

struct NullDrop {
    FeatureMatrix matrix;
    std::size_t rows_dropped = 0;
    std::vector<std::size_t> missing_per_column;  // aligned with the schema
};

// Removes every row with a Missing value in any numeric column. Throws
// Error{AllRowsDropped} when a non-empty input loses all of its rows.
NullDrop drop_nulls(const FeatureMatrix& m);

enum class SplitSide : std::uint8_t { Train, Test };

struct SplitAssignment {
    std::set<std::string> train_sessions;
    std::set<std::string> test_sessions;
    std::uint64_t seed = 0;
    double train_fraction = 0.8;

    SplitSide side(const std::string& session_id) const;
    bool contains(const std::string& session_id) const {
        return train_sessions.count(session_id) != 0 || test_sessions.count(session_id) != 0;
    }

    // "# seed=<s> train_fraction=<f>" then `session_id<TAB>train|test` lines.
    std::string to_text() const;
    static SplitAssignment parse(std::string_view text);

    bool operator==(const SplitAssignment&) const = default;
};

struct SessionRef {
    std::string session_id;
    std::string device_label;
};

// Stratified by device label: each label's sessions are shuffled with the seed
// and the first ceil(fraction * n) go to training, leaving at least one for test.
// Throws Error{InsufficientSessions} for labels with fewer than two sessions.
SplitAssignment session_split(std::span<const SessionRef> sessions, double train_fraction, std::uint64_t seed);
SplitAssignment session_split(const FeatureMatrix& m, double train_fraction, std::uint64_t seed);

struct TrainTest {
    FeatureMatrix train;
    FeatureMatrix test;
};

// Rows of sessions outside the assignment are discarded.
TrainTest split_rows(const FeatureMatrix& m, const SplitAssignment& split);

// Throws Error{LeakageDetected} if any session id appears on both sides.
void assert_disjoint(const FeatureMatrix& train, const FeatureMatrix& test);

// z-score for numeric columns, one-hot for categorical columns (categories
// seen in training; unseen ones encode as all zeros), binary passed through.
class Scaler {
public:
    struct Column {
        std::string name;
        FeatureKind kind = FeatureKind::Numeric;
        double mean = 0.0;
        double std = 0.0;
        double fill = 0.0;              // replaces Missing at transform time
        std::vector<double> categories;  // sorted, categorical only

        bool operator==(const Column&) const = default;
    };

    Scaler() = default;

    static Scaler fit(const FeatureMatrix& train);

    bool fitted() const noexcept { return fitted_; }
    const std::vector<Column>& columns() const noexcept { return columns_; }
    const std::string& schema_version() const noexcept { return schema_version_; }
    std::vector<std::string> output_names() const;
    std::size_t output_width() const;

    // Throws Error{NotFitted} before fit and Error{SchemaMismatch} when the
    // matrix columns differ from the fitted ones.
    DenseMatrix transform(const FeatureMatrix& m) const;
    void transform_row(std::span<const FeatureValue> values, std::span<double> out) const;

    // Reconstruct from serialized state.
    static Scaler from_columns(std::string schema_version, std::vector<Column> columns);

    bool operator==(const Scaler&) const = default;

private:
    bool fitted_ = false;
    std::string schema_version_;
    std::vector<Column> columns_;
};

// Row positions of a balanced sample: every original row once (in order),
// then minority-class duplicates drawn with replacement until each class has
// the majority count. Classes are visited in sorted order.
template <class Label>
std::vector<std::size_t> oversample_indices(std::span<const Label> labels, std::uint64_t seed) {
    std::map<Label, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    std::size_t majority = 0;
    for (const auto& [label, rows] : by_class) majority = std::max(majority, rows.size());

    std::vector<std::size_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = i;
    Rng rng(seed);
    for (const auto& [label, rows] : by_class) {
        for (std::size_t k = rows.size(); k < majority; ++k) out.push_back(rows[rng.index(rows.size())]);
    }
    return out;
}

// FeatureMatrix form. Throws Error{EmptyClass} if `required_labels` names a
// class without rows.
FeatureMatrix oversample_balance(const FeatureMatrix& m, std::uint64_t seed,
                                 std::span<const std::string> required_labels = {});

}  // namespace iotid
