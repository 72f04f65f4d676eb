#pragma once

#include "iotid/features.hpp"

#include <span>
#include <string>
#include <vector>

namespace iotid {

// Per-flow rows (possibly with Missing values) under one schema, with the
// device label of each row's session.
struct FeatureMatrix {
    FeatureSchema schema;
    std::vector<FeatureVector> rows;
    std::vector<std::string> labels;

    std::size_t size() const noexcept { return rows.size(); }
    bool empty() const noexcept { return rows.empty(); }
    const std::string& session_id(std::size_t row) const { return rows[row].provenance.session_id; }

    void append(FeatureVector row, std::string label);

    // Throws Error{SchemaMismatch} if any row length differs from the schema
    // or the label array is out of step.
    void check() const;

    // Rows at the given positions, in that order.
    FeatureMatrix subset(std::span<const std::size_t> rows) const;

    // Columns restricted to `schema` (which must be a subset of this one).
    FeatureMatrix project(const FeatureSchema& target) const;

    // Present values of one column (Missing skipped).
    std::vector<double> column_values(std::size_t col) const;
};

// Dense row-major numeric matrix handed to the learner.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;
    std::vector<std::string> column_names;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }

    DenseMatrix subset(std::span<const std::size_t> rows) const;
};

}  // namespace iotid
