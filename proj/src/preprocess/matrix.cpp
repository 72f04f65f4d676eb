#include "iotid/matrix.hpp"

#include "iotid/error.hpp"

#include <fmt/format.h>

namespace iotid {

void FeatureMatrix::append(FeatureVector row, std::string label) {
    rows.push_back(std::move(row));
    labels.push_back(std::move(label));
}

void FeatureMatrix::check() const {
    if (labels.size() != rows.size()) {
        throw Error(ErrorCode::SchemaMismatch, fmt::format("{} rows but {} labels", rows.size(), labels.size()));
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].values.size() != schema.size()) {
            throw Error(ErrorCode::SchemaMismatch,
                        fmt::format("row {} has {} values, schema has {}", i, rows[i].values.size(), schema.size()));
        }
    }
}

FeatureMatrix FeatureMatrix::subset(std::span<const std::size_t> picks) const {
    FeatureMatrix out;
    out.schema = schema;
    out.rows.reserve(picks.size());
    out.labels.reserve(picks.size());
    for (std::size_t i : picks) {
        out.rows.push_back(rows.at(i));
        out.labels.push_back(labels.at(i));
    }
    return out;
}

FeatureMatrix FeatureMatrix::project(const FeatureSchema& target) const {
    std::vector<std::size_t> source;
    source.reserve(target.size());
    for (const auto& c : target.columns()) {
        const auto at = schema.index_of(c.name);
        if (!at) throw Error(ErrorCode::SchemaMismatch, "column " + c.name + " not in source schema");
        source.push_back(*at);
    }
    FeatureMatrix out;
    out.schema = target;
    out.labels = labels;
    out.rows.reserve(rows.size());
    for (const auto& r : rows) {
        FeatureVector v;
        v.provenance = r.provenance;
        v.values.reserve(source.size());
        for (std::size_t s : source) v.values.push_back(r.values[s]);
        out.rows.push_back(std::move(v));
    }
    return out;
}

std::vector<double> FeatureMatrix::column_values(std::size_t col) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        if (r.values[col]) out.push_back(*r.values[col]);
    }
    return out;
}

DenseMatrix DenseMatrix::subset(std::span<const std::size_t> picks) const {
    DenseMatrix out(picks.size(), cols);
    out.column_names = column_names;
    for (std::size_t i = 0; i < picks.size(); ++i) {
        const auto src = row(picks[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

}  // namespace iotid
