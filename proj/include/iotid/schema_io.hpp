#pragma once

#include "iotid/binary_io.hpp"
#include "iotid/error.hpp"
#include "iotid/features.hpp"

namespace iotid {

inline void write_schema(ByteWriter& w, const FeatureSchema& schema) {
    w.str(schema.version());
    w.u64(schema.size());
    for (const auto& c : schema.columns()) {
        w.str(c.name);
        w.u8(static_cast<std::uint8_t>(c.kind));
        w.str(c.units);
    }
}

inline FeatureKind read_kind(ByteReader& r) {
    const std::uint8_t k = r.u8();
    if (k > static_cast<std::uint8_t>(FeatureKind::Binary)) throw Error(ErrorCode::CorruptFile, "unknown feature kind");
    return static_cast<FeatureKind>(k);
}

inline FeatureSchema read_schema(ByteReader& r) {
    std::string version = r.str();
    const std::size_t n = r.count(9);
    std::vector<FeatureColumn> cols;
    cols.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        FeatureColumn c;
        c.name = r.str();
        c.kind = read_kind(r);
        c.units = r.str();
        cols.push_back(std::move(c));
    }
    return FeatureSchema(std::move(version), std::move(cols));
}

}  // namespace iotid
