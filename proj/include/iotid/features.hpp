#pragma once

#include "iotid/packet.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace iotid {

enum class FeatureKind : std::uint8_t { Numeric = 0, Categorical = 1, Binary = 2 };

std::string_view to_string(FeatureKind kind) noexcept;

struct FeatureColumn {
    std::string name;
    FeatureKind kind = FeatureKind::Numeric;
    std::string units;

    bool operator==(const FeatureColumn&) const = default;
};

class FeatureSchema {
public:
    FeatureSchema() = default;
    FeatureSchema(std::string version, std::vector<FeatureColumn> columns);

    // The complete per-flow catalogue: 47 columns in catalogue order.
    static const FeatureSchema& full();

    const std::string& version() const noexcept { return version_; }
    const std::vector<FeatureColumn>& columns() const noexcept { return columns_; }
    std::size_t size() const noexcept { return columns_.size(); }
    const FeatureColumn& operator[](std::size_t i) const { return columns_[i]; }

    std::optional<std::size_t> index_of(std::string_view name) const;
    bool contains(std::string_view name) const { return index_of(name).has_value(); }

    // Subset in this schema's order; unknown names are ignored.
    FeatureSchema select(std::span<const std::string> names) const;
    std::vector<std::string> names() const;

    bool operator==(const FeatureSchema&) const = default;

private:
    std::string version_;
    std::vector<FeatureColumn> columns_;
};

inline constexpr std::string_view kSchemaVersion = "flowfeat-v1";

// Column positions in FeatureSchema::full().
namespace col {
enum : std::size_t {
    dur,
    pkts_fwd, pkts_bwd, pkts_tot,
    bytes_fwd, bytes_bwd, bytes_tot,
    pktlen_fwd_mean, pktlen_fwd_std, pktlen_fwd_min, pktlen_fwd_max,
    pktlen_bwd_mean, pktlen_bwd_std, pktlen_bwd_min, pktlen_bwd_max,
    iat_fwd_mean, iat_fwd_std, iat_fwd_min, iat_fwd_max,
    iat_bwd_mean, iat_bwd_std, iat_bwd_min, iat_bwd_max,
    iat_tot_mean, iat_tot_std,
    pps, bps,
    down_up_pkt_ratio, down_up_byte_ratio,
    syn_cnt, ack_cnt, fin_cnt, rst_cnt, psh_cnt, urg_cnt, ece_cnt, cwr_cnt,
    payload_entropy_fwd, payload_entropy_bwd,
    payload_nonzero_frac_fwd, payload_nonzero_frac_bwd,
    has_fwd, has_bwd,
    proto,
    sport_bucket, dport_bucket,
    internal_dst,
    count
};
}  // namespace col

static_assert(col::count == 47);

struct Provenance {
    std::string session_id;
    std::uint32_t flow_index = 0;
    double window_s = 0.0;

    bool operator==(const Provenance&) const = default;
};

// std::nullopt is the explicit Missing marker; present values are finite.
using FeatureValue = std::optional<double>;

struct FeatureVector {
    std::vector<FeatureValue> values;
    Provenance provenance;

    bool operator==(const FeatureVector&) const = default;
};

enum class PortBucket : std::uint8_t {
    WellKnownDns = 0,
    WellKnownHttp,
    WellKnownHttps,
    WellKnownNtp,
    WellKnownDhcp,
    WellKnownMdns,
    WellKnownMqtt,
    OtherSystem,
    Registered,
    Ephemeral,
};

std::string_view to_string(PortBucket bucket) noexcept;

PortBucket port_bucket(std::uint16_t port) noexcept;

// RFC1918 membership; IPv6 is never internal.
bool is_internal_dst(const IpAddress& ip) noexcept;

// Shannon entropy in bits/byte. Throws Error{EmptyInput} on an empty span.
double payload_entropy(std::span<const std::uint8_t> bytes);

// All 47 catalogue values for one flow, in FeatureSchema::full() order.
// Throws Error{EmptyFlow} for a flow without packets.
FeatureVector extract_features(const Flow& flow);

// Every flow of a (possibly truncated) session, provenance filled in.
std::vector<FeatureVector> extract_session_features(const Session& session, double window_s);

}  // namespace iotid
