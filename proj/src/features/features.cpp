#include "iotid/features.hpp"

#include "iotid/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace iotid {

std::string_view to_string(FeatureKind kind) noexcept {
    switch (kind) {
    case FeatureKind::Numeric: return "numeric";
    case FeatureKind::Categorical: return "categorical";
    case FeatureKind::Binary: return "binary";
    }
    return "numeric";
}

FeatureSchema::FeatureSchema(std::string version, std::vector<FeatureColumn> columns)
    : version_(std::move(version)), columns_(std::move(columns)) {}

const FeatureSchema& FeatureSchema::full() {
    static const FeatureSchema schema = [] {
        using K = FeatureKind;
        std::vector<FeatureColumn> c = {
            {"dur", K::Numeric, "s"},
            {"pkts_fwd", K::Numeric, "count"},
            {"pkts_bwd", K::Numeric, "count"},
            {"pkts_tot", K::Numeric, "count"},
            {"bytes_fwd", K::Numeric, "bytes"},
            {"bytes_bwd", K::Numeric, "bytes"},
            {"bytes_tot", K::Numeric, "bytes"},
            {"pktlen_fwd_mean", K::Numeric, "bytes"},
            {"pktlen_fwd_std", K::Numeric, "bytes"},
            {"pktlen_fwd_min", K::Numeric, "bytes"},
            {"pktlen_fwd_max", K::Numeric, "bytes"},
            {"pktlen_bwd_mean", K::Numeric, "bytes"},
            {"pktlen_bwd_std", K::Numeric, "bytes"},
            {"pktlen_bwd_min", K::Numeric, "bytes"},
            {"pktlen_bwd_max", K::Numeric, "bytes"},
            {"iat_fwd_mean", K::Numeric, "s"},
            {"iat_fwd_std", K::Numeric, "s"},
            {"iat_fwd_min", K::Numeric, "s"},
            {"iat_fwd_max", K::Numeric, "s"},
            {"iat_bwd_mean", K::Numeric, "s"},
            {"iat_bwd_std", K::Numeric, "s"},
            {"iat_bwd_min", K::Numeric, "s"},
            {"iat_bwd_max", K::Numeric, "s"},
            {"iat_tot_mean", K::Numeric, "s"},
            {"iat_tot_std", K::Numeric, "s"},
            {"pps", K::Numeric, "pkt/s"},
            {"bps", K::Numeric, "B/s"},
            {"down_up_pkt_ratio", K::Numeric, ""},
            {"down_up_byte_ratio", K::Numeric, ""},
            {"syn_cnt", K::Numeric, "count"},
            {"ack_cnt", K::Numeric, "count"},
            {"fin_cnt", K::Numeric, "count"},
            {"rst_cnt", K::Numeric, "count"},
            {"psh_cnt", K::Numeric, "count"},
            {"urg_cnt", K::Numeric, "count"},
            {"ece_cnt", K::Numeric, "count"},
            {"cwr_cnt", K::Numeric, "count"},
            {"payload_entropy_fwd", K::Numeric, "bits/byte"},
            {"payload_entropy_bwd", K::Numeric, "bits/byte"},
            {"payload_nonzero_frac_fwd", K::Numeric, "[0,1]"},
            {"payload_nonzero_frac_bwd", K::Numeric, "[0,1]"},
            {"has_fwd", K::Binary, "binary"},
            {"has_bwd", K::Binary, "binary"},
            {"proto", K::Categorical, "categ."},
            {"sport_bucket", K::Categorical, "categ."},
            {"dport_bucket", K::Categorical, "categ."},
            {"internal_dst", K::Binary, "binary"},
        };
        return FeatureSchema(std::string(kSchemaVersion), std::move(c));
    }();
    return schema;
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (columns_[i].name == name) return i;
    }
    return std::nullopt;
}

FeatureSchema FeatureSchema::select(std::span<const std::string> names) const {
    std::vector<FeatureColumn> kept;
    for (const auto& c : columns_) {
        if (std::find(names.begin(), names.end(), c.name) != names.end()) kept.push_back(c);
    }
    return FeatureSchema(version_, std::move(kept));
}

std::vector<std::string> FeatureSchema::names() const {
    std::vector<std::string> out;
    out.reserve(columns_.size());
    for (const auto& c : columns_) out.push_back(c.name);
    return out;
}

std::string_view to_string(PortBucket bucket) noexcept {
    switch (bucket) {
    case PortBucket::WellKnownDns: return "WELL_KNOWN_DNS";
    case PortBucket::WellKnownHttp: return "WELL_KNOWN_HTTP";
    case PortBucket::WellKnownHttps: return "WELL_KNOWN_HTTPS";
    case PortBucket::WellKnownNtp: return "WELL_KNOWN_NTP";
    case PortBucket::WellKnownDhcp: return "WELL_KNOWN_DHCP";
    case PortBucket::WellKnownMdns: return "WELL_KNOWN_MDNS";
    case PortBucket::WellKnownMqtt: return "WELL_KNOWN_MQTT";
    case PortBucket::OtherSystem: return "OTHER_SYSTEM";
    case PortBucket::Registered: return "REGISTERED";
    case PortBucket::Ephemeral: return "EPHEMERAL";
    }
    return "OTHER_SYSTEM";
}

PortBucket port_bucket(std::uint16_t port) noexcept {
    switch (port) {
    case 53: return PortBucket::WellKnownDns;
    case 80: return PortBucket::WellKnownHttp;
    case 443: return PortBucket::WellKnownHttps;
    case 123: return PortBucket::WellKnownNtp;
    case 67:
    case 68: return PortBucket::WellKnownDhcp;
    case 5353: return PortBucket::WellKnownMdns;
    case 1883:
    case 8883: return PortBucket::WellKnownMqtt;
    default: break;
    }
    if (port <= 1023) return PortBucket::OtherSystem;
    if (port <= 49151) return PortBucket::Registered;
    return PortBucket::Ephemeral;
}

bool is_internal_dst(const IpAddress& ip) noexcept {
    if (!ip.is_v4()) return false;
    const auto& b = ip.bytes();
    if (b[0] == 10) return true;
    if (b[0] == 172 && (b[1] & 0xf0) == 16) return true;
    return b[0] == 192 && b[1] == 168;
}

double payload_entropy(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw Error(ErrorCode::EmptyInput, "entropy of an empty payload");
    std::array<std::size_t, 256> counts{};
    for (auto b : bytes) ++counts[b];
    const double n = static_cast<double>(bytes.size());
    double h = 0.0;
    for (auto c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    return std::clamp(h, 0.0, 8.0);
}

namespace {

struct Summary {
    FeatureValue mean, std, min, max;
};

// Population std; undefined (Missing) below two samples.
Summary summarize(const std::vector<double>& xs) {
    Summary s;
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());
    s.mean = mean;
    s.min = *std::min_element(xs.begin(), xs.end());
    s.max = *std::max_element(xs.begin(), xs.end());
    if (xs.size() >= 2) {
        double ss = 0.0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        s.std = std::sqrt(ss / static_cast<double>(xs.size()));
    }
    return s;
}

std::vector<double> gaps(const std::vector<double>& times) {
    std::vector<double> out;
    for (std::size_t i = 1; i < times.size(); ++i) out.push_back(times[i] - times[i - 1]);
    return out;
}

struct Direction {
    std::size_t packets = 0;
    double bytes = 0.0;
    std::vector<double> lengths;
    std::vector<double> times;
    std::vector<std::uint8_t> payload;  // capped concatenation of payload prefixes
};

void put(std::vector<FeatureValue>& v, std::size_t at, const Summary& s) {
    v[at] = s.mean;
    v[at + 1] = s.std;
    v[at + 2] = s.min;
    v[at + 3] = s.max;
}

FeatureValue entropy_of(const std::vector<std::uint8_t>& payload) {
    if (payload.empty()) return std::nullopt;
    return payload_entropy(payload);
}

FeatureValue nonzero_frac_of(const std::vector<std::uint8_t>& payload) {
    if (payload.empty()) return std::nullopt;
    const auto nz = std::count_if(payload.begin(), payload.end(), [](std::uint8_t b) { return b != 0; });
    return static_cast<double>(nz) / static_cast<double>(payload.size());
}

}  // namespace

FeatureVector extract_features(const Flow& flow) {
    if (flow.packets.empty()) throw Error(ErrorCode::EmptyFlow, "flow in session " + flow.session_id);

    Direction fwd, bwd;
    std::vector<double> all_times;
    std::array<std::size_t, 8> flag_counts{};
    for (const auto& p : flow.packets) {
        Direction& d = flow.is_forward(p) ? fwd : bwd;
        ++d.packets;
        d.bytes += p.wire_len;
        d.lengths.push_back(p.wire_len);
        d.times.push_back(p.ts);
        all_times.push_back(p.ts);
        const std::size_t room = kPayloadPrefixLimit - d.payload.size();
        const std::size_t take = std::min(room, p.payload_prefix.size());
        d.payload.insert(d.payload.end(), p.payload_prefix.begin(),
                         p.payload_prefix.begin() + static_cast<std::ptrdiff_t>(take));
        for (std::size_t bit = 0; bit < 8; ++bit) {
            if (p.tcp_flags & (1u << bit)) ++flag_counts[bit];
        }
    }

    std::vector<FeatureValue> v(col::count);
    const double dur = flow.last_ts - flow.first_ts;
    v[col::dur] = dur;
    v[col::pkts_fwd] = static_cast<double>(fwd.packets);
    v[col::pkts_bwd] = static_cast<double>(bwd.packets);
    v[col::pkts_tot] = static_cast<double>(fwd.packets + bwd.packets);
    v[col::bytes_fwd] = fwd.bytes;
    v[col::bytes_bwd] = bwd.bytes;
    v[col::bytes_tot] = fwd.bytes + bwd.bytes;

    put(v, col::pktlen_fwd_mean, summarize(fwd.lengths));
    put(v, col::pktlen_bwd_mean, summarize(bwd.lengths));
    put(v, col::iat_fwd_mean, summarize(gaps(fwd.times)));
    put(v, col::iat_bwd_mean, summarize(gaps(bwd.times)));
    const Summary tot = summarize(gaps(all_times));
    v[col::iat_tot_mean] = tot.mean;
    v[col::iat_tot_std] = tot.std;

    if (dur > 0.0) {
        v[col::pps] = static_cast<double>(fwd.packets + bwd.packets) / dur;
        v[col::bps] = (fwd.bytes + bwd.bytes) / dur;
    }
    if (fwd.packets > 0) v[col::down_up_pkt_ratio] = static_cast<double>(bwd.packets) / static_cast<double>(fwd.packets);
    if (fwd.bytes > 0.0) v[col::down_up_byte_ratio] = bwd.bytes / fwd.bytes;

    // Bit order of the TCP flag byte: FIN SYN RST PSH ACK URG ECE CWR.
    v[col::syn_cnt] = static_cast<double>(flag_counts[1]);
    v[col::ack_cnt] = static_cast<double>(flag_counts[4]);
    v[col::fin_cnt] = static_cast<double>(flag_counts[0]);
    v[col::rst_cnt] = static_cast<double>(flag_counts[2]);
    v[col::psh_cnt] = static_cast<double>(flag_counts[3]);
    v[col::urg_cnt] = static_cast<double>(flag_counts[5]);
    v[col::ece_cnt] = static_cast<double>(flag_counts[6]);
    v[col::cwr_cnt] = static_cast<double>(flag_counts[7]);

    v[col::payload_entropy_fwd] = entropy_of(fwd.payload);
    v[col::payload_entropy_bwd] = entropy_of(bwd.payload);
    v[col::payload_nonzero_frac_fwd] = nonzero_frac_of(fwd.payload);
    v[col::payload_nonzero_frac_bwd] = nonzero_frac_of(bwd.payload);

    v[col::has_fwd] = fwd.packets > 0 ? 1.0 : 0.0;
    v[col::has_bwd] = bwd.packets > 0 ? 1.0 : 0.0;
    v[col::proto] = static_cast<double>(flow.key.proto.number);
    const Endpoint responder = flow.responder();
    v[col::sport_bucket] = static_cast<double>(port_bucket(flow.initiator.port));
    v[col::dport_bucket] = static_cast<double>(port_bucket(responder.port));
    v[col::internal_dst] = is_internal_dst(responder.ip) ? 1.0 : 0.0;

    FeatureVector out;
    out.values = std::move(v);
    out.provenance.session_id = flow.session_id;
    return out;
}

std::vector<FeatureVector> extract_session_features(const Session& session, double window_s) {
    std::vector<FeatureVector> rows;
    rows.reserve(session.flows.size());
    for (std::size_t i = 0; i < session.flows.size(); ++i) {
        FeatureVector fv = extract_features(session.flows[i]);
        fv.provenance.session_id = session.session_id;
        fv.provenance.flow_index = static_cast<std::uint32_t>(i);
        fv.provenance.window_s = window_s;
        rows.push_back(std::move(fv));
    }
    return rows;
}

}  // namespace iotid
