#pragma once
// Straight-from-definition reference for the per-flow features. Written
// without looking at the extractor: one function per column, recomputed from
// the raw packet list every time, long double accumulators.

#include "iotid/packet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace oracle {

using Value = std::optional<double>;

inline std::string ip_text(const iotid::IpAddress& ip) { return ip.to_string(); }

// Well-known port table, written out literally.
inline int port_bucket(unsigned port) {
    if (port == 53) return 0;
    if (port == 80) return 1;
    if (port == 443) return 2;
    if (port == 123) return 3;
    if (port == 67 || port == 68) return 4;
    if (port == 5353) return 5;
    if (port == 1883 || port == 8883) return 6;
    if (port <= 1023) return 7;
    if (port <= 49151) return 8;
    return 9;
}

// Dotted-quad text compared against the private prefixes.
inline bool rfc1918(const std::string& dotted) {
    unsigned a = 0, b = 0, c = 0, d = 0;
    if (std::sscanf(dotted.c_str(), "%u.%u.%u.%u", &a, &b, &c, &d) != 4) return false;
    if (a == 10) return true;
    if (a == 172 && b >= 16 && b <= 31) return true;
    return a == 192 && b == 168;
}

inline double entropy(const std::vector<std::uint8_t>& bytes) {
    std::map<int, long double> freq;
    for (auto b : bytes) freq[b] += 1;
    long double h = 0;
    for (auto& [sym, n] : freq) {
        const long double p = n / bytes.size();
        h += -p * std::log(p) / std::log(2.0L);
    }
    return static_cast<double>(h);
}

struct Stats {
    Value mean, sd, lo, hi;
};

inline Stats stats(const std::vector<double>& xs) {
    Stats s;
    if (xs.empty()) return s;
    long double total = 0;
    double lo = xs[0], hi = xs[0];
    for (double x : xs) {
        total += x;
        if (x < lo) lo = x;
        if (x > hi) hi = x;
    }
    const long double m = total / xs.size();
    s.mean = static_cast<double>(m);
    s.lo = lo;
    s.hi = hi;
    if (xs.size() > 1) {
        long double acc = 0;
        for (double x : xs) acc += (x - m) * (x - m);
        s.sd = static_cast<double>(std::sqrt(acc / xs.size()));
    }
    return s;
}

// Packets are taken in timestamp order (stable); the initiator is the source
// of the earliest packet. Returns every column keyed by name.
inline std::map<std::string, Value> features(std::vector<iotid::PacketRecord> pkts) {
    std::stable_sort(pkts.begin(), pkts.end(), [](const auto& x, const auto& y) { return x.ts < y.ts; });
    const auto init_ip = ip_text(pkts.front().src.ip);
    const unsigned init_port = pkts.front().src.port;
    const auto resp_ip = ip_text(pkts.front().dst.ip);
    const unsigned resp_port = pkts.front().dst.port;

    auto forward = [&](const iotid::PacketRecord& p) {
        return ip_text(p.src.ip) == init_ip && p.src.port == init_port;
    };

    std::vector<double> len_f, len_b, t_f, t_b, t_all;
    std::vector<std::uint8_t> pay_f, pay_b;
    double bytes_f = 0, bytes_b = 0;
    std::map<std::string, double> flags{{"fin", 0}, {"syn", 0}, {"rst", 0}, {"psh", 0},
                                        {"ack", 0}, {"urg", 0}, {"ece", 0}, {"cwr", 0}};
    for (const auto& p : pkts) {
        const bool f = forward(p);
        (f ? len_f : len_b).push_back(p.wire_len);
        (f ? t_f : t_b).push_back(p.ts);
        t_all.push_back(p.ts);
        (f ? bytes_f : bytes_b) += p.wire_len;
        auto& pay = f ? pay_f : pay_b;
        for (auto byte : p.payload_prefix) {
            if (pay.size() < 512) pay.push_back(byte);
        }
        if (p.tcp_flags & 0x01) flags["fin"]++;
        if (p.tcp_flags & 0x02) flags["syn"]++;
        if (p.tcp_flags & 0x04) flags["rst"]++;
        if (p.tcp_flags & 0x08) flags["psh"]++;
        if (p.tcp_flags & 0x10) flags["ack"]++;
        if (p.tcp_flags & 0x20) flags["urg"]++;
        if (p.tcp_flags & 0x40) flags["ece"]++;
        if (p.tcp_flags & 0x80) flags["cwr"]++;
    }
    auto diffs = [](const std::vector<double>& t) {
        std::vector<double> d;
        for (std::size_t i = 0; i + 1 < t.size(); ++i) d.push_back(t[i + 1] - t[i]);
        return d;
    };

    std::map<std::string, Value> v;
    const double duration = pkts.back().ts - pkts.front().ts;
    v["dur"] = duration;
    v["pkts_fwd"] = static_cast<double>(len_f.size());
    v["pkts_bwd"] = static_cast<double>(len_b.size());
    v["pkts_tot"] = static_cast<double>(pkts.size());
    v["bytes_fwd"] = bytes_f;
    v["bytes_bwd"] = bytes_b;
    v["bytes_tot"] = bytes_f + bytes_b;
    const auto put4 = [&](const std::string& stem, const Stats& s) {
        v[stem + "_mean"] = s.mean;
        v[stem + "_std"] = s.sd;
        v[stem + "_min"] = s.lo;
        v[stem + "_max"] = s.hi;
    };
    put4("pktlen_fwd", stats(len_f));
    put4("pktlen_bwd", stats(len_b));
    put4("iat_fwd", stats(diffs(t_f)));
    put4("iat_bwd", stats(diffs(t_b)));
    const Stats tot = stats(diffs(t_all));
    v["iat_tot_mean"] = tot.mean;
    v["iat_tot_std"] = tot.sd;
    v["pps"] = duration > 0 ? Value(pkts.size() / duration) : std::nullopt;
    v["bps"] = duration > 0 ? Value((bytes_f + bytes_b) / duration) : std::nullopt;
    v["down_up_pkt_ratio"] = len_f.empty() ? std::nullopt : Value(double(len_b.size()) / double(len_f.size()));
    v["down_up_byte_ratio"] = bytes_f == 0 ? std::nullopt : Value(bytes_b / bytes_f);
    for (const auto& [name, n] : flags) v[name + "_cnt"] = n;
    v["payload_entropy_fwd"] = pay_f.empty() ? std::nullopt : Value(entropy(pay_f));
    v["payload_entropy_bwd"] = pay_b.empty() ? std::nullopt : Value(entropy(pay_b));
    const auto nonzero = [](const std::vector<std::uint8_t>& b) -> Value {
        if (b.empty()) return std::nullopt;
        double nz = 0;
        for (auto x : b) nz += x != 0;
        return nz / b.size();
    };
    v["payload_nonzero_frac_fwd"] = nonzero(pay_f);
    v["payload_nonzero_frac_bwd"] = nonzero(pay_b);
    v["has_fwd"] = len_f.empty() ? 0.0 : 1.0;
    v["has_bwd"] = len_b.empty() ? 0.0 : 1.0;
    v["proto"] = static_cast<double>(pkts.front().proto.number);
    v["sport_bucket"] = static_cast<double>(port_bucket(init_port));
    v["dport_bucket"] = static_cast<double>(port_bucket(resp_port));
    v["internal_dst"] = rfc1918(resp_ip) ? 1.0 : 0.0;
    return v;
}

}  // namespace oracle
