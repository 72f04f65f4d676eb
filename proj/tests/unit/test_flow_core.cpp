#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "../oracles/capture_oracle.hpp"
#include "../support/generators.hpp"
#include "iotid/error.hpp"
#include "iotid/flow.hpp"
#include "iotid/pcap.hpp"
#include "iotid/synth.hpp"

#include <algorithm>
#include <set>

using namespace iotid;

namespace {

Endpoint ep(std::uint8_t last, std::uint16_t port) { return {IpAddress::v4(10, 0, 0, last), port}; }

std::vector<std::uint8_t> one_frame_capture(const FrameSpec& spec) {
    PcapWriter w;
    w.add_frame(1700000000, 250000, build_ipv4_frame(spec));
    return w.bytes();
}

PacketRecord pkt(double ts, Endpoint src, Endpoint dst, Protocol proto = kUdp) {
    PacketRecord p;
    p.ts = ts;
    p.src = src;
    p.dst = dst;
    p.proto = proto;
    p.wire_len = 60;
    return p;
}

std::string oracle_key(const PacketRecord& p) {
    auto text = [](const Endpoint& e) { return e.ip.to_string() + ":" + std::to_string(e.port); };
    const auto a = text(p.src), b = text(p.dst);
    return std::to_string(p.proto.number) + "|" + std::min(a, b) + "|" + std::max(a, b);
}

}  // namespace

TEST_CASE("parse_capture: one UDP packet with 100 payload bytes") {
    std::vector<std::uint8_t> payload(100, 0x41);
    FrameSpec spec{ep(2, 5000), ep(1, 53), kUdp};
    spec.payload = payload;
    const auto parsed = parse_capture(one_frame_capture(spec));
    REQUIRE(parsed.packets.size() == 1);
    const auto& p = parsed.packets[0];
    CHECK(p.payload_len == 100);
    CHECK(p.payload_prefix.size() == 100);
    CHECK(p.tcp_flags == 0);
    CHECK(p.src == ep(2, 5000));
    CHECK(p.dst.port == 53);
    CHECK(p.ts == doctest::Approx(1700000000.25));
}

TEST_CASE("parse_capture: bare TCP SYN") {
    FrameSpec spec{ep(2, 40000), ep(1, 443), kTcp, tcp_flag::SYN};
    const auto parsed = parse_capture(one_frame_capture(spec));
    REQUIRE(parsed.packets.size() == 1);
    CHECK(parsed.packets[0].tcp_flags == tcp_flag::SYN);
    CHECK(parsed.packets[0].payload_len == 0);
    CHECK(parsed.packets[0].payload_prefix.empty());
}

TEST_CASE("parse_capture: 3 TCP + 2 ARP agrees with the reference dissector") {
    PcapWriter w;
    std::vector<std::uint8_t> payload{'h', 'e', 'l', 'l', 'o'};
    for (int i = 0; i < 3; ++i) {
        FrameSpec spec{ep(2, 40000), ep(1, 443), kTcp, static_cast<std::uint8_t>(tcp_flag::PSH | tcp_flag::ACK)};
        spec.payload = payload;
        w.add_frame(100 + i, 0, build_ipv4_frame(spec));
        if (i < 2) w.add_frame(100 + i, 500, build_arp_frame(IpAddress::v4(10, 0, 0, 2), IpAddress::v4(10, 0, 0, 1)));
    }
    const auto parsed = parse_capture(w.bytes());
    const auto ref = oracle::dissect(w.bytes());
    CHECK(parsed.packets.size() == 3);
    CHECK(parsed.skipped_non_ip == 2);
    REQUIRE(ref.packets.size() == 3);
    CHECK(ref.non_ip == 2);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(parsed.packets[i].ts == doctest::Approx(ref.packets[i].ts));
        CHECK(parsed.packets[i].tcp_flags == ref.packets[i].flags);
        CHECK(parsed.packets[i].wire_len == ref.packets[i].wire_len);
        CHECK(parsed.packets[i].payload_prefix == ref.packets[i].prefix);
    }
}

TEST_CASE("parse_capture: payload prefix capped at 512 bytes") {
    std::vector<std::uint8_t> payload(900, 7);
    FrameSpec spec{ep(2, 5000), ep(1, 80), kTcp, tcp_flag::ACK};
    spec.payload = payload;
    const auto p = parse_capture(one_frame_capture(spec)).packets.at(0);
    CHECK(p.payload_len == 900);
    CHECK(p.payload_prefix.size() == 512);
}

TEST_CASE("parse_capture: errors and truncation") {
    std::vector<std::uint8_t> junk(10, 0);
    CHECK_THROWS_AS(parse_capture(junk), Error);

    auto bytes = one_frame_capture(FrameSpec{ep(2, 1), ep(1, 2), kUdp});
    PcapWriter w;
    w.add_frame(1, 0, build_ipv4_frame(FrameSpec{ep(2, 1), ep(1, 2), kUdp}));
    w.add_frame(2, 0, build_ipv4_frame(FrameSpec{ep(2, 1), ep(1, 2), kUdp}));
    auto cut = w.bytes();
    cut.resize(cut.size() - 5);
    const auto parsed = parse_capture(cut);
    CHECK(parsed.packets.size() == 1);
    CHECK(parsed.truncated_records == 1);

    // non-Ethernet link type
    bytes[20] = 101;
    try {
        parse_capture(bytes);
        FAIL("expected UnsupportedLinkType");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnsupportedLinkType);
    }
}

TEST_CASE("parse_capture: big-endian file gives the same records") {
    FrameSpec spec{ep(2, 5000), ep(1, 53), kUdp};
    std::vector<std::uint8_t> payload(20, 3);
    spec.payload = payload;
    auto le = one_frame_capture(spec);
    auto be = le;
    auto swap32 = [&](std::size_t o) { std::reverse(be.begin() + o, be.begin() + o + 4); };
    auto swap16 = [&](std::size_t o) { std::reverse(be.begin() + o, be.begin() + o + 2); };
    swap32(0);
    swap16(4);
    swap16(6);
    for (std::size_t o : {8, 12, 16, 20}) swap32(o);
    for (std::size_t o : {24, 28, 32, 36}) swap32(o);
    CHECK(parse_capture(be).packets == parse_capture(le).packets);
}

TEST_CASE("assemble_flows: 4 A->B and 2 B->A form one flow") {
    std::vector<PacketRecord> packets;
    for (int i = 0; i < 4; ++i) packets.push_back(pkt(10 + i, ep(2, 1000), ep(1, 53)));
    for (int i = 0; i < 2; ++i) packets.push_back(pkt(10.5 + i, ep(1, 53), ep(2, 1000)));
    const auto flows = assemble_flows(packets, "s");
    REQUIRE(flows.size() == 1);
    CHECK(flows[0].packets.size() == 6);
    CHECK(flows[0].initiator == ep(2, 1000));
    CHECK(flows[0].first_ts == 10);
    CHECK(flows[0].last_ts == 13);
    CHECK(std::is_sorted(flows[0].packets.begin(), flows[0].packets.end(),
                         [](const auto& a, const auto& b) { return a.ts < b.ts; }));
}

TEST_CASE("assemble_flows: two destination ports give two flows") {
    std::vector<PacketRecord> packets{pkt(1, ep(2, 1000), ep(1, 53)), pkt(2, ep(2, 1000), ep(1, 80))};
    CHECK(assemble_flows(packets, "s").size() == 2);
    CHECK(assemble_flows({}, "s").empty());
}

TEST_CASE("assemble_flows: initiator is the earliest sender, not the first in file order") {
    std::vector<PacketRecord> packets{pkt(5, ep(1, 53), ep(2, 1000)), pkt(4, ep(2, 1000), ep(1, 53))};
    const auto flows = assemble_flows(packets, "s");
    REQUIRE(flows.size() == 1);
    CHECK(flows[0].initiator == ep(2, 1000));
}

TEST_CASE("assemble_flows: matches a brute-force group-by on random 5-tuples") {
    Rng rng(7);
    for (int round = 0; round < 20; ++round) {
        std::vector<Endpoint> hosts;
        for (int i = 0; i < 4; ++i) hosts.push_back(ep(static_cast<std::uint8_t>(1 + i), static_cast<std::uint16_t>(50 + i)));
        std::vector<std::pair<Endpoint, Endpoint>> tuples;
        for (int t = 0; t < 7; ++t) {
            const auto a = hosts[rng.index(4)];
            auto b = hosts[rng.index(4)];
            if (b == a) b.port = static_cast<std::uint16_t>(b.port + 100);
            tuples.push_back({a, b});
        }
        std::vector<PacketRecord> packets;
        for (int i = 0; i < 50; ++i) {
            const auto& [a, b] = tuples[rng.index(tuples.size())];
            packets.push_back(rng.index(2) ? pkt(rng.uniform(0, 10), a, b) : pkt(rng.uniform(0, 10), b, a));
        }
        std::map<std::string, int> expected;
        for (const auto& p : packets) expected[oracle_key(p)]++;
        const auto flows = assemble_flows(packets, "s");
        std::map<std::string, int> got;
        std::size_t total = 0;
        for (const auto& f : flows) {
            got[oracle_key(f.packets.front())] = static_cast<int>(f.packets.size());
            total += f.packets.size();
            for (const auto& p : f.packets) CHECK(flow_key(p) == f.key);
        }
        CHECK(got == expected);
        CHECK(total == packets.size());
        CHECK(std::is_sorted(flows.begin(), flows.end(), [](const auto& a, const auto& b) { return a.first_ts < b.first_ts; }));
    }
}

TEST_CASE("flow key symmetry over random 5-tuples") {
    Rng rng(11);
    for (int i = 0; i < 2000; ++i) {
        const auto p = gen::flow_packets(rng, 1).front();
        CHECK(flow_key(p) == flow_key(reversed(p)));
        const auto k = flow_key(p);
        CHECK(k.a <= k.b);
    }
}

TEST_CASE("truncate_session") {
    Session s;
    s.session_id = "s";
    s.device_label = "d";
    s.power_on_ts = 100;
    std::vector<PacketRecord> packets;
    for (double off : {0.5, 3.0, 9.9, 10.0, 10.1, 25.0, 60.0}) packets.push_back(pkt(100 + off, ep(2, 1), ep(1, 53)));
    packets.push_back(pkt(140, ep(2, 7), ep(1, 80)));  // a flow that starts 40 s in
    s.flows = assemble_flows(packets, "s");

    SUBCASE("window past the session end is the identity") { CHECK(truncate_session(s, 1000) == s); }

    SUBCASE("late flow is dropped at 30 s") {
        const auto t = truncate_session(s, 30);
        REQUIRE(t.flows.size() == 1);
        CHECK(t.flows[0].packets.size() == 6);
        CHECK(t.flows[0].last_ts == 125);
    }

    SUBCASE("window 10 equals the brute-force filter") {
        const auto t = truncate_session(s, 10);
        std::multiset<double> expected, got;
        for (const auto& p : packets)
            if (p.ts <= s.power_on_ts + 10) expected.insert(p.ts);
        for (const auto& f : t.flows)
            for (const auto& p : f.packets) got.insert(p.ts);
        CHECK(got == expected);
        CHECK(truncate_session(t, 10) == t);
    }

    SUBCASE("only flow starting after the window") {
        Session late = s;
        late.flows = assemble_flows({pkt(140, ep(2, 7), ep(1, 80))}, "s");
        CHECK(truncate_session(late, 30).flows.empty());
    }

    SUBCASE("non-positive window") {
        CHECK_THROWS_AS(truncate_session(s, 0), Error);
        CHECK_THROWS_AS(truncate_session(s, -1), Error);
    }

    SUBCASE("monotone in the window") {
        std::size_t prev = 0;
        for (double w : {0.1, 1.0, 5.0, 10.0, 10.05, 30.0, 100.0}) {
            const auto n = truncate_session(s, w).packet_count();
            CHECK(n >= prev);
            prev = n;
        }
    }
}

TEST_CASE("manifest parsing") {
    const auto entries = parse_manifest("# header\n\na-s00\tcam\t1700000000.5\tcam/a.pcap\n", "/data");
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].session_id == "a-s00");
    CHECK(entries[0].device_label == "cam");
    CHECK(entries[0].power_on_ts == 1700000000.5);
    CHECK(entries[0].pcap_path == std::filesystem::path("/data/cam/a.pcap"));
    CHECK(parse_manifest(format_manifest_line(entries[0]) + "\n", "/data") == entries);
    CHECK_THROWS_AS(parse_manifest("only\ttwo\n"), Error);
    CHECK_THROWS_AS(parse_manifest("a\tb\tnot-a-number\tp\n"), Error);
}

TEST_CASE("synthetic captures round-trip with exact counts and are deterministic") {
    const auto profiles = make_profile_family({.devices = 3}, 5);
    for (const auto& profile : profiles) {
        const auto g = generate_session(profile, 0, 99);
        const auto ref = oracle::dissect(g.pcap);
        const auto loaded = session_from_capture(g.pcap, g.entry);
        CHECK(loaded.session.packet_count() == ref.packets.size());
        CHECK(loaded.session.flows.size() == oracle::group_by(ref.packets).size());
        CHECK(session_from_capture(g.pcap, g.entry).session == loaded.session);
    }
}
