#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace iotid {

inline constexpr std::size_t kPayloadPrefixLimit = 512;

class IpAddress {
public:
    enum class Family : std::uint8_t { V4 = 4, V6 = 6 };

    IpAddress() = default;

    static IpAddress v4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d);
    static IpAddress v4(std::uint32_t host_order);
    static IpAddress v6(const std::array<std::uint8_t, 16>& bytes);
    static std::optional<IpAddress> parse(std::string_view text);

    Family family() const noexcept { return family_; }
    bool is_v4() const noexcept { return family_ == Family::V4; }
    // IPv4 uses the first four bytes; the rest stay zero.
    const std::array<std::uint8_t, 16>& bytes() const noexcept { return bytes_; }
    std::uint32_t v4_value() const noexcept;

    std::string to_string() const;

    auto operator<=>(const IpAddress&) const = default;

private:
    Family family_ = Family::V4;
    std::array<std::uint8_t, 16> bytes_{};
};

enum class IpProto : std::uint8_t { ICMP = 1, TCP = 6, UDP = 17, ICMPv6 = 58 };

// IANA protocol number; anything besides TCP/UDP is "OTHER(n)" and carries no ports.
struct Protocol {
    std::uint8_t number = 0;

    bool is_tcp() const noexcept { return number == static_cast<std::uint8_t>(IpProto::TCP); }
    bool is_udp() const noexcept { return number == static_cast<std::uint8_t>(IpProto::UDP); }
    bool has_ports() const noexcept { return is_tcp() || is_udp(); }

    auto operator<=>(const Protocol&) const = default;
};

inline constexpr Protocol kTcp{6};
inline constexpr Protocol kUdp{17};

namespace tcp_flag {
inline constexpr std::uint8_t FIN = 0x01;
inline constexpr std::uint8_t SYN = 0x02;
inline constexpr std::uint8_t RST = 0x04;
inline constexpr std::uint8_t PSH = 0x08;
inline constexpr std::uint8_t ACK = 0x10;
inline constexpr std::uint8_t URG = 0x20;
inline constexpr std::uint8_t ECE = 0x40;
inline constexpr std::uint8_t CWR = 0x80;
}  // namespace tcp_flag

struct Endpoint {
    IpAddress ip;
    std::uint16_t port = 0;

    auto operator<=>(const Endpoint&) const = default;
};

struct PacketRecord {
    double ts = 0.0;  // seconds since the capture epoch, microsecond resolution
    Endpoint src;
    Endpoint dst;
    Protocol proto;
    std::uint8_t tcp_flags = 0;  // empty unless proto is TCP
    std::uint32_t wire_len = 0;
    std::uint32_t payload_len = 0;
    std::vector<std::uint8_t> payload_prefix;  // first min(payload_len, 512) bytes

    bool operator==(const PacketRecord&) const = default;
};

PacketRecord reversed(const PacketRecord& p);

// Bidirectional 5-tuple: endpoints in canonical (ascending) order.
struct FlowKey {
    Endpoint a;
    Endpoint b;
    Protocol proto;

    auto operator<=>(const FlowKey&) const = default;
};

FlowKey flow_key(const PacketRecord& p);

struct Flow {
    FlowKey key;
    Endpoint initiator;  // sender of the first packet; defines "forward"
    std::vector<PacketRecord> packets;
    std::string session_id;
    double first_ts = 0.0;
    double last_ts = 0.0;

    Endpoint responder() const { return initiator == key.a ? key.b : key.a; }
    bool is_forward(const PacketRecord& p) const { return p.src == initiator; }

    bool operator==(const Flow&) const = default;
};

struct Session {
    std::string session_id;
    std::string device_label;
    double power_on_ts = 0.0;
    std::vector<Flow> flows;

    std::size_t packet_count() const;

    bool operator==(const Session&) const = default;
};

}  // namespace iotid
