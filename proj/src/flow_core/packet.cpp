#include "iotid/packet.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cstring>

namespace iotid {

IpAddress IpAddress::v4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
    IpAddress ip;
    ip.family_ = Family::V4;
    ip.bytes_[0] = a;
    ip.bytes_[1] = b;
    ip.bytes_[2] = c;
    ip.bytes_[3] = d;
    return ip;
}

IpAddress IpAddress::v4(std::uint32_t host_order) {
    return v4(static_cast<std::uint8_t>(host_order >> 24), static_cast<std::uint8_t>(host_order >> 16),
              static_cast<std::uint8_t>(host_order >> 8), static_cast<std::uint8_t>(host_order));
}

IpAddress IpAddress::v6(const std::array<std::uint8_t, 16>& bytes) {
    IpAddress ip;
    ip.family_ = Family::V6;
    ip.bytes_ = bytes;
    return ip;
}

std::optional<IpAddress> IpAddress::parse(std::string_view text) {
    const std::string s(text);
    std::array<std::uint8_t, 16> buf{};
    if (inet_pton(AF_INET, s.c_str(), buf.data()) == 1) return v4(buf[0], buf[1], buf[2], buf[3]);
    if (inet_pton(AF_INET6, s.c_str(), buf.data()) == 1) return v6(buf);
    return std::nullopt;
}

std::uint32_t IpAddress::v4_value() const noexcept {
    return (std::uint32_t{bytes_[0]} << 24) | (std::uint32_t{bytes_[1]} << 16) |
           (std::uint32_t{bytes_[2]} << 8) | std::uint32_t{bytes_[3]};
}

std::string IpAddress::to_string() const {
    char buf[INET6_ADDRSTRLEN] = {};
    const int af = is_v4() ? AF_INET : AF_INET6;
    inet_ntop(af, bytes_.data(), buf, sizeof buf);
    return buf;
}

PacketRecord reversed(const PacketRecord& p) {
    PacketRecord r = p;
    std::swap(r.src, r.dst);
    return r;
}

FlowKey flow_key(const PacketRecord& p) {
    if (p.src <= p.dst) return FlowKey{p.src, p.dst, p.proto};
    return FlowKey{p.dst, p.src, p.proto};
}

std::size_t Session::packet_count() const {
    std::size_t n = 0;
    for (const auto& f : flows) n += f.packets.size();
    return n;
}

}  // namespace iotid
