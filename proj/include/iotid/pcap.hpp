#pragma once

#include "iotid/packet.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace iotid {

inline constexpr std::uint32_t kPcapMagicMicros = 0xA1B2C3D4;
inline constexpr std::uint32_t kPcapMagicNanos = 0xA1B23C4D;
inline constexpr std::uint32_t kLinkTypeEthernet = 1;

struct CaptureParse {
    std::vector<PacketRecord> packets;  // file order
    std::size_t skipped_non_ip = 0;     // ARP, LLDP, ... frames
    std::size_t skipped_malformed = 0;  // IP frames whose headers could not be decoded
    std::size_t truncated_records = 0;  // final record cut short by end of file
};

// Classic pcap, either byte order, Ethernet link type only.
// Throws Error{MalformedCapture} on a bad global header and
// Error{UnsupportedLinkType} for non-Ethernet captures.
CaptureParse parse_capture(std::span<const std::uint8_t> bytes);

CaptureParse read_capture_file(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

// Little-endian, microsecond pcap writer used by the trace generator and tests.
class PcapWriter {
public:
    explicit PcapWriter(std::uint32_t snaplen = 65535);

    void add_frame(std::int64_t ts_sec, std::int32_t ts_usec, std::span<const std::uint8_t> frame,
                   std::uint32_t orig_len = 0);

    const std::vector<std::uint8_t>& bytes() const noexcept { return out_; }

private:
    std::uint32_t snaplen_;
    std::vector<std::uint8_t> out_;
};

// Ethernet/IPv4 frame builder; the transport header is TCP or UDP depending
// on proto, with ports taken from the endpoints. Other protocols carry only
// the payload after the IP header.
struct FrameSpec {
    Endpoint src;
    Endpoint dst;
    Protocol proto = kUdp;
    std::uint8_t tcp_flags = 0;
    std::uint32_t tcp_seq = 0;
    std::uint32_t tcp_ack = 0;
    std::uint16_t ip_id = 0;
    std::span<const std::uint8_t> payload;
};

std::vector<std::uint8_t> build_ipv4_frame(const FrameSpec& spec);

std::vector<std::uint8_t> build_arp_frame(const IpAddress& sender, const IpAddress& target);

}  // namespace iotid
