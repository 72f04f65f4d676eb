#include "iotid/pcap.hpp"

#include "iotid/error.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

namespace iotid {
namespace {

constexpr std::size_t kGlobalHeaderLen = 24;
constexpr std::size_t kRecordHeaderLen = 16;
constexpr std::size_t kEthernetHeaderLen = 14;
constexpr std::uint32_t kMaxRecordLen = 256 * 1024;

std::uint16_t be16(const std::uint8_t* p) { return static_cast<std::uint16_t>((p[0] << 8) | p[1]); }

class FieldReader {
public:
    FieldReader(std::span<const std::uint8_t> bytes, bool swapped) : bytes_(bytes), swapped_(swapped) {}

    std::uint32_t u32(std::size_t at) const {
        const std::uint8_t* p = bytes_.data() + at;
        if (swapped_) {
            return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
        }
        return (std::uint32_t{p[3]} << 24) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[1]} << 8) | p[0];
    }

private:
    std::span<const std::uint8_t> bytes_;
    bool swapped_;
};

struct Transport {
    std::uint16_t sport = 0;
    std::uint16_t dport = 0;
    std::uint8_t flags = 0;
    std::size_t header_len = 0;
};

// Decodes the transport header found at `data`. Returns false when the
// header does not fit in the captured bytes.
bool decode_transport(Protocol proto, std::span<const std::uint8_t> data, Transport& out) {
    if (proto.is_tcp()) {
        if (data.size() < 20) return false;
        out.sport = be16(&data[0]);
        out.dport = be16(&data[2]);
        out.header_len = static_cast<std::size_t>(data[12] >> 4) * 4;
        out.flags = data[13];
        return out.header_len >= 20;
    }
    if (proto.is_udp()) {
        if (data.size() < 8) return false;
        out.sport = be16(&data[0]);
        out.dport = be16(&data[2]);
        out.header_len = 8;
        return true;
    }
    out.header_len = 0;
    return true;
}

// Fills ports, flags and payload fields from the IP payload. `ip_payload_len`
// is the length claimed by the IP header; `captured` what the capture kept.
bool fill_transport(PacketRecord& rec, std::span<const std::uint8_t> captured, std::size_t ip_payload_len,
                    bool first_fragment) {
    if (!first_fragment) {
        rec.payload_len = static_cast<std::uint32_t>(ip_payload_len);
        return true;
    }
    Transport t;
    if (!decode_transport(rec.proto, captured, t)) return false;
    rec.src.port = t.sport;
    rec.dst.port = t.dport;
    if (rec.proto.is_tcp()) rec.tcp_flags = t.flags;
    const std::size_t payload_len = ip_payload_len > t.header_len ? ip_payload_len - t.header_len : 0;
    rec.payload_len = static_cast<std::uint32_t>(payload_len);
    if (captured.size() > t.header_len) {
        const std::size_t avail = captured.size() - t.header_len;
        const std::size_t take = std::min({avail, payload_len, kPayloadPrefixLimit});
        rec.payload_prefix.assign(captured.begin() + static_cast<std::ptrdiff_t>(t.header_len),
                                  captured.begin() + static_cast<std::ptrdiff_t>(t.header_len + take));
    }
    return true;
}

bool decode_ipv4(std::span<const std::uint8_t> ip, PacketRecord& rec) {
    if (ip.size() < 20 || (ip[0] >> 4) != 4) return false;
    const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
    const std::size_t total = be16(&ip[2]);
    if (ihl < 20 || ip.size() < ihl || total < ihl) return false;
    const std::uint16_t frag = be16(&ip[6]) & 0x1fff;
    rec.proto = Protocol{ip[9]};
    rec.src.ip = IpAddress::v4(ip[12], ip[13], ip[14], ip[15]);
    rec.dst.ip = IpAddress::v4(ip[16], ip[17], ip[18], ip[19]);
    const std::size_t ip_payload_len = total - ihl;
    const std::size_t captured_len = std::min(ip.size(), total) - ihl;
    return fill_transport(rec, ip.subspan(ihl, captured_len), ip_payload_len, frag == 0);
}

bool decode_ipv6(std::span<const std::uint8_t> ip, PacketRecord& rec) {
    if (ip.size() < 40 || (ip[0] >> 4) != 6) return false;
    std::array<std::uint8_t, 16> addr{};
    std::copy_n(ip.begin() + 8, 16, addr.begin());
    rec.src.ip = IpAddress::v6(addr);
    std::copy_n(ip.begin() + 24, 16, addr.begin());
    rec.dst.ip = IpAddress::v6(addr);

    std::size_t remaining = be16(&ip[4]);
    std::size_t offset = 40;
    std::uint8_t next = ip[6];
    bool first_fragment = true;
    for (;;) {
        const bool ext = next == 0 || next == 43 || next == 44 || next == 51 || next == 60;
        if (!ext) break;
        if (ip.size() < offset + 8 || remaining < 8) return false;
        std::size_t len;
        if (next == 44) {
            len = 8;
            if ((be16(&ip[offset + 2]) >> 3) != 0) first_fragment = false;
        } else if (next == 51) {
            len = (static_cast<std::size_t>(ip[offset + 1]) + 2) * 4;
        } else {
            len = (static_cast<std::size_t>(ip[offset + 1]) + 1) * 8;
        }
        next = ip[offset];
        if (len > remaining) return false;
        offset += len;
        remaining -= len;
    }
    rec.proto = Protocol{next};
    const std::size_t captured_len = ip.size() > offset ? std::min(ip.size() - offset, remaining) : 0;
    return fill_transport(rec, ip.subspan(std::min(offset, ip.size()), captured_len), remaining, first_fragment);
}

void put_u16be(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    put_u16be(out, static_cast<std::uint16_t>(v >> 16));
    put_u16be(out, static_cast<std::uint16_t>(v));
}

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16le(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_mac_for(std::vector<std::uint8_t>& out, const IpAddress& ip) {
    out.push_back(0x02);
    out.push_back(0x00);
    for (int i = 0; i < 4; ++i) out.push_back(ip.bytes()[static_cast<std::size_t>(i)]);
}

std::uint16_t ipv4_checksum(std::span<const std::uint8_t> header) {
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i + 1 < header.size(); i += 2) sum += be16(&header[i]);
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum);
}

}  // namespace

CaptureParse parse_capture(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kGlobalHeaderLen) throw Error(ErrorCode::MalformedCapture, "file shorter than pcap global header");
    const std::uint32_t magic_le = FieldReader(bytes, false).u32(0);
    bool swapped;
    bool nanos;
    if (magic_le == kPcapMagicMicros || magic_le == kPcapMagicNanos) {
        swapped = false;
        nanos = magic_le == kPcapMagicNanos;
    } else {
        const std::uint32_t magic_be = FieldReader(bytes, true).u32(0);
        if (magic_be != kPcapMagicMicros && magic_be != kPcapMagicNanos) {
            throw Error(ErrorCode::MalformedCapture, "bad pcap magic");
        }
        swapped = true;
        nanos = magic_be == kPcapMagicNanos;
    }
    const FieldReader rd(bytes, swapped);
    const std::uint32_t link = rd.u32(20);
    if (link != kLinkTypeEthernet) {
        throw Error(ErrorCode::UnsupportedLinkType, "link type " + std::to_string(link) + " (only Ethernet is supported)");
    }

    CaptureParse result;
    std::size_t at = kGlobalHeaderLen;
    while (at < bytes.size()) {
        if (bytes.size() - at < kRecordHeaderLen) {
            ++result.truncated_records;
            break;
        }
        const std::uint32_t ts_sec = rd.u32(at);
        const std::uint32_t ts_frac = rd.u32(at + 4);
        const std::uint32_t incl_len = rd.u32(at + 8);
        const std::uint32_t orig_len = rd.u32(at + 12);
        at += kRecordHeaderLen;
        if (incl_len > kMaxRecordLen || incl_len > bytes.size() - at) {
            ++result.truncated_records;
            break;
        }
        const auto frame = bytes.subspan(at, incl_len);
        at += incl_len;

        if (frame.size() < kEthernetHeaderLen) {
            ++result.skipped_non_ip;
            continue;
        }
        std::size_t l3 = 12;
        std::uint16_t ethertype = be16(&frame[l3]);
        while ((ethertype == 0x8100 || ethertype == 0x88a8) && frame.size() >= l3 + 6) {
            l3 += 4;
            ethertype = be16(&frame[l3]);
        }
        l3 += 2;
        if (ethertype != 0x0800 && ethertype != 0x86DD) {
            ++result.skipped_non_ip;
            continue;
        }

        PacketRecord rec;
        rec.ts = static_cast<double>(ts_sec) + static_cast<double>(ts_frac) * (nanos ? 1e-9 : 1e-6);
        rec.wire_len = orig_len;
        const auto ip = frame.subspan(l3);
        const bool ok = ethertype == 0x0800 ? decode_ipv4(ip, rec) : decode_ipv6(ip, rec);
        if (!ok) {
            ++result.skipped_malformed;
            continue;
        }
        result.packets.push_back(std::move(rec));
    }
    return result;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw Error(ErrorCode::IoFailure, "read failed for " + path.string());
    return data;
}

CaptureParse read_capture_file(const std::filesystem::path& path) {
    const auto data = read_file_bytes(path);
    return parse_capture(data);
}

PcapWriter::PcapWriter(std::uint32_t snaplen) : snaplen_(snaplen) {
    put_u32le(out_, kPcapMagicMicros);
    put_u16le(out_, 2);
    put_u16le(out_, 4);
    put_u32le(out_, 0);
    put_u32le(out_, 0);
    put_u32le(out_, snaplen_);
    put_u32le(out_, kLinkTypeEthernet);
}

void PcapWriter::add_frame(std::int64_t ts_sec, std::int32_t ts_usec, std::span<const std::uint8_t> frame,
                           std::uint32_t orig_len) {
    const auto incl = static_cast<std::uint32_t>(std::min<std::size_t>(frame.size(), snaplen_));
    put_u32le(out_, static_cast<std::uint32_t>(ts_sec));
    put_u32le(out_, static_cast<std::uint32_t>(ts_usec));
    put_u32le(out_, incl);
    put_u32le(out_, orig_len != 0 ? orig_len : static_cast<std::uint32_t>(frame.size()));
    out_.insert(out_.end(), frame.begin(), frame.begin() + incl);
}

std::vector<std::uint8_t> build_ipv4_frame(const FrameSpec& spec) {
    std::vector<std::uint8_t> f;
    const std::size_t l4 = spec.proto.is_tcp() ? 20 : spec.proto.is_udp() ? 8 : 0;
    f.reserve(14 + 20 + l4 + spec.payload.size());
    put_mac_for(f, spec.dst.ip);
    put_mac_for(f, spec.src.ip);
    put_u16be(f, 0x0800);

    const std::size_t ip_start = f.size();
    f.push_back(0x45);
    f.push_back(0x00);
    put_u16be(f, static_cast<std::uint16_t>(20 + l4 + spec.payload.size()));
    put_u16be(f, spec.ip_id);
    put_u16be(f, 0x4000);  // DF
    f.push_back(64);
    f.push_back(spec.proto.number);
    put_u16be(f, 0);
    for (int i = 0; i < 4; ++i) f.push_back(spec.src.ip.bytes()[static_cast<std::size_t>(i)]);
    for (int i = 0; i < 4; ++i) f.push_back(spec.dst.ip.bytes()[static_cast<std::size_t>(i)]);
    const std::uint16_t csum = ipv4_checksum(std::span(f).subspan(ip_start, 20));
    f[ip_start + 10] = static_cast<std::uint8_t>(csum >> 8);
    f[ip_start + 11] = static_cast<std::uint8_t>(csum);

    if (spec.proto.is_tcp()) {
        put_u16be(f, spec.src.port);
        put_u16be(f, spec.dst.port);
        put_u32be(f, spec.tcp_seq);
        put_u32be(f, spec.tcp_ack);
        f.push_back(0x50);
        f.push_back(spec.tcp_flags);
        put_u16be(f, 0xffff);
        put_u16be(f, 0);
        put_u16be(f, 0);
    } else if (spec.proto.is_udp()) {
        put_u16be(f, spec.src.port);
        put_u16be(f, spec.dst.port);
        put_u16be(f, static_cast<std::uint16_t>(8 + spec.payload.size()));
        put_u16be(f, 0);
    }
    f.insert(f.end(), spec.payload.begin(), spec.payload.end());
    return f;
}

std::vector<std::uint8_t> build_arp_frame(const IpAddress& sender, const IpAddress& target) {
    std::vector<std::uint8_t> f(6, 0xff);
    put_mac_for(f, sender);
    put_u16be(f, 0x0806);
    put_u16be(f, 1);       // Ethernet
    put_u16be(f, 0x0800);  // IPv4
    f.push_back(6);
    f.push_back(4);
    put_u16be(f, 1);  // request
    put_mac_for(f, sender);
    for (int i = 0; i < 4; ++i) f.push_back(sender.bytes()[static_cast<std::size_t>(i)]);
    for (int i = 0; i < 6; ++i) f.push_back(0);
    for (int i = 0; i < 4; ++i) f.push_back(target.bytes()[static_cast<std::size_t>(i)]);
    return f;
}

}  // namespace iotid
