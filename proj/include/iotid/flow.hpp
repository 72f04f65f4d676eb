#pragma once

#include "iotid/packet.hpp"
#include "iotid/pcap.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace iotid {

// Groups one session's packets into bidirectional flows. Packets are stably
// sorted by timestamp first; flows come back ordered by first_ts. There is no
// idle timeout: every packet sharing a key joins the same flow.
std::vector<Flow> assemble_flows(std::vector<PacketRecord> packets, std::string_view session_id);

// Keeps packets with ts <= power_on_ts + window; flows emptied by the cut are
// dropped. Throws Error{NonPositiveWindow} unless window > 0.
Session truncate_session(const Session& session, double window_s);

struct ManifestEntry {
    std::string session_id;
    std::string device_label;
    double power_on_ts = 0.0;
    std::filesystem::path pcap_path;  // resolved against the manifest directory

    bool operator==(const ManifestEntry&) const = default;
};

// `session_id<TAB>device_label<TAB>power_on_ts<TAB>pcap_path`, one per line.
// Blank lines and lines starting with '#' are ignored.
std::vector<ManifestEntry> parse_manifest(std::string_view text, const std::filesystem::path& base_dir = {});
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
std::string format_manifest_line(const ManifestEntry& entry);

struct SessionLoad {
    Session session;
    std::size_t skipped_non_ip = 0;
    std::size_t skipped_malformed = 0;
    std::size_t truncated_records = 0;
    std::size_t before_power_on = 0;  // packets stamped earlier than power-on, discarded
};

SessionLoad load_session(const ManifestEntry& entry);
// Same as load_session for a capture already in memory (pcap_path unused).
SessionLoad session_from_capture(std::span<const std::uint8_t> bytes, const ManifestEntry& entry);
SessionLoad session_from_capture(CaptureParse parsed, const ManifestEntry& entry);

}  // namespace iotid
