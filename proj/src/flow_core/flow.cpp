#include "iotid/flow.hpp"

#include "iotid/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

namespace iotid {

std::vector<Flow> assemble_flows(std::vector<PacketRecord> packets, std::string_view session_id) {
    std::stable_sort(packets.begin(), packets.end(),
                     [](const PacketRecord& x, const PacketRecord& y) { return x.ts < y.ts; });

    std::vector<Flow> flows;
    std::map<FlowKey, std::size_t> index;
    for (auto& p : packets) {
        const FlowKey key = flow_key(p);
        auto [it, inserted] = index.try_emplace(key, flows.size());
        if (inserted) {
            Flow f;
            f.key = key;
            f.initiator = p.src;
            f.session_id = std::string(session_id);
            f.first_ts = p.ts;
            flows.push_back(std::move(f));
        }
        Flow& f = flows[it->second];
        f.last_ts = p.ts;
        f.packets.push_back(std::move(p));
    }
    // Creation order follows the sorted packet order, so flows are already
    // ordered by first_ts with file order breaking ties.
    return flows;
}

Session truncate_session(const Session& session, double window_s) {
    if (!(window_s > 0.0)) throw Error(ErrorCode::NonPositiveWindow, fmt::format("window {} s", window_s));
    const double cutoff = session.power_on_ts + window_s;

    Session out;
    out.session_id = session.session_id;
    out.device_label = session.device_label;
    out.power_on_ts = session.power_on_ts;
    for (const Flow& f : session.flows) {
        Flow kept;
        kept.key = f.key;
        kept.initiator = f.initiator;
        kept.session_id = f.session_id;
        for (const auto& p : f.packets) {
            if (p.ts <= cutoff) kept.packets.push_back(p);
        }
        if (kept.packets.empty()) continue;
        kept.first_ts = kept.packets.front().ts;
        kept.last_ts = kept.packets.back().ts;
        out.flows.push_back(std::move(kept));
    }
    return out;
}

std::vector<ManifestEntry> parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
    std::vector<ManifestEntry> entries;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;

        std::vector<std::string_view> fields;
        std::size_t start = 0;
        for (;;) {
            const std::size_t tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
            if (tab == std::string_view::npos) break;
            start = tab + 1;
        }
        if (fields.size() != 4) {
            throw Error(ErrorCode::MalformedManifest, fmt::format("line {}: expected 4 tab-separated fields, got {}",
                                                                  line_no, fields.size()));
        }
        ManifestEntry e;
        e.session_id = std::string(fields[0]);
        e.device_label = std::string(fields[1]);
        const auto ts = fields[2];
        auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), e.power_on_ts);
        if (ec != std::errc() || ptr != ts.data() + ts.size() || e.power_on_ts < 0.0) {
            throw Error(ErrorCode::MalformedManifest, fmt::format("line {}: bad power_on_ts '{}'", line_no, ts));
        }
        if (e.session_id.empty() || e.device_label.empty() || fields[3].empty()) {
            throw Error(ErrorCode::MalformedManifest, fmt::format("line {}: empty field", line_no));
        }
        std::filesystem::path p{std::string(fields[3])};
        e.pcap_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        entries.push_back(std::move(e));
    }

    std::map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!seen.emplace(entries[i].session_id, i).second) {
            throw Error(ErrorCode::MalformedManifest, "duplicate session id " + entries[i].session_id);
        }
    }
    return entries;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    const std::string text(bytes.begin(), bytes.end());
    return parse_manifest(text, path.parent_path());
}

std::string format_manifest_line(const ManifestEntry& entry) {
    return fmt::format("{}\t{}\t{}\t{}", entry.session_id, entry.device_label, entry.power_on_ts,
                       entry.pcap_path.generic_string());
}

SessionLoad load_session(const ManifestEntry& entry) {
    return session_from_capture(read_capture_file(entry.pcap_path), entry);
}

SessionLoad session_from_capture(std::span<const std::uint8_t> bytes, const ManifestEntry& entry) {
    return session_from_capture(parse_capture(bytes), entry);
}

SessionLoad session_from_capture(CaptureParse parsed, const ManifestEntry& entry) {
    SessionLoad out;
    out.skipped_non_ip = parsed.skipped_non_ip;
    out.skipped_malformed = parsed.skipped_malformed;
    out.truncated_records = parsed.truncated_records;

    std::vector<PacketRecord> in_session;
    in_session.reserve(parsed.packets.size());
    for (auto& p : parsed.packets) {
        if (p.ts < entry.power_on_ts) {
            ++out.before_power_on;
            continue;
        }
        in_session.push_back(std::move(p));
    }
    out.session.session_id = entry.session_id;
    out.session.device_label = entry.device_label;
    out.session.power_on_ts = entry.power_on_ts;
    out.session.flows = assemble_flows(std::move(in_session), entry.session_id);
    return out;
}

}  // namespace iotid
