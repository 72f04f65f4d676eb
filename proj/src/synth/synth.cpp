#include "iotid/synth.hpp"

#include "iotid/error.hpp"
#include "iotid/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace iotid {
namespace {

constexpr std::size_t kTcpHeaders = 14 + 20 + 20;
constexpr std::size_t kUdpHeaders = 14 + 20 + 8;
constexpr std::size_t kMaxFrame = 1514;
constexpr double kBaseEpoch = 1'700'000'000.0;

// Status prose with a few headers and numbers; its byte entropy sits near 4.5 bits.
constexpr std::string_view kTextCorpus =
    "GET /v2/status HTTP/1.1 Host: cloud.example.net Accept: text/plain the thermostat in the hallway reports a "
    "room temperature of 21.5 degrees and asks the hub for a new schedule. the motion sensor went idle at 07:42 "
    "and the camera stream was paused until the door opened again. the plug in the kitchen keeps a steady load "
    "while the kettle is off, and the bulb over the table dims slowly when the sun goes down. Status is OK, "
    "firmware 3.14 is current, and the next check in is due in 300 seconds. {\"uptime\":1834,\"rssi\":-61,"
    "\"relay\":true} the device sends its name, its uptime and the signal level, then waits for the server to "
    "answer with the time of day and any pending command. ";

std::size_t header_len(Protocol p) { return p.is_tcp() ? kTcpHeaders : kUdpHeaders; }

IpAddress device_ip(std::string_view label) {
    const std::uint64_t h = fnv1a64(label);
    return IpAddress::v4(192, 168, static_cast<std::uint8_t>(1 + h % 200), static_cast<std::uint8_t>(10 + (h >> 8) % 240));
}

IpAddress gateway_ip(const IpAddress& device) {
    return IpAddress::v4(device.bytes()[0], device.bytes()[1], device.bytes()[2], 1);
}

IpAddress external_ip(std::string_view label, std::size_t flow_slot) {
    const std::uint64_t h = derive_seed(fnv1a64(label), flow_slot);
    return IpAddress::v4(52, static_cast<std::uint8_t>(1 + h % 250), static_cast<std::uint8_t>(h >> 8),
                         static_cast<std::uint8_t>(1 + (h >> 16) % 254));
}

struct Emitted {
    double ts;
    std::vector<std::uint8_t> frame;
};

class SessionBuilder {
public:
    SessionBuilder(const DeviceProfile& profile, Rng& rng) : profile_(profile), rng_(rng), ip_(device_ip(profile.label)) {}

    // slot picks the remote address (stable across sessions of a device).
    void add_flow(const FlowTemplate& t, double start, std::size_t slot) {
        const Endpoint local{ip_, static_cast<std::uint16_t>(49152 + (next_port_++ % 16384))};
        const Endpoint remote{t.dst == DstKind::Internal ? gateway_ip(ip_) : external_ip(profile_.label, slot),
                              t.dst_port};
        const auto data_packets = static_cast<std::size_t>(std::max(1.0, std::round(t.packets.sample(rng_))));
        const std::size_t headers = header_len(t.proto);
        const auto size_of = [&](const Dist& d) {
            const double v = std::round(d.sample(rng_));
            return static_cast<std::size_t>(std::clamp(v, static_cast<double>(headers + 1), static_cast<double>(kMaxFrame)));
        };
        const auto rtt_of = [&] { return std::max(1e-4, t.rtt.sample(rng_)); };

        std::uint32_t seq_l = static_cast<std::uint32_t>(rng_.next()), seq_r = static_cast<std::uint32_t>(rng_.next());
        double now = start;
        const auto send = [&](bool forward, std::uint8_t flags, std::size_t wire) {
            const std::size_t payload_len = wire > headers ? wire - headers : 0;
            const auto payload = make_payload(t.entropy, payload_len, rng_);
            FrameSpec spec;
            spec.src = forward ? local : remote;
            spec.dst = forward ? remote : local;
            spec.proto = t.proto;
            spec.tcp_flags = flags;
            spec.tcp_seq = forward ? seq_l : seq_r;
            spec.tcp_ack = forward ? seq_r : seq_l;
            spec.ip_id = static_cast<std::uint16_t>(ip_id_++);
            spec.payload = payload;
            (forward ? seq_l : seq_r) += static_cast<std::uint32_t>(payload_len);
            packets_.push_back({now, build_ipv4_frame(spec)});
        };

        if (t.proto.is_tcp()) {
            using namespace tcp_flag;
            send(true, SYN, headers);
            now += rtt_of();
            send(false, SYN | ACK, headers);
            now += rtt_of();
            send(true, ACK, headers);
        }
        const std::uint8_t data_flags = t.proto.is_tcp() ? tcp_flag::PSH | tcp_flag::ACK : 0;
        for (std::size_t i = 0; i < data_packets; i += 2) {
            if (i > 0 || t.proto.is_tcp()) now += std::max(1e-4, t.iat.sample(rng_));
            const double exchange_start = now;
            send(true, data_flags, size_of(t.size_fwd));
            if (i + 1 < data_packets) {
                now += rtt_of();
                send(false, data_flags, size_of(t.size_bwd));
                now = exchange_start;
            }
        }
        if (t.proto.is_tcp()) {
            using namespace tcp_flag;
            now += std::max(1e-4, t.iat.sample(rng_));
            send(true, FIN | ACK, headers);
            now += rtt_of();
            send(false, FIN | ACK, headers);
        }
    }

    std::vector<std::uint8_t> finish() {
        std::stable_sort(packets_.begin(), packets_.end(), [](const Emitted& a, const Emitted& b) { return a.ts < b.ts; });
        PcapWriter writer;
        for (const auto& p : packets_) {
            auto sec = static_cast<std::int64_t>(std::floor(p.ts));
            auto usec = static_cast<std::int64_t>(std::llround((p.ts - static_cast<double>(sec)) * 1e6));
            if (usec >= 1'000'000) {
                ++sec;
                usec -= 1'000'000;
            }
            writer.add_frame(sec, static_cast<std::int32_t>(usec), p.frame);
        }
        return writer.bytes();
    }

private:
    const DeviceProfile& profile_;
    Rng& rng_;
    IpAddress ip_;
    std::size_t next_port_ = 0;
    std::uint32_t ip_id_ = 1;
    std::vector<Emitted> packets_;
};

void check_dist_positive(const Dist& d, std::string_view what, double minimum) {
    if (!std::isfinite(d.a) || !std::isfinite(d.b) || d.mean() < minimum ||
        (d.kind == Dist::Kind::Uniform && d.b < d.a) || (d.kind == Dist::Kind::Normal && d.b < 0.0)) {
        throw Error(ErrorCode::BadConfig, fmt::format("{} = {} is not valid", what, d.to_string()));
    }
}

}  // namespace

double Dist::sample(Rng& rng) const {
    switch (kind) {
        case Kind::Constant: return a;
        case Kind::Uniform: return rng.uniform(a, b);
        case Kind::Normal: return rng.normal(a, b);
    }
    return a;
}

double Dist::mean() const { return kind == Kind::Uniform ? (a + b) / 2.0 : a; }

double Dist::stddev() const {
    switch (kind) {
        case Kind::Constant: return 0.0;
        case Kind::Uniform: return (b - a) / std::sqrt(12.0);
        case Kind::Normal: return b;
    }
    return 0.0;
}

std::string Dist::to_string() const {
    switch (kind) {
        case Kind::Constant: return fmt::format("constant {}", a);
        case Kind::Uniform: return fmt::format("uniform {} {}", a, b);
        case Kind::Normal: return fmt::format("normal {} {}", a, b);
    }
    return {};
}

Dist Dist::parse(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string kind;
    in >> kind;
    std::vector<double> args;
    std::string tok;
    while (in >> tok) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
            throw Error(ErrorCode::BadConfig, fmt::format("bad number '{}' in distribution '{}'", tok, text));
        }
        args.push_back(v);
    }
    if (kind == "constant" && args.size() == 1) return constant(args[0]);
    if (kind == "uniform" && args.size() == 2) return uniform(args[0], args[1]);
    if (kind == "normal" && args.size() == 2) return normal(args[0], args[1]);
    throw Error(ErrorCode::BadConfig, fmt::format("bad distribution '{}'", text));
}

std::string_view to_string(EntropyLevel level) noexcept {
    switch (level) {
        case EntropyLevel::Zero: return "zero";
        case EntropyLevel::Text: return "text";
        case EntropyLevel::Encrypted: return "encrypted";
    }
    return "?";
}

double entropy_target(EntropyLevel level) noexcept {
    switch (level) {
        case EntropyLevel::Zero: return 0.0;
        case EntropyLevel::Text: return 4.5;
        case EntropyLevel::Encrypted: return 7.9;
    }
    return 0.0;
}

std::vector<std::uint8_t> make_payload(EntropyLevel level, std::size_t n, Rng& rng) {
    std::vector<std::uint8_t> out(n, 0);
    if (n == 0) return out;
    switch (level) {
        case EntropyLevel::Zero: break;
        case EntropyLevel::Text: {
            std::size_t pos = rng.index(kTextCorpus.size());
            for (auto& b : out) {
                b = static_cast<std::uint8_t>(kTextCorpus[pos]);
                pos = (pos + 1) % kTextCorpus.size();
            }
            break;
        }
        case EntropyLevel::Encrypted: {
            std::size_t i = 0;
            while (i < n) {
                std::uint64_t word = rng.next();
                for (int k = 0; k < 8 && i < n; ++k, ++i, word >>= 8) out[i] = static_cast<std::uint8_t>(word);
            }
            break;
        }
    }
    return out;
}

void DeviceProfile::validate() const {
    if (label.empty() || label.find_first_of("/\\\t\n ") != std::string::npos || label.front() == '.') {
        throw Error(ErrorCode::BadConfig, fmt::format("bad device label '{}'", label));
    }
    if (phases.empty() && !noise) throw Error(ErrorCode::BadConfig, "profile " + label + " emits no traffic");
    if (!(session_duration_s > 0.0)) throw Error(ErrorCode::BadConfig, "session_duration must be > 0");
    const auto check_flow = [&](const FlowTemplate& t, std::string_view where) {
        if (!t.proto.is_tcp() && !t.proto.is_udp()) {
            throw Error(ErrorCode::BadConfig, fmt::format("{}: only tcp and udp flows are generated", where));
        }
        check_dist_positive(t.packets, fmt::format("{} packets", where), 1.0);
        check_dist_positive(t.size_fwd, fmt::format("{} size_fwd", where), 0.0);
        check_dist_positive(t.size_bwd, fmt::format("{} size_bwd", where), 0.0);
        check_dist_positive(t.iat, fmt::format("{} iat", where), 1e-6);
        check_dist_positive(t.rtt, fmt::format("{} rtt", where), 1e-6);
    };
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const auto& o = phases[i].offset;
        if ((o.kind == Dist::Kind::Uniform ? o.a : o.mean()) < 0.0) {
            throw Error(ErrorCode::BadConfig, fmt::format("{} phase {}: negative offset", label, i));
        }
        check_dist_positive(o, fmt::format("{} phase {} offset", label, i), 0.0);
        check_flow(phases[i].flow, fmt::format("{} phase {}", label, i));
    }
    if (noise) {
        if (noise->start_s < 0.0) throw Error(ErrorCode::BadConfig, label + " noise: negative start");
        check_dist_positive(noise->interval, label + " noise interval", 1e-3);
        check_flow(noise->flow, label + " noise");
    }
}

std::vector<DeviceProfile> make_profile_family(const FamilyOptions& options, std::uint64_t seed) {
    const std::size_t n = options.devices;
    if (options.sibling_pairs > n) throw Error(ErrorCode::BadConfig, "more sibling pairs than devices");
    if (n > 37) throw Error(ErrorCode::BadConfig, "the procedural family has room for at most 37 devices");

    // Independent placements along three axes so no two devices are
    // neighbours on all of them.
    const auto permutation = [&](std::string_view axis) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        Rng rng(derive_seed(seed, axis));
        rng.shuffle(std::span(p));
        return p;
    };
    const auto p_fwd = permutation("fwd"), p_bwd = permutation("bwd"), p_iat = permutation("iat");

    constexpr double kSpacing = 36.0, kSizeSd = 1.5;
    const std::array<std::pair<std::uint16_t, Protocol>, 4> tail_services{
        {{80, kTcp}, {123, kUdp}, {1883, kTcp}, {8883, kTcp}}};
    const std::array<EntropyLevel, 4> tail_entropy{EntropyLevel::Text, EntropyLevel::Zero, EntropyLevel::Text,
                                                   EntropyLevel::Encrypted};

    std::vector<DeviceProfile> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double fwd = 90.0 + kSpacing * static_cast<double>(p_fwd[i]);
        const double bwd = 90.0 + kSpacing * static_cast<double>(p_bwd[i]);
        const double iat = 0.020 + 0.004 * static_cast<double>(p_iat[i]);

        const auto flow = [&](std::uint16_t port, Protocol proto, DstKind dst, double packets, double size_shift,
                              EntropyLevel entropy) {
            FlowTemplate t;
            t.dst = dst;
            t.proto = proto;
            t.dst_port = port;
            t.packets = Dist::constant(packets);
            t.size_fwd = Dist::normal(fwd + size_shift, kSizeSd);
            t.size_bwd = Dist::normal(bwd + size_shift, kSizeSd);
            t.iat = Dist::normal(iat, 0.0004);
            t.rtt = Dist::normal(0.008, 0.0005);
            t.entropy = entropy;
            return t;
        };

        DeviceProfile p;
        p.label = fmt::format("dev-{:02}", i);
        p.session_duration_s = options.session_duration_s;
        const auto [tail_port, tail_proto] = tail_services[i % 4];
        const std::array<FlowTemplate, 4> flows{
            flow(53, kUdp, DstKind::External, 6, 0.0, EntropyLevel::Text),
            flow(443, kTcp, DstKind::External, 12, 7.0, EntropyLevel::Encrypted),
            flow(5353, kUdp, DstKind::Internal, 6, 14.0, EntropyLevel::Text),
            flow(tail_port, tail_proto, DstKind::External, 8, 21.0, tail_entropy[i % 4]),
        };
        for (std::size_t j = 0; j < flows.size(); ++j) {
            const double lo = 0.3 * static_cast<double>(j);
            p.phases.push_back({Dist::uniform(lo, lo + 1.5), flows[j]});
        }
        NoiseSpec noise;
        noise.start_s = options.noise_start_s;
        noise.interval = Dist::normal(8.0, 1.0);
        noise.flow = flow(443, kTcp, DstKind::External, 6, 28.0, EntropyLevel::Encrypted);
        p.noise = noise;
        out.push_back(std::move(p));

        if (i < options.sibling_pairs) {
            DeviceProfile sib = out.back();
            sib.label += "-sib";
            const auto nudge = [](FlowTemplate& t) {
                t.size_fwd.a += 1.0;
                t.size_bwd.a += 1.0;
            };
            for (auto& ph : sib.phases) nudge(ph.flow);
            nudge(sib.noise->flow);
            out.push_back(std::move(sib));
        }
    }
    return out;
}

GeneratedSession generate_session(const DeviceProfile& profile, std::size_t index, std::uint64_t seed) {
    profile.validate();
    Rng rng(derive_seed(derive_seed(seed, profile.label), index));

    GeneratedSession out;
    out.entry.session_id = fmt::format("{}-s{:02}", profile.label, index);
    out.entry.device_label = profile.label;
    // Whole seconds keep the power-on instant exact in microsecond pcap time.
    out.entry.power_on_ts = kBaseEpoch + 3600.0 * static_cast<double>(index) +
                            static_cast<double>(fnv1a64(profile.label) % 600);
    out.entry.pcap_path = std::filesystem::path(profile.label) / (out.entry.session_id + ".pcap");

    const double t0 = out.entry.power_on_ts;
    const double end = t0 + profile.session_duration_s;
    SessionBuilder builder(profile, rng);
    std::size_t slot = 0;
    for (const auto& ph : profile.phases) {
        const double start = t0 + std::max(0.0, ph.offset.sample(rng));
        if (start <= end) builder.add_flow(ph.flow, start, slot);
        ++slot;
    }
    if (profile.noise) {
        const auto& nz = *profile.noise;
        double t = t0 + nz.start_s;
        for (;;) {
            t += std::max(1e-3, nz.interval.sample(rng));
            if (t > end) break;
            builder.add_flow(nz.flow, t, slot);
        }
    }
    out.pcap = builder.finish();
    return out;
}

namespace {

std::vector<std::pair<std::size_t, std::size_t>> session_jobs(std::span<const DeviceProfile> profiles,
                                                              std::size_t sessions_per_device) {
    if (profiles.size() < 2) throw Error(ErrorCode::BadConfig, "a corpus needs at least two device profiles");
    std::set<std::string> labels;
    for (const auto& p : profiles) {
        p.validate();
        if (!labels.insert(p.label).second) throw Error(ErrorCode::BadConfig, "duplicate profile label " + p.label);
    }
    std::vector<std::pair<std::size_t, std::size_t>> jobs;
    for (std::size_t p = 0; p < profiles.size(); ++p) {
        for (std::size_t s = 0; s < sessions_per_device; ++s) jobs.emplace_back(p, s);
    }
    return jobs;
}

}  // namespace

std::vector<ManifestEntry> generate_corpus(std::span<const DeviceProfile> profiles, std::size_t sessions_per_device,
                                           std::uint64_t seed, const std::filesystem::path& dir, unsigned jobs) {
    const auto work = session_jobs(profiles, sessions_per_device);
    std::error_code ec;
    for (const auto& p : profiles) {
        std::filesystem::create_directories(dir / p.label, ec);
        if (ec) throw Error(ErrorCode::IoFailure, fmt::format("mkdir {}: {}", (dir / p.label).string(), ec.message()));
    }
    std::vector<ManifestEntry> entries(work.size());
    parallel_for(work.size(), jobs, [&](std::size_t k) {
        auto gen = generate_session(profiles[work[k].first], work[k].second, seed);
        const auto path = dir / gen.entry.pcap_path;
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f.write(reinterpret_cast<const char*>(gen.pcap.data()), static_cast<std::streamsize>(gen.pcap.size()));
        if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
        entries[k] = std::move(gen.entry);
    });

    std::string manifest = "# session_id\tdevice_label\tpower_on_ts\tpcap_path\n";
    for (const auto& e : entries) manifest += format_manifest_line(e) + "\n";
    std::ofstream m(dir / "manifest.tsv", std::ios::trunc);
    m << manifest;
    if (!m) throw Error(ErrorCode::IoFailure, "cannot write " + (dir / "manifest.tsv").string());

    for (auto& e : entries) e.pcap_path = dir / e.pcap_path;
    return entries;
}

std::vector<Session> generate_sessions(std::span<const DeviceProfile> profiles, std::size_t sessions_per_device,
                                       std::uint64_t seed, unsigned jobs) {
    const auto work = session_jobs(profiles, sessions_per_device);
    std::vector<Session> out(work.size());
    parallel_for(work.size(), jobs, [&](std::size_t k) {
        const auto gen = generate_session(profiles[work[k].first], work[k].second, seed);
        out[k] = session_from_capture(std::span<const std::uint8_t>(gen.pcap), gen.entry).session;
    });
    return out;
}

// ---- profile text format ----

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_double(std::string_view v, std::string_view key) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
        throw Error(ErrorCode::BadConfig, fmt::format("{}: '{}' is not a number", key, v));
    }
    return out;
}

void write_flow(std::string& out, const FlowTemplate& t) {
    out += fmt::format("dst = {}\n", t.dst == DstKind::Internal ? "internal" : "external");
    out += fmt::format("proto = {}\n", t.proto.is_tcp() ? "tcp" : t.proto.is_udp() ? "udp" : std::to_string(t.proto.number));
    out += fmt::format("dst_port = {}\n", t.dst_port);
    out += fmt::format("packets = {}\n", t.packets.to_string());
    out += fmt::format("size_fwd = {}\n", t.size_fwd.to_string());
    out += fmt::format("size_bwd = {}\n", t.size_bwd.to_string());
    out += fmt::format("iat = {}\n", t.iat.to_string());
    out += fmt::format("rtt = {}\n", t.rtt.to_string());
    out += fmt::format("entropy = {}\n", to_string(t.entropy));
}

// Returns false when the key is not a flow key.
bool set_flow_key(FlowTemplate& t, std::string_view key, std::string_view v) {
    if (key == "dst") {
        if (v == "internal") t.dst = DstKind::Internal;
        else if (v == "external") t.dst = DstKind::External;
        else throw Error(ErrorCode::BadConfig, fmt::format("dst must be internal or external, got '{}'", v));
    } else if (key == "proto") {
        if (v == "tcp") t.proto = kTcp;
        else if (v == "udp") t.proto = kUdp;
        else throw Error(ErrorCode::BadConfig, fmt::format("proto must be tcp or udp, got '{}'", v));
    } else if (key == "dst_port") {
        const double p = parse_double(v, key);
        if (p < 0 || p > 65535 || p != std::floor(p)) throw Error(ErrorCode::BadConfig, "dst_port out of range");
        t.dst_port = static_cast<std::uint16_t>(p);
    } else if (key == "packets") {
        t.packets = Dist::parse(v);
    } else if (key == "size_fwd") {
        t.size_fwd = Dist::parse(v);
    } else if (key == "size_bwd") {
        t.size_bwd = Dist::parse(v);
    } else if (key == "iat") {
        t.iat = Dist::parse(v);
    } else if (key == "rtt") {
        t.rtt = Dist::parse(v);
    } else if (key == "entropy") {
        if (v == "zero") t.entropy = EntropyLevel::Zero;
        else if (v == "text") t.entropy = EntropyLevel::Text;
        else if (v == "encrypted") t.entropy = EntropyLevel::Encrypted;
        else throw Error(ErrorCode::BadConfig, fmt::format("entropy must be zero, text or encrypted, got '{}'", v));
    } else {
        return false;
    }
    return true;
}

}  // namespace

std::string write_profiles(std::span<const DeviceProfile> profiles) {
    std::string out;
    for (const auto& p : profiles) {
        if (!out.empty()) out += "\n";
        out += fmt::format("[device]\nlabel = {}\nsession_duration = {}\n", p.label, p.session_duration_s);
        for (const auto& ph : p.phases) {
            out += fmt::format("\n[phase]\noffset = {}\n", ph.offset.to_string());
            write_flow(out, ph.flow);
        }
        if (p.noise) {
            out += fmt::format("\n[noise]\nstart = {}\ninterval = {}\n", p.noise->start_s, p.noise->interval.to_string());
            write_flow(out, p.noise->flow);
        }
    }
    return out;
}

std::vector<DeviceProfile> parse_profiles(std::string_view text) {
    enum class Section { None, Device, Phase, Noise };
    std::vector<DeviceProfile> out;
    Section section = Section::None;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto where = [&](std::string_view msg) {
            return Error(ErrorCode::BadConfig, fmt::format("profile line {}: {}", line_no, msg));
        };
        if (line.front() == '[') {
            if (line == "[device]") {
                out.emplace_back();
                section = Section::Device;
            } else if (line == "[phase]" || line == "[noise]") {
                if (out.empty()) throw where(fmt::format("{} before any [device]", line));
                if (line == "[phase]") {
                    out.back().phases.emplace_back();
                    section = Section::Phase;
                } else {
                    if (out.back().noise) throw where("second [noise] section for one device");
                    out.back().noise.emplace();
                    section = Section::Noise;
                }
            } else {
                throw where(fmt::format("unknown section {}", line));
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw where("expected key = value");
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        if (section == Section::None) throw where("key outside a section");
        auto& dev = out.back();
        bool known = false;
        try {
            switch (section) {
                case Section::Device:
                    if (key == "label") dev.label = std::string(value), known = true;
                    else if (key == "session_duration") dev.session_duration_s = parse_double(value, key), known = true;
                    break;
                case Section::Phase:
                    if (key == "offset") dev.phases.back().offset = Dist::parse(value), known = true;
                    else known = set_flow_key(dev.phases.back().flow, key, value);
                    break;
                case Section::Noise:
                    if (key == "start") dev.noise->start_s = parse_double(value, key), known = true;
                    else if (key == "interval") dev.noise->interval = Dist::parse(value), known = true;
                    else known = set_flow_key(dev.noise->flow, key, value);
                    break;
                case Section::None: break;
            }
        } catch (const Error& e) {
            throw where(e.what());
        }
        if (!known) throw where(fmt::format("unknown key '{}'", key));
    }
    for (const auto& p : out) p.validate();
    return out;
}

}  // namespace iotid
