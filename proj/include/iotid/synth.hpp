#pragma once

#include "iotid/flow.hpp"
#include "iotid/random.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace iotid {

// Scalar distribution with finite moments. Normal draws are not truncated
// here; callers clamp to the physically valid range.
struct Dist {
    enum class Kind : std::uint8_t { Constant, Uniform, Normal };
    Kind kind = Kind::Constant;
    double a = 0.0;  // value | lo | mean
    double b = 0.0;  // -     | hi | sd

    static Dist constant(double v) { return {Kind::Constant, v, 0.0}; }
    static Dist uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }
    static Dist normal(double mean, double sd) { return {Kind::Normal, mean, sd}; }

    double sample(Rng& rng) const;
    double mean() const;
    double stddev() const;

    // "constant 5", "uniform 1 2", "normal 100 1.5"
    std::string to_string() const;
    static Dist parse(std::string_view text);

    bool operator==(const Dist&) const = default;
};

enum class EntropyLevel : std::uint8_t { Zero, Text, Encrypted };
enum class DstKind : std::uint8_t { Internal, External };

std::string_view to_string(EntropyLevel level) noexcept;

// Nominal entropy of each level in bits/byte.
double entropy_target(EntropyLevel level) noexcept;

// Payload bytes for a level. Text samples a fixed natural-language corpus
// from a random offset; Encrypted is a pseudorandom stream.
std::vector<std::uint8_t> make_payload(EntropyLevel level, std::size_t n, Rng& rng);

// One flow of `packets` data packets alternating forward and backward,
// starting forward. Each backward packet replies `rtt` seconds after its
// forward packet; forward packets are `iat` seconds apart. Sizes are wire
// lengths in bytes. TCP flows add a handshake and a FIN exchange around the
// data.
struct FlowTemplate {
    DstKind dst = DstKind::External;
    Protocol proto = kUdp;
    std::uint16_t dst_port = 53;
    Dist packets = Dist::constant(6);
    Dist size_fwd = Dist::normal(100, 1.5);
    Dist size_bwd = Dist::normal(120, 1.5);
    Dist iat = Dist::normal(0.05, 0.002);
    Dist rtt = Dist::constant(0.01);
    EntropyLevel entropy = EntropyLevel::Text;

    bool operator==(const FlowTemplate&) const = default;
};

struct Phase {
    Dist offset = Dist::uniform(0.0, 1.0);  // seconds after power-on
    FlowTemplate flow;

    bool operator==(const Phase&) const = default;
};

// Steady-state traffic: flows of `flow` shape every `interval` seconds from
// `start_s` until the end of the session.
struct NoiseSpec {
    double start_s = 20.0;
    Dist interval = Dist::normal(8.0, 1.0);
    FlowTemplate flow;

    bool operator==(const NoiseSpec&) const = default;
};

struct DeviceProfile {
    std::string label;
    std::vector<Phase> phases;
    std::optional<NoiseSpec> noise;
    double session_duration_s = 110.0;

    // Throws Error{BadConfig} for negative offsets, empty labels and
    // distributions that can yield invalid sizes or timings on average.
    void validate() const;

    bool operator==(const DeviceProfile&) const = default;
};

struct FamilyOptions {
    std::size_t devices = 37;
    // Devices cloned with a small perturbation; each adds one profile labelled
    // "<original>-sib" right after its original.
    std::size_t sibling_pairs = 0;
    double noise_start_s = 20.0;
    double session_duration_s = 110.0;
};

// Procedural profile family. Devices are separated by at least 5 per-packet
// standard deviations in forward size, backward size and inter-arrival time;
// all phases start within the first 5 s.
std::vector<DeviceProfile> make_profile_family(const FamilyOptions& options, std::uint64_t seed);

// One synthetic session: capture bytes and its manifest line.
struct GeneratedSession {
    std::vector<std::uint8_t> pcap;
    ManifestEntry entry;  // pcap_path is "<label>/<session_id>.pcap"
};

// `index` numbers the session within its device; it picks the session id
// ("<label>-sNN"), the power-on time and, with `seed`, all randomness.
GeneratedSession generate_session(const DeviceProfile& profile, std::size_t index, std::uint64_t seed);

// Writes corpus/<label>/<session_id>.pcap and corpus/manifest.tsv. Returns
// the manifest entries (paths resolved against `dir`). Throws Error{BadConfig}
// for fewer than two profiles.
std::vector<ManifestEntry> generate_corpus(std::span<const DeviceProfile> profiles, std::size_t sessions_per_device,
                                           std::uint64_t seed, const std::filesystem::path& dir, unsigned jobs = 1);

// Same sessions without touching the disk, already parsed into flows.
std::vector<Session> generate_sessions(std::span<const DeviceProfile> profiles, std::size_t sessions_per_device,
                                       std::uint64_t seed, unsigned jobs = 1);

// Plain-text profile format: [device] / [phase] / [noise] sections with
// `key = value` lines; see docs/synth_profiles.md.
std::string write_profiles(std::span<const DeviceProfile> profiles);
std::vector<DeviceProfile> parse_profiles(std::string_view text);

}  // namespace iotid
