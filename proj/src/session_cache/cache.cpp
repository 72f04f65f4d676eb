#include "iotid/cache.hpp"

#include "iotid/binary_io.hpp"
#include "iotid/error.hpp"
#include "iotid/pcap.hpp"
#include "iotid/schema_io.hpp"

#include <fmt/format.h>

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace iotid {
namespace {

constexpr std::array<std::uint8_t, 8> kColumnMagic = {'I', 'O', 'T', 'I', 'D', 'C', 'O', 'L'};
constexpr std::uint8_t kNullableF64 = 1;

void check_session_id(const std::string& id) {
    if (id.empty() || id.front() == '.' || id.find_first_of("/\\\t\n") != std::string::npos) {
        throw Error(ErrorCode::BadConfig, "session id '" + id + "' cannot be used as a cache file name");
    }
}

}  // namespace

std::string window_dir_name(double window_s) { return fmt::format("{}s", window_s); }

std::filesystem::path WindowCache::path_for(const CacheKey& key) const {
    check_session_id(key.session_id);
    return root_ / key.schema_version / window_dir_name(key.window_s) / (key.session_id + ".col");
}

std::vector<std::uint8_t> encode_window(const CacheKey& key, const FeatureSchema& schema,
                                        std::span<const FeatureVector> rows) {
    ByteWriter w;
    w.raw(kColumnMagic);
    w.u32(kColumnFileVersion);
    w.str(key.schema_version);
    w.str(key.session_id);
    w.f64(key.window_s);
    write_schema(w, schema);
    w.u64(rows.size());
    for (const auto& r : rows) w.u32(r.provenance.flow_index);
    for (std::size_t c = 0; c < schema.size(); ++c) {
        w.u8(kNullableF64);
        for (const auto& r : rows) w.u8(r.values[c] ? 1 : 0);
        for (const auto& r : rows) w.f64(r.values[c].value_or(0.0));
    }
    auto bytes = std::move(w.bytes());
    seal_with_crc(bytes);
    return bytes;
}

CachedWindow decode_window(std::span<const std::uint8_t> bytes, const CacheKey* expected) {
    const auto body = unseal_crc(bytes, "cache window");
    ByteReader r(body);
    const auto magic = r.raw(kColumnMagic.size());
    if (!std::equal(magic.begin(), magic.end(), kColumnMagic.begin())) {
        throw Error(ErrorCode::CorruptFile, "cache window: bad magic");
    }
    const std::uint32_t version = r.u32();
    if (version != kColumnFileVersion) {
        throw Error(ErrorCode::SchemaVersionMismatch, fmt::format("cache file format {} (expected {})", version,
                                                                  kColumnFileVersion));
    }
    CacheKey key;
    key.schema_version = r.str();
    key.session_id = r.str();
    key.window_s = r.f64();
    if (expected) {
        if (key.schema_version != expected->schema_version) {
            throw Error(ErrorCode::SchemaVersionMismatch,
                        fmt::format("cached schema {} but {} requested", key.schema_version, expected->schema_version));
        }
        if (key.session_id != expected->session_id || key.window_s != expected->window_s) {
            throw Error(ErrorCode::CorruptFile, "cache window header does not match its key");
        }
    }
    CachedWindow out;
    out.schema = read_schema(r);
    const std::size_t n_rows = r.count(4);
    out.rows.resize(n_rows);
    for (auto& row : out.rows) {
        row.provenance.session_id = key.session_id;
        row.provenance.window_s = key.window_s;
        row.provenance.flow_index = r.u32();
        row.values.resize(out.schema.size());
    }
    for (std::size_t c = 0; c < out.schema.size(); ++c) {
        if (r.u8() != kNullableF64) throw Error(ErrorCode::CorruptFile, "unknown column block type");
        const auto present = r.raw(n_rows);
        for (std::size_t i = 0; i < n_rows; ++i) {
            const double v = r.f64();
            if (present[i] > 1) throw Error(ErrorCode::CorruptFile, "bad presence flag");
            if (present[i]) out.rows[i].values[c] = v;
        }
    }
    if (!r.at_end()) throw Error(ErrorCode::CorruptFile, "trailing bytes in cache window");
    return out;
}

void WindowCache::write_window(const CacheKey& key, const FeatureSchema& schema,
                               std::span<const FeatureVector> rows) const {
    if (schema.version() != key.schema_version) {
        throw Error(ErrorCode::SchemaVersionMismatch,
                    fmt::format("rows use schema {} but key names {}", schema.version(), key.schema_version));
    }
    for (const auto& r : rows) {
        if (r.values.size() != schema.size()) {
            throw Error(ErrorCode::SchemaMismatch, "row width differs from schema in cache write");
        }
    }
    atomic_write_file(path_for(key), encode_window(key, schema, rows));
}

std::optional<CachedWindow> WindowCache::read_window(const CacheKey& key) const {
    const auto path = path_for(key);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file_bytes(path);
    } catch (const Error&) {
        // Raced with a purge.
        if (!std::filesystem::exists(path, ec)) return std::nullopt;
        throw;
    }
    try {
        return decode_window(bytes, &key);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptFile) throw Error(ErrorCode::CorruptFile, path.string() + ": " + e.what());
        throw;
    }
}

WindowCache::VerifyReport WindowCache::verify() const {
    VerifyReport report;
    std::error_code ec;
    if (!std::filesystem::exists(root_, ec)) return report;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root_)) {
        if (entry.is_regular_file() && entry.path().extension() == ".col") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        try {
            decode_window(read_file_bytes(f));
            ++report.files_ok;
        } catch (const Error& e) {
            report.failures.emplace_back(f, e.what());
        }
    }
    return report;
}

std::size_t WindowCache::purge() const {
    std::size_t removed = 0;
    std::error_code ec;
    if (!std::filesystem::exists(root_, ec)) return 0;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root_)) {
        if (entry.is_regular_file() && entry.path().extension() == ".col") files.push_back(entry.path());
    }
    for (const auto& f : files) removed += std::filesystem::remove(f, ec) ? 1 : 0;
    return removed;
}

bool SessionMeta::same_content(const SessionMeta& o) const {
    return session_id == o.session_id && device_label == o.device_label && power_on_ts == o.power_on_ts &&
           flow_count == o.flow_count && packet_count == o.packet_count && source_path == o.source_path;
}

std::string encode_meta_record(const SessionMeta& m) {
    for (const auto* s : {&m.session_id, &m.device_label, &m.source_path}) {
        if (s->find_first_of("\t\n\r") != std::string::npos) {
            throw Error(ErrorCode::BadConfig, "metadata fields may not contain tabs or newlines");
        }
    }
    const std::string body = fmt::format("PUT\t{}\t{}\t{}\t{}\t{}\t{}\t{}", m.session_id, m.device_label, m.power_on_ts,
                                         m.flow_count, m.packet_count, m.source_path, m.ingest_ts);
    const std::uint32_t crc = crc32_of(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
    return fmt::format("{}\t{:08x}\n", body, crc);
}

namespace {

template <class T>
bool parse_number(std::string_view s, T& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

std::optional<SessionMeta> decode_meta_record(std::string_view line) {
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
    const auto last_tab = line.rfind('\t');
    if (last_tab == std::string_view::npos) return std::nullopt;
    const std::string_view body = line.substr(0, last_tab);
    std::uint32_t crc = 0;
    const auto hex = line.substr(last_tab + 1);
    auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), crc, 16);
    if (ec != std::errc() || ptr != hex.data() + hex.size() || hex.size() != 8) return std::nullopt;
    if (crc32_of(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size())) != crc) return std::nullopt;

    std::vector<std::string_view> f;
    std::size_t start = 0;
    for (;;) {
        const auto tab = body.find('\t', start);
        f.push_back(body.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    if (f.size() != 8 || f[0] != "PUT") return std::nullopt;
    SessionMeta m;
    m.session_id = std::string(f[1]);
    m.device_label = std::string(f[2]);
    m.source_path = std::string(f[6]);
    if (!parse_number(f[3], m.power_on_ts) || !parse_number(f[4], m.flow_count) ||
        !parse_number(f[5], m.packet_count) || !parse_number(f[7], m.ingest_ts)) {
        return std::nullopt;
    }
    return m;
}

MetaStore::MetaStore(std::filesystem::path log_path) : path_(std::move(log_path)) {
    std::ifstream in(path_);
    if (!in) return;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto rec = decode_meta_record(line);
        if (!rec) {
            ++skipped_;
            continue;
        }
        // First record for an id wins; later identical puts never get logged.
        index_.try_emplace(rec->session_id, std::move(*rec));
    }
}

void MetaStore::put(const SessionMeta& meta) {
    if (auto it = index_.find(meta.session_id); it != index_.end()) {
        if (it->second.same_content(meta)) return;
        throw Error(ErrorCode::DuplicateConflict,
                    fmt::format("session {} already stored with different metadata", meta.session_id));
    }
    const std::string record = encode_meta_record(meta);
    std::error_code ec;
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path(), ec);
    const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(ErrorCode::IoFailure, fmt::format("open {}: {}", path_.string(), std::strerror(errno)));
    const ssize_t n = ::write(fd, record.data(), record.size());
    const bool ok = n == static_cast<ssize_t>(record.size()) && ::fsync(fd) == 0;
    ::close(fd);
    if (!ok) throw Error(ErrorCode::IoFailure, "append to " + path_.string() + " failed");
    index_.emplace(meta.session_id, meta);
}

std::optional<SessionMeta> MetaStore::get(const std::string& session_id) const {
    const auto it = index_.find(session_id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<SessionMeta> MetaStore::list() const {
    std::vector<SessionMeta> out;
    out.reserve(index_.size());
    for (const auto& [id, m] : index_) out.push_back(m);
    return out;
}

void MetaStore::compact() {
    std::string text;
    for (const auto& [id, m] : index_) text += encode_meta_record(m);
    atomic_write_file(path_, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    skipped_ = 0;
}

}  // namespace iotid
