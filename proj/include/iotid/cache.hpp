#pragma once

#include "iotid/features.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace iotid {

struct CacheKey {
    std::string session_id;
    double window_s = 0.0;
    std::string schema_version;
};

struct CachedWindow {
    FeatureSchema schema;
    std::vector<FeatureVector> rows;  // provenance restored from the key
};

inline constexpr std::uint32_t kColumnFileVersion = 1;

// Per-session, per-window feature rows, one columnar file per key:
//   <root>/<schema_version>/<window>s/<session_id>.col
// Files are replaced atomically and carry a CRC-32 over everything before it.
class WindowCache {
public:
    explicit WindowCache(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const noexcept { return root_; }
    std::filesystem::path path_for(const CacheKey& key) const;

    // Throws Error{SchemaVersionMismatch} when `schema` is not the version
    // named in the key, Error{SchemaMismatch} for rows of the wrong width and
    // Error{IoFailure} on filesystem errors.
    void write_window(const CacheKey& key, const FeatureSchema& schema, std::span<const FeatureVector> rows) const;

    // nullopt = not cached. A damaged file throws Error{CorruptFile}; it is
    // never treated as a miss.
    std::optional<CachedWindow> read_window(const CacheKey& key) const;

    struct VerifyReport {
        std::size_t files_ok = 0;
        std::vector<std::pair<std::filesystem::path, std::string>> failures;
    };
    VerifyReport verify() const;

    // Removes every cached window file; returns how many were deleted.
    std::size_t purge() const;

private:
    std::filesystem::path root_;
};

std::vector<std::uint8_t> encode_window(const CacheKey& key, const FeatureSchema& schema,
                                        std::span<const FeatureVector> rows);
CachedWindow decode_window(std::span<const std::uint8_t> bytes, const CacheKey* expected = nullptr);

// Window directory name: shortest decimal form plus "s" (10 -> "10s").
std::string window_dir_name(double window_s);

struct SessionMeta {
    std::string session_id;
    std::string device_label;
    double power_on_ts = 0.0;
    std::uint64_t flow_count = 0;
    std::uint64_t packet_count = 0;
    std::string source_path;
    double ingest_ts = 0.0;  // wall clock at first ingest; not part of identity

    // Equality ignoring ingest_ts.
    bool same_content(const SessionMeta& other) const;
    bool operator==(const SessionMeta&) const = default;
};

// Append-only log of SessionMeta records with an in-memory index rebuilt on
// open. Records with a bad checksum (e.g. a torn final line) are skipped.
class MetaStore {
public:
    explicit MetaStore(std::filesystem::path log_path);

    // Idempotent for identical content; Error{DuplicateConflict} when the id
    // is already stored with different content.
    void put(const SessionMeta& meta);
    std::optional<SessionMeta> get(const std::string& session_id) const;
    std::vector<SessionMeta> list() const;  // ordered by session id

    // Rewrites the log with one record per session.
    void compact();

    std::size_t skipped_records() const noexcept { return skipped_; }
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    std::map<std::string, SessionMeta> index_;
    std::size_t skipped_ = 0;
};

std::string encode_meta_record(const SessionMeta& meta);
std::optional<SessionMeta> decode_meta_record(std::string_view line);

}  // namespace iotid
