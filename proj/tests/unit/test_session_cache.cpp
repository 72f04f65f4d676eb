#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "../support/generators.hpp"
#include "iotid/binary_io.hpp"
#include "iotid/cache.hpp"
#include "iotid/error.hpp"

#include <atomic>
#include <fstream>
#include <thread>

using namespace iotid;
namespace fs = std::filesystem;

namespace {

std::vector<FeatureVector> random_rows(std::size_t n, std::uint64_t seed, const std::string& session, double window) {
    Rng rng(seed);
    std::vector<FeatureVector> rows;
    for (std::size_t r = 0; r < n; ++r) {
        FeatureVector v;
        for (std::size_t c = 0; c < col::count; ++c) {
            if (rng.index(5) == 0) v.values.emplace_back();
            else v.values.emplace_back(rng.normal(0, 1e3));
        }
        v.provenance = {session, static_cast<std::uint32_t>(r * 2), window};
        rows.push_back(std::move(v));
    }
    return rows;
}

CacheKey key(const std::string& id, double w = 30) { return {id, w, std::string(kSchemaVersion)}; }

std::vector<std::uint8_t> slurp(const fs::path& p) { return read_file_bytes(p); }

void spit(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

SessionMeta meta(const std::string& id, const std::string& label) {
    return {id, label, 1.7e9 + 0.25, 12, 340, "corpus/" + label + "/" + id + ".pcap", 1.8e9};
}

}  // namespace

TEST_CASE("window files round-trip exactly") {
    const auto dir = gen::temp_dir("cache-rt");
    const WindowCache cache(dir);
    const auto rows = random_rows(25, 1, "cam-s00", 30);
    CHECK_FALSE(cache.read_window(key("cam-s00")).has_value());
    cache.write_window(key("cam-s00"), FeatureSchema::full(), rows);
    CHECK(fs::exists(dir / "flowfeat-v1" / "30s" / "cam-s00.col"));
    CHECK(cache.path_for(key("cam-s00", 7.5)) == dir / "flowfeat-v1" / "7.5s" / "cam-s00.col");
    const auto back = cache.read_window(key("cam-s00"));
    REQUIRE(back.has_value());
    CHECK(back->schema == FeatureSchema::full());
    CHECK(back->rows == rows);
    CHECK_FALSE(cache.read_window(key("cam-s00", 10)).has_value());

    SUBCASE("rewrite replaces the file") {
        const auto other = random_rows(3, 2, "cam-s00", 30);
        cache.write_window(key("cam-s00"), FeatureSchema::full(), other);
        CHECK(cache.read_window(key("cam-s00"))->rows == other);
    }
    SUBCASE("empty window") {
        cache.write_window(key("cam-s01"), FeatureSchema::full(), {});
        CHECK(cache.read_window(key("cam-s01"))->rows.empty());
    }
    fs::remove_all(dir);
}

TEST_CASE("write gates") {
    const auto dir = gen::temp_dir("cache-gates");
    const WindowCache cache(dir);
    const auto rows = random_rows(2, 1, "s", 30);
    const FeatureSchema stale("flowfeat-v0", FeatureSchema::full().columns());
    CHECK(gen::error_code([&] { cache.write_window(key("s"), stale, rows); }) == ErrorCode::SchemaVersionMismatch);
    auto narrow = rows;
    narrow[1].values.pop_back();
    CHECK(gen::error_code([&] { cache.write_window(key("s"), FeatureSchema::full(), narrow); }) ==
          ErrorCode::SchemaMismatch);
    CHECK(gen::error_code([&] { cache.path_for(key("../escape")); }) == ErrorCode::BadConfig);
    fs::remove_all(dir);
}

TEST_CASE("every single-bit flip is detected") {
    const auto rows = random_rows(4, 3, "s", 30);
    const auto bytes = encode_window(key("s"), FeatureSchema::full(), rows);
    CHECK(decode_window(bytes).rows == rows);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        for (int bit = 0; bit < 8; bit += 3) {
            auto bad = bytes;
            bad[i] ^= static_cast<std::uint8_t>(1u << bit);
            const auto code = gen::error_code([&] { decode_window(bad); });
            REQUIRE_MESSAGE(code == ErrorCode::CorruptFile, "byte " << i << " bit " << bit);
        }
    }
}

TEST_CASE("damaged files on disk are errors, not misses") {
    const auto dir = gen::temp_dir("cache-damage");
    const WindowCache cache(dir);
    cache.write_window(key("s"), FeatureSchema::full(), random_rows(10, 4, "s", 30));
    const auto path = cache.path_for(key("s"));
    auto bytes = slurp(path);

    SUBCASE("bit flip") {
        bytes[bytes.size() / 2] ^= 0x04;
        spit(path, bytes);
        CHECK(gen::error_code([&] { cache.read_window(key("s")); }) == ErrorCode::CorruptFile);
        const auto report = cache.verify();
        CHECK(report.files_ok == 0);
        CHECK(report.failures.size() == 1);
    }
    SUBCASE("file cut short mid-write") {
        for (std::size_t keep : {std::size_t{0}, std::size_t{7}, bytes.size() / 2, bytes.size() - 1}) {
            spit(path, std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + static_cast<long>(keep)));
            CHECK(gen::error_code([&] { cache.read_window(key("s")); }) == ErrorCode::CorruptFile);
        }
    }
    SUBCASE("a stray torn temp file does not disturb the committed one") {
        spit(path.parent_path() / ".s.col.tmp.1.0", std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 40));
        CHECK(cache.read_window(key("s")).has_value());
        CHECK(cache.verify().failures.empty());
    }
    SUBCASE("file under the wrong key") {
        fs::copy_file(path, cache.path_for(key("t")));
        CHECK(gen::error_code([&] { cache.read_window(key("t")); }) == ErrorCode::CorruptFile);
    }
    fs::remove_all(dir);
}

TEST_CASE("concurrent writers of one key never expose a torn file") {
    const auto dir = gen::temp_dir("cache-race");
    const WindowCache cache(dir);
    const auto a = random_rows(40, 10, "s", 30);
    const auto b = random_rows(60, 11, "s", 30);
    cache.write_window(key("s"), FeatureSchema::full(), a);
    std::atomic<bool> stop{false};
    std::atomic<int> bad{0}, reads{0};
    std::thread reader([&] {
        while (!stop) {
            try {
                const auto got = cache.read_window(key("s"));
                if (!got || !(got->rows == a || got->rows == b)) bad++;
            } catch (const Error&) {
                bad++;
            }
            reads++;
        }
    });
    std::thread w1([&] {
        for (int i = 0; i < 100; ++i) cache.write_window(key("s"), FeatureSchema::full(), a);
    });
    std::thread w2([&] {
        for (int i = 0; i < 100; ++i) cache.write_window(key("s"), FeatureSchema::full(), b);
    });
    w1.join();
    w2.join();
    stop = true;
    reader.join();
    CHECK(bad == 0);
    CHECK(reads > 0);
    const auto last = cache.read_window(key("s"));
    CHECK((last->rows == a || last->rows == b));
    fs::remove_all(dir);
}

TEST_CASE("verify and purge") {
    const auto dir = gen::temp_dir("cache-purge");
    const WindowCache cache(dir);
    for (int i = 0; i < 3; ++i) {
        const auto id = "s" + std::to_string(i);
        cache.write_window(key(id, 10), FeatureSchema::full(), random_rows(2, 20 + static_cast<std::uint64_t>(i), id, 10));
        cache.write_window(key(id, 30), FeatureSchema::full(), random_rows(2, 30 + static_cast<std::uint64_t>(i), id, 30));
    }
    CHECK(cache.verify().files_ok == 6);
    CHECK(cache.purge() == 6);
    CHECK(cache.verify().files_ok == 0);
    CHECK_FALSE(cache.read_window(key("s0", 10)).has_value());
    fs::remove_all(dir);
}

TEST_CASE("window directory names") {
    CHECK(window_dir_name(10) == "10s");
    CHECK(window_dir_name(7.5) == "7.5s");
    CHECK(window_dir_name(105) == "105s");
}

TEST_CASE("meta store") {
    const auto dir = gen::temp_dir("meta");
    const auto log = dir / "meta.log";
    {
        MetaStore store(log);
        store.put(meta("b-s01", "bulb"));
        store.put(meta("a-s00", "cam"));
        CHECK(store.get("a-s00") == meta("a-s00", "cam"));
        CHECK_FALSE(store.get("zzz").has_value());

        auto again = meta("a-s00", "cam");
        again.ingest_ts = 2.0e9;  // a later ingest of the same capture
        store.put(again);
        CHECK(store.get("a-s00")->ingest_ts == 1.8e9);

        CHECK(gen::error_code([&] { store.put(meta("a-s00", "plug")); }) == ErrorCode::DuplicateConflict);
        const auto all = store.list();
        REQUIRE(all.size() == 2);
        CHECK(all[0].session_id == "a-s00");
        CHECK(all[1].session_id == "b-s01");
    }
    SUBCASE("survives reopen") {
        MetaStore store(log);
        CHECK(store.list().size() == 2);
        CHECK(store.get("b-s01") == meta("b-s01", "bulb"));
    }
    SUBCASE("torn final record is skipped") {
        const auto line = encode_meta_record(meta("c-s02", "hub"));
        std::ofstream(log, std::ios::app) << line.substr(0, line.size() / 2);
        MetaStore store(log);
        CHECK(store.skipped_records() == 1);
        CHECK(store.list().size() == 2);
        CHECK_FALSE(store.get("c-s02").has_value());
    }
    SUBCASE("compact keeps one record per session") {
        {
            MetaStore store(log);
            store.put(meta("a-s00", "cam"));
            store.compact();
        }
        std::ifstream in(log);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        CHECK(std::count(text.begin(), text.end(), '\n') == 2);
        CHECK(MetaStore(log).list().size() == 2);
    }
    SUBCASE("record codec") {
        const auto rec = encode_meta_record(meta("x", "cam"));
        CHECK(decode_meta_record(rec) == meta("x", "cam"));
        auto broken = rec;
        broken[5] = broken[5] == 'a' ? 'b' : 'a';
        CHECK_FALSE(decode_meta_record(broken).has_value());
    }
    fs::remove_all(dir);
}
