#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "../support/generators.hpp"
#include "iotid/cli.hpp"
#include "iotid/flow.hpp"

#include <fstream>
#include <sstream>

using namespace iotid;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = 0;
    std::string out, err;
};

Result call(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::string text_of(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// One small corpus shared by the end-to-end cases.
const fs::path& corpus_dir() {
    static const fs::path dir = [] {
        const auto d = gen::temp_dir("cli-corpus");
        fs::remove_all(d);
        const auto r = call({"synth", "--out", d.string(), "--devices", "4", "--sessions", "6", "--seed", "3"});
        REQUIRE(r.code == 0);
        return d;
    }();
    return dir;
}

std::string manifest() { return (corpus_dir() / "manifest.tsv").string(); }

}  // namespace

TEST_CASE("usage errors write nothing") {
    const auto dir = gen::temp_dir("cli-usage");
    fs::remove_all(dir);
    const auto r = call({"synth", "--out", dir.string(), "--bogus-flag"});
    CHECK(r.code == cli::kUsage);
    CHECK(r.err.find("usage error") != std::string::npos);
    CHECK_FALSE(fs::exists(dir));

    CHECK(call({}).code == cli::kUsage);
    CHECK(call({"frobnicate"}).code == cli::kUsage);
    CHECK(call({"synth", "--out", dir.string(), "--devices", "99"}).code == cli::kUsage);
    CHECK_FALSE(fs::exists(dir));
    CHECK(call({"--help"}).code == cli::kOk);
}

TEST_CASE("synth writes a corpus") {
    const auto entries = read_manifest(manifest());
    CHECK(entries.size() == 24);
    for (const auto& e : entries) CHECK(fs::exists(e.pcap_path));
}

TEST_CASE("synth, train, predict") {
    const auto work = gen::temp_dir("cli-train");
    fs::create_directories(work);
    const auto model = (work / "model.bin").string();
    const auto t = call({"train", "--manifest", manifest(), "--window", "30", "--trees", "20", "--model", model,
                         "--seed", "5", "--reports", (work / "reports").string()});
    INFO(t.err);
    REQUIRE(t.code == 0);
    CHECK(fs::exists(model));
    CHECK(fs::exists(work / "reports" / "per_device_metrics.tsv"));

    const auto entries = read_manifest(manifest());
    const auto& e = entries.back();
    const auto p = call({"predict", "--model", model, "--pcap", e.pcap_path.string()});
    INFO(p.err);
    REQUIRE(p.code == 0);
    CHECK(p.out.substr(0, p.out.find('\t')) == e.device_label);

    const auto unknown = call({"predict", "--model", model, "--pcap", e.pcap_path.string(), "--threshold", "1"});
    const double score = std::stod(p.out.substr(p.out.find('\t') + 1));
    CHECK(unknown.out.rfind(score < 1.0 ? "UNKNOWN\t" : e.device_label + "\t", 0) == 0);

    SUBCASE("same seed, same model bytes") {
        const auto again = (work / "again.bin").string();
        REQUIRE(call({"train", "--manifest", manifest(), "--window", "30", "--trees", "20", "--model", again, "--seed",
                      "5"})
                    .code == 0);
        CHECK(read_file_bytes(again) == read_file_bytes(model));
    }
    SUBCASE("a damaged model is a data error") {
        auto bytes = read_file_bytes(model);
        bytes[bytes.size() / 2] ^= 1;
        std::ofstream(model, std::ios::binary | std::ios::trunc)
            .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        CHECK(call({"predict", "--model", model, "--pcap", e.pcap_path.string()}).code == cli::kDataError);
    }
    fs::remove_all(work);
}

TEST_CASE("sweep over three windows") {
    const auto reports = gen::temp_dir("cli-sweep");
    const auto r = call({"sweep", "--manifest", manifest(), "--windows", "10,30,105", "--trees", "10", "--reports",
                         reports.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(lines(r.out) == 4);
    CHECK(lines(text_of(reports / "sweep.tsv")) == 4);
    CHECK(fs::exists(reports / "per_device_metrics.tsv"));
    CHECK(fs::exists(reports / "error_analysis.txt"));

    const auto rep = call({"report", "--reports", reports.string()});
    CHECK(rep.code == 0);
    CHECK(rep.out.find("window sweep") != std::string::npos);

    CHECK(call({"sweep", "--manifest", manifest(), "--windows", "30,10", "--reports", reports.string()}).code ==
          cli::kUsage);
    CHECK(call({"sweep", "--manifest", manifest(), "--windows", "-5", "--reports", reports.string()}).code != 0);
    fs::remove_all(reports);
}

TEST_CASE("cache verify and purge") {
    const auto cache = gen::temp_dir("cli-cache");
    const auto f = call({"features", "--manifest", manifest(), "--windows", "10,30", "--cache", cache.string()});
    INFO(f.err);
    REQUIRE(f.code == 0);
    const auto ok = call({"cache", "verify", "--cache", cache.string()});
    CHECK(ok.code == 0);
    CHECK(ok.out.rfind("ok\t48\nfailed\t0\n", 0) == 0);

    fs::path victim;
    for (const auto& e : fs::recursive_directory_iterator(cache))
        if (e.path().extension() == ".col") victim = e.path();
    auto bytes = read_file_bytes(victim);
    bytes[bytes.size() - 3] ^= 0x10;
    std::ofstream(victim, std::ios::binary | std::ios::trunc)
        .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    const auto bad = call({"cache", "verify", "--cache", cache.string()});
    CHECK(bad.code == cli::kDataError);
    CHECK(bad.out.find("corrupt\t") != std::string::npos);

    const auto purge = call({"cache", "purge", "--cache", cache.string()});
    CHECK(purge.code == 0);
    CHECK(purge.out == "removed\t48\n");
    fs::remove_all(cache);
}

TEST_CASE("prune report and config file") {
    const auto work = gen::temp_dir("cli-prune");
    fs::create_directories(work);
    const auto r = call({"prune", "--manifest", manifest(), "--window", "30"});
    INFO(r.err);
    CHECK(r.code == 0);
    CHECK_FALSE(r.out.empty());

    std::ofstream(work / "run.toml") << "seed = 5\n";
    CHECK(call({"--config", (work / "run.toml").string(), "prune", "--manifest", manifest()}).code == 0);
    std::ofstream(work / "bad.toml") << "colour = 5\n";
    CHECK(call({"--config", (work / "bad.toml").string(), "prune", "--manifest", manifest()}).code == cli::kUsage);
    fs::remove_all(work);
}

TEST_CASE("clean up") { fs::remove_all(corpus_dir()); }
