#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "../support/generators.hpp"
#include "iotid/error.hpp"
#include "iotid/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace iotid;

namespace {

std::set<std::string> names_of(const std::vector<Removal>& removed) {
    std::set<std::string> out;
    for (const auto& r : removed) out.insert(r.feature);
    return out;
}

// Small numeric matrix from columns of values.
FeatureMatrix numeric(const std::vector<std::string>& names, const std::vector<std::vector<double>>& cols) {
    std::vector<FeatureColumn> schema;
    for (const auto& n : names) schema.push_back({n, FeatureKind::Numeric, ""});
    FeatureMatrix m;
    m.schema = FeatureSchema("test-v1", schema);
    for (std::size_t r = 0; r < cols[0].size(); ++r) {
        FeatureVector v;
        for (const auto& c : cols) v.values.emplace_back(c[r]);
        v.provenance.session_id = "s" + std::to_string(r);
        m.append(std::move(v), "d");
    }
    return m;
}

std::vector<double> noise(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

}  // namespace

TEST_CASE("linear combinations") {
    const auto m = gen::catalogue_shaped_matrix(200, 1);
    const auto removed = prune_linear_combinations(m, PruneConfig{}.linear_rules);
    CHECK(names_of(removed) == std::set<std::string>{"pkts_tot", "bytes_tot"});
    for (const auto& r : removed) CHECK(r.reason == PruneReason::Linear);

    auto bad = m;
    bad.rows[17].values[col::pkts_tot] = *bad.rows[17].values[col::pkts_tot] + 1;
    CHECK(gen::error_code([&] { prune_linear_combinations(bad, PruneConfig{}.linear_rules); }) == ErrorCode::SumMismatch);

    const auto one = m.subset(std::vector<std::size_t>{0});
    CHECK(gen::error_code([&] { prune_linear_combinations(one, PruneConfig{}.linear_rules); }) ==
          ErrorCode::PreconditionFailed);
}

TEST_CASE("correlation") {
    Rng rng(3);
    SUBCASE("identical columns: the second goes") {
        const auto a = noise(rng, 50);
        const auto m = numeric({"a", "b", "c"}, {a, noise(rng, 50), a});
        const auto removed = prune_correlated(m, 0.9);
        REQUIRE(removed.size() == 1);
        CHECK(removed[0].feature == "c");
        CHECK(removed[0].partner == "a");
        CHECK(removed[0].value == doctest::Approx(1.0));
    }
    SUBCASE("anti-correlated duplicates count too") {
        auto a = noise(rng, 50);
        auto b = a;
        for (auto& x : b) x = -2 * x + 1;
        CHECK(names_of(prune_correlated(numeric({"a", "b"}, {a, b}), 0.9)) == std::set<std::string>{"b"});
    }
    SUBCASE("independent columns at n=1000 survive") {
        std::vector<std::vector<double>> cols;
        std::vector<std::string> names;
        for (int i = 0; i < 10; ++i) {
            cols.push_back(noise(rng, 1000));
            names.push_back("x" + std::to_string(i));
        }
        CHECK(prune_correlated(numeric(names, cols), 0.9).empty());
    }
    SUBCASE("min/max tracking the mean") {
        const auto m = gen::catalogue_shaped_matrix(400, 2);
        CHECK(names_of(prune_correlated(m, 0.9)) ==
              std::set<std::string>{"pktlen_fwd_min", "pktlen_fwd_max", "pktlen_bwd_min", "pktlen_bwd_max",
                                    "iat_fwd_min", "iat_fwd_max", "iat_bwd_min", "iat_bwd_max"});
    }
    SUBCASE("constant columns are skipped") {
        const auto m = numeric({"a", "k"}, {noise(rng, 20), std::vector<double>(20, 3.0)});
        CHECK(prune_correlated(m, 0.9).empty());
        CHECK_FALSE(pearson(m, 0, 1).has_value());
    }
    SUBCASE("fewer than 3 rows") {
        const auto m = numeric({"a"}, {{1.0, 2.0}});
        CHECK(gen::error_code([&] { prune_correlated(m, 0.9); }) == ErrorCode::PreconditionFailed);
    }
}

TEST_CASE("low variance") {
    auto m = gen::catalogue_shaped_matrix(100, 4);
    CHECK(names_of(prune_low_variance(m, 1e-8)).count("urg_cnt") == 1);

    const auto small = numeric({"flag", "k", "x"}, {{0, 1, 0, 1, 0, 1}, {5, 5, 5, 5, 5, 5}, {1, 2, 3, 4, 5, 6}});
    CHECK(column_variance(small, 0) == doctest::Approx(0.25));
    CHECK(names_of(prune_low_variance(small, 1e-8)) == std::set<std::string>{"k"});

    // categorical and binary columns are exempt
    for (auto& row : m.rows) {
        row.values[col::proto] = 6.0;
        row.values[col::has_fwd] = 1.0;
    }
    const auto removed = names_of(prune_low_variance(m, 1e-8));
    CHECK(removed.count("proto") == 0);
    CHECK(removed.count("has_fwd") == 0);
}

TEST_CASE("derived rules") {
    const PruneConfig config;
    const auto removed = prune_derived(FeatureSchema::full(), config.derived_rules);
    REQUIRE(removed.size() == 1);
    CHECK(removed[0].feature == "down_up_byte_ratio");
    CHECK(removed[0].reason == PruneReason::Derived);

    const std::vector<std::string> without{"dur", "down_up_pkt_ratio"};
    CHECK(prune_derived(FeatureSchema::full().select(without), config.derived_rules).empty());
    CHECK(prune_derived(FeatureSchema::full(), {}).empty());
}

TEST_CASE("validate_features reproduces the catalogue annotations") {
    const auto m = gen::catalogue_shaped_matrix(500, 5);
    const auto report = validate_features(m);
    CHECK(report.kept.size() == 28);
    CHECK(report.removed.size() + report.kept.size() == 47);
    std::map<std::string, char> got;
    for (const auto& r : report.removed) got[r.feature] = static_cast<char>(r.reason);
    std::map<std::string, char> want;
    for (const auto& [name, reason] : gen::catalogue_removals()) want[name] = reason;
    CHECK(got == want);
    for (const auto& c : report.kept.columns()) CHECK(got.count(c.name) == 0);

    SUBCASE("idempotent on its own output") {
        const auto again = validate_features(apply_prune(report, m));
        CHECK(again.removed.empty());
        CHECK(again.kept == report.kept);
    }

    SUBCASE("correlation evidence recomputes") {
        for (const auto& r : report.removed) {
            if (r.reason != PruneReason::Correlated) continue;
            const auto a = m.schema.index_of(r.feature);
            const auto b = m.schema.index_of(r.partner);
            REQUIRE((a && b));
            const auto rr = pearson(m, *a, *b);
            REQUIRE(rr.has_value());
            CHECK(std::abs(*rr) >= 0.9);
            CHECK(*rr == doctest::Approx(r.value));
        }
    }

    SUBCASE("column order does not change the removal set") {
        Rng rng(9);
        for (int trial = 0; trial < 5; ++trial) {
            auto cols = m.schema.columns();
            rng.shuffle(std::span(cols));
            const FeatureSchema shuffled(std::string(m.schema.version()), cols);
            const auto permuted = m.project(shuffled);
            CHECK(names_of(validate_features(permuted).removed) == names_of(report.removed));
        }
    }

    SUBCASE("text report names every removal") {
        const auto text = report.to_text();
        for (const auto& r : report.removed) CHECK(text.find(r.feature) != std::string::npos);
    }
}

TEST_CASE("already-clean matrix loses nothing") {
    const auto m = gen::catalogue_shaped_matrix(300, 6);
    const auto clean = apply_prune(validate_features(m), m);
    CHECK(clean.schema.size() == 28);
    CHECK(validate_features(clean).removed.empty());
}

TEST_CASE("apply_prune replays on other rows") {
    const auto train = gen::catalogue_shaped_matrix(200, 7);
    const auto test = gen::catalogue_shaped_matrix(50, 8);
    const auto report = validate_features(train);
    const auto replayed = apply_prune(report, test);
    CHECK(replayed.schema == report.kept);
    CHECK(replayed.size() == 50);
    CHECK(replayed.rows[0].values.size() == 28);
}
