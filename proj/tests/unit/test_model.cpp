#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "../support/generators.hpp"
#include "iotid/error.hpp"
#include "iotid/forest.hpp"
#include "iotid/ovr.hpp"

#include <cmath>
#include <set>

using namespace iotid;

namespace {

HyperParams params(std::size_t trees, std::uint64_t seed = 1) {
    HyperParams p;
    p.n_trees = trees;
    p.seed = seed;
    return p;
}

std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

// Three devices, each a tight blob offset along its own axis.
struct Devices {
    DenseMatrix x;
    std::vector<std::string> labels;
    std::vector<std::string> sessions;
};

Devices devices(const std::vector<std::string>& names, std::size_t per_device, std::uint64_t seed) {
    Rng rng(seed);
    Devices d;
    d.x = DenseMatrix(names.size() * per_device, 4);
    std::size_t r = 0;
    for (std::size_t k = 0; k < names.size(); ++k) {
        for (std::size_t i = 0; i < per_device; ++i, ++r) {
            for (std::size_t c = 0; c < 4; ++c) d.x.at(r, c) = rng.normal() + (c == k % 4 ? 10.0 * (1 + k / 4) : 0.0);
            d.labels.push_back(names[k]);
            d.sessions.push_back(names[k] + "-s" + std::to_string(i % 5));
        }
    }
    return d;
}

// Walks the node table by hand.
std::vector<double> walk(const DecisionTree& t, std::span<const double> row) {
    std::int32_t n = 0;
    while (t.nodes()[static_cast<std::size_t>(n)].feature >= 0) {
        const auto& node = t.nodes()[static_cast<std::size_t>(n)];
        n = row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    const auto leaf = t.nodes()[static_cast<std::size_t>(n)].leaf;
    const auto& p = t.leaf_probs();
    return {p.begin() + leaf * t.n_classes(), p.begin() + (leaf + 1) * t.n_classes()};
}

}  // namespace

TEST_CASE("gini") {
    const std::size_t pure[] = {10, 0};
    const std::size_t balanced[] = {5, 5};
    const std::size_t three[] = {1, 1, 2};
    CHECK(gini_impurity(pure) == 0.0);
    CHECK(gini_impurity(balanced) == 0.5);
    CHECK(gini_impurity(three) == doctest::Approx(1 - (0.0625 + 0.0625 + 0.25)));
    CHECK(gini_impurity(std::span<const std::size_t>{}) == 0.0);
}

TEST_CASE("hyperparameters") {
    HyperParams p;
    CHECK(p.n_trees == 100);
    CHECK_FALSE(p.max_depth.has_value());
    CHECK(p.max_features.kind == MaxFeatures::Kind::Sqrt);
    p.validate();
    p.n_trees = 0;
    CHECK(gen::error_code([&] { p.validate(); }) == ErrorCode::InvalidParams);
    p = {};
    p.min_samples_split = 1;
    CHECK(gen::error_code([&] { p.validate(); }) == ErrorCode::InvalidParams);
    p = {};
    p.min_samples_leaf = 0;
    CHECK(gen::error_code([&] { p.validate(); }) == ErrorCode::InvalidParams);

    CHECK(MaxFeatures{}.resolve(28) == 5);
    CHECK(MaxFeatures{MaxFeatures::Kind::Log2, 1}.resolve(64) == 6);
    CHECK(MaxFeatures{MaxFeatures::Kind::All, 1}.resolve(9) == 9);
    CHECK(MaxFeatures{MaxFeatures::Kind::Fraction, 0.5}.resolve(9) >= 4);
    CHECK(MaxFeatures{}.resolve(1) == 1);
    for (const char* text : {"sqrt", "log2", "all", "0.5"}) {
        const auto mf = MaxFeatures::parse(text);
        REQUIRE(mf.has_value());
        CHECK(MaxFeatures::parse(mf->to_string()) == mf);
    }
    CHECK_FALSE(MaxFeatures::parse("1.5").has_value());
    CHECK_FALSE(MaxFeatures::parse("many").has_value());
}

TEST_CASE("tree: separable 1D") {
    DenseMatrix x(100, 1);
    std::vector<int> y;
    for (std::size_t i = 0; i < 100; ++i) {
        x.at(i, 0) = i < 50 ? -5.0 + 0.09 * static_cast<double>(i) : 0.5 + 0.09 * static_cast<double>(i - 50);
        y.push_back(x.at(i, 0) > 0);
    }
    Rng rng(1);
    const auto t = train_tree(x, y, 2, params(1), rng);
    CHECK(t.depth() == 1);
    const double thr = t.nodes()[0].threshold;
    CHECK(thr > -5.0 + 0.09 * 49);
    CHECK(thr < 0.5);
    for (std::size_t i = 0; i < 100; ++i) CHECK(static_cast<int>(argmax(t.predict_proba(x.row(i)))) == y[i]);
}

TEST_CASE("tree: pure input is one leaf") {
    DenseMatrix x(10, 2);
    std::vector<int> y(10, 1);
    Rng rng(1);
    const auto t = train_tree(x, y, 2, params(1), rng);
    CHECK(t.nodes().size() == 1);
    CHECK(t.predict_proba(x.row(0))[1] == 1.0);
    CHECK(gen::error_code([&] { train_tree(x, y, 2, std::span<const std::size_t>{}, params(1), rng); }) ==
          ErrorCode::EmptyData);
}

TEST_CASE("tree: XOR is learned exactly") {
    Rng data(4);
    DenseMatrix x(200, 2);
    std::vector<int> y;
    for (std::size_t i = 0; i < 200; ++i) {
        const int a = static_cast<int>(i % 2), b = static_cast<int>((i / 2) % 2);
        x.at(i, 0) = a * 4.0 + data.normal(0, 0.3);
        x.at(i, 1) = b * 4.0 + data.normal(0, 0.3);
        y.push_back(a ^ b);
    }
    HyperParams p = params(1);
    p.max_features = {MaxFeatures::Kind::All, 1};
    Rng rng(2);
    const auto t = train_tree(x, y, 2, p, rng);
    for (std::size_t i = 0; i < 200; ++i) CHECK(static_cast<int>(argmax(t.predict_proba(x.row(i)))) == y[i]);
}

TEST_CASE("tree: prediction is the leaf of the traversal path") {
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const auto b = gen::two_gaussians(60, 3, 1.0, 100 + static_cast<std::uint64_t>(trial));
        HyperParams p = params(1);
        p.max_depth = 4;
        const auto t = train_tree(b.x, b.y, 2, p, rng);
        CHECK(t.depth() <= 4);
        for (std::size_t i = 0; i < 200; ++i) {
            const double row[] = {rng.normal(0, 3), rng.normal(0, 3), rng.normal(0, 3)};
            const auto got = t.predict_proba(row);
            const auto want = walk(t, row);
            CHECK(std::vector<double>(got.begin(), got.end()) == want);
            CHECK(got[0] + got[1] == doctest::Approx(1.0));
        }
    }
}

TEST_CASE("bootstrap") {
    Rng rng(99);
    for (int trial = 0; trial < 5; ++trial) {
        const auto s = bootstrap_sample(1000, rng);
        CHECK(s.size() == 1000);
        const std::set<std::size_t> unique(s.begin(), s.end());
        const double frac = static_cast<double>(unique.size()) / 1000.0;
        CHECK(std::abs(frac - (1 - std::exp(-1.0))) < 0.05);
    }
}

TEST_CASE("forest") {
    const auto train = gen::two_gaussians(500, 4, 5.0, 1);
    const auto test = gen::two_gaussians(500, 4, 5.0, 2);
    const auto forest = train_forest(train.x, train.y, 2, params(100, 7));
    CHECK(forest.trees().size() == 100);

    SUBCASE("held-out accuracy on 5 sigma blobs") {
        std::size_t right = 0;
        for (std::size_t i = 0; i < test.x.rows; ++i) right += (forest.positive_proba(test.x.row(i)) >= 0.5) == (test.y[i] == 1);
        CHECK(static_cast<double>(right) / static_cast<double>(test.x.rows) >= 0.99);
    }
    SUBCASE("deterministic, and parallel equals serial") {
        CHECK(train_forest(train.x, train.y, 2, params(100, 7)) == forest);
        CHECK(train_forest(train.x, train.y, 2, params(100, 7), 4) == forest);
    }
    SUBCASE("probabilities") {
        const double deep[] = {10.0, 0, 0, 0};
        CHECK(forest.positive_proba(deep) >= 0.9);
        const auto p = forest.predict_proba(test.x.row(3));
        CHECK(p[0] + p[1] == doctest::Approx(1.0));
        const double narrow[] = {1.0, 2.0};
        CHECK(gen::error_code([&] { forest.predict_proba(narrow); }) == ErrorCode::SchemaMismatch);
    }
    SUBCASE("one tree") {
        const auto one = train_forest(train.x, train.y, 2, params(1, 3));
        for (std::size_t i = 0; i < 50; ++i) {
            const auto a = one.predict_proba(test.x.row(i));
            const auto b = one.trees()[0].predict_proba(test.x.row(i));
            CHECK(a == std::vector<double>(b.begin(), b.end()));
        }
    }
    SUBCASE("pure leaves give 0 or 1") {
        DenseMatrix x(4, 1);
        for (std::size_t i = 0; i < 4; ++i) x.at(i, 0) = static_cast<double>(i);
        const std::vector<int> y{0, 0, 1, 1};
        HyperParams p = params(1);
        p.max_features = {MaxFeatures::Kind::All, 1};
        const auto f = train_forest(x, y, 2, p);
        for (double v : {-1.0, 0.2, 2.7, 9.0}) {
            const double row[] = {v};
            const double pp = f.positive_proba(row);
            CHECK((pp == 0.0 || pp == 1.0));
        }
    }
}

TEST_CASE("unlimited depth fits distinct consistent points exactly") {
    Rng rng(6);
    DenseMatrix x(300, 3);
    std::vector<int> y;
    for (std::size_t i = 0; i < 300; ++i) {
        for (std::size_t c = 0; c < 3; ++c) x.at(i, c) = rng.uniform(0, 1);
        y.push_back(static_cast<int>(rng.index(3)));  // labels are noise: the forest must memorise
    }
    const auto f = train_forest(x, y, 3, params(100, 2));
    std::size_t right = 0;
    for (std::size_t i = 0; i < 300; ++i) right += static_cast<int>(argmax(f.predict_proba(x.row(i)))) == y[i];
    CHECK(right == 300);
}

TEST_CASE("one-vs-rest") {
    const std::vector<std::string> names{"cam", "plug", "bulb"};
    const auto train = devices(names, 60, 1);
    const auto test = devices(names, 30, 2);
    auto model = train_ovr(train.x, train.labels, params(30, 5));
    model.schema_version = std::string(kSchemaVersion);
    CHECK(model.devices() == std::vector<std::string>{"bulb", "cam", "plug"});

    SUBCASE("separable devices are all recognised") {
        for (std::size_t i = 0; i < test.x.rows; ++i) CHECK(predict_device(model, test.x.row(i)).label == test.labels[i]);
    }
    SUBCASE("add_device trains one forest and leaves the others alone") {
        const auto bigger = devices({"cam", "plug", "bulb", "hub"}, 60, 1);
        auto grown = model;
        add_device(grown, "hub", bigger.x, bigger.labels, params(30, 5));
        CHECK(grown.forests.size() == 4);
        for (const auto& name : names) {
            CHECK(grown.forests.at(name) == model.forests.at(name));
            for (std::size_t i = 0; i < test.x.rows; ++i)
                CHECK(grown.forests.at(name).positive_proba(test.x.row(i)) == model.forests.at(name).positive_proba(test.x.row(i)));
        }
    }
    SUBCASE("retraining one device keeps the other forests' predictions") {
        auto again = model;
        auto noisy = train;
        Rng rng(3);
        for (auto& v : noisy.x.data) v += rng.normal(0, 0.1);
        add_device(again, "cam", noisy.x, noisy.labels, params(30, 5));
        CHECK_FALSE(again.forests.at("cam") == model.forests.at("cam"));
        for (std::size_t i = 0; i < test.x.rows; ++i) {
            CHECK(again.forests.at("plug").positive_proba(test.x.row(i)) == model.forests.at("plug").positive_proba(test.x.row(i)));
            CHECK(again.forests.at("bulb").positive_proba(test.x.row(i)) == model.forests.at("bulb").positive_proba(test.x.row(i)));
        }
    }
    SUBCASE("single class") {
        const std::vector<std::string> one(train.labels.size(), "cam");
        CHECK(gen::error_code([&] { train_ovr(train.x, one, params(5)); }) == ErrorCode::SingleClass);
    }
    SUBCASE("parallel equals serial") {
        OvrOptions opts;
        opts.jobs = 4;
        auto parallel = train_ovr(train.x, train.labels, params(30, 5), opts);
        parallel.schema_version = model.schema_version;
        CHECK(parallel == model);
    }
    SUBCASE("serialisation round-trip") {
        const auto bytes = serialize_model(model);
        const auto back = deserialize_model(bytes);
        CHECK(back == model);
        CHECK(serialize_model(back) == bytes);
        for (std::size_t i = 0; i < test.x.rows; ++i) CHECK(device_scores(back, test.x.row(i)) == device_scores(model, test.x.row(i)));

        auto flipped = bytes;
        flipped[bytes.size() / 2] ^= 0x10;
        CHECK(gen::error_code([&] { deserialize_model(flipped); }) == ErrorCode::CorruptFile);
        auto other_version = bytes;
        other_version[8] = static_cast<std::uint8_t>(other_version[8] + 1);
        CHECK(gen::error_code([&] { deserialize_model(other_version); }) == ErrorCode::SchemaVersionMismatch);
        auto cut = bytes;
        cut.resize(cut.size() / 3);
        CHECK(gen::error_code([&] { deserialize_model(cut); }) == ErrorCode::CorruptFile);
    }
}

TEST_CASE("decision fusion") {
    CHECK(fuse_scores({{"a", 0.2}, {"b", 0.9}, {"c", 0.4}}) == DevicePrediction{"b", 0.9});
    CHECK(fuse_scores({{"zeta", 0.7}, {"alpha", 0.7}, {"mid", 0.1}}).label == "alpha");
    CHECK(fuse_scores({{"a", 0.3}, {"b", 0.45}}, 0.5).label == kUnknownDevice);
    CHECK(fuse_scores({{"a", 0.3}, {"b", 0.5}}, 0.5).label == "b");
}

TEST_CASE("randomized search") {
    const std::vector<std::string> names{"cam", "plug", "bulb"};
    auto data = devices(names, 40, 3);
    Rng rng(1);
    for (auto& v : data.x.data) v += rng.normal(0, 3);  // overlap so candidates can differ

    SUBCASE("singleton space") {
        SearchSpace space;
        space.n_trees = {10};
        space.max_depth = {std::nullopt};
        space.min_samples_split = {2};
        space.min_samples_leaf = {1};
        space.max_features = {MaxFeatures{}};
        const auto r = randomized_search_cv(data.x, data.labels, data.sessions, space, 25, 3, 7);
        CHECK(r.candidates.size() == 1);
        CHECK(r.candidates[0].fold_scores.size() == 3);
        CHECK(r.best.n_trees == 10);
    }
    SUBCASE("deterministic") {
        SearchSpace space;
        space.n_trees = {5, 10};
        const auto a = randomized_search_cv(data.x, data.labels, data.sessions, space, 4, 3, 11);
        const auto b = randomized_search_cv(data.x, data.labels, data.sessions, space, 4, 3, 11);
        CHECK(a.to_text() == b.to_text());
        CHECK(a.best == b.best);
        std::set<std::string> seen;
        for (const auto& c : a.candidates) seen.insert(c.params.to_string());
        CHECK(seen.size() == a.candidates.size());
    }
    SUBCASE("winner scores at least as well as the loser") {
        SearchSpace space;
        space.n_trees = {5, 100};
        space.max_depth = {std::nullopt};
        space.min_samples_split = {2};
        space.min_samples_leaf = {1};
        space.max_features = {MaxFeatures{}};
        const auto r = randomized_search_cv(data.x, data.labels, data.sessions, space, 2, 3, 5);
        REQUIRE(r.candidates.size() == 2);
        for (const auto& c : r.candidates) CHECK(r.candidates[r.best_index].mean >= c.mean);
    }
    SUBCASE("empty space") {
        SearchSpace space;
        space.min_samples_leaf.clear();
        CHECK(gen::error_code([&] { randomized_search_cv(data.x, data.labels, data.sessions, space, 3, 3, 1); }) ==
              ErrorCode::EmptySpace);
    }
    SUBCASE("folds keep sessions together") {
        const auto folds = session_folds(data.sessions, data.labels, 3, 9);
        std::map<std::string, std::size_t> fold_of;
        for (std::size_t i = 0; i < folds.size(); ++i) {
            auto [it, fresh] = fold_of.emplace(data.sessions[i], folds[i]);
            CHECK(it->second == folds[i]);
        }
    }
}
