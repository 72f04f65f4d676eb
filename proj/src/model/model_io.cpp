#include "iotid/error.hpp"
#include "iotid/ovr.hpp"
#include "iotid/pcap.hpp"
#include "iotid/schema_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cstring>

namespace iotid {
namespace {

constexpr std::array<std::uint8_t, 8> kModelMagic = {'I', 'O', 'T', 'I', 'D', 'M', 'D', 'L'};

void write_params(ByteWriter& w, const HyperParams& p) {
    w.u64(p.n_trees);
    w.u8(p.max_depth ? 1 : 0);
    w.u64(p.max_depth.value_or(0));
    w.u64(p.min_samples_split);
    w.u64(p.min_samples_leaf);
    w.u8(static_cast<std::uint8_t>(p.max_features.kind));
    w.f64(p.max_features.fraction);
    w.u64(p.seed);
}

HyperParams read_params(ByteReader& r) {
    HyperParams p;
    p.n_trees = r.u64();
    const bool has_depth = r.u8() != 0;
    const std::uint64_t depth = r.u64();
    if (has_depth) p.max_depth = depth;
    p.min_samples_split = r.u64();
    p.min_samples_leaf = r.u64();
    const std::uint8_t kind = r.u8();
    if (kind > static_cast<std::uint8_t>(MaxFeatures::Kind::Fraction)) {
        throw Error(ErrorCode::CorruptFile, "unknown max_features kind");
    }
    p.max_features.kind = static_cast<MaxFeatures::Kind>(kind);
    p.max_features.fraction = r.f64();
    p.seed = r.u64();
    return p;
}

void write_tree(ByteWriter& w, const DecisionTree& t) {
    w.u64(t.nodes().size());
    for (const auto& n : t.nodes()) {
        w.i32(n.feature);
        w.f64(n.threshold);
        w.i32(n.left);
        w.i32(n.right);
        w.u32(n.leaf);
    }
    w.u64(t.leaf_probs().size());
    for (double p : t.leaf_probs()) w.f64(p);
}

DecisionTree read_tree(ByteReader& r, std::size_t n_features, std::size_t n_classes) {
    const std::size_t n_nodes = r.count(24);
    std::vector<DecisionTree::Node> nodes(n_nodes);
    for (auto& n : nodes) {
        n.feature = r.i32();
        n.threshold = r.f64();
        n.left = r.i32();
        n.right = r.i32();
        n.leaf = r.u32();
    }
    const std::size_t n_probs = r.count(8);
    std::vector<double> probs(n_probs);
    for (auto& p : probs) p = r.f64();

    if (n_nodes == 0 || n_classes == 0 || n_probs % n_classes != 0) throw Error(ErrorCode::CorruptFile, "bad tree shape");
    const std::size_t n_leaves = n_probs / n_classes;
    for (std::size_t i = 0; i < n_nodes; ++i) {
        const auto& n = nodes[i];
        if (n.feature < 0) {
            if (n.leaf >= n_leaves) throw Error(ErrorCode::CorruptFile, "leaf index out of range");
            continue;
        }
        // Children always follow their parent, which also rules out cycles.
        const auto valid_child = [&](std::int32_t c) {
            return c > static_cast<std::int32_t>(i) && static_cast<std::size_t>(c) < n_nodes;
        };
        if (static_cast<std::size_t>(n.feature) >= n_features || !valid_child(n.left) || !valid_child(n.right)) {
            throw Error(ErrorCode::CorruptFile, "tree node out of range");
        }
    }
    return DecisionTree(n_features, n_classes, std::move(nodes), std::move(probs));
}

void write_prune(ByteWriter& w, const PruneReport& report) {
    w.u64(report.removed.size());
    for (const auto& r : report.removed) {
        w.str(r.feature);
        w.u8(static_cast<std::uint8_t>(r.reason));
        w.str(r.partner);
        w.f64(r.value);
        w.str(r.evidence);
    }
    write_schema(w, report.kept);
}

PruneReport read_prune(ByteReader& r) {
    PruneReport report;
    const std::size_t n = r.count(21);
    for (std::size_t i = 0; i < n; ++i) {
        Removal rm;
        rm.feature = r.str();
        const char reason = static_cast<char>(r.u8());
        if (reason != 'L' && reason != 'C' && reason != 'V' && reason != 'D') {
            throw Error(ErrorCode::CorruptFile, "unknown prune reason");
        }
        rm.reason = static_cast<PruneReason>(reason);
        rm.partner = r.str();
        rm.value = r.f64();
        rm.evidence = r.str();
        report.removed.push_back(std::move(rm));
    }
    report.kept = read_schema(r);
    return report;
}

void write_scaler(ByteWriter& w, const Scaler& s) {
    w.u8(s.fitted() ? 1 : 0);
    w.str(s.schema_version());
    w.u64(s.columns().size());
    for (const auto& c : s.columns()) {
        w.str(c.name);
        w.u8(static_cast<std::uint8_t>(c.kind));
        w.f64(c.mean);
        w.f64(c.std);
        w.f64(c.fill);
        w.u64(c.categories.size());
        for (double v : c.categories) w.f64(v);
    }
}

Scaler read_scaler(ByteReader& r) {
    const bool fitted = r.u8() != 0;
    std::string version = r.str();
    const std::size_t n = r.count(37);
    std::vector<Scaler::Column> cols(n);
    for (auto& c : cols) {
        c.name = r.str();
        c.kind = read_kind(r);
        c.mean = r.f64();
        c.std = r.f64();
        c.fill = r.f64();
        c.categories.resize(r.count(8));
        for (auto& v : c.categories) v = r.f64();
    }
    if (!fitted) return Scaler{};
    return Scaler::from_columns(std::move(version), std::move(cols));
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const OvRModel& model) {
    ByteWriter w;
    w.raw(kModelMagic);
    w.u32(kModelFormatVersion);
    w.str(model.schema_version);
    w.u64(model.meta.seed);
    w.f64(model.meta.window_s);
    w.u64(model.meta.dataset_fingerprint);
    w.u64(model.meta.train_rows);
    write_prune(w, model.prune);
    write_scaler(w, model.scaler);
    w.u64(model.forests.size());
    for (const auto& [label, forest] : model.forests) {
        w.str(label);
        write_params(w, forest.params());
        w.u64(forest.n_features());
        w.u64(forest.n_classes());
        w.u64(forest.trees().size());
        for (const auto& t : forest.trees()) write_tree(w, t);
    }
    auto bytes = std::move(w.bytes());
    seal_with_crc(bytes);
    return bytes;
}

OvRModel deserialize_model(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kModelMagic.size() + 4 || !std::equal(kModelMagic.begin(), kModelMagic.end(), bytes.begin())) {
        throw Error(ErrorCode::CorruptFile, "not a model artifact (bad magic)");
    }
    {
        ByteReader header(bytes.subspan(kModelMagic.size(), 4));
        const std::uint32_t version = header.u32();
        if (version != kModelFormatVersion) {
            throw Error(ErrorCode::SchemaVersionMismatch,
                        fmt::format("model format version {} (this build reads {})", version, kModelFormatVersion));
        }
    }
    const auto body = unseal_crc(bytes, "model artifact");
    ByteReader r(body.subspan(kModelMagic.size() + 4));

    OvRModel model;
    model.schema_version = r.str();
    if (model.schema_version != kSchemaVersion) {
        throw Error(ErrorCode::SchemaVersionMismatch,
                    fmt::format("model feature schema {} (this build uses {})", model.schema_version, kSchemaVersion));
    }
    model.meta.seed = r.u64();
    model.meta.window_s = r.f64();
    model.meta.dataset_fingerprint = r.u64();
    model.meta.train_rows = r.u64();
    model.prune = read_prune(r);
    model.scaler = read_scaler(r);
    const std::size_t n_forests = r.count(4);
    for (std::size_t f = 0; f < n_forests; ++f) {
        std::string label = r.str();
        const HyperParams params = read_params(r);
        const std::size_t n_features = r.u64();
        const std::size_t n_classes = r.u64();
        const std::size_t n_trees = r.count(16);
        std::vector<DecisionTree> trees;
        trees.reserve(n_trees);
        for (std::size_t t = 0; t < n_trees; ++t) trees.push_back(read_tree(r, n_features, n_classes));
        model.forests.emplace(std::move(label), RandomForest(params, n_features, n_classes, std::move(trees)));
    }
    if (!r.at_end()) throw Error(ErrorCode::CorruptFile, "trailing bytes after model payload");
    return model;
}

void save_model(const OvRModel& model, const std::filesystem::path& path) {
    atomic_write_file(path, serialize_model(model));
}

OvRModel load_model(const std::filesystem::path& path) { return deserialize_model(read_file_bytes(path)); }

}  // namespace iotid
