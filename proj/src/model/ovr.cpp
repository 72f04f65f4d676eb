#include "iotid/ovr.hpp"

#include "iotid/error.hpp"
#include "iotid/parallel.hpp"

#include <fmt/format.h>

#include <bit>
#include <set>

namespace iotid {

std::vector<std::string> OvRModel::devices() const {
    std::vector<std::string> out;
    for (const auto& [label, forest] : forests) out.push_back(label);
    return out;
}

std::uint64_t device_seed(std::uint64_t base, std::string_view device) { return derive_seed(base, device); }

RandomForest train_device_forest(const DenseMatrix& x, std::span<const std::string> labels, const std::string& device,
                                 const HyperParams& params, const OvrOptions& options) {
    if (labels.size() != x.rows) {
        throw Error(ErrorCode::SchemaMismatch, fmt::format("{} labels for {} rows", labels.size(), x.rows));
    }
    std::vector<int> binary(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) binary[i] = labels[i] == device ? 1 : 0;

    HyperParams p = params;
    p.seed = device_seed(params.seed, device);
    if (!options.balance_tasks) return train_forest(x, binary, 2, p, 1);

    const auto picks = oversample_indices<int>(binary, derive_seed(p.seed, "oversample"));
    const DenseMatrix balanced = x.subset(picks);
    std::vector<int> balanced_y(picks.size());
    for (std::size_t i = 0; i < picks.size(); ++i) balanced_y[i] = binary[picks[i]];
    return train_forest(balanced, balanced_y, 2, p, 1);
}

OvRModel train_ovr(const DenseMatrix& x, std::span<const std::string> labels, const HyperParams& params,
                   const OvrOptions& options) {
    params.validate();
    const std::set<std::string> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) {
        throw Error(ErrorCode::SingleClass, fmt::format("one-vs-rest needs >= 2 device labels, got {}", distinct.size()));
    }
    const std::vector<std::string> devices(distinct.begin(), distinct.end());
    std::vector<RandomForest> forests(devices.size());
    parallel_for(devices.size(), options.jobs, [&](std::size_t i) {
        forests[i] = train_device_forest(x, labels, devices[i], params, options);
    });

    OvRModel model;
    for (std::size_t i = 0; i < devices.size(); ++i) model.forests.emplace(devices[i], std::move(forests[i]));
    model.meta.seed = params.seed;
    model.meta.train_rows = x.rows;
    model.meta.dataset_fingerprint = dataset_fingerprint(x, labels);
    return model;
}

void add_device(OvRModel& model, const std::string& device, const DenseMatrix& x, std::span<const std::string> labels,
                const HyperParams& params, const OvrOptions& options) {
    params.validate();
    model.forests.insert_or_assign(device, train_device_forest(x, labels, device, params, options));
}

std::map<std::string, double> device_scores(const OvRModel& model, std::span<const double> row) {
    std::map<std::string, double> out;
    for (const auto& [label, forest] : model.forests) out.emplace(label, forest.positive_proba(row));
    return out;
}

DevicePrediction fuse_scores(const std::map<std::string, double>& scores, std::optional<double> threshold) {
    DevicePrediction best{std::string(kUnknownDevice), -1.0};
    // Map iteration is in label order, so strict '>' keeps the smaller label on ties.
    for (const auto& [label, score] : scores) {
        if (score > best.score) best = {label, score};
    }
    if (scores.empty()) best.score = 0.0;
    if (threshold && best.score < *threshold) best.label = std::string(kUnknownDevice);
    return best;
}

DevicePrediction predict_device(const OvRModel& model, std::span<const double> row, std::optional<double> threshold) {
    return fuse_scores(device_scores(model, row), threshold);
}

std::uint64_t dataset_fingerprint(const DenseMatrix& x, std::span<const std::string> labels) {
    std::uint64_t h = fnv1a64(fmt::format("{}x{}", x.rows, x.cols));
    for (double v : x.data) h = splitmix64(h ^ std::bit_cast<std::uint64_t>(v));
    for (const auto& name : x.column_names) h = fnv1a64(name, h);
    for (const auto& l : labels) h = fnv1a64(l, splitmix64(h));
    return h;
}

std::size_t SearchSpace::grid_size() const {
    return n_trees.size() * max_depth.size() * min_samples_split.size() * min_samples_leaf.size() *
           max_features.size();
}

HyperParams SearchSpace::at(std::size_t index, std::uint64_t seed) const {
    HyperParams p;
    p.seed = seed;
    p.max_features = max_features[index % max_features.size()];
    index /= max_features.size();
    p.min_samples_leaf = min_samples_leaf[index % min_samples_leaf.size()];
    index /= min_samples_leaf.size();
    p.min_samples_split = min_samples_split[index % min_samples_split.size()];
    index /= min_samples_split.size();
    p.max_depth = max_depth[index % max_depth.size()];
    index /= max_depth.size();
    p.n_trees = n_trees[index % n_trees.size()];
    return p;
}

std::vector<std::size_t> session_folds(std::span<const std::string> session_ids, std::span<const std::string> labels,
                                       std::size_t k_folds, std::uint64_t seed) {
    std::map<std::string, std::set<std::string>> by_label;
    for (std::size_t i = 0; i < session_ids.size(); ++i) by_label[labels[i]].insert(session_ids[i]);

    std::map<std::string, std::size_t> fold_of;
    std::size_t offset = 0;
    for (const auto& [label, ids] : by_label) {
        std::vector<std::string> order(ids.begin(), ids.end());
        Rng rng(derive_seed(seed, label));
        rng.shuffle(std::span(order));
        for (std::size_t i = 0; i < order.size(); ++i) fold_of[order[i]] = (i + offset) % k_folds;
        offset += order.size();
    }
    std::vector<std::size_t> out(session_ids.size());
    for (std::size_t i = 0; i < session_ids.size(); ++i) out[i] = fold_of.at(session_ids[i]);
    return out;
}

namespace {

// true when a beats b under the selection rule.
bool better(const CandidateScore& a, const CandidateScore& b) {
    if (a.mean != b.mean) return a.mean > b.mean;
    if (a.params.n_trees != b.params.n_trees) return a.params.n_trees < b.params.n_trees;
    const auto depth = [](const HyperParams& p) { return p.max_depth.value_or(SIZE_MAX); };
    return depth(a.params) < depth(b.params);
}

}  // namespace

SearchResult randomized_search_cv(const DenseMatrix& x, std::span<const std::string> labels,
                                  std::span<const std::string> session_ids, const SearchSpace& space,
                                  std::size_t n_iter, std::size_t k_folds, std::uint64_t seed,
                                  const OvrOptions& options) {
    const std::size_t grid = space.grid_size();
    if (grid == 0) throw Error(ErrorCode::EmptySpace, "search space has an empty dimension");
    if (n_iter == 0) throw Error(ErrorCode::EmptySpace, "n_iter must be >= 1");
    if (k_folds < 2) throw Error(ErrorCode::PreconditionFailed, "k_folds must be >= 2");
    if (labels.size() != x.rows || session_ids.size() != x.rows) {
        throw Error(ErrorCode::SchemaMismatch, "labels/session ids out of step with the matrix");
    }

    const auto folds = session_folds(session_ids, labels, k_folds, derive_seed(seed, "folds"));
    std::vector<std::vector<std::size_t>> train_rows(k_folds), test_rows(k_folds);
    for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t f = 0; f < k_folds; ++f) (folds[r] == f ? test_rows[f] : train_rows[f]).push_back(r);
    }
    for (std::size_t f = 0; f < k_folds; ++f) {
        if (test_rows[f].empty()) {
            throw Error(ErrorCode::InsufficientSessions, fmt::format("fold {} of {} has no sessions", f, k_folds));
        }
    }

    // Distinct grid points; partial Fisher-Yates over the index range.
    std::vector<std::size_t> order(grid);
    for (std::size_t i = 0; i < grid; ++i) order[i] = i;
    const std::size_t take = std::min(n_iter, grid);
    if (take < grid) {
        Rng rng(derive_seed(seed, "sample"));
        for (std::size_t i = 0; i < take; ++i) std::swap(order[i], order[i + rng.index(grid - i)]);
    }
    order.resize(take);

    SearchResult result;
    for (std::size_t c = 0; c < take; ++c) {
        CandidateScore cand;
        cand.params = space.at(order[c], seed);
        for (std::size_t f = 0; f < k_folds; ++f) {
            const DenseMatrix xtr = x.subset(train_rows[f]);
            std::vector<std::string> ytr;
            for (std::size_t r : train_rows[f]) ytr.push_back(labels[r]);
            const OvRModel model = train_ovr(xtr, ytr, cand.params, options);
            std::size_t correct = 0;
            for (std::size_t r : test_rows[f]) {
                if (predict_device(model, x.row(r)).label == labels[r]) ++correct;
            }
            cand.fold_scores.push_back(static_cast<double>(correct) / static_cast<double>(test_rows[f].size()));
        }
        double sum = 0.0;
        for (double s : cand.fold_scores) sum += s;
        cand.mean = sum / static_cast<double>(k_folds);
        if (result.candidates.empty() || better(cand, result.candidates[result.best_index])) {
            result.best_index = result.candidates.size();
        }
        result.candidates.push_back(std::move(cand));
    }
    result.best = result.candidates[result.best_index].params;
    return result;
}

std::string SearchResult::to_text() const {
    std::string out = "rank\tmean_cv_accuracy\tfold_scores\tparams\n";
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        std::string folds;
        for (double s : c.fold_scores) folds += fmt::format("{}{:.6f}", folds.empty() ? "" : ",", s);
        out += fmt::format("{}\t{:.6f}\t{}\t{}\n", i == best_index ? "best" : std::to_string(i), c.mean, folds,
                           c.params.to_string());
    }
    return out;
}

}  // namespace iotid
