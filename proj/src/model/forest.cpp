#include "iotid/forest.hpp"

#include "iotid/error.hpp"
#include "iotid/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace iotid {

std::size_t MaxFeatures::resolve(std::size_t n_features) const {
    if (n_features == 0) return 0;
    const double n = static_cast<double>(n_features);
    double k = n;
    switch (kind) {
    case Kind::Sqrt: k = std::floor(std::sqrt(n)); break;
    case Kind::Log2: k = std::floor(std::log2(n)); break;
    case Kind::All: k = n; break;
    case Kind::Fraction: k = std::floor(fraction * n); break;
    }
    return std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, n_features);
}

std::string MaxFeatures::to_string() const {
    switch (kind) {
    case Kind::Sqrt: return "sqrt";
    case Kind::Log2: return "log2";
    case Kind::All: return "all";
    case Kind::Fraction: return fmt::format("{}", fraction);
    }
    return "sqrt";
}

std::optional<MaxFeatures> MaxFeatures::parse(std::string_view text) {
    if (text == "sqrt") return MaxFeatures{Kind::Sqrt, 1.0};
    if (text == "log2") return MaxFeatures{Kind::Log2, 1.0};
    if (text == "all") return MaxFeatures{Kind::All, 1.0};
    try {
        std::size_t used = 0;
        const double f = std::stod(std::string(text), &used);
        if (used != text.size() || !(f > 0.0 && f <= 1.0)) return std::nullopt;
        return MaxFeatures{Kind::Fraction, f};
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void HyperParams::validate() const {
    if (n_trees < 1) throw Error(ErrorCode::InvalidParams, "n_trees must be >= 1");
    if (min_samples_split < 2) throw Error(ErrorCode::InvalidParams, "min_samples_split must be >= 2");
    if (min_samples_leaf < 1) throw Error(ErrorCode::InvalidParams, "min_samples_leaf must be >= 1");
    if (max_depth && *max_depth < 1) throw Error(ErrorCode::InvalidParams, "max_depth must be >= 1 when set");
    if (max_features.kind == MaxFeatures::Kind::Fraction &&
        !(max_features.fraction > 0.0 && max_features.fraction <= 1.0)) {
        throw Error(ErrorCode::InvalidParams, "max_features fraction must be in (0, 1]");
    }
}

std::string HyperParams::to_string() const {
    return fmt::format("n_trees={} max_depth={} min_samples_split={} min_samples_leaf={} max_features={} seed={}",
                       n_trees, max_depth ? std::to_string(*max_depth) : "none", min_samples_split, min_samples_leaf,
                       max_features.to_string(), seed);
}

double gini_impurity(std::span<const std::size_t> class_counts) {
    const double n = static_cast<double>(std::accumulate(class_counts.begin(), class_counts.end(), std::size_t{0}));
    if (n == 0.0) return 0.0;
    double sq = 0.0;
    for (auto c : class_counts) sq += (static_cast<double>(c) / n) * (static_cast<double>(c) / n);
    return 1.0 - sq;
}

DecisionTree::DecisionTree(std::size_t n_features, std::size_t n_classes, std::vector<Node> nodes,
                           std::vector<double> leaf_probs)
    : n_features_(n_features), n_classes_(n_classes), nodes_(std::move(nodes)), leaf_probs_(std::move(leaf_probs)) {}

std::size_t DecisionTree::leaf_index(std::span<const double> row) const {
    std::size_t at = 0;
    while (nodes_[at].feature >= 0) {
        const Node& n = nodes_[at];
        at = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes_[at].leaf;
}

std::span<const double> DecisionTree::predict_proba(std::span<const double> row) const {
    return std::span(leaf_probs_).subspan(leaf_index(row) * n_classes_, n_classes_);
}

std::size_t DecisionTree::depth() const {
    if (nodes_.empty()) return 0;
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [at, d] = stack.back();
        stack.pop_back();
        best = std::max(best, d);
        if (nodes_[at].feature >= 0) {
            stack.push_back({static_cast<std::size_t>(nodes_[at].left), d + 1});
            stack.push_back({static_cast<std::size_t>(nodes_[at].right), d + 1});
        }
    }
    return best;
}

namespace {

struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double score = -1.0;  // sum_c nL_c^2/nL + sum_c nR_c^2/nR; larger = lower weighted Gini
    bool found = false;
};

class TreeBuilder {
public:
    TreeBuilder(const DenseMatrix& x, std::span<const int> y, std::size_t n_classes, const HyperParams& params, Rng& rng)
        : x_(x), y_(y), k_(n_classes), params_(params), rng_(rng), mtry_(params.max_features.resolve(x.cols)),
          left_(n_classes), right_(n_classes) {}

    DecisionTree build(std::span<const std::size_t> sample) {
        idx_.assign(sample.begin(), sample.end());
        nodes_.push_back({});
        struct Work {
            std::size_t begin, end, depth, node;
        };
        std::vector<Work> stack{{0, idx_.size(), 0, 0}};
        std::vector<std::size_t> counts(k_);
        while (!stack.empty()) {
            const Work w = stack.back();
            stack.pop_back();
            std::fill(counts.begin(), counts.end(), 0);
            for (std::size_t i = w.begin; i < w.end; ++i) ++counts[static_cast<std::size_t>(y_[idx_[i]])];
            const std::size_t n = w.end - w.begin;
            const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
            const bool depth_stop = params_.max_depth && w.depth >= *params_.max_depth;
            Split split;
            if (!pure && !depth_stop && n >= params_.min_samples_split && n >= 2 * params_.min_samples_leaf) {
                split = find_split(w.begin, w.end, counts);
            }
            if (!split.found) {
                make_leaf(w.node, counts, n);
                continue;
            }
            const auto mid = std::partition(idx_.begin() + static_cast<std::ptrdiff_t>(w.begin),
                                            idx_.begin() + static_cast<std::ptrdiff_t>(w.end), [&](std::size_t r) {
                                                return x_.at(r, split.feature) <= split.threshold;
                                            });
            const std::size_t cut = static_cast<std::size_t>(mid - idx_.begin());
            const auto left = static_cast<std::int32_t>(nodes_.size());
            nodes_.push_back({});
            nodes_.push_back({});
            DecisionTree::Node& node = nodes_[w.node];
            node.feature = static_cast<std::int32_t>(split.feature);
            node.threshold = split.threshold;
            node.left = left;
            node.right = left + 1;
            // Right pushed first so the left subtree is built first.
            stack.push_back({cut, w.end, w.depth + 1, static_cast<std::size_t>(left + 1)});
            stack.push_back({w.begin, cut, w.depth + 1, static_cast<std::size_t>(left)});
        }
        return DecisionTree(x_.cols, k_, std::move(nodes_), std::move(leaf_probs_));
    }

private:
    void make_leaf(std::size_t node, const std::vector<std::size_t>& counts, std::size_t n) {
        nodes_[node].feature = -1;
        nodes_[node].leaf = static_cast<std::uint32_t>(leaf_probs_.size() / k_);
        for (std::size_t c = 0; c < k_; ++c) {
            leaf_probs_.push_back(static_cast<double>(counts[c]) / static_cast<double>(n));
        }
    }

    Split find_split(std::size_t begin, std::size_t end, const std::vector<std::size_t>& counts) {
        const std::size_t p = x_.cols;
        features_.resize(p);
        std::iota(features_.begin(), features_.end(), std::size_t{0});
        Split best;
        for (std::size_t k = 0; k < p; ++k) {
            if (k >= mtry_ && best.found) break;
            std::swap(features_[k], features_[k + rng_.index(p - k)]);
            scan_feature(features_[k], begin, end, counts, best);
        }
        return best;
    }

    void scan_feature(std::size_t f, std::size_t begin, std::size_t end, const std::vector<std::size_t>& counts,
                      Split& best) {
        const std::size_t n = end - begin;
        values_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t r = idx_[begin + i];
            values_[i] = {x_.at(r, f), y_[r]};
        }
        std::sort(values_.begin(), values_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        if (values_.front().first == values_.back().first) return;

        std::fill(left_.begin(), left_.end(), 0);
        right_ = counts;
        double sq_left = 0.0;
        double sq_right = 0.0;
        for (auto c : counts) sq_right += static_cast<double>(c) * static_cast<double>(c);

        const std::size_t min_leaf = params_.min_samples_leaf;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const auto c = static_cast<std::size_t>(values_[i].second);
            sq_left += 2.0 * static_cast<double>(left_[c]) + 1.0;
            sq_right -= 2.0 * static_cast<double>(right_[c]) - 1.0;
            ++left_[c];
            --right_[c];
            const std::size_t n_left = i + 1;
            const std::size_t n_right = n - n_left;
            if (values_[i].first == values_[i + 1].first) continue;
            if (n_left < min_leaf || n_right < min_leaf) continue;
            const double score =
                sq_left / static_cast<double>(n_left) + sq_right / static_cast<double>(n_right);
            if (!best.found || score > best.score) {
                const double lo = values_[i].first;
                const double hi = values_[i + 1].first;
                double mid = lo + (hi - lo) / 2.0;
                if (!(mid < hi)) mid = lo;
                best = Split{f, mid, score, true};
            }
        }
    }

    const DenseMatrix& x_;
    std::span<const int> y_;
    std::size_t k_;
    const HyperParams& params_;
    Rng& rng_;
    std::size_t mtry_;

    std::vector<std::size_t> idx_;
    std::vector<DecisionTree::Node> nodes_;
    std::vector<double> leaf_probs_;
    std::vector<std::size_t> features_;
    std::vector<std::pair<double, int>> values_;
    std::vector<std::size_t> left_;
    std::vector<std::size_t> right_;
};

void check_labels(const DenseMatrix& x, std::span<const int> y, std::size_t n_classes) {
    if (y.size() != x.rows) {
        throw Error(ErrorCode::SchemaMismatch, fmt::format("{} labels for {} rows", y.size(), x.rows));
    }
    for (int label : y) {
        if (label < 0 || static_cast<std::size_t>(label) >= n_classes) {
            throw Error(ErrorCode::InvalidParams, fmt::format("label {} outside [0, {})", label, n_classes));
        }
    }
}

}  // namespace

DecisionTree train_tree(const DenseMatrix& x, std::span<const int> y, std::size_t n_classes,
                        std::span<const std::size_t> sample, const HyperParams& params, Rng& rng) {
    params.validate();
    if (sample.empty() || x.rows == 0 || x.cols == 0) throw Error(ErrorCode::EmptyData, "no rows to train a tree on");
    if (n_classes == 0) throw Error(ErrorCode::InvalidParams, "n_classes must be >= 1");
    check_labels(x, y, n_classes);
    TreeBuilder builder(x, y, n_classes, params, rng);
    return builder.build(sample);
}

DecisionTree train_tree(const DenseMatrix& x, std::span<const int> y, std::size_t n_classes, const HyperParams& params,
                        Rng& rng) {
    std::vector<std::size_t> all(x.rows);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return train_tree(x, y, n_classes, all, params, rng);
}

RandomForest::RandomForest(HyperParams params, std::size_t n_features, std::size_t n_classes,
                           std::vector<DecisionTree> trees)
    : params_(params), n_features_(n_features), n_classes_(n_classes), trees_(std::move(trees)) {}

std::vector<double> RandomForest::predict_proba(std::span<const double> row) const {
    if (row.size() != n_features_) {
        throw Error(ErrorCode::SchemaMismatch, fmt::format("row has {} features, forest expects {}", row.size(), n_features_));
    }
    std::vector<double> acc(n_classes_, 0.0);
    for (const auto& t : trees_) {
        const auto p = t.predict_proba(row);
        for (std::size_t c = 0; c < n_classes_; ++c) acc[c] += p[c];
    }
    const double n = static_cast<double>(trees_.size());
    for (auto& v : acc) v /= n;
    return acc;
}

double RandomForest::positive_proba(std::span<const double> row) const {
    const auto p = predict_proba(row);
    return p.size() > 1 ? p[1] : 0.0;
}

std::vector<std::size_t> bootstrap_sample(std::size_t n, Rng& rng) {
    std::vector<std::size_t> out(n);
    for (auto& i : out) i = rng.index(n);
    return out;
}

RandomForest train_forest(const DenseMatrix& x, std::span<const int> y, std::size_t n_classes,
                          const HyperParams& params, unsigned jobs) {
    params.validate();
    if (x.rows == 0) throw Error(ErrorCode::EmptyData, "no rows to train a forest on");
    check_labels(x, y, n_classes);
    std::vector<DecisionTree> trees(params.n_trees);
    parallel_for(params.n_trees, jobs, [&](std::size_t t) {
        Rng rng(derive_seed(params.seed, t));
        const auto sample = bootstrap_sample(x.rows, rng);
        trees[t] = train_tree(x, y, n_classes, sample, params, rng);
    });
    return RandomForest(params, x.cols, n_classes, std::move(trees));
}

}  // namespace iotid
