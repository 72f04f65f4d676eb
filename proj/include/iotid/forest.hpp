#pragma once

#include "iotid/matrix.hpp"
#include "iotid/random.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace iotid {

struct MaxFeatures {
    enum class Kind : std::uint8_t { Sqrt, Log2, All, Fraction };

    Kind kind = Kind::Sqrt;
    double fraction = 1.0;  // Fraction only, in (0, 1]

    // Number of candidate features per split, at least 1.
    std::size_t resolve(std::size_t n_features) const;
    std::string to_string() const;
    static std::optional<MaxFeatures> parse(std::string_view text);

    bool operator==(const MaxFeatures&) const = default;
};

struct HyperParams {
    std::size_t n_trees = 100;
    std::optional<std::size_t> max_depth;  // nullopt = grow until pure / min-sample bounds
    std::size_t min_samples_split = 2;
    std::size_t min_samples_leaf = 1;
    MaxFeatures max_features;
    std::uint64_t seed = 0;

    // Throws Error{InvalidParams}.
    void validate() const;
    std::string to_string() const;

    bool operator==(const HyperParams&) const = default;
};

// Gini impurity 1 - sum p_c^2 of a class-count histogram (0 when empty).
double gini_impurity(std::span<const std::size_t> class_counts);

class DecisionTree {
public:
    struct Node {
        std::int32_t feature = -1;  // -1 marks a leaf
        double threshold = 0.0;     // go left when x[feature] <= threshold
        std::int32_t left = -1;
        std::int32_t right = -1;
        std::uint32_t leaf = 0;  // index into the leaf distribution table

        bool operator==(const Node&) const = default;
    };

    DecisionTree() = default;
    DecisionTree(std::size_t n_features, std::size_t n_classes, std::vector<Node> nodes, std::vector<double> leaf_probs);

    // Class distribution of the leaf reached by `row`.
    std::span<const double> predict_proba(std::span<const double> row) const;
    std::size_t leaf_index(std::span<const double> row) const;

    std::size_t n_features() const noexcept { return n_features_; }
    std::size_t n_classes() const noexcept { return n_classes_; }
    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const std::vector<double>& leaf_probs() const noexcept { return leaf_probs_; }
    std::size_t depth() const;
    std::size_t leaf_count() const noexcept { return n_classes_ ? leaf_probs_.size() / n_classes_ : 0; }

    bool operator==(const DecisionTree&) const = default;

private:
    std::size_t n_features_ = 0;
    std::size_t n_classes_ = 0;
    std::vector<Node> nodes_;
    std::vector<double> leaf_probs_;
};

// Greedy CART on the rows listed in `sample` (duplicates allowed, as from a
// bootstrap). Labels are class indices in [0, n_classes). Candidate features
// are drawn without replacement; when none of the first max_features yields a
// valid split, the search continues through the remaining features.
// Throws Error{EmptyData} for an empty sample.
DecisionTree train_tree(const DenseMatrix& x, std::span<const int> y, std::size_t n_classes,
                        std::span<const std::size_t> sample, const HyperParams& params, Rng& rng);

DecisionTree train_tree(const DenseMatrix& x, std::span<const int> y, std::size_t n_classes, const HyperParams& params,
                        Rng& rng);

class RandomForest {
public:
    RandomForest() = default;
    RandomForest(HyperParams params, std::size_t n_features, std::size_t n_classes, std::vector<DecisionTree> trees);

    // Mean leaf distribution over trees. Throws Error{SchemaMismatch} when the
    // row width differs from the training width.
    std::vector<double> predict_proba(std::span<const double> row) const;
    // Binary forests: probability of class 1.
    double positive_proba(std::span<const double> row) const;

    const HyperParams& params() const noexcept { return params_; }
    std::size_t n_features() const noexcept { return n_features_; }
    std::size_t n_classes() const noexcept { return n_classes_; }
    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

    bool operator==(const RandomForest&) const = default;

private:
    HyperParams params_;
    std::size_t n_features_ = 0;
    std::size_t n_classes_ = 0;
    std::vector<DecisionTree> trees_;
};

// Rows drawn n times with replacement.
std::vector<std::size_t> bootstrap_sample(std::size_t n, Rng& rng);

// n_trees trees, tree t trained on a bootstrap drawn from
// derive_seed(params.seed, t). Parallel and serial runs are identical.
RandomForest train_forest(const DenseMatrix& x, std::span<const int> y, std::size_t n_classes,
                          const HyperParams& params, unsigned jobs = 1);

}  // namespace iotid
