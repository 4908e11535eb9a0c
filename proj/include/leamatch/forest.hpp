#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "leamatch/striae.hpp"

namespace leamatch {

struct ForestConfig {
    int n_trees = 200;
    int max_depth = 8;
    int min_leaf = 5;
    int feature_subset_size = 3;
    std::uint64_t seed = 20240601;
    /// Minimum samples required in each class.
    int min_per_class = 50;
};

inline constexpr std::uint8_t kLeafMarker = 0xFF;

/// Node in preorder; a split sends x[feature] <= threshold to the left
/// child, which always immediately follows its parent.
struct TreeNode {
    std::uint8_t feature = kLeafMarker;
    double threshold = 0.0;
    std::array<std::uint32_t, 2> counts{0, 0};  // {different-source, same-source}
    std::int32_t left = -1;
    std::int32_t right = -1;

    bool is_leaf() const { return feature == kLeafMarker; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    const TreeNode& leaf_for(const std::array<double, kFeatureCount>& x) const;
};

struct Forest {
    std::vector<DecisionTree> trees;
    ForestConfig config;
    double oob_accuracy = 0.0;
    std::uint64_t training_digest = 0;

    int n_trees() const { return static_cast<int>(trees.size()); }
};

struct LabeledFeatures {
    FeatureVector features;
    bool same_source = false;
};

/// Bagged CART trees with Gini splits over a random feature subset per
/// node. Deterministic for a fixed seed and sample order. Throws
/// Error(ClassImbalance) or Error(DegenerateFeatures).
Forest train_forest(const std::vector<LabeledFeatures>& samples, const ForestConfig& cfg);

/// Fraction of trees whose leaf majority is same-source; a tied leaf
/// contributes one half.
double score_land_pair(const Forest& forest, const FeatureVector& fv);
double score_inputs(const Forest& forest, const std::array<double, kFeatureCount>& x);

/// Digest over hyperparameters, seed and tree structure.
std::uint64_t forest_digest(const Forest& forest);

/// LEAFRST1 binary format.
std::string encode_forest(const Forest& forest);
Forest decode_forest(std::string_view bytes);

void save_forest_file(const Forest& forest, const std::string& path);
Forest load_forest_file(const std::string& path);

/// Throws Error(BadForest) when a split references an invalid feature,
/// a child index is out of range, or a leaf is empty.
void check_forest(const Forest& forest);

}  // namespace leamatch
