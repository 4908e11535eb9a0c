#include "leamatch/forest.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "leamatch/digest.hpp"

namespace leamatch {

namespace {

using Inputs = std::array<double, kFeatureCount>;

class TreeBuilder {
public:
    TreeBuilder(const std::vector<Inputs>& x, const std::vector<int>& y, const ForestConfig& cfg, std::mt19937_64& rng)
        : x_(x), y_(y), cfg_(cfg), rng_(rng) {}

    DecisionTree build(std::vector<std::size_t> rows) {
        DecisionTree tree;
        grow(tree, rows, 0);
        return tree;
    }

private:
    static double gini(double neg, double pos) {
        const double n = neg + pos;
        if (n <= 0) return 0.0;
        const double p = pos / n;
        return 2.0 * p * (1.0 - p);
    }

    std::vector<std::size_t> pick_features() {
        std::array<std::size_t, kFeatureCount> all{};
        std::iota(all.begin(), all.end(), 0);
        const auto k = static_cast<std::size_t>(std::clamp<int>(cfg_.feature_subset_size, 1, kFeatureCount));
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, kFeatureCount - 1);
            std::swap(all[i], all[pick(rng_)]);
        }
        return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k)};
    }

    std::int32_t grow(DecisionTree& tree, std::vector<std::size_t>& rows, int depth) {
        const auto id = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        std::array<std::uint32_t, 2> counts{0, 0};
        for (auto r : rows) ++counts[static_cast<std::size_t>(y_[r])];
        tree.nodes[id].counts = counts;

        const auto n = rows.size();
        const bool pure = counts[0] == 0 || counts[1] == 0;
        if (pure || depth >= cfg_.max_depth || n < 2 * static_cast<std::size_t>(cfg_.min_leaf)) return id;

        const auto min_leaf = static_cast<std::size_t>(std::max(1, cfg_.min_leaf));
        double best_impurity = gini(counts[0], counts[1]) * static_cast<double>(n);
        std::size_t best_feature = kFeatureCount;
        double best_threshold = 0.0;

        for (auto f : pick_features()) {
            std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
                return x_[a][f] < x_[b][f] || (x_[a][f] == x_[b][f] && a < b);
            });
            std::array<double, 2> left{0, 0};
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left[static_cast<std::size_t>(y_[rows[i]])] += 1;
                const double v = x_[rows[i]][f];
                const double next = x_[rows[i + 1]][f];
                if (!(v < next)) continue;
                const std::size_t nl = i + 1;
                if (nl < min_leaf || n - nl < min_leaf) continue;
                const double rn = counts[0] - left[0], rp = counts[1] - left[1];
                const double impurity = gini(left[0], left[1]) * static_cast<double>(nl) +
                                        gini(rn, rp) * static_cast<double>(n - nl);
                if (impurity < best_impurity - 1e-12) {
                    best_impurity = impurity;
                    best_feature = f;
                    best_threshold = 0.5 * (v + next);
                    if (!(best_threshold < next)) best_threshold = v;
                }
            }
        }
        if (best_feature == kFeatureCount) return id;

        std::vector<std::size_t> lrows, rrows;
        for (auto r : rows) (x_[r][best_feature] <= best_threshold ? lrows : rrows).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        tree.nodes[id].feature = static_cast<std::uint8_t>(best_feature);
        tree.nodes[id].threshold = best_threshold;
        const auto l = grow(tree, lrows, depth + 1);
        const auto r = grow(tree, rrows, depth + 1);
        tree.nodes[id].left = l;
        tree.nodes[id].right = r;
        return id;
    }

    const std::vector<Inputs>& x_;
    const std::vector<int>& y_;
    const ForestConfig& cfg_;
    std::mt19937_64& rng_;
};

double leaf_vote(const TreeNode& leaf) {
    if (leaf.counts[1] > leaf.counts[0]) return 1.0;
    if (leaf.counts[1] < leaf.counts[0]) return 0.0;
    return 0.5;
}

// Little-endian writers/readers for the LEAFRST1 format.
template <typename T>
void put(std::string& out, T v) {
    static_assert(std::endian::native == std::endian::little);
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        if (pos_ + sizeof(T) > bytes_.size()) throw Error(ErrorCode::BadForest, "truncated forest stream");
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

constexpr std::string_view kForestMagic = "LEAFRST1";
constexpr std::uint32_t kForestVersion = 1;

void encode_tree(std::string& out, const DecisionTree& tree, std::int32_t id) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    put<std::uint8_t>(out, node.feature);
    if (node.is_leaf()) {
        put<std::uint32_t>(out, node.counts[0]);
        put<std::uint32_t>(out, node.counts[1]);
        return;
    }
    put<double>(out, node.threshold);
    encode_tree(out, tree, node.left);
    encode_tree(out, tree, node.right);
}

std::int32_t decode_tree(Reader& in, DecisionTree& tree, std::uint32_t budget) {
    if (tree.nodes.size() >= budget) throw Error(ErrorCode::BadForest, "tree exceeds declared node count");
    const auto id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    const auto feature = in.get<std::uint8_t>();
    tree.nodes[id].feature = feature;
    if (feature == kLeafMarker) {
        tree.nodes[id].counts = {in.get<std::uint32_t>(), in.get<std::uint32_t>()};
        return id;
    }
    if (feature >= kFeatureCount) throw Error(ErrorCode::BadForest, "split on unknown feature");
    tree.nodes[id].threshold = in.get<double>();
    const auto l = decode_tree(in, tree, budget);
    const auto r = decode_tree(in, tree, budget);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
}

std::string encode_trees(const Forest& forest) {
    std::string out;
    for (const auto& tree : forest.trees) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(tree.nodes.size()));
        if (!tree.nodes.empty()) encode_tree(out, tree, 0);
    }
    return out;
}

void put_header(std::string& out, const Forest& forest, std::uint64_t digest) {
    out.append(kForestMagic);
    put<std::uint32_t>(out, kForestVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(forest.trees.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(forest.config.max_depth));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(forest.config.min_leaf));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(forest.config.feature_subset_size));
    put<std::uint64_t>(out, forest.config.seed);
    put<double>(out, forest.oob_accuracy);
    put<std::uint64_t>(out, digest);
}

}  // namespace

const TreeNode& DecisionTree::leaf_for(const std::array<double, kFeatureCount>& x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf())
        i = static_cast<std::size_t>(x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right);
    return nodes[i];
}

Forest train_forest(const std::vector<LabeledFeatures>& samples, const ForestConfig& cfg) {
    std::vector<Inputs> x;
    std::vector<int> y;
    x.reserve(samples.size());
    y.reserve(samples.size());
    int pos = 0, neg = 0;
    for (const auto& s : samples) {
        x.push_back(forest_inputs(s.features));
        y.push_back(s.same_source ? 1 : 0);
        (s.same_source ? pos : neg)++;
    }
    if (pos < cfg.min_per_class || neg < cfg.min_per_class)
        throw Error(ErrorCode::ClassImbalance, std::to_string(pos) + " same-source vs " + std::to_string(neg) +
                                                   " different-source samples");
    if (std::all_of(x.begin(), x.end(), [&](const Inputs& v) { return v == x.front(); }))
        throw Error(ErrorCode::DegenerateFeatures, "all samples share one feature vector");
    if (cfg.n_trees < 1 || cfg.max_depth < 0 || cfg.min_leaf < 1)
        throw Error(ErrorCode::BadConfig, "forest hyperparameters out of range");

    Forest forest;
    forest.config = cfg;
    std::mt19937_64 rng(cfg.seed);
    const std::size_t n = x.size();
    std::vector<double> oob_votes(n, 0.0);
    std::vector<int> oob_trees(n, 0);

    for (int t = 0; t < cfg.n_trees; ++t) {
        std::vector<std::size_t> rows(n);
        std::vector<char> in_bag(n, 0);
        std::uniform_int_distribution<std::size_t> draw(0, n - 1);
        for (auto& r : rows) {
            r = draw(rng);
            in_bag[r] = 1;
        }
        TreeBuilder builder(x, y, cfg, rng);
        forest.trees.push_back(builder.build(std::move(rows)));
        for (std::size_t i = 0; i < n; ++i) {
            if (in_bag[i]) continue;
            oob_votes[i] += leaf_vote(forest.trees.back().leaf_for(x[i]));
            ++oob_trees[i];
        }
    }

    std::size_t evaluated = 0, correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (oob_trees[i] == 0) continue;
        ++evaluated;
        const double p = oob_votes[i] / oob_trees[i];
        if ((p > 0.5) == (y[i] == 1)) ++correct;
    }
    forest.oob_accuracy = evaluated > 0 ? static_cast<double>(correct) / static_cast<double>(evaluated) : 0.0;
    forest.training_digest = forest_digest(forest);
    return forest;
}

double score_inputs(const Forest& forest, const std::array<double, kFeatureCount>& x) {
    if (forest.trees.empty()) throw Error(ErrorCode::BadForest, "empty forest");
    double votes = 0.0;
    for (const auto& tree : forest.trees) votes += leaf_vote(tree.leaf_for(x));
    return votes / static_cast<double>(forest.trees.size());
}

double score_land_pair(const Forest& forest, const FeatureVector& fv) {
    return score_inputs(forest, forest_inputs(fv));
}

std::uint64_t forest_digest(const Forest& forest) {
    std::string bytes;
    put_header(bytes, forest, 0);
    bytes += encode_trees(forest);
    return fnv1a(bytes);
}

std::string encode_forest(const Forest& forest) {
    std::string out;
    put_header(out, forest, forest_digest(forest));
    out += encode_trees(forest);
    return out;
}

Forest decode_forest(std::string_view bytes) {
    if (bytes.substr(0, kForestMagic.size()) != kForestMagic)
        throw Error(ErrorCode::BadForest, "stream does not start with LEAFRST1");
    Reader in(bytes.substr(kForestMagic.size()));
    if (in.get<std::uint32_t>() != kForestVersion) throw Error(ErrorCode::BadForest, "unsupported forest version");
    Forest forest;
    const auto n_trees = in.get<std::uint32_t>();
    forest.config.n_trees = static_cast<int>(n_trees);
    forest.config.max_depth = static_cast<int>(in.get<std::uint32_t>());
    forest.config.min_leaf = static_cast<int>(in.get<std::uint32_t>());
    forest.config.feature_subset_size = static_cast<int>(in.get<std::uint32_t>());
    forest.config.seed = in.get<std::uint64_t>();
    forest.oob_accuracy = in.get<double>();
    const auto stored_digest = in.get<std::uint64_t>();
    for (std::uint32_t t = 0; t < n_trees; ++t) {
        const auto count = in.get<std::uint32_t>();
        DecisionTree tree;
        if (count > 0) decode_tree(in, tree, count);
        if (tree.nodes.size() != count) throw Error(ErrorCode::BadForest, "node count mismatch");
        forest.trees.push_back(std::move(tree));
    }
    if (!in.done()) throw Error(ErrorCode::BadForest, "trailing bytes after last tree");
    forest.training_digest = forest_digest(forest);
    if (forest.training_digest != stored_digest) throw Error(ErrorCode::BadForest, "digest mismatch");
    check_forest(forest);
    return forest;
}

void check_forest(const Forest& forest) {
    if (forest.trees.empty()) throw Error(ErrorCode::BadForest, "forest has no trees");
    for (const auto& tree : forest.trees) {
        if (tree.nodes.empty()) throw Error(ErrorCode::BadForest, "empty tree");
        const auto n = static_cast<std::int32_t>(tree.nodes.size());
        for (const auto& node : tree.nodes) {
            if (node.is_leaf()) {
                if (node.counts[0] + node.counts[1] == 0) throw Error(ErrorCode::BadForest, "empty leaf");
                continue;
            }
            if (node.feature >= kFeatureCount) throw Error(ErrorCode::BadForest, "split on unknown feature");
            if (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n)
                throw Error(ErrorCode::BadForest, "child index out of range");
        }
    }
}

void save_forest_file(const Forest& forest, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot create " + path);
    const auto bytes = encode_forest(forest);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

Forest load_forest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode_forest(ss.str());
}

}  // namespace leamatch
