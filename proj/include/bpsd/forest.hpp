// ============================================================================
// forest.hpp - decision-tree ensembles (Random Forest / Extremely Randomized
// Trees) with Gini splitting and class-probability prediction
//
// Randomness is counter-based: every draw is keyed by (seed, tree, node path),
// and rows are brought into a canonical content order before fitting, so the
// fitted model is independent of training-row order and of any parallel
// build schedule.
// ============================================================================
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bpsd/common.hpp"
#include "bpsd/rng.hpp"

namespace bpsd {

enum class ForestMode { RF, ERT };

struct ForestParams {
    int n_trees = 100;
    int k_candidates = 0; // 0 -> ceil(sqrt(n_features))
    int min_split = 2;
    int max_depth = 0; // 0 = unlimited
    ForestMode mode = ForestMode::ERT;
    std::uint64_t seed = 0;

    int resolved_k(int n_features) const {
        if (k_candidates > 0) return std::min(k_candidates, n_features);
        return std::min(n_features, int(std::ceil(std::sqrt(double(n_features)))));
    }
};

/// Internal node when feature >= 0 (x[feature] <= threshold routes left),
/// leaf otherwise (counts holds per-class training counts).
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> counts;

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes; // nodes[0] is the root

    const TreeNode& leaf_for(const std::vector<double>& x) const {
        int i = 0;
        while (!nodes[std::size_t(i)].is_leaf()) {
            const auto& n = nodes[std::size_t(i)];
            i = (x[std::size_t(n.feature)] <= n.threshold) ? n.left : n.right;
        }
        return nodes[std::size_t(i)];
    }
};

class Forest {
public:
    Forest() = default;
    Forest(int n_classes, int n_features, ForestParams params)
        : n_classes_(n_classes), n_features_(n_features), params_(params) {}

    int n_classes() const { return n_classes_; }
    int n_features() const { return n_features_; }
    const ForestParams& params() const { return params_; }
    const std::vector<Tree>& trees() const { return trees_; }
    std::vector<Tree>& trees() { return trees_; }

    std::vector<double> predict_proba(const std::vector<double>& x) const {
        if (int(x.size()) != n_features_)
            throw TrainError("predict_proba: expected " + std::to_string(n_features_) +
                             " features, got " + std::to_string(x.size()));
        std::vector<double> probs(std::size_t(n_classes_), 0.0);
        for (const auto& tree : trees_) {
            const auto& leaf = tree.leaf_for(x);
            const double total =
                std::accumulate(leaf.counts.begin(), leaf.counts.end(), 0.0);
            for (int c = 0; c < n_classes_; ++c)
                probs[std::size_t(c)] += leaf.counts[std::size_t(c)] / total;
        }
        for (auto& p : probs) p /= double(trees_.size());
        return probs;
    }

    int predict(const std::vector<double>& x) const {
        const auto p = predict_proba(x);
        return int(std::max_element(p.begin(), p.end()) - p.begin());
    }

    /// Mean decrease in Gini impurity, normalized to sum to 1 (all zeros when
    /// no tree ever split).
    const std::vector<double>& feature_importances() const { return importances_; }
    std::vector<double>& feature_importances() { return importances_; }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format_version"] = kModelFormatVersion;
        j["kind"] = "forest";
        j["mode"] = params_.mode == ForestMode::ERT ? "ERT" : "RF";
        j["n_classes"] = n_classes_;
        j["n_features"] = n_features_;
        j["params"] = {{"n_trees", params_.n_trees},
                       {"k_candidates", params_.k_candidates},
                       {"min_split", params_.min_split},
                       {"max_depth", params_.max_depth},
                       {"seed", params_.seed}};
        j["importances"] = importances_;
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& tree : trees_) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& n : tree.nodes) {
                if (n.is_leaf())
                    nodes.push_back({{"c", n.counts}});
                else
                    nodes.push_back(
                        {{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}});
            }
            trees.push_back({{"nodes", std::move(nodes)}});
        }
        j["trees"] = std::move(trees);
        return j;
    }

    static Forest from_json(const nlohmann::json& j) {
        Forest f;
        f.n_classes_ = j.at("n_classes").get<int>();
        f.n_features_ = j.at("n_features").get<int>();
        const auto& p = j.at("params");
        f.params_.n_trees = p.at("n_trees").get<int>();
        f.params_.k_candidates = p.at("k_candidates").get<int>();
        f.params_.min_split = p.at("min_split").get<int>();
        f.params_.max_depth = p.at("max_depth").get<int>();
        f.params_.seed = p.at("seed").get<std::uint64_t>();
        f.params_.mode = j.at("mode").get<std::string>() == "ERT" ? ForestMode::ERT
                                                                  : ForestMode::RF;
        f.importances_ = j.at("importances").get<std::vector<double>>();
        for (const auto& tj : j.at("trees")) {
            Tree tree;
            for (const auto& nj : tj.at("nodes")) {
                TreeNode n;
                if (nj.contains("c")) {
                    n.counts = nj.at("c").get<std::vector<double>>();
                } else {
                    n.feature = nj.at("f").get<int>();
                    n.threshold = nj.at("t").get<double>();
                    n.left = nj.at("l").get<int>();
                    n.right = nj.at("r").get<int>();
                }
                tree.nodes.push_back(std::move(n));
            }
            f.trees_.push_back(std::move(tree));
        }
        return f;
    }

private:
    int n_classes_ = 0;
    int n_features_ = 0;
    ForestParams params_;
    std::vector<Tree> trees_;
    std::vector<double> importances_;
};

namespace forest_detail {

inline double gini(const std::vector<double>& counts, double total) {
    double g = 1.0;
    for (const double c : counts) {
        const double p = c / total;
        g -= p * p;
    }
    return g;
}

struct SplitChoice {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = -1.0;

    // exact-tie break: lowest feature index, then lowest threshold
    void consider(int f, double thr, double g) {
        if (!found || g > gain || (g == gain && (f < feature || (f == feature && thr < threshold)))) {
            found = true;
            feature = f;
            threshold = thr;
            gain = g;
        }
    }
};

struct BuildContext {
    const std::vector<std::vector<double>>* x;
    const std::vector<int>* y;
    int n_classes;
    int n_features;
    ForestParams params;
    std::uint64_t tree_key;
    double n_root;
    std::vector<double>* importance; // accumulated weighted gains
};

inline std::vector<double> class_counts(const BuildContext& ctx,
                                        const std::vector<int>& rows) {
    std::vector<double> counts(std::size_t(ctx.n_classes), 0.0);
    for (const int r : rows) counts[std::size_t((*ctx.y)[std::size_t(r)])] += 1.0;
    return counts;
}

/// Candidate features are drawn without replacement from a node-keyed
/// Fisher-Yates permutation; features with zero range at this node are
/// skipped (per the ERT construction of Geurts et al.).
inline std::vector<int> pick_candidates(const BuildContext& ctx,
                                        const std::vector<int>& rows,
                                        std::uint64_t node_key,
                                        std::vector<std::pair<double, double>>& ranges) {
    Rng rng(hash_mix(node_key, 0xFEA7));
    std::vector<int> order(std::size_t(ctx.n_features));
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.index(i)]);

    const int k = ctx.params.resolved_k(ctx.n_features);
    std::vector<int> picked;
    ranges.clear();
    for (const int f : order) {
        double lo = (*ctx.x)[std::size_t(rows[0])][std::size_t(f)];
        double hi = lo;
        for (const int r : rows) {
            const double v = (*ctx.x)[std::size_t(r)][std::size_t(f)];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi > lo) {
            picked.push_back(f);
            ranges.emplace_back(lo, hi);
            if (int(picked.size()) == k) break;
        }
    }
    return picked;
}

inline SplitChoice best_split(const BuildContext& ctx, const std::vector<int>& rows,
                              const std::vector<double>& counts, double node_gini,
                              std::uint64_t node_key) {
    std::vector<std::pair<double, double>> ranges;
    const auto candidates = pick_candidates(ctx, rows, node_key, ranges);
    SplitChoice best;
    const double n = double(rows.size());

    if (ctx.params.mode == ForestMode::ERT) {
        Rng rng(hash_mix(node_key, 0x7412));
        for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
            const int f = candidates[ci];
            const auto [lo, hi] = ranges[ci];
            // threshold uniform in [lo, hi); x <= thr routes left, so both
            // children are guaranteed nonempty
            const double thr = lo + rng.uniform() * (hi - lo);
            std::vector<double> left(std::size_t(ctx.n_classes), 0.0);
            double n_left = 0.0;
            for (const int r : rows) {
                if ((*ctx.x)[std::size_t(r)][std::size_t(f)] <= thr) {
                    left[std::size_t((*ctx.y)[std::size_t(r)])] += 1.0;
                    n_left += 1.0;
                }
            }
            const double n_right = n - n_left;
            if (n_left == 0.0 || n_right == 0.0) continue;
            std::vector<double> right(counts);
            for (int c = 0; c < ctx.n_classes; ++c) right[std::size_t(c)] -= left[std::size_t(c)];
            const double gain = node_gini - (n_left / n) * gini(left, n_left) -
                                (n_right / n) * gini(right, n_right);
            best.consider(f, thr, gain);
        }
    } else {
        // RF: exhaustive thresholds at midpoints between consecutive distinct values
        for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
            const int f = candidates[ci];
            std::vector<std::pair<double, int>> vals;
            vals.reserve(rows.size());
            for (const int r : rows)
                vals.emplace_back((*ctx.x)[std::size_t(r)][std::size_t(f)],
                                  (*ctx.y)[std::size_t(r)]);
            std::sort(vals.begin(), vals.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            std::vector<double> left(std::size_t(ctx.n_classes), 0.0);
            double n_left = 0.0;
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                left[std::size_t(vals[i].second)] += 1.0;
                n_left += 1.0;
                if (vals[i].first == vals[i + 1].first) continue;
                const double thr = vals[i].first + 0.5 * (vals[i + 1].first - vals[i].first);
                const double n_right = n - n_left;
                std::vector<double> right(counts);
                for (int c = 0; c < ctx.n_classes; ++c)
                    right[std::size_t(c)] -= left[std::size_t(c)];
                const double gain = node_gini - (n_left / n) * gini(left, n_left) -
                                    (n_right / n) * gini(right, n_right);
                best.consider(f, thr, gain);
            }
        }
    }
    return best;
}

inline int build_node(BuildContext& ctx, Tree& tree, std::vector<int> rows,
                      std::uint64_t node_key, int depth) {
    const auto counts = class_counts(ctx, rows);
    const double n = double(rows.size());
    const double node_gini = gini(counts, n);

    const bool pure = node_gini == 0.0;
    const bool too_small = int(rows.size()) < ctx.params.min_split;
    const bool too_deep = ctx.params.max_depth > 0 && depth >= ctx.params.max_depth;

    SplitChoice split;
    if (!pure && !too_small && !too_deep)
        split = best_split(ctx, rows, counts, node_gini, node_key);

    const int index = int(tree.nodes.size());
    tree.nodes.emplace_back();
    if (!split.found || split.gain <= 0.0) {
        tree.nodes[std::size_t(index)].counts = counts;
        return index;
    }

    (*ctx.importance)[std::size_t(split.feature)] += (n / ctx.n_root) * split.gain;

    std::vector<int> left_rows, right_rows;
    for (const int r : rows) {
        if ((*ctx.x)[std::size_t(r)][std::size_t(split.feature)] <= split.threshold)
            left_rows.push_back(r);
        else
            right_rows.push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    tree.nodes[std::size_t(index)].feature = split.feature;
    tree.nodes[std::size_t(index)].threshold = split.threshold;
    const int li =
        build_node(ctx, tree, std::move(left_rows), hash_mix(node_key, 1), depth + 1);
    const int ri =
        build_node(ctx, tree, std::move(right_rows), hash_mix(node_key, 2), depth + 1);
    tree.nodes[std::size_t(index)].left = li;
    tree.nodes[std::size_t(index)].right = ri;
    return index;
}

/// Canonical content order: lexicographic by feature vector, then label.
/// Makes bootstrap draws (and therefore the whole fit) independent of the
/// caller's row order.
inline std::vector<int> canonical_order(const std::vector<std::vector<double>>& x,
                                        const std::vector<int>& y) {
    std::vector<int> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const auto& xa = x[std::size_t(a)];
        const auto& xb = x[std::size_t(b)];
        for (std::size_t f = 0; f < xa.size(); ++f) {
            if (xa[f] < xb[f]) return true;
            if (xa[f] > xb[f]) return false;
        }
        return y[std::size_t(a)] < y[std::size_t(b)];
    });
    return order;
}

} // namespace forest_detail

inline Forest fit_forest(const std::vector<std::vector<double>>& x,
                         const std::vector<int>& y, int n_classes,
                         const ForestParams& params) {
    if (x.empty()) throw TrainError("fit_forest: empty training set");
    if (x.size() != y.size()) throw TrainError("fit_forest: x/y size mismatch");
    const int n_features = int(x.front().size());
    for (const int label : y)
        if (label < 0 || label >= n_classes)
            throw TrainError("fit_forest: label out of range");

    Forest forest(n_classes, n_features, params);
    const auto canon = forest_detail::canonical_order(x, y);
    std::vector<double> importance(std::size_t(n_features), 0.0);

    for (int t = 0; t < params.n_trees; ++t) {
        forest_detail::BuildContext ctx;
        ctx.x = &x;
        ctx.y = &y;
        ctx.n_classes = n_classes;
        ctx.n_features = n_features;
        ctx.params = params;
        ctx.tree_key = derive_stream(params.seed, 0x7265ULL, std::uint64_t(t));
        ctx.importance = &importance;

        std::vector<int> rows;
        if (params.mode == ForestMode::RF) {
            Rng boot(hash_mix(ctx.tree_key, 0xB007));
            rows.reserve(canon.size());
            for (std::size_t i = 0; i < canon.size(); ++i)
                rows.push_back(canon[boot.index(canon.size())]);
        } else {
            rows = canon;
        }
        ctx.n_root = double(rows.size());

        Tree tree;
        forest_detail::build_node(ctx, tree, std::move(rows), hash_mix(ctx.tree_key, 0x4E0D),
                                  0);
        forest.trees().push_back(std::move(tree));
    }

    const double total = std::accumulate(importance.begin(), importance.end(), 0.0);
    if (total > 0.0)
        for (auto& v : importance) v /= total;
    forest.feature_importances() = std::move(importance);
    return forest;
}

} // namespace bpsd
