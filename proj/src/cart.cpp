#include "vfpen/cart.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "vfpen/errors.hpp"

namespace vfpen {

namespace {

void count_nodes(const TreeNode& node, std::size_t& total, std::size_t& leaves) {
    ++total;
    if (node.is_leaf()) {
        ++leaves;
        return;
    }
    count_nodes(*node.left, total, leaves);
    count_nodes(*node.right, total, leaves);
}

double sum_leaf_sse(const TreeNode& node) {
    if (node.is_leaf()) return node.sse;
    return sum_leaf_sse(*node.left) + sum_leaf_sse(*node.right);
}

}  // namespace

RegressionTree::RegressionTree(std::shared_ptr<const TreeNode> root, std::size_t dimension,
                               std::size_t min_leaf)
    : root_(std::move(root)), dimension_(dimension), min_leaf_(min_leaf) {
    count_nodes(*root_, size_, leaves_);
}

double RegressionTree::predict(std::span<const double> x) const {
    if (x.size() != dimension_)
        throw ShapeError("predict expected " + std::to_string(dimension_) +
                         " features, got " + std::to_string(x.size()));
    const TreeNode* node = root_.get();
    while (!node->is_leaf())
        node = x[node->feature] <= node->threshold ? node->left.get() : node->right.get();
    return node->mean;
}

double RegressionTree::training_sse() const { return sum_leaf_sse(*root_); }

SplitResult best_split(const Matrix& x, std::span<const double> y,
                       std::span<const std::size_t> rows, std::size_t min_leaf) {
    SplitResult best;
    const std::size_t count = rows.size();
    if (count < 2 || count < 2 * min_leaf || x.cols() == 0) return best;

    // Centre targets on the node mean; prefix sums on the centred values keep
    // the child SSE formula well conditioned.
    double node_mean = 0.0;
    for (const std::size_t r : rows) node_mean += y[r];
    node_mean /= static_cast<double>(count);

    double node_sq = 0.0;
    for (const std::size_t r : rows) {
        const double c = y[r] - node_mean;
        node_sq += c * c;
    }
    // Candidates within this window of the incumbent count as ties, so the
    // lowest (feature, threshold) wins: identical partitions reached through
    // different features are mathematically equal but differ by summation
    // noise.
    const double tie_eps = 1e-12 * node_sq;

    std::vector<std::pair<double, double>> ordered(count);  // (feature value, centred y)
    for (std::size_t feature = 0; feature < x.cols(); ++feature) {
        for (std::size_t i = 0; i < count; ++i)
            ordered[i] = {x(rows[i], feature), y[rows[i]] - node_mean};
        std::sort(ordered.begin(), ordered.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

        double left_sum = 0.0, left_sq = 0.0;
        double total_sum = 0.0, total_sq = 0.0;
        for (const auto& [v, t] : ordered) {
            total_sum += t;
            total_sq += t * t;
        }
        for (std::size_t i = 0; i + 1 < count; ++i) {
            left_sum += ordered[i].second;
            left_sq += ordered[i].second * ordered[i].second;
            const std::size_t n_left = i + 1;
            const std::size_t n_right = count - n_left;
            if (n_left < min_leaf || n_right < min_leaf) continue;
            if (!(ordered[i].first < ordered[i + 1].first)) continue;

            const double right_sum = total_sum - left_sum;
            const double right_sq = total_sq - left_sq;
            const double sse_left =
                std::max(0.0, left_sq - left_sum * left_sum / static_cast<double>(n_left));
            const double sse_right =
                std::max(0.0, right_sq - right_sum * right_sum / static_cast<double>(n_right));
            const double sse = sse_left + sse_right;
            if (!best.found || sse < best.sse - tie_eps) {
                best.found = true;
                best.feature = feature;
                best.threshold = (ordered[i].first + ordered[i + 1].first) / 2.0;
                best.sse = sse;
            }
        }
    }
    return best;
}

namespace {

std::unique_ptr<TreeNode> grow_node(const Matrix& x, std::span<const double> y,
                                    std::vector<std::size_t> rows, std::size_t min_leaf) {
    auto node = std::make_unique<TreeNode>();
    double sum = 0.0;
    for (const std::size_t r : rows) sum += y[r];
    node->mean = sum / static_cast<double>(rows.size());
    for (const std::size_t r : rows) {
        const double c = y[r] - node->mean;
        node->sse += c * c;
    }

    bool pure = true;
    for (const std::size_t r : rows)
        if (y[r] != y[rows.front()]) {
            pure = false;
            break;
        }

    if (!pure && rows.size() >= 2 * min_leaf) {
        const SplitResult split = best_split(x, y, rows, min_leaf);
        if (split.found) {
            std::vector<std::size_t> left_rows, right_rows;
            for (const std::size_t r : rows)
                (x(r, split.feature) <= split.threshold ? left_rows : right_rows).push_back(r);
            node->feature = split.feature;
            node->threshold = split.threshold;
            node->left = grow_node(x, y, std::move(left_rows), min_leaf);
            node->right = grow_node(x, y, std::move(right_rows), min_leaf);
        }
    }
    node->samples = std::move(rows);
    return node;
}

}  // namespace

RegressionTree grow_tree(const Matrix& x, std::span<const double> y,
                         std::span<const std::size_t> rows, std::size_t min_leaf) {
    if (rows.empty()) throw SizeError("cannot grow a tree on an empty sample set");
    if (min_leaf < 1) throw ConfigError("min_leaf must be >= 1");
    std::vector<std::size_t> owned(rows.begin(), rows.end());
    auto root = grow_node(x, y, std::move(owned), min_leaf);
    return RegressionTree(std::shared_ptr<const TreeNode>(std::move(root)), x.cols(), min_leaf);
}

RegressionTree grow_tree(const Matrix& x, std::span<const double> y, std::size_t min_leaf) {
    std::vector<std::size_t> all(x.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return grow_tree(x, y, all, min_leaf);
}

namespace {

struct SubtreeInfo {
    double sse = 0.0;
    std::size_t leaves = 0;
};

// Postorder walk collecting alpha per internal node, keyed both by pointer
// (pruning) and by preorder index (the public map).
SubtreeInfo collect_alphas(const TreeNode& node, std::size_t& preorder,
                           std::map<const TreeNode*, double>* by_ptr,
                           std::unordered_map<std::size_t, double>* by_index) {
    const std::size_t index = preorder++;
    if (node.is_leaf()) return {node.sse, 1};

    const SubtreeInfo left = collect_alphas(*node.left, preorder, by_ptr, by_index);
    const SubtreeInfo right = collect_alphas(*node.right, preorder, by_ptr, by_index);
    const SubtreeInfo sub{left.sse + right.sse, left.leaves + right.leaves};

    const double alpha = (node.sse - sub.sse) / static_cast<double>(sub.leaves - 1);
    if (by_ptr) (*by_ptr)[&node] = alpha;
    if (by_index) (*by_index)[index] = alpha;
    return sub;
}

std::unique_ptr<TreeNode> collapse_copy(const TreeNode& node, double sigma,
                                        const std::map<const TreeNode*, double>& alphas) {
    auto copy = std::make_unique<TreeNode>();
    copy->mean = node.mean;
    copy->sse = node.sse;
    copy->samples = node.samples;
    if (!node.is_leaf() && !(alphas.at(&node) <= sigma)) {
        copy->feature = node.feature;
        copy->threshold = node.threshold;
        copy->left = collapse_copy(*node.left, sigma, alphas);
        copy->right = collapse_copy(*node.right, sigma, alphas);
    }
    return copy;
}

}  // namespace

std::unordered_map<std::size_t, double> alpha_values(const RegressionTree& tree) {
    std::unordered_map<std::size_t, double> by_index;
    std::size_t preorder = 0;
    collect_alphas(tree.root(), preorder, nullptr, &by_index);
    return by_index;
}

PruneSequence prune_sequence(const RegressionTree& tree) {
    std::map<const TreeNode*, double> by_ptr;
    PruneSequence seq;
    std::size_t preorder = 0;
    collect_alphas(tree.root(), preorder, &by_ptr, &seq.alphas);

    std::vector<double> sigmas;
    sigmas.reserve(by_ptr.size());
    for (const auto& [node, alpha] : by_ptr) sigmas.push_back(alpha);
    std::sort(sigmas.begin(), sigmas.end());
    sigmas.erase(std::unique(sigmas.begin(), sigmas.end()), sigmas.end());

    seq.entries.push_back({-std::numeric_limits<double>::infinity(), tree});
    for (const double sigma : sigmas) {
        auto root = collapse_copy(tree.root(), sigma, by_ptr);
        RegressionTree pruned(std::shared_ptr<const TreeNode>(std::move(root)),
                              tree.dimension(), tree.min_leaf());
        if (pruned.size() != seq.entries.back().tree.size())
            seq.entries.push_back({sigma, std::move(pruned)});
    }
    return seq;
}

const RegressionTree& select_by_size(const PruneSequence& seq, std::size_t size_bound) {
    if (size_bound < 1) throw ConfigError("size bound must be >= 1");
    // entries are sorted by strictly decreasing size; the last one has size 1
    for (const auto& entry : seq.entries)
        if (entry.tree.size() <= size_bound) return entry.tree;
    return seq.entries.back().tree;
}

namespace {

std::size_t collapsed_size(const TreeNode& node, double sigma,
                           const std::map<const TreeNode*, double>& alphas) {
    if (node.is_leaf() || alphas.at(&node) <= sigma) return 1;
    return 1 + collapsed_size(*node.left, sigma, alphas) +
           collapsed_size(*node.right, sigma, alphas);
}

}  // namespace

std::vector<RegressionTree> prune_to_sizes(const RegressionTree& tree,
                                           std::span<const std::size_t> size_bounds) {
    std::map<const TreeNode*, double> by_ptr;
    std::size_t preorder = 0;
    collect_alphas(tree.root(), preorder, &by_ptr, nullptr);

    std::vector<double> sigmas;
    sigmas.reserve(by_ptr.size());
    for (const auto& [node, alpha] : by_ptr) sigmas.push_back(alpha);
    std::sort(sigmas.begin(), sigmas.end());
    sigmas.erase(std::unique(sigmas.begin(), sigmas.end()), sigmas.end());

    // Entry sizes along the sigma sweep, without building the trees.
    std::vector<std::pair<double, std::size_t>> sweep;  // (sigma, size), size decreasing
    sweep.emplace_back(-std::numeric_limits<double>::infinity(), tree.size());
    for (const double sigma : sigmas) {
        const std::size_t size = collapsed_size(tree.root(), sigma, by_ptr);
        if (size != sweep.back().second) sweep.emplace_back(sigma, size);
    }

    std::map<double, RegressionTree> materialised;
    std::vector<RegressionTree> out;
    out.reserve(size_bounds.size());
    for (const std::size_t bound : size_bounds) {
        if (bound < 1) throw ConfigError("size bound must be >= 1");
        double chosen_sigma = sweep.back().first;
        for (const auto& [sigma, size] : sweep)
            if (size <= bound) {
                chosen_sigma = sigma;
                break;
            }
        if (std::isinf(chosen_sigma)) {
            out.push_back(tree);
            continue;
        }
        auto it = materialised.find(chosen_sigma);
        if (it == materialised.end()) {
            auto root = collapse_copy(tree.root(), chosen_sigma, by_ptr);
            it = materialised
                     .emplace(chosen_sigma,
                              RegressionTree(std::shared_ptr<const TreeNode>(std::move(root)),
                                             tree.dimension(), tree.min_leaf()))
                     .first;
        }
        out.push_back(it->second);
    }
    return out;
}

namespace {

nlohmann::json node_to_json(const TreeNode& node) {
    std::size_t total = 0, leaves = 0;
    count_nodes(node, total, leaves);
    nlohmann::json j{{"mean", node.mean}, {"size", total}, {"count", node.samples.size()}};
    if (!node.is_leaf()) {
        j["feature"] = node.feature;
        j["threshold"] = node.threshold;
        j["left"] = node_to_json(*node.left);
        j["right"] = node_to_json(*node.right);
    }
    return j;
}

}  // namespace

nlohmann::json tree_to_json(const RegressionTree& tree) {
    return nlohmann::json{{"size", tree.size()},
                          {"leaf_count", tree.leaf_count()},
                          {"min_leaf", tree.min_leaf()},
                          {"dimension", tree.dimension()},
                          {"root", node_to_json(tree.root())}};
}

}  // namespace vfpen
