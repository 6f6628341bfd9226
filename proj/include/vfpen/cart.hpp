#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "vfpen/matrix.hpp"

namespace vfpen {

struct TreeNode {
    static constexpr std::size_t no_feature = std::numeric_limits<std::size_t>::max();

    std::size_t feature = no_feature;  // no_feature marks a leaf
    double threshold = 0.0;            // left child holds x[feature] <= threshold
    std::unique_ptr<TreeNode> left, right;
    double mean = 0.0;                 // mean target over samples
    double sse = 0.0;                  // squared error over samples under mean
    std::vector<std::size_t> samples;  // training rows reaching this node

    bool is_leaf() const { return feature == no_feature; }
};

// Immutable after construction; copies share the node graph.
class RegressionTree {
public:
    RegressionTree() = default;
    RegressionTree(std::shared_ptr<const TreeNode> root, std::size_t dimension,
                   std::size_t min_leaf);

    const TreeNode& root() const { return *root_; }
    std::size_t size() const { return size_; }  // total node count
    std::size_t leaf_count() const { return leaves_; }
    std::size_t dimension() const { return dimension_; }
    std::size_t min_leaf() const { return min_leaf_; }

    double predict(std::span<const double> x) const;
    double training_sse() const;  // sum of leaf sse

private:
    std::shared_ptr<const TreeNode> root_;
    std::size_t size_ = 0, leaves_ = 0, dimension_ = 0, min_leaf_ = 1;
};

struct SplitResult {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double sse = 0.0;  // summed squared error of the two children
};

// Scans every feature and every midpoint between consecutive distinct sorted
// values; both children must keep at least min_leaf samples. Ties break to the
// lowest feature index, then the lowest threshold.
SplitResult best_split(const Matrix& x, std::span<const double> y,
                       std::span<const std::size_t> rows, std::size_t min_leaf);

// Recursive growing until a node is pure, too small, or has no valid split.
RegressionTree grow_tree(const Matrix& x, std::span<const double> y,
                         std::span<const std::size_t> rows, std::size_t min_leaf);
RegressionTree grow_tree(const Matrix& x, std::span<const double> y, std::size_t min_leaf);

// Collapse cost per internal node, keyed by preorder index:
//   alpha_i = (sse_collapsed - sse_subtree) / (leaves_subtree - 1)
std::unordered_map<std::size_t, double> alpha_values(const RegressionTree& tree);

struct PruneEntry {
    double sigma;
    RegressionTree tree;
};

// sigma ascending (first entry -inf = unpruned tree), sizes strictly
// decreasing, last entry the root-only tree.
struct PruneSequence {
    std::vector<PruneEntry> entries;
    std::unordered_map<std::size_t, double> alphas;
};

// Sweeps sigma over the distinct alpha values; each entry collapses every node
// with alpha <= sigma (applied top-down), deduplicated by size.
PruneSequence prune_sequence(const RegressionTree& tree);

// Largest entry with size <= size_bound; the root-only tree always qualifies.
const RegressionTree& select_by_size(const PruneSequence& seq, std::size_t size_bound);

// select_by_size over the implicit sequence without materialising every
// entry: one tree per requested bound (shared when bounds coincide). Result is
// aligned with size_bounds and identical to running prune_sequence +
// select_by_size on each bound.
std::vector<RegressionTree> prune_to_sizes(const RegressionTree& tree,
                                           std::span<const std::size_t> size_bounds);

nlohmann::json tree_to_json(const RegressionTree& tree);

}  // namespace vfpen
