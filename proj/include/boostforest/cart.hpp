#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <vector>

#include "boostforest/common.hpp"
#include "boostforest/random.hpp"

namespace boostforest {

struct CartNode {
  int feature = -1;
  double threshold = 0.0;  // route left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  Eigen::VectorXd value;  // leaf mean (size 1) or class frequencies (size J)

  bool is_leaf() const { return left < 0; }
};

// Classic axis-aligned decision tree: variance reduction for regression,
// Gini impurity decrease for classification, constant leaf values.
struct CartTree {
  std::vector<CartNode> nodes;  // index 0 is the root
  Task task = Task::regression;
  int n_classes = 0;
  int n_features = 0;

  int num_leaves() const;
};

struct CartConfig {
  int max_depth = std::numeric_limits<int>::max();  // root depth is 0
  int min_samples_leaf = 1;
  // Features scanned per node; all when unset. Drawn fresh per node.
  std::optional<int> feature_subsample;
};

// Depth-first greedy fit. Impure nodes accept the best feasible split even
// at zero gain (both sides always shrink, so recursion terminates); pure
// nodes and nodes with no feasible split become leaves. rng is only
// consumed when feature_subsample is set.
CartTree fit_cart(const Eigen::Ref<const Eigen::MatrixXd>& X,
                  const Eigen::Ref<const Eigen::VectorXd>& y, Task task,
                  int n_classes, const CartConfig& config, Rng& rng);

// Leaf value reached by routing x: mean (size 1) or class frequencies.
Eigen::VectorXd predict_cart(const CartTree& tree,
                             const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace boostforest
