#include "boostforest/cart.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "boostforest/boost_tree.hpp"  // enumerate_thresholds

namespace boostforest {

namespace {

// Sum of squared deviations from the mean, from raw accumulators.
double sse(double sum, double sum_sq, double n) {
  if (n <= 0.0) {
    return 0.0;
  }
  return std::max(0.0, sum_sq - sum * sum / n);
}

// n * Gini impurity, from per-class counts.
double gini_times_n(const std::vector<double>& counts, double n) {
  if (n <= 0.0) {
    return 0.0;
  }
  double sum_sq = 0.0;
  for (const double c : counts) {
    sum_sq += c * c;
  }
  return n - sum_sq / n;
}

struct BestSplit {
  int feature = -1;
  double threshold = 0.0;
  double gain = -1.0;
};

struct Grower {
  const Eigen::Ref<const Eigen::MatrixXd>& X;
  const Eigen::Ref<const Eigen::VectorXd>& y;
  const CartConfig& config;
  Rng& rng;
  CartTree& tree;

  Eigen::VectorXd leaf_value(const std::vector<int>& rows) const {
    if (tree.task == Task::regression) {
      double sum = 0.0;
      for (const int r : rows) {
        sum += y(r);
      }
      return Eigen::VectorXd::Constant(1, sum / rows.size());
    }
    Eigen::VectorXd freq = Eigen::VectorXd::Zero(tree.n_classes);
    for (const int r : rows) {
      freq(static_cast<int>(y(r))) += 1.0;
    }
    return freq / rows.size();
  }

  bool is_pure(const std::vector<int>& rows) const {
    if (tree.task == Task::regression) {
      const double first = y(rows[0]);
      for (const int r : rows) {
        if (std::abs(y(r) - first) > 1e-12 * (1.0 + std::abs(first))) {
          return false;
        }
      }
      return true;
    }
    const int first = static_cast<int>(y(rows[0]));
    for (const int r : rows) {
      if (static_cast<int>(y(r)) != first) {
        return false;
      }
    }
    return true;
  }

  std::vector<int> feature_set() {
    const int d = static_cast<int>(X.cols());
    if (!config.feature_subsample) {
      std::vector<int> all(d);
      for (int i = 0; i < d; ++i) {
        all[i] = i;
      }
      return all;
    }
    return rng.sample_indices(d, std::min(*config.feature_subsample, d));
  }

  BestSplit best_split(const std::vector<int>& rows) {
    const int n = static_cast<int>(rows.size());
    BestSplit best;
    std::vector<double> values(n);
    std::vector<int> order(n);
    for (const int feature : feature_set()) {
      for (int i = 0; i < n; ++i) {
        values[i] = X(rows[i], feature);
        order[i] = i;
      }
      std::sort(order.begin(), order.end(),
                [&](int a, int b) { return values[a] < values[b]; });
      std::vector<double> sorted(n);
      for (int i = 0; i < n; ++i) {
        sorted[i] = values[order[i]];
      }
      const std::vector<double> thresholds = enumerate_thresholds(sorted);
      if (thresholds.empty()) {
        continue;
      }

      if (tree.task == Task::regression) {
        std::vector<double> pre_sum(n + 1, 0.0), pre_sq(n + 1, 0.0);
        for (int i = 0; i < n; ++i) {
          const double v = y(rows[order[i]]);
          pre_sum[i + 1] = pre_sum[i] + v;
          pre_sq[i + 1] = pre_sq[i] + v * v;
        }
        const double total = sse(pre_sum[n], pre_sq[n], n);
        for (const double threshold : thresholds) {
          const int nl = static_cast<int>(
              std::upper_bound(sorted.begin(), sorted.end(), threshold) -
              sorted.begin());
          const int nr = n - nl;
          if (nl < config.min_samples_leaf || nr < config.min_samples_leaf) {
            continue;
          }
          const double gain = total - sse(pre_sum[nl], pre_sq[nl], nl) -
                              sse(pre_sum[n] - pre_sum[nl],
                                  pre_sq[n] - pre_sq[nl], nr);
          if (gain > best.gain) {
            best = BestSplit{feature, threshold, gain};
          }
        }
      } else {
        const int j = tree.n_classes;
        std::vector<std::vector<double>> pre(n + 1,
                                             std::vector<double>(j, 0.0));
        for (int i = 0; i < n; ++i) {
          pre[i + 1] = pre[i];
          pre[i + 1][static_cast<int>(y(rows[order[i]]))] += 1.0;
        }
        const double total = gini_times_n(pre[n], n);
        std::vector<double> right(j);
        for (const double threshold : thresholds) {
          const int nl = static_cast<int>(
              std::upper_bound(sorted.begin(), sorted.end(), threshold) -
              sorted.begin());
          const int nr = n - nl;
          if (nl < config.min_samples_leaf || nr < config.min_samples_leaf) {
            continue;
          }
          for (int c = 0; c < j; ++c) {
            right[c] = pre[n][c] - pre[nl][c];
          }
          const double gain = total - gini_times_n(pre[nl], nl) -
                              gini_times_n(right, nr);
          if (gain > best.gain) {
            best = BestSplit{feature, threshold, gain};
          }
        }
      }
    }
    return best;
  }

  int build(const std::vector<int>& rows, int depth) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(CartNode{-1, 0.0, -1, -1, leaf_value(rows)});
    if (depth >= config.max_depth ||
        static_cast<int>(rows.size()) < 2 * config.min_samples_leaf ||
        is_pure(rows)) {
      return index;
    }
    // Impure nodes take the best feasible split even at zero gain; both
    // sides are always nonempty, so recursion terminates.
    const BestSplit split = best_split(rows);
    if (split.feature < 0) {
      return index;
    }
    std::vector<int> left_rows, right_rows;
    for (const int r : rows) {
      (X(r, split.feature) <= split.threshold ? left_rows : right_rows)
          .push_back(r);
    }
    const int left = build(left_rows, depth + 1);
    const int right = build(right_rows, depth + 1);
    tree.nodes[index].feature = split.feature;
    tree.nodes[index].threshold = split.threshold;
    tree.nodes[index].left = left;
    tree.nodes[index].right = right;
    return index;
  }
};

}  // namespace

int CartTree::num_leaves() const {
  int count = 0;
  for (const auto& node : nodes) {
    if (node.is_leaf()) {
      ++count;
    }
  }
  return count;
}

CartTree fit_cart(const Eigen::Ref<const Eigen::MatrixXd>& X,
                  const Eigen::Ref<const Eigen::VectorXd>& y, Task task,
                  int n_classes, const CartConfig& config, Rng& rng) {
  if (X.rows() != y.size() || X.rows() == 0) {
    throw std::invalid_argument("fit_cart: X/y shape mismatch or empty");
  }
  if (config.min_samples_leaf < 1) {
    throw ConfigError("min_samples_leaf must be >= 1");
  }
  if (config.max_depth < 0) {
    throw ConfigError("max_depth must be >= 0");
  }
  if (task == Task::multiclass && n_classes < 3) {
    throw ConfigError("multiclass task needs at least 3 classes");
  }
  if (task != Task::regression) {
    const int j = task == Task::binary ? 2 : n_classes;
    for (int i = 0; i < y.size(); ++i) {
      const int c = static_cast<int>(y(i));
      if (static_cast<double>(c) != y(i) || c < 0 || c >= j) {
        throw std::invalid_argument("fit_cart: label out of class range");
      }
    }
  }

  CartTree tree;
  tree.task = task;
  tree.n_classes = task == Task::regression ? 0
                   : task == Task::binary   ? 2
                                            : n_classes;
  tree.n_features = static_cast<int>(X.cols());

  std::vector<int> all(X.rows());
  for (int i = 0; i < static_cast<int>(all.size()); ++i) {
    all[i] = i;
  }
  Grower grower{X, y, config, rng, tree};
  grower.build(all, 0);
  return tree;
}

Eigen::VectorXd predict_cart(const CartTree& tree,
                             const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != tree.n_features) {
    throw std::invalid_argument("predict_cart: feature size mismatch");
  }
  int node = 0;
  while (!tree.nodes[node].is_leaf()) {
    node = x(tree.nodes[node].feature) <= tree.nodes[node].threshold
               ? tree.nodes[node].left
               : tree.nodes[node].right;
  }
  return tree.nodes[node].value;
}

}  // namespace boostforest
