#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <vector>

#include "boostforest/cart.hpp"
#include "doctest.h"
#include "synth_data.hpp"

using namespace boostforest;

namespace {

double cart_train_rmse(const CartTree& tree, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& y) {
  double sse = 0.0;
  for (int i = 0; i < X.rows(); ++i) {
    const double r = y(i) - predict_cart(tree, X.row(i).transpose())(0);
    sse += r * r;
  }
  return std::sqrt(sse / static_cast<double>(X.rows()));
}

double cart_train_accuracy(const CartTree& tree, const Eigen::MatrixXd& X,
                           const Eigen::VectorXd& y) {
  int hits = 0;
  for (int i = 0; i < X.rows(); ++i) {
    const Eigen::VectorXd freq = predict_cart(tree, X.row(i).transpose());
    int argmax = 0;
    freq.maxCoeff(&argmax);
    if (argmax == static_cast<int>(y(i))) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(X.rows());
}

// Rows reaching each leaf, to audit minimum leaf sizes.
void count_leaf_rows(const CartTree& tree, const Eigen::MatrixXd& X,
                     std::map<int, int>& counts) {
  for (int i = 0; i < X.rows(); ++i) {
    int node = 0;
    while (!tree.nodes[static_cast<size_t>(node)].is_leaf()) {
      const auto& nd = tree.nodes[static_cast<size_t>(node)];
      node = X(i, nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    ++counts[node];
  }
}

}  // namespace

TEST_CASE("cart regression picks the variance-minimizing threshold") {
  Eigen::MatrixXd X(4, 1);
  X << 0.0, 1.0, 2.0, 3.0;
  Eigen::VectorXd y(4);
  y << 0.0, 0.0, 10.0, 10.0;
  CartConfig config;
  Rng rng(1);
  const CartTree tree = fit_cart(X, y, Task::regression, 0, config, rng);
  REQUIRE(tree.nodes.size() == 3);
  CHECK(tree.nodes[0].feature == 0);
  CHECK(tree.nodes[0].threshold == 1.0);
  CHECK(tree.num_leaves() == 2);
  Eigen::VectorXd x(1);
  x << 0.5;
  CHECK(predict_cart(tree, x)(0) == 0.0);
  x << 2.5;
  CHECK(predict_cart(tree, x)(0) == 10.0);
}

TEST_CASE("cart classification picks the gini-minimizing threshold") {
  Eigen::MatrixXd X(4, 1);
  X << 0.0, 1.0, 2.0, 3.0;
  Eigen::VectorXd y(4);
  y << 0.0, 0.0, 1.0, 1.0;
  CartConfig config;
  Rng rng(1);
  const CartTree tree = fit_cart(X, y, Task::binary, 2, config, rng);
  CHECK(tree.nodes[0].threshold == 1.0);
  Eigen::VectorXd x(1);
  x << -1.0;
  const Eigen::VectorXd left = predict_cart(tree, x);
  CHECK(left(0) == 1.0);
  CHECK(left(1) == 0.0);
  x << 9.0;
  const Eigen::VectorXd right = predict_cart(tree, x);
  CHECK(right(0) == 0.0);
  CHECK(right(1) == 1.0);
}

TEST_CASE("cart accepts zero-gain splits and solves xor exactly") {
  // Every first split of xor has zero impurity decrease; refusing them
  // would leave the tree at chance level.
  const int copies = 10;
  Eigen::MatrixXd X(4 * copies, 2);
  Eigen::VectorXd y(4 * copies);
  for (int k = 0; k < copies; ++k) {
    for (int p = 0; p < 4; ++p) {
      const int row = 4 * k + p;
      X(row, 0) = static_cast<double>(p & 1);
      X(row, 1) = static_cast<double>((p >> 1) & 1);
      y(row) = static_cast<double>((p & 1) ^ ((p >> 1) & 1));
    }
  }
  CartConfig config;
  Rng rng(1);
  const CartTree tree = fit_cart(X, y, Task::binary, 2, config, rng);
  CHECK(cart_train_accuracy(tree, X, y) == 1.0);
  CHECK(tree.num_leaves() == 4);
}

TEST_CASE("cart at depth zero is a single leaf") {
  Eigen::MatrixXd X(3, 1);
  X << 0.0, 1.0, 2.0;
  Eigen::VectorXd y(3);
  y << 1.0, 2.0, 3.0;
  CartConfig config;
  config.max_depth = 0;
  Rng rng(1);
  const CartTree tree = fit_cart(X, y, Task::regression, 0, config, rng);
  REQUIRE(tree.nodes.size() == 1);
  CHECK(tree.num_leaves() == 1);
  Eigen::VectorXd x(1);
  x << 7.0;
  CHECK(predict_cart(tree, x)(0) == 2.0);

  y << 0.0, 2.0, 1.0;
  const CartTree multi = fit_cart(X, y, Task::multiclass, 3, config, rng);
  Eigen::VectorXd freq = predict_cart(multi, x);
  REQUIRE(freq.size() == 3);
  CHECK(freq(0) == doctest::Approx(1.0 / 3.0));
  CHECK(freq.sum() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("cart honors the minimum leaf size") {
  const Dataset ds = synth::make_friedman1(80, 13);
  CartConfig config;
  config.min_samples_leaf = 7;
  Rng rng(2);
  const CartTree tree =
      fit_cart(ds.features, ds.labels, Task::regression, 0, config, rng);
  std::map<int, int> counts;
  count_leaf_rows(tree, ds.features, counts);
  CHECK(static_cast<int>(counts.size()) == tree.num_leaves());
  for (const auto& [node, count] : counts) {
    CHECK(count >= 7);
  }

  // Too few rows for any split: a single leaf.
  CartConfig wide;
  wide.min_samples_leaf = 5;
  const CartTree stub = fit_cart(ds.features.topRows(9), ds.labels.head(9),
                                 Task::regression, 0, wide, rng);
  CHECK(stub.nodes.size() == 1);
}

TEST_CASE("cart respects max_depth") {
  const Dataset ds = synth::make_friedman1(200, 29);
  for (int depth : {1, 2, 4}) {
    CartConfig config;
    config.max_depth = depth;
    Rng rng(3);
    const CartTree tree =
        fit_cart(ds.features, ds.labels, Task::regression, 0, config, rng);
    CHECK(tree.num_leaves() <= (1 << depth));
  }
}

TEST_CASE("cart training error never exceeds the flat predictor") {
  const Dataset ds = synth::make_friedman1(150, 5);
  CartConfig config;
  config.max_depth = 6;
  config.min_samples_leaf = 5;
  Rng rng(4);
  const CartTree tree =
      fit_cart(ds.features, ds.labels, Task::regression, 0, config, rng);
  const double flat = std::sqrt(
      (ds.labels.array() - ds.labels.mean()).square().sum() / ds.n_rows());
  CHECK(cart_train_rmse(tree, ds.features, ds.labels) <= flat);
  CHECK(cart_train_rmse(tree, ds.features, ds.labels) < 0.9 * flat);
}

TEST_CASE("cart is deterministic when every feature is scanned") {
  const Dataset ds = synth::make_blobs_multiclass(90, 3, 6);
  CartConfig config;
  config.max_depth = 4;
  config.min_samples_leaf = 3;
  Rng r1(10), r2(999);
  const CartTree a =
      fit_cart(ds.features, ds.labels, Task::multiclass, 3, config, r1);
  const CartTree b =
      fit_cart(ds.features, ds.labels, Task::multiclass, 3, config, r2);
  REQUIRE(a.nodes.size() == b.nodes.size());
  for (size_t i = 0; i < a.nodes.size(); ++i) {
    CHECK(a.nodes[i].feature == b.nodes[i].feature);
    CHECK(a.nodes[i].threshold == b.nodes[i].threshold);
    CHECK(a.nodes[i].left == b.nodes[i].left);
    CHECK(a.nodes[i].value == b.nodes[i].value);
  }
}

TEST_CASE("cart feature subsampling depends on the generator") {
  const Dataset ds = synth::make_friedman1(100, 8);
  CartConfig config;
  config.max_depth = 5;
  config.min_samples_leaf = 5;
  config.feature_subsample = 2;
  Rng r1(10), r2(10);
  const CartTree a =
      fit_cart(ds.features, ds.labels, Task::regression, 0, config, r1);
  const CartTree b =
      fit_cart(ds.features, ds.labels, Task::regression, 0, config, r2);
  REQUIRE(a.nodes.size() == b.nodes.size());
  for (size_t i = 0; i < a.nodes.size(); ++i) {
    CHECK(a.nodes[i].feature == b.nodes[i].feature);
    CHECK(a.nodes[i].threshold == b.nodes[i].threshold);
  }
}

TEST_CASE("cart separates gaussian blobs") {
  const Dataset ds = synth::make_blobs_multiclass(150, 3, 77);
  CartConfig config;
  config.max_depth = 6;
  config.min_samples_leaf = 2;
  Rng rng(5);
  const CartTree tree =
      fit_cart(ds.features, ds.labels, Task::multiclass, 3, config, rng);
  CHECK(cart_train_accuracy(tree, ds.features, ds.labels) >= 0.9);
  for (const auto& node : tree.nodes) {
    if (node.is_leaf()) {
      CHECK(node.value.sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(node.value.minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("fit_cart validates inputs") {
  Eigen::MatrixXd X(4, 1);
  X << 0.0, 1.0, 2.0, 3.0;
  Eigen::VectorXd y(4);
  y << 0.0, 1.0, 0.0, 1.0;
  Rng rng(1);
  CartConfig config;

  config.min_samples_leaf = 0;
  CHECK_THROWS_AS(fit_cart(X, y, Task::binary, 2, config, rng), ConfigError);
  config = CartConfig{};
  config.max_depth = -1;
  CHECK_THROWS_AS(fit_cart(X, y, Task::binary, 2, config, rng), ConfigError);
  config = CartConfig{};
  CHECK_THROWS_AS(fit_cart(X, y, Task::multiclass, 2, config, rng),
                  ConfigError);
  Eigen::VectorXd bad = y;
  bad(0) = 5.0;
  CHECK_THROWS_AS(fit_cart(X, bad, Task::binary, 2, config, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_cart(X, Eigen::VectorXd::Zero(3), Task::regression, 0,
                           config, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      predict_cart(fit_cart(X, y, Task::binary, 2, config, rng),
                   Eigen::VectorXd::Zero(2)),
      std::invalid_argument);
}
