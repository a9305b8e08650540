#pragma once

#include <Eigen/Dense>
#include <vector>

#include "boostforest/common.hpp"
#include "boostforest/random.hpp"

namespace boostforest {

// Affine model f(x) = w.x + b. The intercept is never regularized.
struct LinearModel {
  Eigen::VectorXd w;
  double b = 0.0;

  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return w.dot(x) + b;
  }
  // Squared norm of the regularized coefficients (excludes the intercept).
  double coef_norm2() const { return w.squaredNorm(); }

  static LinearModel zero(int dim) {
    return LinearModel{Eigen::VectorXd::Zero(dim), 0.0};
  }
};

// One fixed random hidden layer with sigmoid activations; only the affine
// output layer is fitted (and regularized).
struct ElmModel {
  Eigen::MatrixXd hidden_w;  // hidden_nodes x n_features
  Eigen::VectorXd hidden_b;  // hidden_nodes
  LinearModel output;

  Eigen::VectorXd activations(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return output.predict(activations(x));
  }
  double coef_norm2() const { return output.coef_norm2(); }
};

struct SvrParams {
  double c = 1.0;        // hinge weight, > 0
  double epsilon = 0.1;  // insensitive-tube half width, >= 0
};

// Ridge regression with an unpenalized intercept: minimizes
// sum_n (y_n - w.x_n - b)^2 + lambda * |w|^2. Solved on centered data via
// LDLT; on factorization trouble a 1e-10 diagonal bump is added and the
// solve retried. lambda >= 0; inputs must be finite.
LinearModel fit_ridge(const Eigen::Ref<const Eigen::MatrixXd>& X,
                      const Eigen::Ref<const Eigen::VectorXd>& y,
                      double lambda);

// Weighted variant: sum_n weights_n * (y_n - w.x_n - b)^2 + lambda * |w|^2.
// Weights must be positive and finite.
LinearModel fit_weighted_ridge(const Eigen::Ref<const Eigen::MatrixXd>& X,
                               const Eigen::Ref<const Eigen::VectorXd>& y,
                               const Eigen::Ref<const Eigen::VectorXd>& weights,
                               double lambda);

// Random-hidden-layer network: hidden weights and biases are drawn uniformly
// from [-1, 1] (weights first, row by row, then biases), activations are
// sigmoids, and the output layer is fit_ridge on the activation matrix.
ElmModel fit_elm(const Eigen::Ref<const Eigen::MatrixXd>& X,
                 const Eigen::Ref<const Eigen::VectorXd>& y, double lambda,
                 int hidden_nodes, Rng& rng);

// Objective of the epsilon-insensitive linear model:
// 0.5 * |w|^2 + c * sum_n max(0, |y_n - w.x_n - b| - epsilon).
double svr_objective(const Eigen::Ref<const Eigen::MatrixXd>& X,
                     const Eigen::Ref<const Eigen::VectorXd>& y,
                     const SvrParams& params, const LinearModel& model);

// Linear epsilon-insensitive regression solved by deterministic coordinate
// descent on the dual: the maximal KKT-violating pair is optimized exactly
// each step, and the unpenalized intercept is read off the final multiplier
// interval. The result never has a worse objective than the zero model or
// the flat model at mean(y).
LinearModel fit_linear_svr(const Eigen::Ref<const Eigen::MatrixXd>& X,
                           const Eigen::Ref<const Eigen::VectorXd>& y,
                           const SvrParams& params);

}  // namespace boostforest
