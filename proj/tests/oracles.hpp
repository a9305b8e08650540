// Independent reference implementations used to cross-check the library.
// Everything here is deliberately written with different algorithms than the
// production code: dense pseudo-inverse solves, golden-section search over
// the true objective, and brute-force grids.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

// Ridge with unpenalized intercept via the augmented normal equations
// [X 1]^T W [X 1] + diag(lambda..lambda, 0), solved by full-pivot LU.
inline Eigen::VectorXd ridge_augmented(const Eigen::MatrixXd& X,
                                       const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& weights,
                                       double lambda) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  Eigen::MatrixXd A(n, d + 1);
  A.leftCols(d) = X;
  A.col(d) = Eigen::VectorXd::Ones(n);
  Eigen::MatrixXd M = A.transpose() * weights.asDiagonal() * A;
  for (int i = 0; i < d; ++i) {
    M(i, i) += lambda;
  }
  const Eigen::VectorXd rhs = A.transpose() * weights.cwiseProduct(y);
  return Eigen::FullPivLU<Eigen::MatrixXd>(M).solve(rhs);  // (w..., b)
}

// Golden-section minimum of a unimodal function on [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo,
                         double hi, double tol = 1e-13) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a);
  double x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    }
  }
  return f((a + b) / 2.0);
}

// True squared-loss reduction of a split, evaluated directly: each side is
// fitted with the best constant adjustment under its ridge penalty, the
// parent under the fixed 1e-4 damping, and the difference of attained
// objectives is returned. For squared loss this equals the closed-form
// second-order gain exactly.
inline double gain_direct(const Eigen::VectorXd& y_left,
                          const Eigen::VectorXd& f_left,
                          const Eigen::VectorXd& y_right,
                          const Eigen::VectorXd& f_right, double lambda_left,
                          double lambda_right) {
  const auto objective = [](const Eigen::VectorXd& y, const Eigen::VectorXd& f,
                            double lambda) {
    return [&y, &f, lambda](double c) {
      return (y.array() - (f.array() + c)).square().sum() +
             0.5 * lambda * c * c;
    };
  };
  const auto bracket = [](const Eigen::VectorXd& y, const Eigen::VectorXd& f) {
    return (y - f).cwiseAbs().maxCoeff() + 1.0;
  };
  Eigen::VectorXd y_parent(y_left.size() + y_right.size());
  y_parent << y_left, y_right;
  Eigen::VectorXd f_parent(f_left.size() + f_right.size());
  f_parent << f_left, f_right;

  const double r_parent = bracket(y_parent, f_parent);
  const double r_left = bracket(y_left, f_left);
  const double r_right = bracket(y_right, f_right);
  const double parent_min =
      golden_min(objective(y_parent, f_parent, 1e-4), -r_parent, r_parent);
  const double left_min =
      golden_min(objective(y_left, f_left, lambda_left), -r_left, r_left);
  const double right_min =
      golden_min(objective(y_right, f_right, lambda_right), -r_right, r_right);
  return parent_min - left_min - right_min;
}

// Brute-force epsilon-insensitive objective minimum over a (w, b) grid for
// one-feature problems.
inline double svr_grid_min(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           double c, double epsilon, double lo, double hi,
                           double step) {
  double best = std::numeric_limits<double>::infinity();
  for (double w = lo; w <= hi + 1e-12; w += step) {
    for (double b = lo; b <= hi + 1e-12; b += step) {
      const Eigen::ArrayXd slack =
          (y.array() - (X.col(0).array() * w + b)).abs() - epsilon;
      const double obj = 0.5 * w * w + c * slack.max(0.0).sum();
      if (obj < best) {
        best = obj;
      }
    }
  }
  return best;
}

}  // namespace oracles
