#include "boostforest/linear_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace boostforest {

namespace {

void check_fit_inputs(const Eigen::Ref<const Eigen::MatrixXd>& X,
                      const Eigen::Ref<const Eigen::VectorXd>& y,
                      const char* who) {
  if (X.rows() != y.size()) {
    throw std::invalid_argument(std::string(who) + ": X has " +
                                std::to_string(X.rows()) + " rows but y has " +
                                std::to_string(y.size()));
  }
  if (X.rows() == 0) {
    throw std::invalid_argument(std::string(who) + ": empty input");
  }
  if (!X.allFinite() || !y.allFinite()) {
    throw std::invalid_argument(std::string(who) + ": non-finite input");
  }
}

// Solve (A + lambda I) w = rhs, retrying with a tiny diagonal bump when the
// factorization fails or returns a non-finite or inaccurate solution.
Eigen::VectorXd solve_regularized(const Eigen::MatrixXd& A,
                                  const Eigen::VectorXd& rhs, double lambda) {
  const int d = static_cast<int>(A.rows());
  Eigen::MatrixXd M = A;
  M.diagonal().array() += lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  if (ldlt.info() == Eigen::Success) {
    Eigen::VectorXd w = ldlt.solve(rhs);
    if (w.allFinite()) {
      const double residual = (M * w - rhs).norm();
      const double scale = rhs.norm() + M.norm() * w.norm();
      if (residual <= 1e-8 * (1.0 + scale)) {
        return w;
      }
    }
  }
  M.diagonal().array() += 1e-10;
  Eigen::VectorXd w = Eigen::LDLT<Eigen::MatrixXd>(M).solve(rhs);
  if (!w.allFinite()) {
    w = Eigen::VectorXd::Zero(d);
  }
  return w;
}

}  // namespace

Eigen::VectorXd ElmModel::activations(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd a = hidden_w * x + hidden_b;
  for (int i = 0; i < a.size(); ++i) {
    a(i) = sigmoid(a(i));
  }
  return a;
}

LinearModel fit_ridge(const Eigen::Ref<const Eigen::MatrixXd>& X,
                      const Eigen::Ref<const Eigen::VectorXd>& y,
                      double lambda) {
  check_fit_inputs(X, y, "fit_ridge");
  if (lambda < 0.0) {
    throw std::invalid_argument("fit_ridge: negative lambda");
  }
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  LinearModel model;
  model.w = solve_regularized(Xc.transpose() * Xc, Xc.transpose() * yc, lambda);
  model.b = y_mean - x_mean * model.w;
  return model;
}

LinearModel fit_weighted_ridge(const Eigen::Ref<const Eigen::MatrixXd>& X,
                               const Eigen::Ref<const Eigen::VectorXd>& y,
                               const Eigen::Ref<const Eigen::VectorXd>& weights,
                               double lambda) {
  check_fit_inputs(X, y, "fit_weighted_ridge");
  if (weights.size() != y.size()) {
    throw std::invalid_argument("fit_weighted_ridge: weight size mismatch");
  }
  if (!weights.allFinite() || (weights.array() <= 0.0).any()) {
    throw std::invalid_argument(
        "fit_weighted_ridge: weights must be positive and finite");
  }
  if (lambda < 0.0) {
    throw std::invalid_argument("fit_weighted_ridge: negative lambda");
  }
  const double w_sum = weights.sum();
  const Eigen::RowVectorXd x_mean = (weights.transpose() * X) / w_sum;
  const double y_mean = weights.dot(y) / w_sum;
  const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  LinearModel model;
  model.w = solve_regularized(Xc.transpose() * weights.asDiagonal() * Xc,
                              Xc.transpose() * weights.cwiseProduct(yc),
                              lambda);
  model.b = y_mean - x_mean * model.w;
  return model;
}

ElmModel fit_elm(const Eigen::Ref<const Eigen::MatrixXd>& X,
                 const Eigen::Ref<const Eigen::VectorXd>& y, double lambda,
                 int hidden_nodes, Rng& rng) {
  check_fit_inputs(X, y, "fit_elm");
  if (hidden_nodes < 1) {
    throw std::invalid_argument("fit_elm: hidden_nodes must be >= 1");
  }
  const int d = static_cast<int>(X.cols());

  ElmModel model;
  model.hidden_w.resize(hidden_nodes, d);
  for (int i = 0; i < hidden_nodes; ++i) {
    for (int j = 0; j < d; ++j) {
      model.hidden_w(i, j) = rng.uniform(-1.0, 1.0);
    }
  }
  model.hidden_b.resize(hidden_nodes);
  for (int i = 0; i < hidden_nodes; ++i) {
    model.hidden_b(i) = rng.uniform(-1.0, 1.0);
  }

  Eigen::MatrixXd H = (X * model.hidden_w.transpose()).rowwise() +
                      model.hidden_b.transpose();
  H = H.unaryExpr([](double v) { return sigmoid(v); });
  model.output = fit_ridge(H, y, lambda);
  return model;
}

double svr_objective(const Eigen::Ref<const Eigen::MatrixXd>& X,
                     const Eigen::Ref<const Eigen::VectorXd>& y,
                     const SvrParams& params, const LinearModel& model) {
  const Eigen::ArrayXd slack =
      ((y - X * model.w).array() - model.b).abs() - params.epsilon;
  return 0.5 * model.w.squaredNorm() + params.c * slack.max(0.0).sum();
}

LinearModel fit_linear_svr(const Eigen::Ref<const Eigen::MatrixXd>& X,
                           const Eigen::Ref<const Eigen::VectorXd>& y,
                           const SvrParams& params) {
  check_fit_inputs(X, y, "fit_linear_svr");
  if (params.c <= 0.0) {
    throw std::invalid_argument("fit_linear_svr: c must be positive");
  }
  if (params.epsilon < 0.0) {
    throw std::invalid_argument("fit_linear_svr: negative epsilon");
  }
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  const double c = params.c;
  const double eps = params.epsilon;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Dual: minimize 0.5 b'Kb - y'b + eps*|b|_1 over sum(beta) = 0 and
  // |beta_i| <= c, with K = X X' and w = X' beta. Each coefficient bounds the
  // sum-constraint multiplier - which is exactly the intercept - from one or
  // both sides; the maximal violating pair is moved until the bounds meet.
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  const double tol = 1e-9 * (1.0 + y.cwiseAbs().maxCoeff());
  const int max_iter = 2000 + 20 * n;
  double b_lo = 0.0;
  double b_hi = 0.0;

  Eigen::VectorXd lo(n);
  Eigen::VectorXd hi(n);
  for (int iter = 0; iter < max_iter; ++iter) {
    if (iter % 64 == 0) {
      w = X.transpose() * beta;  // shed incremental update drift
    }
    const Eigen::VectorXd f = X * w;
    // lo(i)/hi(i) bound the intercept from the KKT condition of beta(i);
    // -lo(i) and hi(i) are also the dual directional derivatives for moving
    // beta(i) up respectively down.
    int p = -1;
    b_lo = -kInf;
    b_hi = kInf;
    for (int i = 0; i < n; ++i) {
      const double center = y(i) - f(i);
      lo(i) = -kInf;
      hi(i) = kInf;
      if (beta(i) <= -c) {
        lo(i) = center + eps;
      } else if (beta(i) < 0.0) {
        lo(i) = center + eps;
        hi(i) = center + eps;
      } else if (beta(i) == 0.0) {
        lo(i) = center - eps;
        hi(i) = center + eps;
      } else if (beta(i) < c) {
        lo(i) = center - eps;
        hi(i) = center - eps;
      } else {
        hi(i) = center - eps;
      }
      if (lo(i) > b_lo) {
        b_lo = lo(i);
        p = i;
      }
      b_hi = std::min(b_hi, hi(i));
    }
    if (p < 0 || b_lo - b_hi <= tol) {
      break;
    }
    // Partner with the largest modeled decrease (lo(p) - hi(j))^2 / 2a among
    // the pairs that violate lo(p) <= hi(j).
    int q = -1;
    double best_decrease = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == p || !(hi(j) < b_lo)) {
        continue;
      }
      const double a =
          std::max((X.row(p) - X.row(j)).squaredNorm(), 1e-12);
      const double slope = b_lo - hi(j);
      const double decrease = slope * slope / (2.0 * a);
      if (decrease > best_decrease) {
        best_decrease = decrease;
        q = j;
      }
    }
    if (q < 0) {
      break;
    }

    // Exact line search for beta_p += t, beta_q -= t inside the box. The
    // restricted dual is piecewise quadratic with kinks where either
    // coefficient crosses zero.
    const double t_lo = std::max(-c - beta(p), beta(q) - c);
    const double t_hi = std::min(c - beta(p), beta(q) + c);
    const Eigen::VectorXd diff = (X.row(p) - X.row(q)).transpose();
    const double curvature = diff.squaredNorm();
    const double slope0 = (f(p) - y(p)) - (f(q) - y(q));
    const double bp = beta(p);
    const double bq = beta(q);
    const auto value = [&](double t) {
      return 0.5 * curvature * t * t + slope0 * t +
             eps * (std::abs(bp + t) - std::abs(bp) + std::abs(bq - t) -
                    std::abs(bq));
    };
    std::vector<double> candidates{t_lo, t_hi};
    if (-bp > t_lo && -bp < t_hi) {
      candidates.push_back(-bp);
    }
    if (bq > t_lo && bq < t_hi) {
      candidates.push_back(bq);
    }
    std::sort(candidates.begin(), candidates.end());
    if (curvature > 0.0) {
      const std::size_t n_breaks = candidates.size();
      for (std::size_t s = 0; s + 1 < n_breaks; ++s) {
        const double mid = 0.5 * (candidates[s] + candidates[s + 1]);
        const double sign_p = bp + mid >= 0.0 ? 1.0 : -1.0;
        const double sign_q = bq - mid >= 0.0 ? 1.0 : -1.0;
        const double stationary =
            -(slope0 + eps * sign_p - eps * sign_q) / curvature;
        if (stationary > candidates[s] && stationary < candidates[s + 1]) {
          candidates.push_back(stationary);
        }
      }
    }
    double step = 0.0;
    double best_value = 0.0;
    for (const double t : candidates) {
      const double v = value(t);
      if (v < best_value) {
        best_value = v;
        step = t;
      }
    }
    if (best_value >= 0.0) {
      break;  // at numerical precision no candidate improves
    }
    beta(p) = std::clamp(beta(p) + step, -c, c);
    beta(q) = std::clamp(beta(q) - step, -c, c);
    w += step * diff;
  }

  LinearModel model{X.transpose() * beta, 0.5 * (b_lo + b_hi)};
  double model_obj = svr_objective(X, y, params, model);
  const LinearModel zero_model = LinearModel::zero(d);
  const double zero_obj = svr_objective(X, y, params, zero_model);
  if (zero_obj < model_obj) {
    model = zero_model;
    model_obj = zero_obj;
  }
  const LinearModel mean_model{Eigen::VectorXd::Zero(d), y.mean()};
  if (svr_objective(X, y, params, mean_model) < model_obj) {
    model = mean_model;
  }
  return model;
}

}  // namespace boostforest
