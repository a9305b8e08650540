#include "boostforest/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace boostforest {

namespace {

void check_rows(const Eigen::Ref<const Eigen::VectorXd>& y,
                const Eigen::Ref<const Eigen::MatrixXd>& f, const char* who) {
  if (y.size() != f.rows() || y.size() == 0) {
    throw std::invalid_argument(std::string(who) + ": y has " +
                                std::to_string(y.size()) + " entries but f has " +
                                std::to_string(f.rows()) + " rows");
  }
}

void check_class_index(const Eigen::Ref<const Eigen::VectorXd>& y,
                       int n_classes, const char* who) {
  for (int i = 0; i < y.size(); ++i) {
    const int c = static_cast<int>(y(i));
    if (static_cast<double>(c) != y(i) || c < 0 || c >= n_classes) {
      throw std::invalid_argument(std::string(who) +
                                  ": label out of class range at row " +
                                  std::to_string(i));
    }
  }
}

// Cross-entropy of one binary sample on the logit scale, overflow-safe:
// max(f,0) - f*y + log(1 + exp(-|f|)).
double binary_ce(double y, double f) {
  return std::max(f, 0.0) - f * y + std::log1p(std::exp(-std::abs(f)));
}

// Multiclass cross-entropy -log p_y via a stabilized log-sum-exp.
double multiclass_ce(int y, const Eigen::Ref<const Eigen::RowVectorXd>& f) {
  const double m = f.maxCoeff();
  const double lse = m + std::log((f.array() - m).exp().sum());
  return lse - f(y);
}

// Per-sample loss and analytic first derivative on one output coordinate,
// shared by the finite-difference checker.
double loss_scalar(Task task, double y,
                   const Eigen::Ref<const Eigen::RowVectorXd>& f) {
  switch (task) {
    case Task::regression: {
      const double r = y - f(0);
      return r * r;
    }
    case Task::binary:
      return binary_ce(y, f(0));
    case Task::multiclass:
      return multiclass_ce(static_cast<int>(y), f);
  }
  return 0.0;
}

double grad_scalar(Task task, double y,
                   const Eigen::Ref<const Eigen::RowVectorXd>& f, int j) {
  switch (task) {
    case Task::regression:
      return 2.0 * (f(0) - y);
    case Task::binary:
      return sigmoid(f(0)) - y;
    case Task::multiclass: {
      const double m = f.maxCoeff();
      const Eigen::ArrayXd e = (f.transpose().array() - m).exp();
      const double p = e(j) / e.sum();
      return p - (static_cast<int>(y) == j ? 1.0 : 0.0);
    }
  }
  return 0.0;
}

// Positions of weights strictly above the bottom-5% quantile weight; all
// positions when filtering is off or floor(0.05*n) is zero.
std::vector<int> filtered_indices(const Eigen::VectorXd& weights,
                                  bool filter) {
  const int n = static_cast<int>(weights.size());
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) {
    all[i] = i;
  }
  const int k = static_cast<int>(0.05 * n);
  if (!filter || k < 1) {
    return all;
  }
  std::vector<double> sorted(weights.data(), weights.data() + n);
  std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
  const double q = sorted[k - 1];
  std::vector<int> kept;
  kept.reserve(n - k);
  for (int i = 0; i < n; ++i) {
    if (weights(i) > q) {
      kept.push_back(i);
    }
  }
  return kept;
}

WorkingSet working_set_from(const Eigen::VectorXd& y01,
                            const Eigen::VectorXd& p, bool filter) {
  const int n = static_cast<int>(p.size());
  WorkingSet ws;
  ws.z.resize(n);
  ws.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const double w = std::max(p(i) * (1.0 - p(i)), kWeightFloor);
    ws.weights(i) = w;
    ws.z(i) = clip_pseudo_response((y01(i) - p(i)) / w);
  }
  ws.indices = filtered_indices(ws.weights, filter);
  return ws;
}

}  // namespace

Eigen::MatrixXd softmax_rows(const Eigen::Ref<const Eigen::MatrixXd>& f) {
  Eigen::MatrixXd p(f.rows(), f.cols());
  for (int i = 0; i < f.rows(); ++i) {
    const double m = f.row(i).maxCoeff();
    const Eigen::ArrayXd e = (f.row(i).transpose().array() - m).exp();
    p.row(i) = (e / e.sum()).transpose();
  }
  return p;
}

GradHess grad_hess_regression(const Eigen::Ref<const Eigen::VectorXd>& y,
                              const Eigen::Ref<const Eigen::VectorXd>& f) {
  if (y.size() != f.size() || y.size() == 0) {
    throw std::invalid_argument("grad_hess_regression: size mismatch");
  }
  GradHess gh;
  gh.g = 2.0 * (f - y);
  gh.h = Eigen::VectorXd::Constant(y.size(), 2.0);
  return gh;
}

GradHess grad_hess_binary(const Eigen::Ref<const Eigen::VectorXd>& y,
                          const Eigen::Ref<const Eigen::VectorXd>& f) {
  if (y.size() != f.size() || y.size() == 0) {
    throw std::invalid_argument("grad_hess_binary: size mismatch");
  }
  check_class_index(y, 2, "grad_hess_binary");
  GradHess gh;
  gh.g.resize(y.size());
  gh.h.resize(y.size());
  for (int i = 0; i < y.size(); ++i) {
    const double p = sigmoid(f(i));
    gh.g(i) = p - y(i);
    gh.h(i) = std::max(p * (1.0 - p), kWeightFloor);
  }
  return gh;
}

std::vector<GradHess> grad_hess_multiclass(
    const Eigen::Ref<const Eigen::VectorXd>& y,
    const Eigen::Ref<const Eigen::MatrixXd>& f, int n_classes) {
  check_rows(y, f, "grad_hess_multiclass");
  if (n_classes < 3 || f.cols() != n_classes) {
    throw std::invalid_argument(
        "grad_hess_multiclass: needs >= 3 classes and matching logit columns");
  }
  check_class_index(y, n_classes, "grad_hess_multiclass");
  const Eigen::MatrixXd p = softmax_rows(f);
  std::vector<GradHess> out(n_classes);
  for (int j = 0; j < n_classes; ++j) {
    auto& gh = out[j];
    gh.g.resize(y.size());
    gh.h.resize(y.size());
    for (int i = 0; i < y.size(); ++i) {
      const double pij = p(i, j);
      gh.g(i) = pij - (static_cast<int>(y(i)) == j ? 1.0 : 0.0);
      gh.h(i) = std::max(pij * (1.0 - pij), kWeightFloor);
    }
  }
  return out;
}

std::vector<GradHess> grad_hess(Task task,
                                const Eigen::Ref<const Eigen::VectorXd>& y,
                                const Eigen::Ref<const Eigen::MatrixXd>& f,
                                int n_classes) {
  if (task != Task::multiclass && f.cols() != 1) {
    throw std::invalid_argument("grad_hess: scalar task needs one f column");
  }
  switch (task) {
    case Task::regression:
      return {grad_hess_regression(y, f.col(0))};
    case Task::binary:
      return {grad_hess_binary(y, f.col(0))};
    case Task::multiclass:
      return grad_hess_multiclass(y, f, n_classes);
  }
  return {};
}

double total_loss(Task task, const Eigen::Ref<const Eigen::VectorXd>& y,
                  const Eigen::Ref<const Eigen::MatrixXd>& f, int n_classes) {
  check_rows(y, f, "total_loss");
  if (task != Task::multiclass && f.cols() != 1) {
    throw std::invalid_argument("total_loss: scalar task needs one f column");
  }
  if (task == Task::multiclass) {
    check_class_index(y, n_classes, "total_loss");
  }
  double total = 0.0;
  for (int i = 0; i < y.size(); ++i) {
    total += loss_scalar(task, y(i), f.row(i));
  }
  return total;
}

double leaf_impurity(Task task, const Eigen::Ref<const Eigen::VectorXd>& y,
                     const Eigen::Ref<const Eigen::MatrixXd>& f,
                     int n_classes) {
  check_rows(y, f, "leaf_impurity");
  const double n = static_cast<double>(y.size());
  if (task == Task::regression) {
    const double mse = (y - f.col(0)).squaredNorm() / n;
    return std::sqrt(mse) * n;
  }
  const double mean_ce = total_loss(task, y, f, n_classes) / n;
  return mean_ce * n;
}

double finite_diff_max_error(Task task,
                             const Eigen::Ref<const Eigen::VectorXd>& y,
                             const Eigen::Ref<const Eigen::MatrixXd>& f,
                             int n_classes, double delta) {
  check_rows(y, f, "finite_diff_max_error");
  const std::vector<GradHess> gh = grad_hess(task, y, f, n_classes);
  const int n_outputs = static_cast<int>(gh.size());
  double worst = 0.0;
  Eigen::RowVectorXd row;
  for (int i = 0; i < y.size(); ++i) {
    for (int j = 0; j < n_outputs; ++j) {
      row = f.row(i);
      row(j) += delta;
      const double loss_hi = loss_scalar(task, y(i), row);
      const double grad_hi = grad_scalar(task, y(i), row, j);
      row(j) -= 2.0 * delta;
      const double loss_lo = loss_scalar(task, y(i), row);
      const double grad_lo = grad_scalar(task, y(i), row, j);

      const double g_fd = (loss_hi - loss_lo) / (2.0 * delta);
      const double h_fd = (grad_hi - grad_lo) / (2.0 * delta);
      worst = std::max(worst, std::abs(g_fd - gh[j].g(i)));
      // The hessian is floored, so compare against the unfloored value
      // only when the floor is not active.
      if (gh[j].h(i) > kWeightFloor) {
        worst = std::max(worst, std::abs(h_fd - gh[j].h(i)));
      }
    }
  }
  return worst;
}

WorkingSet working_set_binary(const Eigen::Ref<const Eigen::VectorXd>& y,
                              const Eigen::Ref<const Eigen::VectorXd>& f,
                              bool filter) {
  if (y.size() != f.size() || y.size() == 0) {
    throw std::invalid_argument("working_set_binary: size mismatch");
  }
  check_class_index(y, 2, "working_set_binary");
  Eigen::VectorXd p(f.size());
  for (int i = 0; i < f.size(); ++i) {
    p(i) = sigmoid(f(i));
  }
  return working_set_from(y, p, filter);
}

std::vector<WorkingSet> working_set_multiclass(
    const Eigen::Ref<const Eigen::VectorXd>& y,
    const Eigen::Ref<const Eigen::MatrixXd>& f, int n_classes, bool filter) {
  check_rows(y, f, "working_set_multiclass");
  if (n_classes < 3 || f.cols() != n_classes) {
    throw std::invalid_argument(
        "working_set_multiclass: needs >= 3 classes and matching columns");
  }
  check_class_index(y, n_classes, "working_set_multiclass");
  const Eigen::MatrixXd p = softmax_rows(f);
  std::vector<WorkingSet> out;
  out.reserve(n_classes);
  Eigen::VectorXd y01(y.size());
  for (int j = 0; j < n_classes; ++j) {
    for (int i = 0; i < y.size(); ++i) {
      y01(i) = static_cast<int>(y(i)) == j ? 1.0 : 0.0;
    }
    out.push_back(working_set_from(y01, p.col(j), filter));
  }
  return out;
}

}  // namespace boostforest
