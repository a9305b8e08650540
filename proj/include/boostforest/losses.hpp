#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "boostforest/common.hpp"

namespace boostforest {

// Pseudo-responses are clipped into [-kPseudoResponseMax, kPseudoResponseMax].
inline constexpr double kPseudoResponseMax = 4.0;

// Curvature weights and hessians are floored at twice machine epsilon.
inline constexpr double kWeightFloor =
    2.0 * std::numeric_limits<double>::epsilon();

// Per-sample first and second derivatives of the training loss with respect
// to the current raw prediction.
struct GradHess {
  Eigen::VectorXd g;
  Eigen::VectorXd h;  // floored at kWeightFloor
};

// Material for one weighted least-squares refit: clipped pseudo-responses z,
// curvature weights, and the sample positions that survive the low-weight
// filter (ascending; may be all positions when filtering is off or the
// sample is too small for a nonempty bottom-5% bucket).
struct WorkingSet {
  std::vector<int> indices;
  Eigen::VectorXd z;
  Eigen::VectorXd weights;
};

inline double clip_pseudo_response(double z) {
  if (z > kPseudoResponseMax) return kPseudoResponseMax;
  if (z < -kPseudoResponseMax) return -kPseudoResponseMax;
  return z;
}

// Row-wise softmax of a logit matrix, stabilized by max subtraction.
Eigen::MatrixXd softmax_rows(const Eigen::Ref<const Eigen::MatrixXd>& f);

// Squared error: g = 2(f - y), h = 2.
GradHess grad_hess_regression(const Eigen::Ref<const Eigen::VectorXd>& y,
                              const Eigen::Ref<const Eigen::VectorXd>& f);

// Binary cross-entropy on logits, y in {0,1}: g = p - y, h = p(1-p).
GradHess grad_hess_binary(const Eigen::Ref<const Eigen::VectorXd>& y,
                          const Eigen::Ref<const Eigen::VectorXd>& f);

// Multiclass cross-entropy on logits (one column per class), y a class
// index: per class j, g_j = p_j - [y == j], h_j = p_j(1 - p_j). Requires
// n_classes >= 3.
std::vector<GradHess> grad_hess_multiclass(
    const Eigen::Ref<const Eigen::VectorXd>& y,
    const Eigen::Ref<const Eigen::MatrixXd>& f, int n_classes);

// Task dispatcher; f has one column for regression/binary, n_classes columns
// for multiclass. Result has one entry per fitted output.
std::vector<GradHess> grad_hess(Task task,
                                const Eigen::Ref<const Eigen::VectorXd>& y,
                                const Eigen::Ref<const Eigen::MatrixXd>& f,
                                int n_classes);

// Per-sample loss summed over the node: squared error for regression,
// cross-entropy for classification.
double total_loss(Task task, const Eigen::Ref<const Eigen::VectorXd>& y,
                  const Eigen::Ref<const Eigen::MatrixXd>& f, int n_classes);

// Node impurity used to pick the next leaf to split: RMSE * n for
// regression, mean cross-entropy * n for classification.
double leaf_impurity(Task task, const Eigen::Ref<const Eigen::VectorXd>& y,
                     const Eigen::Ref<const Eigen::MatrixXd>& f,
                     int n_classes);

// Largest discrepancy between grad_hess and centered finite differences over
// the given samples: g is checked against the centered difference of the
// loss, h against the centered difference of the analytic g.
double finite_diff_max_error(Task task,
                             const Eigen::Ref<const Eigen::VectorXd>& y,
                             const Eigen::Ref<const Eigen::MatrixXd>& f,
                             int n_classes, double delta);

// Binary working set: p = sigmoid(f), weights = max(p(1-p), kWeightFloor),
// z = clip((y - p) / weight). When filter is set and floor(0.05*n) >= 1, only
// samples with weight strictly above the 5%-quantile weight are retained.
WorkingSet working_set_binary(const Eigen::Ref<const Eigen::VectorXd>& y,
                              const Eigen::Ref<const Eigen::VectorXd>& f,
                              bool filter);

// One working set per class from the one-vs-rest decomposition of the
// multiclass cross-entropy. Requires n_classes >= 3.
std::vector<WorkingSet> working_set_multiclass(
    const Eigen::Ref<const Eigen::VectorXd>& y,
    const Eigen::Ref<const Eigen::MatrixXd>& f, int n_classes, bool filter);

}  // namespace boostforest
