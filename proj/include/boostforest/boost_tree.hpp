#pragma once

#include <Eigen/Dense>
#include <optional>
#include <variant>
#include <vector>

#include "boostforest/common.hpp"
#include "boostforest/linear_models.hpp"
#include "boostforest/losses.hpp"
#include "boostforest/random.hpp"

namespace boostforest {

// Candidate hyper-parameter values sampled per node or per tree.
struct ParameterPool {
  std::vector<int> min_samples_leaf = {5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  std::vector<double> lambda = {1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<int> elm_hidden = {10, 20, 30, 40};
  std::vector<double> svr_c = {0.1, 1.0, 2.0, 5.0, 10.0};
  std::vector<double> svr_epsilon = {0.1, 0.2, 0.4, 0.8};
  std::vector<int> max_num_leaf = {};     // per-tree cap pool; empty = unused
  std::vector<int> cart_max_depth = {4, 6, 8};
};

// One affine model per class, for multiclass nodes.
struct MultiLinearModel {
  std::vector<LinearModel> per_class;
};

using NodeModel = std::variant<LinearModel, ElmModel, MultiLinearModel>;

// Model output as a vector: size 1 for scalar models, n_classes otherwise.
Eigen::VectorXd predict_node(const NodeModel& model,
                             const Eigen::Ref<const Eigen::VectorXd>& x);

// Squared norm of the regularized coefficients; summed over classes for
// multiclass models.
double node_coef_norm2(const NodeModel& model);

// Zero-center per-class models: f_j <- (J-1)/J * (f_j - mean_i f_i),
// applied to weights and intercepts alike. Requires >= 3 models of equal
// dimension.
void center_multiclass(std::vector<LinearModel>& models);

struct SplitRecord {
  int feature = -1;
  double threshold = 0.0;  // route left when x[feature] <= threshold
};

struct TreeNode {
  NodeModel model;
  SplitRecord split;  // valid when not a leaf
  int left = -1;
  int right = -1;

  bool is_leaf() const { return left < 0; }
};

// Model tree: every node, internal or leaf, carries an additive model; a
// prediction is the sum of the node-model outputs along the root-to-leaf
// path. The root model is identically zero.
struct BoostTree {
  std::vector<TreeNode> nodes;  // index 0 is the root
  Task task = Task::regression;
  int n_classes = 0;
  int n_features = 0;
  int num_leaf = 1;
};

// Raw prediction: accumulated model outputs along the routing path. Size 1
// (regression value / binary logit) or n_classes (multiclass logits).
Eigen::VectorXd predict_tree(const BoostTree& tree,
                             const Eigen::Ref<const Eigen::VectorXd>& x);

// Candidate thresholds for one feature: the distinct values themselves when
// there are at most 100 of them, otherwise 100 evenly spaced values between
// min and max (both included). Values must be sorted ascending; fewer than
// two distinct values yield no candidates.
std::vector<double> enumerate_thresholds(const std::vector<double>& sorted_values);

// Second-order gain of splitting one set of samples into left/right, before
// model-complexity penalties. Sums and curvatures are per side; the parent
// term is damped by a fixed 1e-4 additive constant instead of a sampled
// regularizer.
double split_gain_bias(double g_left, double h_left, double g_right,
                       double h_right, double reg_left, double reg_right);

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;       // bias gain, summed over classes
  double reg_left = 0.0;   // lambda for ridge/elm nodes, C for svr nodes
  double reg_right = 0.0;
};

struct GrowConfig {
  NodeKind node_kind = NodeKind::ridge;
  ParameterPool pool;
  std::optional<int> max_num_leaf;  // no cap when unset
  bool weight_filter = true;
  // Fresh regularizer draws for every feasible candidate during the scan
  // (the default); when off, one draw per split attempt is reused.
  bool reg_per_candidate = true;
};

// Scan ceil(sqrt(D)) randomly chosen features for the best second-order
// split of the given node samples. gh holds one gradient/hessian pair per
// fitted output, aligned with `samples` order. Draw order per attempt:
// left/right minimum leaf sizes, feature subset, then regularizers per
// feasible candidate (or one pair up front when reg_per_candidate is off).
// Returns nothing when no candidate is feasible or the best gain is not
// positive.
std::optional<SplitCandidate> find_best_split(
    const Eigen::Ref<const Eigen::MatrixXd>& X,
    const std::vector<int>& samples, const std::vector<GradHess>& gh,
    NodeKind kind, const ParameterPool& pool, bool reg_per_candidate,
    Rng& rng);

// Hyper-parameters for one node-model fit.
struct NodeFitParams {
  NodeKind kind = NodeKind::ridge;
  double reg = 0.0;         // lambda for ridge/elm, C for svr
  double svr_epsilon = 0.0;
  int elm_hidden = 0;
  bool weight_filter = true;
};

// Fit the additive model of one node given the accumulated outputs f_prev of
// the models above it (rows aligned with `samples`). Regression fits the
// chosen family on residuals; classification fits (weighted) ridge on the
// filtered working set, per class and centered for multiclass. If filtering
// leaves no samples, the fit falls back to the unfiltered set.
NodeModel fit_node_model(Task task, const Eigen::Ref<const Eigen::MatrixXd>& X,
                         const Eigen::Ref<const Eigen::VectorXd>& y,
                         const std::vector<int>& samples,
                         const Eigen::Ref<const Eigen::MatrixXd>& f_prev,
                         const NodeFitParams& params, int n_classes, Rng& rng);

// Grow a boosted model tree: start from a zero-model root, repeatedly take
// the open leaf with the highest impurity (ties to the earliest-created),
// and split it when a candidate with positive penalized gain exists. A leaf
// whose split attempt fails is closed for good. Growth stops when no open
// leaf remains or num_leaf reaches the cap.
BoostTree grow(const Eigen::Ref<const Eigen::MatrixXd>& X,
               const Eigen::Ref<const Eigen::VectorXd>& y, Task task,
               int n_classes, const GrowConfig& config, Rng& rng);

}  // namespace boostforest
