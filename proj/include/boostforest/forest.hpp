#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "boostforest/boost_tree.hpp"
#include "boostforest/cart.hpp"
#include "boostforest/common.hpp"
#include "boostforest/dataset.hpp"

namespace boostforest {

// Hyper-parameter pools appropriate for a base learner; the only value a
// user normally chooses on top is the ensemble size.
ParameterPool default_pool(BaseKind base);

struct ForestConfig {
  BaseKind base = BaseKind::boosttree_ridge;
  int n_estimators = 100;
  ParameterPool pool;           // see default_pool
  std::optional<int> max_num_leaf;  // fixed cap; overrides the pool
  bool weight_filter = true;
  bool hard_vote = false;  // classification: majority vote over tree argmaxes
  std::uint64_t seed = 0;
  int threads = 1;
};

// Bagged ensemble. Each member is trained on an independent bootstrap
// replica with hyper-parameters sampled from the pools, under an rng seeded
// by child_seed(seed, member_index) — so the ensemble is identical whether
// members are trained serially or in parallel.
struct Forest {
  BaseKind base = BaseKind::boosttree_ridge;
  Task task = Task::regression;
  int n_classes = 0;
  bool hard_vote = false;
  std::uint64_t seed = 0;
  CsvSchema schema;            // column roles of the raw training file
  std::vector<std::string> label_levels;  // classification labels by code
  PreprocessState preprocess;  // fitted once on the full training set
  std::vector<BoostTree> trees;  // exactly one of trees/carts is populated
  std::vector<CartTree> carts;

  int size() const {
    return static_cast<int>(base == BaseKind::cart ? carts.size()
                                                   : trees.size());
  }
};

// Aggregated prediction for one row. `value` is in preprocessed label units
// for regression (use PreprocessState::unscale_label for raw units);
// `probabilities` has n_classes entries for classification (vote shares
// under hard voting) and `label` is the argmax with ties to the lowest
// index.
struct Prediction {
  double value = 0.0;
  int label = -1;
  Eigen::VectorXd probabilities;
};

// Fit the preprocessing transform on train_raw, then train
// config.n_estimators members on bootstrap replicas of the transformed data.
// Throws ConfigError on n_estimators < 1, pools missing values the base
// learner needs, or elm/svr bases combined with a classification task.
Forest train_forest(const Dataset& train_raw, const ForestConfig& config);

// Aggregate the first `first_k` members (all when negative) on one
// preprocessed row: mean prediction for regression, averaged probabilities
// or vote shares for classification.
Prediction predict_forest_row(const Forest& forest,
                              const Eigen::Ref<const Eigen::VectorXd>& x,
                              int first_k = -1);

// Preprocess a raw dataset with the stored transform and predict every row.
std::vector<Prediction> predict_forest(const Forest& forest,
                                       const Dataset& raw, int first_k = -1);

// Versioned text format with a trailing CRC32 line; writes are atomic-ish
// (temp file + rename). Throws ModelIoError on I/O failure.
void save_model(const Forest& forest, const std::string& path);

// Throws ModelIoError on unknown magic, unsupported version, truncation, or
// checksum mismatch; the checksum is verified before anything is parsed.
Forest load_model(const std::string& path);

}  // namespace boostforest
