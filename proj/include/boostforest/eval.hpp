#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "boostforest/cart.hpp"
#include "boostforest/dataset.hpp"
#include "boostforest/forest.hpp"

namespace boostforest {

// Repeated k-fold assignment: folds[r][i] is the fold of row i in repeat r.
// Classification plans are stratified: within each class, shuffled rows are
// dealt round-robin across folds with a cursor that continues from class to
// class, so fold sizes stay balanced overall.
struct CvPlan {
  int n_repeats = 0;
  int n_folds = 0;
  std::vector<std::vector<int>> folds;

  std::vector<int> test_indices(int repeat, int fold) const;
  std::vector<int> train_indices(int repeat, int fold) const;
};

// labels: pass the dataset labels to stratify a classification plan; leave
// unset for regression. Requires n_folds >= 2 and n_rows >= n_folds.
CvPlan make_cv_plan(int n_rows, int n_repeats, int n_folds,
                    std::uint64_t seed,
                    const std::optional<Eigen::VectorXd>& labels);

double accuracy(const std::vector<int>& truth, const std::vector<int>& pred);
double rmse(const Eigen::Ref<const Eigen::VectorXd>& truth,
            const Eigen::Ref<const Eigen::VectorXd>& pred);

// Mean-based ranks, best = 1; tied means share the average of the positions
// they occupy.
std::vector<double> rank_scores(const std::vector<double>& means,
                                bool higher_is_better);

struct NamedDataset {
  std::string name;
  Dataset data;
};

// Fixed-parameter single tree trained on the fold without bootstrapping,
// for no-ensemble baselines.
struct SingleCartConfig {
  int max_depth = 6;
  int min_samples_leaf = 10;
};

struct AlgorithmConfig {
  std::string name;
  ForestConfig forest;
  bool single_cart = false;
  SingleCartConfig cart;  // used when single_cart is set
};

struct CvParams {
  int n_repeats = 5;
  int n_folds = 2;
  std::uint64_t seed = 0;
  int threads = 1;
};

// One evaluated (dataset, algorithm, repeat, fold) cell.
struct FoldRow {
  std::string dataset;
  std::string algorithm;
  int repeat = 0;
  int fold = 0;
  std::string metric;  // "accuracy" or "rmse"
  double value = 0.0;
};

struct AggregateRow {
  std::string dataset;
  std::string algorithm;
  double mean = 0.0;
  double stddev = 0.0;  // population, over fold values
  double rank = 0.0;    // within dataset, best = 1
};

struct ResultTable {
  std::vector<FoldRow> rows;            // dataset-major, then algorithm
  std::vector<AggregateRow> aggregates;
};

// Cross-validated comparison. All algorithms share one CV plan per dataset;
// every training run preprocesses its own training fold from scratch, and
// its seed is derived from (seed, dataset, algorithm, repeat, fold), so
// results are independent of execution order and thread count. Regression
// folds are scored with RMSE in normalized label units; classification with
// accuracy.
ResultTable run_benchmark(const std::vector<NamedDataset>& datasets,
                          const std::vector<AlgorithmConfig>& algorithms,
                          const CvParams& params);

// Header: dataset,algorithm,repeat,fold,metric,value
void write_fold_csv(const ResultTable& table, const std::string& path);
// Header: dataset,algorithm,mean,std,rank
void write_aggregate_csv(const ResultTable& table, const std::string& path);

struct SweepRow {
  int value = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

enum class SweepKnob { n_estimators, max_num_leaf };

// Metric curve over one knob under a shared CV plan. The n_estimators knob
// trains a single forest of max(values) members per fold and scores nested
// prefixes, so the curve is a true convergence profile of one ensemble.
std::vector<SweepRow> sweep_curve(const NamedDataset& dataset,
                                  const AlgorithmConfig& algorithm,
                                  SweepKnob knob,
                                  const std::vector<int>& values,
                                  const CvParams& params);

// Header: value,mean,std
void write_sweep_csv(const std::vector<SweepRow>& rows,
                     const std::string& path);

}  // namespace boostforest
