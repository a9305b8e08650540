#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "boostforest/common.hpp"
#include "boostforest/random.hpp"

namespace boostforest {

// Column roles used when parsing a CSV file. Column indices are zero-based
// positions in the file; categorical_cols must not contain the label column.
struct CsvSchema {
  int label_col = -1;
  std::vector<int> categorical_cols;
  Task task = Task::regression;
};

// In-memory dataset. Feature columns keep their file order (label removed).
// Categorical columns store level codes; the level strings seen at load time
// are kept alongside so codes stay interpretable across row subsets.
struct Dataset {
  Eigen::MatrixXd features;  // n_rows x n_cols
  Eigen::VectorXd labels;    // class index for classification, real otherwise
  Task task = Task::regression;
  int n_classes = 0;  // 0 for regression
  std::vector<std::string> feature_names;
  std::vector<int> categorical_cols;  // ascending
  std::vector<std::vector<std::string>> category_levels;  // parallel to above
  std::vector<std::string> label_levels;  // classification labels by code

  int n_rows() const { return static_cast<int>(features.rows()); }
  int n_cols() const { return static_cast<int>(features.cols()); }
  bool is_categorical(int col) const;
  // Level strings for a categorical column; nullptr for numeric columns.
  const std::vector<std::string>* levels_for(int col) const;
};

// One categorical column expanded into one indicator column per level seen
// when the transform was fitted.
struct OneHotBlock {
  int source_col = 0;
  std::vector<std::string> levels;  // sorted; one expanded column each
};

// Fitted preprocessing transform: one-hot expansion of categorical columns
// followed by per-feature min-max scaling to [0,1]. Regression labels are
// z-normalized with the population standard deviation. Fitting looks only at
// the rows it is given, so a transform fitted on a training fold carries no
// information about held-out rows.
struct PreprocessState {
  int n_input_cols = 0;
  std::vector<OneHotBlock> one_hot;  // by source column, ascending
  Eigen::VectorXd feat_min;          // per expanded feature
  Eigen::VectorXd feat_max;
  std::vector<std::string> feature_names;  // expanded
  bool labels_normalized = false;
  double label_mean = 0.0;
  double label_std = 1.0;

  int n_output_cols() const { return static_cast<int>(feat_min.size()); }
  double normalize_label(double y) const {
    return labels_normalized ? (y - label_mean) / label_std : y;
  }
  double unscale_label(double y) const {
    return labels_normalized ? y * label_std + label_mean : y;
  }
};

// Parse a CSV file. A header row is detected by a non-numeric token in a
// column that must be numeric. Throws DataError on unreadable/empty files,
// ragged rows, non-numeric or non-finite values in numeric columns, bad
// schema indices, and classification label sets of the wrong size.
Dataset load_csv(const std::string& path, const CsvSchema& schema);

// Fit the one-hot + min-max + label-normalization transform on ds.
PreprocessState fit_preprocess(const Dataset& ds);

// Apply a fitted transform. Feature values are clipped into [0,1]; category
// levels unseen at fit time contribute an all-zero indicator block. Throws
// DataError when the column structure does not match the fitted one.
Dataset apply_preprocess(const PreprocessState& state, const Dataset& ds);

// Row subset in the given order (indices may repeat).
Dataset take_rows(const Dataset& ds, const std::vector<int>& rows);

// Bootstrap replica: n_rows draws with replacement, in draw order.
Dataset bootstrap(const Dataset& ds, Rng& rng);

}  // namespace boostforest
