#include "boostforest/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace boostforest {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) {
    --b;
  }
  return s.substr(a, b - a);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    out.push_back(trim(cell));
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

bool parse_double(const std::string& token, double* out) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  if (begin != end && *begin == '+') {
    ++begin;  // from_chars rejects an explicit plus sign
  }
  double value = 0.0;
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end || begin == end) {
    return false;
  }
  if (!std::isfinite(value)) {
    return false;
  }
  *out = value;
  return true;
}

std::string cell_ref(int row, int col) {
  return "(row " + std::to_string(row + 1) + ", col " + std::to_string(col + 1) +
         ")";
}

// Sort distinct label strings: numerically when every one parses as a
// number, lexicographically otherwise.
std::vector<std::string> sorted_label_levels(const std::set<std::string>& raw) {
  std::vector<std::string> levels(raw.begin(), raw.end());
  std::vector<double> numeric(levels.size());
  bool all_numeric = true;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!parse_double(levels[i], &numeric[i])) {
      all_numeric = false;
      break;
    }
  }
  if (all_numeric) {
    std::vector<std::size_t> order(levels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (numeric[a] != numeric[b]) return numeric[a] < numeric[b];
      return levels[a] < levels[b];
    });
    std::vector<std::string> out(levels.size());
    for (std::size_t i = 0; i < order.size(); ++i) out[i] = levels[order[i]];
    return out;
  }
  return levels;  // std::set iteration is already lexicographic
}

// Where each input column lands in the expanded feature matrix.
struct ExpandLayout {
  struct Col {
    int start = 0;
    int width = 1;
    int block = -1;  // index into one_hot when categorical
  };
  std::vector<Col> cols;
  int total = 0;
};

ExpandLayout make_layout(int n_input_cols,
                         const std::vector<OneHotBlock>& one_hot) {
  ExpandLayout layout;
  layout.cols.resize(n_input_cols);
  std::size_t next_block = 0;
  int cursor = 0;
  for (int c = 0; c < n_input_cols; ++c) {
    auto& col = layout.cols[c];
    col.start = cursor;
    if (next_block < one_hot.size() && one_hot[next_block].source_col == c) {
      col.block = static_cast<int>(next_block);
      col.width = static_cast<int>(one_hot[next_block].levels.size());
      ++next_block;
    }
    cursor += col.width;
  }
  layout.total = cursor;
  return layout;
}

// One-hot expansion of ds.features using the given blocks; levels absent
// from a block produce an all-zero stretch.
Eigen::MatrixXd expand_features(const Dataset& ds,
                                const std::vector<OneHotBlock>& one_hot,
                                const ExpandLayout& layout) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(ds.n_rows(), layout.total);
  for (int c = 0; c < ds.n_cols(); ++c) {
    const auto& col = layout.cols[c];
    if (col.block < 0) {
      out.col(col.start) = ds.features.col(c);
      continue;
    }
    const auto* source_levels = ds.levels_for(c);
    if (source_levels == nullptr) {
      throw DataError("column " + std::to_string(c + 1) +
                      " is numeric but the transform expects categories");
    }
    const auto& levels = one_hot[col.block].levels;
    for (int r = 0; r < ds.n_rows(); ++r) {
      const int code = static_cast<int>(ds.features(r, c));
      if (code < 0 || code >= static_cast<int>(source_levels->size())) {
        throw DataError("category code out of range at " + cell_ref(r, c));
      }
      const std::string& level = (*source_levels)[code];
      const auto it = std::lower_bound(levels.begin(), levels.end(), level);
      if (it != levels.end() && *it == level) {
        out(r, col.start + static_cast<int>(it - levels.begin())) = 1.0;
      }
      // Unseen level: the whole block stays zero for this row.
    }
  }
  return out;
}

}  // namespace

bool Dataset::is_categorical(int col) const {
  return std::binary_search(categorical_cols.begin(), categorical_cols.end(),
                            col);
}

const std::vector<std::string>* Dataset::levels_for(int col) const {
  const auto it =
      std::lower_bound(categorical_cols.begin(), categorical_cols.end(), col);
  if (it == categorical_cols.end() || *it != col) {
    return nullptr;
  }
  return &category_levels[it - categorical_cols.begin()];
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open data file '" + path + "'");
  }
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const std::string stripped = trim(line);
    if (stripped.empty() && rows.empty()) {
      continue;  // leading blank lines
    }
    if (stripped.empty()) {
      break;  // trailing blank line(s)
    }
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) {
    throw DataError("data file '" + path + "' is empty");
  }

  const int n_file_cols = static_cast<int>(rows[0].size());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (static_cast<int>(rows[r].size()) != n_file_cols) {
      throw DataError("ragged row " + std::to_string(r + 1) + ": has " +
                      std::to_string(rows[r].size()) + " columns, expected " +
                      std::to_string(n_file_cols));
    }
  }

  if (schema.label_col < 0 || schema.label_col >= n_file_cols) {
    throw DataError("label column " + std::to_string(schema.label_col) +
                    " out of range for a file with " +
                    std::to_string(n_file_cols) + " columns");
  }
  std::vector<int> cat_file_cols = schema.categorical_cols;
  std::sort(cat_file_cols.begin(), cat_file_cols.end());
  cat_file_cols.erase(std::unique(cat_file_cols.begin(), cat_file_cols.end()),
                      cat_file_cols.end());
  for (const int c : cat_file_cols) {
    if (c < 0 || c >= n_file_cols) {
      throw DataError("categorical column " + std::to_string(c) +
                      " out of range for a file with " +
                      std::to_string(n_file_cols) + " columns");
    }
    if (c == schema.label_col) {
      throw DataError("categorical column " + std::to_string(c) +
                      " is the label column");
    }
  }
  const auto file_col_is_cat = [&](int c) {
    return std::binary_search(cat_file_cols.begin(), cat_file_cols.end(), c);
  };

  // Header detection: a first-row token that fails to parse in a column
  // that must be numeric. Classification label columns may hold arbitrary
  // strings, so they cannot vote.
  bool has_header = false;
  for (int c = 0; c < n_file_cols; ++c) {
    const bool numeric_role =
        c == schema.label_col ? schema.task == Task::regression
                              : !file_col_is_cat(c);
    double ignored;
    if (numeric_role && !parse_double(rows[0][c], &ignored)) {
      has_header = true;
      break;
    }
  }

  const int first_data_row = has_header ? 1 : 0;
  const int n_rows = static_cast<int>(rows.size()) - first_data_row;
  if (n_rows <= 0) {
    throw DataError("data file '" + path + "' has a header but no rows");
  }

  Dataset ds;
  ds.task = schema.task;

  // Feature columns keep file order with the label column removed.
  std::vector<int> feature_file_cols;
  for (int c = 0; c < n_file_cols; ++c) {
    if (c != schema.label_col) {
      feature_file_cols.push_back(c);
    }
  }
  const int n_feat = static_cast<int>(feature_file_cols.size());
  if (n_feat == 0) {
    throw DataError("data file '" + path + "' has no feature columns");
  }

  ds.feature_names.resize(n_feat);
  for (int j = 0; j < n_feat; ++j) {
    const int c = feature_file_cols[j];
    ds.feature_names[j] =
        has_header ? rows[0][c] : "col" + std::to_string(c);
  }

  std::vector<std::map<std::string, int>> level_codes;  // per categorical col
  for (int j = 0; j < n_feat; ++j) {
    if (file_col_is_cat(feature_file_cols[j])) {
      ds.categorical_cols.push_back(j);
    }
  }
  level_codes.resize(ds.categorical_cols.size());
  ds.category_levels.resize(ds.categorical_cols.size());

  ds.features.resize(n_rows, n_feat);
  for (int r = 0; r < n_rows; ++r) {
    const auto& cells = rows[r + first_data_row];
    int cat_slot = 0;
    for (int j = 0; j < n_feat; ++j) {
      const int c = feature_file_cols[j];
      if (file_col_is_cat(c)) {
        auto& codes = level_codes[cat_slot];
        auto& levels = ds.category_levels[cat_slot];
        const auto [it, inserted] =
            codes.try_emplace(cells[c], static_cast<int>(levels.size()));
        if (inserted) {
          levels.push_back(cells[c]);
        }
        ds.features(r, j) = it->second;
        ++cat_slot;
      } else {
        double v = 0.0;
        if (!parse_double(cells[c], &v)) {
          throw DataError("non-numeric value '" + cells[c] + "' at " +
                          cell_ref(r + first_data_row, c));
        }
        ds.features(r, j) = v;
      }
    }
  }

  ds.labels.resize(n_rows);
  if (schema.task == Task::regression) {
    for (int r = 0; r < n_rows; ++r) {
      double v = 0.0;
      const auto& cell = rows[r + first_data_row][schema.label_col];
      if (!parse_double(cell, &v)) {
        throw DataError("non-numeric label '" + cell + "' at " +
                        cell_ref(r + first_data_row, schema.label_col));
      }
      ds.labels(r) = v;
    }
    ds.n_classes = 0;
  } else {
    std::set<std::string> distinct;
    for (int r = 0; r < n_rows; ++r) {
      distinct.insert(rows[r + first_data_row][schema.label_col]);
    }
    if (schema.task == Task::binary && distinct.size() != 2) {
      throw DataError("binary task but found " +
                      std::to_string(distinct.size()) +
                      " distinct label values");
    }
    if (schema.task == Task::multiclass && distinct.size() < 3) {
      throw DataError("multiclass task but found only " +
                      std::to_string(distinct.size()) +
                      " distinct label values");
    }
    ds.label_levels = sorted_label_levels(distinct);
    std::map<std::string, int> code;
    for (std::size_t i = 0; i < ds.label_levels.size(); ++i) {
      code[ds.label_levels[i]] = static_cast<int>(i);
    }
    for (int r = 0; r < n_rows; ++r) {
      ds.labels(r) = code[rows[r + first_data_row][schema.label_col]];
    }
    ds.n_classes = static_cast<int>(ds.label_levels.size());
  }
  return ds;
}

PreprocessState fit_preprocess(const Dataset& ds) {
  if (ds.n_rows() < 1) {
    throw DataError("cannot fit a transform on an empty dataset");
  }
  PreprocessState state;
  state.n_input_cols = ds.n_cols();

  // Fit-time levels are the sorted distinct levels observed in these rows
  // (not the full load-time tables), so the transform depends only on the
  // rows it was fitted on.
  for (std::size_t k = 0; k < ds.categorical_cols.size(); ++k) {
    const int c = ds.categorical_cols[k];
    const auto& table = ds.category_levels[k];
    std::set<std::string> seen;
    for (int r = 0; r < ds.n_rows(); ++r) {
      const int code = static_cast<int>(ds.features(r, c));
      if (code < 0 || code >= static_cast<int>(table.size())) {
        throw DataError("category code out of range at " + cell_ref(r, c));
      }
      seen.insert(table[code]);
    }
    OneHotBlock block;
    block.source_col = c;
    block.levels.assign(seen.begin(), seen.end());
    state.one_hot.push_back(std::move(block));
  }

  const ExpandLayout layout = make_layout(state.n_input_cols, state.one_hot);
  const Eigen::MatrixXd expanded = expand_features(ds, state.one_hot, layout);
  state.feat_min = expanded.colwise().minCoeff();
  state.feat_max = expanded.colwise().maxCoeff();

  state.feature_names.resize(layout.total);
  for (int c = 0; c < state.n_input_cols; ++c) {
    const auto& col = layout.cols[c];
    const std::string base = c < static_cast<int>(ds.feature_names.size())
                                 ? ds.feature_names[c]
                                 : "col" + std::to_string(c);
    if (col.block < 0) {
      state.feature_names[col.start] = base;
    } else {
      const auto& levels = state.one_hot[col.block].levels;
      for (int k = 0; k < col.width; ++k) {
        state.feature_names[col.start + k] = base + "=" + levels[k];
      }
    }
  }

  if (ds.task == Task::regression) {
    const int n = ds.n_rows();
    const double mean = ds.labels.mean();
    const double var = (ds.labels.array() - mean).square().sum() / n;
    const double std = std::sqrt(var);
    if (std <= 1e-12 * (1.0 + std::abs(mean))) {
      throw DataError("regression labels are constant; cannot normalize");
    }
    state.labels_normalized = true;
    state.label_mean = mean;
    state.label_std = std;
  }
  return state;
}

Dataset apply_preprocess(const PreprocessState& state, const Dataset& ds) {
  if (ds.n_cols() != state.n_input_cols) {
    throw DataError("dataset has " + std::to_string(ds.n_cols()) +
                    " feature columns, transform expects " +
                    std::to_string(state.n_input_cols));
  }
  std::vector<int> expected_cats;
  for (const auto& block : state.one_hot) {
    expected_cats.push_back(block.source_col);
  }
  if (expected_cats != ds.categorical_cols) {
    throw DataError("categorical columns do not match the fitted transform");
  }

  const ExpandLayout layout = make_layout(state.n_input_cols, state.one_hot);
  Eigen::MatrixXd expanded = expand_features(ds, state.one_hot, layout);
  for (int c = 0; c < layout.total; ++c) {
    const double lo = state.feat_min(c);
    const double hi = state.feat_max(c);
    if (hi > lo) {
      expanded.col(c) = (expanded.col(c).array() - lo) / (hi - lo);
    } else {
      expanded.col(c).setZero();  // constant at fit time carries no signal
    }
  }
  expanded = expanded.cwiseMax(0.0).cwiseMin(1.0);

  Dataset out;
  out.features = std::move(expanded);
  out.task = ds.task;
  out.n_classes = ds.n_classes;
  out.feature_names = state.feature_names;
  out.label_levels = ds.label_levels;
  out.labels = ds.labels;
  if (state.labels_normalized) {
    out.labels =
        (ds.labels.array() - state.label_mean) / state.label_std;
  }
  return out;
}

Dataset take_rows(const Dataset& ds, const std::vector<int>& rows) {
  Dataset out;
  out.features.resize(static_cast<int>(rows.size()), ds.n_cols());
  out.labels.resize(static_cast<int>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int r = rows[i];
    if (r < 0 || r >= ds.n_rows()) {
      throw DataError("row index " + std::to_string(r) + " out of range");
    }
    out.features.row(static_cast<int>(i)) = ds.features.row(r);
    out.labels(static_cast<int>(i)) = ds.labels(r);
  }
  out.task = ds.task;
  out.n_classes = ds.n_classes;
  out.feature_names = ds.feature_names;
  out.categorical_cols = ds.categorical_cols;
  out.category_levels = ds.category_levels;
  out.label_levels = ds.label_levels;
  return out;
}

Dataset bootstrap(const Dataset& ds, Rng& rng) {
  std::vector<int> rows(ds.n_rows());
  for (auto& r : rows) {
    r = rng.uniform_index(ds.n_rows());
  }
  return take_rows(ds, rows);
}

}  // namespace boostforest
