#include "boostforest/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <thread>

namespace boostforest {

namespace {

// One seed per (dataset, algorithm, repeat, fold) training run, mixed in
// stages so the value is independent of execution order.
std::uint64_t cell_seed(std::uint64_t master, int dataset, int algorithm,
                        int repeat, int fold) {
  std::uint64_t s = child_seed(master, static_cast<std::uint64_t>(dataset));
  s = child_seed(s, static_cast<std::uint64_t>(algorithm));
  s = child_seed(s, static_cast<std::uint64_t>(repeat));
  return child_seed(s, static_cast<std::uint64_t>(fold));
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Run `count` independent jobs, possibly across threads; job i writes only
// to its own output slot.
template <typename Job>
void run_jobs(int count, int threads, const Job& job) {
  const int n_threads = std::max(1, std::min(threads, count));
  if (n_threads == 1) {
    for (int i = 0; i < count; ++i) {
      job(i);
    }
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(n_threads);
  std::vector<std::thread> workers;
  for (int t = 0; t < n_threads; ++t) {
    workers.emplace_back([&, t] {
      try {
        while (true) {
          const int i = next.fetch_add(1);
          if (i >= count) {
            return;
          }
          job(i);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) {
    w.join();
  }
  for (const auto& err : errors) {
    if (err) {
      std::rethrow_exception(err);
    }
  }
}

// Train on one fold and score the held-out fold. The preprocessing transform
// is refitted from scratch on the training rows only.
double evaluate_cell(const Dataset& data, const AlgorithmConfig& algorithm,
                     const CvPlan& plan, int repeat, int fold,
                     std::uint64_t seed) {
  const Dataset train = take_rows(data, plan.train_indices(repeat, fold));
  const Dataset test = take_rows(data, plan.test_indices(repeat, fold));

  std::vector<int> predicted;
  Eigen::VectorXd predicted_values;
  PreprocessState pre;

  if (algorithm.single_cart) {
    pre = fit_preprocess(train);
    const Dataset train_t = apply_preprocess(pre, train);
    const Dataset test_t = apply_preprocess(pre, test);
    Rng rng(seed);
    CartConfig config;
    config.max_depth = algorithm.cart.max_depth;
    config.min_samples_leaf = algorithm.cart.min_samples_leaf;
    const CartTree tree =
        fit_cart(train_t.features, train_t.labels, train_t.task,
                 train_t.n_classes, config, rng);
    if (data.task == Task::regression) {
      predicted_values.resize(test_t.n_rows());
      for (int r = 0; r < test_t.n_rows(); ++r) {
        predicted_values(r) =
            predict_cart(tree, test_t.features.row(r).transpose())(0);
      }
    } else {
      for (int r = 0; r < test_t.n_rows(); ++r) {
        const Eigen::VectorXd freq =
            predict_cart(tree, test_t.features.row(r).transpose());
        int best = 0;
        for (int c = 1; c < freq.size(); ++c) {
          if (freq(c) > freq(best)) {
            best = c;
          }
        }
        predicted.push_back(best);
      }
    }
  } else {
    ForestConfig config = algorithm.forest;
    config.seed = seed;
    config.threads = 1;  // parallelism lives at the cell level
    const Forest forest = train_forest(train, config);
    pre = forest.preprocess;
    const std::vector<Prediction> preds = predict_forest(forest, test);
    if (data.task == Task::regression) {
      predicted_values.resize(test.n_rows());
      for (int r = 0; r < test.n_rows(); ++r) {
        predicted_values(r) = preds[r].value;
      }
    } else {
      for (const auto& p : preds) {
        predicted.push_back(p.label);
      }
    }
  }

  if (data.task == Task::regression) {
    Eigen::VectorXd truth(test.n_rows());
    for (int r = 0; r < test.n_rows(); ++r) {
      truth(r) = pre.normalize_label(test.labels(r));
    }
    return rmse(truth, predicted_values);
  }
  std::vector<int> truth(test.n_rows());
  for (int r = 0; r < test.n_rows(); ++r) {
    truth[r] = static_cast<int>(test.labels(r));
  }
  return accuracy(truth, predicted);
}

}  // namespace

std::vector<int> CvPlan::test_indices(int repeat, int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < folds[repeat].size(); ++i) {
    if (folds[repeat][i] == fold) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

std::vector<int> CvPlan::train_indices(int repeat, int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < folds[repeat].size(); ++i) {
    if (folds[repeat][i] != fold) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

CvPlan make_cv_plan(int n_rows, int n_repeats, int n_folds,
                    std::uint64_t seed,
                    const std::optional<Eigen::VectorXd>& labels) {
  if (n_folds < 2) {
    throw ConfigError("cross-validation needs at least 2 folds");
  }
  if (n_repeats < 1) {
    throw ConfigError("cross-validation needs at least 1 repeat");
  }
  if (n_rows < n_folds) {
    throw ConfigError("cross-validation needs at least one row per fold");
  }
  if (labels && labels->size() != n_rows) {
    throw ConfigError("cross-validation label size mismatch");
  }

  CvPlan plan;
  plan.n_repeats = n_repeats;
  plan.n_folds = n_folds;
  plan.folds.assign(n_repeats, std::vector<int>(n_rows, 0));

  for (int r = 0; r < n_repeats; ++r) {
    Rng rng(child_seed(seed, static_cast<std::uint64_t>(r)));
    auto& fold_of = plan.folds[r];
    if (!labels) {
      const std::vector<int> perm = rng.sample_indices(n_rows, n_rows);
      for (int i = 0; i < n_rows; ++i) {
        fold_of[perm[i]] = i % n_folds;
      }
      continue;
    }
    // Stratified: shuffle within each class, then deal round-robin with a
    // cursor that continues across classes so overall fold sizes balance.
    std::map<int, std::vector<int>> by_class;
    for (int i = 0; i < n_rows; ++i) {
      by_class[static_cast<int>((*labels)(i))].push_back(i);
    }
    int cursor = 0;
    for (auto& [cls, rows] : by_class) {
      const std::vector<int> perm =
          rng.sample_indices(static_cast<int>(rows.size()),
                             static_cast<int>(rows.size()));
      for (const int p : perm) {
        fold_of[rows[p]] = cursor % n_folds;
        ++cursor;
      }
    }
  }
  return plan;
}

double accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
  if (truth.size() != pred.size() || truth.empty()) {
    throw std::invalid_argument("accuracy: size mismatch or empty");
  }
  int hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == pred[i]) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / truth.size();
}

double rmse(const Eigen::Ref<const Eigen::VectorXd>& truth,
            const Eigen::Ref<const Eigen::VectorXd>& pred) {
  if (truth.size() != pred.size() || truth.size() == 0) {
    throw std::invalid_argument("rmse: size mismatch or empty");
  }
  return std::sqrt((truth - pred).squaredNorm() / truth.size());
}

std::vector<double> rank_scores(const std::vector<double>& means,
                                bool higher_is_better) {
  const int n = static_cast<int>(means.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return higher_is_better ? means[a] > means[b] : means[a] < means[b];
  });
  std::vector<double> ranks(n, 0.0);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && means[order[j + 1]] == means[order[i]]) {
      ++j;
    }
    const double shared = (static_cast<double>(i) + j) / 2.0 + 1.0;
    for (int k = i; k <= j; ++k) {
      ranks[order[k]] = shared;
    }
    i = j + 1;
  }
  return ranks;
}

ResultTable run_benchmark(const std::vector<NamedDataset>& datasets,
                          const std::vector<AlgorithmConfig>& algorithms,
                          const CvParams& params) {
  if (datasets.empty() || algorithms.empty()) {
    throw ConfigError("benchmark needs at least one dataset and algorithm");
  }

  std::vector<CvPlan> plans;
  plans.reserve(datasets.size());
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const Dataset& data = datasets[d].data;
    std::optional<Eigen::VectorXd> labels;
    if (data.task != Task::regression) {
      labels = data.labels;
    }
    plans.push_back(make_cv_plan(data.n_rows(), params.n_repeats,
                                 params.n_folds,
                                 child_seed(params.seed, d), labels));
  }

  struct Cell {
    int dataset, algorithm, repeat, fold;
  };
  std::vector<Cell> cells;
  for (int d = 0; d < static_cast<int>(datasets.size()); ++d) {
    for (int a = 0; a < static_cast<int>(algorithms.size()); ++a) {
      for (int r = 0; r < params.n_repeats; ++r) {
        for (int f = 0; f < params.n_folds; ++f) {
          cells.push_back(Cell{d, a, r, f});
        }
      }
    }
  }
  std::vector<double> values(cells.size(), 0.0);
  run_jobs(static_cast<int>(cells.size()), params.threads, [&](int i) {
    const Cell& c = cells[i];
    values[i] = evaluate_cell(
        datasets[c.dataset].data, algorithms[c.algorithm], plans[c.dataset],
        c.repeat, c.fold,
        cell_seed(params.seed, c.dataset, c.algorithm, c.repeat, c.fold));
  });

  ResultTable table;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    const Task task = datasets[c.dataset].data.task;
    table.rows.push_back(FoldRow{
        datasets[c.dataset].name, algorithms[c.algorithm].name, c.repeat,
        c.fold, task == Task::regression ? "rmse" : "accuracy", values[i]});
  }

  for (int d = 0; d < static_cast<int>(datasets.size()); ++d) {
    std::vector<double> means;
    std::vector<double> stds;
    for (int a = 0; a < static_cast<int>(algorithms.size()); ++a) {
      double sum = 0.0;
      double sum_sq = 0.0;
      int count = 0;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].dataset == d && cells[i].algorithm == a) {
          sum += values[i];
          sum_sq += values[i] * values[i];
          ++count;
        }
      }
      const double mean = sum / count;
      means.push_back(mean);
      stds.push_back(std::sqrt(std::max(0.0, sum_sq / count - mean * mean)));
    }
    const bool higher_better = datasets[d].data.task != Task::regression;
    const std::vector<double> ranks = rank_scores(means, higher_better);
    for (int a = 0; a < static_cast<int>(algorithms.size()); ++a) {
      table.aggregates.push_back(AggregateRow{datasets[d].name,
                                              algorithms[a].name, means[a],
                                              stds[a], ranks[a]});
    }
  }
  return table;
}

void write_fold_csv(const ResultTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write results file '" + path + "'");
  }
  out << "dataset,algorithm,repeat,fold,metric,value\n";
  for (const auto& row : table.rows) {
    out << row.dataset << ',' << row.algorithm << ',' << row.repeat << ','
        << row.fold << ',' << row.metric << ',' << format_value(row.value)
        << '\n';
  }
}

void write_aggregate_csv(const ResultTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write results file '" + path + "'");
  }
  out << "dataset,algorithm,mean,std,rank\n";
  for (const auto& row : table.aggregates) {
    out << row.dataset << ',' << row.algorithm << ','
        << format_value(row.mean) << ',' << format_value(row.stddev) << ','
        << format_value(row.rank) << '\n';
  }
}

std::vector<SweepRow> sweep_curve(const NamedDataset& dataset,
                                  const AlgorithmConfig& algorithm,
                                  SweepKnob knob,
                                  const std::vector<int>& values,
                                  const CvParams& params) {
  if (values.empty()) {
    throw ConfigError("sweep needs at least one knob value");
  }
  if (algorithm.single_cart) {
    throw ConfigError("sweep requires an ensemble algorithm");
  }
  for (const int v : values) {
    if (v < 1) {
      throw ConfigError("sweep knob values must be >= 1");
    }
  }

  const Dataset& data = dataset.data;
  std::optional<Eigen::VectorXd> labels;
  if (data.task != Task::regression) {
    labels = data.labels;
  }
  const CvPlan plan =
      make_cv_plan(data.n_rows(), params.n_repeats, params.n_folds,
                   child_seed(params.seed, 0), labels);

  const int n_cells = params.n_repeats * params.n_folds;
  const int n_values = static_cast<int>(values.size());
  // metric[cell * n_values + v]
  std::vector<double> metric(static_cast<std::size_t>(n_cells) * n_values);

  run_jobs(n_cells, params.threads, [&](int cell) {
    const int repeat = cell / params.n_folds;
    const int fold = cell % params.n_folds;
    const std::uint64_t seed =
        cell_seed(params.seed, 0, 0, repeat, fold);

    const Dataset train = take_rows(data, plan.train_indices(repeat, fold));
    const Dataset test = take_rows(data, plan.test_indices(repeat, fold));

    const auto score = [&](const Forest& forest, int first_k) {
      const std::vector<Prediction> preds =
          predict_forest(forest, test, first_k);
      if (data.task == Task::regression) {
        Eigen::VectorXd truth(test.n_rows());
        Eigen::VectorXd predicted(test.n_rows());
        for (int r = 0; r < test.n_rows(); ++r) {
          truth(r) = forest.preprocess.normalize_label(test.labels(r));
          predicted(r) = preds[r].value;
        }
        return rmse(truth, predicted);
      }
      std::vector<int> truth(test.n_rows());
      std::vector<int> predicted(test.n_rows());
      for (int r = 0; r < test.n_rows(); ++r) {
        truth[r] = static_cast<int>(test.labels(r));
        predicted[r] = preds[r].label;
      }
      return accuracy(truth, predicted);
    };

    if (knob == SweepKnob::n_estimators) {
      // One ensemble at the largest size; smaller sizes are its prefixes.
      ForestConfig config = algorithm.forest;
      config.seed = seed;
      config.threads = 1;
      config.n_estimators = *std::max_element(values.begin(), values.end());
      const Forest forest = train_forest(train, config);
      for (int v = 0; v < n_values; ++v) {
        metric[static_cast<std::size_t>(cell) * n_values + v] =
            score(forest, values[v]);
      }
    } else {
      for (int v = 0; v < n_values; ++v) {
        ForestConfig config = algorithm.forest;
        config.seed = seed;  // same seed: curves differ only in the knob
        config.threads = 1;
        config.max_num_leaf = values[v];
        const Forest forest = train_forest(train, config);
        metric[static_cast<std::size_t>(cell) * n_values + v] =
            score(forest, -1);
      }
    }
  });

  std::vector<SweepRow> rows;
  for (int v = 0; v < n_values; ++v) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int cell = 0; cell < n_cells; ++cell) {
      const double m = metric[static_cast<std::size_t>(cell) * n_values + v];
      sum += m;
      sum_sq += m * m;
    }
    const double mean = sum / n_cells;
    rows.push_back(SweepRow{
        values[v], mean,
        std::sqrt(std::max(0.0, sum_sq / n_cells - mean * mean))});
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write results file '" + path + "'");
  }
  out << "value,mean,std\n";
  for (const auto& row : rows) {
    out << row.value << ',' << format_value(row.mean) << ','
        << format_value(row.stddev) << '\n';
  }
}

}  // namespace boostforest
