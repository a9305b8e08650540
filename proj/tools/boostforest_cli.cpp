// Command-line front end: train/predict/cv/sweep over CSV datasets.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "boostforest/eval.hpp"
#include "boostforest/forest.hpp"

namespace bf = boostforest;

namespace {

struct DataFlags {
  std::string path;
  int label_col = -1;
  std::vector<int> categorical_cols;
  std::string task;
};

struct ModelFlags {
  std::string base = "boosttree-ridge";
  int n_estimators = 100;
  std::vector<int> pool_min_samples_leaf;
  std::vector<double> pool_lambda;
  std::vector<int> pool_elm_hidden;
  std::vector<double> pool_svr_c;
  std::vector<double> pool_svr_eps;
  std::vector<int> pool_max_leaves;
  int max_leaves = 0;  // 0 = unset
  bool no_weight_filter = false;
  std::string vote = "prob";
  std::uint64_t seed = 0;
  int threads = 1;
};

void add_data_flags(CLI::App* cmd, DataFlags& flags) {
  cmd->add_option("--data", flags.path, "CSV file")->required();
  cmd->add_option("--label-col", flags.label_col,
                  "zero-based label column index")
      ->required();
  cmd->add_option("--categorical-cols", flags.categorical_cols,
                  "zero-based categorical feature columns")
      ->delimiter(',');
  cmd->add_option("--task", flags.task, "prediction task")
      ->required()
      ->check(CLI::IsMember({"reg", "binary", "multiclass"}));
}

void add_model_flags(CLI::App* cmd, ModelFlags& flags) {
  cmd->add_option("--base", flags.base, "base learner")
      ->check(CLI::IsMember({"boosttree-ridge", "boosttree-elm",
                             "boosttree-svr", "cart"}));
  cmd->add_option("--n-estimators", flags.n_estimators, "ensemble size");
  cmd->add_option("--pool-min-samples-leaf", flags.pool_min_samples_leaf,
                  "candidate minimum leaf sizes")
      ->delimiter(',');
  cmd->add_option("--pool-lambda", flags.pool_lambda,
                  "candidate ridge regularizers")
      ->delimiter(',');
  cmd->add_option("--pool-elm-hidden", flags.pool_elm_hidden,
                  "candidate hidden-node counts")
      ->delimiter(',');
  cmd->add_option("--pool-svr-c", flags.pool_svr_c, "candidate svr C values")
      ->delimiter(',');
  cmd->add_option("--pool-svr-eps", flags.pool_svr_eps,
                  "candidate svr epsilon values")
      ->delimiter(',');
  cmd->add_option("--pool-max-leaves", flags.pool_max_leaves,
                  "candidate per-tree leaf caps")
      ->delimiter(',');
  cmd->add_option("--max-leaves", flags.max_leaves,
                  "fixed per-tree leaf cap (overrides the pool)");
  cmd->add_flag("--no-weight-filter", flags.no_weight_filter,
                "keep low-curvature samples in classification refits");
  cmd->add_option("--vote", flags.vote, "classification aggregation")
      ->check(CLI::IsMember({"prob", "hard"}));
  cmd->add_option("--seed", flags.seed, "master random seed");
  cmd->add_option("--threads", flags.threads, "worker threads");
}

bf::CsvSchema make_schema(const DataFlags& flags) {
  bf::CsvSchema schema;
  schema.label_col = flags.label_col;
  schema.categorical_cols = flags.categorical_cols;
  schema.task = bf::task_from_string(flags.task);
  return schema;
}

bf::ForestConfig make_config(const ModelFlags& flags) {
  if (flags.n_estimators < 1) {
    throw bf::ConfigError("--n-estimators must be >= 1");
  }
  if (flags.threads < 1) {
    throw bf::ConfigError("--threads must be >= 1");
  }
  if (flags.max_leaves < 0) {
    throw bf::ConfigError("--max-leaves must be >= 1 when given");
  }
  bf::ForestConfig config;
  config.base = bf::base_kind_from_string(flags.base);
  config.n_estimators = flags.n_estimators;
  config.pool = bf::default_pool(config.base);
  if (!flags.pool_min_samples_leaf.empty()) {
    config.pool.min_samples_leaf = flags.pool_min_samples_leaf;
  }
  if (!flags.pool_lambda.empty()) {
    config.pool.lambda = flags.pool_lambda;
  }
  if (!flags.pool_elm_hidden.empty()) {
    config.pool.elm_hidden = flags.pool_elm_hidden;
  }
  if (!flags.pool_svr_c.empty()) {
    config.pool.svr_c = flags.pool_svr_c;
  }
  if (!flags.pool_svr_eps.empty()) {
    config.pool.svr_epsilon = flags.pool_svr_eps;
  }
  if (!flags.pool_max_leaves.empty()) {
    config.pool.max_num_leaf = flags.pool_max_leaves;
  }
  if (flags.max_leaves > 0) {
    config.max_num_leaf = flags.max_leaves;
  }
  config.weight_filter = !flags.no_weight_filter;
  config.hard_vote = flags.vote == "hard";
  config.seed = flags.seed;
  config.threads = flags.threads;
  return config;
}

std::string dataset_name(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

std::string aggregate_path(const std::string& out) {
  const std::filesystem::path p(out);
  std::filesystem::path agg = p.parent_path();
  agg /= p.stem().string() + "_aggregate" + p.extension().string();
  return agg.string();
}

double mean_leaves(const bf::Forest& forest) {
  double total = 0.0;
  if (forest.base == bf::BaseKind::cart) {
    for (const auto& tree : forest.carts) {
      total += tree.num_leaves();
    }
  } else {
    for (const auto& tree : forest.trees) {
      total += tree.num_leaf;
    }
  }
  return total / forest.size();
}

// Training-set metric of a fitted forest: accuracy, or RMSE in normalized
// label units.
std::pair<std::string, double> train_metric(const bf::Forest& forest,
                                            const bf::Dataset& raw) {
  const std::vector<bf::Prediction> preds = bf::predict_forest(forest, raw);
  if (forest.task == bf::Task::regression) {
    Eigen::VectorXd truth(raw.n_rows());
    Eigen::VectorXd predicted(raw.n_rows());
    for (int r = 0; r < raw.n_rows(); ++r) {
      truth(r) = forest.preprocess.normalize_label(raw.labels(r));
      predicted(r) = preds[r].value;
    }
    return {"rmse", bf::rmse(truth, predicted)};
  }
  std::vector<int> truth(raw.n_rows());
  std::vector<int> predicted(raw.n_rows());
  for (int r = 0; r < raw.n_rows(); ++r) {
    truth[r] = static_cast<int>(raw.labels(r));
    predicted[r] = preds[r].label;
  }
  return {"accuracy", bf::accuracy(truth, predicted)};
}

int cmd_train(const DataFlags& data_flags, const ModelFlags& model_flags,
              const std::string& model_path) {
  const bf::ForestConfig config = make_config(model_flags);
  const bf::Dataset data = bf::load_csv(data_flags.path, make_schema(data_flags));
  bf::Forest forest = bf::train_forest(data, config);
  forest.schema = make_schema(data_flags);
  bf::save_model(forest, model_path);

  const auto [metric_name, metric_value] = train_metric(forest, data);
  nlohmann::json summary;
  summary["command"] = "train";
  summary["model"] = model_path;
  summary["n_trees"] = forest.size();
  summary["mean_leaves"] = mean_leaves(forest);
  summary["train_metric"] = metric_name;
  summary["train_value"] = metric_value;
  summary["seed"] = model_flags.seed;
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out_path) {
  const bf::Forest forest = bf::load_model(model_path);
  const bf::Dataset data = bf::load_csv(data_path, forest.schema);
  const std::vector<bf::Prediction> preds = bf::predict_forest(forest, data);

  std::ofstream out(out_path);
  if (!out) {
    throw bf::DataError("cannot write predictions file '" + out_path + "'");
  }
  out.precision(17);
  if (forest.task == bf::Task::regression) {
    out << "prediction\n";
    for (const auto& p : preds) {
      out << forest.preprocess.unscale_label(p.value) << '\n';
    }
  } else {
    out << "label";
    for (const auto& level : forest.label_levels) {
      out << ",prob_" << level;
    }
    out << '\n';
    for (const auto& p : preds) {
      out << forest.label_levels[p.label];
      for (int c = 0; c < p.probabilities.size(); ++c) {
        out << ',' << p.probabilities(c);
      }
      out << '\n';
    }
  }
  std::cout << "wrote " << preds.size() << " predictions to " << out_path
            << '\n';
  return 0;
}

int cmd_cv(const DataFlags& data_flags, const ModelFlags& model_flags,
           int repeats, int folds, const std::string& out_path) {
  if (repeats < 1) {
    throw bf::ConfigError("--repeats must be >= 1");
  }
  if (folds < 2) {
    throw bf::ConfigError("--folds must be >= 2");
  }
  bf::AlgorithmConfig algorithm;
  algorithm.name = model_flags.base;
  algorithm.forest = make_config(model_flags);

  std::vector<bf::NamedDataset> datasets;
  datasets.push_back(
      {dataset_name(data_flags.path),
       bf::load_csv(data_flags.path, make_schema(data_flags))});

  bf::CvParams params;
  params.n_repeats = repeats;
  params.n_folds = folds;
  params.seed = model_flags.seed;
  params.threads = model_flags.threads;

  const bf::ResultTable table = bf::run_benchmark(datasets, {algorithm}, params);
  bf::write_fold_csv(table, out_path);
  const std::string agg_path = aggregate_path(out_path);
  bf::write_aggregate_csv(table, agg_path);

  std::cout << "dataset,algorithm,mean,std,rank\n";
  for (const auto& row : table.aggregates) {
    std::cout << row.dataset << ',' << row.algorithm << ',' << row.mean << ','
              << row.stddev << ',' << row.rank << '\n';
  }
  std::cout << "wrote " << out_path << " and " << agg_path << '\n';
  return 0;
}

int cmd_sweep(const DataFlags& data_flags, const ModelFlags& model_flags,
              int repeats, int folds, const std::string& knob,
              const std::vector<int>& values, const std::string& out_path) {
  if (repeats < 1) {
    throw bf::ConfigError("--repeats must be >= 1");
  }
  if (folds < 2) {
    throw bf::ConfigError("--folds must be >= 2");
  }
  bf::SweepKnob sweep_knob;
  if (knob == "n_estimators") {
    sweep_knob = bf::SweepKnob::n_estimators;
  } else if (knob == "max_num_leaf") {
    sweep_knob = bf::SweepKnob::max_num_leaf;
  } else {
    throw bf::ConfigError("--knob must be n_estimators or max_num_leaf");
  }

  bf::AlgorithmConfig algorithm;
  algorithm.name = model_flags.base;
  algorithm.forest = make_config(model_flags);

  bf::NamedDataset dataset{
      dataset_name(data_flags.path),
      bf::load_csv(data_flags.path, make_schema(data_flags))};

  bf::CvParams params;
  params.n_repeats = repeats;
  params.n_folds = folds;
  params.seed = model_flags.seed;
  params.threads = model_flags.threads;

  const std::vector<bf::SweepRow> rows =
      bf::sweep_curve(dataset, algorithm, sweep_knob, values, params);
  bf::write_sweep_csv(rows, out_path);

  std::cout << "value,mean,std\n";
  for (const auto& row : rows) {
    std::cout << row.value << ',' << row.mean << ',' << row.stddev << '\n';
  }
  std::cout << "wrote " << out_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bagged boosted-model-tree ensembles over CSV datasets"};
  app.require_subcommand(1);

  DataFlags data_flags;
  ModelFlags model_flags;
  std::string model_path;
  std::string out_path;
  int repeats = 5;
  int folds = 2;
  std::string knob;
  std::vector<int> values;

  CLI::App* train = app.add_subcommand("train", "fit an ensemble");
  add_data_flags(train, data_flags);
  add_model_flags(train, model_flags);
  train->add_option("--model", model_path, "output model file")->required();

  CLI::App* predict = app.add_subcommand("predict", "apply a saved model");
  predict->add_option("--model", model_path, "model file")->required();
  predict->add_option("--data", data_flags.path, "CSV file")->required();
  predict->add_option("--out", out_path, "output predictions CSV")->required();

  CLI::App* cv = app.add_subcommand("cv", "cross-validated evaluation");
  add_data_flags(cv, data_flags);
  add_model_flags(cv, model_flags);
  cv->add_option("--repeats", repeats, "CV repetitions");
  cv->add_option("--folds", folds, "folds per repetition");
  cv->add_option("--out", out_path, "output fold-level CSV")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "hyper-parameter curve");
  add_data_flags(sweep, data_flags);
  add_model_flags(sweep, model_flags);
  sweep->add_option("--repeats", repeats, "CV repetitions");
  sweep->add_option("--folds", folds, "folds per repetition");
  sweep->add_option("--knob", knob, "n_estimators or max_num_leaf")
      ->required();
  sweep->add_option("--values", values, "knob values to evaluate")
      ->required()
      ->delimiter(',');
  sweep->add_option("--out", out_path, "output curve CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) {
      return cmd_train(data_flags, model_flags, model_path);
    }
    if (*predict) {
      return cmd_predict(model_path, data_flags.path, out_path);
    }
    if (*cv) {
      return cmd_cv(data_flags, model_flags, repeats, folds, out_path);
    }
    return cmd_sweep(data_flags, model_flags, repeats, folds, knob, values,
                     out_path);
  } catch (const bf::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const bf::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const bf::ModelIoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
