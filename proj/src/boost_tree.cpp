#include "boostforest/boost_tree.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace boostforest {

namespace {

// Fixed additive damping of the parent term of the split gain.
constexpr double kParentDamping = 1e-4;

Eigen::MatrixXd gather_rows(const Eigen::Ref<const Eigen::MatrixXd>& X,
                            const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<int>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<int>(i)) = X.row(rows[i]);
  }
  return out;
}

Eigen::VectorXd gather(const Eigen::Ref<const Eigen::VectorXd>& v,
                       const std::vector<int>& rows) {
  Eigen::VectorXd out(static_cast<int>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out(static_cast<int>(i)) = v(rows[i]);
  }
  return out;
}

void validate_grow_config(Task task, int n_classes, const GrowConfig& config) {
  const auto& pool = config.pool;
  if (pool.min_samples_leaf.empty()) {
    throw ConfigError("min_samples_leaf pool is empty");
  }
  for (const int m : pool.min_samples_leaf) {
    if (m < 1) throw ConfigError("min_samples_leaf values must be >= 1");
  }
  if (config.node_kind != NodeKind::svr && pool.lambda.empty()) {
    throw ConfigError("lambda pool is empty");
  }
  for (const double l : pool.lambda) {
    if (l <= 0.0) throw ConfigError("lambda values must be positive");
  }
  if (config.node_kind == NodeKind::elm && pool.elm_hidden.empty()) {
    throw ConfigError("elm base needs a hidden-node pool");
  }
  if (config.node_kind == NodeKind::svr) {
    if (pool.svr_c.empty()) throw ConfigError("svr base needs a C pool");
    if (pool.svr_epsilon.empty()) {
      throw ConfigError("svr base needs an epsilon pool");
    }
    for (const double c : pool.svr_c) {
      if (c <= 0.0) throw ConfigError("svr C values must be positive");
    }
  }
  if (task != Task::regression && config.node_kind != NodeKind::ridge) {
    throw ConfigError(
        "elm and svr node models support regression tasks only");
  }
  if (task == Task::multiclass && n_classes < 3) {
    throw ConfigError("multiclass task needs at least 3 classes");
  }
  if (config.max_num_leaf && *config.max_num_leaf < 1) {
    throw ConfigError("max_num_leaf must be >= 1");
  }
}

NodeModel zero_model(Task task, int n_features, int n_classes) {
  if (task == Task::multiclass) {
    MultiLinearModel m;
    m.per_class.assign(n_classes, LinearModel::zero(n_features));
    return m;
  }
  return LinearModel::zero(n_features);
}

// Effective ridge weight on the gain denominators: the sampled lambda for
// ridge/elm nodes, 1/(2C) for svr nodes.
double denominator_reg(NodeKind kind, double reg) {
  return kind == NodeKind::svr ? 1.0 / (2.0 * reg) : reg;
}

// Model-complexity penalty subtracted from the bias gain once the child
// models are fitted.
double complexity_penalty(NodeKind kind, double reg, const NodeModel& model) {
  return denominator_reg(kind, reg) * node_coef_norm2(model);
}

struct LeafState {
  int node = 0;              // index into tree.nodes
  std::vector<int> samples;  // row indices into the training matrix
  Eigen::MatrixXd f;         // accumulated model outputs, n x n_outputs
  double impurity = 0.0;
  bool open = true;  // still eligible for a split attempt
};

}  // namespace

Eigen::VectorXd predict_node(const NodeModel& model,
                             const Eigen::Ref<const Eigen::VectorXd>& x) {
  return std::visit(
      [&x](const auto& m) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MultiLinearModel>) {
          Eigen::VectorXd out(static_cast<int>(m.per_class.size()));
          for (std::size_t j = 0; j < m.per_class.size(); ++j) {
            out(static_cast<int>(j)) = m.per_class[j].predict(x);
          }
          return out;
        } else {
          Eigen::VectorXd out(1);
          out(0) = m.predict(x);
          return out;
        }
      },
      model);
}

double node_coef_norm2(const NodeModel& model) {
  return std::visit(
      [](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MultiLinearModel>) {
          double total = 0.0;
          for (const auto& lm : m.per_class) {
            total += lm.coef_norm2();
          }
          return total;
        } else {
          return m.coef_norm2();
        }
      },
      model);
}

void center_multiclass(std::vector<LinearModel>& models) {
  const int j = static_cast<int>(models.size());
  if (j < 3) {
    throw std::invalid_argument("center_multiclass: needs >= 3 models");
  }
  const Eigen::Index d = models[0].w.size();
  for (const auto& m : models) {
    if (m.w.size() != d) {
      throw std::invalid_argument("center_multiclass: dimension mismatch");
    }
  }
  Eigen::VectorXd w_mean = Eigen::VectorXd::Zero(d);
  double b_mean = 0.0;
  for (const auto& m : models) {
    w_mean += m.w;
    b_mean += m.b;
  }
  w_mean /= j;
  b_mean /= j;
  const double scale = static_cast<double>(j - 1) / j;
  for (auto& m : models) {
    m.w = scale * (m.w - w_mean);
    m.b = scale * (m.b - b_mean);
  }
}

Eigen::VectorXd predict_tree(const BoostTree& tree,
                             const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != tree.n_features) {
    throw std::invalid_argument("predict_tree: feature size mismatch");
  }
  const int n_outputs = tree.task == Task::multiclass ? tree.n_classes : 1;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n_outputs);
  int node = 0;
  while (true) {
    acc += predict_node(tree.nodes[node].model, x);
    if (tree.nodes[node].is_leaf()) {
      return acc;
    }
    const auto& split = tree.nodes[node].split;
    node = x(split.feature) <= split.threshold ? tree.nodes[node].left
                                               : tree.nodes[node].right;
  }
}

std::vector<double> enumerate_thresholds(
    const std::vector<double>& sorted_values) {
  std::vector<double> distinct;
  for (const double v : sorted_values) {
    if (distinct.empty() || v != distinct.back()) {
      distinct.push_back(v);
    }
  }
  if (distinct.size() < 2) {
    return {};
  }
  if (distinct.size() <= 100) {
    return distinct;
  }
  const double lo = distinct.front();
  const double hi = distinct.back();
  std::vector<double> out(100);
  for (int i = 0; i < 100; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / 99.0;
  }
  return out;
}

double split_gain_bias(double g_left, double h_left, double g_right,
                       double h_right, double reg_left, double reg_right) {
  const double g_parent = g_left + g_right;
  const double h_parent = h_left + h_right;
  return 0.5 * (g_left * g_left / (h_left + reg_left) +
                g_right * g_right / (h_right + reg_right) -
                g_parent * g_parent / (h_parent + kParentDamping));
}

std::optional<SplitCandidate> find_best_split(
    const Eigen::Ref<const Eigen::MatrixXd>& X,
    const std::vector<int>& samples, const std::vector<GradHess>& gh,
    NodeKind kind, const ParameterPool& pool, bool reg_per_candidate,
    Rng& rng) {
  const int n = static_cast<int>(samples.size());
  const int d = static_cast<int>(X.cols());
  const int n_outputs = static_cast<int>(gh.size());
  if (n < 2 || n_outputs == 0) {
    return std::nullopt;
  }
  const std::vector<double>& reg_pool =
      kind == NodeKind::svr ? pool.svr_c : pool.lambda;

  const int min_left = rng.pick(pool.min_samples_leaf);
  const int min_right = rng.pick(pool.min_samples_leaf);
  const int n_scan = static_cast<int>(
      std::ceil(std::sqrt(static_cast<double>(d))));
  const std::vector<int> features = rng.sample_indices(d, n_scan);

  double shared_reg_left = 0.0;
  double shared_reg_right = 0.0;
  if (!reg_per_candidate) {
    shared_reg_left = rng.pick(reg_pool);
    shared_reg_right = rng.pick(reg_pool);
  }

  std::optional<SplitCandidate> best;
  std::vector<double> values(n);
  std::vector<int> order(n);

  for (const int feature : features) {
    for (int i = 0; i < n; ++i) {
      values[i] = X(samples[i], feature);
      order[i] = i;
    }
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return values[a] < values[b]; });
    std::vector<double> sorted(n);
    for (int i = 0; i < n; ++i) {
      sorted[i] = values[order[i]];
    }
    const std::vector<double> thresholds = enumerate_thresholds(sorted);
    if (thresholds.empty()) {
      continue;
    }

    // Prefix sums of g and h per output in sorted order; a threshold s
    // places the first upper_bound(s) sorted samples on the left.
    Eigen::MatrixXd g_prefix = Eigen::MatrixXd::Zero(n + 1, n_outputs);
    Eigen::MatrixXd h_prefix = Eigen::MatrixXd::Zero(n + 1, n_outputs);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n_outputs; ++j) {
        g_prefix(i + 1, j) = g_prefix(i, j) + gh[j].g(order[i]);
        h_prefix(i + 1, j) = h_prefix(i, j) + gh[j].h(order[i]);
      }
    }

    for (const double threshold : thresholds) {
      const int n_left = static_cast<int>(
          std::upper_bound(sorted.begin(), sorted.end(), threshold) -
          sorted.begin());
      const int n_right = n - n_left;
      if (n_left < min_left || n_right < min_right) {
        continue;
      }
      double reg_left = shared_reg_left;
      double reg_right = shared_reg_right;
      if (reg_per_candidate) {
        reg_left = rng.pick(reg_pool);
        reg_right = rng.pick(reg_pool);
      }
      const double den_left = denominator_reg(kind, reg_left);
      const double den_right = denominator_reg(kind, reg_right);
      double gain = 0.0;
      for (int j = 0; j < n_outputs; ++j) {
        const double gl = g_prefix(n_left, j);
        const double hl = h_prefix(n_left, j);
        const double gr = g_prefix(n, j) - gl;
        const double hr = h_prefix(n, j) - hl;
        gain += split_gain_bias(gl, hl, gr, hr, den_left, den_right);
      }
      if (!best || gain > best->gain) {
        best = SplitCandidate{feature, threshold, gain, reg_left, reg_right};
      }
    }
  }
  if (!best || best->gain <= 0.0) {
    return std::nullopt;
  }
  return best;
}

NodeModel fit_node_model(Task task, const Eigen::Ref<const Eigen::MatrixXd>& X,
                         const Eigen::Ref<const Eigen::VectorXd>& y,
                         const std::vector<int>& samples,
                         const Eigen::Ref<const Eigen::MatrixXd>& f_prev,
                         const NodeFitParams& params, int n_classes,
                         Rng& rng) {
  if (samples.empty()) {
    throw std::invalid_argument("fit_node_model: no samples");
  }
  if (f_prev.rows() != static_cast<Eigen::Index>(samples.size())) {
    throw std::invalid_argument("fit_node_model: f_prev row mismatch");
  }
  const Eigen::MatrixXd x_sub = gather_rows(X, samples);
  const Eigen::VectorXd y_sub = gather(y, samples);

  if (task == Task::regression) {
    const Eigen::VectorXd residual = y_sub - f_prev.col(0);
    switch (params.kind) {
      case NodeKind::ridge:
        return fit_ridge(x_sub, residual, params.reg);
      case NodeKind::elm:
        return fit_elm(x_sub, residual, params.reg, params.elm_hidden, rng);
      case NodeKind::svr:
        return fit_linear_svr(x_sub, residual,
                              SvrParams{params.reg, params.svr_epsilon});
    }
  }
  if (params.kind != NodeKind::ridge) {
    throw std::invalid_argument(
        "fit_node_model: classification requires ridge node models");
  }

  // Weighted ridge on the filtered working set; an emptied filter falls
  // back to the full set.
  const auto fit_one = [&](const WorkingSet& ws) {
    std::vector<int> rows = ws.indices;
    if (rows.empty()) {
      rows.resize(samples.size());
      for (std::size_t i = 0; i < samples.size(); ++i) {
        rows[i] = static_cast<int>(i);
      }
    }
    const Eigen::MatrixXd xw = gather_rows(x_sub, rows);
    const Eigen::VectorXd zw = gather(ws.z, rows);
    const Eigen::VectorXd ww = gather(ws.weights, rows);
    return fit_weighted_ridge(xw, zw, ww, params.reg);
  };

  if (task == Task::binary) {
    return fit_one(
        working_set_binary(y_sub, f_prev.col(0), params.weight_filter));
  }

  const std::vector<WorkingSet> sets =
      working_set_multiclass(y_sub, f_prev, n_classes, params.weight_filter);
  MultiLinearModel model;
  model.per_class.reserve(n_classes);
  for (const auto& ws : sets) {
    model.per_class.push_back(fit_one(ws));
  }
  center_multiclass(model.per_class);
  return model;
}

BoostTree grow(const Eigen::Ref<const Eigen::MatrixXd>& X,
               const Eigen::Ref<const Eigen::VectorXd>& y, Task task,
               int n_classes, const GrowConfig& config, Rng& rng) {
  if (X.rows() != y.size() || X.rows() == 0) {
    throw std::invalid_argument("grow: X/y shape mismatch or empty");
  }
  validate_grow_config(task, n_classes, config);
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  const int n_outputs = task == Task::multiclass ? n_classes : 1;

  BoostTree tree;
  tree.task = task;
  tree.n_classes = task == Task::regression ? 0 : n_classes;
  tree.n_features = d;
  tree.nodes.push_back(TreeNode{zero_model(task, d, n_classes), {}, -1, -1});

  std::vector<LeafState> leaves;
  {
    LeafState root;
    root.node = 0;
    root.samples.resize(n);
    for (int i = 0; i < n; ++i) {
      root.samples[i] = i;
    }
    root.f = Eigen::MatrixXd::Zero(n, n_outputs);
    root.impurity = leaf_impurity(task, y, root.f, n_classes);
    leaves.push_back(std::move(root));
  }
  tree.num_leaf = 1;

  while (!config.max_num_leaf || tree.num_leaf < *config.max_num_leaf) {
    // Highest-impurity open leaf; ties go to the earliest-created.
    int pick = -1;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      if (leaves[i].open &&
          (pick < 0 || leaves[i].impurity > leaves[pick].impurity)) {
        pick = static_cast<int>(i);
      }
    }
    if (pick < 0) {
      break;
    }
    LeafState& leaf = leaves[pick];
    const Eigen::VectorXd y_sub = gather(y, leaf.samples);
    const std::vector<GradHess> gh = grad_hess(task, y_sub, leaf.f, n_classes);
    const auto candidate =
        find_best_split(X, leaf.samples, gh, config.node_kind, config.pool,
                        config.reg_per_candidate, rng);
    if (!candidate) {
      leaf.open = false;
      continue;
    }

    std::vector<int> left_pos, right_pos;  // positions within leaf.samples
    for (std::size_t i = 0; i < leaf.samples.size(); ++i) {
      const double v = X(leaf.samples[i], candidate->feature);
      (v <= candidate->threshold ? left_pos : right_pos)
          .push_back(static_cast<int>(i));
    }

    NodeFitParams fit_left;
    fit_left.kind = config.node_kind;
    fit_left.reg = candidate->reg_left;
    fit_left.weight_filter = config.weight_filter;
    NodeFitParams fit_right = fit_left;
    fit_right.reg = candidate->reg_right;
    if (config.node_kind == NodeKind::elm) {
      fit_left.elm_hidden = rng.pick(config.pool.elm_hidden);
      fit_right.elm_hidden = rng.pick(config.pool.elm_hidden);
    } else if (config.node_kind == NodeKind::svr) {
      fit_left.svr_epsilon = rng.pick(config.pool.svr_epsilon);
      fit_right.svr_epsilon = rng.pick(config.pool.svr_epsilon);
    }

    const auto fit_side = [&](const std::vector<int>& pos,
                              const NodeFitParams& params) {
      std::vector<int> rows(pos.size());
      Eigen::MatrixXd f_prev(static_cast<int>(pos.size()), n_outputs);
      for (std::size_t i = 0; i < pos.size(); ++i) {
        rows[i] = leaf.samples[pos[i]];
        f_prev.row(static_cast<int>(i)) = leaf.f.row(pos[i]);
      }
      return std::pair<NodeModel, Eigen::MatrixXd>(
          fit_node_model(task, X, y, rows, f_prev, params, n_classes, rng),
          std::move(f_prev));
    };
    auto [model_left, f_prev_left] = fit_side(left_pos, fit_left);
    auto [model_right, f_prev_right] = fit_side(right_pos, fit_right);

    const double gain =
        candidate->gain -
        complexity_penalty(config.node_kind, candidate->reg_left, model_left) -
        complexity_penalty(config.node_kind, candidate->reg_right,
                           model_right);
    if (gain <= 0.0) {
      leaf.open = false;
      continue;
    }

    const auto make_child = [&](const std::vector<int>& pos, NodeModel model,
                                const Eigen::MatrixXd& f_prev) {
      const int node_index = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back(TreeNode{std::move(model), {}, -1, -1});
      LeafState child;
      child.node = node_index;
      child.samples.resize(pos.size());
      child.f.resize(static_cast<int>(pos.size()), n_outputs);
      for (std::size_t i = 0; i < pos.size(); ++i) {
        child.samples[i] = leaf.samples[pos[i]];
        child.f.row(static_cast<int>(i)) =
            f_prev.row(static_cast<int>(i)) +
            predict_node(tree.nodes[node_index].model,
                         X.row(child.samples[i]).transpose())
                .transpose();
      }
      child.impurity =
          leaf_impurity(task, gather(y, child.samples), child.f, n_classes);
      return child;
    };

    LeafState left_child = make_child(left_pos, std::move(model_left),
                                      f_prev_left);
    LeafState right_child = make_child(right_pos, std::move(model_right),
                                       f_prev_right);

    TreeNode& parent = tree.nodes[leaf.node];
    parent.split = SplitRecord{candidate->feature, candidate->threshold};
    parent.left = left_child.node;
    parent.right = right_child.node;

    // The parent is no longer a leaf; drop its state and add the children.
    leaves.erase(leaves.begin() + pick);
    leaves.push_back(std::move(left_child));
    leaves.push_back(std::move(right_child));
    ++tree.num_leaf;
  }
  return tree;
}

}  // namespace boostforest
