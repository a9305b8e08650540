#include "boostforest/forest.hpp"

#include <array>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace boostforest {

namespace {

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

void validate_config(const ForestConfig& config, Task task) {
  if (config.n_estimators < 1) {
    throw ConfigError("n_estimators must be >= 1");
  }
  if (config.threads < 1) {
    throw ConfigError("threads must be >= 1");
  }
  if (task != Task::regression && (config.base == BaseKind::boosttree_elm ||
                                   config.base == BaseKind::boosttree_svr)) {
    throw ConfigError(
        "elm and svr node models support regression tasks only");
  }
  const auto& pool = config.pool;
  if (pool.min_samples_leaf.empty()) {
    throw ConfigError("min_samples_leaf pool is empty");
  }
  if (config.base == BaseKind::cart) {
    if (pool.cart_max_depth.empty()) {
      throw ConfigError("cart base needs a max-depth pool");
    }
    return;
  }
  if (config.base != BaseKind::boosttree_svr && pool.lambda.empty()) {
    throw ConfigError("lambda pool is empty");
  }
  if (config.base == BaseKind::boosttree_elm && pool.elm_hidden.empty()) {
    throw ConfigError("elm base needs a hidden-node pool");
  }
  if (config.base == BaseKind::boosttree_svr &&
      (pool.svr_c.empty() || pool.svr_epsilon.empty())) {
    throw ConfigError("svr base needs C and epsilon pools");
  }
}

// Train member `index` on its own bootstrap replica under its own seed.
// Draw order: bootstrap rows, then per-tree hyper-parameters, then growth.
void train_member(const Dataset& transformed, const ForestConfig& config,
                  int index, Forest& forest) {
  Rng rng(child_seed(config.seed, static_cast<std::uint64_t>(index)));
  const Dataset replica = bootstrap(transformed, rng);

  if (config.base == BaseKind::cart) {
    CartConfig cart;
    cart.max_depth = rng.pick(config.pool.cart_max_depth);
    cart.min_samples_leaf = rng.pick(config.pool.min_samples_leaf);
    forest.carts[index] =
        fit_cart(replica.features, replica.labels, replica.task,
                 replica.n_classes, cart, rng);
    return;
  }

  GrowConfig grow_config;
  grow_config.node_kind = node_kind_of(config.base);
  grow_config.pool = config.pool;
  grow_config.weight_filter = config.weight_filter;
  if (config.max_num_leaf) {
    grow_config.max_num_leaf = *config.max_num_leaf;
  } else if (!config.pool.max_num_leaf.empty()) {
    grow_config.max_num_leaf = rng.pick(config.pool.max_num_leaf);
  }
  forest.trees[index] = grow(replica.features, replica.labels, replica.task,
                             replica.n_classes, grow_config, rng);
}

// ---------------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------------

constexpr const char* kMagic = "BOOSTFOREST";
constexpr int kVersion = 1;

std::uint32_t crc32(const std::string& bytes) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) {
        c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      }
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (const unsigned char ch : bytes) {
    crc = table[(crc ^ ch) & 0xFFu] ^ (crc >> 8);
  }
  return crc ^ 0xFFFFFFFFu;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_linear(std::ostream& out, const LinearModel& m) {
  out << "model linear " << m.w.size() << ' ' << format_double(m.b);
  for (int i = 0; i < m.w.size(); ++i) {
    out << ' ' << format_double(m.w(i));
  }
  out << '\n';
}

void write_node_model(std::ostream& out, const NodeModel& model) {
  if (const auto* lin = std::get_if<LinearModel>(&model)) {
    write_linear(out, *lin);
    return;
  }
  if (const auto* elm = std::get_if<ElmModel>(&model)) {
    out << "model elm " << elm->hidden_w.rows() << ' ' << elm->hidden_w.cols()
        << '\n';
    for (int i = 0; i < elm->hidden_w.rows(); ++i) {
      out << "hrow " << format_double(elm->hidden_b(i));
      for (int j = 0; j < elm->hidden_w.cols(); ++j) {
        out << ' ' << format_double(elm->hidden_w(i, j));
      }
      out << '\n';
    }
    out << "out " << format_double(elm->output.b);
    for (int i = 0; i < elm->output.w.size(); ++i) {
      out << ' ' << format_double(elm->output.w(i));
    }
    out << '\n';
    return;
  }
  const auto& multi = std::get<MultiLinearModel>(model);
  out << "model multi " << multi.per_class.size() << '\n';
  for (const auto& lm : multi.per_class) {
    out << "class " << lm.w.size() << ' ' << format_double(lm.b);
    for (int i = 0; i < lm.w.size(); ++i) {
      out << ' ' << format_double(lm.w(i));
    }
    out << '\n';
  }
}

std::string serialize(const Forest& forest) {
  std::ostringstream out;
  out << kMagic << '\n';
  out << "version " << kVersion << '\n';
  out << "base " << to_string(forest.base) << '\n';
  out << "task " << to_string(forest.task) << '\n';
  out << "classes " << forest.n_classes << '\n';
  out << "vote " << (forest.hard_vote ? "hard" : "prob") << '\n';
  out << "seed " << forest.seed << '\n';
  out << "schema_label_col " << forest.schema.label_col << '\n';
  out << "schema_categoricals " << forest.schema.categorical_cols.size();
  for (const int c : forest.schema.categorical_cols) {
    out << ' ' << c;
  }
  out << '\n';
  for (const auto& level : forest.label_levels) {
    out << "label_level " << level << '\n';
  }

  const auto& pre = forest.preprocess;
  out << "preprocess_begin\n";
  out << "inputs " << pre.n_input_cols << '\n';
  out << "blocks " << pre.one_hot.size() << '\n';
  for (const auto& block : pre.one_hot) {
    out << "block " << block.source_col << ' ' << block.levels.size() << '\n';
    for (const auto& level : block.levels) {
      out << "level " << level << '\n';
    }
  }
  out << "features " << pre.n_output_cols() << '\n';
  for (const auto& name : pre.feature_names) {
    out << "feature " << name << '\n';
  }
  for (int i = 0; i < pre.n_output_cols(); ++i) {
    out << "range " << format_double(pre.feat_min(i)) << ' '
        << format_double(pre.feat_max(i)) << '\n';
  }
  out << "labelnorm " << (pre.labels_normalized ? 1 : 0) << ' '
      << format_double(pre.label_mean) << ' ' << format_double(pre.label_std)
      << '\n';
  out << "preprocess_end\n";

  out << "members " << forest.size() << '\n';
  if (forest.base == BaseKind::cart) {
    for (const auto& tree : forest.carts) {
      out << "cart_begin\n";
      out << "nodes " << tree.nodes.size() << '\n';
      for (const auto& node : tree.nodes) {
        out << "cnode " << node.left << ' ' << node.right << ' '
            << node.feature << ' ' << format_double(node.threshold) << ' '
            << node.value.size();
        for (int i = 0; i < node.value.size(); ++i) {
          out << ' ' << format_double(node.value(i));
        }
        out << '\n';
      }
      out << "cart_end\n";
    }
  } else {
    for (const auto& tree : forest.trees) {
      out << "tree_begin\n";
      out << "nodes " << tree.nodes.size() << '\n';
      for (const auto& node : tree.nodes) {
        out << "node " << node.left << ' ' << node.right << ' '
            << node.split.feature << ' ' << format_double(node.split.threshold)
            << '\n';
        write_node_model(out, node.model);
      }
      out << "tree_end\n";
    }
  }
  std::string body = out.str();
  char crc_line[32];
  std::snprintf(crc_line, sizeof(crc_line), "checksum %08X\n", crc32(body));
  return body + crc_line;
}

// Line-oriented reader with keyword checks; every failure is a ModelIoError.
struct Reader {
  std::istringstream in;

  explicit Reader(std::string body) : in(std::move(body)) {}

  std::string next_line() {
    std::string line;
    if (!std::getline(in, line)) {
      throw ModelIoError("truncated model file");
    }
    return line;
  }

  // Line "<keyword> <rest>"; returns rest (may be empty).
  std::string expect(const std::string& keyword) {
    const std::string line = next_line();
    if (line == keyword) {
      return "";
    }
    if (line.rfind(keyword + " ", 0) != 0) {
      throw ModelIoError("corrupt model file: expected '" + keyword +
                         "', got '" + line + "'");
    }
    return line.substr(keyword.size() + 1);
  }

  std::vector<std::string> expect_tokens(const std::string& keyword) {
    std::istringstream rest(expect(keyword));
    std::vector<std::string> tokens;
    std::string tok;
    while (rest >> tok) {
      tokens.push_back(tok);
    }
    return tokens;
  }
};

std::int64_t parse_int(const std::string& tok) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(tok, &used);
    if (used != tok.size()) {
      throw std::invalid_argument(tok);
    }
    return v;
  } catch (const std::exception&) {
    throw ModelIoError("corrupt model file: bad integer '" + tok + "'");
  }
}

double parse_num(const std::string& tok) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) {
      throw std::invalid_argument(tok);
    }
    return v;
  } catch (const std::exception&) {
    throw ModelIoError("corrupt model file: bad number '" + tok + "'");
  }
}

LinearModel parse_linear_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < 2) {
    throw ModelIoError("corrupt model file: short linear model line");
  }
  const std::int64_t d = parse_int(tokens[0]);
  if (d < 0 || static_cast<std::int64_t>(tokens.size()) != d + 2) {
    throw ModelIoError("corrupt model file: linear model length mismatch");
  }
  LinearModel m;
  m.b = parse_num(tokens[1]);
  m.w.resize(d);
  for (std::int64_t i = 0; i < d; ++i) {
    m.w(i) = parse_num(tokens[2 + i]);
  }
  return m;
}

NodeModel parse_node_model(Reader& reader) {
  std::vector<std::string> tokens = reader.expect_tokens("model");
  if (tokens.empty()) {
    throw ModelIoError("corrupt model file: empty model line");
  }
  const std::string kind = tokens[0];
  tokens.erase(tokens.begin());
  if (kind == "linear") {
    return parse_linear_tokens(tokens);
  }
  if (kind == "elm") {
    if (tokens.size() != 2) {
      throw ModelIoError("corrupt model file: bad elm header");
    }
    const std::int64_t hidden = parse_int(tokens[0]);
    const std::int64_t d = parse_int(tokens[1]);
    if (hidden < 1 || d < 0) {
      throw ModelIoError("corrupt model file: bad elm shape");
    }
    ElmModel elm;
    elm.hidden_w.resize(hidden, d);
    elm.hidden_b.resize(hidden);
    for (std::int64_t i = 0; i < hidden; ++i) {
      const auto row = reader.expect_tokens("hrow");
      if (static_cast<std::int64_t>(row.size()) != d + 1) {
        throw ModelIoError("corrupt model file: elm row length mismatch");
      }
      elm.hidden_b(i) = parse_num(row[0]);
      for (std::int64_t j = 0; j < d; ++j) {
        elm.hidden_w(i, j) = parse_num(row[1 + j]);
      }
    }
    const auto outrow = reader.expect_tokens("out");
    if (static_cast<std::int64_t>(outrow.size()) != hidden + 1) {
      throw ModelIoError("corrupt model file: elm output length mismatch");
    }
    elm.output.b = parse_num(outrow[0]);
    elm.output.w.resize(hidden);
    for (std::int64_t i = 0; i < hidden; ++i) {
      elm.output.w(i) = parse_num(outrow[1 + i]);
    }
    return elm;
  }
  if (kind == "multi") {
    if (tokens.size() != 1) {
      throw ModelIoError("corrupt model file: bad multi header");
    }
    const std::int64_t j = parse_int(tokens[0]);
    if (j < 3) {
      throw ModelIoError("corrupt model file: multi model needs >= 3 classes");
    }
    MultiLinearModel multi;
    for (std::int64_t c = 0; c < j; ++c) {
      multi.per_class.push_back(
          parse_linear_tokens(reader.expect_tokens("class")));
    }
    return multi;
  }
  throw ModelIoError("corrupt model file: unknown model kind '" + kind + "'");
}

}  // namespace

ParameterPool default_pool(BaseKind base) {
  ParameterPool pool;
  switch (base) {
    case BaseKind::boosttree_ridge:
      break;
    case BaseKind::boosttree_elm:
      pool.lambda = {1e-3, 1e-2, 1e-1};
      pool.max_num_leaf = {5, 10, 15, 20};
      break;
    case BaseKind::boosttree_svr:
      pool.max_num_leaf = {5, 10, 15, 20};
      break;
    case BaseKind::cart:
      pool.min_samples_leaf = {5, 10, 15};
      break;
  }
  return pool;
}

Forest train_forest(const Dataset& train_raw, const ForestConfig& config) {
  validate_config(config, train_raw.task);

  Forest forest;
  forest.base = config.base;
  forest.task = train_raw.task;
  forest.n_classes = train_raw.n_classes;
  forest.hard_vote = config.hard_vote;
  forest.seed = config.seed;
  forest.label_levels = train_raw.label_levels;
  if (train_raw.task != Task::regression && forest.label_levels.empty()) {
    // Datasets built in memory may lack a label vocabulary; synthesize one
    // so the model file stays self-describing.
    for (int c = 0; c < train_raw.n_classes; ++c) {
      forest.label_levels.push_back(std::to_string(c));
    }
  }
  forest.preprocess = fit_preprocess(train_raw);
  const Dataset transformed = apply_preprocess(forest.preprocess, train_raw);

  if (config.base == BaseKind::cart) {
    forest.carts.resize(config.n_estimators);
  } else {
    forest.trees.resize(config.n_estimators);
  }

  const int n_threads =
      std::min(config.threads, config.n_estimators);
  if (n_threads <= 1) {
    for (int i = 0; i < config.n_estimators; ++i) {
      train_member(transformed, config, i, forest);
    }
    return forest;
  }

  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(n_threads);
  for (int t = 0; t < n_threads; ++t) {
    workers.emplace_back([&, t] {
      try {
        for (int i = t; i < config.n_estimators; i += n_threads) {
          train_member(transformed, config, i, forest);
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
  return forest;
}

Prediction predict_forest_row(const Forest& forest,
                              const Eigen::Ref<const Eigen::VectorXd>& x,
                              int first_k) {
  const int total = forest.size();
  const int k = first_k < 0 ? total : std::min(first_k, total);
  if (k < 1) {
    throw std::invalid_argument("predict_forest_row: no members to aggregate");
  }

  Prediction pred;
  if (forest.task == Task::regression) {
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
      sum += forest.base == BaseKind::cart
                 ? predict_cart(forest.carts[i], x)(0)
                 : predict_tree(forest.trees[i], x)(0);
    }
    pred.value = sum / k;
    return pred;
  }

  const int j = forest.n_classes;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(j);
  for (int i = 0; i < k; ++i) {
    Eigen::VectorXd probs;
    if (forest.base == BaseKind::cart) {
      probs = predict_cart(forest.carts[i], x);
    } else {
      const Eigen::VectorXd raw = predict_tree(forest.trees[i], x);
      if (forest.task == Task::binary) {
        probs.resize(2);
        probs(1) = sigmoid(raw(0));
        probs(0) = 1.0 - probs(1);
      } else {
        probs = softmax_rows(raw.transpose()).row(0).transpose();
      }
    }
    if (forest.hard_vote) {
      int best = 0;
      for (int c = 1; c < j; ++c) {
        if (probs(c) > probs(best)) {
          best = c;
        }
      }
      acc(best) += 1.0;
    } else {
      acc += probs;
    }
  }
  pred.probabilities = acc / k;
  pred.label = 0;
  for (int c = 1; c < j; ++c) {
    if (pred.probabilities(c) > pred.probabilities(pred.label)) {
      pred.label = c;
    }
  }
  pred.value = pred.probabilities(pred.label);
  return pred;
}

std::vector<Prediction> predict_forest(const Forest& forest,
                                       const Dataset& raw, int first_k) {
  const Dataset transformed = apply_preprocess(forest.preprocess, raw);
  std::vector<Prediction> out;
  out.reserve(transformed.n_rows());
  for (int r = 0; r < transformed.n_rows(); ++r) {
    out.push_back(predict_forest_row(
        forest, transformed.features.row(r).transpose(), first_k));
  }
  return out;
}

void save_model(const Forest& forest, const std::string& path) {
  const std::string content = serialize(forest);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) {
      throw ModelIoError("cannot write model file '" + path + "'");
    }
    out << content;
    if (!out) {
      throw ModelIoError("short write to model file '" + path + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw ModelIoError("cannot move model file into place at '" + path +
                       "': " + ec.message());
  }
}

Forest load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ModelIoError("cannot open model file '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string content = buffer.str();

  if (content.rfind(std::string(kMagic) + "\n", 0) != 0) {
    throw ModelIoError("unrecognized model file (bad magic)");
  }
  // The checksum line is the final line; everything before it is covered.
  std::string::size_type end = content.size();
  if (end == 0 || content[end - 1] != '\n') {
    throw ModelIoError("truncated model file (missing final newline)");
  }
  const std::string::size_type line_start = content.rfind('\n', end - 2);
  const std::string last_line = content.substr(
      line_start == std::string::npos ? 0 : line_start + 1,
      end - 1 - (line_start == std::string::npos ? 0 : line_start + 1));
  if (last_line.rfind("checksum ", 0) != 0) {
    throw ModelIoError("truncated model file (missing checksum)");
  }
  const std::string hex = last_line.substr(9);
  if (hex.size() != 8 ||
      hex.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos) {
    throw ModelIoError("corrupt model file: malformed checksum line");
  }
  const std::string body = content.substr(0, line_start + 1);
  const std::uint32_t stored =
      static_cast<std::uint32_t>(std::stoul(hex, nullptr, 16));
  if (crc32(body) != stored) {
    throw ModelIoError("model file checksum mismatch");
  }

  Reader reader(body);
  reader.expect(kMagic);
  const std::int64_t version = parse_int(reader.expect("version"));
  if (version != kVersion) {
    throw ModelIoError("unsupported model file version " +
                       std::to_string(version));
  }

  Forest forest;
  forest.base = base_kind_from_string(reader.expect("base"));
  forest.task = task_from_string(reader.expect("task"));
  forest.n_classes = static_cast<int>(parse_int(reader.expect("classes")));
  const std::string vote = reader.expect("vote");
  if (vote != "prob" && vote != "hard") {
    throw ModelIoError("corrupt model file: unknown vote mode '" + vote + "'");
  }
  forest.hard_vote = vote == "hard";
  forest.seed =
      static_cast<std::uint64_t>(parse_int(reader.expect("seed")));
  forest.schema.task = forest.task;
  forest.schema.label_col =
      static_cast<int>(parse_int(reader.expect("schema_label_col")));
  {
    const auto tokens = reader.expect_tokens("schema_categoricals");
    if (tokens.empty()) {
      throw ModelIoError("corrupt model file: bad categorical list");
    }
    const std::int64_t count = parse_int(tokens[0]);
    if (static_cast<std::int64_t>(tokens.size()) != count + 1) {
      throw ModelIoError("corrupt model file: categorical list mismatch");
    }
    for (std::int64_t i = 0; i < count; ++i) {
      forest.schema.categorical_cols.push_back(
          static_cast<int>(parse_int(tokens[1 + i])));
    }
  }
  for (int i = 0; i < (forest.task == Task::regression ? 0 : forest.n_classes);
       ++i) {
    forest.label_levels.push_back(reader.expect("label_level"));
  }

  reader.expect("preprocess_begin");
  auto& pre = forest.preprocess;
  pre.n_input_cols = static_cast<int>(parse_int(reader.expect("inputs")));
  const std::int64_t n_blocks = parse_int(reader.expect("blocks"));
  for (std::int64_t b = 0; b < n_blocks; ++b) {
    const auto tokens = reader.expect_tokens("block");
    if (tokens.size() != 2) {
      throw ModelIoError("corrupt model file: bad block header");
    }
    OneHotBlock block;
    block.source_col = static_cast<int>(parse_int(tokens[0]));
    const std::int64_t n_levels = parse_int(tokens[1]);
    for (std::int64_t l = 0; l < n_levels; ++l) {
      block.levels.push_back(reader.expect("level"));
    }
    pre.one_hot.push_back(std::move(block));
  }
  const std::int64_t n_features = parse_int(reader.expect("features"));
  for (std::int64_t i = 0; i < n_features; ++i) {
    pre.feature_names.push_back(reader.expect("feature"));
  }
  pre.feat_min.resize(n_features);
  pre.feat_max.resize(n_features);
  for (std::int64_t i = 0; i < n_features; ++i) {
    const auto tokens = reader.expect_tokens("range");
    if (tokens.size() != 2) {
      throw ModelIoError("corrupt model file: bad range line");
    }
    pre.feat_min(i) = parse_num(tokens[0]);
    pre.feat_max(i) = parse_num(tokens[1]);
  }
  {
    const auto tokens = reader.expect_tokens("labelnorm");
    if (tokens.size() != 3) {
      throw ModelIoError("corrupt model file: bad labelnorm line");
    }
    pre.labels_normalized = parse_int(tokens[0]) != 0;
    pre.label_mean = parse_num(tokens[1]);
    pre.label_std = parse_num(tokens[2]);
  }
  reader.expect("preprocess_end");

  const std::int64_t members = parse_int(reader.expect("members"));
  if (members < 1) {
    throw ModelIoError("corrupt model file: no ensemble members");
  }
  for (std::int64_t m = 0; m < members; ++m) {
    if (forest.base == BaseKind::cart) {
      reader.expect("cart_begin");
      const std::int64_t n_nodes = parse_int(reader.expect("nodes"));
      CartTree tree;
      tree.task = forest.task;
      tree.n_classes = forest.n_classes;
      tree.n_features = static_cast<int>(n_features);
      for (std::int64_t i = 0; i < n_nodes; ++i) {
        const auto tokens = reader.expect_tokens("cnode");
        if (tokens.size() < 5) {
          throw ModelIoError("corrupt model file: short cart node line");
        }
        CartNode node;
        node.left = static_cast<int>(parse_int(tokens[0]));
        node.right = static_cast<int>(parse_int(tokens[1]));
        node.feature = static_cast<int>(parse_int(tokens[2]));
        node.threshold = parse_num(tokens[3]);
        const std::int64_t dim = parse_int(tokens[4]);
        if (static_cast<std::int64_t>(tokens.size()) != dim + 5) {
          throw ModelIoError("corrupt model file: cart value length mismatch");
        }
        node.value.resize(dim);
        for (std::int64_t v = 0; v < dim; ++v) {
          node.value(v) = parse_num(tokens[5 + v]);
        }
        tree.nodes.push_back(std::move(node));
      }
      reader.expect("cart_end");
      forest.carts.push_back(std::move(tree));
    } else {
      reader.expect("tree_begin");
      const std::int64_t n_nodes = parse_int(reader.expect("nodes"));
      BoostTree tree;
      tree.task = forest.task;
      tree.n_classes = forest.n_classes;
      tree.n_features = static_cast<int>(n_features);
      int leaves = 0;
      for (std::int64_t i = 0; i < n_nodes; ++i) {
        const auto tokens = reader.expect_tokens("node");
        if (tokens.size() != 4) {
          throw ModelIoError("corrupt model file: bad node line");
        }
        TreeNode node;
        node.left = static_cast<int>(parse_int(tokens[0]));
        node.right = static_cast<int>(parse_int(tokens[1]));
        node.split.feature = static_cast<int>(parse_int(tokens[2]));
        node.split.threshold = parse_num(tokens[3]);
        node.model = parse_node_model(reader);
        if (node.is_leaf()) {
          ++leaves;
        }
        tree.nodes.push_back(std::move(node));
      }
      tree.num_leaf = leaves;
      reader.expect("tree_end");
      forest.trees.push_back(std::move(tree));
    }
  }

  // Structural sanity: child indices must stay inside the node array.
  const auto check_children = [&](int left, int right, std::size_t count) {
    const auto n = static_cast<std::int64_t>(count);
    if ((left >= 0) != (right >= 0) || left >= n || right >= n) {
      throw ModelIoError("corrupt model file: bad child indices");
    }
  };
  for (const auto& tree : forest.trees) {
    for (const auto& node : tree.nodes) {
      check_children(node.left, node.right, tree.nodes.size());
    }
  }
  for (const auto& tree : forest.carts) {
    for (const auto& node : tree.nodes) {
      check_children(node.left, node.right, tree.nodes.size());
    }
  }
  return forest;
}

}  // namespace boostforest
