#include <unistd.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "boostforest/forest.hpp"
#include "doctest.h"
#include "synth_data.hpp"

using namespace boostforest;

namespace {

std::string temp_path(const std::string& stem) {
  static int counter = 0;
  return (std::filesystem::temp_directory_path() /
          (stem + "_" + std::to_string(::getpid()) + "_" +
           std::to_string(counter++) + ".bfm"))
      .string();
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& stem) : path(temp_path(stem)) {}
  ~TempFile() { std::filesystem::remove(path); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << content;
}

// Bit-at-a-time CRC-32 (reflected, poly 0xEDB88320), deliberately different
// from the table-driven one inside the library.
std::uint32_t crc32_bitwise(const std::string& bytes) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (const unsigned char ch : bytes) {
    crc ^= ch;
    for (int k = 0; k < 8; ++k) {
      crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
    }
  }
  return crc ^ 0xFFFFFFFFu;
}

ForestConfig ridge_config(int n_estimators, std::uint64_t seed) {
  ForestConfig config;
  config.base = BaseKind::boosttree_ridge;
  config.n_estimators = n_estimators;
  config.pool = default_pool(BaseKind::boosttree_ridge);
  config.max_num_leaf = 6;
  config.seed = seed;
  return config;
}

double raw_train_rmse(const Forest& forest, const Dataset& raw) {
  const std::vector<Prediction> preds = predict_forest(forest, raw);
  double sse = 0.0;
  for (int i = 0; i < raw.n_rows(); ++i) {
    const double r =
        raw.labels(i) - forest.preprocess.unscale_label(preds[i].value);
    sse += r * r;
  }
  return std::sqrt(sse / raw.n_rows());
}

double accuracy_on(const Forest& forest, const Dataset& raw) {
  const std::vector<Prediction> preds = predict_forest(forest, raw);
  int hits = 0;
  for (int i = 0; i < raw.n_rows(); ++i) {
    if (preds[i].label == static_cast<int>(raw.labels(i))) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / raw.n_rows();
}

}  // namespace

TEST_CASE("crc32 reference vector") {
  CHECK(crc32_bitwise("123456789") == 0xCBF43926u);
}

TEST_CASE("default pools carry the base-specific values") {
  const ParameterPool ridge = default_pool(BaseKind::boosttree_ridge);
  CHECK(ridge.min_samples_leaf ==
        std::vector<int>{5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15});
  CHECK(ridge.lambda == std::vector<double>{1e-4, 1e-3, 1e-2, 1e-1});
  CHECK(ridge.max_num_leaf.empty());

  const ParameterPool elm = default_pool(BaseKind::boosttree_elm);
  CHECK(elm.lambda == std::vector<double>{1e-3, 1e-2, 1e-1});
  CHECK(elm.elm_hidden == std::vector<int>{10, 20, 30, 40});
  CHECK(elm.max_num_leaf == std::vector<int>{5, 10, 15, 20});

  const ParameterPool svr = default_pool(BaseKind::boosttree_svr);
  CHECK(svr.svr_c == std::vector<double>{0.1, 1.0, 2.0, 5.0, 10.0});
  CHECK(svr.svr_epsilon == std::vector<double>{0.1, 0.2, 0.4, 0.8});
  CHECK(svr.max_num_leaf == std::vector<int>{5, 10, 15, 20});

  const ParameterPool cart = default_pool(BaseKind::cart);
  CHECK(cart.min_samples_leaf == std::vector<int>{5, 10, 15});
  CHECK(cart.cart_max_depth == std::vector<int>{4, 6, 8});
}

TEST_CASE("bootstrap replicas give distinct members") {
  const Dataset ds = synth::make_friedman1(150, 42);
  const Forest forest = train_forest(ds, ridge_config(4, 7));
  REQUIRE(forest.size() == 4);
  const Dataset pre = apply_preprocess(forest.preprocess, ds);
  bool any_difference = false;
  for (int r = 0; r < 20 && !any_difference; ++r) {
    const Eigen::VectorXd x = pre.features.row(r).transpose();
    if (predict_tree(forest.trees[0], x)(0) !=
        predict_tree(forest.trees[1], x)(0)) {
      any_difference = true;
    }
  }
  CHECK(any_difference);
}

TEST_CASE("serial and threaded training write identical model files") {
  const Dataset ds = synth::make_friedman1(120, 11);
  for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
    ForestConfig serial = ridge_config(8, seed);
    serial.threads = 1;
    ForestConfig threaded = serial;
    threaded.threads = 4;

    TempFile a("serial"), b("threaded");
    save_model(train_forest(ds, serial), a.path);
    save_model(train_forest(ds, threaded), b.path);
    CHECK(read_file(a.path) == read_file(b.path));
  }
}

TEST_CASE("model files carry a verifiable checksum") {
  const Dataset ds = synth::make_friedman1(60, 3);
  TempFile file("crc");
  save_model(train_forest(ds, ridge_config(2, 5)), file.path);
  const std::string content = read_file(file.path);
  REQUIRE(content.back() == '\n');

  const auto line_start = content.rfind('\n', content.size() - 2);
  REQUIRE(line_start != std::string::npos);
  const std::string last =
      content.substr(line_start + 1, content.size() - line_start - 2);
  REQUIRE(last.rfind("checksum ", 0) == 0);
  const std::string body = content.substr(0, line_start + 1);
  char expected[16];
  std::snprintf(expected, sizeof(expected), "%08X", crc32_bitwise(body));
  CHECK(last.substr(9) == expected);
}

TEST_CASE("save/load round trip preserves every prediction") {
  struct Case {
    const char* name;
    Dataset data;
    BaseKind base;
  };
  std::vector<Case> cases;
  cases.push_back({"ridge-reg", synth::make_friedman1(90, 1),
                   BaseKind::boosttree_ridge});
  cases.push_back({"elm-reg", synth::make_friedman1(70, 2),
                   BaseKind::boosttree_elm});
  cases.push_back({"svr-reg", synth::make_step_regression(70, 3, 0.05),
                   BaseKind::boosttree_svr});
  cases.push_back({"ridge-bin", synth::make_blobs_binary(80, 4),
                   BaseKind::boosttree_ridge});
  cases.push_back({"ridge-multi", synth::make_blobs_multiclass(90, 3, 5),
                   BaseKind::boosttree_ridge});
  cases.push_back({"cart-multi", synth::make_blobs_multiclass(90, 3, 6),
                   BaseKind::cart});

  for (const auto& c : cases) {
    CAPTURE(c.name);
    ForestConfig config;
    config.base = c.base;
    config.n_estimators = 3;
    config.pool = default_pool(c.base);
    if (c.base != BaseKind::cart) {
      config.max_num_leaf = 4;
    }
    config.seed = 9;
    const Forest trained = train_forest(c.data, config);

    TempFile file("roundtrip");
    save_model(trained, file.path);
    const Forest loaded = load_model(file.path);

    CHECK(loaded.base == trained.base);
    CHECK(loaded.task == trained.task);
    CHECK(loaded.n_classes == trained.n_classes);
    CHECK(loaded.hard_vote == trained.hard_vote);
    CHECK(loaded.seed == trained.seed);
    CHECK(loaded.label_levels == trained.label_levels);
    CHECK(loaded.schema.label_col == trained.schema.label_col);
    CHECK(loaded.schema.categorical_cols == trained.schema.categorical_cols);
    CHECK(loaded.size() == trained.size());
    CHECK(loaded.preprocess.n_input_cols == trained.preprocess.n_input_cols);

    const std::vector<Prediction> before = predict_forest(trained, c.data);
    const std::vector<Prediction> after = predict_forest(loaded, c.data);
    REQUIRE(before.size() == after.size());
    for (size_t i = 0; i < before.size(); ++i) {
      CHECK(before[i].value == after[i].value);
      CHECK(before[i].label == after[i].label);
      if (before[i].probabilities.size() > 0) {
        CHECK(before[i].probabilities == after[i].probabilities);
      }
    }
  }
}

TEST_CASE("corrupt model files are rejected") {
  const Dataset ds = synth::make_friedman1(60, 8);
  TempFile file("tamper");
  save_model(train_forest(ds, ridge_config(2, 3)), file.path);
  const std::string content = read_file(file.path);

  SUBCASE("flipped byte fails the checksum") {
    std::string bad = content;
    const size_t pos = bad.size() / 2;
    bad[pos] = bad[pos] == '1' ? '2' : '1';
    write_file(file.path, bad);
    CHECK_THROWS_AS(load_model(file.path), ModelIoError);
  }
  SUBCASE("truncation is detected") {
    write_file(file.path, content.substr(0, content.size() - 25));
    CHECK_THROWS_AS(load_model(file.path), ModelIoError);
  }
  SUBCASE("missing final newline is detected") {
    write_file(file.path, content.substr(0, content.size() - 1));
    CHECK_THROWS_AS(load_model(file.path), ModelIoError);
  }
  SUBCASE("foreign magic is rejected") {
    write_file(file.path, "SOMETHINGELSE\n" + content);
    CHECK_THROWS_AS(load_model(file.path), ModelIoError);
  }
  SUBCASE("missing file is reported") {
    CHECK_THROWS_AS(load_model(file.path + ".does-not-exist"), ModelIoError);
  }
  SUBCASE("future versions are rejected even with a valid checksum") {
    const auto line_start = content.rfind('\n', content.size() - 2);
    std::string body = content.substr(0, line_start + 1);
    const auto at = body.find("version 1\n");
    REQUIRE(at != std::string::npos);
    body.replace(at, 10, "version 2\n");
    char crc_line[32];
    std::snprintf(crc_line, sizeof(crc_line), "checksum %08X\n",
                  crc32_bitwise(body));
    write_file(file.path, body + crc_line);
    try {
      load_model(file.path);
      FAIL("expected a version error");
    } catch (const ModelIoError& e) {
      CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
  }
}

TEST_CASE("prefix aggregation matches manual averaging") {
  const Dataset ds = synth::make_friedman1(100, 21);
  const Forest forest = train_forest(ds, ridge_config(10, 13));
  const Dataset pre = apply_preprocess(forest.preprocess, ds);
  const Eigen::VectorXd x = pre.features.row(0).transpose();

  CHECK(predict_forest_row(forest, x, -1).value ==
        predict_forest_row(forest, x, 10).value);
  CHECK(predict_forest_row(forest, x, 999).value ==
        predict_forest_row(forest, x, 10).value);
  CHECK(predict_forest_row(forest, x, 1).value ==
        predict_tree(forest.trees[0], x)(0));
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    sum += predict_tree(forest.trees[i], x)(0);
  }
  CHECK(predict_forest_row(forest, x, 3).value ==
        doctest::Approx(sum / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(predict_forest_row(forest, x, 0), std::invalid_argument);
}

TEST_CASE("the ensemble beats its median member on training data") {
  const Dataset ds = synth::make_friedman1(200, 31);
  const Forest forest = train_forest(ds, ridge_config(30, 17));
  const Dataset pre = apply_preprocess(forest.preprocess, ds);

  const auto rmse_of = [&](const auto& predict_one) {
    double sse = 0.0;
    for (int r = 0; r < pre.n_rows(); ++r) {
      const double diff =
          pre.labels(r) - predict_one(pre.features.row(r).transpose());
      sse += diff * diff;
    }
    return std::sqrt(sse / pre.n_rows());
  };

  std::vector<double> member_rmse;
  for (const auto& tree : forest.trees) {
    member_rmse.push_back(rmse_of(
        [&](const Eigen::VectorXd& x) { return predict_tree(tree, x)(0); }));
  }
  std::sort(member_rmse.begin(), member_rmse.end());
  const double median = member_rmse[member_rmse.size() / 2];
  const double ensemble = rmse_of([&](const Eigen::VectorXd& x) {
    return predict_forest_row(forest, x).value;
  });
  CHECK(ensemble < median);
}

TEST_CASE("regression forests track raw label units after unscaling") {
  const Dataset ds = synth::make_friedman1(150, 51);
  const Forest forest = train_forest(ds, ridge_config(20, 29));
  const double flat = std::sqrt(
      (ds.labels.array() - ds.labels.mean()).square().sum() / ds.n_rows());
  CHECK(raw_train_rmse(forest, ds) < flat);
}

TEST_CASE("probability and hard votes both separate blobs") {
  const Dataset ds = synth::make_blobs_binary(120, 33);
  ForestConfig config;
  config.base = BaseKind::boosttree_ridge;
  config.n_estimators = 9;
  config.pool = default_pool(BaseKind::boosttree_ridge);
  config.max_num_leaf = 4;
  config.seed = 3;

  const Forest prob = train_forest(ds, config);
  config.hard_vote = true;
  const Forest hard = train_forest(ds, config);
  CHECK(accuracy_on(prob, ds) >= 0.9);
  CHECK(accuracy_on(hard, ds) >= 0.9);

  const std::vector<Prediction> votes = predict_forest(hard, ds);
  for (const auto& p : votes) {
    CHECK(p.probabilities.sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (int c = 0; c < 2; ++c) {
      const double shares = p.probabilities(c) * 9.0;
      CHECK(shares == doctest::Approx(std::round(shares)).epsilon(1e-9));
    }
    CHECK(p.probabilities(p.label) == p.probabilities.maxCoeff());
  }
}

TEST_CASE("multiclass forests expose calibrated-looking probabilities") {
  const Dataset ds = synth::make_blobs_multiclass(120, 3, 44);
  ForestConfig config;
  config.base = BaseKind::boosttree_ridge;
  config.n_estimators = 7;
  config.pool = default_pool(BaseKind::boosttree_ridge);
  config.max_num_leaf = 4;
  config.seed = 12;
  const Forest forest = train_forest(ds, config);
  CHECK(accuracy_on(forest, ds) >= 0.8);
  for (const auto& p : predict_forest(forest, ds)) {
    REQUIRE(p.probabilities.size() == 3);
    CHECK(p.probabilities.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.probabilities.minCoeff() >= 0.0);
    CHECK(p.value == p.probabilities(p.label));
  }
}

TEST_CASE("cart forests vote with leaf frequencies") {
  const Dataset ds = synth::make_blobs_multiclass(120, 3, 55);
  ForestConfig config;
  config.base = BaseKind::cart;
  config.n_estimators = 15;
  config.pool = default_pool(BaseKind::cart);
  config.seed = 21;
  const Forest forest = train_forest(ds, config);
  REQUIRE(forest.size() == 15);
  CHECK(forest.trees.empty());
  CHECK(accuracy_on(forest, ds) >= 0.85);
}

TEST_CASE("train_forest validates its configuration") {
  const Dataset reg = synth::make_friedman1(40, 61);
  const Dataset bin = synth::make_blobs_binary(40, 62);

  ForestConfig config = ridge_config(0, 1);
  CHECK_THROWS_AS(train_forest(reg, config), ConfigError);

  config = ridge_config(2, 1);
  config.threads = 0;
  CHECK_THROWS_AS(train_forest(reg, config), ConfigError);

  config = ridge_config(2, 1);
  config.base = BaseKind::boosttree_elm;
  config.pool = default_pool(BaseKind::boosttree_elm);
  CHECK_THROWS_AS(train_forest(bin, config), ConfigError);

  config = ridge_config(2, 1);
  config.base = BaseKind::cart;
  config.pool = default_pool(BaseKind::cart);
  config.pool.cart_max_depth.clear();
  CHECK_THROWS_AS(train_forest(reg, config), ConfigError);

  config = ridge_config(2, 1);
  config.pool.min_samples_leaf.clear();
  CHECK_THROWS_AS(train_forest(reg, config), ConfigError);
}

TEST_CASE("forests trained in memory synthesize a label vocabulary") {
  Dataset ds = synth::make_blobs_multiclass(60, 3, 71);
  ds.label_levels.clear();
  ForestConfig config;
  config.base = BaseKind::cart;
  config.n_estimators = 2;
  config.pool = default_pool(BaseKind::cart);
  const Forest forest = train_forest(ds, config);
  CHECK(forest.label_levels == std::vector<std::string>{"0", "1", "2"});

  TempFile file("vocab");
  save_model(forest, file.path);
  CHECK(load_model(file.path).label_levels == forest.label_levels);
}
