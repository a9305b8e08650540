#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "boostforest/dataset.hpp"
#include "doctest.h"

using namespace boostforest;

namespace {

// Writes content to a unique temp file and removes it on scope exit.
struct TempCsv {
  std::string path;

  explicit TempCsv(const std::string& content) {
    static int counter = 0;
    path = (std::filesystem::temp_directory_path() /
            ("bf_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++) + ".csv"))
               .string();
    std::ofstream out(path);
    out << content;
  }
  ~TempCsv() { std::filesystem::remove(path); }
};

CsvSchema reg_schema(int label_col) {
  CsvSchema s;
  s.label_col = label_col;
  s.task = Task::regression;
  return s;
}

}  // namespace

TEST_CASE("load_csv parses a plain numeric file with header") {
  TempCsv file("a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
  const Dataset ds = load_csv(file.path, reg_schema(2));
  CHECK(ds.n_rows() == 3);
  CHECK(ds.n_cols() == 2);
  CHECK(ds.feature_names == std::vector<std::string>{"a", "b"});
  CHECK(ds.features(1, 0) == 4.0);
  CHECK(ds.features(2, 1) == 8.0);
  CHECK(ds.labels(0) == 3.0);
  CHECK(ds.labels(2) == 9.0);
}

TEST_CASE("load_csv without header keeps the first row as data") {
  TempCsv file("1,2,3\n4,5,6\n");
  const Dataset ds = load_csv(file.path, reg_schema(0));
  CHECK(ds.n_rows() == 2);
  CHECK(ds.labels(0) == 1.0);
  CHECK(ds.feature_names == std::vector<std::string>{"col1", "col2"});
}

TEST_CASE("load_csv errors carry row/column positions") {
  TempCsv file("a,y\n1,2\nbad,4\n");
  CHECK_THROWS_WITH_AS(load_csv(file.path, reg_schema(1)),
                       "non-numeric value 'bad' at (row 3, col 1)",
                       DataError);
}

TEST_CASE("load_csv rejects missing, empty, and ragged files") {
  CHECK_THROWS_AS(load_csv("/nonexistent/no.csv", reg_schema(0)), DataError);
  TempCsv empty("");
  CHECK_THROWS_AS(load_csv(empty.path, reg_schema(0)), DataError);
  TempCsv ragged("a,b,y\n1,2,3\n4,5\n");
  CHECK_THROWS_WITH_AS(load_csv(ragged.path, reg_schema(2)),
                       "ragged row 3: has 2 columns, expected 3", DataError);
}

TEST_CASE("load_csv rejects non-finite numerics and bad schema indices") {
  TempCsv inf_file("a,y\ninf,2\n");
  CHECK_THROWS_AS(load_csv(inf_file.path, reg_schema(1)), DataError);
  TempCsv nan_file("a,y\nnan,2\n");
  CHECK_THROWS_AS(load_csv(nan_file.path, reg_schema(1)), DataError);

  TempCsv ok("1,2\n");
  CHECK_THROWS_AS(load_csv(ok.path, reg_schema(5)), DataError);
  CsvSchema bad_cat = reg_schema(1);
  bad_cat.categorical_cols = {1};  // the label column
  CHECK_THROWS_AS(load_csv(ok.path, bad_cat), DataError);
}

TEST_CASE("load_csv maps categorical levels and classification labels") {
  TempCsv file(
      "color,size,cls\n"
      "red,1,yes\n"
      "blue,2,no\n"
      "red,3,yes\n"
      "green,4,no\n");
  CsvSchema schema;
  schema.label_col = 2;
  schema.categorical_cols = {0};
  schema.task = Task::binary;
  const Dataset ds = load_csv(file.path, schema);
  CHECK(ds.n_classes == 2);
  // Labels sort lexicographically: no=0, yes=1.
  CHECK(ds.label_levels == std::vector<std::string>{"no", "yes"});
  CHECK(ds.labels(0) == 1.0);
  CHECK(ds.labels(1) == 0.0);
  // Levels are coded in first-appearance order within the column.
  REQUIRE(ds.categorical_cols == std::vector<int>{0});
  CHECK(ds.category_levels[0] ==
        std::vector<std::string>{"red", "blue", "green"});
  CHECK(ds.features(0, 0) == 0.0);
  CHECK(ds.features(3, 0) == 2.0);
  CHECK(ds.is_categorical(0));
  CHECK_FALSE(ds.is_categorical(1));
}

TEST_CASE("numeric classification labels sort numerically") {
  TempCsv file("x,y\n1,10\n2,2\n3,10\n4,2\n5,3\n");
  CsvSchema schema;
  schema.label_col = 1;
  schema.task = Task::multiclass;
  const Dataset ds = load_csv(file.path, schema);
  CHECK(ds.label_levels == std::vector<std::string>{"2", "3", "10"});
  CHECK(ds.labels(0) == 2.0);  // "10" is the largest class code
  CHECK(ds.labels(4) == 1.0);
}

TEST_CASE("classification tasks validate the distinct label count") {
  TempCsv two("x,y\n1,a\n2,b\n");
  CsvSchema schema;
  schema.label_col = 1;
  schema.task = Task::multiclass;
  CHECK_THROWS_AS(load_csv(two.path, schema), DataError);
  schema.task = Task::binary;
  CHECK_NOTHROW(load_csv(two.path, schema));
  TempCsv three("x,y\n1,a\n2,b\n3,c\n");
  CHECK_THROWS_AS(load_csv(three.path, schema), DataError);
}

TEST_CASE("fit/apply scales features into [0,1] and z-normalizes labels") {
  Dataset ds;
  ds.task = Task::regression;
  ds.features.resize(4, 2);
  ds.features << 0.0, 10.0, 2.0, 20.0, 4.0, 30.0, 8.0, 40.0;
  ds.labels.resize(4);
  ds.labels << 1.0, 2.0, 3.0, 6.0;
  ds.feature_names = {"a", "b"};

  const PreprocessState state = fit_preprocess(ds);
  CHECK(state.n_output_cols() == 2);
  CHECK(state.label_mean == doctest::Approx(3.0));
  // Population std of {1,2,3,6} around 3: sqrt(14/4).
  CHECK(state.label_std == doctest::Approx(std::sqrt(3.5)));

  const Dataset out = apply_preprocess(state, ds);
  CHECK(out.features.minCoeff() == doctest::Approx(0.0));
  CHECK(out.features.maxCoeff() == doctest::Approx(1.0));
  CHECK(out.features(1, 0) == doctest::Approx(0.25));
  CHECK(out.labels(0) ==
        doctest::Approx((1.0 - 3.0) / std::sqrt(3.5)));
  // Round trip.
  CHECK(state.unscale_label(out.labels(0)) == doctest::Approx(1.0));
}

TEST_CASE("apply clips out-of-range values into [0,1]") {
  Dataset train;
  train.task = Task::regression;
  train.features.resize(2, 1);
  train.features << 0.0, 10.0;
  train.labels.resize(2);
  train.labels << 0.0, 1.0;

  const PreprocessState state = fit_preprocess(train);
  Dataset test = train;
  test.features(0, 0) = -5.0;
  test.features(1, 0) = 25.0;
  const Dataset out = apply_preprocess(state, test);
  CHECK(out.features(0, 0) == 0.0);
  CHECK(out.features(1, 0) == 1.0);
}

TEST_CASE("one-hot expansion, unseen level handling, and name synthesis") {
  Dataset ds;
  ds.task = Task::regression;
  ds.features.resize(3, 2);
  // column 0 numeric, column 1 categorical codes
  ds.features << 1.0, 0.0, 2.0, 1.0, 3.0, 2.0;
  ds.labels.resize(3);
  ds.labels << 1.0, 2.0, 3.0;
  ds.feature_names = {"num", "cat"};
  ds.categorical_cols = {1};
  ds.category_levels = {{"red", "green", "blue"}};

  const PreprocessState state = fit_preprocess(ds);
  CHECK(state.n_output_cols() == 4);  // num + 3 levels
  CHECK(state.feature_names ==
        std::vector<std::string>{"num", "cat=blue", "cat=green", "cat=red"});

  const Dataset out = apply_preprocess(state, ds);
  // Row 0 has level "red" -> indicator in the sorted slot 2 of the block.
  CHECK(out.features(0, 3) == 1.0);
  CHECK(out.features(0, 1) == 0.0);

  // A row with a level unseen at fit time gets an all-zero block.
  Dataset test = ds;
  test.category_levels = {{"red", "green", "blue", "purple"}};
  test.features(0, 1) = 3.0;  // purple
  const Dataset out2 = apply_preprocess(state, test);
  CHECK(out2.features(0, 1) == 0.0);
  CHECK(out2.features(0, 2) == 0.0);
  CHECK(out2.features(0, 3) == 0.0);
}

TEST_CASE("transform depends only on the rows it was fitted on") {
  Dataset all;
  all.task = Task::regression;
  all.features.resize(6, 1);
  all.features << 1, 2, 3, 4, 5, 6;
  all.labels.resize(6);
  all.labels << 1, 2, 3, 4, 5, 6;

  const std::vector<int> train_rows = {0, 1, 2};
  const Dataset train = take_rows(all, train_rows);
  const PreprocessState before = fit_preprocess(train);

  // Mutate held-out rows; the fitted transform must be unchanged.
  all.features(4, 0) = 1000.0;
  all.labels(5) = -999.0;
  const PreprocessState after = fit_preprocess(take_rows(all, train_rows));
  CHECK(before.feat_min == after.feat_min);
  CHECK(before.feat_max == after.feat_max);
  CHECK(before.label_mean == after.label_mean);
  CHECK(before.label_std == after.label_std);
}

TEST_CASE("constant labels and constant columns are handled") {
  Dataset ds;
  ds.task = Task::regression;
  ds.features.resize(3, 2);
  ds.features << 1, 5, 2, 5, 3, 5;  // second column constant
  ds.labels.resize(3);
  ds.labels << 2, 2, 2;
  CHECK_THROWS_AS(fit_preprocess(ds), DataError);

  ds.labels << 1, 2, 3;
  const PreprocessState state = fit_preprocess(ds);
  const Dataset out = apply_preprocess(state, ds);
  CHECK(out.features.col(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("apply_preprocess rejects mismatched column structure") {
  Dataset ds;
  ds.task = Task::regression;
  ds.features.resize(2, 2);
  ds.features << 1, 2, 3, 4;
  ds.labels.resize(2);
  ds.labels << 0, 1;
  const PreprocessState state = fit_preprocess(ds);

  Dataset narrow;
  narrow.task = Task::regression;
  narrow.features.resize(2, 1);
  narrow.features << 1, 2;
  narrow.labels.resize(2);
  narrow.labels << 0, 1;
  CHECK_THROWS_AS(apply_preprocess(state, narrow), DataError);

  Dataset cat = ds;
  cat.categorical_cols = {0};
  cat.category_levels = {{"a", "b"}};
  cat.features(0, 0) = 0;
  cat.features(1, 0) = 1;
  CHECK_THROWS_AS(apply_preprocess(state, cat), DataError);
}

TEST_CASE("bootstrap draws with replacement and matches the source size") {
  Dataset ds;
  ds.task = Task::regression;
  const int n = 10000;
  ds.features.resize(n, 1);
  ds.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    ds.features(i, 0) = i;
    ds.labels(i) = i;
  }

  Rng rng(11);
  double distinct_total = 0.0;
  const int reps = 100;
  for (int rep = 0; rep < reps; ++rep) {
    const Dataset replica = bootstrap(ds, rng);
    REQUIRE(replica.n_rows() == n);
    std::set<int> distinct;
    for (int i = 0; i < n; ++i) {
      CHECK(replica.features(i, 0) == replica.labels(i));  // rows stay intact
      distinct.insert(static_cast<int>(replica.labels(i)));
    }
    distinct_total += static_cast<double>(distinct.size()) / n;
  }
  // Expected distinct fraction 1 - 1/e = 0.632...
  CHECK(distinct_total / reps == doctest::Approx(0.632).epsilon(0.02));
}

TEST_CASE("take_rows keeps metadata and validates indices") {
  Dataset ds;
  ds.task = Task::binary;
  ds.n_classes = 2;
  ds.features.resize(3, 1);
  ds.features << 1, 2, 3;
  ds.labels.resize(3);
  ds.labels << 0, 1, 0;
  ds.label_levels = {"no", "yes"};

  const Dataset sub = take_rows(ds, {2, 0});
  CHECK(sub.n_rows() == 2);
  CHECK(sub.features(0, 0) == 3.0);
  CHECK(sub.labels(1) == 0.0);
  CHECK(sub.label_levels == ds.label_levels);
  CHECK(sub.n_classes == 2);
  CHECK_THROWS_AS(take_rows(ds, {3}), DataError);
}
