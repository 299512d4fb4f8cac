#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hain/common.hpp"
#include "hain/data.hpp"

using namespace hain;

namespace {

struct TempFile {
  std::filesystem::path path;

  explicit TempFile(const std::string& contents) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("hain_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".csv");
    std::ofstream out(path, std::ios::binary);
    out << contents;
  }
  ~TempFile() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("csv with header maps labels in first-appearance order") {
  TempFile f("f1,f2,label\n1.0,2.0,a\n3.5,-1.0,b\n0.25,4.0,a\n");
  Dataset ds = load_csv(f.path.string(), "label", true);
  CHECK(ds.num_samples() == 3);
  CHECK(ds.num_features() == 2);
  CHECK(ds.num_classes() == 2);
  CHECK(ds.class_names == std::vector<std::string>{"a", "b"});
  CHECK(ds.y == std::vector<std::size_t>{0, 1, 0});
  CHECK(ds.feature_names == std::vector<std::string>{"f1", "f2"});
  CHECK(ds.X(1, 0) == doctest::Approx(3.5));
}

TEST_CASE("csv quoting follows rfc 4180") {
  TempFile f("\"a,1\",label\r\n\"1.5\",\"x\"\r\n2.5,\"y\"\"z\"\r\n");
  Dataset ds = load_csv(f.path.string(), "label", true);
  CHECK(ds.feature_names == std::vector<std::string>{"a,1"});
  CHECK(ds.class_names == std::vector<std::string>{"x", "y\"z"});
  CHECK(ds.X(0, 0) == doctest::Approx(1.5));
}

TEST_CASE("empty data section is a contract error") {
  TempFile f("f1,f2,label\n");
  CHECK_THROWS_AS(load_csv(f.path.string(), "label", true), ContractError);
}

TEST_CASE("duplicate header names are a format error") {
  TempFile f("f1,f1,label\n1,2,a\n");
  CHECK_THROWS_AS(load_csv(f.path.string(), "label", true), FormatError);
}

TEST_CASE("ragged rows are a format error") {
  TempFile f("f1,f2,label\n1,2,a\n1,2,3,a\n");
  CHECK_THROWS_AS(load_csv(f.path.string(), "label", true), FormatError);
}

TEST_CASE("unparseable cells name their coordinates") {
  TempFile f("f1,f2,label\n1,2,a\n1,zzz,b\n");
  try {
    load_csv(f.path.string(), "label", true);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("f2") != std::string::npos);
    CHECK(msg.find("zzz") != std::string::npos);
  }
}

TEST_CASE("missing label column is a contract error") {
  TempFile f("f1,f2,label\n1,2,a\n");
  CHECK_THROWS_AS(load_csv(f.path.string(), "target", true), ContractError);
}

TEST_CASE("rows with missing cells are rejected and counted") {
  TempFile f("f1,f2,label\n1,2,a\n,3,b\n4,5,a\n6,,b\n");
  LoadReport report;
  Dataset ds = load_csv(f.path.string(), "label", true, {}, &report);
  CHECK(ds.num_samples() == 2);
  CHECK(report.rows_kept == 2);
  CHECK(report.rows_rejected == 2);
  CHECK(report.rows_kept + report.rows_rejected == 4);  // nothing silently dropped
  CHECK(report.rejected_rows == std::vector<std::size_t>{2, 4});
}

TEST_CASE("mean imputation fills missing cells") {
  TempFile f("f1,f2,label\n1,10,a\n,20,b\n3,30,a\n");
  LoadReport report;
  LoadOptions opts;
  opts.impute_missing = true;
  Dataset ds = load_csv(f.path.string(), "label", true, opts, &report);
  CHECK(ds.num_samples() == 3);
  CHECK(report.values_imputed == 1);
  CHECK(ds.X(1, 0) == doctest::Approx(2.0));  // mean of {1, 3}
}

TEST_CASE("headerless csv takes a column index as the label") {
  TempFile f("1,2,0\n3,4,1\n");
  Dataset ds = load_csv(f.path.string(), "2", false);
  CHECK(ds.num_features() == 2);
  CHECK(ds.class_names == std::vector<std::string>{"0", "1"});
}

TEST_CASE("standardize two-point column with population stddev") {
  Dataset ds;
  ds.X = Matrix2D{{1.0}, {3.0}};
  ds.y = {0, 1};
  ds.feature_names = {"f"};
  ds.class_names = {"a", "b"};
  Dataset out = standardize(ds);
  CHECK(out.X(0, 0) == doctest::Approx(-1.0));
  CHECK(out.X(1, 0) == doctest::Approx(1.0));
  CHECK(out.standardization->mean[0] == doctest::Approx(2.0));
  CHECK(out.standardization->stddev[0] == doctest::Approx(1.0));
}

TEST_CASE("constant columns are centered with stddev recorded as one") {
  Dataset ds;
  ds.X = Matrix2D{{5.0, 1.0}, {5.0, 2.0}, {5.0, 3.0}};
  ds.y = {0, 1, 0};
  ds.feature_names = {"c", "v"};
  ds.class_names = {"a", "b"};
  Dataset out = standardize(ds);
  for (std::size_t i = 0; i < 3; ++i) CHECK(out.X(i, 0) == 0.0);
  CHECK(out.standardization->stddev[0] == 1.0);
}

TEST_CASE("stored stats reproduce the standardized matrix") {
  Rng rng(3);
  Dataset ds;
  ds.X = Matrix2D(20, 4);
  for (std::size_t k = 0; k < ds.X.size(); ++k) ds.X.data()[k] = rng.uniform(-4.0, 9.0);
  ds.y.assign(20, 0);
  ds.y[1] = 1;
  ds.feature_names = {"a", "b", "c", "d"};
  ds.class_names = {"x", "y"};
  Dataset out = standardize(ds);
  Matrix2D again = apply_standardization(*out.standardization, ds.X);
  for (std::size_t k = 0; k < again.size(); ++k)
    CHECK(again.data()[k] == doctest::Approx(out.X.data()[k]).epsilon(1e-12));

  // Standardizing an already standardized dataset is the identity map.
  Dataset twice = standardize(out);
  for (std::size_t k = 0; k < twice.X.size(); ++k)
    CHECK(twice.X.data()[k] == doctest::Approx(out.X.data()[k]).epsilon(1e-10));
}

TEST_CASE("stratified split arithmetic on balanced classes") {
  Dataset ds;
  ds.X = Matrix2D(100, 2);
  ds.y.resize(100);
  for (std::size_t i = 0; i < 100; ++i) ds.y[i] = i % 4;
  ds.feature_names = {"a", "b"};
  ds.class_names = {"c0", "c1", "c2", "c3"};
  Rng rng(10);
  auto [train, test] = stratified_split(ds, 0.2, rng);
  CHECK(test.num_samples() == 20);
  CHECK(train.num_samples() == 80);
  std::vector<std::size_t> per_class(4, 0);
  for (std::size_t v : test.y) per_class[v]++;
  for (std::size_t c = 0; c < 4; ++c) CHECK(per_class[c] == 5);
}

TEST_CASE("stratified split is deterministic and proportion-preserving") {
  Rng gen(7);
  Dataset ds;
  ds.X = Matrix2D(90, 3);
  ds.y.resize(90);
  for (std::size_t i = 0; i < 90; ++i) {
    ds.y[i] = i < 50 ? 0 : (i < 80 ? 1 : 2);
    for (std::size_t j = 0; j < 3; ++j) ds.X(i, j) = gen.normal();
  }
  ds.feature_names = {"a", "b", "c"};
  ds.class_names = {"x", "y", "z"};

  Rng r1(42), r2(42);
  auto [tr1, te1] = stratified_split(ds, 0.3, r1);
  auto [tr2, te2] = stratified_split(ds, 0.3, r2);
  CHECK(te1.y == te2.y);
  CHECK(te1.X == te2.X);

  std::vector<double> class_share(3, 0.0);
  for (std::size_t v : ds.y) class_share[v] += 1.0 / double(ds.num_samples());
  std::vector<std::size_t> test_count(3, 0);
  for (std::size_t v : te1.y) test_count[v]++;
  for (std::size_t c = 0; c < 3; ++c) {
    const double expected = class_share[c] * double(te1.num_samples());
    CHECK(std::fabs(double(test_count[c]) - expected) <= 1.0);
  }
}

TEST_CASE("stratified split rejects singleton classes") {
  Dataset ds;
  ds.X = Matrix2D(3, 1);
  ds.y = {0, 0, 1};
  ds.feature_names = {"a"};
  ds.class_names = {"x", "y"};
  Rng rng(1);
  CHECK_THROWS_AS(stratified_split(ds, 0.5, rng), ContractError);
}

TEST_CASE("synthetic ground truth has the requested size and is reproducible") {
  SyntheticSpec spec;
  spec.n = 60;
  spec.d = 30;
  spec.num_classes = 3;
  spec.n_informative = 5;
  spec.seed = 77;
  auto [ds1, inf1] = generate_synthetic(spec);
  auto [ds2, inf2] = generate_synthetic(spec);
  CHECK(inf1.size() == 5);
  CHECK(inf1 == inf2);
  CHECK(ds1.X == ds2.X);  // byte-identical
  CHECK(ds1.y == ds2.y);
}

TEST_CASE("zero noise with wide separation is separable by nearest centroid") {
  SyntheticSpec spec;
  spec.n = 40;
  spec.d = 12;
  spec.num_classes = 2;
  spec.n_informative = 4;
  spec.separation = 6.0;
  spec.noise_stddev = 0.0;
  spec.seed = 5;
  auto [ds, informative] = generate_synthetic(spec);

  // Nearest-centroid on the noiseless data classifies perfectly.
  Matrix2D centroids(2, spec.d);
  std::vector<std::size_t> counts(2, 0);
  for (std::size_t i = 0; i < ds.num_samples(); ++i) {
    counts[ds.y[i]]++;
    for (std::size_t j = 0; j < spec.d; ++j) centroids(ds.y[i], j) += ds.X(i, j);
  }
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t j = 0; j < spec.d; ++j) centroids(c, j) /= double(counts[c]);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.num_samples(); ++i) {
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t j = 0; j < spec.d; ++j) {
      d0 += (ds.X(i, j) - centroids(0, j)) * (ds.X(i, j) - centroids(0, j));
      d1 += (ds.X(i, j) - centroids(1, j)) * (ds.X(i, j) - centroids(1, j));
    }
    if ((d0 < d1 ? 0u : 1u) == ds.y[i]) ++correct;
  }
  CHECK(correct == ds.num_samples());

  // Classes differ only on planted coordinates.
  for (std::size_t j = 0; j < spec.d; ++j) {
    const bool planted = std::find(informative.begin(), informative.end(), j) != informative.end();
    const double diff = std::fabs(centroids(0, j) - centroids(1, j));
    if (!planted) CHECK(diff < 1e-12);
  }
}

TEST_CASE("synthetic labels are balanced") {
  SyntheticSpec spec;
  spec.n = 101;
  spec.d = 6;
  spec.num_classes = 4;
  spec.n_informative = 2;
  auto [ds, informative] = generate_synthetic(spec);
  std::vector<std::size_t> counts(4, 0);
  for (std::size_t v : ds.y) counts[v]++;
  for (std::size_t c = 0; c < 4; ++c) CHECK(counts[c] >= 25);
}
