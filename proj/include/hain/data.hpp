#ifndef HAIN_DATA_HPP
#define HAIN_DATA_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hain/matrix.hpp"
#include "hain/rng.hpp"

namespace hain {

/// Per-feature statistics fitted by standardize(); applying them to the
/// matrix they were fitted on reproduces the standardized matrix.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> stddev;  // recorded as 1 for zero-variance features
};

/// Feature matrix with integer class labels and naming metadata.
struct Dataset {
  Matrix2D X;                        // n x d
  std::vector<std::size_t> y;        // n entries, each < num_classes()
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  std::optional<Standardization> standardization;

  std::size_t num_samples() const { return X.rows(); }
  std::size_t num_features() const { return X.cols(); }
  std::size_t num_classes() const { return class_names.size(); }
  void validate() const;
};

struct LoadReport {
  std::size_t rows_kept = 0;
  std::size_t rows_rejected = 0;       // missing values under reject policy
  std::size_t values_imputed = 0;      // under impute policy
  std::vector<std::size_t> rejected_rows;  // 1-based data row numbers
};

struct LoadOptions {
  bool impute_missing = false;  // default: reject rows with empty cells
};

/// Parse an RFC-4180 CSV into a Dataset. The label column is matched by
/// name when has_header is true, otherwise label_column is a 0-based
/// column index rendered as a string. Labels map to contiguous class
/// indices in first-appearance order.
Dataset load_csv(const std::string& path, const std::string& label_column,
                 bool has_header, const LoadOptions& opts = {},
                 LoadReport* report = nullptr);

/// Zero-mean unit-variance per feature (population stddev). Zero-variance
/// features are centered and their stddev recorded as 1. Stats are stored
/// on the returned dataset.
Dataset standardize(const Dataset& ds);

/// Apply previously fitted stats to a raw matrix.
Matrix2D apply_standardization(const Standardization& stats, const Matrix2D& X);

/// Per-class proportional split, deterministic given the rng. Every class
/// needs at least 2 samples.
std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double test_fraction, Rng& rng);

/// Recipe for a class-conditional Gaussian benchmark with planted
/// informative features.
struct SyntheticSpec {
  std::size_t n = 200;
  std::size_t d = 20;
  std::size_t num_classes = 2;
  std::size_t n_informative = 4;
  double separation = 2.0;
  double noise_stddev = 1.0;
  std::uint64_t seed = 42;
};

/// Class means differ only on n_informative planted coordinates, where each
/// class carries a distinct ±separation/2 sign pattern; everything else is
/// pure noise. Returns the dataset and the sorted planted index set.
std::pair<Dataset, std::vector<std::size_t>> generate_synthetic(const SyntheticSpec& spec);

}  // namespace hain

#endif  // HAIN_DATA_HPP
