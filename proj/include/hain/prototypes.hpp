#ifndef HAIN_PROTOTYPES_HPP
#define HAIN_PROTOTYPES_HPP

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hain/matrix.hpp"
#include "hain/model.hpp"
#include "hain/rng.hpp"

namespace hain {

/// Representative points in the model's embedding space with an RBF
/// similarity bandwidth and a membership threshold.
struct PrototypeSet {
  Matrix2D prototypes;           // P x reduced_dim
  double sigma = 1.0;            // RBF bandwidth, > 0
  double theta = 0.5;            // membership threshold, in (0,1)
  std::vector<int> labels;       // majority class per prototype; -1 unknown

  std::size_t count() const { return prototypes.rows(); }
  void validate() const;
};

/// Similarities of one input against every prototype, sorted descending.
struct SimilarityReport {
  std::string input_id;
  std::vector<std::pair<std::size_t, double>> ranked;  // (prototype index, similarity)

  std::string to_json() const;
};

/// Lloyd iterations with k-means++ seeding; stops after max_iter rounds or
/// when the largest centroid shift drops below 1e-8.
Matrix2D kmeans_init(const Matrix2D& embedded, std::size_t num_prototypes, Rng& rng,
                     std::size_t max_iter = 100);

/// Threshold-gated refinement: each epoch recomputes the neighborhoods
/// N_j = { x : sim(x, p_j) > theta } against the epoch-start prototypes and
/// moves each prototype to its neighborhood centroid; empty neighborhoods
/// freeze their prototype.
PrototypeSet refine_prototypes(const Matrix2D& embedded, PrototypeSet set, std::size_t epochs);

/// exp(-||a - b||^2 / sigma^2), in (0, 1].
double similarity(std::span<const double> a, std::span<const double> b, double sigma);

/// Embed x through the model and rank all prototypes by similarity.
SimilarityReport explain_by_prototype(const HainParams& params, const PrototypeSet& set,
                                      std::span<const double> x);

/// Median pairwise embedding distance over a subsample (bandwidth default).
double median_pairwise_distance(const Matrix2D& embedded, std::size_t max_samples, Rng& rng);

/// Majority class of each prototype's final neighborhood (-1 when empty).
std::vector<int> label_prototypes(const Matrix2D& embedded, std::span<const std::size_t> y,
                                  std::size_t num_classes, const PrototypeSet& set);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace hain

#endif  // HAIN_PROTOTYPES_HPP
