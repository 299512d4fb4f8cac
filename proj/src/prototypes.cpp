#include "hain/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "hain/common.hpp"

namespace hain {

using ordered_json = nlohmann::ordered_json;

void PrototypeSet::validate() const {
  if (prototypes.rows() < 1) throw ContractError("PrototypeSet: need at least one prototype");
  if (!(sigma > 0.0)) throw ContractError("PrototypeSet: sigma must be positive");
  if (!(theta > 0.0 && theta < 1.0)) throw ContractError("PrototypeSet: theta must be in (0,1)");
  if (!prototypes.all_finite()) throw ContractError("PrototypeSet: non-finite prototype");
  if (!labels.empty() && labels.size() != prototypes.rows())
    throw ContractError("PrototypeSet: label count mismatch");
}

std::string SimilarityReport::to_json() const {
  ordered_json j;
  j["input_id"] = input_id;
  ordered_json arr = ordered_json::array();
  for (const auto& [idx, sim] : ranked) {
    ordered_json item;
    item["prototype"] = idx;
    item["similarity"] = sim;
    arr.push_back(item);
  }
  j["ranked"] = arr;
  return j.dump();
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ShapeError("squared_distance: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()) + " differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double similarity(std::span<const double> a, std::span<const double> b, double sigma) {
  if (!(sigma > 0.0)) throw ContractError("similarity: sigma must be positive");
  return std::exp(-squared_distance(a, b) / (sigma * sigma));
}

namespace {

std::span<const double> row_of(const Matrix2D& m, std::size_t i) {
  return {m.data() + i * m.cols(), m.cols()};
}

}  // namespace

Matrix2D kmeans_init(const Matrix2D& embedded, std::size_t num_prototypes, Rng& rng,
                     std::size_t max_iter) {
  const std::size_t n = embedded.rows(), dim = embedded.cols();
  if (num_prototypes < 1) throw ContractError("kmeans_init: need at least one prototype");
  if (num_prototypes > n)
    throw ContractError("kmeans_init: " + std::to_string(num_prototypes) +
                        " prototypes exceed " + std::to_string(n) + " samples");

  // k-means++ seeding: D^2-weighted draws after a uniform first pick.
  Matrix2D centroids(num_prototypes, dim);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = static_cast<std::size_t>(rng.next_below(n));
  for (std::size_t j = 0; j < dim; ++j) centroids(0, j) = embedded(first, j);
  for (std::size_t c = 1; c < num_prototypes; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d2 = squared_distance(row_of(embedded, i), row_of(centroids, c - 1));
      min_d2[i] = std::min(min_d2[i], d2);
      total += min_d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double u = rng.next_double() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += min_d2[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.next_below(n));
    }
    for (std::size_t j = 0; j < dim; ++j) centroids(c, j) = embedded(pick, j);
  }

  std::vector<std::size_t> assign(n, 0);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < num_prototypes; ++c) {
        const double d2 = squared_distance(row_of(embedded, i), row_of(centroids, c));
        if (d2 < best) {
          best = d2;
          assign[i] = c;
        }
      }
    }
    Matrix2D next(num_prototypes, dim);
    std::vector<std::size_t> counts(num_prototypes, 0);
    for (std::size_t i = 0; i < n; ++i) {
      counts[assign[i]]++;
      for (std::size_t j = 0; j < dim; ++j) next(assign[i], j) += embedded(i, j);
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < num_prototypes; ++c) {
      if (counts[c] == 0) {
        // Empty cluster keeps its centroid.
        for (std::size_t j = 0; j < dim; ++j) next(c, j) = centroids(c, j);
      } else {
        for (std::size_t j = 0; j < dim; ++j) next(c, j) /= double(counts[c]);
      }
      shift = std::max(shift, squared_distance(row_of(next, c), row_of(centroids, c)));
    }
    centroids = std::move(next);
    if (std::sqrt(shift) < 1e-8) break;
  }
  return centroids;
}

PrototypeSet refine_prototypes(const Matrix2D& embedded, PrototypeSet set, std::size_t epochs) {
  set.validate();
  if (embedded.cols() != set.prototypes.cols())
    throw ShapeError("refine_prototypes: samples are " + embedded.shape_str() +
                     ", prototypes are " + set.prototypes.shape_str());
  const std::size_t n = embedded.rows(), dim = embedded.cols();
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    Matrix2D next = set.prototypes;
    for (std::size_t c = 0; c < set.count(); ++c) {
      std::vector<double> centroid(dim, 0.0);
      std::size_t members = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (similarity(row_of(embedded, i), row_of(set.prototypes, c), set.sigma) > set.theta) {
          ++members;
          for (std::size_t j = 0; j < dim; ++j) centroid[j] += embedded(i, j);
        }
      }
      if (members == 0) continue;  // frozen
      for (std::size_t j = 0; j < dim; ++j) next(c, j) = centroid[j] / double(members);
    }
    set.prototypes = std::move(next);
  }
  return set;
}

SimilarityReport explain_by_prototype(const HainParams& params, const PrototypeSet& set,
                                      std::span<const double> x) {
  set.validate();
  const std::vector<double> phi = embed(params, x);
  if (phi.size() != set.prototypes.cols())
    throw ShapeError("explain_by_prototype: embedding width " + std::to_string(phi.size()) +
                     ", prototypes are " + set.prototypes.shape_str());
  SimilarityReport rep;
  rep.ranked.reserve(set.count());
  for (std::size_t c = 0; c < set.count(); ++c)
    rep.ranked.emplace_back(c, similarity(phi, row_of(set.prototypes, c), set.sigma));
  std::stable_sort(rep.ranked.begin(), rep.ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return rep;
}

double median_pairwise_distance(const Matrix2D& embedded, std::size_t max_samples, Rng& rng) {
  const std::size_t n = embedded.rows();
  if (n < 2) throw ContractError("median_pairwise_distance: need at least 2 samples");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (n > max_samples) {
    rng.shuffle(idx);
    idx.resize(max_samples);
  }
  std::vector<double> dists;
  dists.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b)
      dists.push_back(std::sqrt(squared_distance(row_of(embedded, idx[a]), row_of(embedded, idx[b]))));
  std::sort(dists.begin(), dists.end());
  const std::size_t m = dists.size();
  double med = m % 2 ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
  if (med <= 0.0) med = 1.0;  // degenerate: all points coincide
  return med;
}

std::vector<int> label_prototypes(const Matrix2D& embedded, std::span<const std::size_t> y,
                                  std::size_t num_classes, const PrototypeSet& set) {
  std::vector<int> labels(set.count(), -1);
  for (std::size_t c = 0; c < set.count(); ++c) {
    std::vector<std::size_t> votes(num_classes, 0);
    std::size_t members = 0;
    for (std::size_t i = 0; i < embedded.rows(); ++i) {
      if (similarity(row_of(embedded, i), row_of(set.prototypes, c), set.sigma) > set.theta) {
        votes[y[i]]++;
        ++members;
      }
    }
    if (members == 0) continue;
    labels[c] = int(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  return labels;
}

}  // namespace hain
