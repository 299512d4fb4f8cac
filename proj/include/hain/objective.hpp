#ifndef HAIN_OBJECTIVE_HPP
#define HAIN_OBJECTIVE_HPP

#include <span>

#include "hain/graph.hpp"
#include "hain/model.hpp"

namespace hain {

struct LossWeights {
  double lambda1 = 0.0;  // attention entropy
  double lambda2 = 0.0;  // gate sparsity
  double lambda3 = 0.0;  // cross-layer consistency

  void validate() const;
};

/// The four loss terms plus their weighted total. The recombination
/// identity total = pred + l1*attn + l2*sparse + l3*consist holds to 1e-12.
struct LossBreakdown {
  double pred = 0.0;
  double attn = 0.0;
  double sparse = 0.0;
  double consist = 0.0;
  double total = 0.0;
};

/// -ln of the labelled probability, clamped below at 1e-12.
double cross_entropy(std::span<const double> probabilities, std::size_t label);

/// Shannon entropy with the 0·ln 0 := 0 convention; in [0, ln n].
double attention_entropy(std::span<const double> alpha);

/// Mean of the gate vector; the gates, not the softmax simplex, carry the
/// L1 pressure (a simplex has constant L1 norm).
double sparsity_l1(std::span<const double> gates);

/// Squared Euclidean distance between two equal-length distributions.
double consistency(std::span<const double> alpha_a, std::span<const double> alpha_b);

/// Breakdown recomputed from a forward output's trace and probabilities.
LossBreakdown total_loss(const ForwardOutput& fwd, std::size_t label, const LossWeights& w);

/// Loss node handles on a live forward graph.
struct LossHandles {
  NodeId pred = -1;
  NodeId attn = -1;
  NodeId sparse = -1;
  NodeId consist = -1;
  NodeId total = -1;

  LossBreakdown breakdown(const Graph& g) const;
};

/// Attach the differentiable loss to a forward pass already built on g.
LossHandles build_total_loss(Graph& g, const ForwardHandles& fwd, std::size_t label,
                             const LossWeights& w);

}  // namespace hain

#endif  // HAIN_OBJECTIVE_HPP
