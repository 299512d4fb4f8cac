#include "hain/objective.hpp"

#include <cmath>

#include "hain/common.hpp"

namespace hain {

void LossWeights::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0)
    throw ContractError("LossWeights: coefficients must be nonnegative");
}

double cross_entropy(std::span<const double> probabilities, std::size_t label) {
  if (label >= probabilities.size())
    throw ContractError("cross_entropy: label " + std::to_string(label) +
                        " out of range for " + std::to_string(probabilities.size()) + " classes");
  return -std::log(std::max(probabilities[label], 1e-12));
}

double attention_entropy(std::span<const double> alpha) {
  double h = 0.0;
  for (double a : alpha)
    if (a > 0.0) h -= a * std::log(a);
  return h;
}

double sparsity_l1(std::span<const double> gates) {
  if (gates.empty()) return 0.0;
  double s = 0.0;
  for (double g : gates) s += g;
  return s / double(gates.size());
}

double consistency(std::span<const double> alpha_a, std::span<const double> alpha_b) {
  if (alpha_a.size() != alpha_b.size())
    throw ShapeError("consistency: lengths " + std::to_string(alpha_a.size()) + " and " +
                     std::to_string(alpha_b.size()) + " differ");
  double s = 0.0;
  for (std::size_t i = 0; i < alpha_a.size(); ++i) {
    const double dlt = alpha_a[i] - alpha_b[i];
    s += dlt * dlt;
  }
  return s;
}

LossBreakdown total_loss(const ForwardOutput& fwd, std::size_t label, const LossWeights& w) {
  w.validate();
  LossBreakdown b;
  b.pred = cross_entropy(fwd.probabilities, label);
  b.attn = attention_entropy(fwd.trace.alpha_combined);
  b.sparse = sparsity_l1(fwd.trace.gates);
  b.consist = consistency(fwd.trace.alpha_combined, fwd.trace.alpha_cross);
  b.total = b.pred + w.lambda1 * b.attn + w.lambda2 * b.sparse + w.lambda3 * b.consist;
  return b;
}

LossBreakdown LossHandles::breakdown(const Graph& g) const {
  LossBreakdown b;
  b.pred = g.value(pred)(0, 0);
  b.attn = g.value(attn)(0, 0);
  b.sparse = g.value(sparse)(0, 0);
  b.consist = g.value(consist)(0, 0);
  b.total = g.value(total)(0, 0);
  return b;
}

LossHandles build_total_loss(Graph& g, const ForwardHandles& fwd, std::size_t label,
                             const LossWeights& w) {
  w.validate();
  LossHandles h;
  h.pred = g.neg_log_pick(fwd.probabilities, label);
  h.attn = g.entropy_col(fwd.alpha_combined);

  const std::size_t d = g.value(fwd.gates).rows();
  h.sparse = g.scalar_mul(g.sum_all(fwd.gates), 1.0 / double(d));

  NodeId diff = g.sub(fwd.alpha_combined, g.transpose(fwd.alpha_cross));
  h.consist = g.sum_all(g.mul(diff, diff));

  NodeId total = h.pred;
  if (w.lambda1 != 0.0) total = g.add(total, g.scalar_mul(h.attn, w.lambda1));
  if (w.lambda2 != 0.0) total = g.add(total, g.scalar_mul(h.sparse, w.lambda2));
  if (w.lambda3 != 0.0) total = g.add(total, g.scalar_mul(h.consist, w.lambda3));
  h.total = total;
  return h;
}

}  // namespace hain
