#ifndef HAIN_ATTRIBUTION_HPP
#define HAIN_ATTRIBUTION_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hain/model.hpp"
#include "hain/rng.hpp"

namespace hain {

enum class ExplainMethod { kGradAttention, kShapleyExact, kShapleySampled, kGradient };

const char* to_string(ExplainMethod m);
ExplainMethod explain_method_from_string(const std::string& name);

/// Per-feature importance scores from one explainer run. Gradient-weighted
/// attention scores are nonnegative and L2-normalized (a zero vector stays
/// zero and is flagged unnormalized); Shapley values are never rescaled.
struct Explanation {
  ExplainMethod method = ExplainMethod::kGradient;
  std::vector<double> scores;
  bool normalized = false;
  std::size_t target_class = 0;
  std::string input_id;
  std::vector<double> standard_error;  // shapley_sampled only
  std::string baseline_policy;         // shapley methods only
  std::uint64_t seed = 0;              // shapley_sampled only

  std::string to_json() const;
};

/// Cooperative game over feature subsets, encoded as a bitmask (bit i set
/// means feature i is present).
using Game = std::function<double(std::uint32_t subset)>;

/// Game induced by a model: features outside the subset are filled from a
/// per-feature baseline (conventionally the training mean) and the value is
/// the target-class probability.
struct CharacteristicFn {
  const HainParams* model = nullptr;
  std::vector<double> baseline;
  std::vector<double> input;
  std::size_t target_class = 0;

  void validate() const;
  double operator()(std::uint32_t subset) const;
  Game as_game() const;
};

/// Attention-gated gradient attribution: I_i = alpha_i * |g_i| with g the
/// input gradient of the target-class logit, L2-normalized.
Explanation grad_attention_explain(const HainParams& params, std::span<const double> x,
                                   std::size_t target_class);

/// Raw signed input gradient of the target-class logit, unnormalized.
Explanation gradient_explain(const HainParams& params, std::span<const double> x,
                             std::size_t target_class);

/// Exact Shapley values by subset enumeration; d is capped at 15 (2^d game
/// evaluations) — beyond that a CapacityError points to shapley_sampled.
Explanation shapley_exact(const Game& v, std::size_t d);
Explanation shapley_exact(const CharacteristicFn& v);

/// Permutation-sampling estimate with per-feature standard errors.
Explanation shapley_sampled(const Game& v, std::size_t d, std::size_t n_permutations, Rng& rng);
Explanation shapley_sampled(const CharacteristicFn& v, std::size_t n_permutations, Rng& rng);

/// The combine step of gradient-weighted attention, exposed for testing:
/// alpha ⊙ |grads|, L2-normalized when the result is nonzero.
std::pair<std::vector<double>, bool> combine_attention_gradient(std::span<const double> alpha,
                                                                std::span<const double> grads);

/// Gradient of the target-class logit w.r.t. the input row.
std::vector<double> input_gradient(const HainParams& params, std::span<const double> x,
                                   std::size_t target_class);

inline constexpr std::size_t kShapleyExactMaxFeatures = 15;

}  // namespace hain

#endif  // HAIN_ATTRIBUTION_HPP
