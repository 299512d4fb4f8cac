#include "hain/attribution.hpp"

#include <bit>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "hain/common.hpp"
#include "hain/objective.hpp"

namespace hain {

using ordered_json = nlohmann::ordered_json;

const char* to_string(ExplainMethod m) {
  switch (m) {
    case ExplainMethod::kGradAttention: return "grad_attention";
    case ExplainMethod::kShapleyExact: return "shapley_exact";
    case ExplainMethod::kShapleySampled: return "shapley_sampled";
    case ExplainMethod::kGradient: return "gradient";
  }
  return "unknown";
}

ExplainMethod explain_method_from_string(const std::string& name) {
  if (name == "grad_attention" || name == "grad-attention") return ExplainMethod::kGradAttention;
  if (name == "shapley_exact" || name == "shapley-exact") return ExplainMethod::kShapleyExact;
  if (name == "shapley_sampled" || name == "shapley-sampled") return ExplainMethod::kShapleySampled;
  if (name == "gradient") return ExplainMethod::kGradient;
  throw ContractError("unknown explain method '" + name + "'");
}

std::string Explanation::to_json() const {
  ordered_json j;
  j["method"] = to_string(method);
  j["target_class"] = target_class;
  j["scores"] = scores;
  j["normalized"] = normalized;
  j["baseline_policy"] = baseline_policy.empty() ? ordered_json(nullptr) : ordered_json(baseline_policy);
  if (method == ExplainMethod::kShapleySampled) {
    j["seed"] = seed;
    j["standard_error"] = standard_error;
  } else {
    j["seed"] = nullptr;
  }
  if (!input_id.empty()) j["input_id"] = input_id;
  return j.dump();
}

void CharacteristicFn::validate() const {
  if (!model) throw ContractError("CharacteristicFn: null model");
  const std::size_t d = model->config.input_dim;
  if (baseline.size() != d || input.size() != d)
    throw ShapeError("CharacteristicFn: baseline/input length must equal input_dim " +
                     std::to_string(d));
  if (target_class >= model->config.num_classes)
    throw ContractError("CharacteristicFn: target class out of range");
}

double CharacteristicFn::operator()(std::uint32_t subset) const {
  std::vector<double> x(input.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = (subset >> i) & 1u ? input[i] : baseline[i];
  return forward(*model, x).probabilities[target_class];
}

Game CharacteristicFn::as_game() const {
  validate();
  return [copy = *this](std::uint32_t subset) { return copy(subset); };
}

std::vector<double> input_gradient(const HainParams& params, std::span<const double> x,
                                   std::size_t target_class) {
  if (target_class >= params.config.num_classes)
    throw ContractError("input_gradient: class " + std::to_string(target_class) +
                        " out of range for " + std::to_string(params.config.num_classes));
  Graph g;
  ParamNodes pn = register_params(g, params);
  ForwardHandles fh = build_forward(g, pn, x);
  NodeId target = g.pick_entry(fh.logits, 0, target_class);
  g.backward(target);
  return g.grad(fh.input).storage();
}

std::pair<std::vector<double>, bool> combine_attention_gradient(std::span<const double> alpha,
                                                                std::span<const double> grads) {
  if (alpha.size() != grads.size())
    throw ShapeError("combine_attention_gradient: lengths " + std::to_string(alpha.size()) +
                     " and " + std::to_string(grads.size()) + " differ");
  std::vector<double> scores(alpha.size());
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    scores[i] = alpha[i] * std::fabs(grads[i]);
    norm_sq += scores[i] * scores[i];
  }
  if (norm_sq == 0.0) return {scores, false};
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& s : scores) s *= inv;
  return {scores, true};
}

Explanation grad_attention_explain(const HainParams& params, std::span<const double> x,
                                   std::size_t target_class) {
  if (target_class >= params.config.num_classes)
    throw ContractError("grad_attention_explain: target class out of range");
  Graph g;
  ParamNodes pn = register_params(g, params);
  ForwardHandles fh = build_forward(g, pn, x);
  NodeId target = g.pick_entry(fh.logits, 0, target_class);
  g.backward(target);
  const std::vector<double> grads = g.grad(fh.input).storage();
  const std::vector<double> alpha = g.value(fh.alpha_combined).storage();
  auto [scores, normalized] = combine_attention_gradient(alpha, grads);
  Explanation e;
  e.method = ExplainMethod::kGradAttention;
  e.scores = std::move(scores);
  e.normalized = normalized;
  e.target_class = target_class;
  return e;
}

Explanation gradient_explain(const HainParams& params, std::span<const double> x,
                             std::size_t target_class) {
  Explanation e;
  e.method = ExplainMethod::kGradient;
  e.scores = input_gradient(params, x, target_class);
  e.normalized = false;
  e.target_class = target_class;
  return e;
}

Explanation shapley_exact(const Game& v, std::size_t d) {
  if (d == 0) throw ContractError("shapley_exact: d must be >= 1");
  if (d > kShapleyExactMaxFeatures)
    throw CapacityError("shapley_exact: d = " + std::to_string(d) + " exceeds the enumeration cap " +
                        std::to_string(kShapleyExactMaxFeatures) + "; use shapley_sampled");
  const std::uint32_t full = (1u << d) - 1u;

  // One evaluation per subset, memoized up front.
  std::vector<double> value(std::size_t(full) + 1);
  for (std::uint32_t s = 0; s <= full; ++s) value[s] = v(s);

  // w[s] = s! (d - s - 1)! / d!  — all factorials below 2^53 for d <= 15.
  std::vector<double> fact(d + 1, 1.0);
  for (std::size_t i = 1; i <= d; ++i) fact[i] = fact[i - 1] * double(i);
  std::vector<double> w(d);
  for (std::size_t s = 0; s < d; ++s) w[s] = fact[s] * fact[d - s - 1] / fact[d];

  Explanation e;
  e.method = ExplainMethod::kShapleyExact;
  e.scores.assign(d, 0.0);
  for (std::uint32_t s = 0; s <= full; ++s) {
    const std::size_t size = static_cast<std::size_t>(std::popcount(s));
    for (std::size_t i = 0; i < d; ++i) {
      if (s & (1u << i)) continue;
      e.scores[i] += w[size] * (value[s | (1u << i)] - value[s]);
    }
  }
  e.normalized = false;
  return e;
}

Explanation shapley_exact(const CharacteristicFn& v) {
  v.validate();
  const std::size_t d = v.model->config.input_dim;
  Explanation e = shapley_exact(v.as_game(), d);
  e.target_class = v.target_class;
  e.baseline_policy = "training_mean";
  return e;
}

Explanation shapley_sampled(const Game& v, std::size_t d, std::size_t n_permutations, Rng& rng) {
  if (d == 0) throw ContractError("shapley_sampled: d must be >= 1");
  if (n_permutations == 0) throw ContractError("shapley_sampled: n_permutations must be >= 1");

  std::vector<double> sum(d, 0.0), sum_sq(d, 0.0);
  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t t = 0; t < n_permutations; ++t) {
    rng.shuffle(perm);
    std::uint32_t subset = 0;
    double prev = v(0);
    for (std::size_t k = 0; k < d; ++k) {
      subset |= 1u << perm[k];
      const double cur = v(subset);
      const double marginal = cur - prev;
      sum[perm[k]] += marginal;
      sum_sq[perm[k]] += marginal * marginal;
      prev = cur;
    }
  }

  Explanation e;
  e.method = ExplainMethod::kShapleySampled;
  e.scores.resize(d);
  e.standard_error.resize(d);
  const double n = double(n_permutations);
  for (std::size_t i = 0; i < d; ++i) {
    e.scores[i] = sum[i] / n;
    const double var = n > 1 ? std::max(0.0, (sum_sq[i] - sum[i] * sum[i] / n) / (n - 1)) : 0.0;
    e.standard_error[i] = std::sqrt(var / n);
  }
  e.normalized = false;
  e.seed = rng.seed();
  return e;
}

Explanation shapley_sampled(const CharacteristicFn& v, std::size_t n_permutations, Rng& rng) {
  v.validate();
  const std::size_t d = v.model->config.input_dim;
  if (d > 31) throw CapacityError("shapley_sampled: bitmask games support at most 31 features");
  Explanation e = shapley_sampled(v.as_game(), d, n_permutations, rng);
  e.target_class = v.target_class;
  e.baseline_policy = "training_mean";
  return e;
}

}  // namespace hain
