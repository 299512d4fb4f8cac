#include "hain/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "hain/common.hpp"

namespace hain {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json number_or_null(double v) {
  return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
}

}  // namespace

std::size_t ConfusionCounts::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::string MetricsReport::to_json() const {
  ordered_json j;
  j["schema_version"] = 1;
  j["accuracy"] = accuracy;
  j["precision_macro"] = precision_macro;
  j["recall_macro"] = recall_macro;
  j["f1_macro"] = f1_macro;
  ordered_json per_class = ordered_json::array();
  for (double v : auc_roc_per_class) per_class.push_back(number_or_null(v));
  j["auc_roc_per_class"] = per_class;
  j["auc_roc_macro"] = auc_roc_macro;
  j["auc_pr_macro"] = auc_pr_macro;
  ordered_json conf = ordered_json::array();
  for (std::size_t t = 0; t < confusion.num_classes; ++t) {
    ordered_json row = ordered_json::array();
    for (std::size_t p = 0; p < confusion.num_classes; ++p) row.push_back(confusion.at(t, p));
    conf.push_back(row);
  }
  j["confusion"] = conf;
  j["faithfulness"] = number_or_null(faithfulness);
  j["stability"] = number_or_null(stability);
  j["top_k"] = top_k;
  j["comprehensiveness"] = number_or_null(comprehensiveness);
  j["sufficiency"] = number_or_null(sufficiency);
  j["explanation_time_ms"] = number_or_null(explanation_time_ms);
  j["explanation_time_std_ms"] = number_or_null(explanation_time_std_ms);
  return j.dump();
}

namespace {

struct BinaryCounts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

BinaryCounts count_binary(std::span<const std::size_t> y_true, std::size_t c) {
  BinaryCounts b;
  for (std::size_t v : y_true) (v == c ? b.positives : b.negatives)++;
  return b;
}

/// Indices sorted by class-c score descending, grouped by tied scores.
std::vector<std::size_t> order_by_score(std::span<const std::size_t> y_true,
                                        const Matrix2D& scores, std::size_t c) {
  std::vector<std::size_t> idx(y_true.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores(a, c) > scores(b, c);
  });
  return idx;
}

}  // namespace

CurveSeries roc_curve(std::span<const std::size_t> y_true, const Matrix2D& scores, std::size_t c) {
  if (y_true.empty()) throw ContractError("roc_curve: empty input");
  if (scores.rows() != y_true.size())
    throw ShapeError("roc_curve: " + std::to_string(y_true.size()) + " labels, scores " +
                     scores.shape_str());
  const BinaryCounts bc = count_binary(y_true, c);
  const auto idx = order_by_score(y_true, scores, c);

  CurveSeries curve;
  curve.x.push_back(0.0);
  curve.y.push_back(0.0);
  curve.threshold.push_back(std::numeric_limits<double>::infinity());
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    const double t = scores(idx[i], c);
    // Consume the whole tie group before emitting a point.
    while (i < idx.size() && scores(idx[i], c) == t) {
      (y_true[idx[i]] == c ? tp : fp)++;
      ++i;
    }
    curve.x.push_back(bc.negatives ? double(fp) / double(bc.negatives) : 0.0);
    curve.y.push_back(bc.positives ? double(tp) / double(bc.positives) : 0.0);
    curve.threshold.push_back(t);
  }
  if (curve.x.back() != 1.0 || curve.y.back() != 1.0) {
    curve.x.push_back(1.0);
    curve.y.push_back(1.0);
    curve.threshold.push_back(-std::numeric_limits<double>::infinity());
  }
  return curve;
}

CurveSeries pr_curve(std::span<const std::size_t> y_true, const Matrix2D& scores, std::size_t c) {
  if (y_true.empty()) throw ContractError("pr_curve: empty input");
  if (scores.rows() != y_true.size())
    throw ShapeError("pr_curve: " + std::to_string(y_true.size()) + " labels, scores " +
                     scores.shape_str());
  const BinaryCounts bc = count_binary(y_true, c);
  const auto idx = order_by_score(y_true, scores, c);

  CurveSeries curve;
  curve.x.push_back(0.0);
  curve.y.push_back(1.0);
  curve.threshold.push_back(std::numeric_limits<double>::infinity());
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    const double t = scores(idx[i], c);
    while (i < idx.size() && scores(idx[i], c) == t) {
      (y_true[idx[i]] == c ? tp : fp)++;
      ++i;
    }
    const std::size_t predicted = tp + fp;
    curve.x.push_back(bc.positives ? double(tp) / double(bc.positives) : 0.0);
    curve.y.push_back(predicted ? double(tp) / double(predicted) : 0.0);
    curve.threshold.push_back(t);
  }
  return curve;
}

namespace {

double trapezoid_area(const CurveSeries& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.x.size(); ++i)
    area += (curve.x[i] - curve.x[i - 1]) * (curve.y[i] + curve.y[i - 1]) * 0.5;
  return area;
}

}  // namespace

MetricsReport classification_metrics(std::span<const std::size_t> y_true,
                                     std::span<const std::size_t> y_pred,
                                     const Matrix2D& scores) {
  const std::size_t n = y_true.size();
  if (n == 0) throw ContractError("classification_metrics: empty input");
  if (y_pred.size() != n || scores.rows() != n)
    throw ShapeError("classification_metrics: inconsistent lengths (" + std::to_string(n) + ", " +
                     std::to_string(y_pred.size()) + ", " + scores.shape_str() + ")");
  const std::size_t K = scores.cols();
  for (std::size_t i = 0; i < n; ++i)
    if (y_true[i] >= K || y_pred[i] >= K)
      throw ContractError("classification_metrics: class index outside score columns");

  MetricsReport rep;
  rep.confusion.num_classes = K;
  rep.confusion.counts.assign(K * K, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    rep.confusion.at(y_true[i], y_pred[i])++;
    if (y_true[i] == y_pred[i]) ++correct;
  }
  rep.accuracy = double(correct) / double(n);

  double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0;
  for (std::size_t c = 0; c < K; ++c) {
    std::size_t tp = rep.confusion.at(c, c), fp = 0, fn = 0;
    for (std::size_t t = 0; t < K; ++t) {
      if (t == c) continue;
      fp += rep.confusion.at(t, c);
      fn += rep.confusion.at(c, t);
    }
    const double prec = (tp + fp) ? double(tp) / double(tp + fp) : 0.0;
    const double rec = (tp + fn) ? double(tp) / double(tp + fn) : 0.0;
    const double f1 = (prec + rec > 0.0) ? 2.0 * prec * rec / (prec + rec) : 0.0;
    p_sum += prec;
    r_sum += rec;
    f_sum += f1;
  }
  rep.precision_macro = p_sum / double(K);
  rep.recall_macro = r_sum / double(K);
  rep.f1_macro = f_sum / double(K);

  rep.auc_roc_per_class.assign(K, std::numeric_limits<double>::quiet_NaN());
  double roc_sum = 0.0, pr_sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t c = 0; c < K; ++c) {
    const BinaryCounts bc = count_binary(y_true, c);
    if (bc.positives == 0 || bc.negatives == 0) continue;  // AUC undefined
    rep.auc_roc_per_class[c] = trapezoid_area(roc_curve(y_true, scores, c));
    roc_sum += rep.auc_roc_per_class[c];
    pr_sum += trapezoid_area(pr_curve(y_true, scores, c));
    ++defined;
  }
  rep.auc_roc_macro = defined ? roc_sum / double(defined) : std::numeric_limits<double>::quiet_NaN();
  rep.auc_pr_macro = defined ? pr_sum / double(defined) : std::numeric_limits<double>::quiet_NaN();
  return rep;
}

double faithfulness(std::span<const double> alpha, std::span<const double> grads,
                    bool absolute_gradients) {
  if (alpha.size() != grads.size())
    throw ShapeError("faithfulness: lengths " + std::to_string(alpha.size()) + " and " +
                     std::to_string(grads.size()) + " differ");
  const std::size_t n = alpha.size();
  if (n < 2) throw ContractError("faithfulness: need at least 2 features");
  double ma = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += alpha[i];
    mg += absolute_gradients ? std::fabs(grads[i]) : grads[i];
  }
  ma /= double(n);
  mg /= double(n);
  double cov = 0.0, va = 0.0, vg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = alpha[i] - ma;
    const double dg = (absolute_gradients ? std::fabs(grads[i]) : grads[i]) - mg;
    cov += da * dg;
    va += da * da;
    vg += dg * dg;
  }
  if (va == 0.0 || vg == 0.0) return 0.0;
  return cov / std::sqrt(va * vg);
}

namespace {

void l2_normalize(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  if (s == 0.0) return;
  const double inv = 1.0 / std::sqrt(s);
  for (double& x : v) x *= inv;
}

double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

double stability(const ExplainerFn& explainer, const Matrix2D& inputs, double sigma_eps,
                 std::size_t trials, Rng& rng) {
  if (!(sigma_eps > 0.0)) throw ContractError("stability: sigma_eps must be positive");
  if (trials == 0 || inputs.rows() == 0) throw ContractError("stability: nothing to evaluate");
  const std::size_t d = inputs.cols();
  double dist_sum = 0.0;
  std::vector<double> x(d), xp(d);
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) x[j] = inputs(i, j);
    std::vector<double> base = explainer(x);
    l2_normalize(base);
    for (std::size_t t = 0; t < trials; ++t) {
      for (std::size_t j = 0; j < d; ++j) xp[j] = x[j] + rng.normal(0.0, sigma_eps);
      std::vector<double> pert = explainer(xp);
      l2_normalize(pert);
      if (pert.size() != base.size())
        throw ContractError("stability: explainer changed output length");
      dist_sum += l2_distance(base, pert);
    }
  }
  return 1.0 - dist_sum / double(inputs.rows() * trials);
}

namespace {

double masked_accuracy(const HainParams& params, const Dataset& ds,
                       std::span<const std::size_t> ranking, std::size_t k, bool keep_top) {
  const std::size_t d = ds.num_features();
  std::vector<double> baseline(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < ds.num_samples(); ++i) m += ds.X(i, j);
    baseline[j] = m / double(ds.num_samples());
  }
  std::vector<std::uint8_t> in_top(d, 0);
  for (std::size_t r = 0; r < k; ++r) {
    if (ranking[r] >= d) throw ContractError("masked_accuracy: ranking index out of range");
    in_top[ranking[r]] = 1;
  }
  std::size_t correct = 0;
  std::vector<double> x(d);
  for (std::size_t i = 0; i < ds.num_samples(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const bool keep = keep_top ? bool(in_top[j]) : !in_top[j];
      x[j] = keep ? ds.X(i, j) : baseline[j];
    }
    ForwardOutput fw = forward(params, x);
    std::size_t arg = 0;
    for (std::size_t c = 1; c < fw.probabilities.size(); ++c)
      if (fw.probabilities[c] > fw.probabilities[arg]) arg = c;
    if (arg == ds.y[i]) ++correct;
  }
  return double(correct) / double(ds.num_samples());
}

double full_accuracy(const HainParams& params, const Dataset& ds) {
  std::size_t correct = 0;
  const std::size_t d = ds.num_features();
  for (std::size_t i = 0; i < ds.num_samples(); ++i) {
    ForwardOutput fw = forward(params, std::span<const double>(ds.X.data() + i * d, d));
    std::size_t arg = 0;
    for (std::size_t c = 1; c < fw.probabilities.size(); ++c)
      if (fw.probabilities[c] > fw.probabilities[arg]) arg = c;
    if (arg == ds.y[i]) ++correct;
  }
  return double(correct) / double(ds.num_samples());
}

void check_mask_metric_inputs(const Dataset& ds, std::span<const std::size_t> ranking,
                              std::size_t k) {
  if (k > ds.num_features())
    throw ContractError("top-k metric: k exceeds the feature count");
  if (ranking.size() < k)
    throw ContractError("top-k metric: ranking shorter than k");
  if (ds.num_samples() == 0) throw ContractError("top-k metric: empty dataset");
}

}  // namespace

double sufficiency(const HainParams& params, const Dataset& ds,
                   std::span<const std::size_t> ranking, std::size_t k) {
  check_mask_metric_inputs(ds, ranking, k);
  const double acc_all = full_accuracy(params, ds);
  if (acc_all == 0.0)
    throw EvaluationError("sufficiency: full-feature accuracy is zero; ratio undefined");
  if (k == ds.num_features()) return 1.0;  // nothing masked by definition
  const double acc_top = masked_accuracy(params, ds, ranking, k, /*keep_top=*/true);
  return acc_top / acc_all;
}

double comprehensiveness(const HainParams& params, const Dataset& ds,
                         std::span<const std::size_t> ranking, std::size_t k) {
  check_mask_metric_inputs(ds, ranking, k);
  const double acc_all = full_accuracy(params, ds);
  if (acc_all == 0.0)
    throw EvaluationError("comprehensiveness: full-feature accuracy is zero; ratio undefined");
  if (k == 0) return 0.0;  // nothing removed
  const double acc_masked = masked_accuracy(params, ds, ranking, k, /*keep_top=*/false);
  return 1.0 - acc_masked / acc_all;
}

TimingResult explanation_timing(const ExplainerFn& explainer, const Matrix2D& inputs,
                                std::size_t repeats) {
  if (repeats < 3) throw ContractError("explanation_timing: repeats must be >= 3");
  if (inputs.rows() == 0) throw ContractError("explanation_timing: no inputs");
  const std::size_t d = inputs.cols();
  std::vector<double> x(d);
  auto pass = [&] {
    for (std::size_t i = 0; i < inputs.rows(); ++i) {
      for (std::size_t j = 0; j < d; ++j) x[j] = inputs(i, j);
      volatile double sink = 0.0;
      const std::vector<double> e = explainer(x);
      if (!e.empty()) sink = e[0];
      (void)sink;
    }
  };
  pass();  // warm-up
  std::vector<double> per_input_ms(repeats);
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    pass();
    const auto t1 = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    per_input_ms[r] = ms / double(inputs.rows());
  }
  TimingResult res;
  for (double v : per_input_ms) res.mean_ms += v;
  res.mean_ms /= double(repeats);
  double var = 0.0;
  for (double v : per_input_ms) var += (v - res.mean_ms) * (v - res.mean_ms);
  res.std_ms = std::sqrt(var / double(repeats - 1));
  return res;
}

}  // namespace hain
