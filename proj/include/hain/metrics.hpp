#ifndef HAIN_METRICS_HPP
#define HAIN_METRICS_HPP

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hain/data.hpp"
#include "hain/matrix.hpp"
#include "hain/model.hpp"
#include "hain/rng.hpp"

namespace hain {

/// K x K integer counts, true class by predicted class.
struct ConfusionCounts {
  std::size_t num_classes = 0;
  std::vector<std::size_t> counts;  // row-major

  std::size_t& at(std::size_t true_c, std::size_t pred_c) { return counts[true_c * num_classes + pred_c]; }
  std::size_t at(std::size_t true_c, std::size_t pred_c) const { return counts[true_c * num_classes + pred_c]; }
  std::size_t total() const;
};

/// One (x, y) point series of a threshold curve.
struct CurveSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> threshold;
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double f1_macro = 0.0;
  std::vector<double> auc_roc_per_class;  // NaN where undefined (single-class)
  double auc_roc_macro = 0.0;
  double auc_pr_macro = 0.0;
  ConfusionCounts confusion;

  // Interpretability block; NaN until filled by the harness.
  double faithfulness = std::numeric_limits<double>::quiet_NaN();
  double stability = std::numeric_limits<double>::quiet_NaN();
  double comprehensiveness = std::numeric_limits<double>::quiet_NaN();
  double sufficiency = std::numeric_limits<double>::quiet_NaN();
  std::size_t top_k = 0;
  double explanation_time_ms = std::numeric_limits<double>::quiet_NaN();
  double explanation_time_std_ms = std::numeric_limits<double>::quiet_NaN();

  std::string to_json() const;
};

/// Accuracy, macro precision/recall/F1 (0/0 := 0), one-vs-rest AUC-ROC and
/// AUC-PR by trapezoidal integration over score thresholds.
MetricsReport classification_metrics(std::span<const std::size_t> y_true,
                                     std::span<const std::size_t> y_pred,
                                     const Matrix2D& scores);

/// ROC curve (x = FPR, y = TPR) for one-vs-rest class c; starts at (0,0),
/// ends at (1,1).
CurveSeries roc_curve(std::span<const std::size_t> y_true, const Matrix2D& scores, std::size_t c);

/// Precision-recall curve (x = recall, y = precision) for class c.
CurveSeries pr_curve(std::span<const std::size_t> y_true, const Matrix2D& scores, std::size_t c);

/// Pearson correlation between attention weights and gradient magnitudes
/// (signed gradients behind the flag); zero variance on either side gives 0.
double faithfulness(std::span<const double> alpha, std::span<const double> grads,
                    bool absolute_gradients = true);

/// Explanation map used by the stability probe.
using ExplainerFn = std::function<std::vector<double>(std::span<const double>)>;

/// 1 - mean L2 distance between L2-normalized explanations of x and of
/// x + eps, with eps ~ N(0, sigma_eps^2) per coordinate.
double stability(const ExplainerFn& explainer, const Matrix2D& inputs, double sigma_eps,
                 std::size_t trials, Rng& rng);

/// acc(top-k kept, rest masked to the per-feature mean) / acc(all).
double sufficiency(const HainParams& params, const Dataset& ds,
                   std::span<const std::size_t> ranking, std::size_t k);

/// 1 - acc(top-k masked to the per-feature mean) / acc(all).
double comprehensiveness(const HainParams& params, const Dataset& ds,
                         std::span<const std::size_t> ranking, std::size_t k);

struct TimingResult {
  double mean_ms = 0.0;
  double std_ms = 0.0;
};

/// Wall-clock mean per input over `repeats` timed passes after one
/// warm-up pass; repeats must be >= 3.
TimingResult explanation_timing(const ExplainerFn& explainer, const Matrix2D& inputs,
                                std::size_t repeats);

}  // namespace hain

#endif  // HAIN_METRICS_HPP
