#ifndef HAIN_TRAINING_HPP
#define HAIN_TRAINING_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hain/data.hpp"
#include "hain/model.hpp"
#include "hain/objective.hpp"

namespace hain {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  double lr_decay = 0.98;        // eta_t = eta0 * decay^epoch
  LossWeights loss_weights;
  double target_sparsity = 0.1;  // rho in (0,1)
  double temp_start = 1.0;       // Gumbel temperature schedule
  double temp_end = 0.1;
  double temp_decay = 0.9;       // geometric, clamped at temp_end
  std::uint64_t seed = 42;
  std::size_t workers = 1;       // logical workers for ps_train
  std::size_t max_staleness = 0;

  void validate() const;
};

/// One epoch of the training log; serialized as a JSON line with this
/// exact key order.
struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss_pred = 0.0;
  double loss_attn = 0.0;
  double loss_sparse = 0.0;
  double loss_consist = 0.0;
  double loss_total = 0.0;
  double val_loss_total = 0.0;   // NaN (serialized null) without a validation set
  double val_accuracy = 0.0;     // ditto
  double tau = 0.0;              // threshold after this epoch's update
  std::size_t n_selected = 0;    // |{ i : alpha_hard_i > tau_before_update }|
  double temperature = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> records;

  std::string to_jsonl() const;
};

/// Feature-selection snapshot at the end of training. `selected` holds the
/// indices whose mean attention exceeds the final percentile threshold.
struct SelectionState {
  double tau = 0.0;
  std::vector<double> alpha_snapshot;  // mean combined attention, final epoch
  std::vector<double> gate_snapshot;   // mean gates, final epoch
  std::vector<std::size_t> selected;
};

struct TrainResult {
  HainParams params;
  TrainLog log;
  SelectionState selection;
  /// FNV-1a digest folded over the full parameter bytes after every
  /// optimizer step; equal digests mean bit-identical trajectories.
  std::uint64_t trajectory_digest = 0;
};

/// Mini-batch SGD on the four-term loss with per-epoch Gumbel-softmax
/// feature selection and percentile threshold updates.
TrainResult train(const Dataset& train_set, const Dataset* val_set, const HainConfig& mcfg,
                  const TrainConfig& tcfg);

/// Single-process simulation of parameter-server SGD: `workers` logical
/// workers compute gradients against snapshots at most `max_staleness`
/// versions old (deterministic round-robin schedule); only the server
/// mutates parameters. With workers=1, max_staleness=0 the parameter
/// trajectory is bit-identical to train().
TrainResult ps_train(const Dataset& train_set, const Dataset* val_set, const HainConfig& mcfg,
                     const TrainConfig& tcfg);

/// softmax((ln alpha + g) / T) with Gumbel noise g drawn from rng.
std::vector<double> gumbel_softmax(std::span<const double> alpha, double temperature, Rng& rng);
std::vector<double> gumbel_softmax_with_noise(std::span<const double> alpha, double temperature,
                                              std::span<const double> noise);

/// Nearest-rank percentile at (1 - rho) * 100: sort ascending and take the
/// entry at index ceil((1-rho) * d) - 1 (0-based, clamped).
double percentile_threshold(std::span<const double> alpha, double rho);

/// Row softmax over permitted entries only; forbidden entries are exactly
/// zero. With an all-true mask this is bit-identical to softmax_rows.
Matrix2D masked_attention(const Matrix2D& scores, const AttentionMask& mask);

/// Forward over every row of X with all row graphs kept alive until the
/// batch completes (the naive batch path chunked_forward improves on).
std::vector<ForwardOutput> forward_batch(const HainParams& params, const Matrix2D& X);

/// Same results as forward_batch, but live graph memory is bounded by
/// chunk_size rows at a time.
std::vector<ForwardOutput> chunked_forward(const HainParams& params, const Matrix2D& X,
                                           std::size_t chunk_size);

std::uint64_t fnv1a64(const void* data, std::size_t bytes, std::uint64_t seed);
std::uint64_t params_digest(const HainParams& params, std::uint64_t seed);

}  // namespace hain

#endif  // HAIN_TRAINING_HPP
