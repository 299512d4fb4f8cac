#include "hain/training.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hain/common.hpp"

namespace hain {

using ordered_json = nlohmann::ordered_json;

void TrainConfig::validate() const {
  if (epochs == 0) throw ContractError("TrainConfig: epochs must be >= 1");
  if (batch_size == 0) throw ContractError("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw ContractError("TrainConfig: learning_rate must be >= 0");
  if (!(lr_decay > 0.0)) throw ContractError("TrainConfig: lr_decay must be positive");
  loss_weights.validate();
  if (!(target_sparsity > 0.0 && target_sparsity < 1.0))
    throw ContractError("TrainConfig: target_sparsity must be in (0,1)");
  if (!(temp_start > 0.0) || !(temp_end > 0.0) || !(temp_decay > 0.0) || temp_decay > 1.0)
    throw ContractError("TrainConfig: temperature schedule must stay positive");
  if (workers < 1) throw ContractError("TrainConfig: workers must be >= 1");
}

std::uint64_t fnv1a64(const void* data, std::size_t bytes, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t params_digest(const HainParams& params, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (const auto& [name, m] : params.named_matrices())
    h = fnv1a64(m->data(), m->size() * sizeof(double), h);
  return h;
}

std::vector<double> gumbel_softmax_with_noise(std::span<const double> alpha, double temperature,
                                              std::span<const double> noise) {
  if (!(temperature > 0.0)) throw ContractError("gumbel_softmax: temperature must be positive");
  if (alpha.size() != noise.size())
    throw ShapeError("gumbel_softmax: alpha length " + std::to_string(alpha.size()) +
                     ", noise length " + std::to_string(noise.size()));
  Matrix2D z(1, alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i)
    z(0, i) = (std::log(std::max(alpha[i], 1e-12)) + noise[i]) / temperature;
  return softmax_rows(z).storage();
}

std::vector<double> gumbel_softmax(std::span<const double> alpha, double temperature, Rng& rng) {
  std::vector<double> noise = gumbel_sample(rng, alpha.size());
  return gumbel_softmax_with_noise(alpha, temperature, noise);
}

double percentile_threshold(std::span<const double> alpha, double rho) {
  if (alpha.empty()) throw ContractError("percentile_threshold: empty vector");
  if (!(rho > 0.0 && rho < 1.0))
    throw ContractError("percentile_threshold: rho must be in (0,1)");
  std::vector<double> sorted(alpha.begin(), alpha.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = (1.0 - rho) * double(sorted.size());
  // 1e-9 guard absorbs representation noise in (1-rho)*d at integer ranks.
  auto idx = static_cast<std::ptrdiff_t>(std::ceil(rank - 1e-9)) - 1;
  idx = std::clamp<std::ptrdiff_t>(idx, 0, std::ptrdiff_t(sorted.size()) - 1);
  return sorted[static_cast<std::size_t>(idx)];
}

Matrix2D masked_attention(const Matrix2D& scores, const AttentionMask& mask) {
  if (mask.rows != scores.rows() || mask.cols != scores.cols())
    throw ShapeError("masked_attention: scores " + scores.shape_str() + ", mask " +
                     std::to_string(mask.rows) + "x" + std::to_string(mask.cols));
  mask.validate();
  return masked_softmax_rows(scores, mask.allowed.data());
}

std::vector<ForwardOutput> forward_batch(const HainParams& params, const Matrix2D& X) {
  const std::size_t n = X.rows();
  std::vector<Graph> graphs(n);
  std::vector<ForwardHandles> handles(n);
  for (std::size_t i = 0; i < n; ++i) {
    ParamNodes pn = register_params(graphs[i], params);
    handles[i] = build_forward(graphs[i], pn,
                               std::span<const double>(X.data() + i * X.cols(), X.cols()));
  }
  std::vector<ForwardOutput> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(extract_output(graphs[i], handles[i]));
  return out;
}

std::vector<ForwardOutput> chunked_forward(const HainParams& params, const Matrix2D& X,
                                           std::size_t chunk_size) {
  if (chunk_size == 0) throw ContractError("chunked_forward: chunk_size must be >= 1");
  std::vector<ForwardOutput> out;
  out.reserve(X.rows());
  Graph g;
  for (std::size_t start = 0; start < X.rows(); start += chunk_size) {
    const std::size_t stop = std::min(start + chunk_size, X.rows());
    std::vector<Graph> graphs(stop - start);
    std::vector<ForwardHandles> handles(stop - start);
    for (std::size_t i = start; i < stop; ++i) {
      ParamNodes pn = register_params(graphs[i - start], params);
      handles[i - start] =
          build_forward(graphs[i - start], pn,
                        std::span<const double>(X.data() + i * X.cols(), X.cols()));
    }
    for (std::size_t i = start; i < stop; ++i)
      out.push_back(extract_output(graphs[i - start], handles[i - start]));
  }
  return out;
}

std::string TrainLog::to_jsonl() const {
  std::ostringstream out;
  for (const EpochRecord& r : records) {
    ordered_json j;
    j["epoch"] = r.epoch;
    j["loss_pred"] = r.loss_pred;
    j["loss_attn"] = r.loss_attn;
    j["loss_sparse"] = r.loss_sparse;
    j["loss_consist"] = r.loss_consist;
    j["loss_total"] = r.loss_total;
    if (std::isfinite(r.val_loss_total)) {
      j["val_loss_total"] = r.val_loss_total;
      j["val_accuracy"] = r.val_accuracy;
    } else {
      j["val_loss_total"] = nullptr;
      j["val_accuracy"] = nullptr;
    }
    j["tau"] = r.tau;
    j["n_selected"] = r.n_selected;
    j["temperature"] = r.temperature;
    out << j.dump() << "\n";
  }
  return out.str();
}

namespace {

struct GradBuffers {
  std::vector<Matrix2D> grads;  // named_matrices order

  explicit GradBuffers(const HainParams& p) {
    for (const auto& [name, m] : p.named_matrices()) grads.emplace_back(m->rows(), m->cols());
  }
};

struct BatchStats {
  LossBreakdown mean_loss;              // over the batch
  std::vector<double> alpha_sum;        // per-feature sums over samples
  std::vector<double> gate_sum;
};

/// One graph per batch: parameter leaves are registered once and every
/// sample's forward/loss subgraph hangs off them, so a single backward
/// from the batch-mean loss yields mean parameter gradients.
BatchStats batch_gradient(const HainParams& params, const Dataset& ds,
                          std::span<const std::size_t> batch, const LossWeights& w,
                          Graph& g, GradBuffers& out) {
  g.reset();
  ParamNodes pn = register_params(g, params);
  const std::size_t d = ds.num_features();
  BatchStats stats;
  stats.alpha_sum.assign(d, 0.0);
  stats.gate_sum.assign(d, 0.0);

  NodeId total_sum = -1;
  LossBreakdown sum;
  for (std::size_t idx : batch) {
    ForwardHandles fh = build_forward(
        g, pn, std::span<const double>(ds.X.data() + idx * d, d));
    LossHandles lh = build_total_loss(g, fh, ds.y[idx], w);
    total_sum = total_sum < 0 ? lh.total : g.add(total_sum, lh.total);
    const LossBreakdown b = lh.breakdown(g);
    sum.pred += b.pred;
    sum.attn += b.attn;
    sum.sparse += b.sparse;
    sum.consist += b.consist;
    sum.total += b.total;
    const Matrix2D& ac = g.value(fh.alpha_combined);
    const Matrix2D& gt = g.value(fh.gates);
    for (std::size_t j = 0; j < d; ++j) {
      stats.alpha_sum[j] += ac(j, 0);
      stats.gate_sum[j] += gt(j, 0);
    }
  }
  const double inv = 1.0 / double(batch.size());
  NodeId mean_loss = g.scalar_mul(total_sum, inv);
  g.backward(mean_loss);
  for (std::size_t i = 0; i < pn.ids.size(); ++i) {
    const Matrix2D gm = g.grad(pn.ids[i]);
    Matrix2D& acc = out.grads[i];
    for (std::size_t k = 0; k < gm.size(); ++k) acc.data()[k] = gm.data()[k];
  }
  stats.mean_loss.pred = sum.pred * inv;
  stats.mean_loss.attn = sum.attn * inv;
  stats.mean_loss.sparse = sum.sparse * inv;
  stats.mean_loss.consist = sum.consist * inv;
  stats.mean_loss.total = sum.total * inv;
  return stats;
}

void apply_sgd(HainParams& params, const GradBuffers& g, double lr) {
  if (lr == 0.0) return;
  auto views = params.named_matrices();
  for (std::size_t i = 0; i < views.size(); ++i) {
    Matrix2D& m = *views[i].second;
    const Matrix2D& gr = g.grads[i];
    for (std::size_t k = 0; k < m.size(); ++k) m.data()[k] -= lr * gr.data()[k];
  }
}

struct ValScore {
  double loss = std::numeric_limits<double>::quiet_NaN();
  double accuracy = std::numeric_limits<double>::quiet_NaN();
};

ValScore evaluate_split(const HainParams& params, const Dataset* val, const LossWeights& w) {
  ValScore v;
  if (!val || val->num_samples() == 0) return v;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  const std::size_t d = val->num_features();
  for (std::size_t i = 0; i < val->num_samples(); ++i) {
    ForwardOutput fw = forward(params, std::span<const double>(val->X.data() + i * d, d));
    loss_sum += total_loss(fw, val->y[i], w).total;
    std::size_t arg = 0;
    for (std::size_t c = 1; c < fw.probabilities.size(); ++c)
      if (fw.probabilities[c] > fw.probabilities[arg]) arg = c;
    if (arg == val->y[i]) ++correct;
  }
  v.loss = loss_sum / double(val->num_samples());
  v.accuracy = double(correct) / double(val->num_samples());
  return v;
}

std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t>& order, Rng& rng,
                                                   std::size_t batch_size) {
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t s = 0; s < order.size(); s += batch_size) {
    const std::size_t e = std::min(s + batch_size, order.size());
    batches.emplace_back(order.begin() + std::ptrdiff_t(s), order.begin() + std::ptrdiff_t(e));
  }
  return batches;
}

struct EpochTail {
  std::vector<double> mean_alpha;
  std::vector<double> mean_gates;
};

/// Shared per-epoch bookkeeping after the optimizer steps: Gumbel hard
/// selection against the pre-update threshold, then the percentile update.
EpochTail finish_epoch(std::size_t epoch_1based, const std::vector<double>& alpha_sum,
                       const std::vector<double>& gate_sum, std::size_t n_seen,
                       const LossBreakdown& mean_loss, double temperature, double* tau,
                       double target_sparsity, Rng& gumbel_rng, const HainParams& params,
                       const Dataset* val, const LossWeights& w, TrainLog* log) {
  EpochTail tail;
  tail.mean_alpha.resize(alpha_sum.size());
  tail.mean_gates.resize(gate_sum.size());
  for (std::size_t j = 0; j < alpha_sum.size(); ++j) {
    tail.mean_alpha[j] = alpha_sum[j] / double(n_seen);
    tail.mean_gates[j] = gate_sum[j] / double(n_seen);
  }
  const std::vector<double> alpha_hard = gumbel_softmax(tail.mean_alpha, temperature, gumbel_rng);
  std::size_t n_sel = 0;
  for (double v : alpha_hard)
    if (v > *tau) ++n_sel;
  *tau = percentile_threshold(tail.mean_alpha, target_sparsity);

  const ValScore vs = evaluate_split(params, val, w);
  EpochRecord rec;
  rec.epoch = epoch_1based;
  rec.loss_pred = mean_loss.pred;
  rec.loss_attn = mean_loss.attn;
  rec.loss_sparse = mean_loss.sparse;
  rec.loss_consist = mean_loss.consist;
  rec.loss_total = mean_loss.total;
  rec.val_loss_total = vs.loss;
  rec.val_accuracy = vs.accuracy;
  rec.tau = *tau;
  rec.n_selected = n_sel;
  rec.temperature = temperature;
  log->records.push_back(rec);
  return tail;
}

SelectionState final_selection(double tau, EpochTail tail) {
  SelectionState sel;
  sel.tau = tau;
  sel.alpha_snapshot = std::move(tail.mean_alpha);
  sel.gate_snapshot = std::move(tail.mean_gates);
  for (std::size_t j = 0; j < sel.alpha_snapshot.size(); ++j)
    if (sel.alpha_snapshot[j] > tau) sel.selected.push_back(j);
  return sel;
}

void check_train_inputs(const Dataset& train_set, const HainConfig& mcfg, const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.validate();
  train_set.validate();
  if (train_set.num_samples() == 0) throw ContractError("train: empty dataset");
  if (train_set.num_features() != mcfg.input_dim)
    throw ShapeError("train: dataset has " + std::to_string(train_set.num_features()) +
                     " features, model expects " + std::to_string(mcfg.input_dim));
  if (train_set.num_classes() > mcfg.num_classes)
    throw ContractError("train: dataset has more classes than the model");
}

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset* val_set, const HainConfig& mcfg,
                  const TrainConfig& tcfg) {
  check_train_inputs(train_set, mcfg, tcfg);
  Rng root(tcfg.seed);
  Rng init_rng = root.fork(1);
  Rng shuffle_rng = root.fork(2);
  Rng gumbel_rng = root.fork(3);

  TrainResult res;
  res.params = init_params(mcfg, init_rng);
  res.trajectory_digest = 1469598103934665603ULL;

  std::vector<std::size_t> order(train_set.num_samples());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const std::size_t d = train_set.num_features();
  double tau = 0.5;
  double temperature = tcfg.temp_start;
  Graph g;
  GradBuffers grads(res.params);
  EpochTail tail;

  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const double lr = tcfg.learning_rate * std::pow(tcfg.lr_decay, double(epoch));
    auto batches = make_batches(order, shuffle_rng, tcfg.batch_size);
    std::vector<double> alpha_sum(d, 0.0), gate_sum(d, 0.0);
    LossBreakdown loss_sum;
    for (const auto& batch : batches) {
      const BatchStats bs = batch_gradient(res.params, train_set, batch, tcfg.loss_weights, g, grads);
      if (!std::isfinite(bs.mean_loss.total))
        throw TrainingError("train: loss diverged at epoch " + std::to_string(epoch + 1),
                            epoch + 1);
      apply_sgd(res.params, grads, lr);
      res.trajectory_digest = params_digest(res.params, res.trajectory_digest);
      const double bn = double(batch.size());
      loss_sum.pred += bs.mean_loss.pred * bn;
      loss_sum.attn += bs.mean_loss.attn * bn;
      loss_sum.sparse += bs.mean_loss.sparse * bn;
      loss_sum.consist += bs.mean_loss.consist * bn;
      loss_sum.total += bs.mean_loss.total * bn;
      for (std::size_t j = 0; j < d; ++j) {
        alpha_sum[j] += bs.alpha_sum[j];
        gate_sum[j] += bs.gate_sum[j];
      }
    }
    const double inv_n = 1.0 / double(train_set.num_samples());
    LossBreakdown mean_loss{loss_sum.pred * inv_n, loss_sum.attn * inv_n, loss_sum.sparse * inv_n,
                            loss_sum.consist * inv_n, loss_sum.total * inv_n};
    tail = finish_epoch(epoch + 1, alpha_sum, gate_sum, train_set.num_samples(), mean_loss,
                        temperature, &tau, tcfg.target_sparsity, gumbel_rng, res.params, val_set,
                        tcfg.loss_weights, &res.log);
    temperature = std::max(tcfg.temp_end, temperature * tcfg.temp_decay);
  }
  res.selection = final_selection(tau, std::move(tail));
  return res;
}

TrainResult ps_train(const Dataset& train_set, const Dataset* val_set, const HainConfig& mcfg,
                     const TrainConfig& tcfg) {
  check_train_inputs(train_set, mcfg, tcfg);
  Rng root(tcfg.seed);
  Rng init_rng = root.fork(1);
  Rng shuffle_rng = root.fork(2);
  Rng gumbel_rng = root.fork(3);

  TrainResult res;
  res.params = init_params(mcfg, init_rng);
  res.trajectory_digest = 1469598103934665603ULL;

  const std::size_t W = tcfg.workers;
  const std::size_t s = tcfg.max_staleness;
  // Ring of recent parameter versions; snapshots[k] is the weights after
  // (version - k) applied updates, snapshots[0] being current.
  std::deque<HainParams> snapshots;
  snapshots.push_front(res.params);
  const std::size_t ring = std::min(s, W > 0 ? W - 1 : 0) + 1;

  std::vector<std::size_t> order(train_set.num_samples());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const std::size_t d = train_set.num_features();
  double tau = 0.5;
  double temperature = tcfg.temp_start;
  Graph g;
  GradBuffers grads(res.params);
  EpochTail tail;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const double lr = tcfg.learning_rate * std::pow(tcfg.lr_decay, double(epoch));
    auto batches = make_batches(order, shuffle_rng, tcfg.batch_size);
    std::vector<double> alpha_sum(d, 0.0), gate_sum(d, 0.0);
    LossBreakdown loss_sum;
    for (const auto& batch : batches) {
      // Worker step % W pushes at this step; round-robin pulls mean its
      // snapshot is min(staleness cap, step) versions behind the server.
      const std::size_t staleness = std::min({s, W - 1, step});
      const HainParams& snapshot = snapshots[staleness];
      const BatchStats bs = batch_gradient(snapshot, train_set, batch, tcfg.loss_weights, g, grads);
      if (!std::isfinite(bs.mean_loss.total))
        throw TrainingError("ps_train: loss diverged at epoch " + std::to_string(epoch + 1),
                            epoch + 1);
      apply_sgd(res.params, grads, lr);
      res.trajectory_digest = params_digest(res.params, res.trajectory_digest);
      snapshots.push_front(res.params);
      while (snapshots.size() > ring) snapshots.pop_back();
      ++step;
      const double bn = double(batch.size());
      loss_sum.pred += bs.mean_loss.pred * bn;
      loss_sum.attn += bs.mean_loss.attn * bn;
      loss_sum.sparse += bs.mean_loss.sparse * bn;
      loss_sum.consist += bs.mean_loss.consist * bn;
      loss_sum.total += bs.mean_loss.total * bn;
      for (std::size_t j = 0; j < d; ++j) {
        alpha_sum[j] += bs.alpha_sum[j];
        gate_sum[j] += bs.gate_sum[j];
      }
    }
    const double inv_n = 1.0 / double(train_set.num_samples());
    LossBreakdown mean_loss{loss_sum.pred * inv_n, loss_sum.attn * inv_n, loss_sum.sparse * inv_n,
                            loss_sum.consist * inv_n, loss_sum.total * inv_n};
    tail = finish_epoch(epoch + 1, alpha_sum, gate_sum, train_set.num_samples(), mean_loss,
                        temperature, &tau, tcfg.target_sparsity, gumbel_rng, res.params, val_set,
                        tcfg.loss_weights, &res.log);
    temperature = std::max(tcfg.temp_end, temperature * tcfg.temp_decay);
  }
  res.selection = final_selection(tau, std::move(tail));
  return res;
}

}  // namespace hain
