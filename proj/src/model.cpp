#include "hain/model.hpp"

#include <cmath>

#include "hain/common.hpp"

namespace hain {

void HainConfig::validate() const {
  if (input_dim < 1) throw ContractError("HainConfig: input_dim must be >= 1");
  if (group_size < 1) throw ContractError("HainConfig: group_size must be >= 1");
  if (num_classes < 2) throw ContractError("HainConfig: num_classes must be >= 2");
  if (embed_dim < 1) throw ContractError("HainConfig: embed_dim must be >= 1");
  if (key_dim < 1) throw ContractError("HainConfig: key_dim must be >= 1");
  if (hidden_dim < 1) throw ContractError("HainConfig: hidden_dim must be >= 1");
  if (reduced_dim < 1 || reduced_dim > input_dim)
    throw ContractError("HainConfig: reduced_dim must be in [1, input_dim]");
}

std::vector<std::pair<std::string, Matrix2D*>> HainParams::named_matrices() {
  return {
      {"reduce_w", &reduce_w},           {"reduce_b", &reduce_b},
      {"feat_embed", &feat_embed},       {"feat_bias", &feat_bias},
      {"local_score_w", &local_score_w}, {"local_score_b", &local_score_b},
      {"global_wq", &global_wq},         {"global_wk", &global_wk},
      {"global_wv", &global_wv},         {"global_score_w", &global_score_w},
      {"global_score_b", &global_score_b}, {"cross_wq", &cross_wq},
      {"cross_wk", &cross_wk},           {"gate_w", &gate_w},
      {"gate_b", &gate_b},               {"cls_w1", &cls_w1},
      {"cls_b1", &cls_b1},               {"cls_w2", &cls_w2},
      {"cls_b2", &cls_b2},
  };
}

std::vector<std::pair<std::string, const Matrix2D*>> HainParams::named_matrices() const {
  auto mutable_view = const_cast<HainParams*>(this)->named_matrices();
  std::vector<std::pair<std::string, const Matrix2D*>> out;
  out.reserve(mutable_view.size());
  for (auto& [name, m] : mutable_view) out.emplace_back(name, m);
  return out;
}

std::size_t HainParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : named_matrices()) n += m->size();
  return n;
}

namespace {

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)). The fans are those
// of the linear map the matrix implements; for the per-feature embedding
// table each row is its own scalar-to-embed_dim map, so its fans are
// (1, embed_dim) rather than the table's storage shape.
Matrix2D glorot(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
                Rng& rng) {
  const double a = std::sqrt(6.0 / double(fan_in + fan_out));
  Matrix2D m(rows, cols);
  for (std::size_t k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(-a, a);
  return m;
}

Matrix2D glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  return glorot(rows, cols, rows, cols, rng);
}

}  // namespace

HainParams init_params(const HainConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t d = cfg.input_dim, k = cfg.embed_dim, dk = cfg.key_dim;
  HainParams p;
  p.config = cfg;
  p.reduce_w = glorot(cfg.reduced_dim, d, rng);
  p.reduce_b = Matrix2D(cfg.reduced_dim, 1);
  p.feat_embed = glorot(d, k, 1, k, rng);
  p.feat_bias = glorot(d, k, 1, k, rng);
  p.local_score_w = glorot(k, 1, rng);
  p.local_score_b = Matrix2D(1, 1);
  p.global_wq = glorot(k, dk, rng);
  p.global_wk = glorot(k, dk, rng);
  p.global_wv = glorot(k, k, rng);
  p.global_score_w = glorot(k, 1, rng);
  p.global_score_b = Matrix2D(1, 1);
  p.cross_wq = glorot(k, dk, rng);
  p.cross_wk = glorot(k, dk, rng);
  p.gate_w = glorot(k, 1, rng);
  p.gate_b = Matrix2D(1, 1);
  p.cls_w1 = glorot(2 * k, cfg.hidden_dim, rng);
  p.cls_b1 = Matrix2D(1, cfg.hidden_dim);
  p.cls_w2 = glorot(cfg.hidden_dim, cfg.num_classes, rng);
  p.cls_b2 = Matrix2D(1, cfg.num_classes);
  return p;
}

HainParams init_params(const HainConfig& cfg) {
  Rng rng(cfg.seed);
  return init_params(cfg, rng);
}

AttentionMask AttentionMask::all_true(std::size_t rows, std::size_t cols) {
  return AttentionMask{rows, cols, std::vector<std::uint8_t>(rows * cols, 1)};
}

void AttentionMask::validate() const {
  if (allowed.size() != rows * cols) throw ContractError("AttentionMask: size mismatch");
  for (std::size_t r = 0; r < rows; ++r) {
    bool any = false;
    for (std::size_t c = 0; c < cols; ++c) any = any || allowed[r * cols + c];
    if (!any)
      throw ContractError("AttentionMask: row " + std::to_string(r) + " is fully masked");
  }
}

ParamNodes register_params(Graph& g, const HainParams& params) {
  ParamNodes pn;
  pn.source = &params;
  auto views = params.named_matrices();
  pn.ids.reserve(views.size());
  for (auto& [name, m] : views) pn.ids.push_back(g.leaf(*m));
  std::size_t i = 0;
  pn.reduce_w = pn.ids[i++];
  pn.reduce_b = pn.ids[i++];
  pn.feat_embed = pn.ids[i++];
  pn.feat_bias = pn.ids[i++];
  pn.local_score_w = pn.ids[i++];
  pn.local_score_b = pn.ids[i++];
  pn.global_wq = pn.ids[i++];
  pn.global_wk = pn.ids[i++];
  pn.global_wv = pn.ids[i++];
  pn.global_score_w = pn.ids[i++];
  pn.global_score_b = pn.ids[i++];
  pn.cross_wq = pn.ids[i++];
  pn.cross_wk = pn.ids[i++];
  pn.gate_w = pn.ids[i++];
  pn.gate_b = pn.ids[i++];
  pn.cls_w1 = pn.ids[i++];
  pn.cls_b1 = pn.ids[i++];
  pn.cls_w2 = pn.ids[i++];
  pn.cls_b2 = pn.ids[i++];
  return pn;
}

namespace {

struct LocalNodes {
  NodeId alpha_local;
  NodeId group_vectors;
};

NodeId build_features(Graph& g, const ParamNodes& pn, NodeId x_col) {
  // h_i = x_i * embed_i + bias_i
  return g.add(g.scale_rows(pn.feat_embed, x_col), pn.feat_bias);
}

LocalNodes build_local(Graph& g, const ParamNodes& pn, NodeId features,
                       std::shared_ptr<const Grouping> groups) {
  NodeId scores = g.tanh(g.add_row_broadcast(g.matmul(features, pn.local_score_w),
                                             pn.local_score_b));
  NodeId alpha = g.segment_softmax_col(scores, groups);
  NodeId gv = g.segment_weighted_sum(alpha, features, groups);
  return {alpha, gv};
}

struct GlobalNodes {
  NodeId attention;
  NodeId alpha_global;
  NodeId pooled;
};

GlobalNodes build_global(Graph& g, const ParamNodes& pn, NodeId group_vectors,
                         std::size_t key_dim, const AttentionMask* mask) {
  NodeId q = g.matmul(group_vectors, pn.global_wq);
  NodeId k = g.matmul(group_vectors, pn.global_wk);
  NodeId v = g.matmul(group_vectors, pn.global_wv);
  NodeId scores = g.scalar_mul(g.matmul(q, g.transpose(k)), 1.0 / std::sqrt(double(key_dim)));
  std::shared_ptr<const std::vector<std::uint8_t>> mask_vec;
  if (mask) {
    const Matrix2D& sv = g.value(scores);
    if (mask->rows != sv.rows() || mask->cols != sv.cols())
      throw ContractError("AttentionMask: expected " + sv.shape_str() + ", got " +
                          std::to_string(mask->rows) + "x" + std::to_string(mask->cols));
    mask->validate();
    mask_vec = std::make_shared<const std::vector<std::uint8_t>>(mask->allowed);
  }
  NodeId attention = g.softmax_rows(scores, mask_vec);
  NodeId mixed = g.matmul(attention, v);
  NodeId e = g.tanh(g.add_row_broadcast(g.matmul(mixed, pn.global_score_w), pn.global_score_b));
  NodeId alpha_global = g.softmax_rows(g.transpose(e));  // 1 x G
  NodeId pooled = g.matmul(alpha_global, mixed);         // 1 x k
  return {attention, alpha_global, pooled};
}

NodeId build_cross(Graph& g, const ParamNodes& pn, NodeId pooled, NodeId features,
                   std::size_t key_dim) {
  NodeId q = g.matmul(pooled, pn.cross_wq);     // 1 x dk
  NodeId keys = g.matmul(features, pn.cross_wk);  // d x dk
  NodeId scores = g.scalar_mul(g.matmul(keys, g.transpose(q)), 1.0 / std::sqrt(double(key_dim)));
  return g.softmax_rows(g.transpose(scores));  // 1 x d
}

}  // namespace

ForwardHandles build_forward(Graph& g, const ParamNodes& pn, std::span<const double> x,
                             const AttentionMask* global_mask) {
  const HainConfig& cfg = pn.source->config;
  if (x.size() != cfg.input_dim)
    throw ShapeError("forward: input has " + std::to_string(x.size()) + " features, model expects " +
                     std::to_string(cfg.input_dim));
  auto groups = std::make_shared<const Grouping>(cfg.grouping());

  ForwardHandles h;
  h.input = g.leaf(Matrix2D(x.size(), 1, std::vector<double>(x.begin(), x.end())));
  h.features = build_features(g, pn, h.input);
  LocalNodes local = build_local(g, pn, h.features, groups);
  h.alpha_local = local.alpha_local;
  h.group_vectors = local.group_vectors;
  GlobalNodes global = build_global(g, pn, h.group_vectors, cfg.key_dim, global_mask);
  h.global_matrix = global.attention;
  h.alpha_global = global.alpha_global;
  h.pooled = global.pooled;
  h.alpha_cross = build_cross(g, pn, h.pooled, h.features, cfg.key_dim);

  NodeId gate_scores = g.add_row_broadcast(g.matmul(h.features, pn.gate_w), pn.gate_b);
  h.gates = g.sigmoid(gate_scores);

  NodeId global_per_feature = g.expand_segments(g.transpose(h.alpha_global), groups);
  NodeId combined_raw = g.mul(h.alpha_local, global_per_feature);
  h.alpha_combined = g.normalize_sum(combined_raw);

  NodeId weighted = g.mul(h.alpha_combined, h.gates);
  NodeId summary = g.matmul(g.transpose(weighted), h.features);  // 1 x k
  NodeId head_in = g.concat_cols(h.pooled, summary);             // 1 x 2k
  NodeId hidden = g.relu(g.add_row_broadcast(g.matmul(head_in, pn.cls_w1), pn.cls_b1));
  h.logits = g.add_row_broadcast(g.matmul(hidden, pn.cls_w2), pn.cls_b2);
  h.probabilities = g.softmax_rows(h.logits);

  h.embedded = g.relu(g.add(g.matmul(pn.reduce_w, h.input), pn.reduce_b));
  return h;
}

ForwardOutput extract_output(const Graph& g, const ForwardHandles& h) {
  ForwardOutput out;
  out.logits = g.value(h.logits).storage();
  out.probabilities = g.value(h.probabilities).storage();
  out.embedded = g.value(h.embedded).storage();
  out.trace.alpha_local = g.value(h.alpha_local).storage();
  out.trace.alpha_global = g.value(h.alpha_global).storage();
  out.trace.alpha_cross = g.value(h.alpha_cross).storage();
  out.trace.alpha_combined = g.value(h.alpha_combined).storage();
  out.trace.gates = g.value(h.gates).storage();
  out.trace.global_matrix = g.value(h.global_matrix);
  return out;
}

ForwardOutput forward(const HainParams& params, std::span<const double> x,
                      const AttentionMask* global_mask) {
  Graph g;
  ParamNodes pn = register_params(g, params);
  ForwardHandles h = build_forward(g, pn, x, global_mask);
  return extract_output(g, h);
}

std::vector<double> embed(const HainParams& params, std::span<const double> x) {
  if (x.size() != params.config.input_dim)
    throw ShapeError("embed: input has " + std::to_string(x.size()) + " features, model expects " +
                     std::to_string(params.config.input_dim));
  const Matrix2D& w = params.reduce_w;
  std::vector<double> out(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double s = params.reduce_b(i, 0);
    for (std::size_t j = 0; j < w.cols(); ++j) s += w(i, j) * x[j];
    out[i] = s > 0.0 ? s : 0.0;
  }
  return out;
}

LocalAttentionResult local_attention(const HainParams& params, const Matrix2D& feature_embeddings) {
  if (feature_embeddings.rows() != params.config.input_dim ||
      feature_embeddings.cols() != params.config.embed_dim)
    throw ShapeError("local_attention: embeddings are " + feature_embeddings.shape_str() +
                     ", model expects " + std::to_string(params.config.input_dim) + "x" +
                     std::to_string(params.config.embed_dim));
  Graph g;
  ParamNodes pn = register_params(g, params);
  auto groups = std::make_shared<const Grouping>(params.config.grouping());
  LocalNodes nodes = build_local(g, pn, g.leaf(feature_embeddings), groups);
  return {g.value(nodes.alpha_local).storage(), g.value(nodes.group_vectors)};
}

GlobalAttentionResult global_attention(const HainParams& params, const Matrix2D& group_vectors,
                                       const AttentionMask* mask) {
  if (group_vectors.cols() != params.config.embed_dim)
    throw ShapeError("global_attention: group vectors are " + group_vectors.shape_str() +
                     ", expected width " + std::to_string(params.config.embed_dim));
  Graph g;
  ParamNodes pn = register_params(g, params);
  GlobalNodes nodes = build_global(g, pn, g.leaf(group_vectors), params.config.key_dim, mask);
  return {g.value(nodes.attention), g.value(nodes.alpha_global).storage(),
          g.value(nodes.pooled).storage()};
}

std::vector<double> cross_attention(const HainParams& params, std::span<const double> pooled,
                                    const Matrix2D& feature_embeddings) {
  if (pooled.size() != params.config.embed_dim)
    throw ShapeError("cross_attention: pooled width " + std::to_string(pooled.size()) +
                     ", expected " + std::to_string(params.config.embed_dim));
  Graph g;
  ParamNodes pn = register_params(g, params);
  NodeId pooled_node = g.leaf(Matrix2D(1, pooled.size(),
                                       std::vector<double>(pooled.begin(), pooled.end())));
  NodeId alpha = build_cross(g, pn, pooled_node, g.leaf(feature_embeddings), params.config.key_dim);
  return g.value(alpha).storage();
}

}  // namespace hain
