#ifndef HAIN_MODEL_HPP
#define HAIN_MODEL_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hain/graph.hpp"
#include "hain/matrix.hpp"
#include "hain/rng.hpp"

namespace hain {

/// Architecture hyperparameters. Feature groups are contiguous blocks of
/// group_size; the group count is ceil(input_dim / group_size).
struct HainConfig {
  std::size_t input_dim = 0;    // d
  std::size_t embed_dim = 8;    // per-feature representation width
  std::size_t group_size = 16;  // features per local group
  std::size_t key_dim = 8;      // width of attention keys
  std::size_t hidden_dim = 32;  // classifier hidden width
  std::size_t num_classes = 2;  // K
  std::size_t reduced_dim = 16; // width of the dimensionality-reducing embedding
  std::uint64_t seed = 42;

  void validate() const;
  Grouping grouping() const { return Grouping{input_dim, group_size}; }
  std::size_t group_count() const { return grouping().group_count(); }
};

/// All learnable parameters. Matrices are exposed by name in a fixed order
/// (named_matrices) so the optimizer, checkpoints, and gradient checks can
/// iterate them generically.
struct HainParams {
  HainConfig config;

  Matrix2D reduce_w;       // reduced_dim x d
  Matrix2D reduce_b;       // reduced_dim x 1
  Matrix2D feat_embed;     // d x embed_dim, scaled by the feature value
  Matrix2D feat_bias;      // d x embed_dim, per-feature identity term
  Matrix2D local_score_w;  // embed_dim x 1
  Matrix2D local_score_b;  // 1 x 1
  Matrix2D global_wq;      // embed_dim x key_dim
  Matrix2D global_wk;      // embed_dim x key_dim
  Matrix2D global_wv;      // embed_dim x embed_dim
  Matrix2D global_score_w; // embed_dim x 1
  Matrix2D global_score_b; // 1 x 1
  Matrix2D cross_wq;       // embed_dim x key_dim
  Matrix2D cross_wk;       // embed_dim x key_dim
  Matrix2D gate_w;         // embed_dim x 1
  Matrix2D gate_b;         // 1 x 1
  Matrix2D cls_w1;         // 2*embed_dim x hidden_dim
  Matrix2D cls_b1;         // 1 x hidden_dim
  Matrix2D cls_w2;         // hidden_dim x num_classes
  Matrix2D cls_b2;         // 1 x num_classes

  std::vector<std::pair<std::string, Matrix2D*>> named_matrices();
  std::vector<std::pair<std::string, const Matrix2D*>> named_matrices() const;
  std::size_t parameter_count() const;
};

/// Every attention distribution produced by one forward pass.
struct AttentionTrace {
  std::vector<double> alpha_local;     // d; simplex within each group
  std::vector<double> alpha_global;   // G
  std::vector<double> alpha_cross;    // d
  std::vector<double> alpha_combined; // d; renormalized global x local product
  std::vector<double> gates;          // d, each in (0,1)
  Matrix2D global_matrix;             // G x G, row-stochastic
};

struct ForwardOutput {
  std::vector<double> logits;         // K
  std::vector<double> probabilities;  // K
  AttentionTrace trace;
  std::vector<double> embedded;       // reduced_dim
};

/// Boolean mask over the G x G global attention matrix; every row must
/// keep at least one permitted entry.
struct AttentionMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> allowed;  // row-major

  static AttentionMask all_true(std::size_t rows, std::size_t cols);
  void validate() const;
};

/// Node handles into a Graph holding one sample's forward pass; the
/// trainer and explainers run backward from these.
struct ForwardHandles {
  NodeId input = -1;           // d x 1 leaf
  NodeId features = -1;        // d x embed_dim per-feature representations
  NodeId alpha_local = -1;     // d x 1
  NodeId group_vectors = -1;   // G x embed_dim
  NodeId global_matrix = -1;   // G x G
  NodeId alpha_global = -1;    // 1 x G
  NodeId pooled = -1;          // 1 x embed_dim
  NodeId alpha_cross = -1;     // 1 x d
  NodeId gates = -1;           // d x 1
  NodeId alpha_combined = -1;  // d x 1
  NodeId logits = -1;          // 1 x K
  NodeId probabilities = -1;   // 1 x K
  NodeId embedded = -1;        // reduced_dim x 1
};

/// Parameter leaves registered on a graph, in named_matrices order.
struct ParamNodes {
  std::vector<NodeId> ids;
  const HainParams* source = nullptr;

  NodeId reduce_w, reduce_b, feat_embed, feat_bias, local_score_w, local_score_b,
      global_wq, global_wk, global_wv, global_score_w, global_score_b, cross_wq,
      cross_wk, gate_w, gate_b, cls_w1, cls_b1, cls_w2, cls_b2;
};

/// Glorot-uniform weights, a = sqrt(6 / (rows + cols)) per matrix; biases
/// exactly zero. Deterministic given the rng.
HainParams init_params(const HainConfig& cfg, Rng& rng);
HainParams init_params(const HainConfig& cfg);  // uses cfg.seed

/// Dimensionality-reducing embedding: ReLU(W x + b).
std::vector<double> embed(const HainParams& params, std::span<const double> x);

struct LocalAttentionResult {
  std::vector<double> alpha_local;  // d, simplex per group
  Matrix2D group_vectors;           // G x embed_dim
};
/// Scored within contiguous groups: e_i = tanh(w·h_i + b), softmax per
/// group, group vector = sum_i alpha_i h_i.
LocalAttentionResult local_attention(const HainParams& params, const Matrix2D& feature_embeddings);

struct GlobalAttentionResult {
  Matrix2D attention;                // G x G row-stochastic
  std::vector<double> alpha_global;  // G
  std::vector<double> pooled;        // embed_dim
};
/// Scaled dot-product self-attention over group vectors followed by the
/// scalar scorer that pools the mixed rows.
GlobalAttentionResult global_attention(const HainParams& params, const Matrix2D& group_vectors,
                                       const AttentionMask* mask = nullptr);

/// Pooled query against every per-feature representation; a d-simplex.
std::vector<double> cross_attention(const HainParams& params, std::span<const double> pooled,
                                    const Matrix2D& feature_embeddings);

/// Full pipeline for one (standardized) input row.
ForwardOutput forward(const HainParams& params, std::span<const double> x,
                      const AttentionMask* global_mask = nullptr);

ParamNodes register_params(Graph& g, const HainParams& params);

/// Builds the whole forward computation on g; the caller owns the graph
/// and may attach a loss and run backward.
ForwardHandles build_forward(Graph& g, const ParamNodes& pn, std::span<const double> x,
                             const AttentionMask* global_mask = nullptr);

ForwardOutput extract_output(const Graph& g, const ForwardHandles& h);

}  // namespace hain

#endif  // HAIN_MODEL_HPP
