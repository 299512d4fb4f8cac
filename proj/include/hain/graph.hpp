#ifndef HAIN_GRAPH_HPP
#define HAIN_GRAPH_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "hain/matrix.hpp"

namespace hain {

using NodeId = int;

/// Contiguous partition of d features into ceil(d / group_size) blocks;
/// the last block may be short.
struct Grouping {
  std::size_t dim = 0;
  std::size_t group_size = 0;

  std::size_t group_count() const { return (dim + group_size - 1) / group_size; }
  std::size_t group_of(std::size_t i) const { return i / group_size; }
  std::size_t start(std::size_t g) const { return g * group_size; }
  std::size_t length(std::size_t g) const {
    const std::size_t s = start(g);
    return (s + group_size <= dim) ? group_size : dim - s;
  }
};

/// Reverse-mode automatic differentiation over a tape of Matrix2D nodes.
/// Nodes are appended in topological order by construction; backward()
/// sweeps the tape in reverse, materializing adjoints only for ancestors
/// of the loss. A Graph instance is confined to one thread per episode.
class Graph {
 public:
  enum class Op : std::uint8_t {
    kLeaf,
    kMatMul,
    kAdd,
    kAddRowBroadcast,
    kSub,
    kMulElem,
    kScaleRows,
    kTanh,
    kSigmoid,
    kRelu,
    kSoftmaxRows,
    kSegmentSoftmaxCol,
    kSegmentWeightedSum,
    kExpandSegments,
    kNormalizeSum,
    kTranspose,
    kScalarMul,
    kSumAll,
    kConcatCols,
    kPickEntry,
    kNegLogPick,
    kEntropyCol,
  };

  NodeId leaf(Matrix2D value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  /// M (n x k) plus a row vector r (1 x k) added to every row.
  NodeId add_row_broadcast(NodeId m, NodeId r);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  /// Row i of M scaled by v_i; v is a column (rows(M) x 1).
  NodeId scale_rows(NodeId m, NodeId v);
  NodeId tanh(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId relu(NodeId a);
  /// Row-wise masked softmax; mask nullptr means all entries permitted.
  NodeId softmax_rows(NodeId a, std::shared_ptr<const std::vector<std::uint8_t>> mask = nullptr);
  /// Softmax within each contiguous group of a column vector (d x 1).
  NodeId segment_softmax_col(NodeId e, std::shared_ptr<const Grouping> groups);
  /// out[g] = sum_{i in group g} alpha_i * H_i  (alpha d x 1, H d x k -> G x k).
  NodeId segment_weighted_sum(NodeId alpha, NodeId h, std::shared_ptr<const Grouping> groups);
  /// Broadcast a G x 1 column to d x 1 by repeating each entry over its group.
  NodeId expand_segments(NodeId v, std::shared_ptr<const Grouping> groups);
  /// v / sum(v) for a column vector.
  NodeId normalize_sum(NodeId v);
  NodeId transpose(NodeId a);
  NodeId scalar_mul(NodeId a, double c);
  NodeId sum_all(NodeId a);
  /// Horizontal concat of two single-row matrices.
  NodeId concat_cols(NodeId a, NodeId b);
  /// Single entry (r, c) as a 1x1 node.
  NodeId pick_entry(NodeId a, std::size_t r, std::size_t c);
  /// -ln(max(p[0, label], 1e-12)) of a probability row.
  NodeId neg_log_pick(NodeId probs, std::size_t label);
  /// -sum_i p_i ln p_i of a column vector, with 0 ln 0 := 0.
  NodeId entropy_col(NodeId p);

  /// Reverse sweep from a scalar (1x1) loss node. Throws ContractError for
  /// a non-scalar loss. Adjoints of earlier calls are cleared first.
  void backward(NodeId loss);

  const Matrix2D& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].val; }
  /// Adjoint of a node after backward(); zeros if the node does not reach the loss.
  Matrix2D grad(NodeId id) const;

  std::size_t node_count() const { return nodes_.size(); }
  /// Drop all nodes; keeps the tape's capacity for reuse.
  void reset();

 private:
  struct Node {
    Op op = Op::kLeaf;
    NodeId a = -1;
    NodeId b = -1;
    Matrix2D val;
    Matrix2D adj;  // empty until touched by backward
    double scalar = 0.0;
    std::size_t idx_r = 0;
    std::size_t idx_c = 0;
    std::shared_ptr<const Grouping> groups;
    std::shared_ptr<const std::vector<std::uint8_t>> mask;
  };

  NodeId push(Node n);
  Matrix2D& adjoint(NodeId id, std::size_t rows, std::size_t cols);
  void backward_one(std::size_t i);

  std::vector<Node> nodes_;
};

}  // namespace hain

#endif  // HAIN_GRAPH_HPP
