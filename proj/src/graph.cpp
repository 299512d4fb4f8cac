#include "hain/graph.hpp"

#include <cmath>
#include <string>

#include "hain/common.hpp"

namespace hain {

namespace {
constexpr double kLogClamp = 1e-12;
}

NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::leaf(Matrix2D value) {
  Node n;
  n.op = Op::kLeaf;
  n.val = std::move(value);
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kMatMul;
  n.a = a;
  n.b = b;
  n.val = hain::matmul(value(a), value(b));
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.val = hain::add(value(a), value(b));
  return push(std::move(n));
}

NodeId Graph::add_row_broadcast(NodeId m, NodeId r) {
  const Matrix2D& mv = value(m);
  const Matrix2D& rv = value(r);
  if (rv.rows() != 1 || rv.cols() != mv.cols()) throw_shape_error("add_row_broadcast", mv, rv);
  Node n;
  n.op = Op::kAddRowBroadcast;
  n.a = m;
  n.b = r;
  n.val = mv;
  for (std::size_t i = 0; i < mv.rows(); ++i)
    for (std::size_t j = 0; j < mv.cols(); ++j) n.val(i, j) += rv(0, j);
  return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kSub;
  n.a = a;
  n.b = b;
  n.val = hain::sub(value(a), value(b));
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kMulElem;
  n.a = a;
  n.b = b;
  n.val = hadamard(value(a), value(b));
  return push(std::move(n));
}

NodeId Graph::scale_rows(NodeId m, NodeId v) {
  const Matrix2D& mv = value(m);
  const Matrix2D& vv = value(v);
  if (vv.cols() != 1 || vv.rows() != mv.rows()) throw_shape_error("scale_rows", mv, vv);
  Node n;
  n.op = Op::kScaleRows;
  n.a = m;
  n.b = v;
  n.val = mv;
  for (std::size_t i = 0; i < mv.rows(); ++i)
    for (std::size_t j = 0; j < mv.cols(); ++j) n.val(i, j) *= vv(i, 0);
  return push(std::move(n));
}

NodeId Graph::tanh(NodeId a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a;
  n.val = value(a);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val.data()[i] = std::tanh(n.val.data()[i]);
  return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId a) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = a;
  n.val = value(a);
  for (std::size_t i = 0; i < n.val.size(); ++i) {
    const double x = n.val.data()[i];
    n.val.data()[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                               : std::exp(x) / (1.0 + std::exp(x));
  }
  return push(std::move(n));
}

NodeId Graph::relu(NodeId a) {
  Node n;
  n.op = Op::kRelu;
  n.a = a;
  n.val = value(a);
  for (std::size_t i = 0; i < n.val.size(); ++i)
    if (n.val.data()[i] < 0.0) n.val.data()[i] = 0.0;
  return push(std::move(n));
}

NodeId Graph::softmax_rows(NodeId a, std::shared_ptr<const std::vector<std::uint8_t>> mask) {
  Node n;
  n.op = Op::kSoftmaxRows;
  n.a = a;
  n.mask = std::move(mask);
  n.val = masked_softmax_rows(value(a), n.mask ? n.mask->data() : nullptr);
  return push(std::move(n));
}

NodeId Graph::segment_softmax_col(NodeId e, std::shared_ptr<const Grouping> groups) {
  const Matrix2D& ev = value(e);
  if (ev.cols() != 1 || ev.rows() != groups->dim) {
    throw ShapeError("segment_softmax_col: expected " + std::to_string(groups->dim) +
                     "x1, got " + ev.shape_str());
  }
  Node n;
  n.op = Op::kSegmentSoftmaxCol;
  n.a = e;
  n.groups = std::move(groups);
  n.val = Matrix2D(ev.rows(), 1);
  const Grouping& gr = *n.groups;
  for (std::size_t g = 0; g < gr.group_count(); ++g) {
    const std::size_t s = gr.start(g), len = gr.length(g);
    double mx = ev(s, 0);
    for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, ev(s + i, 0));
    double sum = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      n.val(s + i, 0) = std::exp(ev(s + i, 0) - mx);
      sum += n.val(s + i, 0);
    }
    for (std::size_t i = 0; i < len; ++i) n.val(s + i, 0) /= sum;
  }
  return push(std::move(n));
}

NodeId Graph::segment_weighted_sum(NodeId alpha, NodeId h, std::shared_ptr<const Grouping> groups) {
  const Matrix2D& av = value(alpha);
  const Matrix2D& hv = value(h);
  if (av.cols() != 1 || av.rows() != hv.rows() || hv.rows() != groups->dim)
    throw_shape_error("segment_weighted_sum", av, hv);
  Node n;
  n.op = Op::kSegmentWeightedSum;
  n.a = alpha;
  n.b = h;
  n.groups = std::move(groups);
  const Grouping& gr = *n.groups;
  n.val = Matrix2D(gr.group_count(), hv.cols());
  for (std::size_t i = 0; i < hv.rows(); ++i) {
    const std::size_t g = gr.group_of(i);
    const double w = av(i, 0);
    for (std::size_t j = 0; j < hv.cols(); ++j) n.val(g, j) += w * hv(i, j);
  }
  return push(std::move(n));
}

NodeId Graph::expand_segments(NodeId v, std::shared_ptr<const Grouping> groups) {
  const Matrix2D& vv = value(v);
  if (vv.cols() != 1 || vv.rows() != groups->group_count()) {
    throw ShapeError("expand_segments: expected " + std::to_string(groups->group_count()) +
                     "x1, got " + vv.shape_str());
  }
  Node n;
  n.op = Op::kExpandSegments;
  n.a = v;
  n.groups = std::move(groups);
  n.val = Matrix2D(n.groups->dim, 1);
  for (std::size_t i = 0; i < n.groups->dim; ++i) n.val(i, 0) = vv(n.groups->group_of(i), 0);
  return push(std::move(n));
}

NodeId Graph::normalize_sum(NodeId v) {
  const Matrix2D& vv = value(v);
  if (vv.cols() != 1) throw ShapeError("normalize_sum: expected a column, got " + vv.shape_str());
  double s = 0.0;
  for (std::size_t i = 0; i < vv.rows(); ++i) s += vv(i, 0);
  if (s == 0.0) throw ContractError("normalize_sum: zero total");
  Node n;
  n.op = Op::kNormalizeSum;
  n.a = v;
  n.scalar = s;
  n.val = hain::scalar_mul(vv, 1.0 / s);
  return push(std::move(n));
}

NodeId Graph::transpose(NodeId a) {
  Node n;
  n.op = Op::kTranspose;
  n.a = a;
  n.val = hain::transpose(value(a));
  return push(std::move(n));
}

NodeId Graph::scalar_mul(NodeId a, double c) {
  Node n;
  n.op = Op::kScalarMul;
  n.a = a;
  n.scalar = c;
  n.val = hain::scalar_mul(value(a), c);
  return push(std::move(n));
}

NodeId Graph::sum_all(NodeId a) {
  Node n;
  n.op = Op::kSumAll;
  n.a = a;
  n.val = Matrix2D(1, 1);
  const Matrix2D& av = value(a);
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av.data()[i];
  n.val(0, 0) = s;
  return push(std::move(n));
}

NodeId Graph::concat_cols(NodeId a, NodeId b) {
  const Matrix2D& av = value(a);
  const Matrix2D& bv = value(b);
  if (av.rows() != 1 || bv.rows() != 1) throw_shape_error("concat_cols", av, bv);
  Node n;
  n.op = Op::kConcatCols;
  n.a = a;
  n.b = b;
  n.val = Matrix2D(1, av.cols() + bv.cols());
  for (std::size_t j = 0; j < av.cols(); ++j) n.val(0, j) = av(0, j);
  for (std::size_t j = 0; j < bv.cols(); ++j) n.val(0, av.cols() + j) = bv(0, j);
  return push(std::move(n));
}

NodeId Graph::pick_entry(NodeId a, std::size_t r, std::size_t c) {
  const Matrix2D& av = value(a);
  if (r >= av.rows() || c >= av.cols())
    throw ContractError("pick_entry: index (" + std::to_string(r) + "," + std::to_string(c) +
                        ") outside " + av.shape_str());
  Node n;
  n.op = Op::kPickEntry;
  n.a = a;
  n.idx_r = r;
  n.idx_c = c;
  n.val = Matrix2D(1, 1);
  n.val(0, 0) = av(r, c);
  return push(std::move(n));
}

NodeId Graph::neg_log_pick(NodeId probs, std::size_t label) {
  const Matrix2D& pv = value(probs);
  if (pv.rows() != 1) throw ShapeError("neg_log_pick: expected a row, got " + pv.shape_str());
  if (label >= pv.cols())
    throw ContractError("neg_log_pick: label " + std::to_string(label) + " out of range for " +
                        std::to_string(pv.cols()) + " classes");
  Node n;
  n.op = Op::kNegLogPick;
  n.a = probs;
  n.idx_c = label;
  n.val = Matrix2D(1, 1);
  n.val(0, 0) = -std::log(std::max(pv(0, label), kLogClamp));
  return push(std::move(n));
}

NodeId Graph::entropy_col(NodeId p) {
  const Matrix2D& pv = value(p);
  if (pv.cols() != 1) throw ShapeError("entropy_col: expected a column, got " + pv.shape_str());
  Node n;
  n.op = Op::kEntropyCol;
  n.a = p;
  n.val = Matrix2D(1, 1);
  double h = 0.0;
  for (std::size_t i = 0; i < pv.rows(); ++i) {
    const double x = pv(i, 0);
    if (x > 0.0) h -= x * std::log(x);
  }
  n.val(0, 0) = h;
  return push(std::move(n));
}

Matrix2D& Graph::adjoint(NodeId id, std::size_t rows, std::size_t cols) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.adj.empty()) n.adj = Matrix2D(rows, cols);
  return n.adj;
}

Matrix2D Graph::grad(NodeId id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.adj.empty()) return Matrix2D(n.val.rows(), n.val.cols());
  return n.adj;
}

void Graph::backward(NodeId loss) {
  const Matrix2D& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1)
    throw ContractError("backward: loss node must be scalar, got " + lv.shape_str());
  for (Node& n : nodes_) n.adj = Matrix2D();
  Matrix2D seed(1, 1);
  seed(0, 0) = 1.0;
  nodes_[static_cast<std::size_t>(loss)].adj = std::move(seed);
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (nodes_[i].adj.empty() || nodes_[i].op == Op::kLeaf) continue;
    backward_one(i);
  }
}

void Graph::backward_one(std::size_t i) {
  Node& n = nodes_[i];
  const Matrix2D& g = n.adj;
  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kMatMul: {
      const Matrix2D& av = value(n.a);
      const Matrix2D& bv = value(n.b);
      // dA += g * B^T
      {
        Matrix2D& da = adjoint(n.a, av.rows(), av.cols());
        for (std::size_t r = 0; r < av.rows(); ++r)
          for (std::size_t c = 0; c < av.cols(); ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < bv.cols(); ++j) s += g(r, j) * bv(c, j);
            da(r, c) += s;
          }
      }
      // dB += A^T * g
      {
        Matrix2D& db = adjoint(n.b, bv.rows(), bv.cols());
        for (std::size_t r = 0; r < av.rows(); ++r)
          for (std::size_t c = 0; c < av.cols(); ++c) {
            const double a = av(r, c);
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < bv.cols(); ++j) db(c, j) += a * g(r, j);
          }
      }
      break;
    }
    case Op::kAdd: {
      Matrix2D& da = adjoint(n.a, g.rows(), g.cols());
      Matrix2D& db = adjoint(n.b, g.rows(), g.cols());
      for (std::size_t k = 0; k < g.size(); ++k) {
        da.data()[k] += g.data()[k];
        db.data()[k] += g.data()[k];
      }
      break;
    }
    case Op::kAddRowBroadcast: {
      Matrix2D& da = adjoint(n.a, g.rows(), g.cols());
      Matrix2D& db = adjoint(n.b, 1, g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) {
          da(r, c) += g(r, c);
          db(0, c) += g(r, c);
        }
      break;
    }
    case Op::kSub: {
      Matrix2D& da = adjoint(n.a, g.rows(), g.cols());
      Matrix2D& db = adjoint(n.b, g.rows(), g.cols());
      for (std::size_t k = 0; k < g.size(); ++k) {
        da.data()[k] += g.data()[k];
        db.data()[k] -= g.data()[k];
      }
      break;
    }
    case Op::kMulElem: {
      const Matrix2D& av = value(n.a);
      const Matrix2D& bv = value(n.b);
      {
        Matrix2D& da = adjoint(n.a, g.rows(), g.cols());
        for (std::size_t k = 0; k < g.size(); ++k) da.data()[k] += g.data()[k] * bv.data()[k];
      }
      {
        Matrix2D& db = adjoint(n.b, g.rows(), g.cols());
        for (std::size_t k = 0; k < g.size(); ++k) db.data()[k] += g.data()[k] * av.data()[k];
      }
      break;
    }
    case Op::kScaleRows: {
      const Matrix2D& mv = value(n.a);
      const Matrix2D& vv = value(n.b);
      Matrix2D& dm = adjoint(n.a, mv.rows(), mv.cols());
      Matrix2D& dv = adjoint(n.b, vv.rows(), 1);
      for (std::size_t r = 0; r < mv.rows(); ++r) {
        const double w = vv(r, 0);
        double s = 0.0;
        for (std::size_t c = 0; c < mv.cols(); ++c) {
          dm(r, c) += g(r, c) * w;
          s += g(r, c) * mv(r, c);
        }
        dv(r, 0) += s;
      }
      break;
    }
    case Op::kTanh: {
      Matrix2D& da = adjoint(n.a, g.rows(), g.cols());
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double y = n.val.data()[k];
        da.data()[k] += g.data()[k] * (1.0 - y * y);
      }
      break;
    }
    case Op::kSigmoid: {
      Matrix2D& da = adjoint(n.a, g.rows(), g.cols());
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double y = n.val.data()[k];
        da.data()[k] += g.data()[k] * y * (1.0 - y);
      }
      break;
    }
    case Op::kRelu: {
      const Matrix2D& av = value(n.a);
      Matrix2D& da = adjoint(n.a, g.rows(), g.cols());
      for (std::size_t k = 0; k < g.size(); ++k)
        if (av.data()[k] > 0.0) da.data()[k] += g.data()[k];
      break;
    }
    case Op::kSoftmaxRows: {
      // dx_j = y_j * (g_j - sum_k g_k y_k), per row over permitted entries.
      Matrix2D& da = adjoint(n.a, g.rows(), g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < g.cols(); ++c) dot += g(r, c) * n.val(r, c);
        for (std::size_t c = 0; c < g.cols(); ++c)
          da(r, c) += n.val(r, c) * (g(r, c) - dot);
      }
      break;
    }
    case Op::kSegmentSoftmaxCol: {
      Matrix2D& da = adjoint(n.a, g.rows(), 1);
      const Grouping& gr = *n.groups;
      for (std::size_t seg = 0; seg < gr.group_count(); ++seg) {
        const std::size_t s = gr.start(seg), len = gr.length(seg);
        double dot = 0.0;
        for (std::size_t k = 0; k < len; ++k) dot += g(s + k, 0) * n.val(s + k, 0);
        for (std::size_t k = 0; k < len; ++k)
          da(s + k, 0) += n.val(s + k, 0) * (g(s + k, 0) - dot);
      }
      break;
    }
    case Op::kSegmentWeightedSum: {
      const Matrix2D& av = value(n.a);
      const Matrix2D& hv = value(n.b);
      Matrix2D& dalpha = adjoint(n.a, av.rows(), 1);
      Matrix2D& dh = adjoint(n.b, hv.rows(), hv.cols());
      const Grouping& gr = *n.groups;
      for (std::size_t r = 0; r < hv.rows(); ++r) {
        const std::size_t seg = gr.group_of(r);
        const double w = av(r, 0);
        double s = 0.0;
        for (std::size_t c = 0; c < hv.cols(); ++c) {
          s += g(seg, c) * hv(r, c);
          dh(r, c) += w * g(seg, c);
        }
        dalpha(r, 0) += s;
      }
      break;
    }
    case Op::kExpandSegments: {
      const Matrix2D& vv = value(n.a);
      Matrix2D& dv = adjoint(n.a, vv.rows(), 1);
      const Grouping& gr = *n.groups;
      for (std::size_t r = 0; r < gr.dim; ++r) dv(gr.group_of(r), 0) += g(r, 0);
      break;
    }
    case Op::kNormalizeSum: {
      const double s = n.scalar;
      Matrix2D& dv = adjoint(n.a, g.rows(), 1);
      double dot = 0.0;
      for (std::size_t r = 0; r < g.rows(); ++r) dot += g(r, 0) * n.val(r, 0);
      for (std::size_t r = 0; r < g.rows(); ++r) dv(r, 0) += (g(r, 0) - dot) / s;
      break;
    }
    case Op::kTranspose: {
      Matrix2D& da = adjoint(n.a, g.cols(), g.rows());
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) da(c, r) += g(r, c);
      break;
    }
    case Op::kScalarMul: {
      Matrix2D& da = adjoint(n.a, g.rows(), g.cols());
      for (std::size_t k = 0; k < g.size(); ++k) da.data()[k] += g.data()[k] * n.scalar;
      break;
    }
    case Op::kSumAll: {
      const Matrix2D& av = value(n.a);
      Matrix2D& da = adjoint(n.a, av.rows(), av.cols());
      const double gv = g(0, 0);
      for (std::size_t k = 0; k < da.size(); ++k) da.data()[k] += gv;
      break;
    }
    case Op::kConcatCols: {
      const Matrix2D& av = value(n.a);
      const Matrix2D& bv = value(n.b);
      Matrix2D& da = adjoint(n.a, 1, av.cols());
      Matrix2D& db = adjoint(n.b, 1, bv.cols());
      for (std::size_t j = 0; j < av.cols(); ++j) da(0, j) += g(0, j);
      for (std::size_t j = 0; j < bv.cols(); ++j) db(0, j) += g(0, av.cols() + j);
      break;
    }
    case Op::kPickEntry: {
      const Matrix2D& av = value(n.a);
      Matrix2D& da = adjoint(n.a, av.rows(), av.cols());
      da(n.idx_r, n.idx_c) += g(0, 0);
      break;
    }
    case Op::kNegLogPick: {
      const Matrix2D& pv = value(n.a);
      Matrix2D& dp = adjoint(n.a, 1, pv.cols());
      const double p = std::max(pv(0, n.idx_c), kLogClamp);
      dp(0, n.idx_c) += -g(0, 0) / p;
      break;
    }
    case Op::kEntropyCol: {
      const Matrix2D& pv = value(n.a);
      Matrix2D& dp = adjoint(n.a, pv.rows(), 1);
      const double gv = g(0, 0);
      for (std::size_t r = 0; r < pv.rows(); ++r) {
        const double x = std::max(pv(r, 0), kLogClamp);
        dp(r, 0) += gv * (-(std::log(x) + 1.0));
      }
      break;
    }
  }
}

void Graph::reset() { nodes_.clear(); }

}  // namespace hain
