#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "pgen/array.hpp"
#include "pgen/error.hpp"

namespace pgen {

// Reverse-mode automatic differentiation over Array values.
//
// A Tape owns the nodes of one forward pass in construction order, which is
// by itself a topological order (every primitive appends after its inputs).
// backward() runs the list in reverse, accumulating exact adjoints into each
// node's grad array.

enum class Op {
  kLeaf,
  kMatmul,
  kAdd,
  kAddRowwise,
  kMul,
  kSmul,
  kScaleShift,
  kTanh,
  kSigmoid,
  kLog,
  kSoftmax,
  kConcat,
  kLookup,
  kPick,
  kSum,
  kScatter,
  kSlice,
  kStackRows,
  kWeightedSumRows,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatmul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kAddRowwise: return "add_rowwise";
    case Op::kMul: return "mul";
    case Op::kSmul: return "smul";
    case Op::kScaleShift: return "scale_shift";
    case Op::kTanh: return "tanh";
    case Op::kSigmoid: return "sigmoid";
    case Op::kLog: return "log";
    case Op::kSoftmax: return "softmax";
    case Op::kConcat: return "concat";
    case Op::kLookup: return "lookup";
    case Op::kPick: return "pick";
    case Op::kSum: return "sum";
    case Op::kScatter: return "scatter";
    case Op::kSlice: return "slice";
    case Op::kStackRows: return "stack_rows";
    case Op::kWeightedSumRows: return "weighted_sum_rows";
  }
  return "?";
}

struct TapeNode {
  Array value;
  Array grad;  // allocated by backward(), same shape as value
  Op op = Op::kLeaf;
  std::vector<int> parents;
  std::vector<int> iargs;   // lookup row / pick index / slice start / scatter targets
  double a = 0.0, b = 0.0;  // scale_shift coefficients
};

// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  Var leaf(Array value) {
    TapeNode n;
    n.value = std::move(value);
    return push(std::move(n));
  }

  Var constant(double v) { return leaf(Array::scalar(v)); }
  Var zeros(std::size_t n) { return leaf(Array({n})); }

  const Array& value(Var v) const { return nodes_[check(v)].value; }
  const Array& grad(Var v) const { return nodes_[check(v)].grad; }
  std::size_t size() const { return nodes_.size(); }

  // C = A B for A (m,n) with B (n,p) or B (n).
  Var matmul(Var a, Var b) {
    const Array& A = value(a);
    const Array& B = value(b);
    if (A.rank() != 2 || (B.rank() != 1 && B.rank() != 2) || A.cols() != B.dim(0)) {
      throw ShapeError(std::string("matmul: incompatible shapes ") + A.shape_str() + " x " +
                       B.shape_str());
    }
    std::size_t m = A.rows(), n = A.cols();
    TapeNode node;
    node.op = Op::kMatmul;
    node.parents = {a.id, b.id};
    if (B.rank() == 1) {
      node.value = Array({m});
      for (std::size_t i = 0; i < m; ++i) {
        const double* arow = A.data() + i * n;
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += arow[k] * B[k];
        node.value[i] = acc;
      }
    } else {
      std::size_t p = B.cols();
      node.value = Array({m, p});
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < n; ++k) {
          double aik = A.at2(i, k);
          if (aik == 0.0) continue;
          for (std::size_t j = 0; j < p; ++j) node.value.at2(i, j) += aik * B.at2(k, j);
        }
    }
    return push(std::move(node));
  }

  Var add(Var a, Var b) {
    const Array& A = value(a);
    const Array& B = value(b);
    require_same("add", A, B);
    TapeNode node = elementwise(Op::kAdd, {a.id, b.id}, A);
    for (std::size_t i = 0; i < A.numel(); ++i) node.value[i] = A[i] + B[i];
    return push(std::move(node));
  }

  // M (S,d) plus v (d) broadcast over rows.
  Var add_rowwise(Var m, Var v) {
    const Array& M = value(m);
    const Array& V = value(v);
    if (M.rank() != 2 || V.rank() != 1 || M.cols() != V.dim(0)) {
      throw ShapeError(std::string("add_rowwise: incompatible shapes ") + M.shape_str() +
                       " + " + V.shape_str());
    }
    TapeNode node = elementwise(Op::kAddRowwise, {m.id, v.id}, M);
    for (std::size_t r = 0; r < M.rows(); ++r)
      for (std::size_t c = 0; c < M.cols(); ++c) node.value.at2(r, c) = M.at2(r, c) + V[c];
    return push(std::move(node));
  }

  Var mul(Var a, Var b) {
    const Array& A = value(a);
    const Array& B = value(b);
    require_same("mul", A, B);
    TapeNode node = elementwise(Op::kMul, {a.id, b.id}, A);
    for (std::size_t i = 0; i < A.numel(); ++i) node.value[i] = A[i] * B[i];
    return push(std::move(node));
  }

  // Scalar node times tensor node.
  Var smul(Var s, Var t) {
    const Array& S = value(s);
    const Array& T = value(t);
    if (S.numel() != 1) {
      throw ShapeError(std::string("smul: left operand must be scalar, got ") + S.shape_str());
    }
    TapeNode node = elementwise(Op::kSmul, {s.id, t.id}, T);
    for (std::size_t i = 0; i < T.numel(); ++i) node.value[i] = S[0] * T[i];
    return push(std::move(node));
  }

  // a*x + b elementwise with constant coefficients.
  Var scale_shift(Var x, double a, double b) {
    const Array& X = value(x);
    TapeNode node = elementwise(Op::kScaleShift, {x.id}, X);
    node.a = a;
    node.b = b;
    for (std::size_t i = 0; i < X.numel(); ++i) node.value[i] = a * X[i] + b;
    return push(std::move(node));
  }

  Var neg(Var x) { return scale_shift(x, -1.0, 0.0); }
  Var scale(Var x, double c) { return scale_shift(x, c, 0.0); }

  Var tanh(Var x) {
    const Array& X = value(x);
    TapeNode node = elementwise(Op::kTanh, {x.id}, X);
    for (std::size_t i = 0; i < X.numel(); ++i) node.value[i] = std::tanh(X[i]);
    return push(std::move(node));
  }

  Var sigmoid(Var x) {
    const Array& X = value(x);
    TapeNode node = elementwise(Op::kSigmoid, {x.id}, X);
    for (std::size_t i = 0; i < X.numel(); ++i)
      node.value[i] = X[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-X[i]))
                                  : std::exp(X[i]) / (1.0 + std::exp(X[i]));
    return push(std::move(node));
  }

  Var log(Var x) {
    const Array& X = value(x);
    TapeNode node = elementwise(Op::kLog, {x.id}, X);
    for (std::size_t i = 0; i < X.numel(); ++i) node.value[i] = std::log(X[i]);
    return push(std::move(node));
  }

  // Softmax along the last axis, max-subtracted for stability.
  Var softmax(Var x) {
    const Array& X = value(x);
    if (X.rank() < 1 || X.numel() == 0) {
      throw ShapeError(std::string("softmax: bad operand shape ") + X.shape_str());
    }
    TapeNode node = elementwise(Op::kSoftmax, {x.id}, X);
    std::size_t n = X.shape().back();
    std::size_t rows = X.numel() / n;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* in = X.data() + r * n;
      double* out = node.value.data() + r * n;
      double mx = in[0];
      for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, in[i]);
      double z = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(in[i] - mx);
        z += out[i];
      }
      for (std::size_t i = 0; i < n; ++i) out[i] /= z;
    }
    return push(std::move(node));
  }

  // Concatenation of two vectors.
  Var concat(Var a, Var b) {
    const Array& A = value(a);
    const Array& B = value(b);
    if (A.rank() != 1 || B.rank() != 1) {
      throw ShapeError(std::string("concat: vector operands required, got ") + A.shape_str() +
                       " and " + B.shape_str());
    }
    TapeNode node;
    node.op = Op::kConcat;
    node.parents = {a.id, b.id};
    node.value = Array({A.numel() + B.numel()});
    for (std::size_t i = 0; i < A.numel(); ++i) node.value[i] = A[i];
    for (std::size_t i = 0; i < B.numel(); ++i) node.value[A.numel() + i] = B[i];
    return push(std::move(node));
  }

  // Row of an embedding matrix.
  Var lookup(Var matrix, std::size_t row) {
    const Array& M = value(matrix);
    if (M.rank() != 2 || row >= M.rows()) {
      throw ShapeError("lookup: row " + std::to_string(row) + " out of range for " +
                       M.shape_str());
    }
    TapeNode node;
    node.op = Op::kLookup;
    node.parents = {matrix.id};
    node.iargs = {static_cast<int>(row)};
    node.value = Array({M.cols()});
    for (std::size_t c = 0; c < M.cols(); ++c) node.value[c] = M.at2(row, c);
    return push(std::move(node));
  }

  // Single element of a vector, as a scalar.
  Var pick(Var v, std::size_t index) {
    const Array& V = value(v);
    if (V.rank() != 1 || index >= V.numel()) {
      throw ContractError("pick: index " + std::to_string(index) + " out of range for " +
                          V.shape_str());
    }
    TapeNode node;
    node.op = Op::kPick;
    node.parents = {v.id};
    node.iargs = {static_cast<int>(index)};
    node.value = Array::scalar(V[index]);
    return push(std::move(node));
  }

  Var sum(Var v) {
    const Array& V = value(v);
    TapeNode node;
    node.op = Op::kSum;
    node.parents = {v.id};
    double acc = 0.0;
    for (std::size_t i = 0; i < V.numel(); ++i) acc += V[i];
    node.value = Array::scalar(acc);
    return push(std::move(node));
  }

  // Dot product of two vectors.
  Var dot(Var a, Var b) { return sum(mul(a, b)); }

  // out[targets[i]] += in[i]; a linear gather/scatter used to build the
  // copy distribution over the extended vocabulary.
  Var scatter(Var v, const std::vector<int>& targets, std::size_t out_size) {
    const Array& V = value(v);
    if (V.rank() != 1 || V.numel() != targets.size()) {
      throw ShapeError("scatter: " + std::to_string(targets.size()) + " targets for operand " +
                       V.shape_str());
    }
    TapeNode node;
    node.op = Op::kScatter;
    node.parents = {v.id};
    node.iargs.reserve(targets.size());
    node.value = Array({out_size});
    for (std::size_t i = 0; i < targets.size(); ++i) {
      int t = targets[i];
      if (t < 0 || static_cast<std::size_t>(t) >= out_size) {
        throw ShapeError("scatter: target " + std::to_string(t) + " out of range for size " +
                         std::to_string(out_size));
      }
      node.iargs.push_back(t);
      node.value[static_cast<std::size_t>(t)] += V[i];
    }
    return push(std::move(node));
  }

  // Contiguous range [start, start+len) of a vector.
  Var slice(Var v, std::size_t start, std::size_t len) {
    const Array& V = value(v);
    if (V.rank() != 1 || start + len > V.numel()) {
      throw ShapeError("slice: range [" + std::to_string(start) + "," +
                       std::to_string(start + len) + ") out of bounds for " + V.shape_str());
    }
    TapeNode node;
    node.op = Op::kSlice;
    node.parents = {v.id};
    node.iargs = {static_cast<int>(start)};
    node.value = Array({len});
    for (std::size_t i = 0; i < len; ++i) node.value[i] = V[start + i];
    return push(std::move(node));
  }

  // Stacks equal-length vectors into a (k, d) matrix.
  Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw ShapeError("stack_rows: no rows");
    std::size_t d = value(rows[0]).numel();
    TapeNode node;
    node.op = Op::kStackRows;
    node.value = Array({rows.size(), d});
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Array& row = value(rows[r]);
      if (row.rank() != 1 || row.numel() != d) {
        throw ShapeError("stack_rows: row " + std::to_string(r) + " has shape " +
                         row.shape_str());
      }
      node.parents.push_back(rows[r].id);
      for (std::size_t c = 0; c < d; ++c) node.value.at2(r, c) = row[c];
    }
    return push(std::move(node));
  }

  // sum_r w[r] * M[r,:] — the attention context combination.
  Var weighted_sum_rows(Var m, Var w) {
    const Array& M = value(m);
    const Array& W = value(w);
    if (M.rank() != 2 || W.rank() != 1 || M.rows() != W.numel()) {
      throw ShapeError(std::string("weighted_sum_rows: incompatible shapes ") + M.shape_str() +
                       " , " + W.shape_str());
    }
    TapeNode node;
    node.op = Op::kWeightedSumRows;
    node.parents = {m.id, w.id};
    node.value = Array({M.cols()});
    for (std::size_t r = 0; r < M.rows(); ++r) {
      double wr = W[r];
      const double* row = M.data() + r * M.cols();
      for (std::size_t c = 0; c < M.cols(); ++c) node.value[c] += wr * row[c];
    }
    return push(std::move(node));
  }

  // Accumulates d(root)/d(node) into every node's grad array. Nodes that do
  // not feed root, parameters included, end with all-zero gradients.
  void backward(Var root) {
    int r = check(root);
    if (nodes_[r].value.numel() != 1) {
      throw ContractError(std::string("backward: root must be scalar, got ") +
                          nodes_[r].value.shape_str());
    }
    for (auto& n : nodes_) {
      n.grad = Array(n.value.shape());
    }
    nodes_[r].grad[0] = 1.0;
    for (int id = r; id >= 0; --id) {
      propagate(nodes_[id]);
    }
  }

 private:
  std::vector<TapeNode> nodes_;

  int check(Var v) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) {
      throw ContractError("invalid Var handle");
    }
    return v.id;
  }

  Var push(TapeNode node) {
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size() - 1)};
  }

  static void require_same(const char* tag, const Array& a, const Array& b) {
    if (!a.same_shape(b)) {
      throw ShapeError(std::string(tag) + ": shape mismatch " + a.shape_str() + " vs " +
                       b.shape_str());
    }
  }

  TapeNode elementwise(Op op, std::vector<int> parents, const Array& like) {
    TapeNode node;
    node.op = op;
    node.parents = std::move(parents);
    node.value = Array(like.shape());
    return node;
  }

  Array& pgrad(const TapeNode& n, std::size_t i) { return nodes_[n.parents[i]].grad; }
  const Array& pvalue(const TapeNode& n, std::size_t i) { return nodes_[n.parents[i]].value; }

  void propagate(TapeNode& n) {
    const Array& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatmul: {
        Array& dA = pgrad(n, 0);
        Array& dB = pgrad(n, 1);
        const Array& A = pvalue(n, 0);
        const Array& B = pvalue(n, 1);
        std::size_t m = A.rows(), k = A.cols();
        if (B.rank() == 1) {
          // y = A x: dA += g x^T, dx += A^T g
          for (std::size_t i = 0; i < m; ++i) {
            double gi = g[i];
            if (gi == 0.0) continue;
            double* darow = dA.data() + i * k;
            const double* arow = A.data() + i * k;
            for (std::size_t j = 0; j < k; ++j) {
              darow[j] += gi * B[j];
              dB[j] += gi * arow[j];
            }
          }
        } else {
          std::size_t p = B.cols();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < p; ++j) {
              double gij = g.at2(i, j);
              if (gij == 0.0) continue;
              for (std::size_t t = 0; t < k; ++t) {
                dA.at2(i, t) += gij * B.at2(t, j);
                dB.at2(t, j) += gij * A.at2(i, t);
              }
            }
        }
        break;
      }
      case Op::kAdd: {
        accumulate(pgrad(n, 0), g, 1.0);
        accumulate(pgrad(n, 1), g, 1.0);
        break;
      }
      case Op::kAddRowwise: {
        accumulate(pgrad(n, 0), g, 1.0);
        Array& dv = pgrad(n, 1);
        std::size_t rows = g.rows(), cols = g.cols();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) dv[c] += g.at2(r, c);
        break;
      }
      case Op::kMul: {
        Array& da = pgrad(n, 0);
        Array& db = pgrad(n, 1);
        const Array& a = pvalue(n, 0);
        const Array& b = pvalue(n, 1);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          da[i] += g[i] * b[i];
          db[i] += g[i] * a[i];
        }
        break;
      }
      case Op::kSmul: {
        Array& ds = pgrad(n, 0);
        Array& dt = pgrad(n, 1);
        double s = pvalue(n, 0)[0];
        const Array& t = pvalue(n, 1);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          ds[0] += g[i] * t[i];
          dt[i] += g[i] * s;
        }
        break;
      }
      case Op::kScaleShift: {
        accumulate(pgrad(n, 0), g, n.a);
        break;
      }
      case Op::kTanh: {
        Array& dx = pgrad(n, 0);
        for (std::size_t i = 0; i < g.numel(); ++i)
          dx[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
        break;
      }
      case Op::kSigmoid: {
        Array& dx = pgrad(n, 0);
        for (std::size_t i = 0; i < g.numel(); ++i)
          dx[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
        break;
      }
      case Op::kLog: {
        Array& dx = pgrad(n, 0);
        const Array& x = pvalue(n, 0);
        for (std::size_t i = 0; i < g.numel(); ++i) dx[i] += g[i] / x[i];
        break;
      }
      case Op::kSoftmax: {
        Array& dx = pgrad(n, 0);
        std::size_t cols = n.value.shape().back();
        std::size_t rows = n.value.numel() / cols;
        for (std::size_t r = 0; r < rows; ++r) {
          const double* y = n.value.data() + r * cols;
          const double* gr = g.data() + r * cols;
          double dotv = 0.0;
          for (std::size_t i = 0; i < cols; ++i) dotv += gr[i] * y[i];
          double* out = dx.data() + r * cols;
          for (std::size_t i = 0; i < cols; ++i) out[i] += y[i] * (gr[i] - dotv);
        }
        break;
      }
      case Op::kConcat: {
        Array& da = pgrad(n, 0);
        Array& db = pgrad(n, 1);
        std::size_t na = da.numel();
        for (std::size_t i = 0; i < na; ++i) da[i] += g[i];
        for (std::size_t i = 0; i < db.numel(); ++i) db[i] += g[na + i];
        break;
      }
      case Op::kLookup: {
        Array& dM = pgrad(n, 0);
        std::size_t row = static_cast<std::size_t>(n.iargs[0]);
        std::size_t cols = g.numel();
        double* drow = dM.data() + row * cols;
        for (std::size_t c = 0; c < cols; ++c) drow[c] += g[c];
        break;
      }
      case Op::kPick: {
        pgrad(n, 0)[static_cast<std::size_t>(n.iargs[0])] += g[0];
        break;
      }
      case Op::kSum: {
        accumulate_scalar(pgrad(n, 0), g[0]);
        break;
      }
      case Op::kScatter: {
        Array& dv = pgrad(n, 0);
        for (std::size_t i = 0; i < n.iargs.size(); ++i)
          dv[i] += g[static_cast<std::size_t>(n.iargs[i])];
        break;
      }
      case Op::kSlice: {
        Array& dv = pgrad(n, 0);
        std::size_t start = static_cast<std::size_t>(n.iargs[0]);
        for (std::size_t i = 0; i < g.numel(); ++i) dv[start + i] += g[i];
        break;
      }
      case Op::kStackRows: {
        std::size_t cols = n.value.cols();
        for (std::size_t r = 0; r < n.parents.size(); ++r) {
          Array& dr = pgrad(n, r);
          const double* grow = g.data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) dr[c] += grow[c];
        }
        break;
      }
      case Op::kWeightedSumRows: {
        Array& dM = pgrad(n, 0);
        Array& dw = pgrad(n, 1);
        const Array& M = pvalue(n, 0);
        const Array& w = pvalue(n, 1);
        std::size_t cols = M.cols();
        for (std::size_t r = 0; r < M.rows(); ++r) {
          double* dmrow = dM.data() + r * cols;
          const double* mrow = M.data() + r * cols;
          double wr = w[r], acc = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            dmrow[c] += wr * g[c];
            acc += g[c] * mrow[c];
          }
          dw[r] += acc;
        }
        break;
      }
    }
  }

  static void accumulate(Array& dst, const Array& g, double scale) {
    for (std::size_t i = 0; i < dst.numel(); ++i) dst[i] += scale * g[i];
  }

  static void accumulate_scalar(Array& dst, double v) {
    for (std::size_t i = 0; i < dst.numel(); ++i) dst[i] += v;
  }
};

// Named gradient map produced by a backward pass, ordered like the
// parameter store it was collected from.
using GradMap = std::vector<std::pair<std::string, Array>>;

inline double global_norm(const GradMap& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) {
    for (std::size_t i = 0; i < g.numel(); ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericError("non-finite gradient entry in " + name);
      }
      sq += g[i] * g[i];
    }
  }
  return std::sqrt(sq);
}

// Global-norm clipping: if the L2 norm over all entries exceeds max_norm,
// every entry is scaled by max_norm / norm.
inline GradMap clip_gradients(GradMap grads, double max_norm = 2.0) {
  if (max_norm <= 0.0) throw ConfigError("clip_gradients: max_norm must be positive");
  double norm = global_norm(grads);
  if (norm > max_norm) {
    double s = max_norm / norm;
    for (auto& [name, g] : grads)
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= s;
  }
  return grads;
}

}  // namespace pgen
