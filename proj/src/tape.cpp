#include "dyged/tape.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dyged/error.hpp"
#include "dyged/kernels.hpp"

namespace dyged::ad {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::matmul: return "matmul";
    case Op::spmm: return "spmm";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::scale: return "scale";
    case Op::add_row: return "add_row";
    case Op::tanh: return "tanh";
    case Op::sigmoid: return "sigmoid";
    case Op::relu: return "relu";
    case Op::softmax_row: return "softmax_row";
    case Op::concat_rows: return "concat_rows";
    case Op::concat_cols: return "concat_cols";
    case Op::transpose: return "transpose";
    case Op::sum: return "sum";
    case Op::mean_rows: return "mean_rows";
    case Op::max_rows: return "max_rows";
    case Op::dropout: return "dropout";
    case Op::weighted_xent: return "weighted_xent";
  }
  return "?";
}

const Matrix& Var::value() const { return tape->value(*this); }
const Matrix& Var::grad() const { return tape->grad(*this); }

Var Tape::leaf(Matrix value, std::string label) {
  Node n;
  n.op = Op::leaf;
  n.value = std::move(value);
  n.label = std::move(label);
  return push(std::move(n));
}

Var Tape::constant(Matrix value, std::string label) {
  Node n;
  n.op = Op::leaf;
  n.value = std::move(value);
  n.label = std::move(label);
  n.needs_grad = false;
  return push(std::move(n));
}

Var Tape::push(Node node) {
  if (node.op != Op::leaf) {
    node.needs_grad = std::any_of(node.parents.begin(), node.parents.end(),
                                  [&](std::uint32_t p) { return nodes_[p].needs_grad; });
  }
  for (auto v : node.value.data()) {
    if (!std::isfinite(v)) {
      fail(ErrorKind::contract, std::string("non-finite value produced by ") +
                                    std::string(op_name(node.op)));
    }
  }
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

std::string Tape::dump() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    os << i << ' ' << op_name(n.op) << ' ' << n.value.shape_str();
    if (!n.parents.empty()) {
      os << " <-";
      for (auto p : n.parents) os << ' ' << p;
    }
    if (!n.label.empty()) os << " [" << n.label << ']';
    os << '\n';
  }
  return os.str();
}

void Tape::backward(Var loss) {
  if (loss.tape != this) fail(ErrorKind::contract, "backward: loss belongs to another tape");
  const auto& root = nodes_.at(loss.id).value;
  if (root.rows() != 1 || root.cols() != 1) {
    fail(ErrorKind::contract, "backward: loss must be 1x1, got " + root.shape_str());
  }
  for (auto& n : nodes_) n.grad = Matrix(n.value.rows(), n.value.cols());
  nodes_[loss.id].grad[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (nodes_[i].op != Op::leaf && nodes_[i].needs_grad) propagate(nodes_[i]);
  }
  for (auto& n : nodes_) {
    if (!n.needs_grad) std::fill(n.grad.data().begin(), n.grad.data().end(), 0.0);
  }
}

namespace {

void accumulate(Matrix& into, const Matrix& delta, double factor = 1.0) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += factor * delta[i];
}

}  // namespace

void Tape::propagate(const Node& node) {
  const Matrix& g = node.grad;
  const double f = (corrupted_ && *corrupted_ == node.op) ? 1.5 : 1.0;
  auto parent = [&](std::size_t k) -> Node& { return nodes_[node.parents[k]]; };

  switch (node.op) {
    case Op::leaf:
      break;
    case Op::matmul: {
      Node& a = parent(0);
      Node& b = parent(1);
      if (a.needs_grad) {
        if (f == 1.0) {
          kernels::matmul_nt(g, b.value, a.grad);
        } else {
          Matrix da(a.value.rows(), a.value.cols());
          kernels::matmul_nt(g, b.value, da);
          accumulate(a.grad, da, f);
        }
      }
      if (b.needs_grad) {
        if (f == 1.0) {
          kernels::matmul_tn(a.value, g, b.grad);
        } else {
          Matrix db(b.value.rows(), b.value.cols());
          kernels::matmul_tn(a.value, g, db);
          accumulate(b.grad, db, f);
        }
      }
      break;
    }
    case Op::spmm: {
      Node& b = parent(0);
      if (!b.needs_grad) break;
      const SparseMatrix& s = *node.sparse;
      const std::size_t n = g.cols();
      for (std::size_t i = 0; i < s.rows; ++i) {
        for (std::size_t p = s.row_ptr[i]; p < s.row_ptr[i + 1]; ++p) {
          const double v = f * s.values[p];
          const std::size_t r = s.col_idx[p];
          for (std::size_t j = 0; j < n; ++j) b.grad(r, j) += v * g(i, j);
        }
      }
      break;
    }
    case Op::add:
      accumulate(parent(0).grad, g, f);
      accumulate(parent(1).grad, g, f);
      break;
    case Op::sub:
      accumulate(parent(0).grad, g, f);
      accumulate(parent(1).grad, g, -f);
      break;
    case Op::mul: {
      Node& a = parent(0);
      Node& b = parent(1);
      for (std::size_t i = 0; i < g.size(); ++i) {
        a.grad[i] += f * g[i] * b.value[i];
        b.grad[i] += f * g[i] * a.value[i];
      }
      break;
    }
    case Op::scale:
      accumulate(parent(0).grad, g, f * node.scalar);
      break;
    case Op::add_row: {
      accumulate(parent(0).grad, g, f);
      Matrix& bg = parent(1).grad;
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) bg[j] += f * g(i, j);
      break;
    }
    case Op::tanh: {
      Matrix& ag = parent(0).grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = node.value[i];
        ag[i] += f * g[i] * (1.0 - y * y);
      }
      break;
    }
    case Op::sigmoid: {
      Matrix& ag = parent(0).grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = node.value[i];
        ag[i] += f * g[i] * y * (1.0 - y);
      }
      break;
    }
    case Op::relu: {
      Node& a = parent(0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (a.value[i] > 0.0) a.grad[i] += f * g[i];
      }
      break;
    }
    case Op::softmax_row: {
      Matrix& ag = parent(0).grad;
      const Matrix& y = node.value;
      for (std::size_t r = 0; r < y.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < y.cols(); ++j) dot += g(r, j) * y(r, j);
        for (std::size_t j = 0; j < y.cols(); ++j) ag(r, j) += f * y(r, j) * (g(r, j) - dot);
      }
      break;
    }
    case Op::concat_rows: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < node.parents.size(); ++k) {
        Node& p = parent(k);
        for (std::size_t i = 0; i < p.value.rows(); ++i)
          for (std::size_t j = 0; j < p.value.cols(); ++j) p.grad(i, j) += f * g(offset + i, j);
        offset += p.value.rows();
      }
      break;
    }
    case Op::concat_cols: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < node.parents.size(); ++k) {
        Node& p = parent(k);
        for (std::size_t i = 0; i < p.value.rows(); ++i)
          for (std::size_t j = 0; j < p.value.cols(); ++j) p.grad(i, j) += f * g(i, offset + j);
        offset += p.value.cols();
      }
      break;
    }
    case Op::transpose: {
      Matrix& ag = parent(0).grad;
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) ag(j, i) += f * g(i, j);
      break;
    }
    case Op::sum: {
      Matrix& ag = parent(0).grad;
      for (std::size_t i = 0; i < ag.size(); ++i) ag[i] += f * g[0];
      break;
    }
    case Op::mean_rows: {
      Matrix& ag = parent(0).grad;
      const double inv = 1.0 / static_cast<double>(ag.rows());
      for (std::size_t i = 0; i < ag.rows(); ++i)
        for (std::size_t j = 0; j < ag.cols(); ++j) ag(i, j) += f * g(0, j) * inv;
      break;
    }
    case Op::max_rows: {
      Node& a = parent(0);
      for (std::size_t j = 0; j < a.value.cols(); ++j) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < a.value.rows(); ++i) {
          if (a.value(i, j) > a.value(best, j)) best = i;
        }
        a.grad(best, j) += f * g(0, j);
      }
      break;
    }
    case Op::dropout: {
      Matrix& ag = parent(0).grad;
      for (std::size_t i = 0; i < g.size(); ++i) ag[i] += f * g[i] * node.aux[i];
      break;
    }
    case Op::weighted_xent: {
      // aux holds per-row (label, p_event, p_none).
      Node& s = parent(0);
      const double x = node.scalar;
      const double inv_batch = 1.0 / static_cast<double>(s.value.rows());
      for (std::size_t r = 0; r < s.value.rows(); ++r) {
        const bool event = node.aux(r, 0) > 0.5;
        const std::size_t cls = event ? 0 : 1;
        const double weight = event ? (1.0 - x) : x;
        const double p_cls = node.aux(r, 1 + cls);
        if (p_cls < kProbFloor) continue;  // clamped: flat in the scores
        for (std::size_t j = 0; j < 2; ++j) {
          const double pj = node.aux(r, 1 + j);
          const double delta = pj - (j == cls ? 1.0 : 0.0);
          s.grad(r, j) += f * g[0] * weight * delta * inv_batch;
        }
      }
      break;
    }
  }
}

struct OpBuilder {
  static Tape& tape_of(Var a) {
    if (!a.valid()) fail(ErrorKind::contract, "operation on an unbound Var");
    return *a.tape;
  }

  static Tape& same_tape(Var a, Var b) {
    Tape& t = tape_of(a);
    if (b.tape != &t) fail(ErrorKind::contract, "operands live on different tapes");
    return t;
  }

  static Var emit(Tape& t, Op op, Matrix value, std::vector<std::uint32_t> parents) {
    Tape::Node n;
    n.op = op;
    n.value = std::move(value);
    n.parents = std::move(parents);
    return t.push(std::move(n));
  }

  static Var emit(Tape& t, Tape::Node n) { return t.push(std::move(n)); }
};

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) {
    fail(ErrorKind::dimension,
         std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
}

template <class F>
Var unary(Var a, Op op, F&& fn) {
  Tape& t = OpBuilder::tape_of(a);
  Matrix out = a.value();
  for (auto& v : out.data()) v = fn(v);
  return OpBuilder::emit(t, op, std::move(out), {a.id});
}

template <class F>
Var binary(Var a, Var b, Op op, const char* what, F&& fn) {
  Tape& t = OpBuilder::same_tape(a, b);
  require_same_shape(a.value(), b.value(), what);
  Matrix out = a.value();
  const Matrix& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(out[i], bv[i]);
  return OpBuilder::emit(t, op, std::move(out), {a.id, b.id});
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = OpBuilder::same_tape(a, b);
  Matrix out;
  kernels::matmul(a.value(), b.value(), out);
  return OpBuilder::emit(t, Op::matmul, std::move(out), {a.id, b.id});
}

Var spmm(std::shared_ptr<const SparseMatrix> s, Var b) {
  Tape& t = OpBuilder::tape_of(b);
  if (!s) fail(ErrorKind::contract, "spmm: null sparse operand");
  Tape::Node n;
  n.op = Op::spmm;
  kernels::spmm(*s, b.value(), n.value);
  n.parents = {b.id};
  n.sparse = std::move(s);
  return OpBuilder::emit(t, std::move(n));
}

Var add(Var a, Var b) {
  return binary(a, b, Op::add, "add", [](double x, double y) { return x + y; });
}

Var sub(Var a, Var b) {
  return binary(a, b, Op::sub, "sub", [](double x, double y) { return x - y; });
}

Var mul(Var a, Var b) {
  return binary(a, b, Op::mul, "mul", [](double x, double y) { return x * y; });
}

Var scale(Var a, double factor) {
  Tape& t = OpBuilder::tape_of(a);
  Tape::Node n;
  n.op = Op::scale;
  n.value = a.value();
  for (auto& v : n.value.data()) v *= factor;
  n.parents = {a.id};
  n.scalar = factor;
  return OpBuilder::emit(t, std::move(n));
}

Var add_row(Var a, Var bias) {
  Tape& t = OpBuilder::same_tape(a, bias);
  const Matrix& b = bias.value();
  if (b.rows() != 1 || b.cols() != a.value().cols()) {
    fail(ErrorKind::dimension,
         "add_row: bias " + b.shape_str() + " does not fit rows of " + a.value().shape_str());
  }
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b[j];
  return OpBuilder::emit(t, Op::add_row, std::move(out), {a.id, bias.id});
}

Var tanh(Var a) {
  return unary(a, Op::tanh, [](double v) { return std::tanh(v); });
}

Var sigmoid(Var a) {
  return unary(a, Op::sigmoid, [](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

Var relu(Var a) {
  return unary(a, Op::relu, [](double v) { return v > 0.0 ? v : 0.0; });
}

Var softmax_row(Var a) {
  Tape& t = OpBuilder::tape_of(a);
  const Matrix& in = a.value();
  if (in.empty()) fail(ErrorKind::dimension, "softmax_row: empty input " + in.shape_str());
  Matrix out(in.rows(), in.cols());
  for (std::size_t r = 0; r < in.rows(); ++r) {
    double hi = in(r, 0);
    for (std::size_t j = 1; j < in.cols(); ++j) hi = std::max(hi, in(r, j));
    double total = 0.0;
    for (std::size_t j = 0; j < in.cols(); ++j) {
      out(r, j) = std::exp(in(r, j) - hi);
      total += out(r, j);
    }
    for (std::size_t j = 0; j < in.cols(); ++j) out(r, j) /= total;
  }
  return OpBuilder::emit(t, Op::softmax_row, std::move(out), {a.id});
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorKind::dimension, "concat_rows: no inputs");
  Tape& t = OpBuilder::tape_of(parts[0]);
  const std::size_t cols = parts[0].value().cols();
  std::size_t rows = 0;
  std::vector<std::uint32_t> parents;
  for (const Var& p : parts) {
    OpBuilder::same_tape(parts[0], p);
    if (p.value().cols() != cols) {
      fail(ErrorKind::dimension, "concat_rows: " + p.value().shape_str() + " has " +
                                     std::to_string(p.value().cols()) + " columns, expected " +
                                     std::to_string(cols));
    }
    rows += p.value().rows();
    parents.push_back(p.id);
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    std::copy(v.data().begin(), v.data().end(), out.data().begin() + offset * cols);
    offset += v.rows();
  }
  return OpBuilder::emit(t, Op::concat_rows, std::move(out), std::move(parents));
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorKind::dimension, "concat_cols: no inputs");
  Tape& t = OpBuilder::tape_of(parts[0]);
  const std::size_t rows = parts[0].value().rows();
  std::size_t cols = 0;
  std::vector<std::uint32_t> parents;
  for (const Var& p : parts) {
    OpBuilder::same_tape(parts[0], p);
    if (p.value().rows() != rows) {
      fail(ErrorKind::dimension, "concat_cols: " + p.value().shape_str() + " has " +
                                     std::to_string(p.value().rows()) + " rows, expected " +
                                     std::to_string(rows));
    }
    cols += p.value().cols();
    parents.push_back(p.id);
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, offset + j) = v(i, j);
    offset += v.cols();
  }
  return OpBuilder::emit(t, Op::concat_cols, std::move(out), std::move(parents));
}

Var transpose(Var a) {
  Tape& t = OpBuilder::tape_of(a);
  return OpBuilder::emit(t, Op::transpose, a.value().transposed(), {a.id});
}

Var sum(Var a) {
  Tape& t = OpBuilder::tape_of(a);
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return OpBuilder::emit(t, Op::sum, Matrix(1, 1, total), {a.id});
}

Var mean_rows(Var a) {
  Tape& t = OpBuilder::tape_of(a);
  const Matrix& in = a.value();
  if (in.rows() == 0) fail(ErrorKind::dimension, "mean_rows: no rows in " + in.shape_str());
  Matrix out(1, in.cols());
  for (std::size_t i = 0; i < in.rows(); ++i)
    for (std::size_t j = 0; j < in.cols(); ++j) out[j] += in(i, j);
  for (auto& v : out.data()) v /= static_cast<double>(in.rows());
  return OpBuilder::emit(t, Op::mean_rows, std::move(out), {a.id});
}

Var max_rows(Var a) {
  Tape& t = OpBuilder::tape_of(a);
  const Matrix& in = a.value();
  if (in.rows() == 0) fail(ErrorKind::dimension, "max_rows: no rows in " + in.shape_str());
  Matrix out(1, in.cols());
  for (std::size_t j = 0; j < in.cols(); ++j) {
    double best = in(0, j);
    for (std::size_t i = 1; i < in.rows(); ++i) best = std::max(best, in(i, j));
    out[j] = best;
  }
  return OpBuilder::emit(t, Op::max_rows, std::move(out), {a.id});
}

Var dropout(Var a, Matrix mask) {
  Tape& t = OpBuilder::tape_of(a);
  require_same_shape(a.value(), mask, "dropout");
  Tape::Node n;
  n.op = Op::dropout;
  n.value = a.value();
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= mask[i];
  n.parents = {a.id};
  n.aux = std::move(mask);
  return OpBuilder::emit(t, std::move(n));
}

Var weighted_xent(Var scores, std::span<const int> labels, double positive_ratio) {
  Tape& t = OpBuilder::tape_of(scores);
  const Matrix& s = scores.value();
  if (!(positive_ratio > 0.0 && positive_ratio < 1.0)) {
    fail(ErrorKind::config, "weighted_xent: positive ratio x=" + std::to_string(positive_ratio) +
                                " must lie in (0,1)");
  }
  if (s.cols() != 2 || s.rows() == 0 || s.rows() != labels.size()) {
    fail(ErrorKind::dimension, "weighted_xent: scores " + s.shape_str() + " vs " +
                                   std::to_string(labels.size()) + " labels");
  }
  Tape::Node n;
  n.op = Op::weighted_xent;
  n.aux = Matrix(s.rows(), 3);
  double total = 0.0;
  const double log_floor = std::log(kProbFloor);
  for (std::size_t r = 0; r < s.rows(); ++r) {
    if (labels[r] != 0 && labels[r] != 1) fail(ErrorKind::contract, "weighted_xent: label not in {0,1}");
    const double hi = std::max(s(r, 0), s(r, 1));
    const double lse = hi + std::log(std::exp(s(r, 0) - hi) + std::exp(s(r, 1) - hi));
    const double logp_event = std::max(s(r, 0) - lse, log_floor);
    const double logp_none = std::max(s(r, 1) - lse, log_floor);
    n.aux(r, 0) = labels[r];
    n.aux(r, 1) = std::exp(s(r, 0) - lse);
    n.aux(r, 2) = std::exp(s(r, 1) - lse);
    total -= labels[r] == 1 ? (1.0 - positive_ratio) * logp_event : positive_ratio * logp_none;
  }
  n.value = Matrix(1, 1, total / static_cast<double>(s.rows()));
  n.parents = {scores.id};
  n.scalar = positive_ratio;
  return OpBuilder::emit(t, std::move(n));
}

}  // namespace dyged::ad
