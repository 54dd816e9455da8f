#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dyged/matrix.hpp"

// Reverse-mode differentiation over dense matrices. Each op appends one node
// to a Tape; nodes refer to parents by index, so the tape is an explicit,
// acyclic, topologically ordered op list that can be dumped and inspected.
namespace dyged::ad {

enum class Op : std::uint8_t {
  leaf,
  matmul,
  spmm,
  add,
  sub,
  mul,
  scale,
  add_row,
  tanh,
  sigmoid,
  relu,
  softmax_row,
  concat_rows,
  concat_cols,
  transpose,
  sum,
  mean_rows,
  max_rows,
  dropout,
  weighted_xent,
};

std::string_view op_name(Op op);

class Tape;

/// Handle to a tape node. Cheap to copy; only valid while its tape lives.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  bool valid() const noexcept { return tape != nullptr; }
  const Matrix& value() const;
  const Matrix& grad() const;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value, std::string label = {});
  /// Leaf that never receives an adjoint; backward skips work feeding only into constants.
  Var constant(Matrix value, std::string label = {});

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }
  Op op(Var v) const { return nodes_.at(v.id).op; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates adjoints to every node.
  /// Nodes that the loss does not depend on end with zero gradients.
  void backward(Var loss);

  /// One line per node: id, op, shape, parents, label.
  std::string dump() const;

  /// Test hook: scales the adjoint of every node of kind `op` by 1.5.
  void corrupt_adjoint(Op op) { corrupted_ = op; }

 struct Node {
    Op op = Op::leaf;
    Matrix value;
    Matrix grad;
    std::vector<std::uint32_t> parents;
    double scalar = 0.0;
    Matrix aux;
    std::shared_ptr<const SparseMatrix> sparse;
    std::string label;
    bool needs_grad = true;
  };

 private:
  Var push(Node node);
  void propagate(const Node& node);

  std::vector<Node> nodes_;
  std::optional<Op> corrupted_;

  friend struct OpBuilder;
};

Var matmul(Var a, Var b);
/// Constant sparse left factor: s·b. No gradient flows into `s`.
Var spmm(std::shared_ptr<const SparseMatrix> s, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// a (r×c) plus a 1×c bias added to every row.
Var add_row(Var a, Var bias);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
/// Row-wise softmax with max subtraction.
Var softmax_row(Var a);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var transpose(Var a);
Var sum(Var a);
/// Column-wise mean, r×c -> 1×c.
Var mean_rows(Var a);
/// Column-wise max, r×c -> 1×c. Ties route the gradient to the first row.
Var max_rows(Var a);
/// Elementwise product with a caller-drawn constant mask.
Var dropout(Var a, Matrix mask);

/// Probability floor applied before the log in weighted_xent.
inline constexpr double kProbFloor = 1e-12;

/// Class-ratio weighted cross-entropy, averaged over the batch.
/// scores: B×2 raw outputs, column 0 = event, column 1 = no event; they are
/// turned into probabilities by a row softmax. labels: length B of {0,1}.
/// Row loss: -[(1-x)·l·log p_event + x·(1-l)·log p_none].
Var weighted_xent(Var scores, std::span<const int> labels, double positive_ratio);

}  // namespace dyged::ad
