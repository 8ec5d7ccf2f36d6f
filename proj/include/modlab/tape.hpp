#pragma once

#include "modlab/numerics.hpp"

#include <span>
#include <vector>

namespace modlab::autodiff {

// Tanh approximation of GeLU; fixed at build time.
inline constexpr bool kGeluTanhApproximation = true;

double gelu(double x);
double gelu_derivative(double x);

struct NodeId {
  int index = -1;
  bool valid() const { return index >= 0; }
  friend bool operator==(NodeId, NodeId) = default;
};

enum class Op {
  constant,
  variable,
  matmul,
  add,
  add_row_broadcast,
  scale,
  relu,
  gelu,
  softmax_rows,
  concat_cols,
  slice_cols,
  slice_rows,
  gather_rows,
  hadamard,
  row_sum,
  scale_rows,
  cross_entropy_mean,
};

// Reverse-mode tape over batched matrices. Nodes are appended in evaluation
// order, so the node list is already topologically sorted. Every value is a
// matrix whose rows are independent batch examples unless the op says
// otherwise (parameters, row broadcasts, the scalar loss).
class Tape {
 public:
  NodeId constant(Matrix value);
  // Leaf that receives an adjoint.
  NodeId variable(Matrix value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  // a (n x m) + row (1 x m) added to every row.
  NodeId add_row_broadcast(NodeId a, NodeId row);
  NodeId scale(NodeId a, double factor);
  NodeId relu(NodeId a);
  NodeId gelu(NodeId a);
  NodeId softmax_rows(NodeId a);
  NodeId concat_cols(std::span<const NodeId> parts);
  NodeId slice_cols(NodeId a, Index begin, Index count);
  NodeId slice_rows(NodeId a, Index begin, Index count);
  NodeId gather_rows(NodeId table, std::vector<Index> rows);
  NodeId hadamard(NodeId a, NodeId b);
  // n x m -> n x 1
  NodeId row_sum(NodeId a);
  // column (n x 1) scales each row of a (n x m).
  NodeId scale_rows(NodeId column, NodeId a);
  // Mean softmax cross-entropy of logit rows against class targets; 1 x 1.
  NodeId cross_entropy_mean(NodeId logits, std::vector<int> targets);

  const Matrix& value(NodeId id) const { return nodes_[checked(id)].value; }
  // Zero-sized until backward() has reached the node.
  const Matrix& adjoint(NodeId id) const { return nodes_[checked(id)].adjoint; }
  Op op(NodeId id) const { return nodes_[checked(id)].op; }
  std::size_t size() const { return nodes_.size(); }

  // Replace a leaf's value; call replay() to propagate.
  void set_value(NodeId leaf, Matrix value);
  // Recompute every non-leaf value from the leaves.
  void replay();

  // Accumulate seed * d(out)/d(leaf) into every variable's adjoint.
  // Intermediate adjoints hold the last pass only.
  void backward(NodeId out, const Matrix& seed);
  void clear_adjoints();

  // Sign pattern of every rectifier input; two evaluations with equal
  // signatures lie on the same linear piece.
  std::vector<bool> kink_signature() const;

 private:
  struct Node {
    Op op = Op::constant;
    std::vector<int> inputs;
    Matrix value;
    Matrix adjoint;
    bool needs_grad = false;
    double factor = 0.0;
    Index begin = 0;
    Index count = 0;
    std::vector<Index> rows;
    std::vector<int> targets;
    std::vector<Index> splits;
  };

  std::size_t checked(NodeId id) const;
  NodeId push(Node node);
  void evaluate(Node& node) const;
  void accumulate(int index, const Matrix& delta);

  std::vector<Node> nodes_;
};

}  // namespace modlab::autodiff
