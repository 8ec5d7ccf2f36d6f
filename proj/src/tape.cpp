#include "modlab/tape.hpp"

#include "modlab/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace modlab::autodiff {

namespace {
const double kGeluC = std::sqrt(2.0 / std::numbers::pi);
constexpr double kGeluK = 0.044715;

void require_shape(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) {
    fail_usage(std::string("tape: shape mismatch in ") + op + " (" + std::to_string(a.rows()) + "x" +
               std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
               ")");
  }
}
}  // namespace

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluK * x * x * x)));
}

double gelu_derivative(double x) {
  const double inner = kGeluC * (x + kGeluK * x * x * x);
  const double t = std::tanh(inner);
  const double dinner = kGeluC * (1.0 + 3.0 * kGeluK * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner;
}

std::size_t Tape::checked(NodeId id) const {
  if (id.index < 0 || static_cast<std::size_t>(id.index) >= nodes_.size()) {
    fail_usage("tape: invalid node id " + std::to_string(id.index));
  }
  return static_cast<std::size_t>(id.index);
}

NodeId Tape::push(Node node) {
  if (node.op != Op::constant && node.op != Op::variable) {
    node.needs_grad = false;
    for (int in : node.inputs) node.needs_grad = node.needs_grad || nodes_[static_cast<std::size_t>(in)].needs_grad;
    evaluate(node);
  }
  nodes_.push_back(std::move(node));
  return NodeId{static_cast<int>(nodes_.size()) - 1};
}

NodeId Tape::constant(Matrix value) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::variable(Matrix value) {
  Node n;
  n.op = Op::variable;
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  require_shape(value(a).cols() == value(b).rows(), "matmul", value(a), value(b));
  Node n;
  n.op = Op::matmul;
  n.inputs = {a.index, b.index};
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  require_shape(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "add", value(a),
                value(b));
  Node n;
  n.op = Op::add;
  n.inputs = {a.index, b.index};
  return push(std::move(n));
}

NodeId Tape::add_row_broadcast(NodeId a, NodeId row) {
  require_shape(value(row).rows() == 1 && value(row).cols() == value(a).cols(), "add_row_broadcast", value(a),
                value(row));
  Node n;
  n.op = Op::add_row_broadcast;
  n.inputs = {a.index, row.index};
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double factor) {
  Node n;
  n.op = Op::scale;
  n.inputs = {a.index};
  n.factor = factor;
  return push(std::move(n));
}

NodeId Tape::relu(NodeId a) {
  Node n;
  n.op = Op::relu;
  n.inputs = {a.index};
  return push(std::move(n));
}

NodeId Tape::gelu(NodeId a) {
  Node n;
  n.op = Op::gelu;
  n.inputs = {a.index};
  return push(std::move(n));
}

NodeId Tape::softmax_rows(NodeId a) {
  Node n;
  n.op = Op::softmax_rows;
  n.inputs = {a.index};
  return push(std::move(n));
}

NodeId Tape::concat_cols(std::span<const NodeId> parts) {
  if (parts.empty()) fail_usage("tape: concat_cols of nothing");
  Node n;
  n.op = Op::concat_cols;
  const Index rows = value(parts.front()).rows();
  for (NodeId part : parts) {
    require_shape(value(part).rows() == rows, "concat_cols", value(parts.front()), value(part));
    n.inputs.push_back(part.index);
  }
  return push(std::move(n));
}

NodeId Tape::slice_cols(NodeId a, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > value(a).cols()) fail_usage("tape: slice_cols out of range");
  Node n;
  n.op = Op::slice_cols;
  n.inputs = {a.index};
  n.begin = begin;
  n.count = count;
  return push(std::move(n));
}

NodeId Tape::slice_rows(NodeId a, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > value(a).rows()) fail_usage("tape: slice_rows out of range");
  Node n;
  n.op = Op::slice_rows;
  n.inputs = {a.index};
  n.begin = begin;
  n.count = count;
  return push(std::move(n));
}

NodeId Tape::gather_rows(NodeId table, std::vector<Index> rows) {
  const Index limit = value(table).rows();
  for (Index r : rows) {
    if (r < 0 || r >= limit) fail_usage("tape: gather row " + std::to_string(r) + " out of range");
  }
  Node n;
  n.op = Op::gather_rows;
  n.inputs = {table.index};
  n.rows = std::move(rows);
  return push(std::move(n));
}

NodeId Tape::hadamard(NodeId a, NodeId b) {
  require_shape(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "hadamard",
                value(a), value(b));
  Node n;
  n.op = Op::hadamard;
  n.inputs = {a.index, b.index};
  return push(std::move(n));
}

NodeId Tape::row_sum(NodeId a) {
  Node n;
  n.op = Op::row_sum;
  n.inputs = {a.index};
  return push(std::move(n));
}

NodeId Tape::scale_rows(NodeId column, NodeId a) {
  require_shape(value(column).cols() == 1 && value(column).rows() == value(a).rows(), "scale_rows",
                value(column), value(a));
  Node n;
  n.op = Op::scale_rows;
  n.inputs = {column.index, a.index};
  return push(std::move(n));
}

NodeId Tape::cross_entropy_mean(NodeId logits, std::vector<int> targets) {
  const Matrix& z = value(logits);
  if (static_cast<Index>(targets.size()) != z.rows() || targets.empty()) {
    fail_usage("tape: cross_entropy_mean needs one target per logit row");
  }
  for (int t : targets) {
    if (t < 0 || t >= z.cols()) fail_usage("tape: cross_entropy target out of range");
  }
  Node n;
  n.op = Op::cross_entropy_mean;
  n.inputs = {logits.index};
  n.targets = std::move(targets);
  return push(std::move(n));
}

void Tape::evaluate(Node& node) const {
  auto in = [&](std::size_t k) -> const Matrix& {
    return nodes_[static_cast<std::size_t>(node.inputs[k])].value;
  };
  switch (node.op) {
    case Op::constant:
    case Op::variable:
      return;
    case Op::matmul:
      node.value.noalias() = in(0) * in(1);
      return;
    case Op::add:
      node.value = in(0) + in(1);
      return;
    case Op::add_row_broadcast:
      node.value = in(0).rowwise() + in(1).row(0);
      return;
    case Op::scale:
      node.value = node.factor * in(0);
      return;
    case Op::relu:
      node.value = in(0).cwiseMax(0.0);
      return;
    case Op::gelu:
      node.value = in(0).unaryExpr([](double x) { return autodiff::gelu(x); });
      return;
    case Op::softmax_rows: {
      const Matrix& x = in(0);
      node.value.resize(x.rows(), x.cols());
      for (Index r = 0; r < x.rows(); ++r) {
        const double m = x.row(r).maxCoeff();
        node.value.row(r) = (x.row(r).array() - m).exp().matrix();
        node.value.row(r) /= node.value.row(r).sum();
      }
      return;
    }
    case Op::concat_cols: {
      Index cols = 0;
      node.splits.clear();
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        node.splits.push_back(cols);
        cols += in(k).cols();
      }
      node.value.resize(in(0).rows(), cols);
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        node.value.middleCols(node.splits[k], in(k).cols()) = in(k);
      }
      return;
    }
    case Op::slice_cols:
      node.value = in(0).middleCols(node.begin, node.count);
      return;
    case Op::slice_rows:
      node.value = in(0).middleRows(node.begin, node.count);
      return;
    case Op::gather_rows: {
      const Matrix& table = in(0);
      node.value.resize(static_cast<Index>(node.rows.size()), table.cols());
      for (std::size_t r = 0; r < node.rows.size(); ++r) node.value.row(static_cast<Index>(r)) = table.row(node.rows[r]);
      return;
    }
    case Op::hadamard:
      node.value = in(0).cwiseProduct(in(1));
      return;
    case Op::row_sum:
      node.value = in(0).rowwise().sum();
      return;
    case Op::scale_rows:
      node.value = in(1).array().colwise() * in(0).col(0).array();
      return;
    case Op::cross_entropy_mean: {
      const Matrix& z = in(0);
      double total = 0.0;
      for (Index r = 0; r < z.rows(); ++r) {
        const double m = z.row(r).maxCoeff();
        const double lse = m + std::log((z.row(r).array() - m).exp().sum());
        total += lse - z(r, node.targets[static_cast<std::size_t>(r)]);
      }
      node.value = Matrix::Constant(1, 1, total / static_cast<double>(z.rows()));
      return;
    }
  }
}

void Tape::set_value(NodeId leaf, Matrix value) {
  Node& n = nodes_[checked(leaf)];
  if (n.op != Op::constant && n.op != Op::variable) fail_usage("tape: set_value on a non-leaf node");
  if (value.rows() != n.value.rows() || value.cols() != n.value.cols()) fail_usage("tape: set_value shape change");
  n.value = std::move(value);
}

void Tape::replay() {
  for (Node& n : nodes_) evaluate(n);
}

void Tape::clear_adjoints() {
  for (Node& n : nodes_) n.adjoint.resize(0, 0);
}

void Tape::accumulate(int index, const Matrix& delta) {
  Node& n = nodes_[static_cast<std::size_t>(index)];
  if (!n.needs_grad) return;
  if (n.adjoint.size() == 0) {
    n.adjoint = delta;
  } else {
    n.adjoint += delta;
  }
}

void Tape::backward(NodeId out, const Matrix& seed) {
  const std::size_t top = checked(out);
  {
    const Matrix& v = nodes_[top].value;
    if (seed.rows() != v.rows() || seed.cols() != v.cols()) fail_usage("tape: backward seed shape mismatch");
  }
  // Intermediate adjoints restart from zero; leaves keep accumulating.
  for (std::size_t i = 0; i <= top; ++i) {
    if (nodes_[i].op != Op::variable) nodes_[i].adjoint.resize(0, 0);
  }
  accumulate(out.index, seed);

  for (std::size_t i = top + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.adjoint.size() == 0) continue;
    const Matrix& g = n.adjoint;
    auto in = [&](std::size_t k) -> const Matrix& {
      return nodes_[static_cast<std::size_t>(n.inputs[k])].value;
    };
    auto wants = [&](std::size_t k) { return nodes_[static_cast<std::size_t>(n.inputs[k])].needs_grad; };

    switch (n.op) {
      case Op::constant:
      case Op::variable:
        break;
      case Op::matmul:
        if (wants(0)) accumulate(n.inputs[0], g * in(1).transpose());
        if (wants(1)) accumulate(n.inputs[1], in(0).transpose() * g);
        break;
      case Op::add:
        accumulate(n.inputs[0], g);
        accumulate(n.inputs[1], g);
        break;
      case Op::add_row_broadcast:
        accumulate(n.inputs[0], g);
        if (wants(1)) accumulate(n.inputs[1], g.colwise().sum());
        break;
      case Op::scale:
        accumulate(n.inputs[0], n.factor * g);
        break;
      case Op::relu:
        // Subgradient 0 at the kink.
        accumulate(n.inputs[0], (in(0).array() > 0.0).select(g, 0.0));
        break;
      case Op::gelu:
        accumulate(n.inputs[0], g.cwiseProduct(in(0).unaryExpr([](double x) { return gelu_derivative(x); })));
        break;
      case Op::softmax_rows: {
        const Matrix& s = n.value;
        const Vector dots = (g.cwiseProduct(s)).rowwise().sum();
        accumulate(n.inputs[0], s.cwiseProduct(g - dots.replicate(1, g.cols())));
        break;
      }
      case Op::concat_cols:
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          if (wants(k)) accumulate(n.inputs[k], g.middleCols(n.splits[k], in(k).cols()));
        }
        break;
      case Op::slice_cols: {
        Matrix full = Matrix::Zero(in(0).rows(), in(0).cols());
        full.middleCols(n.begin, n.count) = g;
        accumulate(n.inputs[0], full);
        break;
      }
      case Op::slice_rows: {
        Matrix full = Matrix::Zero(in(0).rows(), in(0).cols());
        full.middleRows(n.begin, n.count) = g;
        accumulate(n.inputs[0], full);
        break;
      }
      case Op::gather_rows: {
        Matrix full = Matrix::Zero(in(0).rows(), in(0).cols());
        for (std::size_t r = 0; r < n.rows.size(); ++r) full.row(n.rows[r]) += g.row(static_cast<Index>(r));
        accumulate(n.inputs[0], full);
        break;
      }
      case Op::hadamard:
        if (wants(0)) accumulate(n.inputs[0], g.cwiseProduct(in(1)));
        if (wants(1)) accumulate(n.inputs[1], g.cwiseProduct(in(0)));
        break;
      case Op::row_sum:
        accumulate(n.inputs[0], g.replicate(1, in(0).cols()));
        break;
      case Op::scale_rows:
        if (wants(0)) accumulate(n.inputs[0], g.cwiseProduct(in(1)).rowwise().sum());
        if (wants(1)) accumulate(n.inputs[1], g.array().colwise() * in(0).col(0).array());
        break;
      case Op::cross_entropy_mean: {
        const Matrix& z = in(0);
        Matrix d(z.rows(), z.cols());
        const double w = g(0, 0) / static_cast<double>(z.rows());
        for (Index r = 0; r < z.rows(); ++r) {
          const double m = z.row(r).maxCoeff();
          d.row(r) = (z.row(r).array() - m).exp().matrix();
          d.row(r) /= d.row(r).sum();
          d(r, n.targets[static_cast<std::size_t>(r)]) -= 1.0;
        }
        accumulate(n.inputs[0], w * d);
        break;
      }
    }
  }
}

std::vector<bool> Tape::kink_signature() const {
  std::vector<bool> signs;
  for (const Node& n : nodes_) {
    if (n.op != Op::relu) continue;
    const Matrix& x = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
    for (Index i = 0; i < x.size(); ++i) signs.push_back(x.data()[i] > 0.0);
  }
  return signs;
}

}  // namespace modlab::autodiff
