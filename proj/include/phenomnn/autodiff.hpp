#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "phenomnn/linalg.hpp"

namespace phenomnn {

/// Accumulated gradient per trainable parameter slot.
struct GradStore {
  std::vector<DenseMat> grads;

  const DenseMat& operator[](std::size_t slot) const { return grads.at(slot); }
  std::size_t size() const { return grads.size(); }
  bool operator==(const GradStore&) const = default;
};

/// Reverse-mode record of one forward pass over the primitive set used by
/// the unrolled layers. Nodes are appended in evaluation order, so the
/// node list is already topologically sorted; backward walks it in reverse.
///
/// Sparse and diagonal operands are graph constants held by pointer; they
/// must outlive the tape.
class Tape {
public:
  enum class Op {
    constant,
    parameter,
    matmul,
    transpose,
    add,
    sub,
    scale,
    add_row,
    spmm,
    row_scale,
    relu,
    mask,
    softmax_cross_entropy,
  };

  using Var = std::size_t;

  explicit Tape(std::size_t parameter_slots = 0) : slot_shapes_(parameter_slots) {}

  Var constant(DenseMat value) { return push(Op::constant, {}, std::move(value)); }

  /// Leaf bound to trainable slot `slot`; its adjoint lands in GradStore[slot].
  Var parameter(std::size_t slot, const DenseMat& value) {
    if (slot >= slot_shapes_.size()) slot_shapes_.resize(slot + 1);
    slot_shapes_[slot] = {value.rows, value.cols};
    Var v = push(Op::parameter, {}, value);
    nodes_[v].slot = slot;
    return v;
  }

  Var matmul(Var a, Var b) { return push(Op::matmul, {a, b}, phenomnn::matmul(value(a), value(b))); }
  Var transpose(Var a) { return push(Op::transpose, {a}, phenomnn::transpose(value(a))); }
  Var add(Var a, Var b) { return push(Op::add, {a, b}, phenomnn::add(value(a), value(b))); }
  Var sub(Var a, Var b) { return push(Op::sub, {a, b}, phenomnn::sub(value(a), value(b))); }

  Var scale(Var a, double s) {
    Var v = push(Op::scale, {a}, phenomnn::scale(value(a), s));
    nodes_[v].scalar = s;
    return v;
  }

  /// a + 1 * bias, with bias a 1 x cols row broadcast over rows.
  Var add_row(Var a, Var bias) {
    const auto& av = value(a);
    const auto& bv = value(bias);
    detail::require_dims(bv.rows == 1 && bv.cols == av.cols, "add_row", av.rows, av.cols, bv.rows, bv.cols);
    DenseMat out = av;
    for (std::size_t i = 0; i < out.rows; ++i)
      for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += bv(0, j);
    return push(Op::add_row, {a, bias}, std::move(out));
  }

  Var spmm(const SparseMat& s, Var a) {
    Var v = push(Op::spmm, {a}, phenomnn::spmm(s, value(a)));
    nodes_[v].sparse = &s;
    return v;
  }

  Var row_scale(const DiagMat& d, Var a) {
    Var v = push(Op::row_scale, {a}, phenomnn::row_scale(d, value(a)));
    nodes_[v].diag = &d;
    return v;
  }

  Var relu(Var a) { return push(Op::relu, {a}, phenomnn::relu(value(a))); }

  /// Elementwise product with a constant mask (dropout).
  Var mask(Var a, DenseMat m) {
    Var v = push(Op::mask, {a}, hadamard(value(a), m));
    nodes_[v].cache = std::move(m);
    return v;
  }

  /// Mean over `rows` of -log softmax(logits_i)[labels_i]; returns a 1x1 node.
  Var softmax_cross_entropy(Var logits, const std::vector<int>& labels, const std::vector<std::size_t>& rows) {
    const auto& z = value(logits);
    if (rows.empty()) throw Error("softmax_cross_entropy: no labeled rows");
    DenseMat probs(z.rows, z.cols);
    double loss = 0.0;
    for (auto i : rows) {
      const int label = labels.at(i);
      if (label < 0 || static_cast<std::size_t>(label) >= z.cols)
        throw Error("softmax_cross_entropy: invalid label at row " + std::to_string(i));
      double mx = -std::numeric_limits<double>::infinity();
      for (double v : z.row(i)) mx = std::max(mx, v);
      double sum = 0.0;
      for (std::size_t j = 0; j < z.cols; ++j) sum += std::exp(z(i, j) - mx);
      for (std::size_t j = 0; j < z.cols; ++j) probs(i, j) = std::exp(z(i, j) - mx) / sum;
      loss += -(z(i, static_cast<std::size_t>(label)) - mx - std::log(sum));
    }
    loss /= static_cast<double>(rows.size());
    Var v = push(Op::softmax_cross_entropy, {logits}, DenseMat(1, 1, loss));
    nodes_[v].cache = std::move(probs);
    nodes_[v].labels = labels;
    nodes_[v].rows = rows;
    return v;
  }

  const DenseMat& value(Var v) const { return nodes_.at(v).value; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t parameter_slots() const { return slot_shapes_.size(); }

  /// Multiplies the adjoint of every node of kind `op` by `factor`. Exists
  /// so tests can confirm the gradient checker catches a broken rule.
  void corrupt_adjoint_for_testing(Op op, double factor) {
    corrupt_op_ = op;
    corrupt_factor_ = factor;
  }

  /// Exact gradients of the scalar `loss` w.r.t. every parameter slot.
  /// Slots the loss does not depend on get zero gradients.
  GradStore backward(Var loss) const {
    if (nodes_.empty() || loss >= nodes_.size())
      throw std::logic_error("Tape::backward: loss node not recorded on this tape");
    const auto& lv = nodes_[loss].value;
    if (lv.rows != 1 || lv.cols != 1) throw std::logic_error("Tape::backward: loss must be scalar");

    std::vector<std::optional<DenseMat>> adj(nodes_.size());
    adj[loss] = DenseMat(1, 1, 1.0);
    GradStore store;
    for (const auto& [r, c] : slot_shapes_) store.grads.emplace_back(r, c);

    auto needs = [&](Var v) { return nodes_[v].needs_grad; };
    auto accumulate = [&](Var target, DenseMat contribution) {
      if (!adj[target]) {
        adj[target] = std::move(contribution);
      } else {
        auto& a = *adj[target];
        for (std::size_t k = 0; k < a.data.size(); ++k) a.data[k] += contribution.data[k];
      }
    };

    for (std::size_t idx = loss + 1; idx-- > 0;) {
      if (!adj[idx]) continue;
      const Node& node = nodes_[idx];
      DenseMat g = std::move(*adj[idx]);
      adj[idx].reset();
      if (corrupt_op_ && *corrupt_op_ == node.op) g = phenomnn::scale(g, corrupt_factor_);
      const Var a = node.inputs[0];
      const Var b = node.inputs[1];
      switch (node.op) {
        case Op::constant:
          break;
        case Op::parameter: {
          auto& dst = store.grads[node.slot];
          for (std::size_t k = 0; k < dst.data.size(); ++k) dst.data[k] += g.data[k];
          break;
        }
        case Op::matmul:
          if (needs(a)) accumulate(a, phenomnn::matmul(g, phenomnn::transpose(value(b))));
          if (needs(b)) accumulate(b, phenomnn::matmul(phenomnn::transpose(value(a)), g));
          break;
        case Op::transpose:
          if (needs(a)) accumulate(a, phenomnn::transpose(g));
          break;
        case Op::add:
          if (needs(a)) accumulate(a, g);
          if (needs(b)) accumulate(b, std::move(g));
          break;
        case Op::sub:
          if (needs(a)) accumulate(a, g);
          if (needs(b)) accumulate(b, phenomnn::scale(g, -1.0));
          break;
        case Op::scale:
          if (needs(a)) accumulate(a, phenomnn::scale(g, node.scalar));
          break;
        case Op::add_row: {
          DenseMat db(1, g.cols);
          for (std::size_t i = 0; i < g.rows; ++i)
            for (std::size_t j = 0; j < g.cols; ++j) db(0, j) += g(i, j);
          if (needs(a)) accumulate(a, std::move(g));
          if (needs(b)) accumulate(b, std::move(db));
          break;
        }
        case Op::spmm:
          if (needs(a)) accumulate(a, spmm_transposed(*node.sparse, g));
          break;
        case Op::row_scale:
          if (needs(a)) accumulate(a, phenomnn::row_scale(*node.diag, g));
          break;
        case Op::relu: {
          if (!needs(a)) break;
          // Subgradient 0 at exactly 0.
          const auto& in = value(a);
          for (std::size_t k = 0; k < g.data.size(); ++k)
            if (!(in.data[k] > 0.0)) g.data[k] = 0.0;
          accumulate(a, std::move(g));
          break;
        }
        case Op::mask:
          if (needs(a)) accumulate(a, hadamard(g, node.cache));
          break;
        case Op::softmax_cross_entropy: {
          if (!needs(a)) break;
          const auto& probs = node.cache;
          DenseMat dz(probs.rows, probs.cols);
          const double w = g(0, 0) / static_cast<double>(node.rows.size());
          for (auto i : node.rows) {
            for (std::size_t j = 0; j < probs.cols; ++j) dz(i, j) = w * probs(i, j);
            dz(i, static_cast<std::size_t>(node.labels[i])) -= w;
          }
          accumulate(a, std::move(dz));
          break;
        }
      }
    }
    return store;
  }

private:
  static constexpr Var kNone = std::numeric_limits<Var>::max();

  struct Node {
    Op op;
    std::array<Var, 2> inputs{kNone, kNone};
    DenseMat value;
    std::size_t slot = 0;
    double scalar = 0.0;
    const SparseMat* sparse = nullptr;
    const DiagMat* diag = nullptr;
    bool needs_grad = false;
    DenseMat cache;
    std::vector<int> labels;
    std::vector<std::size_t> rows;
  };

  Var push(Op op, std::initializer_list<Var> inputs, DenseMat value) {
    Node node;
    node.op = op;
    std::size_t i = 0;
    for (auto in : inputs) {
      if (in >= nodes_.size()) throw std::logic_error("Tape: input node not recorded");
      node.inputs[i++] = in;
      node.needs_grad = node.needs_grad || nodes_[in].needs_grad;
    }
    if (op == Op::parameter) node.needs_grad = true;
    node.value = std::move(value);
    nodes_.push_back(std::move(node));
    return nodes_.size() - 1;
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<std::size_t, std::size_t>> slot_shapes_;
  std::optional<Op> corrupt_op_;
  double corrupt_factor_ = 1.0;
};

}  // namespace phenomnn
