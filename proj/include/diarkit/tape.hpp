#pragma once

// Reverse-mode differentiation over matrix-valued nodes.
//
// Every op appends a node holding its value and a closure that pushes the
// node's gradient back to its inputs. Nodes are only differentiated when at
// least one input requires a gradient.

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

namespace diarkit::nn {

using Matrix = Eigen::MatrixXd;

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape *tape, int id) : tape_(tape), id_(id) {}

  const Matrix &value() const;
  long rows() const { return value().rows(); }
  long cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  int id() const { return id_; }
  Tape *tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape *tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  // Pushes `out_grad` of node `self` to its inputs via Tape::accumulate.
  using Backward = std::function<void(Tape &, int self)>;

  Var constant(Matrix value);
  Var variable(Matrix value);
  Var push(Matrix value, std::span<const Var> inputs, Backward backward);

  // Seeds d(out)/d(out) = 1 on a 1x1 node and runs the reverse sweep.
  void backward(const Var &out);

  const Matrix &value(int id) const { return nodes_[id].value; }
  // Gradient of a node; an all-zero matrix when nothing reached it.
  Matrix grad(const Var &v) const;
  const Matrix &out_grad(int id) const { return nodes_[id].grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  void accumulate(int id, const Matrix &g);
  template <typename Expr>
  void accumulate_expr(int id, const Expr &g) {
    auto &n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

inline const Matrix &Var::value() const { return tape_->value(id_); }

// --- elementwise and linear algebra ---------------------------------------
Var matmul(const Var &a, const Var &b);
Var transpose(const Var &a);
Var add(const Var &a, const Var &b);
Var sub(const Var &a, const Var &b);
Var mul(const Var &a, const Var &b);
Var scale(const Var &a, double c);
// a [n x m] + row [1 x m] broadcast over rows.
Var add_row(const Var &a, const Var &row);
Var tanh(const Var &a);
Var sigmoid(const Var &a);
Var relu(const Var &a);
Var square(const Var &a);
Var sum(const Var &a);
Var mean(const Var &a);

// --- slicing and stacking --------------------------------------------------
Var rows(const Var &a, long start, long n);
Var cols(const Var &a, long start, long n);
Var vcat(std::span<const Var> parts);
Var hcat(std::span<const Var> parts);

// --- heads and pooling -----------------------------------------------------
Var softmax(const Var &logits);
// Mean over rows of -log softmax(logits)[label], each row weighted by
// class_weights[label] (all ones when empty) and normalised by their sum.
Var softmax_cross_entropy(const Var &logits, std::span<const int> labels,
                          std::span<const double> class_weights = {});
Var l2_normalize_rows(const Var &a);
// Input [(T*B) x H], row t*B + b. Output [B x 2H] = per-sequence mean and
// standard deviation over time.
Var time_stats(const Var &a, long steps, long batch);

// --- metric-learning building blocks (inputs are [n x n] distances) --------
// Mean over all (a, p, n) with label[a] == label[p], a != p,
// label[n] != label[a] of max(0, d(a,p) - d(a,n) + margin).
Var triplet_hinge(const Var &dist, std::span<const int> labels,
                  double margin);
// Mean over pairs i < j of y d^2 + (1 - y) max(0, margin - d)^2.
Var contrastive_pairs(const Var &dist, std::span<const int> labels,
                      double margin);
// Cosines [n x C] -> logits s*cos(theta + m) on the target column,
// s*cos(theta) elsewhere.
Var angular_margin_logits(const Var &cosines, std::span<const int> labels,
                          double margin, double scale);

}  // namespace diarkit::nn
