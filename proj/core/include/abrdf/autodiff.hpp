#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "abrdf/errors.hpp"

namespace abrdf::ad {

using Mat = Eigen::MatrixXd;

/// Handle into a Tape. Cheap to copy; owns nothing.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Record of a forward computation over matrices, replayed in reverse to
/// accumulate gradients. Values are computed eagerly; each differentiable
/// node stores a closure that scatters its output gradient to its inputs.
///
/// A tape is single-owner and supports exactly one reverse sweep.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  // -- leaves ---------------------------------------------------------------

  /// Non-differentiable input.
  Var constant(Mat value);
  Var scalar(double v) { return constant(Mat::Constant(1, 1, v)); }
  /// Differentiable leaf (gradients accumulate here).
  Var leaf(Mat value);

  const Mat& value(Var v) const { return node(v.id).value; }
  /// Gradient of the swept loss w.r.t. node `v`; zero matrix if untouched.
  Mat gradient(Var v) const;

  // -- arithmetic -----------------------------------------------------------

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);                     // same shape
  Var add_rowvec(Var a, Var bias);           // bias [1 x C] broadcast over rows
  Var sub(Var a, Var b);
  Var affine(Var a, double scale, double shift);
  Var mul(Var a, Var b);                     // elementwise, same shape
  Var mul_colvec(Var a, Var s);              // s [P x 1] broadcast over columns
  Var div_colvec(Var a, Var s);              // s [P x 1], nonzero
  Var mul_const(Var a, Mat m);               // elementwise by a constant

  // -- elementwise nonlinearities --------------------------------------------

  Var relu(Var a);       // subgradient at 0 is 0
  Var softplus(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);
  Var sqrt(Var a);
  Var pow_const(Var a, double p);
  /// arccos of input clamped to [-1+eps, 1-eps]; zero gradient in the clamp.
  Var acos_clamped(Var a, double eps = 1e-9);
  /// Elementwise minimum of two same-shape vars; ties take `a`'s gradient.
  Var min(Var a, Var b);

  // -- reductions and shape ops ----------------------------------------------

  Var rowwise_sum(Var a);                    // [P x C] -> [P x 1]
  Var sum(Var a);                            // -> [1 x 1]
  /// [B*N x C] -> [B x C], summing each contiguous block of N rows.
  Var block_sum(Var a, int blocks);
  /// Per block of N rows: out_i = sum_{j<i} in_j (column vector input).
  Var exclusive_cumsum_blocks(Var a, int blocks);
  Var concat_cols(const std::vector<Var>& parts);
  /// Gather rows; backward scatter-adds.
  Var select_rows(Var a, std::vector<int> rows);

  // -- reverse sweep ----------------------------------------------------------

  /// Reverse sweep from scalar `loss`, seeding d(loss)/d(loss) = loss_seed.
  /// A tape may be swept once; reuse raises UsageError.
  void backward(Var loss, double loss_seed = 1.0);

 private:
  struct Node {
    Mat value;
    Mat grad;  // empty until touched
    std::function<void(Tape&, const Mat&)> back;
    bool needs_grad = false;
  };

  Node& node(int id) {
    if (id < 0 || id >= static_cast<int>(nodes_.size()))
      throw UsageError("invalid tape var id " + std::to_string(id));
    return nodes_[id];
  }
  const Node& node(int id) const {
    return const_cast<Tape*>(this)->node(id);
  }

  bool wants_grad(Var v) const { return grad_enabled_ && node(v.id).needs_grad; }

  Var push(Mat value, bool needs_grad, std::function<void(Tape&, const Mat&)> back);

  void accumulate(int id, const Mat& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
  bool consumed_ = false;
};

}  // namespace abrdf::ad
