#include "abrdf/autodiff.hpp"

#include <cmath>

namespace abrdf::ad {

namespace {

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ConfigError(std::string(op) + ": shape mismatch " +
                      std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                      std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

double softplus_scalar(double x) {
  // log(1 + e^x), stable for large |x|
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

}  // namespace

Var Tape::push(Mat value, bool needs_grad, std::function<void(Tape&, const Mat&)> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = grad_enabled_ && needs_grad;
  if (n.needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Mat value) { return push(std::move(value), false, nullptr); }

Var Tape::leaf(Mat value) { return push(std::move(value), true, nullptr); }

Mat Tape::gradient(Var v) const {
  const Node& n = node(v.id);
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::matmul(Var a, Var b) {
  const Mat& av = value(a);
  const Mat& bv = value(b);
  if (av.cols() != bv.rows())
    throw ConfigError("matmul: inner dimensions " + std::to_string(av.cols()) + " vs " +
                      std::to_string(bv.rows()));
  Mat out = av * bv;
  return push(std::move(out), wants_grad(a) || wants_grad(b),
              [a, b](Tape& t, const Mat& g) {
                if (t.wants_grad(a)) t.accumulate(a.id, g * t.value(b).transpose());
                if (t.wants_grad(b)) t.accumulate(b.id, t.value(a).transpose() * g);
              });
}

Var Tape::add(Var a, Var b) {
  check_same_shape(value(a), value(b), "add");
  Mat out = value(a) + value(b);
  return push(std::move(out), wants_grad(a) || wants_grad(b),
              [a, b](Tape& t, const Mat& g) {
                if (t.wants_grad(a)) t.accumulate(a.id, g);
                if (t.wants_grad(b)) t.accumulate(b.id, g);
              });
}

Var Tape::add_rowvec(Var a, Var bias) {
  const Mat& av = value(a);
  const Mat& bv = value(bias);
  if (bv.rows() != 1 || bv.cols() != av.cols())
    throw ConfigError("add_rowvec: bias must be [1 x " + std::to_string(av.cols()) + "]");
  Mat out = av.rowwise() + bv.row(0);
  return push(std::move(out), wants_grad(a) || wants_grad(bias),
              [a, bias](Tape& t, const Mat& g) {
                if (t.wants_grad(a)) t.accumulate(a.id, g);
                if (t.wants_grad(bias)) t.accumulate(bias.id, g.colwise().sum());
              });
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(value(a), value(b), "sub");
  Mat out = value(a) - value(b);
  return push(std::move(out), wants_grad(a) || wants_grad(b),
              [a, b](Tape& t, const Mat& g) {
                if (t.wants_grad(a)) t.accumulate(a.id, g);
                if (t.wants_grad(b)) t.accumulate(b.id, -g);
              });
}

Var Tape::affine(Var a, double scale, double shift) {
  Mat out = (value(a).array() * scale + shift).matrix();
  return push(std::move(out), wants_grad(a),
              [a, scale](Tape& t, const Mat& g) {
                if (t.wants_grad(a)) t.accumulate(a.id, scale * g);
              });
}

Var Tape::mul(Var a, Var b) {
  check_same_shape(value(a), value(b), "mul");
  Mat out = value(a).cwiseProduct(value(b));
  return push(std::move(out), wants_grad(a) || wants_grad(b),
              [a, b](Tape& t, const Mat& g) {
                if (t.wants_grad(a)) t.accumulate(a.id, g.cwiseProduct(t.value(b)));
                if (t.wants_grad(b)) t.accumulate(b.id, g.cwiseProduct(t.value(a)));
              });
}

Var Tape::mul_colvec(Var a, Var s) {
  const Mat& av = value(a);
  const Mat& sv = value(s);
  if (sv.cols() != 1 || sv.rows() != av.rows())
    throw ConfigError("mul_colvec: scale must be [" + std::to_string(av.rows()) + " x 1]");
  Mat out = av.array().colwise() * sv.col(0).array();
  return push(std::move(out), wants_grad(a) || wants_grad(s),
              [a, s](Tape& t, const Mat& g) {
                if (t.wants_grad(a))
                  t.accumulate(a.id, g.array().colwise() * t.value(s).col(0).array());
                if (t.wants_grad(s))
                  t.accumulate(s.id, g.cwiseProduct(t.value(a)).rowwise().sum());
              });
}

Var Tape::div_colvec(Var a, Var s) {
  const Mat& av = value(a);
  const Mat& sv = value(s);
  if (sv.cols() != 1 || sv.rows() != av.rows())
    throw ConfigError("div_colvec: scale must be [" + std::to_string(av.rows()) + " x 1]");
  Mat out = av.array().colwise() / sv.col(0).array();
  return push(std::move(out), wants_grad(a) || wants_grad(s),
              [a, s, out_id = static_cast<int>(nodes_.size())](Tape& t, const Mat& g) {
                const auto inv = t.value(s).col(0).array().inverse();
                if (t.wants_grad(a)) t.accumulate(a.id, g.array().colwise() * inv);
                if (t.wants_grad(s)) {
                  // d/ds (a/s) = -a/s^2 = -out/s
                  Mat ds = -(g.cwiseProduct(t.nodes_[out_id].value)).rowwise().sum();
                  ds.array() *= inv;
                  t.accumulate(s.id, ds);
                }
              });
}

Var Tape::mul_const(Var a, Mat m) {
  check_same_shape(value(a), m, "mul_const");
  Mat out = value(a).cwiseProduct(m);
  return push(std::move(out), wants_grad(a),
              [a, m = std::move(m)](Tape& t, const Mat& g) {
                if (t.wants_grad(a)) t.accumulate(a.id, g.cwiseProduct(m));
              });
}

Var Tape::relu(Var a) {
  Mat out = value(a).cwiseMax(0.0);
  return push(std::move(out), wants_grad(a),
              [a](Tape& t, const Mat& g) {
                if (!t.wants_grad(a)) return;
                Mat mask = (t.value(a).array() > 0.0).cast<double>();
                t.accumulate(a.id, g.cwiseProduct(mask));
              });
}

Var Tape::softplus(Var a) {
  Mat out = value(a).unaryExpr([](double x) { return softplus_scalar(x); });
  return push(std::move(out), wants_grad(a),
              [a](Tape& t, const Mat& g) {
                if (!t.wants_grad(a)) return;
                Mat d = t.value(a).unaryExpr(
                    [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
                t.accumulate(a.id, g.cwiseProduct(d));
              });
}

Var Tape::sigmoid(Var a) {
  Mat out = value(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return push(std::move(out), wants_grad(a),
              [a, out_id = static_cast<int>(nodes_.size())](Tape& t, const Mat& g) {
                if (!t.wants_grad(a)) return;
                const Mat& s = t.nodes_[out_id].value;
                t.accumulate(a.id, g.cwiseProduct(s.cwiseProduct(Mat::Ones(s.rows(), s.cols()) - s)));
              });
}

Var Tape::exp(Var a) {
  Mat out = value(a).array().exp();
  return push(std::move(out), wants_grad(a),
              [a, out_id = static_cast<int>(nodes_.size())](Tape& t, const Mat& g) {
                if (t.wants_grad(a)) t.accumulate(a.id, g.cwiseProduct(t.nodes_[out_id].value));
              });
}

Var Tape::sqrt(Var a) {
  Mat out = value(a).array().sqrt();
  return push(std::move(out), wants_grad(a),
              [a, out_id = static_cast<int>(nodes_.size())](Tape& t, const Mat& g) {
                if (!t.wants_grad(a)) return;
                t.accumulate(a.id, (g.array() * 0.5 / t.nodes_[out_id].value.array()).matrix());
              });
}

Var Tape::pow_const(Var a, double p) {
  Mat out = value(a).array().pow(p);
  return push(std::move(out), wants_grad(a),
              [a, p](Tape& t, const Mat& g) {
                if (!t.wants_grad(a)) return;
                Mat d = p * t.value(a).array().pow(p - 1.0);
                t.accumulate(a.id, g.cwiseProduct(d));
              });
}

Var Tape::acos_clamped(Var a, double eps) {
  const double lo = -1.0 + eps, hi = 1.0 - eps;
  Mat out = value(a).unaryExpr(
      [lo, hi](double x) { return std::acos(std::clamp(x, lo, hi)); });
  return push(std::move(out), wants_grad(a),
              [a, lo, hi](Tape& t, const Mat& g) {
                if (!t.wants_grad(a)) return;
                Mat d = t.value(a).unaryExpr([lo, hi](double x) {
                  if (x <= lo || x >= hi) return 0.0;
                  return -1.0 / std::sqrt(1.0 - x * x);
                });
                t.accumulate(a.id, g.cwiseProduct(d));
              });
}

Var Tape::min(Var a, Var b) {
  check_same_shape(value(a), value(b), "min");
  Mat out = value(a).cwiseMin(value(b));
  return push(std::move(out), wants_grad(a) || wants_grad(b),
              [a, b](Tape& t, const Mat& g) {
                Mat take_a = (t.value(a).array() <= t.value(b).array()).cast<double>();
                if (t.wants_grad(a)) t.accumulate(a.id, g.cwiseProduct(take_a));
                if (t.wants_grad(b))
                  t.accumulate(b.id, g.cwiseProduct((1.0 - take_a.array()).matrix()));
              });
}

Var Tape::rowwise_sum(Var a) {
  Mat out = value(a).rowwise().sum();
  return push(std::move(out), wants_grad(a),
              [a](Tape& t, const Mat& g) {
                if (!t.wants_grad(a)) return;
                const Mat& av = t.value(a);
                t.accumulate(a.id, g.col(0).replicate(1, av.cols()));
              });
}

Var Tape::sum(Var a) {
  Mat out(1, 1);
  out(0, 0) = value(a).sum();
  return push(std::move(out), wants_grad(a),
              [a](Tape& t, const Mat& g) {
                if (!t.wants_grad(a)) return;
                const Mat& av = t.value(a);
                t.accumulate(a.id, Mat::Constant(av.rows(), av.cols(), g(0, 0)));
              });
}

Var Tape::block_sum(Var a, int blocks) {
  const Mat& av = value(a);
  if (blocks <= 0 || av.rows() % blocks != 0)
    throw ConfigError("block_sum: " + std::to_string(av.rows()) + " rows not divisible into " +
                      std::to_string(blocks) + " blocks");
  const Eigen::Index n = av.rows() / blocks;
  Mat out(blocks, av.cols());
  for (int b = 0; b < blocks; ++b) out.row(b) = av.middleRows(b * n, n).colwise().sum();
  return push(std::move(out), wants_grad(a),
              [a, blocks, n](Tape& t, const Mat& g) {
                if (!t.wants_grad(a)) return;
                const Mat& av = t.value(a);
                Mat da(av.rows(), av.cols());
                for (int b = 0; b < blocks; ++b)
                  da.middleRows(b * n, n) = g.row(b).replicate(n, 1);
                t.accumulate(a.id, da);
              });
}

Var Tape::exclusive_cumsum_blocks(Var a, int blocks) {
  const Mat& av = value(a);
  if (av.cols() != 1) throw ConfigError("exclusive_cumsum_blocks: expects a column vector");
  if (blocks <= 0 || av.rows() % blocks != 0)
    throw ConfigError("exclusive_cumsum_blocks: rows not divisible into blocks");
  const Eigen::Index n = av.rows() / blocks;
  Mat out(av.rows(), 1);
  for (int b = 0; b < blocks; ++b) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      out(b * n + i, 0) = acc;
      acc += av(b * n + i, 0);
    }
  }
  return push(std::move(out), wants_grad(a),
              [a, blocks, n](Tape& t, const Mat& g) {
                if (!t.wants_grad(a)) return;
                // d(out_i)/d(in_j) = 1 for j < i, so din_j = sum_{i > j} g_i.
                Mat da(g.rows(), 1);
                for (int b = 0; b < blocks; ++b) {
                  double acc = 0.0;
                  for (Eigen::Index i = n - 1; i >= 0; --i) {
                    da(b * n + i, 0) = acc;
                    acc += g(b * n + i, 0);
                  }
                }
                t.accumulate(a.id, da);
              });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ConfigError("concat_cols: no inputs");
  Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool any_grad = false;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw ConfigError("concat_cols: row count mismatch");
    cols += value(p).cols();
    any_grad = any_grad || wants_grad(p);
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  return push(std::move(out), any_grad,
              [parts](Tape& t, const Mat& g) {
                Eigen::Index at = 0;
                for (Var p : parts) {
                  Eigen::Index w = t.value(p).cols();
                  if (t.wants_grad(p)) t.accumulate(p.id, g.middleCols(at, w));
                  at += w;
                }
              });
}

Var Tape::select_rows(Var a, std::vector<int> rows) {
  const Mat& av = value(a);
  Mat out(static_cast<Eigen::Index>(rows.size()), av.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= av.rows())
      throw ConfigError("select_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = av.row(rows[i]);
  }
  return push(std::move(out), wants_grad(a),
              [a, rows = std::move(rows)](Tape& t, const Mat& g) {
                if (!t.wants_grad(a)) return;
                const Mat& av = t.value(a);
                Mat da = Mat::Zero(av.rows(), av.cols());
                for (std::size_t i = 0; i < rows.size(); ++i)
                  da.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
                t.accumulate(a.id, da);
              });
}

void Tape::backward(Var loss, double loss_seed) {
  if (!grad_enabled_) throw UsageError("backward on a gradient-disabled tape");
  if (consumed_) throw UsageError("tape already consumed by a reverse sweep");
  const Mat& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1)
    throw UsageError("backward: loss must be a 1x1 scalar");
  consumed_ = true;
  accumulate(loss.id, Mat::Constant(1, 1, loss_seed));
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.grad.size() != 0) n.back(*this, n.grad);
  }
}

}  // namespace abrdf::ad
