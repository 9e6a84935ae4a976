#pragma once

// Minimal reverse-mode automatic differentiation over dense Eigen matrices.
//
// A Tape records every operation of one forward pass. Parameters live outside
// the tape (Param) and are bound to leaf nodes on first use; Tape::backward
// adds the accumulated leaf gradients into Param::grad. Column vectors are
// n x 1 matrices and scalars are 1 x 1.

#include <Eigen/Dense>

#include <cassert>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace m2sm::ad {

using Mat = Eigen::MatrixXd;

struct Param {
  std::string name;
  Mat value;
  Mat grad;

  Param() = default;
  Param(std::string n, Mat v) : name(std::move(n)), value(std::move(v)) {
    grad = Mat::Zero(value.rows(), value.cols());
  }

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

class Tape;

class Var {
 public:
  Var() = default;

  const Mat& value() const;
  double scalar() const { return value()(0, 0); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Mat&)>;

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat value) {
    nodes_.push_back(Node{std::move(value), {}, false, false, {}, nullptr});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  Var param(Param& p) {
    if (auto it = param_ids_.find(&p); it != param_ids_.end()) {
      return Var(this, it->second);
    }
    nodes_.push_back(Node{p.value, {}, false, true, {}, &p});
    const int id = static_cast<int>(nodes_.size()) - 1;
    param_ids_.emplace(&p, id);
    return Var(this, id);
  }

  /// Records an op. `back` receives the output gradient and must route it to
  /// the inputs through accumulate(); it is dropped when no input needs grad.
  Var push(Mat value, std::initializer_list<Var> inputs, Backward back) {
    return push_span(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                     std::move(back));
  }

  Var push_span(Mat value, std::span<const Var> inputs, Backward back) {
    bool needs = false;
    for (const Var& v : inputs) {
      assert(v.tape_ == this);
      needs = needs || nodes_[v.id_].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, false, needs, needs ? std::move(back) : Backward{},
                          nullptr});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  const Mat& value(int id) const { return nodes_[id].value; }
  bool requires_grad(const Var& v) const { return nodes_[v.id_].requires_grad; }

  void accumulate(const Var& v, const Mat& g) {
    Node& n = nodes_[v.id_];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
      n.grad = g;
      n.has_grad = true;
    } else {
      n.grad += g;
    }
  }

  /// Seeds d(loss)/d(loss) = 1, sweeps the tape in reverse, and adds leaf
  /// gradients into the bound parameters.
  void backward(const Var& loss) {
    if (loss.value().size() != 1) throw std::logic_error("backward: loss must be scalar");
    accumulate(loss, Mat::Ones(1, 1));
    for (int i = loss.id_; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.has_grad) continue;
      if (n.param != nullptr) {
        n.param->grad += n.grad;
      } else if (n.back) {
        n.back(*this, n.grad);
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool has_grad;
    bool requires_grad;
    Backward back;
    Param* param;
  };
  std::vector<Node> nodes_;
  std::unordered_map<Param*, int> param_ids_;
};

inline const Mat& Var::value() const { return tape_->value(id_); }

// ---------------------------------------------------------------------------
// Operations

inline Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  return a.tape().push(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Mat& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

inline Var add(const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("add: shape mismatch");
  return a.tape().push(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

inline Var sub(const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("sub: shape mismatch");
  return a.tape().push(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

/// Elementwise (Hadamard) product.
inline Var mul(const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("mul: shape mismatch");
  return a.tape().push(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, const Mat& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

/// Scalar (1x1) times matrix.
inline Var mul_scalar(const Var& s, const Var& a) {
  if (s.value().size() != 1) throw std::invalid_argument("mul_scalar: first operand must be 1x1");
  return a.tape().push(s.scalar() * a.value(), {s, a}, [s, a](Tape& t, const Mat& g) {
    if (t.requires_grad(s)) t.accumulate(s, Mat::Constant(1, 1, g.cwiseProduct(a.value()).sum()));
    if (t.requires_grad(a)) t.accumulate(a, s.scalar() * g);
  });
}

inline Var scale(const Var& a, double k) {
  return a.tape().push(k * a.value(), {a}, [a, k](Tape& t, const Mat& g) { t.accumulate(a, k * g); });
}

/// 1 - a, elementwise.
inline Var one_minus(const Var& a) {
  return a.tape().push(Mat::Ones(a.rows(), a.cols()) - a.value(), {a},
                       [a](Tape& t, const Mat& g) { t.accumulate(a, -g); });
}

inline Var tanh(const Var& a) {
  Mat y = a.value().array().tanh().matrix();
  return a.tape().push(y, {a}, [a, y](Tape& t, const Mat& g) {
    t.accumulate(a, g.cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

inline Var sigmoid(const Var& a) {
  Mat y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return a.tape().push(y, {a}, [a, y](Tape& t, const Mat& g) {
    t.accumulate(a, g.cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
  });
}

inline Var log(const Var& a) {
  return a.tape().push(a.value().array().log().matrix(), {a}, [a](Tape& t, const Mat& g) {
    t.accumulate(a, g.cwiseQuotient(a.value()));
  });
}

/// Elementwise a^p for a fixed exponent p >= 0 and a >= 0. For p == 0 the
/// value is exactly 1 and no gradient flows. At a == 0 the derivative is
/// taken as 0 (it is unbounded there for p < 1).
inline Var pow(const Var& a, double p) {
  Mat y = a.value().array().pow(p).matrix();
  return a.tape().push(y, {a}, [a, p](Tape& t, const Mat& g) {
    if (p == 0.0) return;
    Mat d = (a.value().array() > 0.0).select(p * a.value().array().pow(p - 1.0), 0.0).matrix();
    t.accumulate(a, g.cwiseProduct(d));
  });
}

/// Clamps to [lo, hi]; the gradient is zero where the clamp is active.
inline Var clip(const Var& a, double lo, double hi) {
  Mat y = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape().push(y, {a}, [a, lo, hi](Tape& t, const Mat& g) {
    Mat d = g;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      const double x = a.value()(i);
      if (x < lo || x > hi) d(i) = 0.0;
    }
    t.accumulate(a, d);
  });
}

inline Var sum(const Var& a) {
  return a.tape().push(Mat::Constant(1, 1, a.value().sum()), {a}, [a](Tape& t, const Mat& g) {
    t.accumulate(a, Mat::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

inline Var dot(const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("dot: shape mismatch");
  return a.tape().push(Mat::Constant(1, 1, a.value().cwiseProduct(b.value()).sum()), {a, b},
                       [a, b](Tape& t, const Mat& g) {
                         if (t.requires_grad(a)) t.accumulate(a, g(0, 0) * b.value());
                         if (t.requires_grad(b)) t.accumulate(b, g(0, 0) * a.value());
                       });
}

/// Vertical concatenation of blocks with equal column count.
inline Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  for (const Var& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat: column mismatch");
    rows += p.rows();
  }
  Mat y(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    y.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape().push_span(std::move(y), parts, [inputs](Tape& t, const Mat& g) {
    Eigen::Index off = 0;
    for (const Var& p : inputs) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleRows(off, p.rows()));
      off += p.rows();
    }
  });
}

inline Var concat(const Var& a, const Var& b) {
  const Var parts[] = {a, b};
  return concat(std::span<const Var>(parts));
}

/// Places column vectors side by side: n vectors of length d -> d x n.
inline Var hstack(std::span<const Var> columns) {
  if (columns.empty()) throw std::invalid_argument("hstack: no inputs");
  const Eigen::Index d = columns.front().rows();
  Mat y(d, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j].rows() != d || columns[j].cols() != 1) {
      throw std::invalid_argument("hstack: inputs must be equal-length column vectors");
    }
    y.col(static_cast<Eigen::Index>(j)) = columns[j].value();
  }
  std::vector<Var> inputs(columns.begin(), columns.end());
  return columns.front().tape().push_span(std::move(y), columns, [inputs](Tape& t, const Mat& g) {
    for (std::size_t j = 0; j < inputs.size(); ++j) {
      if (t.requires_grad(inputs[j])) t.accumulate(inputs[j], g.col(static_cast<Eigen::Index>(j)));
    }
  });
}

inline Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index n) {
  if (start < 0 || start + n > a.rows()) throw std::invalid_argument("slice_rows: out of range");
  return a.tape().push(a.value().middleRows(start, n), {a}, [a, start, n](Tape& t, const Mat& g) {
    Mat d = Mat::Zero(a.rows(), a.cols());
    d.middleRows(start, n) = g;
    t.accumulate(a, d);
  });
}

/// Row `index` of a matrix, returned as a column vector.
inline Var row(const Var& table, Eigen::Index index) {
  if (index < 0 || index >= table.rows()) throw std::invalid_argument("row: index out of range");
  Mat y = table.value().row(index).transpose();
  return table.tape().push(std::move(y), {table}, [table, index](Tape& t, const Mat& g) {
    Mat d = Mat::Zero(table.rows(), table.cols());
    d.row(index) = g.transpose();
    t.accumulate(table, d);
  });
}

/// Numerically stable softmax of a column vector (max-subtracted).
inline Var softmax(const Var& a) {
  if (a.cols() != 1 || a.rows() == 0) throw std::invalid_argument("softmax: expects a nonempty column vector");
  Mat y = (a.value().array() - a.value().maxCoeff()).exp().matrix();
  y /= y.sum();
  return a.tape().push(y, {a}, [a, y](Tape& t, const Mat& g) {
    const double inner = g.cwiseProduct(y).sum();
    t.accumulate(a, y.cwiseProduct((g.array() - inner).matrix()));
  });
}

/// Row-major vectorization of the outer product a b^T (a: n x 1, b: m x 1);
/// element i*m + j is a_i * b_j.
inline Var outer_vec(const Var& a, const Var& b) {
  if (a.cols() != 1 || b.cols() != 1) throw std::invalid_argument("outer_vec: expects column vectors");
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.rows();
  Mat outer = a.value() * b.value().transpose();  // n x m
  Mat y(n * m, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) y(i * m + j, 0) = outer(i, j);
  }
  return a.tape().push(std::move(y), {a, b}, [a, b, n, m](Tape& t, const Mat& g) {
    Mat gm(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) gm(i, j) = g(i * m + j, 0);
    }
    if (t.requires_grad(a)) t.accumulate(a, gm * b.value());
    if (t.requires_grad(b)) t.accumulate(b, gm.transpose() * a.value());
  });
}

/// Arithmetic mean of equally shaped inputs.
inline Var mean(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("mean: no inputs");
  Var acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) acc = add(acc, parts[i]);
  return scale(acc, 1.0 / static_cast<double>(parts.size()));
}

inline Var sum_all(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("sum_all: no inputs");
  Var acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) acc = add(acc, parts[i]);
  return acc;
}

/// W x + b for a column vector x.
inline Var affine(const Var& w, const Var& x, const Var& b) { return add(matmul(w, x), b); }

}  // namespace m2sm::ad
