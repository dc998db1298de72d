#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace invopt {

/// Dense row/column tensor. Vectors are (n, 1).
using Tensor = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Raised by linear_solve when the system matrix is numerically singular.
class SingularSystem : public Error {
 public:
  using Error::Error;
};

enum class OpKind : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Neg,
  Mul,
  Div,
  ScalarMul,
  Matmul,
  Matvec,
  Dot,
  Sum,
  Log,
  Exp,
  Cos,
  Sin,
  Abs,
  Square,
  SquaredNorm,
  Concat,
  LinearSolve,
  // Structural and convenience kinds used by the solver and model families.
  Scale,
  Transpose,
  Slice,
  Reshape,
  RowScale,
  Reciprocal,
};

const char* op_name(OpKind kind);

class Tape;

/// Handle to one node of one tape. Only a Tape can mint these.
class Var {
 public:
  std::size_t index() const { return index_; }
  Tape& tape() const { return *tape_; }
  const Tensor& value() const;
  bool requires_grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double item() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_;
  std::size_t index_;
};

/// Leaf gradients produced by Tape::backward.
class GradientMap {
 public:
  bool contains(const Var& v) const { return grads_.contains(v.index()); }
  const Tensor& operator[](const Var& v) const;
  std::size_t size() const { return grads_.size(); }

 private:
  friend class Tape;
  std::unordered_map<std::size_t, Tensor> grads_;
};

/// Rough floating-point operation counts, accumulated per tape.
struct OpCounters {
  double forward = 0.0;
  double backward = 0.0;
};

/// Append-only record of differentiable operations.
///
/// Nodes live in a deque so references returned by value() stay valid while
/// the tape grows. A tape is confined to one thread and must outlive every
/// Var it hands out, so it is neither copyable nor movable.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Records a leaf. Throws Error on non-finite entries.
  Var leaf(Tensor t, bool requires_grad);
  Var constant(Tensor t) { return leaf(std::move(t), false); }
  Var scalar(double v, bool requires_grad = false);

  /// Generic entry point for the parameter-free kinds.
  Var apply(OpKind kind, std::span<const Var> inputs);

  Var scale(const Var& a, double k);
  Var slice(const Var& a, Eigen::Index row, Eigen::Index col, Eigen::Index rows,
            Eigen::Index cols);
  /// Row-major reshape.
  Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);
  /// axis 0 stacks rows, axis 1 stacks columns.
  Var concat(std::span<const Var> parts, int axis);

  /// Backward pass from a 1x1 node. Only leaves with requires_grad appear in
  /// the result.
  GradientMap backward(const Var& loss);

  /// Restricts the next backward passes to the trailing `depth` nodes. Nodes
  /// with index below `keep_prefix` are always visited, so parameters built
  /// before the truncated region still receive gradient.
  void set_truncation(std::optional<std::size_t> depth, std::size_t keep_prefix = 0);
  std::optional<std::size_t> truncation_depth() const { return truncation_depth_; }

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(const Var& v) const;
  OpKind kind(std::size_t index) const { return nodes_.at(index).kind; }
  const OpCounters& counters() const { return counters_; }

 private:
  friend class Var;

  struct Node {
    OpKind kind = OpKind::Leaf;
    bool requires_grad = false;
    std::vector<std::uint32_t> inputs;
    Tensor value;
    double scalar = 0.0;
    Eigen::Index r0 = 0;
    Eigen::Index c0 = 0;
    std::shared_ptr<const Eigen::PartialPivLU<Tensor>> lu;
  };

  Var push(Node node, double flops);
  void check_owned(const Var& v) const;
  void propagate(std::size_t index, const Tensor& adj, std::vector<Tensor>& adjoints);

  std::deque<Node> nodes_;
  std::optional<std::size_t> truncation_depth_;
  std::size_t keep_prefix_ = 0;
  OpCounters counters_;
};

// Free-function spellings of the tape operations.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var neg(const Var& a);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
/// s is 1x1; result is s * x.
Var scalar_mul(const Var& s, const Var& x);
Var scale(const Var& a, double k);
Var matmul(const Var& a, const Var& b);
Var matvec(const Var& a, const Var& x);
Var dot(const Var& a, const Var& b);
Var sum(const Var& a);
Var log(const Var& a);
Var exp(const Var& a);
Var cos(const Var& a);
Var sin(const Var& a);
Var abs(const Var& a);
Var square(const Var& a);
Var squared_norm(const Var& a);
Var reciprocal(const Var& a);
Var transpose(const Var& a);
/// Row i of a scaled by v(i).
Var row_scale(const Var& a, const Var& v);
/// Solves m * y = r. Throws SingularSystem when m is numerically singular.
Var linear_solve(const Var& m, const Var& r);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator*(double k, const Var& a) { return scale(a, k); }

/// Largest relative discrepancy between reverse-mode and central-difference
/// gradients of f at x0, measured as |ad - fd| / max(1, |fd|).
///
/// f receives a fresh tape and a leaf holding the evaluation point; it must
/// return a 1x1 node. Throws GradCheckError naming the coordinate whose
/// perturbed evaluation failed.
using TapeProgram = std::function<Var(Tape&, const Var&)>;

class GradCheckError : public Error {
 public:
  GradCheckError(Eigen::Index coordinate, const std::string& what)
      : Error("grad_check: evaluation failed at coordinate " + std::to_string(coordinate) + ": " +
              what),
        coordinate_(coordinate) {}
  Eigen::Index coordinate() const { return coordinate_; }

 private:
  Eigen::Index coordinate_;
};

double grad_check(const TapeProgram& f, const Tensor& x0, double h = 1e-6);

}  // namespace invopt
