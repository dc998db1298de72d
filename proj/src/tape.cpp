#include "invopt/tape.hpp"

#include <cmath>
#include <sstream>

namespace invopt {

namespace {

std::string shape_str(const Tensor& t) {
  std::ostringstream os;
  os << "(" << t.rows() << "," << t.cols() << ")";
  return os.str();
}

[[noreturn]] void shape_fail(OpKind kind, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op_name(kind)) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

void require_same(OpKind kind, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail(kind, a, b);
}

double size_of(const Tensor& t) { return static_cast<double>(t.size()); }

// rcond below this is treated as singular.
constexpr double kSingularRcond = 1e-14;

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Neg: return "neg";
    case OpKind::Mul: return "mul";
    case OpKind::Div: return "div";
    case OpKind::ScalarMul: return "scalar_mul";
    case OpKind::Matmul: return "matmul";
    case OpKind::Matvec: return "matvec";
    case OpKind::Dot: return "dot";
    case OpKind::Sum: return "sum";
    case OpKind::Log: return "log";
    case OpKind::Exp: return "exp";
    case OpKind::Cos: return "cos";
    case OpKind::Sin: return "sin";
    case OpKind::Abs: return "abs";
    case OpKind::Square: return "square";
    case OpKind::SquaredNorm: return "squared_norm";
    case OpKind::Concat: return "concat";
    case OpKind::LinearSolve: return "linear_solve";
    case OpKind::Scale: return "scale";
    case OpKind::Transpose: return "transpose";
    case OpKind::Slice: return "slice";
    case OpKind::Reshape: return "reshape";
    case OpKind::RowScale: return "row_scale";
    case OpKind::Reciprocal: return "reciprocal";
  }
  return "?";
}

const Tensor& Var::value() const { return tape_->value(*this); }

bool Var::requires_grad() const { return tape_->nodes_[index_].requires_grad; }

double Var::item() const {
  const Tensor& v = value();
  if (v.size() != 1) throw ShapeError("item: node is not scalar-shaped " + shape_str(v));
  return v(0, 0);
}

const Tensor& GradientMap::operator[](const Var& v) const {
  auto it = grads_.find(v.index());
  if (it == grads_.end()) throw Error("no gradient recorded for node " + std::to_string(v.index()));
  return it->second;
}

const Tensor& Tape::value(const Var& v) const {
  check_owned(v);
  return nodes_[v.index()].value;
}

void Tape::check_owned(const Var& v) const {
  if (v.tape_ != this || v.index_ >= nodes_.size()) throw Error("variable belongs to another tape");
}

Var Tape::push(Node node, double flops) {
  counters_.forward += flops;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor t, bool requires_grad) {
  if (!t.allFinite()) throw Error("leaf: non-finite entry");
  Node n;
  n.kind = OpKind::Leaf;
  n.requires_grad = requires_grad;
  n.value = std::move(t);
  return push(std::move(n), 0.0);
}

Var Tape::scalar(double v, bool requires_grad) {
  Tensor t(1, 1);
  t(0, 0) = v;
  return leaf(std::move(t), requires_grad);
}

Var Tape::apply(OpKind kind, std::span<const Var> inputs) {
  const auto arity = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw Error(std::string(op_name(kind)) + ": expected " + std::to_string(n) + " inputs, got " +
                  std::to_string(inputs.size()));
    }
    for (const Var& v : inputs) check_owned(v);
  };

  Node n;
  n.kind = kind;
  double flops = 0.0;

  switch (kind) {
    case OpKind::Leaf:
    case OpKind::Scale:
    case OpKind::Slice:
    case OpKind::Reshape:
      throw Error(std::string(op_name(kind)) + " needs parameters; use the dedicated Tape method");
    case OpKind::Concat:
      return concat(inputs, 0);

    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul:
    case OpKind::Div: {
      arity(2);
      const Tensor& a = value(inputs[0]);
      const Tensor& b = value(inputs[1]);
      require_same(kind, a, b);
      if (kind == OpKind::Add) n.value = a + b;
      if (kind == OpKind::Sub) n.value = a - b;
      if (kind == OpKind::Mul) n.value = a.cwiseProduct(b);
      if (kind == OpKind::Div) n.value = a.cwiseQuotient(b);
      flops = size_of(a);
      break;
    }
    case OpKind::ScalarMul: {
      arity(2);
      const Tensor& s = value(inputs[0]);
      const Tensor& x = value(inputs[1]);
      if (s.size() != 1) shape_fail(kind, s, x);
      n.value = s(0, 0) * x;
      flops = size_of(x);
      break;
    }
    case OpKind::Matmul:
    case OpKind::Matvec: {
      arity(2);
      const Tensor& a = value(inputs[0]);
      const Tensor& b = value(inputs[1]);
      if (a.cols() != b.rows() || (kind == OpKind::Matvec && b.cols() != 1)) shape_fail(kind, a, b);
      n.value.noalias() = a * b;
      flops = 2.0 * static_cast<double>(a.rows() * a.cols() * b.cols());
      break;
    }
    case OpKind::Dot: {
      arity(2);
      const Tensor& a = value(inputs[0]);
      const Tensor& b = value(inputs[1]);
      require_same(kind, a, b);
      if (a.cols() != 1) shape_fail(kind, a, b);
      n.value = Tensor::Constant(1, 1, a.col(0).dot(b.col(0)));
      flops = 2.0 * size_of(a);
      break;
    }
    case OpKind::Sum:
    case OpKind::SquaredNorm: {
      arity(1);
      const Tensor& a = value(inputs[0]);
      n.value = Tensor::Constant(1, 1, kind == OpKind::Sum ? a.sum() : a.squaredNorm());
      flops = 2.0 * size_of(a);
      break;
    }
    case OpKind::Neg:
    case OpKind::Log:
    case OpKind::Exp:
    case OpKind::Cos:
    case OpKind::Sin:
    case OpKind::Abs:
    case OpKind::Square:
    case OpKind::Reciprocal: {
      arity(1);
      const Tensor& a = value(inputs[0]);
      switch (kind) {
        case OpKind::Neg: n.value = -a; break;
        case OpKind::Log: n.value = a.array().log().matrix(); break;
        case OpKind::Exp: n.value = a.array().exp().matrix(); break;
        case OpKind::Cos: n.value = a.array().cos().matrix(); break;
        case OpKind::Sin: n.value = a.array().sin().matrix(); break;
        case OpKind::Abs: n.value = a.cwiseAbs(); break;
        case OpKind::Square: n.value = a.cwiseAbs2(); break;
        default: n.value = a.cwiseInverse(); break;
      }
      flops = size_of(a);
      break;
    }
    case OpKind::Transpose: {
      arity(1);
      n.value = value(inputs[0]).transpose();
      flops = size_of(n.value);
      break;
    }
    case OpKind::RowScale: {
      arity(2);
      const Tensor& a = value(inputs[0]);
      const Tensor& v = value(inputs[1]);
      if (v.cols() != 1 || v.rows() != a.rows()) shape_fail(kind, a, v);
      n.value = v.col(0).asDiagonal() * a;
      flops = size_of(a);
      break;
    }
    case OpKind::LinearSolve: {
      arity(2);
      const Tensor& m = value(inputs[0]);
      const Tensor& r = value(inputs[1]);
      if (m.rows() != m.cols() || m.rows() != r.rows()) shape_fail(kind, m, r);
      auto lu = std::make_shared<Eigen::PartialPivLU<Tensor>>(m);
      const double rc = lu->rcond();
      if (!(rc > kSingularRcond)) {
        throw SingularSystem("linear_solve: singular matrix (rcond " + std::to_string(rc) + ")");
      }
      n.value = lu->solve(r);
      if (!n.value.allFinite()) throw SingularSystem("linear_solve: non-finite solution");
      n.lu = std::move(lu);
      const double dim = static_cast<double>(m.rows());
      flops = 2.0 / 3.0 * dim * dim * dim + 2.0 * dim * dim * static_cast<double>(r.cols());
      break;
    }
  }

  for (const Var& v : inputs) {
    n.requires_grad = n.requires_grad || nodes_[v.index()].requires_grad;
    n.inputs.push_back(static_cast<std::uint32_t>(v.index()));
  }
  return push(std::move(n), flops);
}

Var Tape::scale(const Var& a, double k) {
  check_owned(a);
  Node n;
  n.kind = OpKind::Scale;
  n.scalar = k;
  n.value = k * nodes_[a.index()].value;
  n.requires_grad = nodes_[a.index()].requires_grad;
  n.inputs = {static_cast<std::uint32_t>(a.index())};
  const double flops = size_of(n.value);
  return push(std::move(n), flops);
}

Var Tape::slice(const Var& a, Eigen::Index row, Eigen::Index col, Eigen::Index rows,
                Eigen::Index cols) {
  check_owned(a);
  const Tensor& src = nodes_[a.index()].value;
  if (row < 0 || col < 0 || rows < 0 || cols < 0 || row + rows > src.rows() ||
      col + cols > src.cols()) {
    throw ShapeError("slice: block out of range for " + shape_str(src));
  }
  Node n;
  n.kind = OpKind::Slice;
  n.r0 = row;
  n.c0 = col;
  n.value = src.block(row, col, rows, cols);
  n.requires_grad = nodes_[a.index()].requires_grad;
  n.inputs = {static_cast<std::uint32_t>(a.index())};
  const double flops = size_of(n.value);
  return push(std::move(n), flops);
}

namespace {

Tensor reshape_row_major(const Tensor& src, Eigen::Index rows, Eigen::Index cols) {
  Tensor out(rows, cols);
  const Eigen::Index src_cols = src.cols();
  for (Eigen::Index k = 0; k < src.size(); ++k) out(k / cols, k % cols) = src(k / src_cols, k % src_cols);
  return out;
}

}  // namespace

Var Tape::reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  check_owned(a);
  const Tensor& src = nodes_[a.index()].value;
  if (rows * cols != src.size()) throw ShapeError("reshape: size mismatch for " + shape_str(src));
  Node n;
  n.kind = OpKind::Reshape;
  n.value = reshape_row_major(src, rows, cols);
  n.requires_grad = nodes_[a.index()].requires_grad;
  n.inputs = {static_cast<std::uint32_t>(a.index())};
  const double flops = size_of(n.value);
  return push(std::move(n), flops);
}

Var Tape::concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw Error("concat: no inputs");
  if (axis != 0 && axis != 1) throw Error("concat: axis must be 0 or 1");
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    check_owned(p);
    const Tensor& v = nodes_[p.index()].value;
    const Tensor& first = nodes_[parts[0].index()].value;
    if (axis == 0) {
      if (v.cols() != first.cols()) shape_fail(OpKind::Concat, first, v);
      rows += v.rows();
      cols = v.cols();
    } else {
      if (v.rows() != first.rows()) shape_fail(OpKind::Concat, first, v);
      cols += v.cols();
      rows = v.rows();
    }
  }
  Node n;
  n.kind = OpKind::Concat;
  n.r0 = axis;
  n.value.resize(rows, cols);
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = nodes_[p.index()].value;
    if (axis == 0) {
      n.value.middleRows(offset, v.rows()) = v;
      offset += v.rows();
    } else {
      n.value.middleCols(offset, v.cols()) = v;
      offset += v.cols();
    }
    n.requires_grad = n.requires_grad || nodes_[p.index()].requires_grad;
    n.inputs.push_back(static_cast<std::uint32_t>(p.index()));
  }
  const double flops = size_of(n.value);
  return push(std::move(n), flops);
}

void Tape::set_truncation(std::optional<std::size_t> depth, std::size_t keep_prefix) {
  truncation_depth_ = depth;
  keep_prefix_ = keep_prefix;
}

namespace {

void accumulate(std::vector<Tensor>& adjoints, std::size_t index, const Tensor& contribution) {
  Tensor& slot = adjoints[index];
  if (slot.size() == 0) {
    slot = contribution;
  } else {
    slot += contribution;
  }
}

}  // namespace

void Tape::propagate(std::size_t index, const Tensor& adj, std::vector<Tensor>& adjoints) {
  const Node& n = nodes_[index];
  const auto in = [&](std::size_t k) -> const Node& { return nodes_[n.inputs[k]]; };
  const auto wants = [&](std::size_t k) { return in(k).requires_grad; };
  const auto give = [&](std::size_t k, const Tensor& g) { accumulate(adjoints, n.inputs[k], g); };
  double& flops = counters_.backward;

  switch (n.kind) {
    case OpKind::Leaf:
      break;
    case OpKind::Add:
      if (wants(0)) give(0, adj);
      if (wants(1)) give(1, adj);
      flops += size_of(adj);
      break;
    case OpKind::Sub:
      if (wants(0)) give(0, adj);
      if (wants(1)) give(1, -adj);
      flops += size_of(adj);
      break;
    case OpKind::Neg:
      give(0, -adj);
      flops += size_of(adj);
      break;
    case OpKind::Mul:
      if (wants(0)) give(0, adj.cwiseProduct(in(1).value));
      if (wants(1)) give(1, adj.cwiseProduct(in(0).value));
      flops += 2.0 * size_of(adj);
      break;
    case OpKind::Div:
      if (wants(0)) give(0, adj.cwiseQuotient(in(1).value));
      if (wants(1)) give(1, -adj.cwiseProduct(n.value).cwiseQuotient(in(1).value));
      flops += 3.0 * size_of(adj);
      break;
    case OpKind::ScalarMul: {
      const double s = in(0).value(0, 0);
      if (wants(0)) give(0, Tensor::Constant(1, 1, adj.cwiseProduct(in(1).value).sum()));
      if (wants(1)) give(1, s * adj);
      flops += 3.0 * size_of(adj);
      break;
    }
    case OpKind::Scale:
      give(0, n.scalar * adj);
      flops += size_of(adj);
      break;
    case OpKind::Matmul:
    case OpKind::Matvec: {
      const Tensor& a = in(0).value;
      const Tensor& b = in(1).value;
      if (wants(0)) give(0, adj * b.transpose());
      if (wants(1)) give(1, a.transpose() * adj);
      flops += 4.0 * static_cast<double>(a.rows() * a.cols() * b.cols());
      break;
    }
    case OpKind::Dot: {
      const double g = adj(0, 0);
      if (wants(0)) give(0, g * in(1).value);
      if (wants(1)) give(1, g * in(0).value);
      flops += 2.0 * size_of(in(0).value);
      break;
    }
    case OpKind::Sum: {
      const Tensor& a = in(0).value;
      give(0, Tensor::Constant(a.rows(), a.cols(), adj(0, 0)));
      flops += size_of(a);
      break;
    }
    case OpKind::SquaredNorm:
      give(0, 2.0 * adj(0, 0) * in(0).value);
      flops += size_of(in(0).value);
      break;
    case OpKind::Log:
      give(0, adj.cwiseQuotient(in(0).value));
      flops += size_of(adj);
      break;
    case OpKind::Exp:
      give(0, adj.cwiseProduct(n.value));
      flops += size_of(adj);
      break;
    case OpKind::Cos:
      give(0, -adj.cwiseProduct(in(0).value.array().sin().matrix()));
      flops += 2.0 * size_of(adj);
      break;
    case OpKind::Sin:
      give(0, adj.cwiseProduct(in(0).value.array().cos().matrix()));
      flops += 2.0 * size_of(adj);
      break;
    case OpKind::Abs:
      // Subgradient 0 at the kink.
      give(0, adj.cwiseProduct(in(0).value.unaryExpr([](double v) {
        return static_cast<double>((v > 0.0) - (v < 0.0));
      })));
      flops += 2.0 * size_of(adj);
      break;
    case OpKind::Square:
      give(0, 2.0 * adj.cwiseProduct(in(0).value));
      flops += 2.0 * size_of(adj);
      break;
    case OpKind::Reciprocal:
      give(0, -adj.cwiseProduct(n.value.cwiseAbs2()));
      flops += 2.0 * size_of(adj);
      break;
    case OpKind::Transpose:
      give(0, adj.transpose());
      flops += size_of(adj);
      break;
    case OpKind::RowScale: {
      const Tensor& a = in(0).value;
      const Tensor& v = in(1).value;
      if (wants(0)) give(0, v.col(0).asDiagonal() * adj);
      if (wants(1)) give(1, adj.cwiseProduct(a).rowwise().sum());
      flops += 3.0 * size_of(a);
      break;
    }
    case OpKind::Slice: {
      const Tensor& a = in(0).value;
      Tensor g = Tensor::Zero(a.rows(), a.cols());
      g.block(n.r0, n.c0, adj.rows(), adj.cols()) = adj;
      give(0, g);
      flops += size_of(adj);
      break;
    }
    case OpKind::Reshape: {
      const Tensor& a = in(0).value;
      give(0, reshape_row_major(adj, a.rows(), a.cols()));
      flops += size_of(adj);
      break;
    }
    case OpKind::Concat: {
      Eigen::Index offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const Tensor& v = in(k).value;
        if (n.r0 == 0) {
          if (wants(k)) give(k, adj.middleRows(offset, v.rows()));
          offset += v.rows();
        } else {
          if (wants(k)) give(k, adj.middleCols(offset, v.cols()));
          offset += v.cols();
        }
      }
      flops += size_of(adj);
      break;
    }
    case OpKind::LinearSolve: {
      // y = M^-1 r:  r_bar = M^-T y_bar,  M_bar = -r_bar y^T.
      Tensor r_bar = n.lu->transpose().solve(adj);
      const double dim = static_cast<double>(n.value.rows());
      flops += 2.0 * dim * dim * static_cast<double>(adj.cols());
      if (wants(0)) {
        give(0, -r_bar * n.value.transpose());
        flops += dim * dim * static_cast<double>(adj.cols());
      }
      if (wants(1)) give(1, r_bar);
      break;
    }
  }
}

GradientMap Tape::backward(const Var& loss) {
  check_owned(loss);
  const Node& root = nodes_[loss.index()];
  if (root.value.size() != 1) throw ShapeError("backward: loss must be scalar, got " + shape_str(root.value));

  const std::size_t len = nodes_.size();
  std::size_t skip_end = 0;
  if (truncation_depth_ && *truncation_depth_ < len) skip_end = len - *truncation_depth_;
  const auto visited = [&](std::size_t i) { return i < keep_prefix_ || i >= skip_end; };

  std::vector<Tensor> adjoints(loss.index() + 1);
  adjoints[loss.index()] = Tensor::Ones(1, 1);

  GradientMap out;
  for (std::size_t i = loss.index() + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!n.requires_grad) continue;
    if (n.kind == OpKind::Leaf) {
      Tensor& g = adjoints[i];
      out.grads_.emplace(i, g.size() == 0 ? Tensor::Zero(n.value.rows(), n.value.cols()) : g);
      continue;
    }
    if (adjoints[i].size() == 0 || !visited(i)) continue;
    propagate(i, adjoints[i], adjoints);
    adjoints[i] = Tensor();
  }
  return out;
}

Var add(const Var& a, const Var& b) { return a.tape().apply(OpKind::Add, std::array{a, b}); }
Var sub(const Var& a, const Var& b) { return a.tape().apply(OpKind::Sub, std::array{a, b}); }
Var neg(const Var& a) { return a.tape().apply(OpKind::Neg, std::array{a}); }
Var mul(const Var& a, const Var& b) { return a.tape().apply(OpKind::Mul, std::array{a, b}); }
Var div(const Var& a, const Var& b) { return a.tape().apply(OpKind::Div, std::array{a, b}); }
Var scalar_mul(const Var& s, const Var& x) {
  return s.tape().apply(OpKind::ScalarMul, std::array{s, x});
}
Var scale(const Var& a, double k) { return a.tape().scale(a, k); }
Var matmul(const Var& a, const Var& b) { return a.tape().apply(OpKind::Matmul, std::array{a, b}); }
Var matvec(const Var& a, const Var& x) { return a.tape().apply(OpKind::Matvec, std::array{a, x}); }
Var dot(const Var& a, const Var& b) { return a.tape().apply(OpKind::Dot, std::array{a, b}); }
Var sum(const Var& a) { return a.tape().apply(OpKind::Sum, std::array{a}); }
Var log(const Var& a) { return a.tape().apply(OpKind::Log, std::array{a}); }
Var exp(const Var& a) { return a.tape().apply(OpKind::Exp, std::array{a}); }
Var cos(const Var& a) { return a.tape().apply(OpKind::Cos, std::array{a}); }
Var sin(const Var& a) { return a.tape().apply(OpKind::Sin, std::array{a}); }
Var abs(const Var& a) { return a.tape().apply(OpKind::Abs, std::array{a}); }
Var square(const Var& a) { return a.tape().apply(OpKind::Square, std::array{a}); }
Var squared_norm(const Var& a) { return a.tape().apply(OpKind::SquaredNorm, std::array{a}); }
Var reciprocal(const Var& a) { return a.tape().apply(OpKind::Reciprocal, std::array{a}); }
Var transpose(const Var& a) { return a.tape().apply(OpKind::Transpose, std::array{a}); }
Var row_scale(const Var& a, const Var& v) {
  return a.tape().apply(OpKind::RowScale, std::array{a, v});
}
Var linear_solve(const Var& m, const Var& r) {
  return m.tape().apply(OpKind::LinearSolve, std::array{m, r});
}

double grad_check(const TapeProgram& f, const Tensor& x0, double h) {
  Tensor analytic;
  {
    Tape tape;
    Var x = tape.leaf(x0, true);
    Var y = f(tape, x);
    analytic = tape.backward(y)[x];
  }

  const auto eval = [&](const Tensor& point, Eigen::Index k) {
    try {
      Tape tape;
      Var x = tape.leaf(point, false);
      const double v = f(tape, x).item();
      if (!std::isfinite(v)) throw Error("non-finite value");
      return v;
    } catch (const std::exception& e) {
      throw GradCheckError(k, e.what());
    }
  };

  double worst = 0.0;
  for (Eigen::Index k = 0; k < x0.size(); ++k) {
    Tensor plus = x0;
    Tensor minus = x0;
    plus(k) += h;
    minus(k) -= h;
    const double fd = (eval(plus, k) - eval(minus, k)) / (2.0 * h);
    const double err = std::abs(analytic(k) - fd) / std::max(1.0, std::abs(fd));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace invopt
