#include "invopt/models.hpp"

#include <string>

namespace invopt {

const char* family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::Direct: return "direct";
    case ModelFamily::LinearShift: return "linear-shift";
    case ModelFamily::TrigDemo: return "trig-demo";
  }
  return "?";
}

ModelFamily parse_family(std::string_view name) {
  if (name == "direct") return ModelFamily::Direct;
  if (name == "linear-shift") return ModelFamily::LinearShift;
  if (name == "trig-demo") return ModelFamily::TrigDemo;
  throw Error("unknown model family '" + std::string(name) + "'");
}

ParametricModel ParametricModel::direct(Eigen::Index d, Eigen::Index m) {
  if (d < 1 || m < 1) throw Error("direct model: d and m must be positive");
  ParametricModel p;
  p.family_ = ModelFamily::Direct;
  p.d_ = d;
  p.m_ = m;
  return p;
}

ParametricModel ParametricModel::direct_cost_only(Tensor A, Tensor b) {
  if (A.rows() != b.rows() || b.cols() != 1 || A.rows() < 1 || A.cols() < 1) {
    throw ShapeError("direct_cost_only: A and b disagree");
  }
  ParametricModel p;
  p.family_ = ModelFamily::Direct;
  p.cost_only_ = true;
  p.d_ = A.cols();
  p.m_ = A.rows();
  p.A0_ = std::move(A);
  p.b0_ = std::move(b);
  return p;
}

ParametricModel ParametricModel::linear_shift(Tensor c0, Tensor A0, Tensor b0, std::vector<int> masks) {
  if (A0.rows() != b0.rows() || A0.cols() != c0.rows() || c0.cols() != 1 || b0.cols() != 1) {
    throw ShapeError("linear_shift: base LP shapes disagree");
  }
  if (static_cast<Eigen::Index>(masks.size()) != A0.rows()) {
    throw ShapeError("linear_shift: need one mask column per constraint row");
  }
  ParametricModel p;
  p.family_ = ModelFamily::LinearShift;
  p.d_ = A0.cols();
  p.m_ = A0.rows();
  p.mask_matrix_ = Tensor::Zero(p.m_, p.d_);
  for (Eigen::Index i = 0; i < p.m_; ++i) {
    const int col = masks[static_cast<std::size_t>(i)];
    if (col < 0 || col >= p.d_) throw Error("linear_shift: mask column out of range");
    p.mask_matrix_(i, col) = 1.0;
  }
  p.c0_ = std::move(c0);
  p.A0_ = std::move(A0);
  p.b0_ = std::move(b0);
  p.masks_ = std::move(masks);
  return p;
}

ParametricModel ParametricModel::trig_demo() {
  ParametricModel p;
  p.family_ = ModelFamily::TrigDemo;
  p.d_ = 2;
  p.m_ = 3;
  return p;
}

Eigen::Index ParametricModel::weight_count() const {
  switch (family_) {
    case ModelFamily::Direct: return cost_only_ ? d_ : d_ + d_ * m_ + m_;
    case ModelFamily::LinearShift: return 6;
    case ModelFamily::TrigDemo: return 2;
  }
  return 0;
}

std::vector<WeightGroup> ParametricModel::weight_groups() const {
  std::vector<WeightGroup> g(static_cast<std::size_t>(weight_count()), WeightGroup::Constraint);
  switch (family_) {
    case ModelFamily::Direct:
      for (Eigen::Index i = 0; i < d_; ++i) g[static_cast<std::size_t>(i)] = WeightGroup::Cost;
      break;
    case ModelFamily::LinearShift:
      g[0] = g[1] = WeightGroup::Cost;
      break;
    case ModelFamily::TrigDemo:
      g.assign(2, WeightGroup::Cost);
      break;
  }
  return g;
}

Tensor ParametricModel::pack(const Tensor& c, const Tensor& A, const Tensor& b) const {
  if (family_ != ModelFamily::Direct) throw Error("pack: only the direct family packs (c, A, b)");
  if (c.rows() != d_ || c.cols() != 1) throw ShapeError("pack: c has the wrong shape");
  if (cost_only_) return c;
  if (A.rows() != m_ || A.cols() != d_ || b.rows() != m_ || b.cols() != 1) {
    throw ShapeError("pack: A or b has the wrong shape");
  }
  Tensor w(weight_count(), 1);
  w.topRows(d_) = c;
  for (Eigen::Index i = 0; i < m_; ++i) {
    for (Eigen::Index j = 0; j < d_; ++j) w(d_ + i * d_ + j, 0) = A(i, j);
  }
  w.bottomRows(m_) = b;
  return w;
}

LinearProgram ParametricModel::instantiate(const Var& w, double u) const {
  if (w.cols() != 1 || w.rows() != weight_count()) {
    throw Error(std::string("instantiate: ") + family_name(family_) + " expects " +
                std::to_string(weight_count()) + " weights, got " + std::to_string(w.rows()) + "x" +
                std::to_string(w.cols()));
  }
  Tape& tape = w.tape();
  const auto weight = [&](Eigen::Index i) { return tape.slice(w, i, 0, 1, 1); };
  // a + b u as a 1x1 node.
  const auto affine = [&](Eigen::Index i) { return add(weight(i), scale(weight(i + 1), u)); };

  switch (family_) {
    case ModelFamily::Direct: {
      if (cost_only_) return {w, tape.constant(A0_), tape.constant(b0_)};
      Var c = tape.slice(w, 0, 0, d_, 1);
      Var A = tape.reshape(tape.slice(w, d_, 0, d_ * m_, 1), m_, d_);
      Var b = tape.slice(w, d_ + d_ * m_, 0, m_, 1);
      return {c, A, b};
    }
    case ModelFamily::LinearShift: {
      Var c = add(tape.constant(c0_), scalar_mul(affine(0), tape.constant(Tensor::Ones(d_, 1))));
      Var A = add(tape.constant(A0_), scalar_mul(affine(2), tape.constant(mask_matrix_)));
      Var b = add(tape.constant(b0_), scalar_mul(affine(4), tape.constant(Tensor::Ones(m_, 1))));
      return {c, A, b};
    }
    case ModelFamily::TrigDemo: {
      Var w0 = weight(0);
      Var w1 = weight(1);
      Var angle = add(w0, scale(w1, u));
      Var c = tape.concat(std::array{cos(angle), sin(angle)}, 0);
      Var zero = tape.scalar(0.0);
      Var minus_one = tape.scalar(-1.0);
      // 1 + w1 u / 3
      Var coupling = add(tape.scalar(1.0), scale(w1, u / 3.0));
      Var row0 = tape.concat(std::array{minus_one, zero}, 1);
      Var row1 = tape.concat(std::array{zero, minus_one}, 1);
      Var row2 = tape.concat(std::array{w0, coupling}, 1);
      Var A = tape.concat(std::array{row0, row1, row2}, 0);
      Var b = tape.concat(std::array{scale(w0, 0.2 * u), scale(w1, -0.2 * u),
                                     add(w0, tape.scalar(0.1 * u))},
                          0);
      return {c, A, b};
    }
  }
  throw Error("instantiate: unknown family");
}

Tensor gradient_wrt_w(const Var& w, const Var& loss) {
  GradientMap grads = loss.tape().backward(loss);
  return grads[w];
}

}  // namespace invopt
