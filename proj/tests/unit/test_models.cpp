#include "invopt/instance_gen.hpp"
#include "invopt/losses.hpp"
#include "invopt/models.hpp"

#include "../support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace invopt;

namespace {

Tensor vec(std::initializer_list<double> xs) {
  Tensor t(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) t(i++, 0) = x;
  return t;
}

ParametricModel random_shift_model(Rng& rng, Eigen::Index d, Eigen::Index m) {
  std::normal_distribution<double> n01;
  Tensor c0(d, 1), A0(m, d), b0(m, 1);
  for (Eigen::Index i = 0; i < c0.size(); ++i) c0(i) = n01(rng);
  for (Eigen::Index i = 0; i < A0.size(); ++i) A0(i) = n01(rng);
  for (Eigen::Index i = 0; i < b0.size(); ++i) b0(i) = std::abs(n01(rng)) + 1.0;
  std::vector<int> masks(static_cast<std::size_t>(m));
  std::uniform_int_distribution<int> col(0, static_cast<int>(d) - 1);
  for (int& k : masks) k = col(rng);
  return ParametricModel::linear_shift(c0, A0, b0, masks);
}

}  // namespace

TEST(Models, FamilyNames) {
  for (ModelFamily f : {ModelFamily::Direct, ModelFamily::LinearShift, ModelFamily::TrigDemo}) {
    EXPECT_EQ(parse_family(family_name(f)), f);
  }
  EXPECT_THROW(parse_family("quadratic"), Error);
}

TEST(Models, DirectReshape) {
  const ParametricModel model = ParametricModel::direct(2, 4);
  ASSERT_EQ(model.weight_count(), 14);
  Tensor w(14, 1);
  for (int i = 0; i < 14; ++i) w(i) = i + 1;
  Tape tape;
  LinearProgram lp = model.instantiate(tape.leaf(w, true), 0.3);
  EXPECT_EQ(lp.c.value(), vec({1, 2}));
  Tensor A(4, 2);
  A << 3, 4, 5, 6, 7, 8, 9, 10;
  EXPECT_EQ(lp.A.value(), A);
  EXPECT_EQ(lp.b.value(), vec({11, 12, 13, 14}));
  EXPECT_EQ(model.pack(lp.c.value(), A, lp.b.value()), w);
  const auto groups = model.weight_groups();
  EXPECT_EQ(std::count(groups.begin(), groups.end(), WeightGroup::Cost), 2);
}

TEST(Models, WrongWeightLength) {
  Tape tape;
  EXPECT_THROW(ParametricModel::direct(2, 4).instantiate(tape.leaf(Tensor::Zero(13, 1), true), 0.0), Error);
  EXPECT_THROW(ParametricModel::trig_demo().instantiate(tape.leaf(Tensor::Zero(3, 1), true), 0.0), Error);
}

TEST(Models, LinearShiftZeroWeightsReproduceBase) {
  Rng rng = make_rng(4);
  const ParametricModel model = random_shift_model(rng, 3, 5);
  for (double u : {-1.0, -0.3, 0.0, 0.7}) {
    Tape tape;
    LinearProgram lp = model.instantiate(tape.leaf(Tensor::Zero(6, 1), true), u);
    EXPECT_EQ(lp.c.value(), model.base_c());
    EXPECT_EQ(lp.A.value(), model.base_A());
    EXPECT_EQ(lp.b.value(), model.base_b());
  }
  // Only the odd weights nonzero: u = 0 still gives the base LP.
  Tape tape;
  LinearProgram lp = model.instantiate(tape.leaf(vec({0, 0.3, 0, -0.2, 0, 0.1}), true), 0.0);
  EXPECT_EQ(lp.A.value(), model.base_A());
  EXPECT_EQ(lp.b.value(), model.base_b());
}

TEST(Models, LinearShiftMaskedEntries) {
  Rng rng = make_rng(9);
  const ParametricModel model = random_shift_model(rng, 3, 4);
  Tape tape;
  const double u = 0.5;
  LinearProgram lp = model.instantiate(tape.leaf(vec({0.1, 0.2, 0.3, 0.4, 0.5, 0.6}), true), u);
  const Tensor dA = lp.A.value() - model.base_A();
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double expected = j == model.masks()[static_cast<std::size_t>(i)] ? 0.3 + 0.4 * u : 0.0;
      EXPECT_NEAR(dA(i, j), expected, 1e-15);
    }
  }
  EXPECT_TRUE((lp.c.value() - model.base_c()).isApprox(Tensor::Constant(3, 1, 0.1 + 0.2 * u)));
  EXPECT_TRUE((lp.b.value() - model.base_b()).isApprox(Tensor::Constant(4, 1, 0.5 + 0.6 * u)));
}

TEST(Models, TrigDemoSubstitution) {
  Tape tape;
  LinearProgram lp = ParametricModel::trig_demo().instantiate(tape.leaf(vec({1, 1}), true), 0.5);
  EXPECT_NEAR(lp.c.value()(0), std::cos(1.5), 1e-15);
  EXPECT_NEAR(lp.c.value()(1), std::sin(1.5), 1e-15);
  Tensor A(3, 2);
  A << -1, 0, 0, -1, 1, 7.0 / 6.0;
  EXPECT_TRUE(lp.A.value().isApprox(A, 1e-15));
  EXPECT_TRUE(lp.b.value().isApprox(vec({0.1, -0.1, 1.05}), 1e-15));
}

TEST(Models, DirectGradientIsConcatenation) {
  Rng rng = make_rng(2);
  const BaselineInstance base = baseline_lp(2, 4, rng);
  const Tensor c = vec({0.6, -0.8});
  const Tensor x_tru = base.vertices.row(0).transpose();
  IpmSettings s;
  s.eps = 0.1;

  const ParametricModel model = ParametricModel::direct(2, 4);
  Tape t1;
  Var w = t1.leaf(model.pack(c, base.A, base.b), true);
  SolveResult r1 = solve_lp(model.instantiate(w, 0.0), s);
  ASSERT_TRUE(r1.ok());
  const Tensor gw = gradient_wrt_w(w, se(*r1.x, x_tru));

  Tape t2;
  Var cv = t2.leaf(c, true), Av = t2.leaf(base.A, true), bv = t2.leaf(base.b, true);
  SolveResult r2 = solve_lp({cv, Av, bv}, s);
  const GradientMap g = t2.backward(se(*r2.x, x_tru));
  const Tensor expected = model.pack(g[cv], g[Av], g[bv]);
  EXPECT_LT((gw - expected).norm(), 1e-9 * (1.0 + expected.norm()));
}

TEST(Models, LinearShiftCostChainRule) {
  Rng rng = make_rng(21);
  const BaselineInstance base = baseline_lp(2, 6, rng);
  const ParametricModel model =
      ParametricModel::linear_shift(vec({0.3, -1.0}), base.A, base.b, std::vector<int>{0, 1, 0, 1, 0, 1});
  const Tensor w = vec({0.05, 0.1, 0.0, 0.02, 0.0, -0.03});
  const double u = 0.4;
  const Tensor x_tru = base.vertices.row(1).transpose();
  IpmSettings s;
  s.eps = 0.1;

  Tape t1;
  Var wv = t1.leaf(w, true);
  LinearProgram lp = model.instantiate(wv, u);
  SolveResult r1 = solve_lp(lp, s);
  ASSERT_TRUE(r1.ok());
  const Tensor gw = gradient_wrt_w(wv, se(*r1.x, x_tru));

  Tape t2;
  Var cv = t2.leaf(lp.c.value(), true);
  SolveResult r2 = solve_lp({cv, t2.constant(lp.A.value()), t2.constant(lp.b.value())}, s);
  const Tensor gc = t2.backward(se(*r2.x, x_tru))[cv];
  EXPECT_NEAR(gw(1), u * gc.sum(), 1e-9 * (1.0 + std::abs(gw(1))));
  EXPECT_NEAR(gw(0), gc.sum(), 1e-9 * (1.0 + std::abs(gw(0))));
}

TEST(Models, TrigDemoGradientMatchesFiniteDifferences) {
  const TaskInstance demo = make_trig_demo();
  const ParametricModel model = demo.model();
  IpmSettings s;
  s.eps = 0.1;
  Rng rng = make_rng(17);
  std::uniform_real_distribution<double> uw(0.3, 1.2), uu(-1.5, 1.5);
  int checked = 0;
  for (int trial = 0; trial < 40 && checked < 10; ++trial) {
    const Tensor w = vec({uw(rng), uw(rng)});
    const double u = uu(rng);
    const Tensor x_tru = demo.targets[static_cast<std::size_t>(trial) % demo.targets.size()].x;
    const auto loss_at = [&](const Tensor& ww) {
      Tape t;
      SolveResult r = solve_lp(model.instantiate(t.constant(ww), u), s);
      if (!r.ok()) throw Error("unsolvable");
      return (r.x->value() - x_tru).squaredNorm();
    };
    Tape tape;
    Var wv = tape.leaf(w, true);
    SolveResult r = solve_lp(model.instantiate(wv, u), s);
    if (!r.ok()) continue;
    Tensor fd;
    try {
      fd = oracle::central_diff(loss_at, w);
    } catch (const Error&) {
      continue;
    }
    EXPECT_LT(oracle::max_rel_err(gradient_wrt_w(wv, se(*r.x, x_tru)), fd), 1e-4);
    ++checked;
  }
  EXPECT_EQ(checked, 10);
}

TEST(ModelsProperty, SlackAffineInFeature) {
  Rng rng = make_rng(33);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    const ParametricModel model = random_shift_model(rng, 3, 6);
    Tensor w(6, 1), x(3, 1);
    for (int i = 0; i < 6; ++i) w(i) = n01(rng);
    for (int i = 0; i < 3; ++i) x(i) = n01(rng);
    const auto slack = [&](double u) {
      Tape t;
      LinearProgram lp = model.instantiate(t.constant(w), u);
      return Tensor(lp.b.value() - lp.A.value() * x);
    };
    const double u1 = -0.8, u2 = 0.6, lam = 0.3;
    const Tensor interp = (1 - lam) * slack(u1) + lam * slack(u2);
    EXPECT_TRUE(slack((1 - lam) * u1 + lam * u2).isApprox(interp, 1e-12));
  }
}

TEST(ModelsProperty, InstantiateDeterministic) {
  Rng rng = make_rng(1);
  const ParametricModel model = random_shift_model(rng, 2, 4);
  Tape t1, t2;
  const Tensor w = vec({0.1, -0.2, 0.3, 0.4, -0.5, 0.6});
  LinearProgram a = model.instantiate(t1.constant(w), 0.25);
  LinearProgram b = model.instantiate(t2.constant(w), 0.25);
  EXPECT_EQ(a.c.value(), b.c.value());
  EXPECT_EQ(a.A.value(), b.A.value());
  EXPECT_EQ(a.b.value(), b.b.value());
  EXPECT_EQ(t1.size(), t2.size());
}
