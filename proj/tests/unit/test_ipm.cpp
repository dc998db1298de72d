#include "invopt/instance_gen.hpp"
#include "invopt/ipm.hpp"
#include "invopt/losses.hpp"

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

Tensor box_A() {
  Tensor A(4, 2);
  A << -1, 0, 0, -1, 1, 0, 0, 1;
  return A;
}
Tensor box_b() { return vec({0, 0, 1, 1}); }

SolveResult solve_const(Tape& tape, const Tensor& c, const Tensor& A, const Tensor& b, const IpmSettings& s) {
  return solve_lp({tape.constant(c), tape.constant(A), tape.constant(b)}, s);
}

Tensor random_unit(Rng& rng) {
  std::normal_distribution<double> n01;
  Tensor c(2, 1);
  c << n01(rng), n01(rng);
  return c / c.norm();
}

}  // namespace

TEST(Ipm, UnitBoxVertices) {
  Tape tape;
  IpmSettings s;
  SolveResult r = solve_const(tape, vec({1, 1}), box_A(), box_b(), s);
  ASSERT_TRUE(r.ok());
  EXPECT_NEAR(r.x->value()(0), 0.0, 1e-4);
  EXPECT_NEAR(r.x->value()(1), 0.0, 1e-4);

  Tape tape2;
  SolveResult r2 = solve_const(tape2, vec({-1, -1}), box_A(), box_b(), s);
  ASSERT_TRUE(r2.ok());
  EXPECT_NEAR(r2.x->value()(0), 1.0, 1e-4);
  EXPECT_NEAR(r2.x->value()(1), 1.0, 1e-4);
}

TEST(Ipm, RandomHullMatchesVertexOracle) {
  Rng rng = make_rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const BaselineInstance base = baseline_lp(2, 6, rng);
    const Tensor c = random_unit(rng);
    IpmSettings s;
    Tape tape;
    SolveResult r = solve_const(tape, c, base.A, base.b, s);
    ASSERT_TRUE(r.ok()) << status_name(r.status);
    const auto opt = oracle::lp_optimum_2d(c, base.A, base.b);
    ASSERT_TRUE(opt.has_value());
    const double obj = c.col(0).dot(r.x->value().col(0));
    EXPECT_LE(obj - *opt, s.eps * (1.0 + std::abs(*opt)));
    EXPECT_GE(obj - *opt, -1e-9);
    // Certified gap and strict feasibility.
    EXPECT_LE(base.m / r.t_final, s.eps);
    EXPECT_LT((base.A * r.x->value() - base.b).maxCoeff(), 0.0);
  }
}

TEST(Ipm, ValidateRejectsBadSettingsAndShapes) {
  IpmSettings s;
  s.mu = 1.0;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.t0 = 0.0;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.eps = -1.0;
  EXPECT_THROW(s.validate(), Error);

  Tape tape;
  LinearProgram lp{tape.constant(vec({1, 1, 1})), tape.constant(box_A()), tape.constant(box_b())};
  EXPECT_THROW(lp.validate(), ShapeError);
  EXPECT_THROW(solve_lp(lp, IpmSettings{}), ShapeError);
}

TEST(PhaseOne, BoxInterior) {
  Tape tape;
  PhaseOneResult p = phase_one(tape.constant(box_A()), tape.constant(box_b()), IpmSettings{});
  ASSERT_EQ(p.status, SolveStatus::Optimal);
  EXPECT_LT((box_A() * p.x0->value() - box_b()).maxCoeff(), -1e-9);
}

TEST(PhaseOne, EmptyRegionIsInfeasible) {
  Tape tape;
  Tensor A(2, 1);
  A << 1, -1;
  PhaseOneResult p = phase_one(tape.constant(A), tape.constant(vec({0, -1})), IpmSettings{});
  EXPECT_EQ(p.status, SolveStatus::Infeasible);
  EXPECT_FALSE(p.x0.has_value());

  Tape tape2;
  SolveResult r = solve_const(tape2, vec({1}), A, vec({0, -1}), IpmSettings{});
  EXPECT_EQ(r.status, SolveStatus::Infeasible);
  EXPECT_FALSE(r.x.has_value());
}

TEST(PhaseOne, HullPolytopeStrictlyFeasible) {
  Rng rng = make_rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const BaselineInstance base = baseline_lp(trial % 2 ? 2 : 3, trial % 2 ? 8 : 10, rng);
    Tape tape;
    PhaseOneResult p = phase_one(tape.constant(base.A), tape.constant(base.b), IpmSettings{});
    ASSERT_EQ(p.status, SolveStatus::Optimal);
    EXPECT_LT((base.A * p.x0->value() - base.b).maxCoeff(), 0.0);
  }
}

TEST(Ipm, UnboundedDetected) {
  Tensor A(2, 2);
  A << 0, 1, 0, -1;
  Tape tape;
  SolveResult r = solve_const(tape, vec({1, 0}), A, vec({1, 1}), IpmSettings{});
  EXPECT_EQ(r.status, SolveStatus::Unbounded);
}

TEST(Ipm, DegenerateDirectionIsSignalledNotThrown) {
  // x2 does not appear in any constraint: the Newton matrix is singular.
  Tensor A(2, 2);
  A << 1, 0, -1, 0;
  Tape tape;
  SolveResult r;
  ASSERT_NO_THROW(r = solve_const(tape, vec({0, 1}), A, vec({1, 1}), IpmSettings{}));
  EXPECT_NE(r.status, SolveStatus::Optimal);
}

TEST(Centering, AnalyticCenterOfBox) {
  for (double t : {0.1, 1.0, 10.0}) {
    Tape tape;
    LinearProgram lp{tape.constant(vec({0, 0})), tape.constant(box_A()), tape.constant(box_b())};
    Var At = transpose(lp.A);
    CenteringResult c = newton_centering(tape.constant(vec({0.2, 0.7})), t, lp, At, IpmSettings{});
    ASSERT_EQ(c.status, SolveStatus::Optimal);
    EXPECT_NEAR(c.x.value()(0), 0.5, 1e-6);
    EXPECT_NEAR(c.x.value()(1), 0.5, 1e-6);
  }
  // Gradient tc + A'delta vanishes at the center when c = 0.
  const Tensor x = vec({0.5, 0.5});
  const Tensor delta = (box_b() - box_A() * x).cwiseInverse();
  EXPECT_NEAR((box_A().transpose() * delta).norm(), 0.0, 1e-15);
}

TEST(Centering, ObjectiveDecreasesMonotonically) {
  Rng rng = make_rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const BaselineInstance base = baseline_lp(2, 6, rng);
    const Tensor c = random_unit(rng);
    Tape tape;
    LinearProgram lp{tape.constant(c), tape.constant(base.A), tape.constant(base.b)};
    PhaseOneResult p = phase_one(lp.A, lp.b, IpmSettings{});
    ASSERT_TRUE(p.x0);
    CenteringResult cr = newton_centering(*p.x0, 50.0, lp, transpose(lp.A), IpmSettings{});
    ASSERT_EQ(cr.status, SolveStatus::Optimal);
    ASSERT_GE(cr.objective.size(), 2u);
    for (std::size_t k = 1; k < cr.objective.size(); ++k) EXPECT_LE(cr.objective[k], cr.objective[k - 1]);
  }
}

TEST(CentralPath, BoxTraceAndStageCount) {
  for (double t0 : {0.5, 1.0, 5.0}) {
    for (double mu : {1.5, 2.0, 10.0, 20.0}) {
      IpmSettings s;
      s.t0 = t0;
      s.mu = mu;
      Tape tape;
      SolveResult r = central_path_trace({tape.constant(vec({1, 1})), tape.constant(box_A()), tape.constant(box_b())}, s);
      ASSERT_TRUE(r.ok());
      ASSERT_FALSE(r.centers.empty());
      // Objective moves monotonically toward the vertex (0, 0).
      for (std::size_t k = 1; k < r.centers.size(); ++k) {
        EXPECT_LE(r.centers[k].sum(), r.centers[k - 1].sum() + 1e-12);
      }
      for (const Tensor& x : r.centers) EXPECT_LT((box_A() * x - box_b()).maxCoeff(), 0.0);
      EXPECT_EQ(r.centers.back(), r.x->value());
      const double expected = std::ceil(std::log(4.0 / (s.eps * t0)) / std::log(mu));
      EXPECT_LE(std::abs(r.stages - expected), 1.0) << "t0=" << t0 << " mu=" << mu;
    }
  }
}

TEST(CentralPath, OuterObjectiveNonIncreasingOnRandomInstances) {
  Rng rng = make_rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const BaselineInstance base = baseline_lp(2, 8, rng);
    const Tensor c = random_unit(rng);
    Tape tape;
    SolveResult r = solve_const(tape, c, base.A, base.b, IpmSettings{});
    ASSERT_TRUE(r.ok());
    for (std::size_t k = 1; k < r.centers.size(); ++k) {
      EXPECT_LE(c.col(0).dot(r.centers[k].col(0)), c.col(0).dot(r.centers[k - 1].col(0)) + 1e-9);
    }
  }
}

namespace {

struct GradCase {
  Tensor c, A, b, x_tru;
};

// Non-degenerate d=2 instances with a vertex target other than the current optimum.
std::vector<GradCase> gradient_suite(int count, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::vector<GradCase> out;
  while (static_cast<int>(out.size()) < count) {
    const BaselineInstance base = baseline_lp(2, 6, rng);
    const Tensor c = random_unit(rng);
    if (oracle::vertex_gap_2d(c, base.A, base.b) <= 1e-3) continue;
    std::uniform_int_distribution<Eigen::Index> pick(0, base.vertices.rows() - 1);
    out.push_back({c, base.A, base.b, base.vertices.row(pick(rng)).transpose()});
  }
  return out;
}

double se_value(const Tensor& c, const Tensor& A, const Tensor& b, const Tensor& x_tru, const IpmSettings& s) {
  Tape tape;
  SolveResult r = solve_const(tape, c, A, b, s);
  if (!r.ok()) throw Error("solve failed in finite difference");
  return (r.x->value() - x_tru).squaredNorm();
}

}  // namespace

TEST(IpmGradient, SeMatchesFiniteDifferencesAtLowPrecision) {
  IpmSettings s;
  s.eps = 0.1;
  for (const GradCase& g : gradient_suite(20, 99)) {
    Tape tape;
    Var c = tape.leaf(g.c, true);
    Var A = tape.leaf(g.A, true);
    Var b = tape.leaf(g.b, true);
    SolveResult r = solve_lp({c, A, b}, s);
    ASSERT_TRUE(r.ok());
    const GradientMap grads = tape.backward(se(*r.x, g.x_tru));
    const auto fc = [&](const Tensor& cc) { return se_value(cc, g.A, g.b, g.x_tru, s); };
    const auto fA = [&](const Tensor& AA) { return se_value(g.c, AA, g.b, g.x_tru, s); };
    const auto fb = [&](const Tensor& bb) { return se_value(g.c, g.A, bb, g.x_tru, s); };
    EXPECT_LT(oracle::max_rel_err(grads[c], oracle::central_diff(fc, g.c)), 1e-3);
    EXPECT_LT(oracle::max_rel_err(grads[A], oracle::central_diff(fA, g.A)), 1e-3);
    EXPECT_LT(oracle::max_rel_err(grads[b], oracle::central_diff(fb, g.b)), 1e-3);
  }
}

TEST(IpmGradient, LastTenNewtonStepsAgreeWithFullGradient) {
  IpmSettings s;
  s.eps = 0.1;
  for (const GradCase& g : gradient_suite(20, 123)) {
    Tape tape;
    Var c = tape.leaf(g.c, true);
    SolveResult r = solve_lp({c, tape.constant(g.A), tape.constant(g.b)}, s);
    ASSERT_TRUE(r.ok());
    Var loss = se(*r.x, g.x_tru);
    const Tensor full = tape.backward(loss)[c];
    ASSERT_GE(r.step_marks.size(), 10u);
    const std::size_t mark = r.step_marks[r.step_marks.size() - 10];
    tape.set_truncation(tape.size() - mark, r.setup_end);
    const Tensor trunc = tape.backward(loss)[c];
    EXPECT_LE((trunc - full).norm(), 0.05 * full.norm());
  }
}

TEST(IpmGradient, PhaseOneRecordingFlag) {
  const GradCase g = gradient_suite(1, 3).front();
  IpmSettings s;
  s.eps = 0.1;
  Tape t1, t2;
  Var b1 = t1.leaf(g.b, true);
  Var b2 = t2.leaf(g.b, true);
  SolveResult r1 = solve_lp({t1.constant(g.c), t1.constant(g.A), b1}, s);
  s.record_phase_one = false;
  SolveResult r2 = solve_lp({t2.constant(g.c), t2.constant(g.A), b2}, s);
  ASSERT_TRUE(r1.ok() && r2.ok());
  EXPECT_EQ(r1.x->value(), r2.x->value());
  // Phase one still runs on the tape but is detached, so backward skips it.
  const Tensor target = r1.x->value() + Tensor::Constant(r1.x->rows(), 1, 0.1);
  const double f1 = t1.counters().backward, f2 = t2.counters().backward;
  t1.backward(se(*r1.x, target));
  t2.backward(se(*r2.x, target));
  EXPECT_LT(t2.counters().backward - f2, t1.counters().backward - f1);
}
