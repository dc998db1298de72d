#include "invopt/ipm.hpp"

#include <cmath>
#include <limits>

namespace invopt {

namespace {

// Phase one returns once the shared slack certifies at least this margin.
constexpr double kPhaseOneMargin = 1e-9;
// Phase one is declared infeasible once its duality gap falls below this
// without reaching the margin above.
constexpr double kPhaseOneGapFloor = 1e-12;
// Backtracking that shrinks the step below this is treated as stalled.
constexpr double kMinStep = 1e-14;

}  // namespace

void LinearProgram::validate() const {
  const Tensor& cv = c.value();
  const Tensor& Av = A.value();
  const Tensor& bv = b.value();
  if (cv.cols() != 1 || bv.cols() != 1 || cv.rows() < 1 || bv.rows() < 1 ||
      Av.rows() != bv.rows() || Av.cols() != cv.rows()) {
    throw ShapeError("LinearProgram: inconsistent shapes c(" + std::to_string(cv.rows()) + "x" +
                     std::to_string(cv.cols()) + ") A(" + std::to_string(Av.rows()) + "x" +
                     std::to_string(Av.cols()) + ") b(" + std::to_string(bv.rows()) + "x" +
                     std::to_string(bv.cols()) + ")");
  }
  if (&c.tape() != &A.tape() || &c.tape() != &b.tape()) {
    throw Error("LinearProgram: c, A and b must share one tape");
  }
}

void IpmSettings::validate() const {
  if (!(t0 > 0.0)) throw Error("IpmSettings: t0 must be positive");
  if (!(mu > 1.0)) throw Error("IpmSettings: mu must exceed 1");
  if (!(eps > 0.0)) throw Error("IpmSettings: eps must be positive");
  if (max_newton < 1 || max_outer < 1) throw Error("IpmSettings: iteration caps must be positive");
}

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::SingularSystem: return "singular";
  }
  return "?";
}

double barrier_objective(const Tensor& c, const Tensor& A, const Tensor& b, const Tensor& x, double t) {
  const Eigen::VectorXd slack = b.col(0) - A * x.col(0);
  if (!(slack.minCoeff() > 0.0)) return std::numeric_limits<double>::infinity();
  return t * c.col(0).dot(x.col(0)) - slack.array().log().sum();
}

CenteringResult newton_centering(const Var& x_start, double t, const LinearProgram& lp, const Var& At,
                                 const IpmSettings& settings, std::optional<double> stop_below) {
  Tape& tape = lp.c.tape();
  const Tensor& cv = lp.c.value();
  const Tensor& Av = lp.A.value();
  const Tensor& bv = lp.b.value();
  const Eigen::Index d = cv.rows();

  CenteringResult out{x_start, SolveStatus::Optimal, 0, false, {}, {}};
  Var x = x_start;
  out.objective.push_back(barrier_objective(cv, Av, bv, x.value(), t));
  int full_steps = 0;

  for (int k = 0;; ++k) {
    if (k == settings.max_newton) {
      out.hit_cap = true;
      break;
    }
    const std::size_t mark = tape.size();

    Var slack = sub(lp.b, matvec(lp.A, x));
    Var inv = reciprocal(slack);
    Var grad = add(scale(lp.c, t), matvec(At, inv));
    Var hess = matmul(At, row_scale(lp.A, square(inv)));

    std::optional<Var> dir;
    try {
      dir = linear_solve(hess, grad);
    } catch (const SingularSystem&) {
      try {
        Var ridged = add(hess, tape.constant(settings.ridge * Tensor::Identity(d, d)));
        dir = linear_solve(ridged, grad);
      } catch (const SingularSystem&) {
        out.status = SolveStatus::SingularSystem;
        out.x = x;
        return out;
      }
    }

    const Tensor& g = grad.value();
    const Tensor& newton = dir->value();
    const double decrement = g.col(0).dot(newton.col(0));
    if (!std::isfinite(decrement) || decrement < -1e-12 * (1.0 + g.squaredNorm())) {
      out.status = SolveStatus::SingularSystem;
      out.x = x;
      return out;
    }
    if (0.5 * decrement <= settings.newton_tol) break;

    // Backtracking on values only; the accepted step length enters the tape as
    // a constant.
    const Tensor& xv = x.value();
    const Tensor dx = -newton;
    double step = 1.0;
    const auto interior = [&](double s) {
      return ((Av * (xv + s * dx)).col(0) - bv.col(0)).maxCoeff() < 0.0;
    };
    while (!interior(step)) {
      step *= settings.backtrack;
      if (step < kMinStep) {
        out.status = SolveStatus::SingularSystem;
        out.x = x;
        return out;
      }
    }
    const double f0 = out.objective.back();
    const double slope = -decrement;
    bool stalled = false;
    while (barrier_objective(cv, Av, bv, xv + step * dx, t) > f0 + settings.armijo * step * slope) {
      step *= settings.backtrack;
      if (step < kMinStep) {
        stalled = true;
        break;
      }
    }
    if (stalled) break;

    x = sub(x, scale(*dir, step));
    out.step_marks.push_back(mark);
    ++out.steps;
    out.objective.push_back(barrier_objective(cv, Av, bv, x.value(), t));

    full_steps = step == 1.0 ? full_steps + 1 : 0;
    if (full_steps >= settings.max_full_steps ||
        x.value().lpNorm<Eigen::Infinity>() > settings.unbounded_norm) {
      out.status = SolveStatus::Unbounded;
      out.x = x;
      return out;
    }
    if (stop_below && x.value()(x.rows() - 1, 0) < *stop_below) break;
  }
  out.x = x;
  return out;
}

PhaseOneResult phase_one(const Var& A, const Var& b, const IpmSettings& settings) {
  Tape& tape = A.tape();
  const Eigen::Index m = A.rows();
  const Eigen::Index d = A.cols();

  Var aux_A = tape.concat(std::array{A, tape.constant(-Tensor::Ones(m, 1))}, 1);
  Tensor e = Tensor::Zero(d + 1, 1);
  e(d, 0) = 1.0;
  LinearProgram aux{tape.constant(e), aux_A, b};
  Var aux_At = transpose(aux_A);

  Tensor z0 = Tensor::Zero(d + 1, 1);
  z0(d, 0) = (-b.value()).maxCoeff() + 1.0;
  Var z = tape.constant(z0);

  PhaseOneResult out;
  const auto finish = [&](const Var& zf) {
    out.status = SolveStatus::Optimal;
    out.x0 = settings.record_phase_one ? tape.slice(zf, 0, 0, d, 1)
                                       : tape.constant(zf.value().topRows(d));
    return out;
  };

  double t = settings.t0;
  for (int stage = 0; stage < settings.max_outer; ++stage) {
    CenteringResult cr = newton_centering(z, t, aux, aux_At, settings, -1.0);
    out.newton_steps += cr.steps;
    const double s = cr.x.value()(d, 0);
    if (cr.status == SolveStatus::Unbounded) {
      // The slack ran off to -inf, so the region has plenty of interior.
      if (s < -kPhaseOneMargin) return finish(cr.x);
      out.status = SolveStatus::Infeasible;
      return out;
    }
    if (cr.status != SolveStatus::Optimal) {
      out.status = cr.status;
      return out;
    }
    z = cr.x;
    if (s < -kPhaseOneMargin) return finish(z);
    const double gap = static_cast<double>(m) / t;
    if (s - gap > 0.0 || gap < kPhaseOneGapFloor) {
      out.status = SolveStatus::Infeasible;
      return out;
    }
    t *= settings.mu;
  }
  out.status = SolveStatus::Infeasible;
  return out;
}

SolveResult solve_lp(const LinearProgram& lp, const IpmSettings& settings) {
  settings.validate();
  lp.validate();
  Tape& tape = lp.c.tape();

  SolveResult res;
  Var At = transpose(lp.A);
  res.setup_end = tape.size();

  PhaseOneResult start = phase_one(lp.A, lp.b, settings);
  res.newton_steps = start.newton_steps;
  if (start.status != SolveStatus::Optimal) {
    res.status = start.status;
    return res;
  }

  const double m = static_cast<double>(lp.m());
  Var x = *start.x0;
  double t = settings.t0;
  for (int stage = 1; stage <= settings.max_outer; ++stage) {
    CenteringResult cr = newton_centering(x, t, lp, At, settings);
    res.stages = stage;
    res.newton_steps += cr.steps;
    res.step_marks.insert(res.step_marks.end(), cr.step_marks.begin(), cr.step_marks.end());
    res.x = cr.x;
    res.t_final = t;
    if (cr.status != SolveStatus::Optimal) {
      res.status = cr.status;
      return res;
    }
    res.warning = res.warning || cr.hit_cap;
    x = cr.x;
    res.centers.push_back(x.value());
    if (m / t <= settings.eps) {
      res.status = SolveStatus::Optimal;
      return res;
    }
    t *= settings.mu;
  }
  res.warning = true;
  res.status = SolveStatus::SingularSystem;
  return res;
}

}  // namespace invopt
