#pragma once

#include "invopt/tape.hpp"

#include <optional>
#include <string>
#include <vector>

namespace invopt {

/// minimize c'x subject to A x <= b, with every coefficient living on a tape.
struct LinearProgram {
  Var c;  // d x 1
  Var A;  // m x d
  Var b;  // m x 1

  Eigen::Index d() const { return c.rows(); }
  Eigen::Index m() const { return b.rows(); }
  /// Throws ShapeError when the three blocks disagree.
  void validate() const;
};

struct IpmSettings {
  double t0 = 1.0;
  double mu = 10.0;
  double eps = 1e-5;
  /// Centering stops once half the squared Newton decrement drops below this.
  double newton_tol = 1e-10;
  int max_newton = 100;
  int max_outer = 200;
  double unbounded_norm = 1e8;
  double armijo = 0.25;
  double backtrack = 0.5;
  /// Consecutive full Newton steps after which centering is declared unbounded.
  int max_full_steps = 50;
  /// Ridge added to the Newton matrix after a failed factorization.
  double ridge = 1e-10;
  /// When false the phase-one start point enters the tape as a constant.
  bool record_phase_one = true;

  void validate() const;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, SingularSystem };

const char* status_name(SolveStatus s);

struct SolveResult {
  std::optional<Var> x;
  SolveStatus status = SolveStatus::SingularSystem;
  int stages = 0;
  int newton_steps = 0;
  double t_final = 0.0;
  /// A Newton or stage cap was hit but the gap certificate still holds.
  bool warning = false;
  /// Tape size once the solver's own setup nodes are recorded; nodes before
  /// this index are the problem data and its preparation.
  std::size_t setup_end = 0;
  /// Tape index at the start of every main-phase Newton step that moved x.
  std::vector<std::size_t> step_marks;
  /// Center reached at the end of each stage.
  std::vector<Tensor> centers;

  bool ok() const { return status == SolveStatus::Optimal; }
};

/// Barrier interior-point method with phase-one start, recorded on the tape
/// that owns lp. Failures are reported through status, never thrown.
SolveResult solve_lp(const LinearProgram& lp, const IpmSettings& settings);

/// Same computation as solve_lp; the per-stage centers are in result.centers.
inline SolveResult central_path_trace(const LinearProgram& lp, const IpmSettings& settings) {
  return solve_lp(lp, settings);
}

struct PhaseOneResult {
  std::optional<Var> x0;
  SolveStatus status = SolveStatus::Infeasible;
  int newton_steps = 0;
};

/// Finds a strictly feasible point of A x <= b by minimizing a shared slack.
PhaseOneResult phase_one(const Var& A, const Var& b, const IpmSettings& settings);

struct CenteringResult {
  Var x;
  SolveStatus status = SolveStatus::Optimal;
  int steps = 0;
  bool hit_cap = false;
  /// Barrier objective t c'x - sum log(b - A x) at each iterate, start included.
  std::vector<double> objective;
  /// Tape index at the start of each step that moved x.
  std::vector<std::size_t> step_marks;
};

/// Damped Newton minimization of the barrier objective at sharpness t,
/// starting from the strictly feasible x. `At` must hold A transposed.
/// If `stop_below` is set, centering also stops once the last coordinate of
/// x falls below it (used by phase one).
CenteringResult newton_centering(const Var& x, double t, const LinearProgram& lp, const Var& At,
                                 const IpmSettings& settings,
                                 std::optional<double> stop_below = std::nullopt);

/// Plain barrier objective value; +inf outside the strict interior.
double barrier_objective(const Tensor& c, const Tensor& A, const Tensor& b, const Tensor& x, double t);

}  // namespace invopt
