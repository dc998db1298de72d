#pragma once

#include "invopt/instance_gen.hpp"
#include "invopt/ipm.hpp"
#include "invopt/losses.hpp"
#include "invopt/models.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace invopt {

struct EpsSchedule {
  enum class Kind { Constant, ExpDecay };
  Kind kind = Kind::Constant;
  double start = 1e-5;
  double end = 1e-5;

  static EpsSchedule constant(double eps) { return {Kind::Constant, eps, eps}; }
  static EpsSchedule exp_decay(double from = 0.1, double to = 1e-5) { return {Kind::ExpDecay, from, to}; }
};

/// Solver precision at `step` of a run with `max_steps` steps.
double eps_at(int step, int max_steps, const EpsSchedule& schedule);

/// The schedule the learner uses by default for a loss: constant 1e-5 for
/// ADG, exponential decay for SE and MSE.
EpsSchedule default_schedule(LossKind loss);

struct LearnSettings {
  int max_steps = 200;
  /// Per-weight learning rates; must match the model's weight count.
  Tensor alpha;
  EpsSchedule eps_schedule = EpsSchedule::constant(1e-5);
  LossKind loss = LossKind::SE;
  double beta_min = 1e-8;
  double zero_loss = 1e-12;
  double grad_clip = 1e6;
  /// Backpropagate only through the last k Newton steps of each solve.
  std::optional<int> truncate_newton_steps;
  IpmSettings ipm;
};

enum class Termination { MaxSteps, EarlyBetaUnderflow, ZeroLoss, SolveFailure };

const char* termination_name(Termination t);
Termination parse_termination(std::string_view name);

struct StepRecord {
  int step = 0;
  double eps = 0.0;
  double loss = 0.0;  // mean loss at w before the update
  double beta = 0.0;
  double step_norm = 0.0;
};

struct LearnResult {
  Tensor w;
  std::vector<StepRecord> trajectory;
  Termination termination = Termination::MaxSteps;
  /// Mean loss at w_ini and at w_lrn, both at the schedule's final precision.
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int steps_used = 0;
  std::vector<std::string> warnings;
};

/// Thrown when the forward problem cannot be solved at the initial weights.
class BadInitialization : public Error {
 public:
  using Error::Error;
};

struct Evaluation {
  bool ok = false;
  double loss = 0.0;
  Tensor grad;  // mean gradient over observations, empty when not requested
  SolveStatus failure = SolveStatus::Optimal;
};

/// Mean loss (and optionally its gradient) over the observations at w, one
/// fresh tape per observation.
Evaluation evaluate(const ParametricModel& model, const Tensor& w, std::span<const Observation> obs,
                    LossKind loss, const IpmSettings& ipm, bool with_grad,
                    std::optional<int> truncate_newton_steps = std::nullopt);

struct LineSearchResult {
  std::optional<double> beta;  // empty on early termination
  double loss = 0.0;           // trial loss at the accepted beta
  int halvings = 0;
};

/// Returns the mean loss at a trial point, or nullopt if any forward solve
/// failed there.
using TrialLoss = std::function<std::optional<double>(const Tensor&)>;

/// Halves beta from 1 until w - beta*g is solvable with a strictly smaller
/// loss; gives up once beta < beta_min.
LineSearchResult line_search(const Tensor& w, const Tensor& g, double current_loss,
                             const TrialLoss& trial, double beta_min = 1e-8);

LearnResult learn(const ParametricModel& model, const Tensor& w_ini, std::span<const Observation> obs,
                  const LearnSettings& settings);

/// Learning-rate vector for the model from group rates.
Tensor alpha_vector(const ParametricModel& model, double alpha_cost, double alpha_constraint);

struct HyperParams {
  double t0 = 1.0;
  double mu = 10.0;
  double alpha_c = 1.0;
  double alpha_ab = 1.0;
};

struct HyperGrid {
  std::vector<double> t0;
  std::vector<double> mu;
  std::vector<double> alpha_c;
  std::vector<double> alpha_ab;
  /// When set, alpha_c lists factors applied to alpha_ab.
  bool alpha_c_relative = false;

  std::vector<HyperParams> enumerate() const;
  static HyperGrid for_task(Task task);
};

struct HyperRun {
  HyperParams params;
  std::optional<LearnResult> result;
  std::string error;
};

struct HyperSearchResult {
  std::optional<HyperParams> best;
  std::optional<LearnResult> best_result;
  std::vector<HyperRun> runs;
  bool all_failed = false;
};

/// Random search: n_combos grid points drawn without replacement (all of them
/// when the grid is not larger), each learned independently; the run with the
/// smallest final loss wins. `base` supplies everything except t0, mu and alpha.
HyperSearchResult hyper_search(const ParametricModel& model, const Tensor& w_ini,
                               std::span<const Observation> obs, const HyperGrid& grid,
                               const LearnSettings& base, int n_combos, Rng& rng, int threads = 0);

/// Worker count from INVOPT_THREADS, else the hardware concurrency.
int default_threads();

}  // namespace invopt
