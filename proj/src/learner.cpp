#include "invopt/learner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

namespace invopt {

double eps_at(int step, int max_steps, const EpsSchedule& schedule) {
  if (schedule.kind == EpsSchedule::Kind::Constant || max_steps <= 1) return schedule.start;
  const double frac = static_cast<double>(std::clamp(step, 0, max_steps - 1)) / (max_steps - 1);
  if (frac == 1.0) return schedule.end;
  return schedule.start * std::pow(schedule.end / schedule.start, frac);
}

EpsSchedule default_schedule(LossKind loss) {
  return loss == LossKind::ADG ? EpsSchedule::constant(1e-5) : EpsSchedule::exp_decay(0.1, 1e-5);
}

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::MaxSteps: return "max_steps";
    case Termination::EarlyBetaUnderflow: return "beta_underflow";
    case Termination::ZeroLoss: return "zero_loss";
    case Termination::SolveFailure: return "solve_failure";
  }
  return "?";
}

Termination parse_termination(std::string_view name) {
  for (Termination t : {Termination::MaxSteps, Termination::EarlyBetaUnderflow, Termination::ZeroLoss,
                        Termination::SolveFailure}) {
    if (name == termination_name(t)) return t;
  }
  throw Error("unknown termination '" + std::string(name) + "'");
}

Evaluation evaluate(const ParametricModel& model, const Tensor& w, std::span<const Observation> obs,
                    LossKind loss, const IpmSettings& ipm, bool with_grad,
                    std::optional<int> truncate_newton_steps) {
  Evaluation ev;
  if (obs.empty()) throw Error("evaluate: no observations");
  if (!w.allFinite()) {
    ev.failure = SolveStatus::SingularSystem;
    return ev;
  }
  double total = 0.0;
  Tensor grad_sum;
  if (with_grad) grad_sum = Tensor::Zero(w.rows(), w.cols());

  for (const Observation& o : obs) {
    Tape tape;
    Var wv = tape.leaf(w, with_grad);
    LinearProgram lp = model.instantiate(wv, o.u);
    SolveResult r = solve_lp(lp, ipm);
    if (!r.ok()) {
      ev.failure = r.status;
      return ev;
    }
    Var l = loss == LossKind::ADG ? adg(lp.c, *r.x, o.x) : se(*r.x, o.x);
    const double value = l.item();
    if (!std::isfinite(value)) {
      ev.failure = SolveStatus::SingularSystem;
      return ev;
    }
    total += value;
    if (with_grad) {
      if (truncate_newton_steps && *truncate_newton_steps >= 0 &&
          r.step_marks.size() > static_cast<std::size_t>(*truncate_newton_steps)) {
        const std::size_t first = r.step_marks[r.step_marks.size() - static_cast<std::size_t>(*truncate_newton_steps)];
        tape.set_truncation(tape.size() - first, r.setup_end);
      }
      grad_sum += tape.backward(l)[wv];
    }
  }
  const double n = static_cast<double>(obs.size());
  ev.ok = true;
  ev.loss = total / n;
  if (with_grad) ev.grad = grad_sum / n;
  return ev;
}

LineSearchResult line_search(const Tensor& w, const Tensor& g, double current_loss,
                             const TrialLoss& trial, double beta_min) {
  LineSearchResult out;
  double beta = 1.0;
  while (beta >= beta_min) {
    const std::optional<double> l = trial(w - beta * g);
    if (l && *l < current_loss) {
      out.beta = beta;
      out.loss = *l;
      return out;
    }
    beta *= 0.5;
    ++out.halvings;
  }
  return out;
}

Tensor alpha_vector(const ParametricModel& model, double alpha_cost, double alpha_constraint) {
  const std::vector<WeightGroup> groups = model.weight_groups();
  Tensor a(static_cast<Eigen::Index>(groups.size()), 1);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    a(static_cast<Eigen::Index>(i), 0) = groups[i] == WeightGroup::Cost ? alpha_cost : alpha_constraint;
  }
  return a;
}

LearnResult learn(const ParametricModel& model, const Tensor& w_ini, std::span<const Observation> obs,
                  const LearnSettings& settings) {
  if (obs.empty()) throw Error("learn: need at least one observation");
  if (w_ini.rows() != model.weight_count() || w_ini.cols() != 1) throw Error("learn: w_ini has the wrong length");
  if (settings.alpha.rows() != w_ini.rows() || settings.alpha.cols() != 1 ||
      !(settings.alpha.array() > 0.0).all()) {
    throw Error("learn: alpha must be a positive vector matching the weights");
  }
  if (!(settings.beta_min > 0.0) || settings.max_steps < 1) throw Error("learn: invalid settings");

  LearnResult res;
  res.w = w_ini;
  const auto ipm_at = [&](double eps) {
    IpmSettings s = settings.ipm;
    s.eps = eps;
    return s;
  };
  const double final_eps = eps_at(settings.max_steps - 1, settings.max_steps, settings.eps_schedule);

  {
    const Evaluation first = evaluate(model, w_ini, obs, settings.loss, ipm_at(final_eps), false);
    if (!first.ok) {
      throw BadInitialization(std::string("forward solve failed at the initial weights (") +
                              status_name(first.failure) + ")");
    }
    res.initial_loss = first.loss;
  }

  res.termination = Termination::MaxSteps;
  for (int step = 0; step < settings.max_steps; ++step) {
    const double eps = eps_at(step, settings.max_steps, settings.eps_schedule);
    const IpmSettings ipm = ipm_at(eps);
    const Evaluation ev = evaluate(model, res.w, obs, settings.loss, ipm, true, settings.truncate_newton_steps);
    if (!ev.ok) {
      if (step == 0) {
        throw BadInitialization(std::string("forward solve failed at the initial weights (") +
                                status_name(ev.failure) + ")");
      }
      res.termination = Termination::SolveFailure;
      res.warnings.push_back("forward solve failed at accepted weights after precision change (" +
                             std::string(status_name(ev.failure)) + ")");
      break;
    }
    if (ev.loss <= settings.zero_loss) {
      res.termination = Termination::ZeroLoss;
      break;
    }

    Tensor g = settings.alpha.cwiseProduct(ev.grad);
    if (!g.allFinite() || g.lpNorm<Eigen::Infinity>() > settings.grad_clip) {
      const double clip = settings.grad_clip;
      g = g.unaryExpr([clip](double v) { return std::isnan(v) ? 0.0 : std::clamp(v, -clip, clip); });
      res.warnings.push_back("step " + std::to_string(step) + ": gradient clipped");
    }

    const TrialLoss trial = [&](const Tensor& w_try) -> std::optional<double> {
      const Evaluation e = evaluate(model, w_try, obs, settings.loss, ipm, false);
      if (!e.ok) return std::nullopt;
      return e.loss;
    };
    const LineSearchResult ls = line_search(res.w, g, ev.loss, trial, settings.beta_min);
    if (!ls.beta) {
      res.trajectory.push_back({step, eps, ev.loss, 0.0, 0.0});
      res.termination = Termination::EarlyBetaUnderflow;
      break;
    }
    const Tensor delta = *ls.beta * g;
    res.w -= delta;
    res.trajectory.push_back({step, eps, ev.loss, *ls.beta, delta.norm()});
    ++res.steps_used;
  }

  const Evaluation last = evaluate(model, res.w, obs, settings.loss, ipm_at(final_eps), false);
  res.final_loss = last.ok ? last.loss : std::numeric_limits<double>::infinity();
  if (!last.ok) res.warnings.push_back("final evaluation failed");
  return res;
}

std::vector<HyperParams> HyperGrid::enumerate() const {
  std::vector<HyperParams> out;
  const std::vector<double> ab = alpha_ab.empty() ? std::vector<double>{1.0} : alpha_ab;
  for (double t : t0) {
    for (double m : mu) {
      for (double ac : alpha_c) {
        for (double aab : ab) out.push_back({t, m, alpha_c_relative ? ac * aab : ac, aab});
      }
    }
  }
  return out;
}

HyperGrid HyperGrid::for_task(Task task) {
  HyperGrid g;
  g.t0 = {0.5, 1.0, 5.0, 10.0};
  g.mu = {1.5, 2.0, 5.0, 10.0, 20.0};
  switch (task) {
    case Task::LearnC:
      g.alpha_c = {1.0, 10.0, 100.0, 1000.0};
      g.alpha_ab = {1.0};
      break;
    case Task::LearnCAB:
      g.alpha_c = {0.1, 1.0, 10.0};
      g.alpha_ab = {0.1, 1.0, 10.0};
      break;
    case Task::Parametric:
      g.alpha_ab = {1.0, 10.0};
      g.alpha_c = {0.01, 1.0, 100.0};
      g.alpha_c_relative = true;
      break;
    case Task::TrigDemo:
      g.alpha_c = {0.1, 1.0, 10.0};
      g.alpha_ab = {1.0};
      break;
  }
  return g;
}

int default_threads() {
  if (const char* env = std::getenv("INVOPT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

HyperSearchResult hyper_search(const ParametricModel& model, const Tensor& w_ini,
                               std::span<const Observation> obs, const HyperGrid& grid,
                               const LearnSettings& base, int n_combos, Rng& rng, int threads) {
  std::vector<HyperParams> combos = grid.enumerate();
  if (combos.empty()) throw Error("hyper_search: empty grid");
  if (n_combos < static_cast<int>(combos.size())) {
    std::shuffle(combos.begin(), combos.end(), rng);
    combos.resize(static_cast<std::size_t>(std::max(n_combos, 1)));
  }

  HyperSearchResult out;
  out.runs.resize(combos.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < combos.size(); i = next++) {
      HyperRun& run = out.runs[i];
      run.params = combos[i];
      LearnSettings s = base;
      s.ipm.t0 = combos[i].t0;
      s.ipm.mu = combos[i].mu;
      s.alpha = alpha_vector(model, combos[i].alpha_c, combos[i].alpha_ab);
      try {
        run.result = learn(model, w_ini, obs, s);
      } catch (const std::exception& e) {
        run.error = e.what();
      }
    }
  };

  const int n_threads = std::clamp(threads > 0 ? threads : default_threads(), 1,
                                   static_cast<int>(combos.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  for (const HyperRun& run : out.runs) {
    if (!run.result) continue;
    if (!out.best_result || run.result->final_loss < out.best_result->final_loss) {
      out.best = run.params;
      out.best_result = run.result;
    }
  }
  out.all_failed = !out.best_result;
  return out;
}

}  // namespace invopt
