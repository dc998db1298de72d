#include "invopt/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

namespace invopt {

namespace fs = std::filesystem;

std::vector<fs::path> cmd_gen(const GenOptions& opts) {
  if (opts.count < 1) throw Error("gen: count must be positive");
  fs::create_directories(opts.out_dir);
  std::vector<fs::path> written;
  for (int i = 0; i < opts.count; ++i) {
    TaskInstance inst = generate(opts.task, opts.d, opts.m, opts.seed, static_cast<std::uint64_t>(i));
    std::ostringstream name;
    name << task_name(opts.task) << "_d" << inst.d << "_m" << inst.m << "_" << opts.seed << "_" << i << ".json";
    const fs::path path = opts.out_dir / name.str();
    write_instance(path, inst);
    written.push_back(path);
  }
  return written;
}

EpsSchedule default_schedule(Task task, LossKind loss) {
  // Parametric runs use a fixed tight precision.
  if (task == Task::Parametric) return EpsSchedule::constant(1e-5);
  return default_schedule(loss);
}

namespace {

double evaluate_test(const ParametricModel& model, const Tensor& w, const std::vector<Observation>& test,
                     LossKind loss, const LearnSettings& settings) {
  IpmSettings ipm = settings.ipm;
  ipm.eps = eps_at(settings.max_steps - 1, settings.max_steps, settings.eps_schedule);
  const Evaluation ev = evaluate(model, w, test, loss, ipm, false);
  return ev.ok ? ev.loss : std::numeric_limits<double>::infinity();
}

}  // namespace

LearnOutcome cmd_learn(const TaskInstance& inst, const std::string& instance_id, const LearnOptions& opts) {
  const bool parametric = inst.task == Task::Parametric || inst.task == Task::TrigDemo;
  const LossKind loss = opts.loss.value_or(parametric ? LossKind::MSE : LossKind::SE);
  if (loss == LossKind::MSE && !parametric) {
    throw Error("learn: mse needs a batch of observations; use se or adg for " +
                std::string(task_name(inst.task)));
  }
  EpsSchedule schedule = default_schedule(inst.task, loss);
  if (opts.eps_decay) schedule = *opts.eps_decay ? EpsSchedule::exp_decay() : EpsSchedule::constant(1e-5);

  const ParametricModel model = inst.model();
  LearnSettings base;
  base.max_steps = opts.max_steps;
  base.loss = loss;
  base.eps_schedule = schedule;
  base.truncate_newton_steps = opts.truncate;

  std::vector<std::vector<Observation>> target_sets;
  if (inst.task == Task::LearnCAB) {
    for (const Observation& o : inst.targets) target_sets.push_back({o});
  } else {
    target_sets.push_back(inst.targets);
  }

  LearnOutcome out;
  bool any_improved = false;
  for (std::size_t k = 0; k < target_sets.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<Observation>& obs = target_sets[k];
    const std::string label = inst.task == Task::LearnCAB ? obs.front().label : std::string();

    LearnedTarget run;
    run.target_label = label;
    if (opts.hyper_search) {
      Rng rng = make_rng(opts.seed, k);
      HyperSearchResult hs = hyper_search(model, inst.w_ini, obs, HyperGrid::for_task(inst.task), base,
                                          *opts.hyper_search, rng, opts.threads);
      if (hs.all_failed) {
        out.exit_code = kExitSolveFailure;
        out.diagnostic = "every hyperparameter combination failed: " + hs.runs.front().error;
        return out;
      }
      run.params = *hs.best;
      run.result = std::move(*hs.best_result);
    } else {
      LearnSettings s = base;
      s.ipm.t0 = opts.manual.t0;
      s.ipm.mu = opts.manual.mu;
      s.alpha = alpha_vector(model, opts.manual.alpha_c, opts.manual.alpha_ab);
      run.params = opts.manual;
      try {
        run.result = learn(model, inst.w_ini, obs, s);
      } catch (const BadInitialization& e) {
        out.exit_code = kExitSolveFailure;
        out.diagnostic = e.what();
        return out;
      }
    }

    ResultRow& row = run.row;
    row.instance_id = label.empty() ? instance_id : instance_id + ":" + label;
    row.task = task_name(inst.task);
    row.d = static_cast<long>(inst.d);
    row.m = static_cast<long>(inst.m);
    row.loss_kind = loss_name(loss);
    row.t0 = run.params.t0;
    row.mu = run.params.mu;
    row.alpha_c = run.params.alpha_c;
    row.alpha_ab = run.params.alpha_ab;
    row.truncate = opts.truncate.value_or(-1);
    row.initial_loss = run.result.initial_loss;
    row.final_train_loss = run.result.final_loss;
    if (!inst.test_targets.empty()) {
      LearnSettings s = base;
      s.ipm.t0 = run.params.t0;
      s.ipm.mu = run.params.mu;
      row.final_test_loss = evaluate_test(model, run.result.w, inst.test_targets, loss, s);
    }
    row.steps_used = run.result.steps_used;
    row.termination = termination_name(run.result.termination);
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    any_improved = any_improved || run.result.termination != Termination::EarlyBetaUnderflow ||
                   run.result.final_loss < run.result.initial_loss;
    out.runs.push_back(std::move(run));
  }
  if (!any_improved) {
    out.exit_code = kExitNoImprovement;
    out.diagnostic = "line search terminated early without improving the loss";
  }
  return out;
}

nlohmann::json learned_to_json(const LearnedTarget& run) {
  nlohmann::json j;
  j["instance_id"] = run.row.instance_id;
  j["task"] = run.row.task;
  j["loss"] = run.row.loss_kind;
  if (!run.target_label.empty()) j["target"] = run.target_label;
  j["hyper"] = {{"t0", run.params.t0}, {"mu", run.params.mu}, {"alpha_c", run.params.alpha_c},
                {"alpha_ab", run.params.alpha_ab}};
  j["w_lrn"] = std::vector<double>(run.result.w.data(), run.result.w.data() + run.result.w.size());
  j["initial_loss"] = run.result.initial_loss;
  j["final_train_loss"] = run.result.final_loss;
  if (run.row.final_test_loss) j["final_test_loss"] = *run.row.final_test_loss;
  j["termination"] = termination_name(run.result.termination);
  j["steps_used"] = run.result.steps_used;
  nlohmann::json traj = nlohmann::json::array();
  for (const StepRecord& s : run.result.trajectory) {
    traj.push_back({{"step", s.step}, {"eps", s.eps}, {"loss", s.loss}, {"beta", s.beta}, {"step_norm", s.step_norm}});
  }
  j["trajectory"] = std::move(traj);
  j["warnings"] = run.result.warnings;
  return j;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<SummaryRow> cmd_report(const std::vector<ResultRow>& rows) {
  using Key = std::tuple<std::string, long, long, std::string>;
  std::map<Key, std::vector<const ResultRow*>> groups;
  for (const ResultRow& r : rows) groups[{r.task, r.d, r.m, r.loss_kind}].push_back(&r);

  const auto quartiles = [](const std::vector<double>& v) {
    return std::array<double, 3>{quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75)};
  };
  std::vector<SummaryRow> out;
  for (const auto& [key, members] : groups) {
    SummaryRow s;
    std::tie(s.task, s.d, s.m, s.loss_kind) = key;
    s.count = members.size();
    std::vector<double> ini, fin, test;
    for (const ResultRow* r : members) {
      ini.push_back(r->initial_loss);
      fin.push_back(r->final_train_loss);
      if (r->final_test_loss) test.push_back(*r->final_test_loss);
    }
    s.initial = quartiles(ini);
    s.final_train = quartiles(fin);
    if (!test.empty()) s.final_test = quartiles(test);
    out.push_back(std::move(s));
  }
  return out;
}

std::string format_report(const std::vector<SummaryRow>& summary) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-11s %3s %4s %-4s %5s  %-32s %-32s %-32s\n", "task", "d", "m", "loss", "n",
                "initial (q1/median/q3)", "final train (q1/median/q3)", "final test (q1/median/q3)");
  os << line;
  const auto trio = [](const std::array<double, 3>& q) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2e/%.2e/%.2e", q[0], q[1], q[2]);
    return std::string(buf);
  };
  for (const SummaryRow& s : summary) {
    std::snprintf(line, sizeof line, "%-11s %3ld %4ld %-4s %5zu  %-32s %-32s %-32s\n", s.task.c_str(), s.d, s.m,
                  s.loss_kind.c_str(), s.count, trio(s.initial).c_str(), trio(s.final_train).c_str(),
                  s.final_test ? trio(*s.final_test).c_str() : "-");
    os << line;
  }
  return os.str();
}

std::string summary_csv(const std::vector<SummaryRow>& summary) {
  std::ostringstream os;
  os << "task,d,m,loss_kind,count,initial_q1,initial_median,initial_q3,final_train_q1,final_train_median,"
        "final_train_q3,final_test_q1,final_test_median,final_test_q3\n";
  for (const SummaryRow& s : summary) {
    os << s.task << ',' << s.d << ',' << s.m << ',' << s.loss_kind << ',' << s.count;
    for (double v : s.initial) os << ',' << format_double(v);
    for (double v : s.final_train) os << ',' << format_double(v);
    for (int i = 0; i < 3; ++i) os << ',' << (s.final_test ? format_double((*s.final_test)[i]) : std::string());
    os << '\n';
  }
  return os.str();
}

std::vector<SurfacePoint> cmd_loss_surface(const TaskInstance& inst, LossKind loss,
                                           const std::vector<double>& eps_list, int resolution,
                                           const IpmSettings& base) {
  if (inst.d != 2) throw Error("loss-surface: only d = 2 instances are supported");
  if (inst.A.rows() == 0) throw Error("loss-surface: instance has no fixed feasible region");
  if (resolution < 2) throw Error("loss-surface: resolution must be at least 2");
  if (eps_list.empty()) throw Error("loss-surface: need at least one precision");
  const Observation& target = inst.targets.front();

  std::vector<SurfacePoint> grid;
  for (double eps : eps_list) {
    IpmSettings s = base;
    s.eps = eps;
    for (int i = 0; i < resolution; ++i) {
      const double theta = 2.0 * std::numbers::pi * i / resolution;
      Tape tape;
      Tensor c(2, 1);
      c << std::cos(theta), std::sin(theta);
      LinearProgram lp{tape.constant(c), tape.constant(inst.A), tape.constant(inst.b)};
      SolveResult r = solve_lp(lp, s);
      SurfacePoint p{theta, eps, std::numeric_limits<double>::quiet_NaN(), r.ok()};
      if (r.ok()) p.loss = (loss == LossKind::ADG ? adg(lp.c, *r.x, target.x) : se(*r.x, target.x)).item();
      grid.push_back(p);
    }
  }
  return grid;
}

std::string surface_csv(const std::vector<SurfacePoint>& grid) {
  std::ostringstream os;
  os << "theta,eps,loss,status\n";
  for (const SurfacePoint& p : grid) {
    os << format_double(p.theta) << ',' << format_double(p.eps) << ','
       << (p.ok ? format_double(p.loss) : std::string()) << ',' << (p.ok ? "ok" : "failed") << '\n';
  }
  return os.str();
}

}  // namespace invopt
