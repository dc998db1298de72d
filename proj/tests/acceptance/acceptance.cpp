// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.
#include "invopt/experiments.hpp"

#include "../support/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <set>
#include <string>
#include <vector>

using namespace invopt;

namespace {

// Seeds fixed before any run.
constexpr std::uint64_t kSeedForward = 1001;
constexpr std::uint64_t kSeedGradient = 2002;
constexpr std::uint64_t kSeedLearnC = 3003;
constexpr std::uint64_t kSeedLearnCab = 4004;
constexpr std::uint64_t kSeedParametric = 5005;
constexpr std::uint64_t kSeedParametric10 = 6006;

constexpr int kLearnCabCombos = 20;
constexpr int kParametricCombos = 4;
constexpr int kParametric10Seeds = 5;
constexpr int kParametric10Combos = 3;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

Tensor random_unit(Rng& rng) {
  std::normal_distribution<double> n01;
  Tensor c(2, 1);
  c << n01(rng), n01(rng);
  return c / c.norm();
}

Outcome forward_solver(double budget) {
  const auto t0 = Clock::now();
  Rng rng = make_rng(kSeedForward);
  const std::array<Eigen::Index, 3> sizes{4, 8, 16};
  int passed = 0;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const BaselineInstance base = baseline_lp(2, sizes[static_cast<std::size_t>(i % 3)], rng);
    const Tensor c = random_unit(rng);
    const double opt = *oracle::lp_optimum_2d(c, base.A, base.b);
    Tape tape;
    SolveResult r = solve_lp({tape.constant(c), tape.constant(base.A), tape.constant(base.b)}, IpmSettings{});
    if (!r.ok()) continue;
    const double err = std::abs(c.col(0).dot(r.x->value().col(0)) - opt) / (1.0 + std::abs(opt));
    worst = std::max(worst, err);
    if (err <= 1e-5) ++passed;
  }
  const double secs = seconds_since(t0);
  return {passed == 100 && secs < budget,
          std::to_string(passed) + "/100 within tolerance, worst scaled gap " + fmt("%.2e", worst)};
}

// Autodiff gradient of the mean loss w.r.t. w against central differences.
struct GradProbe {
  ParametricModel model;
  Tensor w;
  std::vector<Observation> obs;
  LossKind loss;
};

std::optional<double> probe_error(const GradProbe& p, const IpmSettings& s) {
  const Evaluation ev = evaluate(p.model, p.w, p.obs, p.loss, s, true);
  if (!ev.ok) return std::nullopt;
  bool failed = false;
  const auto f = [&](const Tensor& w) {
    const Evaluation e = evaluate(p.model, w, p.obs, p.loss, s, false);
    if (!e.ok) failed = true;
    return e.loss;
  };
  const Tensor fd = oracle::central_diff(f, p.w);
  if (failed) return std::nullopt;
  return oracle::max_rel_err(ev.grad, fd);
}

Outcome gradient_fidelity(double budget) {
  const auto t0 = Clock::now();
  IpmSettings s;
  s.eps = 0.1;
  Rng rng = make_rng(kSeedGradient);
  std::string detail;
  bool all = true;

  const auto run_family = [&](const std::string& name, const std::function<GradProbe(int)>& make) {
    int checked = 0, ok = 0;
    double worst = 0.0;
    for (int k = 0; k < 100 && checked < 20; ++k) {
      const auto err = probe_error(make(k), s);
      if (!err) continue;  // degenerate: a perturbed solve failed
      ++checked;
      worst = std::max(worst, *err);
      if (*err < 1e-3) ++ok;
    }
    all = all && checked == 20 && ok == 20;
    detail += name + " " + std::to_string(ok) + "/" + std::to_string(checked) + " (worst " + fmt("%.1e", worst) + ") ";
  };

  run_family("learn-c", [&](int k) {
    const TaskInstance inst = generate(Task::LearnC, 2, 6, kSeedGradient, static_cast<std::uint64_t>(k));
    return GradProbe{inst.model(), inst.w_ini, inst.targets, LossKind::SE};
  });
  run_family("learn-cab", [&](int k) {
    const TaskInstance inst = generate(Task::LearnCAB, 2, 6, kSeedGradient, static_cast<std::uint64_t>(k));
    return GradProbe{inst.model(), inst.w_ini, {inst.targets.front()}, LossKind::SE};
  });
  run_family("parametric", [&](int k) {
    const TaskInstance inst = generate(Task::Parametric, 2, 6, kSeedGradient, static_cast<std::uint64_t>(k));
    std::vector<Observation> obs(inst.targets.begin(), inst.targets.begin() + 3);
    return GradProbe{inst.model(), inst.w_ini, obs, LossKind::MSE};
  });
  const TaskInstance demo = make_trig_demo();
  run_family("trig-demo", [&](int) {
    std::uniform_real_distribution<double> uw(0.2, 1.2);
    Tensor w(2, 1);
    w << uw(rng), uw(rng);
    return GradProbe{demo.model(), w, demo.targets, LossKind::MSE};
  });
  const double secs = seconds_since(t0);
  return {all && secs < budget, detail};
}

Outcome trig_demo(double budget) {
  const auto t0 = Clock::now();
  const TaskInstance demo = make_trig_demo();
  const Evaluation init = evaluate(demo.model(), demo.w_ini, demo.targets, LossKind::MSE, IpmSettings{}, false);
  const LearnOutcome out = cmd_learn(demo, "trig-demo", LearnOptions{});
  const double secs = seconds_since(t0);
  if (out.exit_code != kExitOk || out.runs.empty()) return {false, "learn failed: " + out.diagnostic};
  const LearnedTarget& run = out.runs.front();
  const Tensor& w = run.result.w;
  const bool ok = init.ok && std::abs(init.loss - 0.45) <= 0.02 && run.result.final_loss < 1e-3 &&
                  std::abs(w(0) - 1.0) <= 0.05 && std::abs(w(1) - 1.0) <= 0.05;
  return {ok && secs < budget, "initial MSE " + fmt("%.4f", init.loss) + ", final " +
                                   fmt("%.2e", run.result.final_loss) + ", w_lrn [" + fmt("%.4f", w(0)) +
                                   ", " + fmt("%.4f", w(1)) + "]"};
}

double classical_adg_at(const TaskInstance& inst, const Tensor& w) {
  Tape tape;
  LinearProgram lp = inst.model().instantiate(tape.constant(w), 0.0);
  SolveResult r = solve_lp(lp, IpmSettings{});
  if (!r.ok()) return std::nan("");
  return adg_classical(lp.c, *r.x, inst.targets.front().x).item();
}

Outcome learn_c(double budget) {
  const auto t0 = Clock::now();
  int hits_adg = 0, hits_se = 0;
  std::vector<double> classical;
  for (int s = 0; s < 20; ++s) {
    const TaskInstance inst = generate(Task::LearnC, 2, 4, kSeedLearnC, static_cast<std::uint64_t>(s));
    LearnOptions opts;
    opts.hyper_search = 20;
    opts.seed = kSeedLearnC + static_cast<std::uint64_t>(s);
    opts.loss = LossKind::ADG;
    const LearnOutcome adg_run = cmd_learn(inst, "c", opts);
    if (adg_run.exit_code == kExitOk && adg_run.runs.front().result.final_loss < 1e-4) ++hits_adg;
    if (!adg_run.runs.empty()) classical.push_back(classical_adg_at(inst, adg_run.runs.front().result.w));
    opts.loss = LossKind::SE;
    const LearnOutcome se_run = cmd_learn(inst, "c", opts);
    if (se_run.exit_code == kExitOk && se_run.runs.front().result.final_loss < 1e-4) ++hits_se;
  }
  const double secs = seconds_since(t0);
  std::printf("  info: classical ADG after the ADG runs, median %.2e\n", classical.empty() ? NAN : median(classical));
  return {hits_adg >= 18 && hits_se >= 18 && secs < budget,
          "ADG " + std::to_string(hits_adg) + "/20, SE " + std::to_string(hits_se) + "/20 below 1e-4"};
}

Outcome learn_cab(double budget) {
  const auto t0 = Clock::now();
  std::vector<double> adg_losses, se_losses;
  for (int s = 0; s < 20; ++s) {
    const TaskInstance inst = generate(Task::LearnCAB, 2, 8, kSeedLearnCab, static_cast<std::uint64_t>(s));
    LearnOptions opts;
    opts.hyper_search = kLearnCabCombos;
    opts.seed = kSeedLearnCab + static_cast<std::uint64_t>(s);
    for (LossKind k : {LossKind::ADG, LossKind::SE}) {
      opts.loss = k;
      const LearnOutcome out = cmd_learn(inst, "cab", opts);
      auto& sink = k == LossKind::ADG ? adg_losses : se_losses;
      for (const LearnedTarget& run : out.runs) sink.push_back(run.result.final_loss);
      // A target that could not be learned at all counts as a failure.
      for (std::size_t i = out.runs.size(); i < inst.targets.size(); ++i) sink.push_back(INFINITY);
    }
  }
  const double secs = seconds_since(t0);
  const double med_adg = median(adg_losses), med_se = median(se_losses);
  return {med_adg < 1e-4 && med_se < 1e-4 && secs < budget,
          "median ADG " + fmt("%.2e", med_adg) + ", median SE " + fmt("%.2e", med_se) + " over " +
              std::to_string(se_losses.size()) + " targets"};
}

Outcome parametric(double budget) {
  const auto t0 = Clock::now();
  std::vector<double> train, test;
  for (int s = 0; s < 10; ++s) {
    const TaskInstance inst = generate(Task::Parametric, 2, 8, kSeedParametric, static_cast<std::uint64_t>(s));
    LearnOptions opts;
    opts.hyper_search = kParametricCombos;
    opts.seed = kSeedParametric + static_cast<std::uint64_t>(s);
    const LearnOutcome out = cmd_learn(inst, "p2", opts);
    if (out.runs.empty()) {
      train.push_back(INFINITY);
      test.push_back(INFINITY);
      continue;
    }
    train.push_back(out.runs.front().row.final_train_loss);
    test.push_back(out.runs.front().row.final_test_loss.value_or(INFINITY));
  }
  const double med_train = median(train), med_test = median(test);

  std::vector<double> ratios;
  for (int s = 0; s < kParametric10Seeds; ++s) {
    const TaskInstance inst = generate(Task::Parametric, 10, 36, kSeedParametric10, static_cast<std::uint64_t>(s));
    LearnOptions opts;
    opts.hyper_search = kParametric10Combos;
    opts.seed = kSeedParametric10 + static_cast<std::uint64_t>(s);
    const LearnOutcome out = cmd_learn(inst, "p10", opts);
    if (out.runs.empty()) {
      ratios.push_back(1.0);
      continue;
    }
    const LearnResult& r = out.runs.front().result;
    ratios.push_back(r.final_loss > 0.0 ? r.initial_loss / r.final_loss : INFINITY);
  }
  const double med_ratio = median(ratios);
  const double secs = seconds_since(t0);
  const bool ok = med_train < 1e-3 && med_test <= 10.0 * med_train && med_ratio >= 10.0;
  return {ok && secs < budget, "d=2 median train " + fmt("%.2e", med_train) + ", test " + fmt("%.2e", med_test) +
                                   "; d=10 median improvement " + fmt("%.1f", med_ratio) + "x"};
}

Outcome property_suites(double budget) {
  const auto t0 = Clock::now();
  const std::string filter =
      "LossesProperty.*:LineSearch.*:LearnProperty.*:HullProperty.*:InstanceIo.RoundTripIsByteIdentical:"
      "Evaluate.TruncatedGradientCloseToFull:IpmGradient.LastTenNewtonStepsAgreeWithFullGradient";
  const std::string cmd = std::string(INVOPT_UNIT_TESTS_PATH) + " --gtest_brief=1 --gtest_filter='" + filter + "'";
  const int rc = std::system(cmd.c_str());
  const double secs = seconds_since(t0);
  return {rc == 0 && secs < budget, "unit binary filtered to property suites, exit " + std::to_string(rc)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  Outcome (*run)(double);
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "forward solver vs vertex oracle", 10, forward_solver},
      {2, "gradient fidelity vs finite differences", 60, gradient_fidelity},
      {3, "trig demo reproduction", 60, trig_demo},
      {4, "learn-c best of 20", 15 * 60, learn_c},
      {5, "joint c,A,b", 30 * 60, learn_cab},
      {6, "parametric", 45 * 60, parametric},
      {7, "property suites", 600, property_suites},
  };
  std::set<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : all) {
    if (!chosen.empty() && !chosen.contains(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run(c.budget_s);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    std::printf("%s criterion %d (%s): %s [%.1f s, budget %.0f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_s);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
