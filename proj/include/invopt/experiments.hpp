#pragma once

#include "invopt/io.hpp"
#include "invopt/learner.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace invopt {

/// Exit codes shared by the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInvalidInput = 2,
  kExitSolveFailure = 3,
  kExitNoImprovement = 4,
};

struct GenOptions {
  Task task = Task::LearnC;
  Eigen::Index d = 2;
  Eigen::Index m = 4;
  int count = 20;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = ".";
};

/// Writes `count` instance files named <task>_d<d>_m<m>_<seed>_<index>.json.
std::vector<std::filesystem::path> cmd_gen(const GenOptions& opts);

/// ε schedule used when the caller does not choose one.
EpsSchedule default_schedule(Task task, LossKind loss);

struct LearnOptions {
  std::optional<LossKind> loss;          // task default when empty
  std::optional<int> hyper_search;       // number of combos; manual hyperparameters otherwise
  std::optional<bool> eps_decay;         // task/loss default when empty
  std::optional<int> truncate;           // Newton steps kept in backprop
  std::uint64_t seed = 0;
  int max_steps = 200;
  int threads = 0;
  HyperParams manual{1.0, 10.0, 1.0, 1.0};
};

struct LearnedTarget {
  ResultRow row;
  HyperParams params;
  LearnResult result;
  std::string target_label;
};

struct LearnOutcome {
  std::vector<LearnedTarget> runs;
  int exit_code = kExitOk;
  std::string diagnostic;
};

/// Learns every target set of the instance (learn-cab instances are learned
/// once per target). Solve failures at the initial weights are reported via
/// exit_code, not thrown.
LearnOutcome cmd_learn(const TaskInstance& inst, const std::string& instance_id, const LearnOptions& opts);

/// JSON record of a learned model.
nlohmann::json learned_to_json(const LearnedTarget& run);

struct SummaryRow {
  std::string task;
  long d = 0;
  long m = 0;
  std::string loss_kind;
  std::size_t count = 0;
  // quartiles {q1, median, q3}
  std::array<double, 3> initial{};
  std::array<double, 3> final_train{};
  std::optional<std::array<double, 3>> final_test;
};

/// Linear-interpolated quantile of a non-empty sample.
double quantile(std::vector<double> values, double q);

std::vector<SummaryRow> cmd_report(const std::vector<ResultRow>& rows);
std::string format_report(const std::vector<SummaryRow>& summary);
std::string summary_csv(const std::vector<SummaryRow>& summary);

struct SurfacePoint {
  double theta = 0.0;
  double eps = 0.0;
  double loss = 0.0;
  bool ok = false;
};

/// Loss as the cost direction sweeps the unit circle, c = (cos θ, sin θ),
/// against the instance's first target. Requires d = 2.
std::vector<SurfacePoint> cmd_loss_surface(const TaskInstance& inst, LossKind loss,
                                           const std::vector<double>& eps_list, int resolution,
                                           const IpmSettings& base = {});
std::string surface_csv(const std::vector<SurfacePoint>& grid);

}  // namespace invopt
