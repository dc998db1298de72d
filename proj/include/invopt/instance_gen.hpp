#pragma once

#include "invopt/ipm.hpp"
#include "invopt/models.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace invopt {

using Rng = std::mt19937_64;

/// Independent stream for item `index` of a run seeded with `seed`.
Rng make_rng(std::uint64_t seed, std::uint64_t index = 0);

/// H-representation of a convex hull: A x <= b with unit-norm rows, plus the
/// input points that lie on at least d facets (one vertex per row).
struct Hull {
  Tensor A;
  Tensor b;
  Tensor vertices;
};

/// Exhaustive facet enumeration over all d-subsets of the points (one point
/// per row). Throws Error if the points are not full-dimensional.
Hull hull_facets(const Tensor& points, double tol = 1e-9);

/// Planar hull by monotone chain; same output contract as hull_facets for d=2.
Hull hull_facets_2d(const Tensor& points, double tol = 1e-9);

struct BaselineInstance {
  Eigen::Index d = 0;
  Eigen::Index m = 0;
  Tensor A;
  Tensor b;
  Tensor vertices;
  std::uint64_t seed = 0;
  int points_used = 0;
  std::vector<std::string> warnings;
};

/// Hull of Gaussian points whose facet count is steered towards m.
BaselineInstance baseline_lp(Eigen::Index d, Eigen::Index m, Rng& rng, std::uint64_t seed = 0);

enum class Task { LearnC, LearnCAB, Parametric, TrigDemo };

const char* task_name(Task t);
Task parse_task(std::string_view name);

struct Observation {
  double u = 0.0;
  Tensor x;
  std::string label;
};

struct TaskInstance {
  Task task = Task::LearnC;
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
  Eigen::Index d = 0;
  Eigen::Index m = 0;
  Tensor A;
  Tensor b;
  Tensor vertices;
  std::optional<Tensor> c_ini;
  std::optional<Tensor> c_tru;
  std::vector<Observation> targets;
  std::vector<Observation> test_targets;

  ModelFamily family = ModelFamily::Direct;
  std::optional<Tensor> w_tru;
  Tensor w_ini;
  std::vector<int> masks;
  std::optional<Tensor> c_base;
  double u_min = 0.0;
  double u_max = 0.0;
  std::vector<double> u_train;
  std::vector<double> u_test;
  std::vector<std::string> warnings;

  ParametricModel model() const;
};

/// Settings used to compute targets of generated instances.
IpmSettings target_solver_settings();

TaskInstance make_learn_c(const BaselineInstance& base, Rng& rng);
TaskInstance make_learn_cab(const BaselineInstance& base, Rng& rng);
TaskInstance make_parametric(const BaselineInstance& base, Rng& rng);
TaskInstance make_trig_demo();

/// Generates one instance of `task` as a pure function of (task, d, m, seed, index).
TaskInstance generate(Task task, Eigen::Index d, Eigen::Index m, std::uint64_t seed,
                      std::uint64_t index);

/// Solves the LP with fixed coefficients; returns x or nullopt on failure.
std::optional<Tensor> solve_values(const Tensor& c, const Tensor& A, const Tensor& b,
                                   const IpmSettings& settings);

}  // namespace invopt
