#include "invopt/instance_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace invopt {

Rng make_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

namespace {

struct FacetSet {
  std::vector<Eigen::VectorXd> normals;
  std::vector<double> offsets;

  void insert(const Eigen::VectorXd& a, double beta) {
    for (std::size_t i = 0; i < normals.size(); ++i) {
      if ((normals[i] - a).lpNorm<Eigen::Infinity>() < 1e-7 && std::abs(offsets[i] - beta) < 1e-7) return;
    }
    normals.push_back(a);
    offsets.push_back(beta);
  }
};

Hull assemble(const Tensor& points, const FacetSet& facets, double tol) {
  const auto m = static_cast<Eigen::Index>(facets.normals.size());
  const Eigen::Index d = points.cols();
  Hull h;
  h.A.resize(m, d);
  h.b.resize(m, 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    h.A.row(i) = facets.normals[static_cast<std::size_t>(i)].transpose();
    h.b(i, 0) = facets.offsets[static_cast<std::size_t>(i)];
  }
  const Tensor slack = (points * h.A.transpose()).rowwise() - h.b.col(0).transpose();
  const Eigen::VectorXi on = (slack.array().abs() <= tol).cast<int>().rowwise().sum();
  std::vector<Eigen::Index> vertex_rows;
  for (Eigen::Index p = 0; p < points.rows(); ++p) {
    if (on(p) >= d) vertex_rows.push_back(p);
  }
  h.vertices.resize(static_cast<Eigen::Index>(vertex_rows.size()), d);
  for (std::size_t i = 0; i < vertex_rows.size(); ++i) {
    h.vertices.row(static_cast<Eigen::Index>(i)) = points.row(vertex_rows[i]);
  }
  return h;
}

Tensor sample_points(Rng& rng, Eigen::Index k, Eigen::Index d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor p(k, d);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) p(i, j) = normal(rng);
  }
  return p;
}

}  // namespace

Hull hull_facets(const Tensor& points, double tol) {
  const Eigen::Index k = points.rows();
  const Eigen::Index d = points.cols();
  if (d < 1 || k < d + 1) throw Error("hull_facets: need at least d+1 points");

  FacetSet facets;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(d));
  std::iota(idx.begin(), idx.end(), 0);
  Tensor diffs(d - 1, d);
  bool flat = true;

  while (true) {
    Eigen::VectorXd normal;
    if (d == 1) {
      normal = Eigen::VectorXd::Ones(1);
    } else {
      const auto p0 = points.row(idx[0]);
      for (Eigen::Index r = 1; r < d; ++r) diffs.row(r - 1) = points.row(idx[static_cast<std::size_t>(r)]) - p0;
      Eigen::FullPivLU<Tensor> lu(diffs);
      lu.setThreshold(1e-12);
      if (lu.rank() == d - 1) normal = lu.kernel().col(0).normalized();
    }
    if (normal.size() == d) {
      const double beta = normal.dot(points.row(idx[0]).transpose());
      const Eigen::VectorXd side = points * normal - Eigen::VectorXd::Constant(k, beta);
      const bool below = side.maxCoeff() <= tol;
      const bool above = side.minCoeff() >= -tol;
      if (!(below && above)) flat = false;
      if (below && !above) facets.insert(normal, beta);
      if (above && !below) facets.insert(-normal, -beta);
    }

    // next d-subset in lexicographic order
    Eigen::Index pos = d - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == k - d + pos) --pos;
    if (pos < 0) break;
    ++idx[static_cast<std::size_t>(pos)];
    for (Eigen::Index r = pos + 1; r < d; ++r) {
      idx[static_cast<std::size_t>(r)] = idx[static_cast<std::size_t>(r - 1)] + 1;
    }
  }
  if (flat || facets.normals.size() < static_cast<std::size_t>(d + 1)) {
    throw Error("hull_facets: points are not full-dimensional");
  }
  return assemble(points, facets, tol);
}

Hull hull_facets_2d(const Tensor& points, double tol) {
  if (points.cols() != 2 || points.rows() < 3) throw Error("hull_facets_2d: need at least 3 planar points");
  const auto cross = [&](Eigen::Index o, Eigen::Index a, Eigen::Index b) {
    return (points(a, 0) - points(o, 0)) * (points(b, 1) - points(o, 1)) -
           (points(a, 1) - points(o, 1)) * (points(b, 0) - points(o, 0));
  };

  // Drop points strictly inside the polygon of the eight extreme points in
  // the axis and diagonal directions before sorting.
  std::vector<Eigen::Index> extreme;
  for (const auto& [ux, uy] : {std::pair{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < points.rows(); ++i) {
      if (ux * points(i, 0) + uy * points(i, 1) > ux * points(best, 0) + uy * points(best, 1)) best = i;
    }
    if (extreme.empty() || (extreme.back() != best && extreme.front() != best)) extreme.push_back(best);
  }
  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    bool inside = extreme.size() >= 3;
    for (std::size_t e = 0; inside && e < extreme.size(); ++e) {
      inside = cross(extreme[e], extreme[(e + 1) % extreme.size()], i) > tol;
    }
    if (!inside) order.push_back(i);
  }
  if (order.size() < 3) throw Error("hull_facets_2d: points are not full-dimensional");

  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return points(a, 0) < points(b, 0) || (points(a, 0) == points(b, 0) && points(a, 1) < points(b, 1));
  });
  std::vector<Eigen::Index> chain(2 * order.size());
  std::size_t n = 0;
  for (Eigen::Index i : order) {
    while (n >= 2 && cross(chain[n - 2], chain[n - 1], i) <= 0) --n;
    chain[n++] = i;
  }
  for (std::size_t j = order.size() - 1, lower = n + 1; j-- > 0;) {
    const Eigen::Index i = order[j];
    while (n >= lower && cross(chain[n - 2], chain[n - 1], i) <= 0) --n;
    chain[n++] = i;
  }
  chain.resize(n - 1);  // counter-clockwise, last point repeats the first
  if (chain.size() < 3) throw Error("hull_facets_2d: points are not full-dimensional");

  FacetSet facets;
  for (std::size_t e = 0; e < chain.size(); ++e) {
    const Eigen::Vector2d p = points.row(chain[e]).transpose();
    const Eigen::Vector2d q = points.row(chain[(e + 1) % chain.size()]).transpose();
    const Eigen::Vector2d normal = Eigen::Vector2d(q.y() - p.y(), p.x() - q.x()).normalized();
    facets.insert(normal, normal.dot(p));
  }
  return assemble(points, facets, tol);
}

BaselineInstance baseline_lp(Eigen::Index d, Eigen::Index m, Rng& rng, std::uint64_t seed) {
  if (d < 1 || d > 12 || m < d + 1 || m > 120) throw Error("baseline_lp: unsupported size");

  // Facet counts grow very slowly with the number of sampled points and are
  // noisy. Double k until the count first reaches m, then resample at or
  // below that k rather than chasing the noise upwards.
  Eigen::Index k = d == 2 ? m : d + 2;
  std::optional<Eigen::Index> k_cap;
  std::optional<BaselineInstance> best;
  constexpr int kAttempts = 50;

  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    Tensor pts = sample_points(rng, k, d);
    Hull h;
    try {
      h = d == 2 ? hull_facets_2d(pts) : hull_facets(pts);
    } catch (const Error&) {
      continue;  // affinely dependent sample, draw again
    }
    const Eigen::Index facets = h.A.rows();
    if (!best || std::abs(facets - m) < std::abs(best->m - m)) {
      best = BaselineInstance{d, facets, std::move(h.A), std::move(h.b), std::move(h.vertices), seed,
                              static_cast<int>(k), {}};
    }
    if (facets == m) return *best;
    if (facets > m && !k_cap) k_cap = k;
    if (facets < m) {
      k = k_cap ? std::min(*k_cap, k + k / 4 + 1) : 2 * k;
    } else {
      k = std::max(d + 1, k - k / 5);
    }
  }
  if (!best) throw Error("baseline_lp: could not sample a full-dimensional hull");
  best->warnings.push_back("requested m=" + std::to_string(m) + " but nearest achieved facet count is " +
                           std::to_string(best->m));
  return *best;
}

const char* task_name(Task t) {
  switch (t) {
    case Task::LearnC: return "learn-c";
    case Task::LearnCAB: return "learn-cab";
    case Task::Parametric: return "parametric";
    case Task::TrigDemo: return "trig-demo";
  }
  return "?";
}

Task parse_task(std::string_view name) {
  if (name == "learn-c") return Task::LearnC;
  if (name == "learn-cab") return Task::LearnCAB;
  if (name == "parametric") return Task::Parametric;
  if (name == "trig-demo") return Task::TrigDemo;
  throw Error("unknown task '" + std::string(name) + "'");
}

ParametricModel TaskInstance::model() const {
  switch (family) {
    case ModelFamily::Direct:
      return task == Task::LearnC ? ParametricModel::direct_cost_only(A, b) : ParametricModel::direct(d, m);
    case ModelFamily::LinearShift:
      if (!c_base) throw Error("linear-shift instance lacks a base cost vector");
      return ParametricModel::linear_shift(*c_base, A, b, masks);
    case ModelFamily::TrigDemo:
      return ParametricModel::trig_demo();
  }
  throw Error("unknown model family");
}

IpmSettings target_solver_settings() {
  IpmSettings s;
  s.t0 = 1.0;
  s.mu = 10.0;
  s.eps = 1e-5;
  return s;
}

std::optional<Tensor> solve_values(const Tensor& c, const Tensor& A, const Tensor& b,
                                   const IpmSettings& settings) {
  Tape tape;
  LinearProgram lp{tape.constant(c), tape.constant(A), tape.constant(b)};
  SolveResult r = solve_lp(lp, settings);
  if (!r.ok()) return std::nullopt;
  return r.x->value();
}

namespace {

Tensor normal_vector(Rng& rng, Eigen::Index n, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  Tensor v(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) v(i, 0) = normal(rng);
  return v;
}

Tensor uniform_vector(Rng& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> uni(lo, hi);
  Tensor v(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) v(i, 0) = uni(rng);
  return v;
}

TaskInstance from_baseline(const BaselineInstance& base, Task task) {
  TaskInstance inst;
  inst.task = task;
  inst.seed = base.seed;
  inst.d = base.d;
  inst.m = base.m;
  inst.A = base.A;
  inst.b = base.b;
  inst.vertices = base.vertices;
  inst.warnings = base.warnings;
  return inst;
}

std::optional<Tensor> solve_model(const ParametricModel& model, const Tensor& w, double u,
                                  const IpmSettings& settings) {
  Tape tape;
  LinearProgram lp = model.instantiate(tape.constant(w), u);
  SolveResult r = solve_lp(lp, settings);
  if (!r.ok()) return std::nullopt;
  return r.x->value();
}

}  // namespace

TaskInstance make_learn_c(const BaselineInstance& base, Rng& rng) {
  TaskInstance inst = from_baseline(base, Task::LearnC);
  std::uniform_int_distribution<Eigen::Index> pick(0, base.vertices.rows() - 1);
  const Eigen::Index v = pick(rng);
  inst.targets.push_back({0.0, base.vertices.row(v).transpose(), "vertex"});
  inst.c_ini = normal_vector(rng, base.d);
  inst.family = ModelFamily::Direct;
  inst.w_ini = *inst.c_ini;
  return inst;
}

TaskInstance make_learn_cab(const BaselineInstance& base, Rng& rng) {
  TaskInstance inst = from_baseline(base, Task::LearnCAB);
  const Tensor c = normal_vector(rng, base.d);
  Eigen::Index best = 0;
  (base.vertices * c).col(0).minCoeff(&best);
  const Tensor x_star = base.vertices.row(best).transpose();

  // Dirichlet(1, ..., 1) weights via normalized unit exponentials.
  std::exponential_distribution<double> expo(1.0);
  Eigen::VectorXd weights(base.vertices.rows());
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights(i) = expo(rng);
  weights /= weights.sum();
  const Tensor x_mix = base.vertices.transpose() * weights;
  const Tensor feasible = 0.9 * x_star + 0.1 * x_mix;

  Tensor infeasible;
  for (int tries = 0;; ++tries) {
    infeasible = x_star + uniform_vector(rng, base.d, -0.2, 0.2);
    if (((base.A * infeasible) - base.b).maxCoeff() > 0.0) break;
    if (tries > 10000) throw Error("make_learn_cab: could not draw an infeasible target");
  }

  inst.c_tru = c;
  inst.c_ini = c + uniform_vector(rng, base.d, -0.2, 0.2);
  inst.targets.push_back({0.0, feasible, "feasible"});
  inst.targets.push_back({0.0, infeasible, "infeasible"});
  inst.family = ModelFamily::Direct;
  inst.w_ini = ParametricModel::direct(base.d, base.m).pack(*inst.c_ini, base.A, base.b);
  return inst;
}

TaskInstance make_parametric(const BaselineInstance& base, Rng& rng) {
  TaskInstance inst = from_baseline(base, Task::Parametric);
  inst.family = ModelFamily::LinearShift;
  inst.c_base = normal_vector(rng, base.d);
  std::uniform_int_distribution<int> col(0, static_cast<int>(base.d) - 1);
  inst.masks.resize(static_cast<std::size_t>(base.m));
  for (int& mcol : inst.masks) mcol = col(rng);

  std::normal_distribution<double> slope(0.0, 0.2);
  Tensor w_tru = Tensor::Zero(6, 1);
  for (int i : {1, 3, 5}) w_tru(i, 0) = slope(rng);
  inst.w_tru = w_tru;
  inst.w_ini = w_tru + uniform_vector(rng, 6, -0.2, 0.2);

  const ParametricModel model = inst.model();
  const IpmSettings settings = target_solver_settings();
  if (!solve_model(model, w_tru, 0.0, settings)) {
    throw Error("make_parametric: baseline LP is not solvable at u = 0");
  }

  constexpr int kTrain = 20;
  const auto train_targets = [&](double r) -> std::optional<std::vector<Observation>> {
    std::vector<Observation> obs;
    for (int n = 0; n < kTrain; ++n) {
      const double u = r == 0.0 ? 0.0 : -r + 2.0 * r * n / (kTrain - 1);
      auto x = solve_model(model, w_tru, u, settings);
      if (!x) return std::nullopt;
      obs.push_back({u, *x, "train"});
    }
    return obs;
  };

  // Expand the symmetric range outward while both ends stay solvable.
  std::vector<double> radii = {0.1, 0.2, 0.4, 0.8, 1.0};
  double radius = 0.0;
  std::vector<Observation> train;
  for (double r : radii) {
    if (!solve_model(model, w_tru, r, settings) || !solve_model(model, w_tru, -r, settings)) break;
    auto obs = train_targets(r);
    if (!obs) break;
    radius = r;
    train = std::move(*obs);
  }
  for (double r = 0.05; radius == 0.0 && r > 1e-3; r /= 2.0) {
    if (auto obs = train_targets(r)) {
      radius = r;
      train = std::move(*obs);
    }
  }
  if (radius == 0.0) {
    train = *train_targets(0.0);
    inst.warnings.push_back("no safe feature range around u = 0; training points collapse to u = 0");
  }
  inst.u_min = -radius;
  inst.u_max = radius;
  inst.targets = std::move(train);
  for (const Observation& o : inst.targets) inst.u_train.push_back(o.u);

  // Learning needs a solvable start: redraw the corruption until every training LP solves.
  const auto solvable_everywhere = [&](const Tensor& w) {
    return std::all_of(inst.targets.begin(), inst.targets.end(),
                       [&](const Observation& o) { return solve_model(model, w, o.u, settings).has_value(); });
  };
  int draws = 1;
  while (!solvable_everywhere(inst.w_ini) && draws < 100) {
    inst.w_ini = w_tru + uniform_vector(rng, 6, -0.2, 0.2);
    ++draws;
  }
  if (draws == 100 && !solvable_everywhere(inst.w_ini)) {
    inst.warnings.push_back("w_ini leaves some training LPs unsolvable after 100 draws");
  } else if (draws > 1) {
    inst.warnings.push_back("w_ini redrawn " + std::to_string(draws - 1) + " time(s) for a solvable start");
  }

  std::uniform_real_distribution<double> uni(inst.u_min, std::nextafter(inst.u_max, 2.0));
  while (inst.test_targets.size() < static_cast<std::size_t>(kTrain)) {
    const double u = radius == 0.0 ? 0.0 : std::clamp(uni(rng), inst.u_min, inst.u_max);
    if (auto x = solve_model(model, w_tru, u, settings)) {
      inst.test_targets.push_back({u, *x, "test"});
      inst.u_test.push_back(u);
    }
  }
  return inst;
}

TaskInstance make_trig_demo() {
  TaskInstance inst;
  inst.task = Task::TrigDemo;
  inst.d = 2;
  inst.m = 3;
  inst.A = Tensor(0, 2);
  inst.b = Tensor(0, 1);
  inst.vertices = Tensor(0, 2);
  inst.family = ModelFamily::TrigDemo;
  Tensor w_tru(2, 1);
  w_tru << 1.0, 1.0;
  Tensor w_ini(2, 1);
  w_ini << 0.2, 0.4;
  inst.w_tru = w_tru;
  inst.w_ini = w_ini;
  inst.u_min = -1.5;
  inst.u_max = 1.5;
  const ParametricModel model = ParametricModel::trig_demo();
  for (double u : {-1.5, -0.5, 0.5, 1.5}) {
    auto x = solve_model(model, w_tru, u, target_solver_settings());
    if (!x) throw Error("make_trig_demo: target solve failed");
    inst.targets.push_back({u, *x, "train"});
    inst.u_train.push_back(u);
  }
  return inst;
}

TaskInstance generate(Task task, Eigen::Index d, Eigen::Index m, std::uint64_t seed, std::uint64_t index) {
  if (task == Task::TrigDemo) return make_trig_demo();
  Rng rng = make_rng(seed, index);
  BaselineInstance base = baseline_lp(d, m, rng, seed);
  TaskInstance inst;
  switch (task) {
    case Task::LearnC: inst = make_learn_c(base, rng); break;
    case Task::LearnCAB: inst = make_learn_cab(base, rng); break;
    case Task::Parametric: inst = make_parametric(base, rng); break;
    case Task::TrigDemo: break;
  }
  inst.seed = seed;
  inst.index = index;
  return inst;
}

}  // namespace invopt
