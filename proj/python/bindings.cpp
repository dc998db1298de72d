#include "invopt/experiments.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace invopt;

namespace {

IpmSettings settings_from(double eps, double t0, double mu) {
  IpmSettings s;
  s.eps = eps;
  s.t0 = t0;
  s.mu = mu;
  s.validate();
  return s;
}

py::dict solve(const Tensor& c, const Tensor& A, const Tensor& b, double eps, double t0, double mu) {
  Tape tape;
  SolveResult r = solve_lp({tape.constant(c), tape.constant(A), tape.constant(b)}, settings_from(eps, t0, mu));
  py::dict out;
  out["status"] = status_name(r.status);
  out["x"] = r.ok() ? py::cast(Tensor(r.x->value())) : py::none();
  out["stages"] = r.stages;
  out["newton_steps"] = r.newton_steps;
  return out;
}

// Loss at the solution and its gradient with respect to c, A and b.
py::dict loss_and_grad(const Tensor& c, const Tensor& A, const Tensor& b, const Tensor& x_tru,
                       const std::string& loss, double eps) {
  const LossKind kind = parse_loss(loss);
  if (kind == LossKind::MSE) throw Error("loss_and_grad: use 'se' or 'adg' for a single target");
  Tape tape;
  Var cv = tape.leaf(c, true), Av = tape.leaf(A, true), bv = tape.leaf(b, true);
  SolveResult r = solve_lp({cv, Av, bv}, settings_from(eps, 1.0, 10.0));
  if (!r.ok()) throw Error(std::string("loss_and_grad: solve failed: ") + status_name(r.status));
  Var l = kind == LossKind::ADG ? adg(cv, *r.x, x_tru) : se(*r.x, x_tru);
  const GradientMap g = tape.backward(l);
  py::dict out;
  out["x"] = Tensor(r.x->value());
  out["loss"] = l.item();
  out["grad_c"] = g[cv];
  out["grad_A"] = g[Av];
  out["grad_b"] = g[bv];
  return out;
}

std::string generate_json(const std::string& task, Eigen::Index d, Eigen::Index m, std::uint64_t seed,
                          std::uint64_t index) {
  return dump_instance(generate(parse_task(task), d, m, seed, index));
}

std::vector<std::string> learn_json(const std::string& instance, std::optional<std::string> loss,
                                    std::optional<int> hyper_search, int max_steps, std::uint64_t seed) {
  LearnOptions opts;
  if (loss) opts.loss = parse_loss(*loss);
  opts.hyper_search = hyper_search;
  opts.max_steps = max_steps;
  opts.seed = seed;
  opts.threads = 1;
  LearnOutcome out;
  {
    py::gil_scoped_release release;
    out = cmd_learn(instance_from_json(nlohmann::json::parse(instance)), "python", opts);
  }
  if (out.exit_code != kExitOk && out.runs.empty()) throw Error("learn: " + out.diagnostic);
  std::vector<std::string> records;
  for (const LearnedTarget& run : out.runs) records.push_back(learned_to_json(run).dump());
  return records;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Differentiable LP solver and inverse-optimization learner";
  py::register_exception<Error>(m, "InvoptError", PyExc_ValueError);

  m.def("solve_lp", &solve, py::arg("c"), py::arg("A"), py::arg("b"), py::arg("eps") = 1e-5,
        py::arg("t0") = 1.0, py::arg("mu") = 10.0, "Solve min c'x s.t. Ax <= b with the barrier method.");
  m.def("loss_and_grad", &loss_and_grad, py::arg("c"), py::arg("A"), py::arg("b"), py::arg("x_tru"),
        py::arg("loss") = "se", py::arg("eps") = 1e-5);
  m.def("generate", &generate_json, py::arg("task"), py::arg("d"), py::arg("m"), py::arg("seed") = 0,
        py::arg("index") = 0, "Instance as a JSON string.");
  m.def("trig_demo", [] { return dump_instance(make_trig_demo()); });
  m.def("learn", &learn_json, py::arg("instance"), py::arg("loss") = py::none(),
        py::arg("hyper_search") = py::none(), py::arg("max_steps") = 200, py::arg("seed") = 0,
        "Learn from a JSON instance; one JSON record per learned target.");
}
