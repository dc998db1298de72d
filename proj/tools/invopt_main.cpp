// invopt: generate instances, learn LP parameters, summarize results, emit loss surfaces.
#include "invopt/experiments.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

namespace {

using namespace invopt;

int write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) {
    std::cerr << "error: cannot write " << path << "\n";
    return kExitInvalidInput;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse optimization of linear programs through an unrolled barrier solver"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate task instances");
  std::string gen_task = "learn-c";
  GenOptions gen_opts;
  bool gen_full = false;
  std::string gen_out = ".";
  auto* count_opt = gen->add_option("--count", gen_opts.count, "Number of instances (default 20)");
  gen->add_option("--task", gen_task, "learn-c | learn-cab | parametric | trig-demo")->required();
  gen->add_option("--d", gen_opts.d, "Number of variables")->check(CLI::PositiveNumber);
  gen->add_option("--m", gen_opts.m, "Number of constraints")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_opts.seed, "Base seed");
  gen->add_option("--out-dir", gen_out, "Output directory");
  gen->add_flag("--full", gen_full, "Use 50 instances per suite");

  // learn
  auto* lrn = app.add_subcommand("learn", "Learn parameters for an instance");
  std::string instance_file, loss_str, results_path = "results.csv", model_out;
  LearnOptions lopts;
  int hyper = 0, truncate = 0;
  bool eps_decay = false;
  lrn->add_option("instance", instance_file, "Instance JSON")->required()->check(CLI::ExistingFile);
  lrn->add_option("--loss", loss_str, "adg | se | mse");
  auto* hyper_opt = lrn->add_option("--hyper-search", hyper, "Random hyperparameter combinations to try")
                        ->check(CLI::PositiveNumber);
  auto* decay_opt = lrn->add_flag("--eps-decay,!--no-eps-decay", eps_decay, "Decay solver precision over steps");
  auto* trunc_opt = lrn->add_option("--truncate", truncate, "Backpropagate through the last k Newton steps only")
                        ->check(CLI::PositiveNumber);
  lrn->add_option("--seed", lopts.seed, "Seed for the hyperparameter draw");
  lrn->add_option("--max-steps", lopts.max_steps, "Gradient steps")->check(CLI::PositiveNumber);
  lrn->add_option("--t0", lopts.manual.t0, "Initial barrier sharpness (manual mode)");
  lrn->add_option("--mu", lopts.manual.mu, "Sharpness multiplier (manual mode)");
  lrn->add_option("--alpha-c", lopts.manual.alpha_c, "Cost step scale (manual mode)");
  lrn->add_option("--alpha-ab", lopts.manual.alpha_ab, "Constraint step scale (manual mode)");
  lrn->add_option("--results", results_path, "Results CSV to append to");
  lrn->add_option("--model-out", model_out, "Learned-model JSON (default <instance>.learned.json)");

  // report
  auto* rep = app.add_subcommand("report", "Summarize a results CSV");
  std::string report_in, report_out;
  rep->add_option("results", report_in, "Results CSV")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", report_out, "Also write the summary as CSV");

  // loss-surface
  auto* surf = app.add_subcommand("loss-surface", "Loss as c sweeps the unit circle (d = 2)");
  std::string surf_in, surf_loss = "se", surf_out;
  std::vector<double> surf_eps{1e-5};
  int resolution = 360;
  surf->add_option("instance", surf_in, "Instance JSON")->required()->check(CLI::ExistingFile);
  surf->add_option("--loss", surf_loss, "adg | se");
  surf->add_option("--eps", surf_eps, "Solver precisions")->delimiter(',');
  surf->add_option("--resolution", resolution, "Angles on the circle")->check(CLI::Range(2, 1000000));
  surf->add_option("--out", surf_out, "Output CSV (stdout when empty)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      gen_opts.task = parse_task(gen_task);
      gen_opts.out_dir = gen_out;
      if (gen_full && count_opt->count() == 0) gen_opts.count = 50;
      for (const auto& p : cmd_gen(gen_opts)) std::cout << p.string() << "\n";
      return kExitOk;
    }

    if (*lrn) {
      TaskInstance inst = read_instance(instance_file);
      if (!loss_str.empty()) lopts.loss = parse_loss(loss_str);
      if (hyper_opt->count() > 0) lopts.hyper_search = hyper;
      if (decay_opt->count() > 0) lopts.eps_decay = eps_decay;
      if (trunc_opt->count() > 0) lopts.truncate = truncate;
      lopts.threads = default_threads();
      const std::filesystem::path in_path(instance_file);
      LearnOutcome out = cmd_learn(inst, in_path.stem().string(), lopts);
      if (out.exit_code == kExitSolveFailure) {
        std::cerr << "error: " << out.diagnostic << "\n";
        return out.exit_code;
      }
      std::vector<ResultRow> rows;
      nlohmann::json models = nlohmann::json::array();
      for (const LearnedTarget& r : out.runs) {
        rows.push_back(r.row);
        models.push_back(learned_to_json(r));
        for (const std::string& w : r.result.warnings) std::cerr << "warning: " << w << "\n";
        std::cout << format_row(r.row) << "\n";
      }
      append_results(results_path, rows);
      std::filesystem::path mpath = model_out.empty() ? in_path.parent_path() / (in_path.stem().string() + ".learned.json")
                                                      : std::filesystem::path(model_out);
      if (int rc = write_text(mpath, models.dump(1) + "\n"); rc != kExitOk) return rc;
      if (out.exit_code != kExitOk) std::cerr << "warning: " << out.diagnostic << "\n";
      return out.exit_code;
    }

    if (*rep) {
      const auto summary = cmd_report(read_results(report_in));
      std::cout << format_report(summary);
      if (!report_out.empty()) return write_text(report_out, summary_csv(summary));
      return kExitOk;
    }

    if (*surf) {
      const TaskInstance inst = read_instance(surf_in);
      const LossKind loss = parse_loss(surf_loss);
      const std::string csv = surface_csv(cmd_loss_surface(inst, loss, surf_eps, resolution));
      if (surf_out.empty()) {
        std::cout << csv;
        return kExitOk;
      }
      return write_text(surf_out, csv);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  }
  return kExitOk;
}
