#pragma once

#include "invopt/instance_gen.hpp"
#include "invopt/learner.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace invopt {

inline constexpr int kInstanceSchemaVersion = 1;

nlohmann::json instance_to_json(const TaskInstance& inst);
/// Throws Error on missing or malformed fields.
TaskInstance instance_from_json(const nlohmann::json& j);

/// Canonical text form; write -> read -> write reproduces it byte for byte.
std::string dump_instance(const TaskInstance& inst);
void write_instance(const std::filesystem::path& path, const TaskInstance& inst);
TaskInstance read_instance(const std::filesystem::path& path);

/// One learning run on one instance (and one target set) with one hyper combo.
struct ResultRow {
  std::string instance_id;
  std::string task;
  long d = 0;
  long m = 0;
  std::string loss_kind;
  double t0 = 0.0;
  double mu = 0.0;
  double alpha_c = 0.0;
  double alpha_ab = 0.0;
  int truncate = -1;  // -1: full backpropagation
  double initial_loss = 0.0;
  double final_train_loss = 0.0;
  std::optional<double> final_test_loss;
  int steps_used = 0;
  std::string termination;
  double wall_ms = 0.0;
};

/// First line of every results file.
inline constexpr const char* kResultsVersionLine = "#invopt-results,1";
const std::string& results_header();
std::string format_row(const ResultRow& row);
/// Throws Error when the line does not have the expected columns.
ResultRow parse_row(const std::string& line);
void append_results(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace invopt
