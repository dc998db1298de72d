#include "invopt/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace invopt {

using nlohmann::json;

namespace {

json vector_json(const Tensor& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json matrix_json(const Tensor& a) {
  json out = json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(std::string("instance: missing field '") + key + "'");
  return *it;
}

Tensor vector_from(const json& j, const char* what) {
  if (!j.is_array()) throw Error(std::string("instance: '") + what + "' must be an array");
  Tensor v(static_cast<Eigen::Index>(j.size()), 1);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(std::string("instance: '") + what + "' holds a non-number");
    v(static_cast<Eigen::Index>(i), 0) = j[i].get<double>();
  }
  return v;
}

Tensor matrix_from(const json& j, Eigen::Index cols, const char* what) {
  if (!j.is_array()) throw Error(std::string("instance: '") + what + "' must be an array of rows");
  Tensor a(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Tensor row = vector_from(j[i], what);
    if (row.rows() != cols) throw Error(std::string("instance: ragged rows in '") + what + "'");
    a.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return a;
}

json observations_json(const std::vector<Observation>& obs) {
  json out = json::array();
  for (const Observation& o : obs) {
    json t = {{"u", o.u}, {"x", vector_json(o.x)}};
    if (!o.label.empty()) t["label"] = o.label;
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Observation> observations_from(const json& j) {
  if (!j.is_array()) throw Error("instance: targets must be an array");
  std::vector<Observation> out;
  for (const json& t : j) {
    Observation o;
    o.u = field(t, "u").get<double>();
    o.x = vector_from(field(t, "x"), "x");
    if (t.contains("label")) o.label = t["label"].get<std::string>();
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace

json instance_to_json(const TaskInstance& inst) {
  json j;
  j["schema_version"] = kInstanceSchemaVersion;
  j["task"] = task_name(inst.task);
  j["d"] = inst.d;
  j["m"] = inst.m;
  j["seed"] = inst.seed;
  j["index"] = inst.index;
  j["A"] = matrix_json(inst.A);
  j["b"] = vector_json(inst.b);
  j["vertices"] = matrix_json(inst.vertices);
  j["c_ini"] = inst.c_ini ? vector_json(*inst.c_ini) : json();
  if (inst.c_tru) j["c_tru"] = vector_json(*inst.c_tru);
  j["targets"] = observations_json(inst.targets);
  if (!inst.test_targets.empty()) j["test_targets"] = observations_json(inst.test_targets);

  json model;
  model["family"] = family_name(inst.family);
  if (inst.w_tru) model["w_tru"] = vector_json(*inst.w_tru);
  model["w_ini"] = vector_json(inst.w_ini);
  model["masks"] = inst.masks;
  if (inst.c_base) model["c_base"] = vector_json(*inst.c_base);
  model["u_range"] = {inst.u_min, inst.u_max};
  model["u_train"] = inst.u_train;
  model["u_test"] = inst.u_test;
  j["model"] = std::move(model);
  j["warnings"] = inst.warnings;
  return j;
}

TaskInstance instance_from_json(const json& j) {
  try {
    if (field(j, "schema_version").get<int>() != kInstanceSchemaVersion) {
      throw Error("instance: unsupported schema_version");
    }
    TaskInstance inst;
    inst.task = parse_task(field(j, "task").get<std::string>());
    inst.d = field(j, "d").get<Eigen::Index>();
    inst.m = field(j, "m").get<Eigen::Index>();
    inst.seed = field(j, "seed").get<std::uint64_t>();
    inst.index = j.value("index", std::uint64_t{0});
    inst.A = matrix_from(field(j, "A"), inst.d, "A");
    inst.b = vector_from(field(j, "b"), "b");
    inst.vertices = matrix_from(j.value("vertices", json::array()), inst.d, "vertices");
    if (j.contains("c_ini") && !j["c_ini"].is_null()) inst.c_ini = vector_from(j["c_ini"], "c_ini");
    if (j.contains("c_tru")) inst.c_tru = vector_from(j["c_tru"], "c_tru");
    inst.targets = observations_from(field(j, "targets"));
    if (j.contains("test_targets")) inst.test_targets = observations_from(j["test_targets"]);

    const json& model = field(j, "model");
    inst.family = parse_family(field(model, "family").get<std::string>());
    if (model.contains("w_tru")) inst.w_tru = vector_from(model["w_tru"], "w_tru");
    inst.w_ini = vector_from(field(model, "w_ini"), "w_ini");
    inst.masks = model.value("masks", std::vector<int>{});
    if (model.contains("c_base")) inst.c_base = vector_from(model["c_base"], "c_base");
    const auto range = model.value("u_range", std::vector<double>{0.0, 0.0});
    if (range.size() != 2) throw Error("instance: u_range must have two entries");
    inst.u_min = range[0];
    inst.u_max = range[1];
    inst.u_train = model.value("u_train", std::vector<double>{});
    inst.u_test = model.value("u_test", std::vector<double>{});
    inst.warnings = j.value("warnings", std::vector<std::string>{});

    if (inst.task != Task::TrigDemo && (inst.A.rows() != inst.m || inst.b.rows() != inst.m)) {
      throw Error("instance: A and b do not have m rows");
    }
    if (inst.targets.empty()) throw Error("instance: no targets");
    for (const Observation& o : inst.targets) {
      if (o.x.rows() != inst.d) throw Error("instance: target dimension differs from d");
    }
    if (inst.w_ini.rows() != inst.model().weight_count()) throw Error("instance: w_ini has the wrong length");
    return inst;
  } catch (const json::exception& e) {
    throw Error(std::string("instance: ") + e.what());
  }
}

std::string dump_instance(const TaskInstance& inst) { return instance_to_json(inst).dump(1) + "\n"; }

void write_instance(const std::filesystem::path& path, const TaskInstance& inst) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << dump_instance(inst);
  if (!out) throw Error("failed writing " + path.string());
}

TaskInstance read_instance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return instance_from_json(j);
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("format_double failed");
  return {buf, end};
}

const std::string& results_header() {
  static const std::string header =
      "instance_id,task,d,m,loss_kind,t0,mu,alpha_c,alpha_ab,truncate,initial_loss,final_train_loss,"
      "final_test_loss,steps_used,termination,wall_ms";
  return header;
}

std::string format_row(const ResultRow& r) {
  std::ostringstream os;
  os << r.instance_id << ',' << r.task << ',' << r.d << ',' << r.m << ',' << r.loss_kind << ','
     << format_double(r.t0) << ',' << format_double(r.mu) << ',' << format_double(r.alpha_c) << ','
     << format_double(r.alpha_ab) << ',' << r.truncate << ',' << format_double(r.initial_loss) << ','
     << format_double(r.final_train_loss) << ','
     << (r.final_test_loss ? format_double(*r.final_test_loss) : std::string()) << ',' << r.steps_used
     << ',' << r.termination << ',' << format_double(r.wall_ms);
  return os.str();
}

namespace {

double to_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    // from_chars rejects "inf"/"nan" spellings produced elsewhere; try strtod.
    char* end = nullptr;
    v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw Error("results: bad number '" + s + "'");
  }
  return v;
}

}  // namespace

ResultRow parse_row(const std::string& line) {
  std::vector<std::string> cols;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cols.push_back(cell);
  if (!line.empty() && line.back() == ',') cols.emplace_back();
  if (cols.size() != 16) throw Error("results: expected 16 columns, got " + std::to_string(cols.size()));
  ResultRow r;
  r.instance_id = cols[0];
  r.task = cols[1];
  r.d = static_cast<long>(to_double(cols[2]));
  r.m = static_cast<long>(to_double(cols[3]));
  r.loss_kind = cols[4];
  r.t0 = to_double(cols[5]);
  r.mu = to_double(cols[6]);
  r.alpha_c = to_double(cols[7]);
  r.alpha_ab = to_double(cols[8]);
  r.truncate = static_cast<int>(to_double(cols[9]));
  r.initial_loss = to_double(cols[10]);
  r.final_train_loss = to_double(cols[11]);
  if (!cols[12].empty()) r.final_test_loss = to_double(cols[12]);
  r.steps_used = static_cast<int>(to_double(cols[13]));
  r.termination = cols[14];
  r.wall_ms = to_double(cols[15]);
  return r;
}

void append_results(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  if (fresh) out << kResultsVersionLine << '\n' << results_header() << '\n';
  for (const ResultRow& r : rows) out << format_row(r) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

std::vector<ResultRow> read_results(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kResultsVersionLine) {
    throw Error(path.string() + ": not an invopt results file (missing version line)");
  }
  if (!std::getline(in, line) || line != results_header()) {
    throw Error(path.string() + ": unexpected results header");
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(parse_row(line));
  }
  return rows;
}

}  // namespace invopt
