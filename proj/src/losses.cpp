#include "invopt/losses.hpp"

#include <algorithm>
#include <cctype>

namespace invopt {

namespace {

void check_target(const Var& x, const Tensor& x_tru, const char* who) {
  if (x.cols() != 1 || x_tru.cols() != 1 || x.rows() != x_tru.rows()) {
    throw ShapeError(std::string(who) + ": solution and target must be equal-length column vectors");
  }
}

}  // namespace

const char* loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::ADG: return "adg";
    case LossKind::SE: return "se";
    case LossKind::MSE: return "mse";
  }
  return "?";
}

LossKind parse_loss(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "adg") return LossKind::ADG;
  if (lower == "se") return LossKind::SE;
  if (lower == "mse") return LossKind::MSE;
  throw Error("unknown loss '" + std::string(name) + "' (expected adg, se or mse)");
}

Var adg(const Var& c, const Var& x, const Tensor& x_tru) {
  check_target(x, x_tru, "adg");
  if (c.rows() != x.rows() || c.cols() != 1) throw ShapeError("adg: cost vector shape mismatch");
  Var residual = sub(x.tape().constant(x_tru), x);
  return dot(c, abs(residual));
}

Var adg_classical(const Var& c, const Var& x, const Tensor& x_tru) {
  check_target(x, x_tru, "adg_classical");
  if (c.rows() != x.rows() || c.cols() != 1) throw ShapeError("adg_classical: cost vector shape mismatch");
  return abs(dot(c, sub(x.tape().constant(x_tru), x)));
}

Var se(const Var& x, const Tensor& x_tru) {
  check_target(x, x_tru, "se");
  return squared_norm(sub(x.tape().constant(x_tru), x));
}

Var mse(std::span<const Var> terms) {
  if (terms.empty()) throw Error("mse: empty batch");
  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return scale(total, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace invopt
