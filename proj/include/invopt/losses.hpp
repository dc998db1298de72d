#pragma once

#include "invopt/tape.hpp"

#include <span>
#include <string>
#include <string_view>

namespace invopt {

enum class LossKind { ADG, SE, MSE };

const char* loss_name(LossKind kind);
/// Accepts "adg", "se", "mse" (case-insensitive).
LossKind parse_loss(std::string_view name);

/// Absolute duality gap c' |x_tru - x|, with |.| taken elementwise.
Var adg(const Var& c, const Var& x, const Tensor& x_tru);

/// |c'(x_tru - x)|. Diagnostic only; learning uses adg().
Var adg_classical(const Var& c, const Var& x, const Tensor& x_tru);

/// ||x_tru - x||^2.
Var se(const Var& x, const Tensor& x_tru);

/// Arithmetic mean of per-observation scalar losses.
Var mse(std::span<const Var> terms);

}  // namespace invopt
