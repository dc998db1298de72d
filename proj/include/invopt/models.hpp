#pragma once

#include "invopt/ipm.hpp"

#include <string_view>
#include <vector>

namespace invopt {

enum class ModelFamily { Direct, LinearShift, TrigDemo };

const char* family_name(ModelFamily f);
ModelFamily parse_family(std::string_view name);

/// Which learning-rate group a weight belongs to.
enum class WeightGroup { Cost, Constraint };

/// Maps a feature u and weights w to an LP (c, A, b) recorded on a tape.
///
/// Direct:      w = [c; vec_rowmajor(A); b], u ignored. With cost_only the
///              weights are c alone and (A, b) are the fixed base.
/// LinearShift: c = c0 + (w1 + w2 u), b = b0 + (w5 + w6 u), and one masked
///              entry per row of A gets + (w3 + w4 u).
/// TrigDemo:    the fixed two-weight trigonometric demo family.
class ParametricModel {
 public:
  static ParametricModel direct(Eigen::Index d, Eigen::Index m);
  static ParametricModel direct_cost_only(Tensor A, Tensor b);
  static ParametricModel linear_shift(Tensor c0, Tensor A0, Tensor b0, std::vector<int> masks);
  static ParametricModel trig_demo();

  ModelFamily family() const { return family_; }
  bool cost_only() const { return cost_only_; }
  Eigen::Index d() const { return d_; }
  Eigen::Index m() const { return m_; }
  Eigen::Index weight_count() const;
  std::vector<WeightGroup> weight_groups() const;

  const Tensor& base_c() const { return c0_; }
  const Tensor& base_A() const { return A0_; }
  const Tensor& base_b() const { return b0_; }
  const std::vector<int>& masks() const { return masks_; }

  /// Throws Error when w has the wrong length for the family.
  LinearProgram instantiate(const Var& w, double u) const;

  /// Packs (c, A, b) into Direct weights (or c alone for cost_only).
  Tensor pack(const Tensor& c, const Tensor& A, const Tensor& b) const;

 private:
  ModelFamily family_ = ModelFamily::Direct;
  bool cost_only_ = false;
  Eigen::Index d_ = 0;
  Eigen::Index m_ = 0;
  Tensor c0_;
  Tensor A0_;
  Tensor b0_;
  std::vector<int> masks_;
  Tensor mask_matrix_;
};

/// dLoss/dw for the leaf w; runs the backward pass on loss's tape.
Tensor gradient_wrt_w(const Var& w, const Var& loss);

}  // namespace invopt
