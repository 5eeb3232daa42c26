#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gtp/autodiff.hpp"
#include "gtp/params.hpp"

namespace gtp {

// Builds a scalar loss on the given tape from the parameters in the store.
using LossBuilder = std::function<Var(Tape&, ParamStore&)>;

struct ParamCheck {
  std::string name;
  // max |analytic - numeric| / max(max|analytic|, max|numeric|, floor)
  double rel_error = 0.0;
  double max_abs_error = 0.0;
  double grad_scale = 0.0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-5;
  // Parameters whose gradient scale is below this are compared absolutely.
  double scale_floor = 1e-10;
  // Test hook: perturbs the analytic gradient before comparison.
  std::function<void(ParamStore&)> corrupt_analytic;
};

// Central-difference check of every parameter entry. Throws
// NondeterminismError when two forward passes disagree bitwise.
GradCheckReport finite_diff_check(const LossBuilder& loss, ParamStore& params, const GradCheckOptions& opts);
GradCheckReport finite_diff_check(const LossBuilder& loss, ParamStore& params, double step, double tolerance);

}  // namespace gtp
