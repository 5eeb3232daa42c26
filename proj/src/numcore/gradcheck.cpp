#include "gtp/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "gtp/errors.hpp"

namespace gtp {
namespace {

double evaluate(const LossBuilder& loss, ParamStore& params) {
  Tape tape;
  return loss(tape, params).scalar();
}

}  // namespace

GradCheckReport finite_diff_check(const LossBuilder& loss, ParamStore& params, const GradCheckOptions& opts) {
  if (!(opts.step > 0.0)) throw InvalidConfig("finite-difference step must be positive");
  if (opts.tolerance < 0.0) throw InvalidConfig("tolerance must be non-negative");

  const double base = evaluate(loss, params);
  if (evaluate(loss, params) != base) throw NondeterminismError("loss builder is not deterministic");

  params.zero_grad();
  {
    Tape tape;
    Var root = loss(tape, params);
    tape.backward(root);
  }
  if (opts.corrupt_analytic) opts.corrupt_analytic(params);

  GradCheckReport report;
  report.tolerance = opts.tolerance;
  for (Parameter& p : params.all()) {
    ParamCheck check{p.name};
    double max_a = 0.0, max_n = 0.0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value[i];
      p.value[i] = orig + opts.step;
      const double up = evaluate(loss, params);
      p.value[i] = orig - opts.step;
      const double down = evaluate(loss, params);
      p.value[i] = orig;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double analytic = p.grad[i];
      check.max_abs_error = std::max(check.max_abs_error, std::abs(analytic - numeric));
      max_a = std::max(max_a, std::abs(analytic));
      max_n = std::max(max_n, std::abs(numeric));
    }
    check.grad_scale = std::max(max_a, max_n);
    check.rel_error = check.max_abs_error / std::max(check.grad_scale, opts.scale_floor);
    report.max_rel_error = std::max(report.max_rel_error, check.rel_error);
    report.params.push_back(std::move(check));
  }
  // tol = 0 can never be met by a finite-difference estimate.
  report.passed = opts.tolerance > 0.0 && report.max_rel_error < opts.tolerance;
  params.zero_grad();
  return report;
}

GradCheckReport finite_diff_check(const LossBuilder& loss, ParamStore& params, double step, double tolerance) {
  GradCheckOptions opts;
  opts.step = step;
  opts.tolerance = tolerance;
  return finite_diff_check(loss, params, opts);
}

}  // namespace gtp
