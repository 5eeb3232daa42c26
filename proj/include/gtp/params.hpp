#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <string_view>

#include "gtp/matrix.hpp"

namespace gtp {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix first_moment;
  Matrix second_moment;
};

// Named trainable tensors with gradient accumulators and Adam state.
// Iteration order is insertion order, which fixes the serialization layout.
class ParamStore {
 public:
  Parameter& add(std::string name, Matrix init);
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::deque<Parameter>& all() { return params_; }
  const std::deque<Parameter>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  void scale_grad(double s);
  // 0.5 * sum of squared parameter values, the regularizer whose gradient is
  // applied through decoupled weight decay.
  double regularizer() const;

  // Zeroes the Adam moments and the step counter.
  void reset_optimizer();
  std::uint64_t optimizer_steps() const { return steps_; }
  void set_optimizer_steps(std::uint64_t s) { steps_ = s; }

 private:
  std::deque<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::uint64_t steps_ = 0;
};

}  // namespace gtp
