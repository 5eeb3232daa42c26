#include "gtp/params.hpp"

#include "gtp/errors.hpp"

namespace gtp {

Parameter& ParamStore::add(std::string name, Matrix init) {
  if (index_.contains(name)) throw InvalidInput("duplicate parameter '" + name + "'");
  if (!all_finite(init)) throw InvalidInput("non-finite initial value for '" + name + "'");
  const std::size_t r = init.rows(), c = init.cols();
  index_.emplace(name, params_.size());
  params_.push_back(Parameter{std::move(name), std::move(init), Matrix(r, c), Matrix(r, c), Matrix(r, c)});
  return params_.back();
}

Parameter& ParamStore::get(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidInput("unknown parameter '" + std::string(name) + "'");
  return params_[it->second];
}

const Parameter& ParamStore::get(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidInput("unknown parameter '" + std::string(name) + "'");
  return params_[it->second];
}

bool ParamStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

void ParamStore::scale_grad(double s) {
  for (auto& p : params_) p.grad *= s;
}

double ParamStore::regularizer() const {
  double s = 0.0;
  for (const auto& p : params_) s += squared_norm(p.value.values());
  return 0.5 * s;
}

void ParamStore::reset_optimizer() {
  for (auto& p : params_) {
    p.first_moment.fill(0.0);
    p.second_moment.fill(0.0);
  }
  steps_ = 0;
}

}  // namespace gtp
