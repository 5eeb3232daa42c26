#include "gtp/optim.hpp"

#include <cmath>

#include "gtp/errors.hpp"

namespace gtp {

void adam_step(ParamStore& params, const AdamConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw InvalidConfig("learning rate must be positive");
  if (cfg.weight_decay < 0.0) throw InvalidConfig("weight decay must be non-negative");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw InvalidConfig("Adam betas must lie in [0, 1)");
  }
  const std::uint64_t t = params.optimizer_steps() + 1;
  params.set_optimizer_steps(t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (Parameter& p : params.all()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      double& m = p.first_moment[i];
      double& v = p.second_moment[i];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
      const double update = (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
      p.value[i] -= cfg.lr * (update + cfg.weight_decay * p.value[i]);
    }
  }
}

void adam_step(ParamStore& params, double lr, double weight_decay) {
  AdamConfig cfg;
  cfg.lr = lr;
  cfg.weight_decay = weight_decay;
  adam_step(params, cfg);
}

}  // namespace gtp
