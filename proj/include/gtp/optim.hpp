#pragma once

#include "gtp/params.hpp"

namespace gtp {

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// One Adam update with decoupled weight decay:
//   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)
// Consumes Parameter::grad; does not zero it.
void adam_step(ParamStore& params, const AdamConfig& cfg);
void adam_step(ParamStore& params, double lr, double weight_decay);

}  // namespace gtp
