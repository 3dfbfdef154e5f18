#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "nn/tape.hpp"

namespace decor::nn {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg = {});
  void step();  // consumes Parameter::grad
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  long long steps() const { return t_; }

  nlohmann::json state_json() const;
  void load_state(const nlohmann::json& j);

 private:
  std::vector<Parameter*> params_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  AdamConfig cfg_;
  long long t_ = 0;
};

// Rescales gradients so their global L2 norm is at most max_norm; returns the
// norm before clipping.
double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm);

// Linearly annealed rate: lr0 * (1 - done / total), floored at 0.
double linear_anneal(double lr0, long long done, long long total);

}  // namespace decor::nn
