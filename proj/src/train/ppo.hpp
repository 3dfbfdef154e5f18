#pragma once

#include <functional>
#include <string>
#include <vector>

#include "common/rng.hpp"
#include "nn/adam.hpp"
#include "nn/layers.hpp"

namespace decor {

struct PpoConfig {
  double lr = 5e-4;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_eps = 0.1;
  double entropy_coef = 0.005;
  double value_coef = 0.5;
  int epochs = 2;
  int batch = 32;
  int update_freq = 1024;  // control: records; design: stored rounds
  double max_grad_norm = 0.5;
  bool anneal_lr = false;

  void validate() const;
};

PpoConfig control_ppo_defaults();
PpoConfig design_ppo_defaults();

struct PpoLoss {
  nn::Var total;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// Clipped surrogate plus value and entropy terms, averaged over the batch.
// new_log_prob, value and entropy are B x 1.
PpoLoss ppo_loss(nn::Var new_log_prob, const std::vector<double>& old_log_prob,
                 const std::vector<double>& advantages, nn::Var value,
                 const std::vector<double>& returns, nn::Var entropy, const PpoConfig& cfg);

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double grad_norm = 0.0;
  int minibatches = 0;
  bool aborted = false;
  std::string diagnostics;
};

using PpoLossFn = std::function<PpoLoss(nn::Tape&, const std::vector<int>& batch)>;

// Epochs of shuffled minibatches over n samples. A non-finite loss or
// gradient restores the parameters and optimizer state from before the call.
PpoStats ppo_update(nn::ParamStore& params, nn::Adam& opt, int n, const PpoConfig& cfg, Rng& rng,
                    const PpoLossFn& loss);

}  // namespace decor
