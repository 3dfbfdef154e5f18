#pragma once

#include <vector>

#include "nn/layers.hpp"
#include "signal/signal_control.hpp"

namespace decor {

struct ControlPolicyConfig {
  int rows = 10;     // action repeat R
  int columns = 58;  // 9 + 7 * slots
  int slots = 7;     // crosswalk slots; unused ones are masked
  std::vector<int> actor = {512, 256, 128, 64};
  std::vector<int> critic = {512, 256, 128, 64};
  double input_scale = 0.2;  // occupancy counts are small integers
  int input_size() const { return rows * columns; }
};

struct ControlSample {
  JointAction action;
  double log_prob = 0.0;
  double entropy = 0.0;
};

class ControlPolicy {
 public:
  ControlPolicy(const ControlPolicyConfig& cfg, std::uint64_t seed);

  struct Forward {
    nn::Var phase_logits;      // B x 4
    nn::Var crosswalk_logits;  // B x slots
    nn::Var value;             // B x 1
  };
  // states: B x input_size, each row a flattened R x F observation.
  Forward forward(nn::Tape& t, const nn::Mat& states) const;
  nn::Var value(nn::Tape& t, const nn::Mat& states) const;

  struct Output {
    Eigen::RowVectorXd phase_logits;
    Eigen::RowVectorXd crosswalk_logits;
    double value = 0.0;
  };
  Output evaluate(const Eigen::MatrixXd& observation) const;  // one R x F matrix

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const ControlPolicyConfig& config() const { return cfg_; }

 private:
  ControlPolicyConfig cfg_;
  nn::ParamStore params_;
  nn::Mlp actor_;
  nn::Mlp critic_;
};

nn::Mat flatten_observation(const Eigen::MatrixXd& obs);

// Stochastic or greedy (argmax phase, bit when p > 0.5) action for the
// first n_crosswalks slots.
ControlSample control_sample(const Eigen::RowVectorXd& phase_logits,
                             const Eigen::RowVectorXd& crosswalk_logits, int n_crosswalks, Rng& rng,
                             bool deterministic);

// Row mask with ones in the first n slots.
nn::Mat slot_mask(const std::vector<int>& n_crosswalks, int slots);

// Joint log-prob and entropy per batch row; masked slots contribute nothing.
nn::Var control_log_prob(nn::Var phase_logits, nn::Var crosswalk_logits,
                         const std::vector<JointAction>& actions, const nn::Mat& mask);
nn::Var control_entropy(nn::Var phase_logits, nn::Var crosswalk_logits, const nn::Mat& mask);

}  // namespace decor
