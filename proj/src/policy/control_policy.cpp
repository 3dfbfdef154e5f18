#include "policy/control_policy.hpp"

#include "common/error.hpp"
#include "nn/distributions.hpp"

namespace decor {

ControlPolicy::ControlPolicy(const ControlPolicyConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  Rng rng(seed);
  actor_ = nn::Mlp(params_, "control.actor", cfg.input_size(), cfg.actor, 4 + cfg.slots, rng, 0.01);
  critic_ = nn::Mlp(params_, "control.critic", cfg.input_size(), cfg.critic, 1, rng, 1.0);
}

ControlPolicy::Forward ControlPolicy::forward(nn::Tape& t, const nn::Mat& states) const {
  if (states.cols() != cfg_.input_size())
    throw Error(ErrorKind::kContract, "control state width " + std::to_string(states.cols()) +
                                          " does not match " + std::to_string(cfg_.input_size()));
  nn::Var x = t.constant(states * cfg_.input_scale);
  nn::Var out = actor_.forward(t, x);
  return {nn::slice_cols(out, 0, 4), nn::slice_cols(out, 4, cfg_.slots), critic_.forward(t, x)};
}

nn::Var ControlPolicy::value(nn::Tape& t, const nn::Mat& states) const {
  if (states.cols() != cfg_.input_size())
    throw Error(ErrorKind::kContract, "control state width mismatch");
  return critic_.forward(t, t.constant(states * cfg_.input_scale));
}

ControlPolicy::Output ControlPolicy::evaluate(const Eigen::MatrixXd& observation) const {
  if (observation.rows() != cfg_.rows || observation.cols() != cfg_.columns)
    throw Error(ErrorKind::kContract, "observation shape does not match the controller");
  nn::Tape t;
  auto f = forward(t, flatten_observation(observation));
  return {f.phase_logits.value().row(0), f.crosswalk_logits.value().row(0), f.value.scalar()};
}

nn::Mat flatten_observation(const Eigen::MatrixXd& obs) {
  nn::Mat row(1, obs.size());
  for (Eigen::Index r = 0; r < obs.rows(); ++r) row.block(0, r * obs.cols(), 1, obs.cols()) = obs.row(r);
  return row;
}

ControlSample control_sample(const Eigen::RowVectorXd& phase_logits,
                             const Eigen::RowVectorXd& crosswalk_logits, int n_crosswalks, Rng& rng,
                             bool deterministic) {
  if (n_crosswalks < 0 || n_crosswalks > crosswalk_logits.size())
    throw Error(ErrorKind::kContract, "more crosswalks than controller slots");
  ControlSample s;
  const int phase = deterministic ? nn::categorical_mode(phase_logits)
                                  : nn::categorical_sample(phase_logits, rng);
  s.action.intersection_phase = phase + 1;
  const Eigen::RowVectorXd p = nn::softmax(phase_logits);
  s.log_prob = std::log(p(phase));
  for (Eigen::Index k = 0; k < p.size(); ++k)
    if (p(k) > 0.0) s.entropy -= p(k) * std::log(p(k));
  for (int c = 0; c < n_crosswalks; ++c) {
    const double z = crosswalk_logits(c);
    const double q = nn::bernoulli_prob(z);
    const int bit = deterministic ? (q > 0.5 ? 1 : 0) : nn::bernoulli_sample(z, rng);
    s.action.crosswalk_ped.push_back(bit == 1);
    const double sp = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    s.log_prob += bit * z - sp;
    s.entropy += sp - z * q;
  }
  return s;
}

nn::Mat slot_mask(const std::vector<int>& n_crosswalks, int slots) {
  nn::Mat m = nn::Mat::Zero(static_cast<Eigen::Index>(n_crosswalks.size()), slots);
  for (std::size_t r = 0; r < n_crosswalks.size(); ++r) {
    if (n_crosswalks[r] > slots) throw Error(ErrorKind::kContract, "more crosswalks than slots");
    m.row(r).leftCols(n_crosswalks[r]).setOnes();
  }
  return m;
}

nn::Var control_log_prob(nn::Var phase_logits, nn::Var crosswalk_logits,
                         const std::vector<JointAction>& actions, const nn::Mat& mask) {
  nn::Tape& t = *phase_logits.tape;
  std::vector<int> phase;
  nn::Mat bits = nn::Mat::Zero(crosswalk_logits.rows(), crosswalk_logits.cols());
  for (std::size_t r = 0; r < actions.size(); ++r) {
    phase.push_back(actions[r].intersection_phase - 1);
    for (std::size_t c = 0; c < actions[r].crosswalk_ped.size(); ++c)
      bits(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = actions[r].crosswalk_ped[c] ? 1.0 : 0.0;
  }
  nn::Var cat = nn::categorical_log_prob(phase_logits, phase);
  nn::Var bern = nn::row_sum(nn::mul(nn::bernoulli_log_prob(crosswalk_logits, bits), t.constant(mask)));
  return nn::add(cat, bern);
}

nn::Var control_entropy(nn::Var phase_logits, nn::Var crosswalk_logits, const nn::Mat& mask) {
  nn::Tape& t = *phase_logits.tape;
  return nn::add(nn::categorical_entropy(phase_logits),
                 nn::row_sum(nn::mul(nn::bernoulli_entropy(crosswalk_logits), t.constant(mask))));
}

}  // namespace decor
