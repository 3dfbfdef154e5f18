#include "train/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"

namespace decor {

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(ErrorKind::kConfig, "gamma must be in (0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorKind::kConfig, "gae lambda must be in [0, 1]");
  if (!(clip_eps > 0.0)) throw Error(ErrorKind::kConfig, "clip epsilon must be positive");
  if (!(lr >= 0.0)) throw Error(ErrorKind::kConfig, "learning rate must be non-negative");
  if (epochs < 1 || batch < 1 || update_freq < 1)
    throw Error(ErrorKind::kConfig, "epochs, batch and update frequency must be positive");
  if (!(max_grad_norm > 0.0)) throw Error(ErrorKind::kConfig, "max grad norm must be positive");
}

PpoConfig control_ppo_defaults() { return PpoConfig{}; }

PpoConfig design_ppo_defaults() {
  PpoConfig c;
  c.lambda = 0.97;
  c.clip_eps = 0.3;
  c.entropy_coef = 0.001;
  c.epochs = 4;
  c.batch = 2;
  c.update_freq = 16;
  c.anneal_lr = true;
  return c;
}

namespace {

nn::Mat column(const std::vector<double>& v) {
  nn::Mat m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

}  // namespace

PpoLoss ppo_loss(nn::Var new_log_prob, const std::vector<double>& old_log_prob,
                 const std::vector<double>& advantages, nn::Var value,
                 const std::vector<double>& returns, nn::Var entropy, const PpoConfig& cfg) {
  const auto b = static_cast<Eigen::Index>(old_log_prob.size());
  if (new_log_prob.rows() != b || value.rows() != b || entropy.rows() != b ||
      static_cast<Eigen::Index>(advantages.size()) != b ||
      static_cast<Eigen::Index>(returns.size()) != b)
    throw Error(ErrorKind::kContract, "ppo loss inputs must share the batch size");
  nn::Tape& t = *new_log_prob.tape;
  nn::Var adv = t.constant(column(advantages));
  nn::Var ratio = nn::exp(nn::sub(new_log_prob, t.constant(column(old_log_prob))));
  nn::Var surr1 = nn::mul(ratio, adv);
  nn::Var surr2 = nn::mul(nn::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps), adv);
  nn::Var policy = nn::neg(nn::mean(nn::minimum(surr1, surr2)));
  nn::Var vloss = nn::mean(nn::square(nn::sub(value, t.constant(column(returns)))));
  nn::Var ent = nn::mean(entropy);

  PpoLoss out;
  out.total = nn::sub(nn::add(policy, nn::scale(vloss, cfg.value_coef)),
                      nn::scale(ent, cfg.entropy_coef));
  out.policy = policy.scalar();
  out.value = vloss.scalar();
  out.entropy = ent.scalar();
  const nn::Mat& r = ratio.value();
  double clipped = 0.0;
  double kl = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    if (std::abs(r(i, 0) - 1.0) > cfg.clip_eps) clipped += 1.0;
    kl += (r(i, 0) - 1.0) - std::log(r(i, 0));
  }
  out.clip_fraction = b > 0 ? clipped / static_cast<double>(b) : 0.0;
  out.approx_kl = b > 0 ? kl / static_cast<double>(b) : 0.0;
  return out;
}

PpoStats ppo_update(nn::ParamStore& params, nn::Adam& opt, int n, const PpoConfig& cfg, Rng& rng,
                    const PpoLossFn& loss) {
  PpoStats stats;
  if (n <= 0) return stats;
  std::vector<nn::Mat> snapshot;
  for (const nn::Parameter* p : std::as_const(params).all()) snapshot.push_back(p->value);
  const nn::Adam opt_snapshot = opt;

  auto restore = [&](const std::string& why) {
    auto ps = params.all();
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = snapshot[i];
    opt = opt_snapshot;
    params.zero_grad();
    stats.aborted = true;
    stats.diagnostics = why;
  };

  std::vector<int> order(static_cast<std::size_t>(n));
  for (int e = 0; e < cfg.epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < n; start += cfg.batch) {
      const int end = std::min(n, start + cfg.batch);
      std::vector<int> idx(order.begin() + start, order.begin() + end);
      params.zero_grad();
      nn::Tape tape;
      PpoLoss l = loss(tape, idx);
      const double total = l.total.scalar();
      if (!std::isfinite(total)) {
        restore("non-finite loss at epoch " + std::to_string(e) + ", minibatch " +
                std::to_string(stats.minibatches) + " (policy " + std::to_string(l.policy) +
                ", value " + std::to_string(l.value) + ")");
        return stats;
      }
      tape.backward(l.total);
      const double gn = nn::clip_grad_norm(params.all(), cfg.max_grad_norm);
      if (!std::isfinite(gn)) {
        restore("non-finite gradient norm at epoch " + std::to_string(e));
        return stats;
      }
      opt.step();
      stats.policy_loss += l.policy;
      stats.value_loss += l.value;
      stats.entropy += l.entropy;
      stats.clip_fraction += l.clip_fraction;
      stats.approx_kl += l.approx_kl;
      stats.grad_norm += gn;
      ++stats.minibatches;
    }
  }
  const double k = static_cast<double>(stats.minibatches);
  stats.policy_loss /= k;
  stats.value_loss /= k;
  stats.entropy /= k;
  stats.clip_fraction /= k;
  stats.approx_kl /= k;
  stats.grad_norm /= k;
  params.zero_grad();
  return stats;
}

}  // namespace decor
