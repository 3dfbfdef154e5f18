#include "reward/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"

namespace decor {

void RewardWeights::validate() const {
  for (double b : {beta1, beta2, beta3, beta4, beta5})
    if (!(b > 0.0)) throw Error(ErrorKind::kConfig, "reward betas must be > 0");
  if (!(clip_lo < clip_hi) || clip_hi > 0.0)
    throw Error(ErrorKind::kConfig, "reward clip range must satisfy lo < hi <= 0");
}

const char* to_string(RewardVariant v) {
  switch (v) {
    case RewardVariant::kMwaq: return "mwaq";
    case RewardVariant::kLinear: return "li-mwaq";
    case RewardVariant::kExponential: return "ei-mwaq";
  }
  return "?";
}

RewardVariant parse_reward_variant(const std::string& s) {
  if (s == "mwaq") return RewardVariant::kMwaq;
  if (s == "li-mwaq" || s == "li") return RewardVariant::kLinear;
  if (s == "ei-mwaq" || s == "ei") return RewardVariant::kExponential;
  throw Error(ErrorKind::kConfig, "unknown reward variant: " + s);
}

double mwaq(double max_wait, std::span<const double> queues) {
  if (max_wait <= 0.0) return 0.0;
  return max_wait * std::accumulate(queues.begin(), queues.end(), 0.0);
}

LocationTerms location_terms(const StepObservation& obs, const RewardWeights& w) {
  LocationTerms lt;
  lt.int_veh = w.beta1 * mwaq(obs.intersection.veh_max_wait, obs.intersection.veh_queue);
  lt.int_ped = w.beta2 * mwaq(obs.intersection.ped_max_wait, obs.intersection.ped_queue);
  for (const auto& c : obs.crosswalks) {
    lt.mb_veh.push_back(w.beta3 * mwaq(c.veh_max_wait, c.veh_queue));
    lt.mb_ped.push_back(w.beta4 * mwaq(c.ped_max_wait, c.ped_queue));
  }
  return lt;
}

double aggregate_crosswalks(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

AggregatedTerms aggregate(const LocationTerms& lt) {
  AggregatedTerms a;
  a.t[0] = lt.int_veh;
  a.t[1] = lt.int_ped;
  a.t[2] = aggregate_crosswalks(lt.mb_veh);
  a.t[3] = aggregate_crosswalks(lt.mb_ped);
  return a;
}

double control_reward_raw(const AggregatedTerms& terms, RewardVariant v, const RewardWeights& w) {
  double penalty = 0.0;
  for (double t : terms.t) {
    switch (v) {
      case RewardVariant::kMwaq: penalty += t; break;
      case RewardVariant::kLinear: penalty += w.beta5 * t; break;
      case RewardVariant::kExponential: penalty += std::exp(w.beta5 * t); break;
    }
  }
  return -penalty;
}

double control_reward(const AggregatedTerms& terms, RewardVariant v, const RewardWeights& w) {
  const double r = control_reward_raw(terms, v, w);
  if (std::isnan(r)) return w.clip_lo;
  return std::clamp(r, w.clip_lo, w.clip_hi);
}

double step_reward(const StepObservation& obs, RewardVariant v, const RewardWeights& w) {
  return control_reward(aggregate(location_terms(obs, w)), v, w);
}

double design_reward(std::span<const double> arrival_means, int n_crosswalks,
                     const RewardWeights& w) {
  if (arrival_means.empty()) throw Error(ErrorKind::kValidation, "design reward needs N >= 1");
  double s = 0.0;
  for (double a : arrival_means) s += w.lambda1 * a + w.lambda2 * n_crosswalks;
  return s / static_cast<double>(arrival_means.size());
}

}  // namespace decor
