#pragma once

#include <span>
#include <string>
#include <vector>

#include "sim/mesosim.hpp"

namespace decor {

struct RewardWeights {
  double beta1 = 1.0 / (2.0 * 4.0);   // intersection vehicles, |D_int| = 4
  double beta2 = 1.0 / (10.0 * 4.0);  // intersection pedestrians
  double beta3 = 1.0 / (2.0 * 2.0);   // crosswalk vehicles, |D_mb| = 2
  double beta4 = 0.1;                 // crosswalk pedestrians
  double beta5 = 0.5;                 // LI / EI scale
  double clip_lo = -2500.0;
  double clip_hi = 0.0;
  double lambda1 = -1.0;  // arrival time
  double lambda2 = -2.0;  // per crosswalk

  void validate() const;
};

enum class RewardVariant { kMwaq, kLinear, kExponential };

const char* to_string(RewardVariant v);
RewardVariant parse_reward_variant(const std::string& s);

// max_wait * sum(queues); 0 when nobody waits.
double mwaq(double max_wait, std::span<const double> queues);

struct LocationTerms {
  double int_veh = 0.0;
  double int_ped = 0.0;
  std::vector<double> mb_veh;
  std::vector<double> mb_ped;
};

LocationTerms location_terms(const StepObservation& obs, const RewardWeights& w);

// Euclidean norm, 0 for an empty list.
double aggregate_crosswalks(std::span<const double> values);

struct AggregatedTerms {
  double t[4] = {0.0, 0.0, 0.0, 0.0};  // int veh, int ped, L2 mb veh, L2 mb ped
};

AggregatedTerms aggregate(const LocationTerms& lt);

// Unclipped penalty sum, then clipped into [clip_lo, clip_hi].
double control_reward_raw(const AggregatedTerms& terms, RewardVariant v, const RewardWeights& w);
double control_reward(const AggregatedTerms& terms, RewardVariant v, const RewardWeights& w);
double step_reward(const StepObservation& obs, RewardVariant v, const RewardWeights& w);

// Mean over environments of lambda1 * arrival + lambda2 * crosswalk count.
double design_reward(std::span<const double> arrival_means, int n_crosswalks,
                     const RewardWeights& w);

}  // namespace decor
