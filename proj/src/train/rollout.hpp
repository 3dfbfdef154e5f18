#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "demand/demand.hpp"
#include "policy/control_policy.hpp"
#include "reward/rewards.hpp"
#include "sim/mesosim.hpp"
#include "train/welford.hpp"

namespace decor {

struct RolloutConfig {
  int n_envs = 4;
  SimConfig sim;                  // learned mode for training
  double alpha_min = 1.0;
  double alpha_max = 2.25;
  double window_start_s = 0.0;    // source demand window episodes are cut from
  double window_end_s = 2400.0;
  RewardVariant variant = RewardVariant::kExponential;
  RewardWeights weights;
  double obs_clip = 10.0;
  bool deterministic = false;

  // Source seconds consumed by one episode: longest warmup plus horizon.
  double episode_seconds() const;
  void validate() const;
};

// Number of worker threads for environment fan-out (DECOR_THREADS, default 1).
int worker_threads();

struct ControlStep {
  Eigen::RowVectorXd state;  // normalized, flattened
  JointAction action;
  int n_crosswalks = 0;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;  // clipped, not yet normalized
};

struct EpisodeSpec {
  std::uint64_t seed = 0;
  double alpha = 1.0;
  double t_start = 0.0;
};

struct EnvRollout {
  int env = 0;
  EpisodeSpec spec;
  int warmup_steps = 0;
  long long sim_steps = 0;
  std::vector<ControlStep> steps;
  Eigen::MatrixXd raw_rows;  // every observed feature row, for the state statistics
  double last_value = 0.0;
  EpisodeMetrics metrics;    // per-agent records dropped
  bool failed = false;
  std::string error;
};

// Draws alpha and the source window start for one environment.
EpisodeSpec draw_episode(std::uint64_t env_seed, const RolloutConfig& cfg);

// One episode on layout g. Learned mode needs policy and stats; other modes
// ignore them. When record is false only metrics are kept.
EnvRollout run_episode(const LayoutGraph& g, const DemandTable& source, const EpisodeSpec& spec,
                       const RolloutConfig& cfg, const ControlPolicy* policy,
                       const WelfordVector* obs_stats, bool record);

struct RolloutResult {
  std::vector<EnvRollout> envs;  // failed ones keep only their error
  int survived = 0;
  long long sim_steps = 0;
};

// N environments with independent draws, run on up to worker_threads()
// threads against a read-only policy and statistics snapshot. Throws when
// fewer than half survive.
RolloutResult rollout_parallel(const LayoutGraph& g, const DemandTable& source,
                               const ControlPolicy& policy, const WelfordVector& obs_stats,
                               const RolloutConfig& cfg, std::uint64_t round_seed);

// Runs fn(i) for i in [0, n) on up to `threads` threads.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace decor
