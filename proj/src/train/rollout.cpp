#include "train/rollout.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <thread>

#include "common/error.hpp"
#include "nn/tape.hpp"

namespace decor {

double RolloutConfig::episode_seconds() const {
  return static_cast<double>(sim.warmup_max + sim.horizon_steps) * sim.action_repeat *
         sim.sim_step_s;
}

void RolloutConfig::validate() const {
  sim.validate();
  weights.validate();
  if (n_envs < 1) throw Error(ErrorKind::kConfig, "need at least one environment");
  if (!(alpha_min > 0.0) || alpha_max < alpha_min)
    throw Error(ErrorKind::kConfig, "demand scale range must satisfy 0 < min <= max");
  if (window_end_s - window_start_s < episode_seconds())
    throw Error(ErrorKind::kConfig, "demand window shorter than one episode");
  if (!(obs_clip > 0.0)) throw Error(ErrorKind::kConfig, "observation clip must be positive");
}

int worker_threads() {
  if (const char* v = std::getenv("DECOR_THREADS")) {
    const int n = std::atoi(v);
    if (n >= 1) return n;
  }
  return 1;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  // First failure by index is rethrown after the join.
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += threads) {
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

EpisodeSpec draw_episode(std::uint64_t env_seed, const RolloutConfig& cfg) {
  EpisodeSpec s;
  s.seed = env_seed;
  Rng ra(derive_seed(env_seed, {kSeedAlpha}));
  s.alpha = cfg.alpha_min + (cfg.alpha_max - cfg.alpha_min) * uniform01(ra);
  Rng rw(derive_seed(env_seed, {kSeedWindow}));
  const double span = cfg.window_end_s - cfg.window_start_s - cfg.episode_seconds();
  s.t_start = cfg.window_start_s + std::max(0.0, span) * uniform01(rw);
  return s;
}

EnvRollout run_episode(const LayoutGraph& g, const DemandTable& source, const EpisodeSpec& spec,
                       const RolloutConfig& cfg, const ControlPolicy* policy,
                       const WelfordVector* obs_stats, bool record) {
  EnvRollout out;
  out.spec = spec;
  const bool learned = cfg.sim.mode == ControlMode::kLearned;
  if (learned && (policy == nullptr || obs_stats == nullptr))
    throw Error(ErrorKind::kContract, "learned control needs a policy and state statistics");
  if (learned && g.crosswalk_count() > policy->config().slots)
    throw Error(ErrorKind::kContract, "layout has more crosswalks than controller slots");

  const DemandTable demand = scale_demand(source, spec.alpha, spec.t_start, cfg.episode_seconds(),
                                          derive_seed(spec.seed, {kSeedDemand}));
  Simulator sim(g, demand, cfg.sim, derive_seed(spec.seed, {kSeedSim}));
  out.warmup_steps = sim.warmup();
  Rng prng(derive_seed(spec.seed, {kSeedPolicy}));
  const int n_cw = g.crosswalk_count();
  const int R = cfg.sim.action_repeat;

  if (record) {
    out.steps.reserve(static_cast<std::size_t>(cfg.sim.horizon_steps));
    out.raw_rows.resize(static_cast<Eigen::Index>(cfg.sim.horizon_steps) * R,
                        cfg.sim.feature_columns());
  }
  int t = 0;
  while (!sim.done()) {
    if (learned) {
      const Eigen::MatrixXd obs = sim.observe();
      const Eigen::MatrixXd norm = obs_stats->normalize(obs, cfg.obs_clip);
      const auto out_pol = policy->evaluate(norm);
      ControlSample s = control_sample(out_pol.phase_logits, out_pol.crosswalk_logits, n_cw, prng,
                                       cfg.deterministic);
      const StepObservation o = sim.step(to_commands(s.action));
      if (record) {
        out.raw_rows.middleRows(static_cast<Eigen::Index>(t) * R, R) = obs;
        ControlStep cs;
        cs.state = flatten_observation(norm);
        cs.action = std::move(s.action);
        cs.n_crosswalks = n_cw;
        cs.log_prob = s.log_prob;
        cs.value = out_pol.value;
        cs.reward = step_reward(o, cfg.variant, cfg.weights);
        out.steps.push_back(std::move(cs));
      }
    } else {
      sim.step();
    }
    ++t;
  }
  if (learned && record) {
    out.last_value = policy->evaluate(obs_stats->normalize(sim.observe(), cfg.obs_clip)).value;
  } else {
    out.raw_rows.resize(0, cfg.sim.feature_columns());
  }
  out.sim_steps = sim.clock();
  out.metrics = sim.episode_metrics();
  out.metrics.records.clear();
  return out;
}

RolloutResult rollout_parallel(const LayoutGraph& g, const DemandTable& source,
                               const ControlPolicy& policy, const WelfordVector& obs_stats,
                               const RolloutConfig& cfg, std::uint64_t round_seed) {
  RolloutResult res;
  res.envs.resize(static_cast<std::size_t>(cfg.n_envs));
  parallel_for(cfg.n_envs, worker_threads(), [&](int i) {
    const EpisodeSpec spec = draw_episode(derive_seed(round_seed, {static_cast<std::uint64_t>(i)}), cfg);
    try {
      res.envs[static_cast<std::size_t>(i)] = run_episode(g, source, spec, cfg, &policy, &obs_stats, true);
    } catch (const std::exception& e) {
      EnvRollout& f = res.envs[static_cast<std::size_t>(i)];
      f = EnvRollout{};
      f.spec = spec;
      f.failed = true;
      f.error = e.what();
    }
    res.envs[static_cast<std::size_t>(i)].env = i;
  });
  std::string first_error;
  for (const auto& e : res.envs) {
    res.sim_steps += e.sim_steps;
    if (!e.failed) ++res.survived;
    else if (first_error.empty()) first_error = e.error;
  }
  if (2 * res.survived < cfg.n_envs)
    throw Error(ErrorKind::kNumerical, "only " + std::to_string(res.survived) + " of " +
                                           std::to_string(cfg.n_envs) +
                                           " environments survived: " + first_error);
  return res;
}

}  // namespace decor
