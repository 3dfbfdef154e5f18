#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "common/kv_config.hpp"
#include "demand/demand.hpp"
#include "graph/scenario.hpp"
#include "nn/adam.hpp"
#include "policy/control_policy.hpp"
#include "policy/design_policy.hpp"
#include "train/ppo.hpp"
#include "train/rollout.hpp"
#include "train/welford.hpp"

namespace decor {

enum class TrainMode { kCoopt, kSequential };

const char* to_string(TrainMode m);
TrainMode parse_train_mode(const std::string& s);  // coopt|sequential

struct TrainConfig {
  std::uint64_t seed = 1;
  TrainMode mode = TrainMode::kCoopt;
  long long rounds = 0;              // 0: as many as the budget allows
  long long budget_sim_steps = 200000;
  int checkpoint_every = 50;
  std::string scenario_path;         // empty: built-in corridor
  std::string demand_path;           // empty: synthetic hour
  std::uint64_t demand_seed = 7;
  double train_split_s = 2400.0;     // source seconds before this train, the rest evaluate
  std::string layout;                // sequential: scenario layout name or layout-list file

  RolloutConfig rollout;
  PpoConfig control = control_ppo_defaults();
  PpoConfig design = design_ppo_defaults();
  ControlPolicyConfig control_net;
  DesignPolicyConfig design_net;

  int eval_runs = 10;
  bool eval_deterministic = true;
  std::uint64_t eval_seed = 1001;

  std::string source_text;  // config file contents, copied into run directories

  static TrainConfig defaults();
  // Unknown sections or keys are rejected.
  static TrainConfig from_kv(const KeyValueFile& kv);
  static TrainConfig load(const std::string& path);
  // Overrides one key; validation is left to the consumer.
  void set(const std::string& section, const std::string& key, const std::string& value);
  void validate() const;
  // Largest number of sim steps one round can take.
  long long max_round_sim_steps() const;
};

// Scenario plus the demand hour, split into training and evaluation parts.
struct TrainingData {
  Scenario scenario;
  DemandTable demand;
  DemandTable train;
  DemandTable eval;
};

TrainingData load_training_data(const TrainConfig& cfg);

// Scenario layout name, or a file holding a layout list.
std::vector<CrosswalkProposal> resolve_layout(const Scenario& sc, const std::string& ref);

struct ControlRecord {
  Eigen::RowVectorXd state;
  JointAction action;
  int n_crosswalks = 0;
  double log_prob = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

struct DesignTuple {
  nn::GraphInput context;
  std::vector<CrosswalkProposal> context_layout;
  nn::Mat raw;
  std::vector<CrosswalkProposal> layout;
  double reward = 0.0;
  double log_prob = 0.0;
};

struct RoundLog {
  long long round = 0;
  std::vector<CrosswalkProposal> layout;
  double design_reward = 0.0;
  double mean_arrival_s = 0.0;
  double control_reward_mean = 0.0;
  double mean_ped_wait_s = 0.0;
  double mean_veh_wait_s = 0.0;
  long long conflicts = 0;
  int survived = 0;
  long long control_records = 0;  // added this round
  long long sim_steps = 0;        // cumulative
  std::vector<double> alphas;
  std::optional<PpoStats> control_update;
  std::optional<PpoStats> design_update;

  nlohmann::json to_json() const;
};

class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);
  Trainer(const TrainConfig& cfg, TrainingData data);

  bool finished() const;
  RoundLog run_round();

  // Final design: modes of the design policy on the last context layout
  // (sequential: the frozen layout).
  std::vector<CrosswalkProposal> final_layout() const;
  nlohmann::json checkpoint() const;

  const TrainConfig& config() const { return cfg_; }
  const TrainingData& data() const { return data_; }
  const ControlPolicy& control() const { return control_; }
  const DesignPolicy& design() const { return design_; }
  const WelfordVector& obs_stats() const { return obs_stats_; }
  long long rounds_done() const { return round_; }
  long long sim_steps() const { return sim_steps_; }
  long long control_records() const { return control_records_; }
  long long design_tuples() const { return design_tuples_; }
  long long control_updates() const { return control_updates_; }
  long long design_updates() const { return design_updates_; }
  std::size_t pending_control_records() const { return buffer_.size(); }

 private:
  void absorb_rollout(RolloutResult& res, RoundLog& log);
  PpoStats update_control();
  PpoStats update_design();
  long long planned_rounds() const;

  TrainConfig cfg_;
  TrainingData data_;
  ControlPolicy control_;
  DesignPolicy design_;
  nn::Adam control_opt_;
  nn::Adam design_opt_;
  WelfordVector obs_stats_;
  WelfordStats reward_stats_;
  WelfordStats design_reward_stats_;
  std::deque<ControlRecord> buffer_;
  std::vector<DesignTuple> design_buffer_;
  std::vector<CrosswalkProposal> context_layout_;
  std::vector<CrosswalkProposal> fixed_layout_;
  long long round_ = 0;
  long long sim_steps_ = 0;
  long long control_records_ = 0;
  long long design_tuples_ = 0;
  long long control_updates_ = 0;
  long long design_updates_ = 0;
};

struct TrainSummary {
  long long rounds = 0;
  long long sim_steps = 0;
  long long control_records = 0;
  long long design_tuples = 0;
  std::vector<RoundLog> logs;
  std::vector<CrosswalkProposal> final_layout;
  nlohmann::json checkpoint;
};

// Runs to completion. With a non-empty out_dir writes config.ini,
// rounds.jsonl, checkpoint.json (every checkpoint_every rounds and at the
// end) and metrics.json.
TrainSummary cooptimize(const TrainConfig& cfg, const std::string& out_dir = "");
TrainSummary train_sequential(const TrainConfig& cfg, const std::string& out_dir = "");
TrainSummary run_training(const TrainConfig& cfg, const std::string& out_dir = "");

// Controller and layout restored from a checkpoint.
struct LoadedCheckpoint {
  TrainConfig config;
  std::unique_ptr<ControlPolicy> control;
  std::unique_ptr<DesignPolicy> design;  // coopt only
  WelfordVector obs_stats;
  std::vector<CrosswalkProposal> context_layout;
  std::vector<CrosswalkProposal> final_layout;
};

LoadedCheckpoint load_checkpoint(const nlohmann::json& j);
LoadedCheckpoint load_checkpoint_file(const std::string& path);

struct EvalSettings {
  ControlMode controller = ControlMode::kFixedTime;
  double alpha = 1.0;
  int runs = 10;
  std::uint64_t seed = 1001;
  bool deterministic = true;
};

// Runs on the evaluation split. Seeds depend on (seed, alpha, run) only, so
// every controller and layout sees the same demand windows and warmups.
std::vector<EpisodeMetrics> evaluate_controller(const LayoutGraph& g, const DemandTable& eval_source,
                                                const TrainConfig& cfg, const EvalSettings& es,
                                                const ControlPolicy* policy,
                                                const WelfordVector* obs_stats);

}  // namespace decor
