#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "report/report.hpp"
#include "train/trainer.hpp"

namespace decor {

inline constexpr double kExtraCrosswalkWidthM = 5.0;
inline constexpr double kExtraCrosswalkOffsetM = 50.0;  // from the east end

struct EvalOptions {
  std::vector<double> alphas = {1.0};
  std::vector<std::string> controllers = {"learned", "fixed", "unsignalized"};
  // baseline7, designed, designed+extra, or any scenario layout name.
  std::vector<std::string> layouts = {"baseline7", "designed", "designed+extra"};
  int runs = 0;  // <= 0: the config's eval runs
  std::optional<std::uint64_t> seed;
  std::string scenario_path;  // empty: the config's scenario
  double extra_location_m = -1.0;  // < 0: corridor length minus 50 m
  double extra_width_m = kExtraCrosswalkWidthM;
};

ControlMode parse_controller(const std::string& name);
std::vector<std::string> split_list(const std::string& text);

// Layout plus one crosswalk; the result is merged like a design proposal.
std::vector<CrosswalkProposal> with_extra_crosswalk(const CorridorSpec& spec,
                                                    const std::vector<CrosswalkProposal>& layout,
                                                    double location_m, double width_m);

TrainSummary cmd_train(const TrainConfig& cfg, const std::string& out_dir);

// Without a checkpoint only the non-learned controllers run and "designed"
// means the config's [run] layout.
EvalReport cmd_eval(const TrainConfig& cfg, const LoadedCheckpoint* checkpoint, const EvalOptions& opt);

// Layout empty: the sequential checkpoint's layout. Both controllers run on
// the layout with and without the extra crosswalk.
RobustnessReport cmd_robustness(const LoadedCheckpoint& coopt, const LoadedCheckpoint& sequential,
                                const std::vector<CrosswalkProposal>& layout, const EvalOptions& opt);

struct AblationOptions {
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  long long budget_sim_steps = 0;  // <= 0: the config's budget
  double alpha = 1.0;
};

// Trains one sequential controller per variant and seed on the config's
// layout (reference4 when unset) and evaluates it at one scale.
AblationReport cmd_ablate_reward(const TrainConfig& cfg, const AblationOptions& opt);

DesignInspection cmd_inspect_design(const LoadedCheckpoint& checkpoint, int resolution,
                                    const std::string& scenario_path = "");

// Files written by the CLI: <stem>.json and <stem>.csv (and the extra
// tables named in the README).
void write_eval_report(const EvalReport& r, const std::string& dir, const std::string& stem);
void write_robustness_report(const RobustnessReport& r, const std::string& dir);
void write_ablation_report(const AblationReport& r, const std::string& dir);
void write_design_inspection(const DesignInspection& d, const CorridorSpec& spec, const std::string& dir);

}  // namespace decor
