#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graph/corridor_graph.hpp"
#include "nn/layers.hpp"
#include "sim/mesosim.hpp"

namespace decor {

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // sample std, 0 for a single run

  bool operator==(const Stat&) const = default;
};

Stat stat_of(const std::vector<double>& xs);

struct EvalRow {
  std::string layout;      // baseline7, designed, designed+extra or a scenario layout name
  std::string controller;  // learned, fixed, unsignalized (robustness: learned-coopt, ...)
  double alpha = 1.0;
  int n_runs = 0;
  Stat ped_arrival_s;
  Stat ped_wait_s;
  Stat veh_wait_s;
  Stat ped_max_wait_s;
  Stat veh_max_wait_s;
  Stat ped_total_wait_s;
  Stat veh_total_wait_s;
  Stat conflicts;

  bool operator==(const EvalRow&) const = default;
};

EvalRow summarize_runs(const std::string& layout, const std::string& controller, double alpha,
                       const std::vector<EpisodeMetrics>& runs);

struct EvalReport {
  std::string command = "eval";
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::vector<EvalRow> rows;

  const EvalRow* find(const std::string& layout, const std::string& controller, double alpha) const;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  std::string to_csv() const;
  static EvalReport from_csv(const std::string& text);

  bool operator==(const EvalReport&) const = default;
};

// Percent gaps are (sequential - coopt) / sequential * 100.
struct GapRow {
  double alpha = 1.0;
  double coopt_ped_wait_s = 0.0;
  double seq_ped_wait_s = 0.0;
  double ped_gap_pct = 0.0;
  double coopt_veh_wait_s = 0.0;
  double seq_veh_wait_s = 0.0;
  double veh_gap_pct = 0.0;

  bool operator==(const GapRow&) const = default;
};

double gap_percent(double coopt, double seq);

// The gap table is the CSV form; the eval rows travel in their own CSV.
struct RobustnessReport {
  EvalReport eval;
  double extra_location_m = 0.0;
  double extra_width_m = 0.0;
  std::vector<GapRow> gaps;

  nlohmann::json to_json() const;
  static RobustnessReport from_json(const nlohmann::json& j);
  std::string gaps_csv() const;
  static std::vector<GapRow> gaps_from_csv(const std::string& text);

  bool operator==(const RobustnessReport&) const = default;
};

struct AblationRow {
  std::string variant;  // mwaq, li-mwaq, ei-mwaq
  std::string cls;      // ped, veh
  std::string metric;   // total_wait_s, max_wait_s
  Stat value;
  std::vector<double> per_seed;

  bool operator==(const AblationRow&) const = default;
};

struct AblationReport {
  std::vector<std::uint64_t> seeds;
  long long budget_sim_steps = 0;
  double alpha = 1.0;
  int eval_runs = 0;
  std::string layout;
  std::uint64_t config_hash = 0;
  std::vector<AblationRow> rows;

  const AblationRow* find(const std::string& variant, const std::string& cls,
                          const std::string& metric) const;

  nlohmann::json to_json() const;
  static AblationReport from_json(const nlohmann::json& j);
  // Seeds and budget go in a footer.
  std::string to_csv() const;
  static AblationReport from_csv(const std::string& text);

  bool operator==(const AblationReport&) const = default;
};

struct DesignInspection {
  nn::Mat means;  // M x 2 normalized
  double sigma = 0.0;
  std::vector<CrosswalkProposal> means_m;
  std::vector<Eigen::RowVector2d> modes;  // normalized
  std::vector<CrosswalkProposal> proposals;  // modes in metres, merged
  std::vector<CrosswalkProposal> context_layout;
  int resolution = 0;
  std::vector<double> density;  // resolution^2, row u-major, cell centres

  nlohmann::json to_json() const;
  static DesignInspection from_json(const nlohmann::json& j);
  // Columns u,v,location_m,width_m,density.
  std::string density_csv(const CorridorSpec& spec) const;
};

// "grid" (0.5 to 2.75 by 0.25), "a:b:step", or a comma list.
std::vector<double> parse_sweep(const std::string& text);
std::vector<double> standard_alpha_grid();

// Round-trip formatting for CSV cells.
std::string format_double(double x);
double parse_double(const std::string& s);

void write_file(const std::string& path, const std::string& text);
std::string read_file(const std::string& path);

}  // namespace decor
