#include "report/commands.hpp"

#include <filesystem>

#include "common/error.hpp"
#include "common/kv_config.hpp"
#include "policy/design_policy.hpp"

namespace decor {

ControlMode parse_controller(const std::string& name) {
  if (name == "learned") return ControlMode::kLearned;
  if (name == "fixed" || name == "fixed-time") return ControlMode::kFixedTime;
  if (name == "unsignalized") return ControlMode::kUnsignalized;
  throw Error(ErrorKind::kConfig, "unknown controller: " + name + " (learned|fixed|unsignalized)");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  return out;
}

std::vector<CrosswalkProposal> with_extra_crosswalk(const CorridorSpec& spec,
                                                    const std::vector<CrosswalkProposal>& layout,
                                                    double location_m, double width_m) {
  if (location_m < spec.loc_min_m || location_m > spec.loc_max_m)
    throw Error(ErrorKind::kConfig, "extra crosswalk location outside the corridor range");
  auto out = layout;
  out.push_back({location_m, width_m});
  return merge_proposals(out);
}

TrainSummary cmd_train(const TrainConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  return run_training(cfg, out_dir);
}

namespace {

TrainingData data_for(TrainConfig cfg, const std::string& scenario_path) {
  if (!scenario_path.empty()) cfg.scenario_path = scenario_path;
  return load_training_data(cfg);
}

double extra_location(const EvalOptions& opt, const CorridorSpec& spec) {
  return opt.extra_location_m >= 0.0 ? opt.extra_location_m : spec.length_m - kExtraCrosswalkOffsetM;
}

void check_slots(const std::vector<CrosswalkProposal>& layout, const ControlPolicy& p,
                 const std::string& name) {
  if (static_cast<int>(layout.size()) > p.config().slots)
    throw Error(ErrorKind::kContract, "layout '" + name + "' has " + std::to_string(layout.size()) +
                                          " crosswalks, the controller has " +
                                          std::to_string(p.config().slots) + " slots");
}

EvalSettings settings_for(const TrainConfig& cfg, const EvalOptions& opt, ControlMode mode, double alpha) {
  EvalSettings es;
  es.controller = mode;
  es.alpha = alpha;
  es.runs = opt.runs > 0 ? opt.runs : cfg.eval_runs;
  es.seed = opt.seed.value_or(cfg.eval_seed);
  es.deterministic = cfg.eval_deterministic;
  return es;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace

EvalReport cmd_eval(const TrainConfig& cfg, const LoadedCheckpoint* checkpoint, const EvalOptions& opt) {
  const TrainingData data = data_for(cfg, opt.scenario_path);
  const CorridorSpec& spec = data.scenario.corridor;

  auto designed = [&]() -> std::vector<CrosswalkProposal> {
    if (checkpoint) return checkpoint->final_layout;
    if (cfg.layout.empty())
      throw Error(ErrorKind::kConfig, "layout 'designed' needs a checkpoint or a [run] layout");
    return resolve_layout(data.scenario, cfg.layout);
  };
  auto layout_of = [&](const std::string& name) -> std::vector<CrosswalkProposal> {
    if (name == "designed") return designed();
    if (name == "designed+extra")
      return with_extra_crosswalk(spec, designed(), extra_location(opt, spec), opt.extra_width_m);
    return data.scenario.layout(name);
  };

  EvalReport report;
  report.seed = opt.seed.value_or(cfg.eval_seed);
  report.config_hash = fnv1a64(cfg.source_text);
  for (const auto& lname : opt.layouts) {
    const auto layout = layout_of(lname);
    const LayoutGraph g = build_graph(spec, layout);
    for (const auto& cname : opt.controllers) {
      const ControlMode mode = parse_controller(cname);
      const ControlPolicy* policy = nullptr;
      const WelfordVector* stats = nullptr;
      if (mode == ControlMode::kLearned) {
        if (!checkpoint) throw Error(ErrorKind::kConfig, "the learned controller needs a checkpoint");
        check_slots(layout, *checkpoint->control, lname);
        policy = checkpoint->control.get();
        stats = &checkpoint->obs_stats;
      }
      for (double alpha : opt.alphas) {
        const auto runs = evaluate_controller(g, data.eval, cfg, settings_for(cfg, opt, mode, alpha), policy, stats);
        report.rows.push_back(summarize_runs(lname, cname, alpha, runs));
      }
    }
  }
  return report;
}

RobustnessReport cmd_robustness(const LoadedCheckpoint& coopt, const LoadedCheckpoint& sequential,
                                const std::vector<CrosswalkProposal>& layout, const EvalOptions& opt) {
  const TrainConfig& cfg = coopt.config;
  if (coopt.obs_stats.dim() != sequential.obs_stats.dim())
    throw Error(ErrorKind::kContract, "checkpoints observe different feature widths");
  const TrainingData data = data_for(cfg, opt.scenario_path);
  const CorridorSpec& spec = data.scenario.corridor;
  const auto base = layout.empty() ? sequential.final_layout : layout;

  RobustnessReport r;
  r.extra_location_m = extra_location(opt, spec);
  r.extra_width_m = opt.extra_width_m;
  const auto extra = with_extra_crosswalk(spec, base, r.extra_location_m, r.extra_width_m);
  r.eval.command = "robustness";
  r.eval.seed = opt.seed.value_or(cfg.eval_seed);
  r.eval.config_hash = fnv1a64(cfg.source_text);

  const std::pair<std::string, const LoadedCheckpoint*> agents[] = {{"learned-coopt", &coopt},
                                                                    {"learned-sequential", &sequential}};
  const std::pair<std::string, std::vector<CrosswalkProposal>> layouts[] = {{"designed", base},
                                                                            {"designed+extra", extra}};
  for (const auto& [lname, l] : layouts) {
    const LayoutGraph g = build_graph(spec, l);
    for (const auto& [cname, ck] : agents) {
      check_slots(l, *ck->control, lname);
      for (double alpha : opt.alphas) {
        const auto runs = evaluate_controller(g, data.eval, cfg, settings_for(cfg, opt, ControlMode::kLearned, alpha),
                                              ck->control.get(), &ck->obs_stats);
        r.eval.rows.push_back(summarize_runs(lname, cname, alpha, runs));
      }
    }
  }
  for (double alpha : opt.alphas) {
    const EvalRow* c = r.eval.find("designed+extra", "learned-coopt", alpha);
    const EvalRow* s = r.eval.find("designed+extra", "learned-sequential", alpha);
    GapRow gap;
    gap.alpha = alpha;
    gap.coopt_ped_wait_s = c->ped_wait_s.mean;
    gap.seq_ped_wait_s = s->ped_wait_s.mean;
    gap.ped_gap_pct = gap_percent(gap.coopt_ped_wait_s, gap.seq_ped_wait_s);
    gap.coopt_veh_wait_s = c->veh_wait_s.mean;
    gap.seq_veh_wait_s = s->veh_wait_s.mean;
    gap.veh_gap_pct = gap_percent(gap.coopt_veh_wait_s, gap.seq_veh_wait_s);
    r.gaps.push_back(gap);
  }
  return r;
}

AblationReport cmd_ablate_reward(const TrainConfig& cfg, const AblationOptions& opt) {
  if (opt.seeds.empty()) throw Error(ErrorKind::kConfig, "ablation needs at least one seed");
  AblationReport report;
  report.seeds = opt.seeds;
  report.budget_sim_steps = opt.budget_sim_steps > 0 ? opt.budget_sim_steps : cfg.budget_sim_steps;
  report.alpha = opt.alpha;
  report.eval_runs = cfg.eval_runs;
  report.layout = cfg.layout.empty() ? "reference4" : cfg.layout;

  const std::pair<RewardVariant, std::string> variants[] = {{RewardVariant::kMwaq, "mwaq"},
                                                             {RewardVariant::kLinear, "li-mwaq"},
                                                             {RewardVariant::kExponential, "ei-mwaq"}};
  for (const auto& [variant, vname] : variants) {
    std::vector<double> ped_total, veh_total, ped_max, veh_max;
    for (std::uint64_t seed : opt.seeds) {
      TrainConfig c = cfg;
      c.mode = TrainMode::kSequential;
      c.layout = report.layout;
      c.seed = seed;
      c.budget_sim_steps = report.budget_sim_steps;
      c.rollout.variant = variant;
      Trainer tr(c);
      while (!tr.finished()) tr.run_round();
      const LayoutGraph g = build_graph(tr.data().scenario.corridor, tr.final_layout());
      EvalSettings es;
      es.controller = ControlMode::kLearned;
      es.alpha = opt.alpha;
      es.runs = c.eval_runs;
      es.seed = c.eval_seed;
      es.deterministic = c.eval_deterministic;
      const auto runs = evaluate_controller(g, tr.data().eval, tr.config(), es, &tr.control(), &tr.obs_stats());
      const EvalRow row = summarize_runs(report.layout, vname, opt.alpha, runs);
      ped_total.push_back(row.ped_total_wait_s.mean);
      veh_total.push_back(row.veh_total_wait_s.mean);
      ped_max.push_back(row.ped_max_wait_s.mean);
      veh_max.push_back(row.veh_max_wait_s.mean);
      report.config_hash = fnv1a64(tr.config().source_text);
    }
    report.rows.push_back({vname, "ped", "total_wait_s", stat_of(ped_total), ped_total});
    report.rows.push_back({vname, "ped", "max_wait_s", stat_of(ped_max), ped_max});
    report.rows.push_back({vname, "veh", "total_wait_s", stat_of(veh_total), veh_total});
    report.rows.push_back({vname, "veh", "max_wait_s", stat_of(veh_max), veh_max});
  }
  // Hash of the base config, not of the last variant run.
  report.config_hash = fnv1a64(cfg.source_text);
  return report;
}

DesignInspection cmd_inspect_design(const LoadedCheckpoint& checkpoint, int resolution,
                                    const std::string& scenario_path) {
  if (!checkpoint.design) throw Error(ErrorKind::kConfig, "checkpoint holds no design policy");
  if (resolution < 2 || resolution > 2000) throw Error(ErrorKind::kConfig, "resolution must be in [2, 2000]");
  TrainConfig cfg = checkpoint.config;
  if (!scenario_path.empty()) cfg.scenario_path = scenario_path;
  const Scenario sc = cfg.scenario_path.empty() ? builtin_scenario() : load_scenario(cfg.scenario_path);
  const LayoutGraph g = build_graph(sc.corridor, checkpoint.context_layout);
  const GmmParams gmm = checkpoint.design->evaluate(nn::make_graph_input(feature_matrices(g))).first;

  DesignInspection d;
  d.means = gmm.means;
  d.sigma = gmm.sigma;
  for (Eigen::Index i = 0; i < gmm.means.rows(); ++i)
    d.means_m.push_back(denormalize(sc.corridor, gmm.means(i, 0), gmm.means(i, 1)));
  d.modes = find_modes(gmm).modes;
  d.proposals = extract_modes(gmm, sc.corridor);
  d.context_layout = checkpoint.context_layout;
  d.resolution = resolution;
  d.density.reserve(static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution));
  for (int i = 0; i < resolution; ++i)
    for (int k = 0; k < resolution; ++k)
      d.density.push_back(gmm_density(gmm, Eigen::RowVector2d((i + 0.5) / resolution, (k + 0.5) / resolution)));
  return d;
}

void write_eval_report(const EvalReport& r, const std::string& dir, const std::string& stem) {
  ensure_dir(dir);
  write_file(join(dir, stem + ".json"), r.to_json().dump(2) + "\n");
  write_file(join(dir, stem + ".csv"), r.to_csv());
}

void write_robustness_report(const RobustnessReport& r, const std::string& dir) {
  ensure_dir(dir);
  write_file(join(dir, "robustness.json"), r.to_json().dump(2) + "\n");
  write_file(join(dir, "robustness.csv"), r.gaps_csv());
  write_file(join(dir, "robustness_eval.csv"), r.eval.to_csv());
}

void write_ablation_report(const AblationReport& r, const std::string& dir) {
  ensure_dir(dir);
  write_file(join(dir, "ablation.json"), r.to_json().dump(2) + "\n");
  write_file(join(dir, "ablation.csv"), r.to_csv());
}

void write_design_inspection(const DesignInspection& d, const CorridorSpec& spec, const std::string& dir) {
  ensure_dir(dir);
  write_file(join(dir, "design.json"), d.to_json().dump(2) + "\n");
  write_file(join(dir, "density.csv"), d.density_csv(spec));
}

}  // namespace decor
