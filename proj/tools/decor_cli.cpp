// Command-line front end. Talks to the core only through decor.h.

#include <cstdio>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "decor/decor.h"

namespace {

struct ConfigDeleter {
  void operator()(decor_config* c) const { decor_config_free(c); }
};
struct CheckpointDeleter {
  void operator()(decor_checkpoint* c) const { decor_checkpoint_free(c); }
};
using ConfigPtr = std::unique_ptr<decor_config, ConfigDeleter>;
using CheckpointPtr = std::unique_ptr<decor_checkpoint, CheckpointDeleter>;

// Thrown after a failed C call; main turns it into the exit code.
struct Failure {
  decor_status status;
};

void check(decor_status s) {
  if (s != DECOR_OK) {
    std::fprintf(stderr, "decor: %s error: %s\n", decor_status_name(s), decor_last_error());
    throw Failure{s};
  }
}

std::string take(char* s) {
  std::string out = s ? s : "";
  decor_string_free(s);
  return out;
}

ConfigPtr load_config(const std::string& path) {
  decor_config* c = nullptr;
  check(path.empty() ? decor_config_default(&c) : decor_config_load(path.c_str(), &c));
  return ConfigPtr(c);
}

CheckpointPtr load_checkpoint(const std::string& path) {
  decor_checkpoint* c = nullptr;
  check(decor_checkpoint_load(path.c_str(), &c));
  return CheckpointPtr(c);
}

void set(decor_config* c, const char* section, const char* key, const std::string& value) {
  check(decor_config_set(c, section, key, value.c_str()));
}

struct Flags {
  std::string config;
  std::optional<unsigned long long> seed;
  std::string scenario;
  std::string checkpoint;
  std::string sequential;
  std::string out;
  std::string sweep;
  std::string controller;
  std::string layouts;
  std::string reward_variant;
  std::optional<long long> budget;
  std::string mode;
  std::string layout;
  std::string seeds = "1,2,3";
  int runs = 0;
  int resolution = 100;
  double alpha = 1.0;
  double extra_location = -1.0;
};

void print_eval_rows(const nlohmann::json& rows) {
  std::printf("%-16s %-20s %6s %10s %10s %10s %9s\n", "layout", "controller", "alpha", "ped_wait", "veh_wait",
              "arrival", "conflicts");
  for (const auto& r : rows)
    std::printf("%-16s %-20s %6.2f %10.2f %10.2f %10.2f %9.1f\n", r["layout"].get<std::string>().c_str(),
                r["controller"].get<std::string>().c_str(), r["alpha"].get<double>(),
                r["ped_wait_s"]["mean"].get<double>(), r["veh_wait_s"]["mean"].get<double>(),
                r["ped_arrival_s"]["mean"].get<double>(), r["conflicts"]["mean"].get<double>());
}

decor_eval_options eval_options(const Flags& f) {
  decor_eval_options o;
  decor_eval_options_init(&o);
  if (!f.sweep.empty()) o.sweep = f.sweep.c_str();
  if (!f.controller.empty()) o.controllers = f.controller.c_str();
  if (!f.layouts.empty()) o.layouts = f.layouts.c_str();
  if (!f.scenario.empty()) o.scenario = f.scenario.c_str();
  o.runs = f.runs;
  if (f.seed) {
    o.has_seed = 1;
    o.seed = *f.seed;
  }
  o.extra_location_m = f.extra_location;
  return o;
}

void cmd_train(const Flags& f) {
  ConfigPtr cfg = load_config(f.config);
  if (f.seed) set(cfg.get(), "run", "seed", std::to_string(*f.seed));
  if (!f.scenario.empty()) set(cfg.get(), "run", "scenario", f.scenario);
  if (f.budget) set(cfg.get(), "run", "budget", std::to_string(*f.budget));
  if (!f.reward_variant.empty()) set(cfg.get(), "rollout", "reward_variant", f.reward_variant);
  if (!f.mode.empty()) set(cfg.get(), "run", "mode", f.mode);
  if (!f.layout.empty()) set(cfg.get(), "run", "layout", f.layout);
  check(decor_config_validate(cfg.get()));
  const std::string out = f.out.empty() ? "runs/train" : f.out;
  decor_train_summary s{};
  check(decor_train(cfg.get(), out.c_str(), &s));
  std::printf("rounds %lld  sim steps %lld  control records %lld  design tuples %lld\n", s.rounds, s.sim_steps,
              s.control_records, s.design_tuples);
  std::printf("run directory: %s\n", out.c_str());
}

void cmd_eval(const Flags& f) {
  CheckpointPtr ck;
  ConfigPtr cfg;
  if (!f.checkpoint.empty()) {
    ck = load_checkpoint(f.checkpoint);
    decor_config* c = nullptr;
    check(decor_checkpoint_config(ck.get(), &c));
    cfg.reset(c);
  } else {
    cfg = load_config(f.config);
  }
  if (!f.layout.empty()) set(cfg.get(), "run", "layout", f.layout);
  decor_eval_options o = eval_options(f);
  std::string controllers = f.controller;
  if (controllers.empty() && !ck) controllers = "fixed,unsignalized";
  if (!controllers.empty()) o.controllers = controllers.c_str();
  std::string layouts = f.layouts;
  if (layouts.empty() && !ck) layouts = "baseline7";
  if (!layouts.empty()) o.layouts = layouts.c_str();
  const std::string out = f.out.empty() ? "runs/eval" : f.out;
  char* json = nullptr;
  check(decor_eval(cfg.get(), ck.get(), &o, out.c_str(), &json));
  print_eval_rows(nlohmann::json::parse(take(json))["rows"]);
  std::printf("report: %s/eval.json, %s/eval.csv\n", out.c_str(), out.c_str());
}

void cmd_robustness(const Flags& f) {
  CheckpointPtr co = load_checkpoint(f.checkpoint);
  CheckpointPtr seq = load_checkpoint(f.sequential);
  decor_eval_options o = eval_options(f);
  const std::string out = f.out.empty() ? "runs/robustness" : f.out;
  char* json = nullptr;
  check(decor_robustness(co.get(), seq.get(), f.layout.empty() ? nullptr : f.layout.c_str(), &o, out.c_str(),
                         &json));
  const auto j = nlohmann::json::parse(take(json));
  std::printf("extra crosswalk at %.1f m, %.1f m wide\n", j["extra_crosswalk"]["location_m"].get<double>(),
              j["extra_crosswalk"]["width_m"].get<double>());
  std::printf("%6s %12s %12s %8s %12s %12s %8s\n", "alpha", "coopt_ped", "seq_ped", "gap%", "coopt_veh", "seq_veh",
              "gap%");
  for (const auto& g : j["gaps"])
    std::printf("%6.2f %12.2f %12.2f %8.1f %12.2f %12.2f %8.1f\n", g["alpha"].get<double>(),
                g["coopt_ped_wait_s"].get<double>(), g["seq_ped_wait_s"].get<double>(), g["ped_gap_pct"].get<double>(),
                g["coopt_veh_wait_s"].get<double>(), g["seq_veh_wait_s"].get<double>(), g["veh_gap_pct"].get<double>());
  std::printf("report: %s/robustness.json\n", out.c_str());
}

void cmd_ablate(const Flags& f) {
  ConfigPtr cfg = load_config(f.config);
  if (!f.scenario.empty()) set(cfg.get(), "run", "scenario", f.scenario);
  if (!f.layout.empty()) set(cfg.get(), "run", "layout", f.layout);
  const std::string out = f.out.empty() ? "runs/ablation" : f.out;
  char* json = nullptr;
  check(decor_ablate_reward(cfg.get(), f.seeds.c_str(), f.budget.value_or(0), f.alpha, out.c_str(), &json));
  const auto j = nlohmann::json::parse(take(json));
  std::printf("%-8s %-4s %-13s %12s %10s\n", "variant", "cls", "metric", "mean", "std");
  for (const auto& r : j["rows"])
    std::printf("%-8s %-4s %-13s %12.2f %10.2f\n", r["variant"].get<std::string>().c_str(),
                r["class"].get<std::string>().c_str(), r["metric"].get<std::string>().c_str(),
                r["value"]["mean"].get<double>(), r["value"]["std"].get<double>());
  std::printf("report: %s/ablation.json, %s/ablation.csv\n", out.c_str(), out.c_str());
}

void cmd_inspect(const Flags& f) {
  CheckpointPtr ck = load_checkpoint(f.checkpoint);
  const std::string out = f.out.empty() ? "runs/design" : f.out;
  char* json = nullptr;
  check(decor_inspect_design(ck.get(), f.resolution, f.scenario.empty() ? nullptr : f.scenario.c_str(),
                             out.c_str(), &json));
  const auto j = nlohmann::json::parse(take(json));
  std::printf("%zu components, %zu modes\n", j["means"].size(), j["modes"].size());
  for (const auto& p : j["proposals"])
    std::printf("  crosswalk at %.1f m, %.1f m wide\n", p["location_m"].get<double>(), p["width_m"].get<double>());
  std::printf("report: %s/design.json, %s/density.csv\n", out.c_str(), out.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crosswalk design and signal control co-optimization"};
  app.require_subcommand(1);
  Flags f;

  auto* train = app.add_subcommand("train", "train a controller (and design policy)");
  train->add_option("--config", f.config, "run config file")->check(CLI::ExistingFile);
  train->add_option("--seed", f.seed, "training seed");
  train->add_option("--scenario", f.scenario, "scenario file");
  train->add_option("--budget", f.budget, "sim-step budget");
  train->add_option("--reward-variant", f.reward_variant, "mwaq | li-mwaq | ei-mwaq");
  train->add_option("--mode", f.mode, "coopt | sequential");
  train->add_option("--layout", f.layout, "sequential layout: scenario layout name or file");
  train->add_option("--out", f.out, "run directory");

  auto* eval = app.add_subcommand("eval", "evaluate controllers over a demand sweep");
  eval->add_option("--checkpoint", f.checkpoint, "checkpoint.json");
  eval->add_option("--config", f.config, "config for baseline-only evaluation");
  eval->add_option("--seed", f.seed, "evaluation seed");
  eval->add_option("--scenario", f.scenario, "scenario file");
  eval->add_option("--sweep", f.sweep, "grid | a:b:step | a,b,c");
  eval->add_option("--controller", f.controller, "comma list of learned, fixed, unsignalized");
  eval->add_option("--layouts", f.layouts, "comma list of baseline7, designed, designed+extra, ...");
  eval->add_option("--layout", f.layout, "layout used as 'designed' without a checkpoint");
  eval->add_option("--runs", f.runs, "episodes per scale");
  eval->add_option("--extra-location", f.extra_location, "extra crosswalk location in metres");
  eval->add_option("--out", f.out, "report directory");

  auto* rob = app.add_subcommand("robustness", "co-optimized vs sequential controller with an extra crosswalk");
  rob->add_option("--checkpoint", f.checkpoint, "co-optimized checkpoint")->required();
  rob->add_option("--sequential", f.sequential, "sequentially trained checkpoint")->required();
  rob->add_option("--layout", f.layout, "base layout (default: the sequential checkpoint's)");
  rob->add_option("--seed", f.seed, "evaluation seed");
  rob->add_option("--scenario", f.scenario, "scenario file");
  rob->add_option("--sweep", f.sweep, "grid | a:b:step | a,b,c");
  rob->add_option("--runs", f.runs, "episodes per scale");
  rob->add_option("--extra-location", f.extra_location, "extra crosswalk location in metres");
  rob->add_option("--out", f.out, "report directory");

  auto* abl = app.add_subcommand("ablate-reward", "train MWAQ, LI-MWAQ and EI-MWAQ controllers and compare");
  abl->add_option("--config", f.config, "run config file")->check(CLI::ExistingFile);
  abl->add_option("--seeds", f.seeds, "comma list of training seeds");
  abl->add_option("--budget", f.budget, "sim-step budget per training run");
  abl->add_option("--scenario", f.scenario, "scenario file");
  abl->add_option("--layout", f.layout, "fixed layout (default reference4)");
  abl->add_option("--alpha", f.alpha, "evaluation demand scale");
  abl->add_option("--out", f.out, "report directory");

  auto* insp = app.add_subcommand("inspect-design", "dump the design policy's mixture, modes and density");
  insp->add_option("--checkpoint", f.checkpoint, "co-optimized checkpoint")->required();
  insp->add_option("--scenario", f.scenario, "scenario file");
  insp->add_option("--resolution", f.resolution, "density grid cells per axis");
  insp->add_option("--out", f.out, "report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : DECOR_E_ARGUMENT;
  }

  try {
    if (*train) cmd_train(f);
    if (*eval) cmd_eval(f);
    if (*rob) cmd_robustness(f);
    if (*abl) cmd_ablate(f);
    if (*insp) cmd_inspect(f);
  } catch (const Failure& e) {
    return e.status;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "decor: unreadable report: %s\n", e.what());
    return DECOR_E_INTERNAL;
  }
  return 0;
}
