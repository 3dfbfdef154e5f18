#include "decor/decor.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "common/error.hpp"
#include "report/commands.hpp"

struct decor_config {
  decor::TrainConfig cfg;
};

struct decor_checkpoint {
  decor::LoadedCheckpoint ck;
};

namespace {

thread_local std::string g_last_error;

decor_status status_of(decor::ErrorKind k) {
  using decor::ErrorKind;
  switch (k) {
    case ErrorKind::kConfig:
      return DECOR_E_CONFIG;
    case ErrorKind::kIo:
      return DECOR_E_IO;
    case ErrorKind::kContract:
    case ErrorKind::kProtocol:
      return DECOR_E_CONTRACT;
    case ErrorKind::kParse:
      return DECOR_E_PARSE;
    case ErrorKind::kNumerical:
      return DECOR_E_NUMERICAL;
    case ErrorKind::kInvalidSpec:
    case ErrorKind::kConstraintViolation:
    case ErrorKind::kMustMergeFirst:
    case ErrorKind::kNoPath:
    case ErrorKind::kValidation:
    case ErrorKind::kInvalidScale:
      return DECOR_E_VALIDATION;
  }
  return DECOR_E_INTERNAL;
}

template <typename F>
decor_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return DECOR_OK;
  } catch (const decor::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("malformed JSON: ") + e.what();
    return DECOR_E_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DECOR_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DECOR_E_INTERNAL;
  }
}

decor_status bad_argument(const char* what) {
  g_last_error = std::string("null argument: ") + what;
  return DECOR_E_ARGUMENT;
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

decor::EvalOptions eval_options(const decor_eval_options* o) {
  decor::EvalOptions opt;
  if (!o) return opt;
  if (o->sweep) opt.alphas = decor::parse_sweep(o->sweep);
  if (o->controllers) opt.controllers = decor::split_list(o->controllers);
  if (o->layouts) opt.layouts = decor::split_list(o->layouts);
  if (o->scenario) opt.scenario_path = o->scenario;
  opt.runs = o->runs;
  if (o->has_seed) opt.seed = o->seed;
  opt.extra_location_m = o->extra_location_m;
  if (o->extra_width_m > 0.0) opt.extra_width_m = o->extra_width_m;
  if (opt.controllers.empty() || opt.layouts.empty() || opt.alphas.empty())
    throw decor::Error(decor::ErrorKind::kConfig, "empty controller, layout or sweep list");
  return opt;
}

}  // namespace

extern "C" {

const char* decor_version(void) { return "0.1.0"; }

const char* decor_status_name(decor_status status) {
  switch (status) {
    case DECOR_OK:
      return "ok";
    case DECOR_E_ARGUMENT:
      return "argument";
    case DECOR_E_CONFIG:
      return "config";
    case DECOR_E_IO:
      return "io";
    case DECOR_E_CONTRACT:
      return "contract";
    case DECOR_E_PARSE:
      return "parse";
    case DECOR_E_VALIDATION:
      return "validation";
    case DECOR_E_NUMERICAL:
      return "numerical";
    case DECOR_E_INTERNAL:
      return "internal";
  }
  return "unknown";
}

const char* decor_last_error(void) { return g_last_error.c_str(); }

void decor_string_free(char* s) { std::free(s); }

decor_status decor_config_default(decor_config** out) {
  if (!out) return bad_argument("out");
  *out = nullptr;
  return guard([&] { *out = new decor_config{decor::TrainConfig::defaults()}; });
}

decor_status decor_config_load(const char* path, decor_config** out) {
  if (!path) return bad_argument("path");
  if (!out) return bad_argument("out");
  *out = nullptr;
  return guard([&] { *out = new decor_config{decor::TrainConfig::load(path)}; });
}

decor_status decor_config_set(decor_config* cfg, const char* section, const char* key, const char* value) {
  if (!cfg) return bad_argument("cfg");
  if (!section || !key || !value) return bad_argument("section/key/value");
  return guard([&] {
    decor::TrainConfig next = cfg->cfg;
    next.set(section, key, value);
    cfg->cfg = std::move(next);
  });
}

decor_status decor_config_render(const decor_config* cfg, char** out_text) {
  if (!cfg) return bad_argument("cfg");
  if (!out_text) return bad_argument("out_text");
  *out_text = nullptr;
  return guard([&] { *out_text = dup_string(cfg->cfg.source_text); });
}

decor_status decor_config_validate(const decor_config* cfg) {
  if (!cfg) return bad_argument("cfg");
  return guard([&] { cfg->cfg.validate(); });
}

void decor_config_free(decor_config* cfg) { delete cfg; }

decor_status decor_checkpoint_load(const char* path, decor_checkpoint** out) {
  if (!path) return bad_argument("path");
  if (!out) return bad_argument("out");
  *out = nullptr;
  return guard([&] { *out = new decor_checkpoint{decor::load_checkpoint_file(path)}; });
}

decor_status decor_checkpoint_config(const decor_checkpoint* ck, decor_config** out) {
  if (!ck) return bad_argument("ck");
  if (!out) return bad_argument("out");
  *out = nullptr;
  return guard([&] { *out = new decor_config{ck->ck.config}; });
}

decor_status decor_checkpoint_final_layout(const decor_checkpoint* ck, char** out_layout) {
  if (!ck) return bad_argument("ck");
  if (!out_layout) return bad_argument("out_layout");
  *out_layout = nullptr;
  return guard([&] { *out_layout = dup_string(decor::format_layout_list(ck->ck.final_layout)); });
}

int decor_checkpoint_has_design(const decor_checkpoint* ck) { return ck && ck->ck.design ? 1 : 0; }

void decor_checkpoint_free(decor_checkpoint* ck) { delete ck; }

decor_status decor_train(const decor_config* cfg, const char* out_dir, decor_train_summary* summary) {
  if (!cfg) return bad_argument("cfg");
  if (!out_dir) return bad_argument("out_dir");
  return guard([&] {
    const decor::TrainSummary s = decor::cmd_train(cfg->cfg, out_dir);
    if (summary) *summary = {s.rounds, s.sim_steps, s.control_records, s.design_tuples};
  });
}

void decor_eval_options_init(decor_eval_options* opt) {
  if (!opt) return;
  *opt = decor_eval_options{};
  opt->extra_location_m = -1.0;
  opt->extra_width_m = decor::kExtraCrosswalkWidthM;
}

decor_status decor_eval(const decor_config* cfg, const decor_checkpoint* ck, const decor_eval_options* opt,
                        const char* out_dir, char** out_json) {
  if (!cfg && !ck) return bad_argument("cfg and ck");
  if (out_json) *out_json = nullptr;
  return guard([&] {
    const decor::TrainConfig& c = cfg ? cfg->cfg : ck->ck.config;
    const decor::EvalReport r = decor::cmd_eval(c, ck ? &ck->ck : nullptr, eval_options(opt));
    if (out_dir) decor::write_eval_report(r, out_dir, "eval");
    if (out_json) *out_json = dup_string(r.to_json().dump(2));
  });
}

decor_status decor_robustness(const decor_checkpoint* coopt, const decor_checkpoint* sequential, const char* layout,
                              const decor_eval_options* opt, const char* out_dir, char** out_json) {
  if (!coopt) return bad_argument("coopt");
  if (!sequential) return bad_argument("sequential");
  if (out_json) *out_json = nullptr;
  return guard([&] {
    const decor::EvalOptions o = eval_options(opt);
    std::vector<decor::CrosswalkProposal> base;
    if (layout) {
      decor::TrainConfig c = coopt->ck.config;
      if (!o.scenario_path.empty()) c.scenario_path = o.scenario_path;
      const decor::Scenario sc = c.scenario_path.empty() ? decor::builtin_scenario() : decor::load_scenario(c.scenario_path);
      base = decor::resolve_layout(sc, layout);
    }
    const decor::RobustnessReport r = decor::cmd_robustness(coopt->ck, sequential->ck, base, o);
    if (out_dir) decor::write_robustness_report(r, out_dir);
    if (out_json) *out_json = dup_string(r.to_json().dump(2));
  });
}

decor_status decor_ablate_reward(const decor_config* cfg, const char* seeds, long long budget, double alpha,
                                 const char* out_dir, char** out_json) {
  if (!cfg) return bad_argument("cfg");
  if (out_json) *out_json = nullptr;
  return guard([&] {
    decor::AblationOptions o;
    if (seeds) {
      o.seeds.clear();
      for (const auto& s : decor::split_list(seeds)) {
        const double v = decor::parse_double(s);
        if (v < 0.0 || v != static_cast<double>(static_cast<unsigned long long>(v)))
          throw decor::Error(decor::ErrorKind::kConfig, "seeds must be non-negative integers: " + s);
        o.seeds.push_back(static_cast<std::uint64_t>(v));
      }
    }
    o.budget_sim_steps = budget;
    if (alpha > 0.0) o.alpha = alpha;
    const decor::AblationReport r = decor::cmd_ablate_reward(cfg->cfg, o);
    if (out_dir) decor::write_ablation_report(r, out_dir);
    if (out_json) *out_json = dup_string(r.to_json().dump(2));
  });
}

decor_status decor_inspect_design(const decor_checkpoint* ck, int resolution, const char* scenario,
                                  const char* out_dir, char** out_json) {
  if (!ck) return bad_argument("ck");
  if (out_json) *out_json = nullptr;
  return guard([&] {
    const std::string sp = scenario ? scenario : "";
    const decor::DesignInspection d = decor::cmd_inspect_design(ck->ck, resolution, sp);
    if (out_dir) {
      decor::TrainConfig c = ck->ck.config;
      if (!sp.empty()) c.scenario_path = sp;
      const decor::Scenario sc = c.scenario_path.empty() ? decor::builtin_scenario() : decor::load_scenario(c.scenario_path);
      decor::write_design_inspection(d, sc.corridor, out_dir);
    }
    if (out_json) *out_json = dup_string(d.to_json().dump(2));
  });
}

}  // extern "C"
