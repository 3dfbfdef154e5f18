#include "train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "common/error.hpp"
#include "graph/corridor_graph.hpp"
#include "nn/distributions.hpp"
#include "train/gae.hpp"

namespace decor {

const char* to_string(TrainMode m) {
  return m == TrainMode::kCoopt ? "coopt" : "sequential";
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "coopt" || s == "co-opt") return TrainMode::kCoopt;
  if (s == "sequential") return TrainMode::kSequential;
  throw Error(ErrorKind::kConfig, "unknown training mode '" + s + "' (coopt|sequential)");
}

// ---------------------------------------------------------------------------
// Config file binding.

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<int>& v) {
  std::string s;
  for (int x : v) {
    if (!s.empty()) s += ',';
    s += std::to_string(x);
  }
  return s;
}

std::vector<int> parse_int_list(const std::string& section, const std::string& key,
                                const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(tok, &used);
      while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
      if (used != tok.size() || v <= 0) throw std::invalid_argument("bad");
      out.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kConfig, "[" + section + "] " + key + ": expected positive integers, got '" + text + "'");
    }
  }
  if (out.empty()) throw Error(ErrorKind::kConfig, "[" + section + "] " + key + ": empty list");
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(const KeyValueFile&, TrainConfig&)> read;
  std::function<std::string(const TrainConfig&)> write;
};

template <class Ref>
Field dbl(const char* s, const char* k, Ref ref) {
  return {s, k,
          [=](const KeyValueFile& kv, TrainConfig& c) { ref(c) = kv.get_double(s, k, ref(c)); },
          [=](const TrainConfig& c) { return fmt_double(ref(const_cast<TrainConfig&>(c))); }};
}

template <class Ref>
Field integer(const char* s, const char* k, Ref ref) {
  using T = std::remove_reference_t<decltype(ref(std::declval<TrainConfig&>()))>;
  return {s, k,
          [=](const KeyValueFile& kv, TrainConfig& c) {
            const long long v = kv.get_int(s, k, static_cast<long long>(ref(c)));
            if constexpr (std::is_unsigned_v<T>) {
              if (v < 0) throw Error(ErrorKind::kConfig, std::string("[") + s + "] " + k + " must be >= 0");
            }
            ref(c) = static_cast<T>(v);
          },
          [=](const TrainConfig& c) { return std::to_string(ref(const_cast<TrainConfig&>(c))); }};
}

template <class Ref>
Field boolean(const char* s, const char* k, Ref ref) {
  return {s, k,
          [=](const KeyValueFile& kv, TrainConfig& c) { ref(c) = kv.get_bool(s, k, ref(c)); },
          [=](const TrainConfig& c) {
            return std::string(ref(const_cast<TrainConfig&>(c)) ? "true" : "false");
          }};
}

template <class Ref>
Field str(const char* s, const char* k, Ref ref) {
  return {s, k,
          [=](const KeyValueFile& kv, TrainConfig& c) { ref(c) = kv.get_string(s, k, ref(c)); },
          [=](const TrainConfig& c) { return ref(const_cast<TrainConfig&>(c)); }};
}

template <class Ref>
Field int_list(const char* s, const char* k, Ref ref) {
  return {s, k,
          [=](const KeyValueFile& kv, TrainConfig& c) {
            if (auto v = kv.raw(s, k)) ref(c) = parse_int_list(s, k, *v);
          },
          [=](const TrainConfig& c) { return fmt_list(ref(const_cast<TrainConfig&>(c))); }};
}

void add_ppo_fields(std::vector<Field>& f, const char* s, PpoConfig TrainConfig::*member) {
  auto p = [member](TrainConfig& c) -> PpoConfig& { return c.*member; };
  f.push_back(dbl(s, "lr", [p](TrainConfig& c) -> double& { return p(c).lr; }));
  f.push_back(dbl(s, "gamma", [p](TrainConfig& c) -> double& { return p(c).gamma; }));
  f.push_back(dbl(s, "gae_lambda", [p](TrainConfig& c) -> double& { return p(c).lambda; }));
  f.push_back(dbl(s, "clip_eps", [p](TrainConfig& c) -> double& { return p(c).clip_eps; }));
  f.push_back(dbl(s, "entropy_coef", [p](TrainConfig& c) -> double& { return p(c).entropy_coef; }));
  f.push_back(dbl(s, "value_coef", [p](TrainConfig& c) -> double& { return p(c).value_coef; }));
  f.push_back(integer(s, "epochs", [p](TrainConfig& c) -> int& { return p(c).epochs; }));
  f.push_back(integer(s, "batch_size", [p](TrainConfig& c) -> int& { return p(c).batch; }));
  f.push_back(integer(s, "update_freq", [p](TrainConfig& c) -> int& { return p(c).update_freq; }));
  f.push_back(dbl(s, "max_grad_norm", [p](TrainConfig& c) -> double& { return p(c).max_grad_norm; }));
  f.push_back(boolean(s, "anneal_lr", [p](TrainConfig& c) -> bool& { return p(c).anneal_lr; }));
}

const std::vector<Field>& config_fields() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    using C = TrainConfig;
    f.push_back(integer("run", "seed", [](C& c) -> std::uint64_t& { return c.seed; }));
    f.push_back({"run", "mode",
                 [](const KeyValueFile& kv, C& c) {
                   if (auto v = kv.raw("run", "mode")) c.mode = parse_train_mode(*v);
                 },
                 [](const C& c) { return std::string(to_string(c.mode)); }});
    f.push_back(integer("run", "rounds", [](C& c) -> long long& { return c.rounds; }));
    f.push_back(integer("run", "budget", [](C& c) -> long long& { return c.budget_sim_steps; }));
    f.push_back(integer("run", "checkpoint_every", [](C& c) -> int& { return c.checkpoint_every; }));
    f.push_back(str("run", "scenario", [](C& c) -> std::string& { return c.scenario_path; }));
    f.push_back(str("run", "layout", [](C& c) -> std::string& { return c.layout; }));
    f.push_back(str("demand", "file", [](C& c) -> std::string& { return c.demand_path; }));
    f.push_back(integer("demand", "seed", [](C& c) -> std::uint64_t& { return c.demand_seed; }));
    f.push_back(dbl("demand", "train_split", [](C& c) -> double& { return c.train_split_s; }));

    f.push_back(integer("rollout", "parallel_actors", [](C& c) -> int& { return c.rollout.n_envs; }));
    f.push_back(integer("rollout", "horizon", [](C& c) -> int& { return c.rollout.sim.horizon_steps; }));
    f.push_back(integer("rollout", "warmup_min", [](C& c) -> int& { return c.rollout.sim.warmup_min; }));
    f.push_back(integer("rollout", "warmup_max", [](C& c) -> int& { return c.rollout.sim.warmup_max; }));
    f.push_back(integer("rollout", "action_repeat", [](C& c) -> int& { return c.rollout.sim.action_repeat; }));
    f.push_back(dbl("rollout", "alpha_min", [](C& c) -> double& { return c.rollout.alpha_min; }));
    f.push_back(dbl("rollout", "alpha_max", [](C& c) -> double& { return c.rollout.alpha_max; }));
    f.push_back(dbl("rollout", "obs_clip", [](C& c) -> double& { return c.rollout.obs_clip; }));
    f.push_back({"rollout", "reward_variant",
                 [](const KeyValueFile& kv, C& c) {
                   if (auto v = kv.raw("rollout", "reward_variant"))
                     c.rollout.variant = parse_reward_variant(*v);
                 },
                 [](const C& c) { return std::string(to_string(c.rollout.variant)); }});

    add_ppo_fields(f, "control", &C::control);
    f.push_back(dbl("control", "input_scale", [](C& c) -> double& { return c.control_net.input_scale; }));
    f.push_back(int_list("control", "actor_layers", [](C& c) -> std::vector<int>& { return c.control_net.actor; }));
    f.push_back(int_list("control", "critic_layers", [](C& c) -> std::vector<int>& { return c.control_net.critic; }));

    add_ppo_fields(f, "design", &C::design);
    f.push_back(integer("design", "components", [](C& c) -> int& { return c.design_net.components; }));
    f.push_back(integer("design", "encoder_heads", [](C& c) -> int& { return c.design_net.encoder.heads1; }));
    f.push_back(integer("design", "encoder_hidden", [](C& c) -> int& { return c.design_net.encoder.hidden; }));
    f.push_back(integer("design", "encoder_out", [](C& c) -> int& { return c.design_net.encoder.out; }));
    f.push_back(integer("design", "sort_k", [](C& c) -> int& { return c.design_net.encoder.sort_k; }));
    f.push_back(int_list("design", "shared_layers", [](C& c) -> std::vector<int>& { return c.design_net.shared; }));
    f.push_back(int_list("design", "actor_layers", [](C& c) -> std::vector<int>& { return c.design_net.actor; }));
    f.push_back(int_list("design", "critic_layers", [](C& c) -> std::vector<int>& { return c.design_net.critic; }));

    f.push_back(dbl("reward", "beta1", [](C& c) -> double& { return c.rollout.weights.beta1; }));
    f.push_back(dbl("reward", "beta2", [](C& c) -> double& { return c.rollout.weights.beta2; }));
    f.push_back(dbl("reward", "beta3", [](C& c) -> double& { return c.rollout.weights.beta3; }));
    f.push_back(dbl("reward", "beta4", [](C& c) -> double& { return c.rollout.weights.beta4; }));
    f.push_back(dbl("reward", "beta5", [](C& c) -> double& { return c.rollout.weights.beta5; }));
    f.push_back(dbl("reward", "clip_lo", [](C& c) -> double& { return c.rollout.weights.clip_lo; }));
    f.push_back(dbl("reward", "clip_hi", [](C& c) -> double& { return c.rollout.weights.clip_hi; }));
    f.push_back(dbl("reward", "lambda1", [](C& c) -> double& { return c.rollout.weights.lambda1; }));
    f.push_back(dbl("reward", "lambda2", [](C& c) -> double& { return c.rollout.weights.lambda2; }));

    f.push_back(integer("eval", "runs", [](C& c) -> int& { return c.eval_runs; }));
    f.push_back(boolean("eval", "deterministic", [](C& c) -> bool& { return c.eval_deterministic; }));
    f.push_back(integer("eval", "seed", [](C& c) -> std::uint64_t& { return c.eval_seed; }));
    return f;
  }();
  return fields;
}

// Derived network shapes follow the simulator settings.
void sync_shapes(TrainConfig& c) {
  c.control_net.rows = c.rollout.sim.action_repeat;
  c.control_net.slots = c.rollout.sim.max_crosswalk_slots;
  c.control_net.columns = c.rollout.sim.feature_columns();
  c.rollout.window_start_s = 0.0;
  c.rollout.window_end_s = c.train_split_s;
}

std::string render_config(const TrainConfig& c) {
  std::string out;
  std::string section;
  for (const auto& f : config_fields()) {
    if (f.section != section) {
      if (!out.empty()) out += '\n';
      out += "[" + f.section + "]\n";
      section = f.section;
    }
    out += f.key + " = " + f.write(c) + "\n";
  }
  return out;
}

}  // namespace

TrainConfig TrainConfig::defaults() {
  TrainConfig c;
  c.rollout.n_envs = 4;
  c.rollout.sim.horizon_steps = 120;
  c.rollout.sim.mode = ControlMode::kLearned;
  c.control_net.input_scale = 1.0;  // states arrive normalized
  sync_shapes(c);
  c.source_text = render_config(c);
  return c;
}

TrainConfig TrainConfig::from_kv(const KeyValueFile& kv) {
  TrainConfig c = defaults();
  std::map<std::string, std::set<std::string>> known;
  for (const auto& f : config_fields()) known[f.section].insert(f.key);
  for (const auto& [section, keys] : known)
    for (const auto& [k, v] : kv.entries(section))
      if (!keys.count(k)) throw Error(ErrorKind::kConfig, "unknown key [" + section + "] " + k);
  // Sections are read through the known list; anything else is a typo.
  std::istringstream in(kv.text());
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] != '[') continue;
    auto e = line.find(']', b);
    if (e == std::string::npos) continue;
    const std::string name = line.substr(b + 1, e - b - 1);
    if (!known.count(name)) throw Error(ErrorKind::kConfig, "unknown section [" + name + "]");
  }
  for (const auto& f : config_fields()) f.read(kv, c);
  sync_shapes(c);
  c.validate();
  c.source_text = render_config(c);
  return c;
}

void TrainConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  if (value.find('\n') != std::string::npos)
    throw Error(ErrorKind::kConfig, "[" + section + "] " + key + ": value spans lines");
  const KeyValueFile kv = KeyValueFile::parse("[" + section + "]\n" + key + " = " + value + "\n");
  for (const auto& f : config_fields()) {
    if (f.section != section || f.key != key) continue;
    f.read(kv, *this);
    sync_shapes(*this);
    source_text = render_config(*this);
    return;
  }
  throw Error(ErrorKind::kConfig, "unknown key [" + section + "] " + key);
}

TrainConfig TrainConfig::load(const std::string& path) {
  return from_kv(KeyValueFile::load(path));
}

void TrainConfig::validate() const {
  rollout.validate();
  control.validate();
  design.validate();
  if (rounds < 0) throw Error(ErrorKind::kConfig, "rounds must be >= 0");
  if (rounds == 0 && budget_sim_steps <= 0)
    throw Error(ErrorKind::kConfig, "need a positive round count or sim-step budget");
  if (budget_sim_steps > 0 && budget_sim_steps < max_round_sim_steps())
    throw Error(ErrorKind::kConfig, "budget of " + std::to_string(budget_sim_steps) +
                                        " sim steps does not cover one round (" +
                                        std::to_string(max_round_sim_steps()) + ")");
  if (checkpoint_every < 1) throw Error(ErrorKind::kConfig, "checkpoint_every must be >= 1");
  if (!(train_split_s > 0.0)) throw Error(ErrorKind::kConfig, "train split must be positive");
  if (eval_runs < 1) throw Error(ErrorKind::kConfig, "eval runs must be >= 1");
  if (design_net.components < 1 || design_net.components > rollout.sim.max_crosswalk_slots)
    throw Error(ErrorKind::kConfig, "design components must be in [1, crosswalk slots]");
  const auto& e = design_net.encoder;
  if (e.heads1 < 1 || e.hidden < 1 || e.out < 1 || e.sort_k < 1)
    throw Error(ErrorKind::kConfig, "design encoder sizes must be positive");
  for (const auto* layers : {&control_net.actor, &control_net.critic, &design_net.shared,
                             &design_net.actor, &design_net.critic})
    for (int w : *layers)
      if (w < 1) throw Error(ErrorKind::kConfig, "layer widths must be positive");
  if (rollout.sim.mode != ControlMode::kLearned)
    throw Error(ErrorKind::kConfig, "training rollouts use the learned controller");
}

long long TrainConfig::max_round_sim_steps() const {
  return static_cast<long long>(rollout.n_envs) *
         (rollout.sim.warmup_max + rollout.sim.horizon_steps) * rollout.sim.action_repeat;
}

TrainingData load_training_data(const TrainConfig& cfg) {
  TrainingData d;
  d.scenario = cfg.scenario_path.empty() ? builtin_scenario() : load_scenario(cfg.scenario_path);
  if (cfg.demand_path.empty()) {
    d.demand = synth_corridor_demand(cfg.demand_seed, d.scenario);
  } else {
    d.demand = load_od_csv(cfg.demand_path, d.scenario);
  }
  auto [train, eval] = split_at(d.demand, cfg.train_split_s);
  d.train = std::move(train);
  d.eval = std::move(eval);
  if (d.demand.horizon_s - cfg.train_split_s < cfg.rollout.episode_seconds())
    throw Error(ErrorKind::kConfig, "evaluation split shorter than one episode");
  return d;
}

std::vector<CrosswalkProposal> resolve_layout(const Scenario& sc, const std::string& ref) {
  if (ref.empty()) throw Error(ErrorKind::kConfig, "no layout given");
  for (const auto& [name, layout] : sc.layouts)
    if (name == ref) return layout;
  if (std::filesystem::exists(ref)) {
    std::ifstream in(ref);
    if (!in) throw Error(ErrorKind::kIo, "cannot open layout file: " + ref);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const auto b = text.find_first_not_of(" \t\r\n");
    if (b != std::string::npos && text[b] == '{') {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(text);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kParse, ref + ": " + e.what());
      }
      std::vector<CrosswalkProposal> out;
      for (const auto& p : j.at("proposals"))
        out.push_back({p.at("location_m").get<double>(), p.at("width_m").get<double>()});
      return out;
    }
    return parse_layout_list(text);
  }
  throw Error(ErrorKind::kConfig, "layout '" + ref + "' is neither a scenario layout nor a file");
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json layout_json(const std::vector<CrosswalkProposal>& l) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& p : l) a.push_back({p.location, p.width});
  return a;
}

std::vector<CrosswalkProposal> layout_from_json(const nlohmann::json& j) {
  std::vector<CrosswalkProposal> out;
  for (const auto& p : j) out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return out;
}

nlohmann::json ppo_stats_json(const PpoStats& s) {
  return {{"policy_loss", s.policy_loss}, {"value_loss", s.value_loss},
          {"entropy", s.entropy},         {"clip_fraction", s.clip_fraction},
          {"approx_kl", s.approx_kl},     {"grad_norm", s.grad_norm},
          {"minibatches", s.minibatches}, {"aborted", s.aborted},
          {"diagnostics", s.diagnostics}};
}

nn::GraphInput graph_input(const LayoutGraph& g) { return nn::make_graph_input(feature_matrices(g)); }

double gaussian_entropy_2d(double sigma) {
  return 1.0 + std::log(2.0 * std::numbers::pi * sigma * sigma);
}

}  // namespace

nlohmann::json RoundLog::to_json() const {
  nlohmann::json j = {{"round", round},
                      {"layout", layout_json(layout)},
                      {"crosswalks", layout.size()},
                      {"design_reward", design_reward},
                      {"mean_arrival_s", mean_arrival_s},
                      {"control_reward_mean", control_reward_mean},
                      {"mean_ped_wait_s", mean_ped_wait_s},
                      {"mean_veh_wait_s", mean_veh_wait_s},
                      {"conflicts", conflicts},
                      {"envs_survived", survived},
                      {"control_records", control_records},
                      {"sim_steps", sim_steps},
                      {"alphas", alphas}};
  if (control_update) j["control_update"] = ppo_stats_json(*control_update);
  if (design_update) j["design_update"] = ppo_stats_json(*design_update);
  return j;
}

Trainer::Trainer(const TrainConfig& cfg) : Trainer(cfg, load_training_data(cfg)) {}

Trainer::Trainer(const TrainConfig& cfg, TrainingData data)
    : cfg_(cfg),
      data_(std::move(data)),
      control_(cfg.control_net, derive_seed(cfg.seed, {kSeedInit, 0})),
      design_(cfg.design_net, derive_seed(cfg.seed, {kSeedInit, 1})),
      control_opt_(control_.params().all(), nn::AdamConfig{cfg.control.lr}),
      design_opt_(design_.params().all(), nn::AdamConfig{cfg.design.lr}),
      obs_stats_(cfg.rollout.sim.feature_columns()) {
  cfg_.validate();
  cfg_.source_text = render_config(cfg_);  // fields may have been set in code
  if (cfg_.mode == TrainMode::kSequential) {
    if (cfg_.layout.empty())
      throw Error(ErrorKind::kConfig, "sequential training needs a layout ([run] layout)");
    fixed_layout_ = resolve_layout(data_.scenario, cfg_.layout);
    build_graph(data_.scenario.corridor, fixed_layout_);  // validates
    context_layout_ = fixed_layout_;
  }
}

bool Trainer::finished() const {
  if (cfg_.rounds > 0 && round_ >= cfg_.rounds) return true;
  if (cfg_.budget_sim_steps > 0 && sim_steps_ + cfg_.max_round_sim_steps() > cfg_.budget_sim_steps)
    return true;
  return false;
}

long long Trainer::planned_rounds() const {
  if (cfg_.rounds > 0) return cfg_.rounds;
  const auto& s = cfg_.rollout.sim;
  const double per_round = static_cast<double>(cfg_.rollout.n_envs) *
                           (0.5 * (s.warmup_min + s.warmup_max) + s.horizon_steps) * s.action_repeat;
  return std::max(1LL, static_cast<long long>(static_cast<double>(cfg_.budget_sim_steps) / per_round));
}

RoundLog Trainer::run_round() {
  if (finished()) throw Error(ErrorKind::kContract, "training budget exhausted");
  RoundLog log;
  log.round = round_;
  const CorridorSpec& spec = data_.scenario.corridor;

  std::vector<CrosswalkProposal> layout;
  DesignTuple tuple;
  if (cfg_.mode == TrainMode::kCoopt) {
    tuple.context_layout = context_layout_;
    tuple.context = graph_input(build_graph(spec, context_layout_));
    auto [gmm, value] = design_.evaluate(tuple.context);
    (void)value;
    Rng rng(derive_seed(cfg_.seed, {static_cast<std::uint64_t>(round_), kSeedDesign}));
    DesignAction a = sample_proposals(gmm, spec, rng);
    tuple.raw = a.raw;
    tuple.log_prob = design_log_prob(gmm, a.raw);
    layout = a.proposals;
  } else {
    layout = fixed_layout_;
  }
  const LayoutGraph g = build_graph(spec, layout);
  log.layout = layout;

  RolloutResult res = rollout_parallel(g, data_.train, control_, obs_stats_, cfg_.rollout,
                                       derive_seed(cfg_.seed, {static_cast<std::uint64_t>(round_), kSeedSim}));
  std::vector<double> arrivals;
  double ped = 0.0, veh = 0.0;
  for (const auto& e : res.envs) {
    if (e.failed) continue;
    arrivals.push_back(e.metrics.mean_ped_arrival_s);
    ped += e.metrics.mean_ped_wait_s;
    veh += e.metrics.mean_veh_wait_s;
    log.conflicts += e.metrics.conflicts;
    log.alphas.push_back(e.spec.alpha);
  }
  log.survived = res.survived;
  log.mean_ped_wait_s = ped / res.survived;
  log.mean_veh_wait_s = veh / res.survived;
  double mean_arrival = 0.0;
  for (double a : arrivals) mean_arrival += a;
  log.mean_arrival_s = mean_arrival / static_cast<double>(arrivals.size());
  log.design_reward = design_reward(arrivals, static_cast<int>(layout.size()), cfg_.rollout.weights);
  sim_steps_ += res.sim_steps;

  absorb_rollout(res, log);
  while (static_cast<int>(buffer_.size()) >= cfg_.control.update_freq)
    log.control_update = update_control();

  if (cfg_.mode == TrainMode::kCoopt) {
    tuple.layout = layout;
    tuple.reward = log.design_reward;
    design_reward_stats_.update(tuple.reward);
    design_buffer_.push_back(std::move(tuple));
    ++design_tuples_;
    if (static_cast<int>(design_buffer_.size()) >= cfg_.design.update_freq) {
      log.design_update = update_design();
      design_buffer_.clear();
    }
    context_layout_ = layout;
  }
  log.sim_steps = sim_steps_;
  ++round_;
  return log;
}

void Trainer::absorb_rollout(RolloutResult& res, RoundLog& log) {
  // Statistics advance in environment order after the join.
  double reward_sum = 0.0;
  long long n = 0;
  for (const auto& e : res.envs) {
    if (e.failed) continue;
    obs_stats_.update_rows(e.raw_rows);
    for (const auto& s : e.steps) {
      reward_stats_.update(s.reward);
      reward_sum += s.reward;
      ++n;
    }
  }
  log.control_reward_mean = n > 0 ? reward_sum / static_cast<double>(n) : 0.0;
  const double scale = std::sqrt(reward_stats_.variance() + kNormEps);
  for (auto& e : res.envs) {
    if (e.failed) continue;
    const std::size_t T = e.steps.size();
    std::vector<double> r(T), v(T);
    std::vector<int> done(T, 0);
    for (std::size_t i = 0; i < T; ++i) {
      r[i] = (e.steps[i].reward - reward_stats_.mean) / scale;
      v[i] = e.steps[i].value;
    }
    // The horizon is a time limit, so the tail bootstraps from the critic.
    GaeResult gae = compute_gae(r, v, done, e.last_value, cfg_.control.gamma, cfg_.control.lambda);
    for (std::size_t i = 0; i < T; ++i) {
      ControlRecord rec;
      rec.state = std::move(e.steps[i].state);
      rec.action = std::move(e.steps[i].action);
      rec.n_crosswalks = e.steps[i].n_crosswalks;
      rec.log_prob = e.steps[i].log_prob;
      rec.advantage = gae.advantages[i];
      rec.ret = gae.returns[i];
      buffer_.push_back(std::move(rec));
    }
    log.control_records += static_cast<long long>(T);
    control_records_ += static_cast<long long>(T);
  }
}

PpoStats Trainer::update_control() {
  const int n = cfg_.control.update_freq;
  std::vector<ControlRecord> batch(std::make_move_iterator(buffer_.begin()),
                                   std::make_move_iterator(buffer_.begin() + n));
  buffer_.erase(buffer_.begin(), buffer_.begin() + n);
  std::vector<double> adv(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) adv[static_cast<std::size_t>(i)] = batch[static_cast<std::size_t>(i)].advantage;
  normalize_advantages(adv);

  const int width = cfg_.control_net.input_size();
  Rng rng(derive_seed(cfg_.seed, {kSeedShuffle, 0, static_cast<std::uint64_t>(control_updates_)}));
  PpoStats st = ppo_update(control_.params(), control_opt_, n, cfg_.control, rng,
                           [&](nn::Tape& t, const std::vector<int>& idx) {
    const auto b = static_cast<Eigen::Index>(idx.size());
    nn::Mat states(b, width);
    std::vector<JointAction> actions;
    std::vector<int> ncw;
    std::vector<double> old_lp, a, ret;
    for (Eigen::Index k = 0; k < b; ++k) {
      const ControlRecord& r = batch[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
      states.row(k) = r.state;
      actions.push_back(r.action);
      ncw.push_back(r.n_crosswalks);
      old_lp.push_back(r.log_prob);
      a.push_back(adv[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])]);
      ret.push_back(r.ret);
    }
    auto f = control_.forward(t, states);
    const nn::Mat mask = slot_mask(ncw, cfg_.control_net.slots);
    nn::Var lp = control_log_prob(f.phase_logits, f.crosswalk_logits, actions, mask);
    nn::Var ent = control_entropy(f.phase_logits, f.crosswalk_logits, mask);
    return ppo_loss(lp, old_lp, a, f.value, ret, ent, cfg_.control);
  });
  ++control_updates_;
  return st;
}

PpoStats Trainer::update_design() {
  const int n = static_cast<int>(design_buffer_.size());
  std::vector<double> target(static_cast<std::size_t>(n)), adv(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& d = design_buffer_[static_cast<std::size_t>(i)];
    target[static_cast<std::size_t>(i)] = design_reward_stats_.normalize(d.reward);
    // Contextual bandit: advantage against the critic, no bootstrapping.
    adv[static_cast<std::size_t>(i)] = target[static_cast<std::size_t>(i)] - design_.evaluate(d.context).second;
  }
  normalize_advantages(adv);
  if (cfg_.design.anneal_lr) {
    const long long total = std::max(1LL, planned_rounds() / cfg_.design.update_freq);
    design_opt_.set_lr(nn::linear_anneal(cfg_.design.lr, design_updates_, total));
  }
  const double sigma = cfg_.design_net.sigma;
  const double ent = cfg_.design_net.components * gaussian_entropy_2d(sigma);
  Rng rng(derive_seed(cfg_.seed, {kSeedShuffle, 1, static_cast<std::uint64_t>(design_updates_)}));
  PpoStats st = ppo_update(design_.params(), design_opt_, n, cfg_.design, rng,
                           [&](nn::Tape& t, const std::vector<int>& idx) {
    std::vector<nn::Var> lps, vals;
    std::vector<double> old_lp, a, ret;
    for (int i : idx) {
      const auto& d = design_buffer_[static_cast<std::size_t>(i)];
      auto f = design_.forward(t, d.context);
      lps.push_back(design_log_prob(f.means, sigma, d.raw));
      vals.push_back(f.value);
      old_lp.push_back(d.log_prob);
      a.push_back(adv[static_cast<std::size_t>(i)]);
      ret.push_back(target[static_cast<std::size_t>(i)]);
    }
    // Fixed-sigma mixture: the entropy term is constant.
    nn::Var e = t.constant(nn::Mat::Constant(static_cast<Eigen::Index>(idx.size()), 1, ent));
    return ppo_loss(nn::concat_rows(lps), old_lp, a, nn::concat_rows(vals), ret, e, cfg_.design);
  });
  ++design_updates_;
  return st;
}

std::vector<CrosswalkProposal> Trainer::final_layout() const {
  if (cfg_.mode == TrainMode::kSequential) return fixed_layout_;
  const CorridorSpec& spec = data_.scenario.corridor;
  auto [gmm, value] = design_.evaluate(graph_input(build_graph(spec, context_layout_)));
  (void)value;
  return extract_modes(gmm, spec);
}

nlohmann::json Trainer::checkpoint() const {
  nlohmann::json j;
  j["format"] = "decor-checkpoint-1";
  j["mode"] = to_string(cfg_.mode);
  j["seed"] = cfg_.seed;
  j["round"] = round_;
  j["sim_steps"] = sim_steps_;
  j["config"] = cfg_.source_text;
  j["config_hash"] = fnv1a64(cfg_.source_text);
  j["control"] = {{"params", control_.params().to_json()},
                  {"updates", control_updates_},
                  {"optimizer", control_opt_.state_json()}};
  j["obs_stats"] = obs_stats_.to_json();
  j["reward_stats"] = reward_stats_.to_json();
  if (cfg_.mode == TrainMode::kCoopt) {
    j["design"] = {{"params", design_.params().to_json()},
                   {"updates", design_updates_},
                   {"reward_stats", design_reward_stats_.to_json()}};
  }
  j["context_layout"] = layout_json(context_layout_);
  j["final_layout"] = layout_json(final_layout());
  return j;
}

// ---------------------------------------------------------------------------

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + p.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + p.string());
}

double quarter_mean(const std::vector<RoundLog>& logs, bool last) {
  const std::size_t q = std::max<std::size_t>(1, logs.size() / 4);
  double s = 0.0;
  for (std::size_t i = 0; i < q && i < logs.size(); ++i)
    s += logs[last ? logs.size() - 1 - i : i].design_reward;
  return logs.empty() ? 0.0 : s / static_cast<double>(std::min(q, logs.size()));
}

}  // namespace

TrainSummary run_training(const TrainConfig& cfg, const std::string& out_dir) {
  Trainer tr(cfg);
  std::filesystem::path dir(out_dir);
  std::ofstream rounds_log;
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::kIo, "cannot create run directory " + out_dir + ": " + ec.message());
    write_text(dir / "config.ini", tr.config().source_text);
    rounds_log.open(dir / "rounds.jsonl", std::ios::binary);
    if (!rounds_log) throw Error(ErrorKind::kIo, "cannot write rounds.jsonl in " + out_dir);
  }
  TrainSummary s;
  while (!tr.finished()) {
    s.logs.push_back(tr.run_round());
    if (!out_dir.empty()) {
      rounds_log << s.logs.back().to_json().dump() << '\n';
      if (tr.rounds_done() % cfg.checkpoint_every == 0)
        write_text(dir / "checkpoint.json", tr.checkpoint().dump());
    }
  }
  s.rounds = tr.rounds_done();
  s.sim_steps = tr.sim_steps();
  s.control_records = tr.control_records();
  s.design_tuples = tr.design_tuples();
  s.final_layout = tr.final_layout();
  s.checkpoint = tr.checkpoint();
  if (!out_dir.empty()) {
    write_text(dir / "checkpoint.json", s.checkpoint.dump());
    nlohmann::json m = {{"mode", to_string(cfg.mode)},
                        {"seed", cfg.seed},
                        {"config_hash", fnv1a64(tr.config().source_text)},
                        {"rounds", s.rounds},
                        {"sim_steps", s.sim_steps},
                        {"control_records", s.control_records},
                        {"design_tuples", s.design_tuples},
                        {"control_updates", tr.control_updates()},
                        {"design_updates", tr.design_updates()},
                        {"first_quarter_design_reward", quarter_mean(s.logs, false)},
                        {"final_quarter_design_reward", quarter_mean(s.logs, true)},
                        {"final_layout", layout_json(s.final_layout)}};
    write_text(dir / "metrics.json", m.dump(2) + "\n");
  }
  return s;
}

TrainSummary cooptimize(const TrainConfig& cfg, const std::string& out_dir) {
  TrainConfig c = cfg;
  c.mode = TrainMode::kCoopt;
  return run_training(c, out_dir);
}

TrainSummary train_sequential(const TrainConfig& cfg, const std::string& out_dir) {
  TrainConfig c = cfg;
  c.mode = TrainMode::kSequential;
  return run_training(c, out_dir);
}

LoadedCheckpoint load_checkpoint(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "decor-checkpoint-1")
      throw Error(ErrorKind::kParse, "unsupported checkpoint format");
    LoadedCheckpoint c;
    c.config = TrainConfig::from_kv(KeyValueFile::parse(j.at("config").get<std::string>()));
    c.control = std::make_unique<ControlPolicy>(c.config.control_net, 0);
    c.control->params().from_json(j.at("control").at("params"));
    c.obs_stats = WelfordVector::from_json(j.at("obs_stats"));
    if (c.obs_stats.dim() != c.config.rollout.sim.feature_columns())
      throw Error(ErrorKind::kParse, "checkpoint state statistics do not match the feature width");
    if (j.contains("design")) {
      c.design = std::make_unique<DesignPolicy>(c.config.design_net, 0);
      c.design->params().from_json(j.at("design").at("params"));
    }
    c.context_layout = layout_from_json(j.at("context_layout"));
    c.final_layout = layout_from_json(j.at("final_layout"));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("malformed checkpoint: ") + e.what());
  }
}

LoadedCheckpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, path + ": " + e.what());
  }
  try {
    return load_checkpoint(j);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

std::vector<EpisodeMetrics> evaluate_controller(const LayoutGraph& g, const DemandTable& eval_source,
                                                const TrainConfig& cfg, const EvalSettings& es,
                                                const ControlPolicy* policy,
                                                const WelfordVector* obs_stats) {
  RolloutConfig rc = cfg.rollout;
  rc.sim.mode = es.controller;
  rc.alpha_min = es.alpha;
  rc.alpha_max = es.alpha;
  rc.window_start_s = cfg.train_split_s;
  rc.window_end_s = eval_source.horizon_s;
  rc.deterministic = es.deterministic;
  if (es.runs < 1) throw Error(ErrorKind::kConfig, "evaluation needs at least one run");
  std::vector<EpisodeMetrics> out(static_cast<std::size_t>(es.runs));
  const auto alpha_key = static_cast<std::uint64_t>(std::llround(es.alpha * 1000.0));
  parallel_for(es.runs, worker_threads(), [&](int r) {
    const EpisodeSpec spec =
        draw_episode(derive_seed(es.seed, {alpha_key, static_cast<std::uint64_t>(r)}), rc);
    out[static_cast<std::size_t>(r)] = run_episode(g, eval_source, spec, rc, policy, obs_stats, false).metrics;
  });
  return out;
}

}  // namespace decor
