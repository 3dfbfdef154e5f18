#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "common/error.hpp"
#include "report/commands.hpp"
#include "report/report.hpp"

using namespace decor;

namespace {

TrainConfig tiny_config() {
  TrainConfig c = TrainConfig::defaults();
  c.control_net.actor = {16};
  c.control_net.critic = {16};
  c.design_net.encoder.hidden = 4;
  c.design_net.encoder.out = 4;
  c.design_net.shared = {16};
  c.design_net.actor = {8};
  c.design_net.critic = {8};
  c.rollout.n_envs = 2;
  c.rollout.sim.horizon_steps = 20;
  c.rollout.sim.warmup_min = 5;
  c.rollout.sim.warmup_max = 10;
  c.rounds = 2;
  c.budget_sim_steps = 0;
  c.control.update_freq = 20;
  c.control.batch = 10;
  c.eval_runs = 2;
  return c;
}

EvalRow some_row(double seed) {
  EvalRow r;
  r.layout = "designed";
  r.controller = "learned";
  r.alpha = 0.1 * seed + 1.0 / 3.0;
  r.n_runs = 10;
  double x = seed;
  for (Stat* s : {&r.ped_arrival_s, &r.ped_wait_s, &r.veh_wait_s, &r.ped_max_wait_s, &r.veh_max_wait_s,
                  &r.ped_total_wait_s, &r.veh_total_wait_s, &r.conflicts}) {
    x = x * 1.7 + 0.123456789012345;
    *s = {x / 7.0, x / 13.0};
  }
  return r;
}

}  // namespace

TEST_CASE("stat_of uses the sample standard deviation") {
  Stat s = stat_of({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(s.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(stat_of({7.0}).std == 0.0);
  CHECK(stat_of({}).mean == 0.0);
}

TEST_CASE("summarize_runs averages per-run metrics") {
  std::vector<EpisodeMetrics> runs(2);
  runs[0].mean_ped_wait_s = 2.0;
  runs[1].mean_ped_wait_s = 4.0;
  runs[0].conflicts = 0;
  runs[1].conflicts = 2;
  EvalRow r = summarize_runs("baseline7", "fixed", 1.5, runs);
  CHECK(r.n_runs == 2);
  CHECK(r.ped_wait_s.mean == 3.0);
  CHECK(r.conflicts.mean == 1.0);
  CHECK(r.ped_wait_s.std >= 0.0);
  CHECK_THROWS_AS(summarize_runs("a", "b", 1.0, {}), Error);
}

TEST_CASE("eval reports round-trip through JSON and CSV exactly") {
  EvalReport r;
  r.seed = 1001;
  r.config_hash = 0xfedcba9876543210ULL;
  for (int k = 0; k < 5; ++k) r.rows.push_back(some_row(k));
  r.rows[2].controller = "unsignalized";
  const EvalReport j = EvalReport::from_json(nlohmann::json::parse(r.to_json().dump()));
  CHECK(j == r);
  const EvalReport c = EvalReport::from_csv(r.to_csv());
  CHECK(c == r);
  CHECK(c.to_csv() == r.to_csv());

  EvalReport bad = r;
  bad.rows[0].layout = "a,b";
  CHECK_THROWS_AS(bad.to_csv(), Error);
  CHECK_THROWS_AS(EvalReport::from_csv("x,y\n1,2\n"), Error);
  CHECK_THROWS_AS(EvalReport::from_json(nlohmann::json::object()), Error);
}

TEST_CASE("robustness and ablation reports round-trip") {
  RobustnessReport r;
  r.eval.command = "robustness";
  r.eval.rows = {some_row(1), some_row(2)};
  r.extra_location_m = 700.0;
  r.extra_width_m = 5.0;
  r.gaps.push_back({1.0, 1.0 / 3.0, 2.0 / 3.0, gap_percent(1.0 / 3.0, 2.0 / 3.0), 5.5, 4.4, gap_percent(5.5, 4.4)});
  CHECK(RobustnessReport::from_json(nlohmann::json::parse(r.to_json().dump())) == r);
  CHECK(RobustnessReport::gaps_from_csv(r.gaps_csv()) == r.gaps);
  CHECK(r.gaps[0].ped_gap_pct == doctest::Approx(50.0));
  CHECK(r.gaps[0].veh_gap_pct == doctest::Approx(-25.0));

  AblationReport a;
  a.seeds = {1, 2, 3};
  a.budget_sim_steps = 200000;
  a.eval_runs = 10;
  a.layout = "reference4";
  a.config_hash = 42;
  for (const char* v : {"mwaq", "li-mwaq", "ei-mwaq"})
    for (const char* cls : {"ped", "veh"})
      for (const char* m : {"total_wait_s", "max_wait_s"}) {
        std::vector<double> xs = {0.1, 0.2 / 3.0, 12345.678};
        a.rows.push_back({v, cls, m, stat_of(xs), xs});
      }
  CHECK(a.rows.size() == 12);
  CHECK(AblationReport::from_json(nlohmann::json::parse(a.to_json().dump())) == a);
  const std::string csv = a.to_csv();
  CHECK(AblationReport::from_csv(csv) == a);
  // Footer carries seeds and budget.
  CHECK(csv.find("# seeds=1;2;3") != std::string::npos);
  CHECK(csv.find("# budget_sim_steps=200000") != std::string::npos);
}

TEST_CASE("sweep parsing") {
  auto g = parse_sweep("grid");
  REQUIRE(g.size() == 10);
  CHECK(g.front() == 0.5);
  CHECK(g.back() == 2.75);
  CHECK(parse_sweep("1.0") == std::vector<double>{1.0});
  CHECK(parse_sweep("0.5,1,2") == std::vector<double>{0.5, 1.0, 2.0});
  CHECK(parse_sweep("0.5:2.75:0.25") == g);
  CHECK_THROWS_AS(parse_sweep("abc"), Error);
  CHECK_THROWS_AS(parse_sweep("1:0:0.5"), Error);
  CHECK_THROWS_AS(parse_sweep("0"), Error);
}

TEST_CASE("number formatting round-trips") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, -2500.0, 123456789.123456789, 0.0}) CHECK(parse_double(format_double(x)) == x);
  CHECK_THROWS_AS(parse_double("1.0x"), Error);
}

TEST_CASE("extra crosswalk goes to the east end and merges") {
  CorridorSpec spec;
  auto l = with_extra_crosswalk(spec, {{140, 5}, {245, 5}}, spec.length_m - kExtraCrosswalkOffsetM, 5.0);
  REQUIRE(l.size() == 3);
  CHECK(l.back().location == 700.0);
  auto m = with_extra_crosswalk(spec, {{700.5, 5}}, 700.0, 5.0);
  CHECK(m.size() == 1);
  CHECK_THROWS_AS(with_extra_crosswalk(spec, {}, 749.5, 5.0), Error);
}

TEST_CASE("config overrides by section and key") {
  TrainConfig c = TrainConfig::defaults();
  c.set("run", "seed", "17");
  c.set("rollout", "reward_variant", "mwaq");
  c.set("control", "actor_layers", "8,4");
  CHECK(c.seed == 17);
  CHECK(c.rollout.variant == RewardVariant::kMwaq);
  CHECK(c.control_net.actor == std::vector<int>{8, 4});
  CHECK(c.source_text.find("seed = 17") != std::string::npos);
  CHECK_THROWS_AS(c.set("run", "nope", "1"), Error);
  CHECK_THROWS_AS(c.set("run", "seed", "x"), Error);
}

TEST_CASE("baseline evaluation without a checkpoint") {
  TrainConfig c = tiny_config();
  EvalOptions opt;
  opt.controllers = {"fixed"};
  opt.layouts = {"baseline7"};
  opt.runs = 2;
  EvalReport r = cmd_eval(c, nullptr, opt);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].n_runs == 2);
  CHECK(r.rows[0].conflicts.mean == 0.0);
  CHECK(r.seed == c.eval_seed);
  // Same seeds, same report.
  CHECK(cmd_eval(c, nullptr, opt).to_csv() == r.to_csv());

  opt.controllers = {"learned"};
  CHECK_THROWS_AS(cmd_eval(c, nullptr, opt), Error);
  opt.controllers = {"fixed"};
  opt.layouts = {"designed"};
  CHECK_THROWS_AS(cmd_eval(c, nullptr, opt), Error);
  opt.layouts = {"nonexistent"};
  CHECK_THROWS_AS(cmd_eval(c, nullptr, opt), Error);
}

TEST_CASE("checkpoint-based commands") {
  TrainConfig c = tiny_config();
  const auto dir = std::filesystem::temp_directory_path() / "decor_report_test";
  std::filesystem::remove_all(dir);
  TrainSummary s = cmd_train(c, (dir / "coopt").string());
  CHECK(std::filesystem::exists(dir / "coopt" / "checkpoint.json"));
  CHECK(std::filesystem::exists(dir / "coopt" / "rounds.jsonl"));
  CHECK(std::filesystem::exists(dir / "coopt" / "metrics.json"));
  LoadedCheckpoint co = load_checkpoint_file((dir / "coopt" / "checkpoint.json").string());

  SUBCASE("eval covers every layout and controller") {
    EvalOptions opt;
    opt.runs = 1;
    opt.alphas = {1.0, 2.0};
    EvalReport r = cmd_eval(co.config, &co, opt);
    CHECK(r.rows.size() == 3 * 3 * 2);
    for (const auto& row : r.rows)
      if (row.controller == "learned") CHECK(row.conflicts.mean == 0.0);
    write_eval_report(r, (dir / "eval").string(), "eval");
    CHECK(EvalReport::from_csv(read_file((dir / "eval" / "eval.csv").string())) == r);
    CHECK(EvalReport::from_json(nlohmann::json::parse(read_file((dir / "eval" / "eval.json").string()))) == r);
  }

  SUBCASE("robustness compares both controllers on the extra layout") {
    TrainConfig sc = c;
    sc.layout = "reference4";
    train_sequential(sc, (dir / "seq").string());
    LoadedCheckpoint seq = load_checkpoint_file((dir / "seq" / "checkpoint.json").string());
    CHECK_FALSE(seq.design);
    EvalOptions opt;
    opt.runs = 1;
    opt.alphas = {1.0};
    RobustnessReport r = cmd_robustness(co, seq, {}, opt);
    REQUIRE(r.gaps.size() == 1);
    CHECK(r.eval.rows.size() == 4);
    CHECK(r.extra_location_m == 700.0);
    const EvalRow* e = r.eval.find("designed+extra", "learned-sequential", 1.0);
    REQUIRE(e);
    CHECK(r.gaps[0].seq_ped_wait_s == e->ped_wait_s.mean);
    CHECK_THROWS_AS(cmd_inspect_design(seq, 10), Error);
  }

  SUBCASE("design inspection is consistent with mode extraction") {
    DesignInspection d = cmd_inspect_design(co, 25);
    CHECK(d.density.size() == 25 * 25);
    CHECK(d.means.rows() == c.design_net.components);
    CorridorSpec spec;
    for (const auto& p : d.proposals) {
      CHECK(p.location >= spec.loc_min_m);
      CHECK(p.location <= spec.loc_max_m);
      CHECK(p.width >= spec.width_min_m);
      CHECK(p.width <= spec.width_max_m);
    }
    GmmParams gmm{d.means, d.sigma};
    CHECK(extract_modes(gmm, spec) == d.proposals);
    DesignInspection back = DesignInspection::from_json(nlohmann::json::parse(d.to_json().dump()));
    CHECK(back.density == d.density);
    CHECK(back.proposals == d.proposals);
    CHECK(back.means == d.means);
    const std::string csv = d.density_csv(spec);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 25 * 25 + 1);
    CHECK_THROWS_AS(cmd_inspect_design(co, 1), Error);
  }
  std::filesystem::remove_all(dir);
}
