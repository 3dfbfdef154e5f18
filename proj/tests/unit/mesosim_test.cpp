#include <doctest.h>

#include <functional>
#include <set>

#include "common/error.hpp"
#include "demand/demand.hpp"
#include "graph/scenario.hpp"
#include "sim/mesosim.hpp"

namespace decor {
namespace {

const Scenario& sc() {
  static const Scenario s = builtin_scenario();
  return s;
}

LayoutGraph one_crosswalk(double x = 300.0, double w = 4.0) {
  return build_graph(sc().corridor, std::vector<CrosswalkProposal>{{x, w}});
}

DemandTable trips(std::vector<Trip> t) {
  DemandTable d;
  d.trips = std::move(t);
  d.horizon_s = d.trips.empty() ? 0.0 : d.trips.back().depart_s + 1.0;
  return d;
}

SimConfig mode_cfg(ControlMode m) {
  SimConfig c;
  c.mode = m;
  return c;
}

std::vector<PhaseCommand> hold(int crosswalks, int int_phase = 1, int mb_phase = 1) {
  std::vector<PhaseCommand> cmds{{0, int_phase}};
  for (int c = 0; c < crosswalks; ++c) cmds.push_back({c + 1, mb_phase});
  return cmds;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kNumerical;
}

// Feature column helpers; slot c is the c-th mid-block crosswalk.
int slot_col(int c, int offset) { return 9 + 7 * c + offset; }

TEST_CASE("empty demand leaves the network empty") {
  Simulator sim(one_crosswalk(), trips({}), mode_cfg(ControlMode::kFixedTime), 1);
  auto obs = sim.step();
  CHECK(obs.active_pedestrians == 0);
  CHECK(obs.active_vehicles == 0);
  CHECK(obs.conflicts == 0);
  auto m = sim.observe();
  CHECK(m.rows() == 10);
  CHECK(m.cols() == 58);
  // Fixed-time starts in intersection phase 1 and mid-block vehicle phase 1.
  CHECK(m(9, 0) == 1.0);
  CHECK(m(9, slot_col(0, 0)) == 1.0);
  CHECK(m.block(0, 4, 10, 5).sum() == 0.0);
  CHECK(m.block(0, slot_col(0, 2), 10, 5).sum() == 0.0);
  CHECK(m.block(0, slot_col(1, 0), 10, 7).sum() == 0.0);  // unused slot
}

TEST_CASE("observation pads until R steps exist") {
  Simulator sim(one_crosswalk(), trips({}), mode_cfg(ControlMode::kFixedTime), 1);
  auto m = sim.observe();
  CHECK(m.rows() == 10);
  CHECK(m.sum() == 0.0);
}

TEST_CASE("pedestrian trip at t=0 spawns on the first step") {
  Simulator sim(one_crosswalk(), trips({{0.0, "Z7", "Z8", TravelMode::kPedestrian}}),
                mode_cfg(ControlMode::kUnsignalized), 1);
  auto a0 = sim.accounting();
  CHECK(a0.pending == 1);
  CHECK(a0.active == 0);
  auto obs = sim.step();
  CHECK(obs.active_pedestrians == 1);
  CHECK(sim.accounting().pending == 0);
}

TEST_CASE("same inputs give identical state after 100 steps") {
  auto d = synth_corridor_demand(5, sc());
  auto g = build_graph(sc().corridor, sc().layout("reference4"));
  auto run = [&](std::uint64_t seed) {
    Simulator sim(g, d, mode_cfg(ControlMode::kLearned), seed);
    Rng r(99);
    for (int i = 0; i < 100; ++i) {
      std::vector<PhaseCommand> cmds{{0, static_cast<int>(r() % 4) + 1}};
      for (int c = 0; c < 4; ++c) cmds.push_back({c + 1, static_cast<int>(r() % 2) + 1});
      sim.step(cmds);
    }
    return std::make_pair(sim.observe(), sim.episode_metrics());
  };
  auto [m1, e1] = run(3);
  auto [m2, e2] = run(3);
  CHECK(m1 == m2);
  CHECK(e1.total_ped_wait_s == e2.total_ped_wait_s);
  CHECK(e1.total_veh_wait_s == e2.total_veh_wait_s);
  CHECK(e1.records.size() == e2.records.size());
}

TEST_CASE("warmup length is reproducible and advances the clock") {
  auto g = one_crosswalk();
  Simulator a(g, trips({}), mode_cfg(ControlMode::kLearned), 11);
  Simulator b(g, trips({}), mode_cfg(ControlMode::kLearned), 11);
  const int n = a.warmup();
  CHECK(n >= 40);
  CHECK(n <= 140);
  CHECK(b.warmup() == n);
  CHECK(a.clock() == static_cast<long long>(n) * 10);
  CHECK(a.accounting().active == 0);
  CHECK(a.action_steps_since_warmup() == 0);

  std::set<int> seen;
  for (std::uint64_t s = 0; s < 40; ++s) {
    Simulator c(g, trips({}), mode_cfg(ControlMode::kFixedTime), s);
    const int k = c.warmup();
    CHECK(k >= 40);
    CHECK(k <= 140);
    seen.insert(k);
  }
  CHECK(seen.size() > 10);
}

TEST_CASE("waiting vehicle accumulates one second per all-red window") {
  SimConfig cfg = mode_cfg(ControlMode::kLearned);
  cfg.timing.all_red_steps = 40;  // long enough to span a whole window
  Simulator sim(one_crosswalk(), trips({}), cfg, 1);
  sim.inject_queued_vehicle(0, static_cast<int>(Approach::kWest));
  sim.step(hold(1, 2, 2));  // both locations leave phase 1
  const double before = sim.current_wait_spells(TravelMode::kVehicle).at(0);
  CHECK(before == doctest::Approx(1.0));
  sim.step(hold(1, 2, 2));
  for (const auto& d : sim.displays()) CHECK(d.stage == Stage::kAllRed);
  const double after = sim.current_wait_spells(TravelMode::kVehicle).at(0);
  CHECK(after - before == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("wait spell grows strictly for a stationary agent") {
  Simulator sim(one_crosswalk(), trips({}), mode_cfg(ControlMode::kLearned), 1);
  sim.inject_queued_vehicle(1, 0);
  double prev = -1.0;
  for (int i = 0; i < 6; ++i) {
    sim.step(hold(1, 1, 2));  // mid-block pedestrian phase holds vehicles
    const double w = sim.current_wait_spells(TravelMode::kVehicle).at(0);
    CHECK(w > prev);
    prev = w;
  }
}

TEST_CASE("pedestrian near a walk signal crosses without waiting") {
  // Z7 anchor sits 30 m up its stub from a crosswalk at 300.
  auto g = one_crosswalk(300.0, 4.0);
  Simulator sim(g, trips({{0.0, "Z7", "Z8", TravelMode::kPedestrian}}),
                mode_cfg(ControlMode::kLearned), 1);
  sim.warmup_steps(0);
  for (int i = 0; i < 24; ++i) sim.step(hold(1, 1, 2));
  // 1.2 m from the crosswalk now.
  CHECK(sim.observe()(9, slot_col(0, 5)) == 1.0);
  sim.step(hold(1, 1, 2));
  sim.step(hold(1, 1, 2));
  CHECK(sim.observe()(9, slot_col(0, 6)) == 1.0);  // on the crossing
  auto m = sim.episode_metrics();
  REQUIRE(m.records.size() == 1);
  CHECK(m.records[0].wait_total_s == 0.0);
  CHECK(m.records[0].arrival_s == doctest::Approx(28.0 / 1.2));
}

TEST_CASE("pedestrian waits at a red crossing") {
  auto g = one_crosswalk(300.0, 4.0);
  Simulator sim(g, trips({{0.0, "Z7", "Z8", TravelMode::kPedestrian}}),
                mode_cfg(ControlMode::kLearned), 1);
  sim.warmup_steps(0);
  for (int i = 0; i < 35; ++i) sim.step(hold(1, 1, 1));
  auto obs = sim.step(hold(1, 1, 1));
  REQUIRE(obs.crosswalks.size() == 1);
  CHECK(obs.crosswalks[0].ped_queue[0] == 1.0);
  CHECK(obs.crosswalks[0].ped_max_wait > 5.0);
}

TEST_CASE("queue of five discharges one vehicle every two seconds") {
  Simulator sim(one_crosswalk(), trips({}), mode_cfg(ControlMode::kLearned), 1);
  for (int i = 0; i < 5; ++i) sim.inject_queued_vehicle(1, 0);
  CHECK(sim.config().headway_steps() == 20);
  std::vector<int> trace;
  for (int w = 0; w < 10; ++w) {
    sim.step(hold(1));
    trace.push_back(sim.queue_length(1, 0));
  }
  CHECK(trace == std::vector<int>{4, 4, 3, 3, 2, 2, 1, 1, 0, 0});
}

TEST_CASE("red holds the queue") {
  Simulator sim(one_crosswalk(), trips({}), mode_cfg(ControlMode::kLearned), 1);
  for (int i = 0; i < 3; ++i) sim.inject_queued_vehicle(1, 1);
  for (int w = 0; w < 10; ++w) sim.step(hold(1, 1, 2));
  CHECK(sim.queue_length(1, 1) == 3);
}

TEST_CASE("vehicle detection radius at the intersection") {
  SimConfig cfg = mode_cfg(ControlMode::kFixedTime);
  cfg.approach_length_m = 131.0;
  Simulator sim(one_crosswalk(), trips({{0.0, "W", "N", TravelMode::kVehicle}}), cfg, 1);
  sim.step();  // 120 m out
  CHECK(sim.observe()(9, 4) == 0.0);
  sim.step();  // 109 m
  CHECK(sim.observe()(9, 4) == 0.0);
  sim.step();  // 98 m
  CHECK(sim.observe()(9, 4) == 1.0);
}

TEST_CASE("pedestrian within 5 m counts as incoming") {
  Simulator sim(one_crosswalk(300.0, 4.0),
                trips({{0.0, "Z7", "Z8", TravelMode::kPedestrian}}),
                mode_cfg(ControlMode::kUnsignalized), 1);
  for (int i = 0; i < 20; ++i) sim.step();  // 6 m away
  CHECK(sim.observe()(9, slot_col(0, 5)) == 0.0);
  sim.step();  // 4.8 m away
  CHECK(sim.observe()(9, slot_col(0, 5)) == 1.0);
  CHECK(sim.observe()(9, slot_col(0, 6)) == 0.0);
}

TEST_CASE("pedestrian adjacent to its crosswalk has zero arrival time") {
  auto spec = sc().corridor;
  spec.stub_length_m = 1.0;
  auto g = build_graph(spec, std::vector<CrosswalkProposal>{{300.0, 4.0}});
  Simulator sim(g, trips({{0.0, "Z7", "Z8", TravelMode::kPedestrian}}),
                mode_cfg(ControlMode::kUnsignalized), 1);
  sim.warmup_steps(0);
  sim.step();
  auto m = sim.episode_metrics();
  REQUIRE(m.records.size() == 1);
  CHECK(m.records[0].arrival_s == 0.0);
}

TEST_CASE("unroutable trips are dropped, not fatal") {
  Simulator sim(one_crosswalk(), trips({{0.0, "Z7", "nowhere", TravelMode::kPedestrian},
                                        {0.0, "Z7", "Z8", TravelMode::kPedestrian}}),
                mode_cfg(ControlMode::kFixedTime), 1);
  sim.step();
  auto a = sim.accounting();
  CHECK(a.dropped == 1);
  CHECK(a.active == 1);
}

DemandTable heavy_demand(std::uint64_t seed) {
  SynthOptions opt;
  opt.pedestrian_rate_per_hour = 6000;
  opt.vehicle_rate_per_hour = 1200;
  opt.horizon_s = 600;
  return synth_corridor_demand(seed, sc(), opt);
}

TEST_CASE("signalized and yielding runs have no conflicts") {
  auto g = build_graph(sc().corridor, sc().layout("reference4"));
  auto d = heavy_demand(2);
  for (auto mode : {ControlMode::kFixedTime, ControlMode::kUnsignalized, ControlMode::kLearned}) {
    Simulator sim(g, d, mode_cfg(mode), 4);
    sim.warmup_steps(0);
    Rng r(5);
    long long window_sum = 0;
    for (int i = 0; i < 400; ++i) {
      StepObservation obs;
      if (mode == ControlMode::kLearned) {
        std::vector<PhaseCommand> cmds{{0, static_cast<int>(r() % 4) + 1}};
        for (int c = 0; c < 4; ++c) cmds.push_back({c + 1, static_cast<int>(r() % 2) + 1});
        obs = sim.step(cmds);
      } else {
        obs = sim.step();
      }
      window_sum += obs.conflicts;
      for (const auto& disp : sim.displays()) (void)disp;
    }
    CHECK(window_sum == 0);
    CHECK(sim.episode_metrics().conflicts == 0);
    CHECK(sim.episode_metrics().vehicles > 50);
  }
}

TEST_CASE("forced simultaneous green produces conflicts") {
  auto g = build_graph(sc().corridor, sc().layout("reference4"));
  SimConfig cfg = mode_cfg(ControlMode::kFixedTime);
  cfg.debug_force_conflicts = true;
  Simulator sim(g, heavy_demand(2), cfg, 4);
  sim.warmup_steps(0);
  for (int i = 0; i < 400; ++i) sim.step();
  CHECK(sim.episode_metrics().conflicts > 0);
}

TEST_CASE("trip conservation and metric totals") {
  auto g = build_graph(sc().corridor, sc().layout("baseline7"));
  auto d = heavy_demand(8);
  d.trips.push_back({599.0, "Z1", "missing", TravelMode::kPedestrian});
  Simulator sim(g, d, mode_cfg(ControlMode::kUnsignalized), 1);
  sim.warmup_steps(20);
  for (int i = 0; i < 700; ++i) {
    sim.step();
    auto a = sim.accounting();
    REQUIRE(a.pending + a.active + a.arrived + a.dropped ==
            static_cast<long long>(d.trips.size()));
  }
  auto m = sim.episode_metrics();
  double ped = 0.0, veh = 0.0, arrival = 0.0;
  int np = 0, nv = 0, nc = 0;
  for (const auto& r : m.records) {
    if (r.mode == TravelMode::kPedestrian) {
      ped += r.wait_total_s;
      ++np;
      if (r.crossing) {
        arrival += r.arrival_s;
        ++nc;
      }
    } else {
      veh += r.wait_total_s;
      ++nv;
    }
    CHECK(r.wait_max_s <= r.wait_total_s + 1e-9);
  }
  CHECK(m.pedestrians == np);
  CHECK(m.vehicles == nv);
  CHECK(m.total_ped_wait_s == doctest::Approx(ped));
  CHECK(m.total_veh_wait_s == doctest::Approx(veh));
  CHECK(m.mean_ped_wait_s == doctest::Approx(ped / np));
  CHECK(m.mean_ped_arrival_s == doctest::Approx(arrival / nc));
  CHECK(sim.accounting().dropped == 1);
  CHECK(sim.accounting().pending == 0);
}

TEST_CASE("displays never grant conflicting movements") {
  auto g = build_graph(sc().corridor, sc().layout("reference4"));
  Simulator sim(g, trips({}), mode_cfg(ControlMode::kLearned), 1);
  Rng r(17);
  for (int i = 0; i < 300; ++i) {
    std::vector<PhaseCommand> cmds{{0, static_cast<int>(r() % 4) + 1}};
    for (int c = 0; c < 4; ++c) cmds.push_back({c + 1, static_cast<int>(r() % 2) + 1});
    sim.step(cmds);
    auto disp = sim.displays();
    for (std::size_t k = 1; k < disp.size(); ++k) {
      const bool veh = vehicle_green(LocationKind::kMidblock, disp[k], Approach::kEast, Movement::kThrough);
      const bool ped = pedestrian_walk(LocationKind::kMidblock, disp[k], Approach::kEast);
      CHECK_FALSE((veh && ped));
    }
  }
}

TEST_CASE("protocol errors") {
  Simulator sim(one_crosswalk(), trips({}), mode_cfg(ControlMode::kLearned), 1);
  CHECK(kind_of([&] { sim.step({{0, 1}}); }) == ErrorKind::kProtocol);
  CHECK(kind_of([&] { sim.step({{0, 1}, {5, 1}}); }) == ErrorKind::kProtocol);
  CHECK(kind_of([&] { sim.step({{0, 1}, {1, 3}}); }) == ErrorKind::kProtocol);
  CHECK(kind_of([&] { sim.step(); }) == ErrorKind::kProtocol);
  SimConfig bad;
  bad.sim_step_s = 0.0;
  CHECK(kind_of([&] { Simulator s(one_crosswalk(), trips({}), bad, 1); }) == ErrorKind::kConfig);
  SimConfig few;
  few.max_crosswalk_slots = 3;
  auto g = build_graph(sc().corridor, sc().layout("reference4"));
  CHECK(kind_of([&] { Simulator s(g, trips({}), few, 1); }) == ErrorKind::kContract);
}

TEST_CASE("episode horizon") {
  SimConfig cfg = mode_cfg(ControlMode::kFixedTime);
  cfg.horizon_steps = 5;
  Simulator sim(one_crosswalk(), trips({}), cfg, 1);
  sim.warmup_steps(3);
  for (int i = 0; i < 4; ++i) sim.step();
  CHECK_FALSE(sim.done());
  sim.step();
  CHECK(sim.done());
}

TEST_CASE("control mode names") {
  CHECK(parse_control_mode("learned") == ControlMode::kLearned);
  CHECK(parse_control_mode("fixed") == ControlMode::kFixedTime);
  CHECK(parse_control_mode("unsignalized") == ControlMode::kUnsignalized);
  CHECK(kind_of([] { parse_control_mode("x"); }) == ErrorKind::kConfig);
}

}  // namespace
}  // namespace decor
