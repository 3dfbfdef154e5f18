#include <doctest.h>

#include <set>

#include "common/error.hpp"
#include "signal/signal_control.hpp"

namespace decor {
namespace {

TEST_CASE("intersection phase table") {
  auto t = phase_table(LocationKind::kIntersection);
  REQUIRE(t.size() == 4);
  const SignalDisplay p1{1, Stage::kSteady, false};
  CHECK(vehicle_green(LocationKind::kIntersection, p1, Approach::kNorth, Movement::kThrough));
  CHECK(vehicle_green(LocationKind::kIntersection, p1, Approach::kSouth, Movement::kLeft));
  CHECK_FALSE(vehicle_green(LocationKind::kIntersection, p1, Approach::kEast, Movement::kThrough));
  CHECK(vehicle_green(LocationKind::kIntersection, p1, Approach::kEast, Movement::kRight));
  CHECK(pedestrian_walk(LocationKind::kIntersection, p1, Approach::kEast));
  CHECK(pedestrian_walk(LocationKind::kIntersection, p1, Approach::kWest));
  CHECK_FALSE(pedestrian_walk(LocationKind::kIntersection, p1, Approach::kNorth));

  const SignalDisplay p3{3, Stage::kSteady, false};
  CHECK(vehicle_green(LocationKind::kIntersection, p3, Approach::kNorth, Movement::kLeft));
  CHECK(vehicle_green(LocationKind::kIntersection, p3, Approach::kSouth, Movement::kLeft));
  CHECK_FALSE(vehicle_green(LocationKind::kIntersection, p3, Approach::kNorth, Movement::kThrough));
  for (int leg = 0; leg < 4; ++leg)
    CHECK_FALSE(pedestrian_walk(LocationKind::kIntersection, p3, static_cast<Approach>(leg)));

  const SignalDisplay p4{4, Stage::kSteady, false};
  for (int a = 0; a < 4; ++a) {
    for (int m = 0; m < 3; ++m)
      CHECK_FALSE(vehicle_green(LocationKind::kIntersection, p4, static_cast<Approach>(a),
                                static_cast<Movement>(m)));
    CHECK(pedestrian_walk(LocationKind::kIntersection, p4, static_cast<Approach>(a)));
  }
}

TEST_CASE("phases never show conflicting greens") {
  for (int p = 1; p <= 4; ++p) {
    const SignalDisplay d{p, Stage::kSteady, false};
    const bool ns = vehicle_green(LocationKind::kIntersection, d, Approach::kNorth, Movement::kThrough) ||
                    vehicle_green(LocationKind::kIntersection, d, Approach::kSouth, Movement::kThrough);
    const bool ew = vehicle_green(LocationKind::kIntersection, d, Approach::kEast, Movement::kThrough) ||
                    vehicle_green(LocationKind::kIntersection, d, Approach::kWest, Movement::kThrough);
    CHECK_FALSE((ns && ew));
    // through traffic never runs across a walking crosswalk on its own leg
    if (pedestrian_walk(LocationKind::kIntersection, d, Approach::kEast))
      CHECK_FALSE(vehicle_green(LocationKind::kIntersection, d, Approach::kEast, Movement::kThrough));
  }
  for (int p = 1; p <= 2; ++p)
    for (Stage s : {Stage::kSteady, Stage::kYellow, Stage::kAllRed}) {
      const SignalDisplay d{p, s, false};
      CHECK_FALSE((vehicle_green(LocationKind::kMidblock, d, Approach::kEast, Movement::kThrough) &&
                   pedestrian_walk(LocationKind::kMidblock, d, Approach::kEast)));
    }
  const SignalDisplay mb2{2, Stage::kSteady, false};
  CHECK_FALSE(vehicle_green(LocationKind::kMidblock, mb2, Approach::kWest, Movement::kThrough));
  CHECK(pedestrian_walk(LocationKind::kMidblock, mb2, Approach::kEast));
}

TEST_CASE("apply_command examples") {
  auto cs = make_controller(LocationKind::kIntersection, 1);
  auto same = apply_command(cs, 1);
  CHECK(same.stage == Stage::kSteady);
  CHECK(same.current_phase == 1);
  auto sw = apply_command(cs, 2);
  CHECK(sw.stage == Stage::kYellow);
  CHECK(sw.stage_countdown == 4);
  for (int i = 0; i < 6; ++i) sw = tick(sw);
  CHECK(sw.current_phase == 2);
  CHECK(sw.stage == Stage::kSteady);
  CHECK_THROWS_AS(apply_command(cs, 5), Error);
  CHECK_THROWS_AS(apply_command(make_controller(LocationKind::kMidblock), 3), Error);
}

TEST_CASE("last write wins during a transition") {
  auto cs = apply_command(make_controller(LocationKind::kIntersection, 1), 2);
  cs = tick(cs);
  cs = apply_command(cs, 3);
  CHECK(cs.stage == Stage::kYellow);
  CHECK(cs.stage_countdown == 3);
  for (int i = 0; i < 5; ++i) cs = tick(cs);
  CHECK(cs.current_phase == 3);
}

TEST_CASE("every phase pair inserts 4 yellow then 2 all-red steps") {
  for (auto kind : {LocationKind::kIntersection, LocationKind::kMidblock}) {
    for (int a = 1; a <= phase_count(kind); ++a)
      for (int b = 1; b <= phase_count(kind); ++b) {
        if (a == b) continue;
        auto cs = apply_command(make_controller(kind, a), b);
        std::vector<Stage> seen;
        int guard = 0;
        while (cs.stage != Stage::kSteady && guard++ < 100) {
          seen.push_back(display_of(cs).stage);
          cs = apply_command(cs, b);  // re-issued every step, as a policy would
          cs = tick(cs);
        }
        std::vector<Stage> expect{Stage::kYellow, Stage::kYellow, Stage::kYellow,
                                  Stage::kYellow, Stage::kAllRed, Stage::kAllRed};
        CHECK(seen == expect);
        CHECK(cs.current_phase == b);
      }
  }
}

TEST_CASE("fixed-time intersection schedule") {
  auto d0 = fixed_time_intersection(0.0);
  CHECK(d0.phase == 1);
  CHECK(d0.stage == Stage::kSteady);
  CHECK(vehicle_green(LocationKind::kIntersection, d0, Approach::kNorth, Movement::kThrough));
  CHECK(pedestrian_walk(LocationKind::kIntersection, d0, Approach::kEast));
  CHECK(fixed_time_intersection(92.0).stage == Stage::kYellow);
  CHECK(fixed_time_intersection(94.0).stage == Stage::kAllRed);
  CHECK(fixed_time_intersection(96.0).phase == 2);
  CHECK(fixed_time_intersection(96.0).stage == Stage::kSteady);
  auto d192 = fixed_time_intersection(192.0);
  CHECK(d192.phase == d0.phase);
  CHECK(d192.stage == d0.stage);
  CHECK(FixedTimePlan{}.intersection_cycle() == 192.0);
  // per-second enumeration of one cycle
  int steady = 0, yellow = 0, red = 0;
  for (int t = 0; t < 192; ++t) {
    auto d = fixed_time_intersection(t);
    (d.stage == Stage::kSteady ? steady : d.stage == Stage::kYellow ? yellow : red)++;
  }
  CHECK(steady == 180);
  CHECK(yellow == 8);
  CHECK(red == 4);
}

TEST_CASE("fixed-time mid-block schedule") {
  auto veh = [](double t) {
    return vehicle_green(LocationKind::kMidblock, fixed_time_midblock(t), Approach::kEast,
                         Movement::kThrough);
  };
  auto walk = [](double t) {
    return pedestrian_walk(LocationKind::kMidblock, fixed_time_midblock(t), Approach::kEast);
  };
  CHECK(veh(20.0));
  CHECK(fixed_time_midblock(50.0).phase == 2);
  CHECK(veh(62.0));
  CHECK(FixedTimePlan{}.midblock_cycle() == 62.0);
  int green = 0, vehicle_phase = 0, walk_s = 0, clearance = 0;
  for (int i = 0; i < 620; ++i) {
    const double t = i * 0.1;
    auto d = fixed_time_midblock(t);
    green += veh(t);
    vehicle_phase += d.phase == 1;
    walk_s += walk(t);
    clearance += d.phase == 2 && d.stage == Stage::kYellow;
    CHECK_FALSE((veh(t) && walk(t)));
  }
  CHECK(green == 400);
  CHECK(vehicle_phase == 460);
  CHECK(walk_s == 70);
  CHECK(clearance == 90);
}

TEST_CASE("unsignalized mid-block") {
  auto d = unsignalized_midblock();
  CHECK(d.uncontrolled);
  CHECK(vehicle_green(LocationKind::kMidblock, d, Approach::kEast, Movement::kThrough));
  CHECK(pedestrian_walk(LocationKind::kMidblock, d, Approach::kEast));
}

TEST_CASE("joint action space") {
  for (int c = 0; c <= 5; ++c) {
    auto all = enumerate_joint_actions(c);
    CHECK(static_cast<long long>(all.size()) == 4LL * (1LL << c));
    std::set<std::pair<int, std::vector<bool>>> uniq;
    for (const auto& a : all) uniq.insert({a.intersection_phase, a.crosswalk_ped});
    CHECK(uniq.size() == all.size());
  }
  auto cmds = to_commands(decode_joint_action(4 * 2 + 2, 2));
  REQUIRE(cmds.size() == 3);
  CHECK(cmds[0].target_phase == 3);
  CHECK(cmds[1].target_phase == 1);
  CHECK(cmds[2].target_phase == 2);
}

TEST_CASE("schedule csv") {
  auto csv = schedule_csv(LocationKind::kMidblock, 1.0);
  int rows = 0;
  for (char c : csv) rows += c == '\n';
  CHECK(rows == 63);
}

}  // namespace
}  // namespace decor
