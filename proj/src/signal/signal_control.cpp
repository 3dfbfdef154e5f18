#include "signal/signal_control.hpp"

#include <cmath>
#include <cstdio>

#include "common/error.hpp"

namespace decor {

const char* to_string(Stage s) {
  switch (s) {
    case Stage::kSteady: return "steady";
    case Stage::kYellow: return "yellow";
    case Stage::kAllRed: return "all_red";
  }
  return "?";
}

const char* to_string(Approach a) {
  switch (a) {
    case Approach::kNorth: return "N";
    case Approach::kSouth: return "S";
    case Approach::kEast: return "E";
    case Approach::kWest: return "W";
  }
  return "?";
}

namespace {

constexpr int idx(Approach a) { return static_cast<int>(a); }
constexpr int idx(Movement m) { return static_cast<int>(m); }

void allow_all(PhaseDef& p, Approach a) {
  for (int m = 0; m < 3; ++m) p.vehicle[idx(a)][m] = true;
}

}  // namespace

int phase_count(LocationKind kind) {
  return kind == LocationKind::kIntersection ? kIntersectionPhases : kMidblockPhases;
}

std::vector<PhaseDef> phase_table(LocationKind kind) {
  std::vector<PhaseDef> out;
  if (kind == LocationKind::kMidblock) {
    PhaseDef veh;
    veh.phase = 1;
    veh.vehicle[idx(Approach::kEast)][idx(Movement::kThrough)] = true;
    veh.vehicle[idx(Approach::kWest)][idx(Movement::kThrough)] = true;
    PhaseDef ped;
    ped.phase = 2;
    ped.ped_green[0] = true;
    out = {veh, ped};
    return out;
  }
  // Right turns run in every phase but 4; lefts follow their through green.
  auto with_rights = [](PhaseDef p) {
    for (int a = 0; a < 4; ++a) p.vehicle[a][idx(Movement::kRight)] = true;
    return p;
  };
  PhaseDef p1;
  p1.phase = 1;
  allow_all(p1, Approach::kNorth);
  allow_all(p1, Approach::kSouth);
  p1.ped_green[idx(Approach::kEast)] = true;
  p1.ped_green[idx(Approach::kWest)] = true;
  PhaseDef p2;
  p2.phase = 2;
  allow_all(p2, Approach::kEast);
  allow_all(p2, Approach::kWest);
  p2.ped_green[idx(Approach::kNorth)] = true;
  p2.ped_green[idx(Approach::kSouth)] = true;
  PhaseDef p3;
  p3.phase = 3;  // N->E and S->W: the two opposing lefts
  p3.vehicle[idx(Approach::kNorth)][idx(Movement::kLeft)] = true;
  p3.vehicle[idx(Approach::kSouth)][idx(Movement::kLeft)] = true;
  PhaseDef p4;
  p4.phase = 4;
  p4.ped_green = {true, true, true, true};
  out = {with_rights(p1), with_rights(p2), with_rights(p3), p4};
  return out;
}

ControllerState make_controller(LocationKind kind, int phase) {
  if (phase < 1 || phase > phase_count(kind))
    throw Error(ErrorKind::kProtocol, "invalid phase " + std::to_string(phase));
  ControllerState cs;
  cs.kind = kind;
  cs.current_phase = phase;
  cs.pending_phase = phase;
  return cs;
}

ControllerState apply_command(const ControllerState& cs, int target_phase,
                              const TransitionTiming& timing) {
  if (target_phase < 1 || target_phase > phase_count(cs.kind))
    throw Error(ErrorKind::kProtocol, "invalid phase " + std::to_string(target_phase));
  ControllerState out = cs;
  if (cs.stage == Stage::kSteady) {
    if (target_phase == cs.current_phase) return out;
    out.pending_phase = target_phase;
    if (timing.yellow_steps > 0) {
      out.stage = Stage::kYellow;
      out.stage_countdown = timing.yellow_steps;
    } else if (timing.all_red_steps > 0) {
      out.stage = Stage::kAllRed;
      out.stage_countdown = timing.all_red_steps;
    } else {
      out.current_phase = target_phase;
    }
    return out;
  }
  out.pending_phase = target_phase;  // last write wins
  return out;
}

ControllerState tick(const ControllerState& cs, const TransitionTiming& timing) {
  ControllerState out = cs;
  if (out.stage == Stage::kSteady) return out;
  if (--out.stage_countdown > 0) return out;
  if (out.stage == Stage::kYellow && timing.all_red_steps > 0) {
    out.stage = Stage::kAllRed;
    out.stage_countdown = timing.all_red_steps;
    return out;
  }
  out.stage = Stage::kSteady;
  out.stage_countdown = 0;
  out.current_phase = out.pending_phase;
  return out;
}

SignalDisplay display_of(const ControllerState& cs) {
  return {cs.current_phase, cs.stage, false};
}

bool vehicle_green(LocationKind kind, const SignalDisplay& d, Approach a, Movement m) {
  if (d.uncontrolled) return true;
  if (d.stage != Stage::kSteady) return false;
  static const auto int_table = phase_table(LocationKind::kIntersection);
  static const auto mb_table = phase_table(LocationKind::kMidblock);
  const auto& t = kind == LocationKind::kIntersection ? int_table : mb_table;
  if (kind == LocationKind::kMidblock) m = Movement::kThrough;
  return t.at(d.phase - 1).vehicle[idx(a)][idx(m)];
}

bool pedestrian_walk(LocationKind kind, const SignalDisplay& d, Approach leg) {
  if (d.uncontrolled) return true;
  if (d.stage != Stage::kSteady) return false;
  if (kind == LocationKind::kMidblock) return d.phase == 2;
  static const auto int_table = phase_table(LocationKind::kIntersection);
  return int_table.at(d.phase - 1).ped_green[idx(leg)];
}

namespace {

long long to_ms(double s) { return std::llround(s * 1000.0); }

long long cycle_pos_ms(double t, long long cycle_ms) {
  long long ms = to_ms(t);
  long long r = ms % cycle_ms;
  return r < 0 ? r + cycle_ms : r;
}

}  // namespace

SignalDisplay fixed_time_intersection(double t, const FixedTimePlan& plan) {
  const long long g = to_ms(plan.green_s), y = to_ms(plan.yellow_s), r = to_ms(plan.all_red_s);
  const long long half = g + y + r;
  long long pos = cycle_pos_ms(t, 2 * half);
  SignalDisplay d;
  d.phase = pos < half ? 1 : 2;
  pos %= half;
  d.stage = pos < g ? Stage::kSteady : (pos < g + y ? Stage::kYellow : Stage::kAllRed);
  return d;
}

SignalDisplay fixed_time_midblock(double t, const FixedTimePlan& plan) {
  const long long g = to_ms(plan.mb_vehicle_green_s), y = to_ms(plan.mb_yellow_s),
                  r = to_ms(plan.mb_all_red_s), w = to_ms(plan.mb_walk_s),
                  c = to_ms(plan.mb_clearance_s);
  const long long pos = cycle_pos_ms(t, g + y + r + w + c);
  SignalDisplay d;
  if (pos < g) {
    d = {1, Stage::kSteady, false};
  } else if (pos < g + y) {
    d = {1, Stage::kYellow, false};
  } else if (pos < g + y + r) {
    d = {1, Stage::kAllRed, false};
  } else if (pos < g + y + r + w) {
    d = {2, Stage::kSteady, false};
  } else {
    d = {2, Stage::kYellow, false};  // pedestrian clearance: no new starts
  }
  return d;
}

SignalDisplay fixed_time_intersection(double t) { return fixed_time_intersection(t, {}); }
SignalDisplay fixed_time_midblock(double t) { return fixed_time_midblock(t, {}); }
SignalDisplay unsignalized_midblock() { return {1, Stage::kSteady, true}; }

long long joint_action_count(int crosswalks) {
  if (crosswalks < 0 || crosswalks > 60) throw Error(ErrorKind::kContract, "bad crosswalk count");
  return 4LL << crosswalks;
}

JointAction decode_joint_action(long long index, int crosswalks) {
  if (index < 0 || index >= joint_action_count(crosswalks))
    throw Error(ErrorKind::kContract, "joint action index out of range");
  JointAction a;
  a.intersection_phase = static_cast<int>(index % 4) + 1;
  long long bits = index / 4;
  for (int c = 0; c < crosswalks; ++c) a.crosswalk_ped.push_back(((bits >> c) & 1) != 0);
  return a;
}

std::vector<JointAction> enumerate_joint_actions(int crosswalks) {
  std::vector<JointAction> out;
  const long long n = joint_action_count(crosswalks);
  out.reserve(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) out.push_back(decode_joint_action(i, crosswalks));
  return out;
}

std::vector<PhaseCommand> to_commands(const JointAction& a) {
  std::vector<PhaseCommand> out;
  out.push_back({0, a.intersection_phase});
  for (std::size_t c = 0; c < a.crosswalk_ped.size(); ++c)
    out.push_back({static_cast<int>(c) + 1, a.crosswalk_ped[c] ? 2 : 1});
  return out;
}

std::string schedule_csv(LocationKind kind, double step_s, const FixedTimePlan& plan) {
  if (!(step_s > 0.0)) throw Error(ErrorKind::kContract, "step must be > 0");
  const double cycle =
      kind == LocationKind::kIntersection ? plan.intersection_cycle() : plan.midblock_cycle();
  std::string out = "t_s,phase,stage,vehicle_green,pedestrian_walk\n";
  const long long n = std::llround(cycle / step_s);
  char buf[128];
  for (long long i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * step_s;
    SignalDisplay d = kind == LocationKind::kIntersection ? fixed_time_intersection(t, plan)
                                                          : fixed_time_midblock(t, plan);
    bool veh, ped;
    if (kind == LocationKind::kIntersection) {
      veh = vehicle_green(kind, d, Approach::kNorth, Movement::kThrough) ||
            vehicle_green(kind, d, Approach::kEast, Movement::kThrough);
      ped = pedestrian_walk(kind, d, Approach::kEast) || pedestrian_walk(kind, d, Approach::kNorth);
    } else {
      veh = vehicle_green(kind, d, Approach::kEast, Movement::kThrough);
      ped = pedestrian_walk(kind, d, Approach::kEast);
    }
    std::snprintf(buf, sizeof buf, "%.3f,%d,%s,%d,%d\n", t, d.phase, to_string(d.stage),
                  veh ? 1 : 0, ped ? 1 : 0);
    out += buf;
  }
  return out;
}

}  // namespace decor
