#pragma once

#include <array>
#include <string>
#include <vector>

namespace decor {

enum class LocationKind { kIntersection, kMidblock };
enum class Stage { kSteady, kYellow, kAllRed };
enum class Approach { kNorth = 0, kSouth = 1, kEast = 2, kWest = 3 };
enum class Movement { kThrough = 0, kLeft = 1, kRight = 2 };

inline constexpr int kIntersectionPhases = 4;
inline constexpr int kMidblockPhases = 2;

const char* to_string(Stage s);
const char* to_string(Approach a);

// Movement permissions of one phase. Intersection pedestrian crossings are
// indexed by the leg they cross (N, S, E, W). A mid-block uses approach
// kEast/kWest for its two vehicle directions and ped_green[0].
struct PhaseDef {
  int phase = 1;
  std::array<std::array<bool, 3>, 4> vehicle{};  // [approach][movement]
  std::array<bool, 4> ped_green{};
};

std::vector<PhaseDef> phase_table(LocationKind kind);
int phase_count(LocationKind kind);

struct PhaseCommand {
  int location = 0;  // 0 = intersection, 1.. = mid-block crosswalks by location
  int target_phase = 1;
};

struct TransitionTiming {
  int yellow_steps = 4;
  int all_red_steps = 2;
};

struct ControllerState {
  LocationKind kind = LocationKind::kIntersection;
  int current_phase = 1;
  int pending_phase = 1;
  Stage stage = Stage::kSteady;
  int stage_countdown = 0;  // sim steps left in the current transition stage
};

ControllerState make_controller(LocationKind kind, int phase = 1);

// Steady + same phase is a no-op. Otherwise a transition is scheduled; a
// command arriving mid-transition replaces the pending target.
ControllerState apply_command(const ControllerState& cs, int target_phase,
                              const TransitionTiming& timing = {});

// Advances one sim step.
ControllerState tick(const ControllerState& cs, const TransitionTiming& timing = {});

// What a location shows during one sim step.
struct SignalDisplay {
  int phase = 1;
  Stage stage = Stage::kSteady;
  bool uncontrolled = false;  // unsignalized mid-block: yield rules only
};

SignalDisplay display_of(const ControllerState& cs);

bool vehicle_green(LocationKind kind, const SignalDisplay& d, Approach a, Movement m);
bool pedestrian_walk(LocationKind kind, const SignalDisplay& d, Approach leg);

// Fixed-time schedules. Times are seconds since episode start.
SignalDisplay fixed_time_intersection(double t);
SignalDisplay fixed_time_midblock(double t);
SignalDisplay unsignalized_midblock();

struct FixedTimePlan {
  double green_s = 90.0;
  double yellow_s = 4.0;
  double all_red_s = 2.0;
  double mb_vehicle_green_s = 40.0;
  double mb_yellow_s = 4.0;
  double mb_all_red_s = 2.0;
  double mb_walk_s = 7.0;
  double mb_clearance_s = 9.0;

  double intersection_cycle() const { return 2.0 * (green_s + yellow_s + all_red_s); }
  double midblock_cycle() const {
    return mb_vehicle_green_s + mb_yellow_s + mb_all_red_s + mb_walk_s + mb_clearance_s;
  }
};

SignalDisplay fixed_time_intersection(double t, const FixedTimePlan& plan);
SignalDisplay fixed_time_midblock(double t, const FixedTimePlan& plan);

// Joint action = (intersection phase, one bit per crosswalk; bit set means
// pedestrian phase). Enumerated in index order.
struct JointAction {
  int intersection_phase = 1;
  std::vector<bool> crosswalk_ped;
};

long long joint_action_count(int crosswalks);
JointAction decode_joint_action(long long index, int crosswalks);
std::vector<JointAction> enumerate_joint_actions(int crosswalks);
std::vector<PhaseCommand> to_commands(const JointAction& a);

// One row per `step_s` over one cycle: t,phase,stage,... for inspection.
std::string schedule_csv(LocationKind kind, double step_s, const FixedTimePlan& plan = {});

}  // namespace decor
