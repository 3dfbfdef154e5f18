#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "common/rng.hpp"
#include "demand/demand.hpp"
#include "graph/corridor_graph.hpp"
#include "signal/signal_control.hpp"

namespace decor {

enum class ControlMode { kLearned, kFixedTime, kUnsignalized };

const char* to_string(ControlMode m);
ControlMode parse_control_mode(const std::string& s);  // learned|fixed|unsignalized

struct SimConfig {
  double sim_step_s = 0.1;
  int action_repeat = 10;  // sim steps per action step
  double ped_speed = 1.2;
  double veh_free_speed = 11.0;
  double saturation_flow = 0.5;  // veh/s per stop line
  double int_detect_m = 100.0;
  double mb_veh_detect_m = 50.0;
  double mb_ped_detect_m = 5.0;
  double veh_wait_speed = 0.2;
  double ped_wait_speed = 0.5;
  int horizon_steps = 360;  // action steps after warmup
  int warmup_min = 40;
  int warmup_max = 140;
  int max_crosswalk_slots = 7;
  double approach_length_m = 200.0;  // N/S/W approach and exit legs
  double box_time_s = 2.0;
  double vehicle_length_m = 5.0;
  double yield_buffer_m = 2.0;
  TransitionTiming timing;
  FixedTimePlan plan;
  ControlMode mode = ControlMode::kLearned;
  bool debug_force_conflicts = false;  // test hook: ignore yielding, force greens

  int headway_steps() const;
  int feature_columns() const { return 9 + 7 * max_crosswalk_slots; }
  void validate() const;
};

// Per-location quantities at the end of an action window.
struct LocationObs {
  std::vector<double> veh_queue;  // per incoming direction
  double veh_max_wait = 0.0;      // longest current wait spell among queued vehicles
  std::vector<double> ped_queue;
  double ped_max_wait = 0.0;
};

struct StepObservation {
  LocationObs intersection;          // 4 vehicle directions, 4 pedestrian directions
  std::vector<LocationObs> crosswalks;  // 2 vehicle directions, 1 pedestrian queue
  long long conflicts = 0;           // within the window
  int active_pedestrians = 0;
  int active_vehicles = 0;
};

struct AgentRecord {
  int trip = -1;
  TravelMode mode = TravelMode::kPedestrian;
  double spawn_s = 0.0;
  bool crossing = false;      // pedestrian whose route crosses the roadway
  double arrival_s = 0.0;     // walk time to the first crossing on its route
  double wait_total_s = 0.0;
  double wait_max_s = 0.0;    // longest single wait spell
  bool finished = false;
};

struct EpisodeMetrics {
  int pedestrians = 0;
  int crossing_pedestrians = 0;
  int vehicles = 0;
  double mean_ped_arrival_s = 0.0;
  double mean_ped_wait_s = 0.0;
  double mean_veh_wait_s = 0.0;
  double max_ped_wait_s = 0.0;
  double max_veh_wait_s = 0.0;
  double total_ped_wait_s = 0.0;
  double total_veh_wait_s = 0.0;
  long long conflicts = 0;
  long long dropped_trips = 0;
  std::vector<AgentRecord> records;
};

struct TripAccounting {
  long long pending = 0;
  long long active = 0;
  long long arrived = 0;
  long long dropped = 0;
};

class Simulator {
 public:
  // init_episode: empty network, demand queued, routes precomputed.
  Simulator(const LayoutGraph& g, const DemandTable& d, const SimConfig& cfg, std::uint64_t seed);

  // Random-length warmup (uniform in [warmup_min, warmup_max] action steps)
  // with random phases in learned mode or the baseline's own schedule.
  // Returns the number of action steps run. Metrics count agents spawned
  // after this point.
  int warmup();
  void warmup_steps(int n);

  // Advances one action step (action_repeat sim steps). In learned mode one
  // command per controlled location is required.
  StepObservation step(const std::vector<PhaseCommand>& commands);
  StepObservation step();  // fixed-time / unsignalized

  Eigen::MatrixXd observe() const;  // action_repeat x feature_columns
  EpisodeMetrics episode_metrics() const;
  TripAccounting accounting() const;

  long long clock() const { return clock_; }
  double time_s() const { return static_cast<double>(clock_) * cfg_.sim_step_s; }
  int crosswalk_count() const { return static_cast<int>(crosswalks_.size()); }
  bool done() const { return action_steps_since_warmup_ >= cfg_.horizon_steps; }
  int action_steps_since_warmup() const { return action_steps_since_warmup_; }
  const SimConfig& config() const { return cfg_; }
  const LayoutGraph& graph() const { return graph_; }
  long long dropped_trips() const { return dropped_; }
  std::vector<SignalDisplay> displays() const { return displays_; }

  // Test hooks.
  void inject_queued_vehicle(int location, int direction);
  std::vector<double> current_wait_spells(TravelMode mode) const;
  int queue_length(int location, int direction) const;

 private:
  struct Route {
    std::vector<int> edges;
    std::vector<double> edge_start;  // distance from origin to each edge start
    std::vector<int> crossing_at;     // route index of each crossing edge
    double arrival_dist = 0.0;
    double length = 0.0;
  };

  struct Crossing {
    int location = 0;  // 0 intersection, c + 1 mid-block c
    double x = 0.0;
    double width = 0.0;
    int edge_ns = -1;
    int edge_sn = -1;
    double edge_length = 0.0;
  };

  struct Ped {
    int trip = -1;
    int route = -1;
    int edge_idx = 0;
    double pos = 0.0;        // along current edge
    double travelled = 0.0;  // along route
    int next_crossing = 0;   // index into route.crossing_at
    double retire_at = 0.0;  // route distance after which it no longer interacts
    int record = -1;
    double wait_spell = 0.0;
    bool waiting = false;
    bool done = false;
  };

  enum class VehWhere { kApproach, kWestbound, kEastbound, kBox, kExit, kDone };

  struct Veh {
    int trip = -1;
    Approach from = Approach::kEast;
    Approach to = Approach::kWest;
    Movement movement = Movement::kThrough;
    VehWhere where = VehWhere::kApproach;
    double pos = 0.0;  // approach: distance to stop line; corridor: x; exit: distance travelled
    int next_stop = 0;
    bool queued = false;
    int queued_at = -1;
    double box_timer = 0.0;
    int record = -1;
    double wait_spell = 0.0;
    bool waiting = false;
  };

  struct StopLine {
    int location = 0;
    int direction = 0;  // intersection: approach index; mid-block: 0 EB, 1 WB
    double x = 0.0;
    int crossing = -1;  // crossing the vehicle enters after this line, -1 none
    std::deque<int> queue;
    long long last_departure = std::numeric_limits<long long>::min() / 2;
  };

  void sim_step();
  void update_displays();
  void spawn_due();
  void spawn_pedestrian(int trip_idx);
  void spawn_vehicle(int trip_idx);
  void move_pedestrians();
  void move_vehicles();
  bool vehicle_permitted(const StopLine& s, const Veh& v) const;
  bool yield_blocked(int crossing) const;
  bool try_pass(int stop, int vid);
  void enter_box(int vid);
  void advance_corridor(int vid, double dist);
  void exit_box(int vid);
  double cell_lo(int crossing) const;
  double cell_hi(int crossing) const;
  void compute_vehicle_zones();
  void count_conflicts();
  void record_features();
  int crossing_of_location(int location) const;
  void retire_ped(Ped& p);
  bool ped_may_enter(const Ped& p, int crossing) const;

  LayoutGraph graph_;
  DemandTable demand_;
  SimConfig cfg_;
  Rng rng_;

  std::vector<Crossing> crossings_;  // [0] intersection, then mid-blocks
  std::vector<CrosswalkInfo> crosswalks_;
  std::map<std::pair<int, int>, int> route_cache_;
  std::vector<Route> routes_;

  std::vector<StopLine> stops_;  // 0..3 intersection approaches, then EB/WB per mid-block
  std::vector<int> eastbound_stops_;
  std::vector<int> westbound_stops_;

  std::vector<Ped> peds_;
  std::vector<Veh> vehs_;
  std::vector<int> active_peds_;
  std::vector<int> active_vehs_;
  std::vector<AgentRecord> records_;

  ControllerState int_ctrl_;
  std::vector<ControllerState> mb_ctrl_;
  std::vector<SignalDisplay> displays_;  // [0] intersection, then mid-blocks

  // Per-step scratch.
  std::vector<char> veh_commit_;     // vehicle between stop line and cell end
  std::vector<char> veh_in_cell_;
  std::vector<char> ped_on_crossing_;
  std::vector<char> ped_near_;

  std::deque<Eigen::RowVectorXd> rows_;
  std::size_t next_trip_ = 0;
  long long clock_ = 0;
  long long counted_from_ = 0;
  int action_steps_since_warmup_ = 0;
  bool warmed_up_ = false;
  long long dropped_ = 0;
  long long arrived_ = 0;
  long long conflicts_window_ = 0;
  long long conflicts_total_ = 0;
};

}  // namespace decor
