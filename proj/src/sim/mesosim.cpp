#include "sim/mesosim.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace decor {

const char* to_string(ControlMode m) {
  switch (m) {
    case ControlMode::kLearned: return "learned";
    case ControlMode::kFixedTime: return "fixed";
    case ControlMode::kUnsignalized: return "unsignalized";
  }
  return "?";
}

ControlMode parse_control_mode(const std::string& s) {
  if (s == "learned") return ControlMode::kLearned;
  if (s == "fixed" || s == "fixed-time") return ControlMode::kFixedTime;
  if (s == "unsignalized") return ControlMode::kUnsignalized;
  throw Error(ErrorKind::kConfig, "unknown controller: " + s);
}

int SimConfig::headway_steps() const {
  return std::max(1, static_cast<int>(std::lround(1.0 / (saturation_flow * sim_step_s))));
}

void SimConfig::validate() const {
  if (!(sim_step_s > 0.0)) throw Error(ErrorKind::kConfig, "sim_step must be > 0");
  if (action_repeat < 1) throw Error(ErrorKind::kConfig, "action_repeat must be >= 1");
  if (!(ped_speed > 0.0) || !(veh_free_speed > 0.0) || !(saturation_flow > 0.0))
    throw Error(ErrorKind::kConfig, "speeds and saturation flow must be > 0");
  if (!(veh_wait_speed > 0.0) || !(ped_wait_speed > 0.0))
    throw Error(ErrorKind::kConfig, "wait thresholds must be > 0");
  if (warmup_min < 0 || warmup_max < warmup_min)
    throw Error(ErrorKind::kConfig, "bad warmup range");
  if (horizon_steps < 1) throw Error(ErrorKind::kConfig, "horizon must be >= 1");
  if (max_crosswalk_slots < 0) throw Error(ErrorKind::kConfig, "bad crosswalk slot count");
}

namespace {

constexpr int kNorth = static_cast<int>(Approach::kNorth);
constexpr int kSouth = static_cast<int>(Approach::kSouth);
constexpr int kEast = static_cast<int>(Approach::kEast);
constexpr int kWest = static_cast<int>(Approach::kWest);

Approach gate_approach(const std::string& g) {
  if (g == "N") return Approach::kNorth;
  if (g == "S") return Approach::kSouth;
  if (g == "E") return Approach::kEast;
  if (g == "W") return Approach::kWest;
  throw Error(ErrorKind::kValidation, "unknown vehicle gate " + g);
}

// Right-hand traffic. `from` is the approach the vehicle arrives on.
Movement movement_of(Approach from, Approach to) {
  switch (from) {
    case Approach::kNorth:  // southbound
      return to == Approach::kSouth ? Movement::kThrough
             : to == Approach::kWest ? Movement::kRight : Movement::kLeft;
    case Approach::kSouth:  // northbound
      return to == Approach::kNorth ? Movement::kThrough
             : to == Approach::kEast ? Movement::kRight : Movement::kLeft;
    case Approach::kEast:  // westbound
      return to == Approach::kWest ? Movement::kThrough
             : to == Approach::kNorth ? Movement::kRight : Movement::kLeft;
    case Approach::kWest:  // eastbound
      return to == Approach::kEast ? Movement::kThrough
             : to == Approach::kSouth ? Movement::kRight : Movement::kLeft;
  }
  return Movement::kThrough;
}

}  // namespace

Simulator::Simulator(const LayoutGraph& g, const DemandTable& d, const SimConfig& cfg,
                     std::uint64_t seed)
    : graph_(g), demand_(d), cfg_(cfg), rng_(seed) {
  cfg_.validate();
  crosswalks_ = graph_.crosswalks();
  if (static_cast<int>(crosswalks_.size()) > cfg_.max_crosswalk_slots)
    throw Error(ErrorKind::kContract, "layout has more crosswalks than controller slots");

  const auto& spec = graph_.spec();
  Crossing ic;
  ic.location = 0;
  ic.x = 0.0;
  ic.width = spec.intersection_crosswalk_width_m;
  ic.edge_ns = graph_.intersection_edge_north_to_south();
  ic.edge_sn = graph_.intersection_edge_south_to_north();
  ic.edge_length = graph_.edges()[ic.edge_ns].length;
  crossings_.push_back(ic);
  for (std::size_t c = 0; c < crosswalks_.size(); ++c) {
    Crossing mc;
    mc.location = static_cast<int>(c) + 1;
    mc.x = crosswalks_[c].location;
    mc.width = crosswalks_[c].width;
    mc.edge_ns = crosswalks_[c].edge_north_to_south;
    mc.edge_sn = crosswalks_[c].edge_south_to_north;
    mc.edge_length = graph_.edges()[mc.edge_ns].length;
    crossings_.push_back(mc);
  }

  for (int a = 0; a < 4; ++a) {
    StopLine s;
    s.location = 0;
    s.direction = a;
    if (a == kEast) {
      s.x = ic.width / 2.0 + 1.0;
      s.crossing = 0;
    }
    stops_.push_back(s);
  }
  std::vector<std::pair<double, int>> eb, wb;
  for (std::size_t k = 1; k < crossings_.size(); ++k) {
    const auto& c = crossings_[k];
    StopLine e;
    e.location = c.location;
    e.direction = 0;
    e.x = c.x - c.width / 2.0 - 1.0;
    e.crossing = static_cast<int>(k);
    eb.emplace_back(e.x, static_cast<int>(stops_.size()));
    stops_.push_back(e);
    StopLine w;
    w.location = c.location;
    w.direction = 1;
    w.x = c.x + c.width / 2.0 + 1.0;
    w.crossing = static_cast<int>(k);
    wb.emplace_back(w.x, static_cast<int>(stops_.size()));
    stops_.push_back(w);
  }
  std::sort(eb.begin(), eb.end());
  std::sort(wb.begin(), wb.end(), [](auto a, auto b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  for (auto [x, i] : eb) eastbound_stops_.push_back(i);
  for (auto [x, i] : wb) westbound_stops_.push_back(i);
  westbound_stops_.push_back(kEast);

  int_ctrl_ = make_controller(LocationKind::kIntersection, 1);
  mb_ctrl_.assign(crosswalks_.size(), make_controller(LocationKind::kMidblock, 1));
  displays_.assign(crossings_.size(), SignalDisplay{});
  veh_commit_.assign(crossings_.size(), 0);
  veh_in_cell_.assign(crossings_.size(), 0);
  ped_on_crossing_.assign(crossings_.size(), 0);
  ped_near_.assign(crossings_.size(), 0);
  update_displays();
}

double Simulator::cell_lo(int k) const { return crossings_[k].x - crossings_[k].width / 2.0; }
double Simulator::cell_hi(int k) const { return crossings_[k].x + crossings_[k].width / 2.0; }

void Simulator::update_displays() {
  const double t = time_s();
  switch (cfg_.mode) {
    case ControlMode::kLearned:
      displays_[0] = display_of(int_ctrl_);
      for (std::size_t c = 0; c < mb_ctrl_.size(); ++c) displays_[c + 1] = display_of(mb_ctrl_[c]);
      break;
    case ControlMode::kFixedTime:
      displays_[0] = fixed_time_intersection(t, cfg_.plan);
      for (std::size_t c = 1; c < displays_.size(); ++c)
        displays_[c] = fixed_time_midblock(t, cfg_.plan);
      break;
    case ControlMode::kUnsignalized:
      displays_[0] = fixed_time_intersection(t, cfg_.plan);
      for (std::size_t c = 1; c < displays_.size(); ++c) displays_[c] = unsignalized_midblock();
      break;
  }
}

void Simulator::spawn_due() {
  const double t = time_s() + 1e-9;
  while (next_trip_ < demand_.trips.size() && demand_.trips[next_trip_].depart_s <= t) {
    const int idx = static_cast<int>(next_trip_++);
    if (demand_.trips[idx].mode == TravelMode::kPedestrian)
      spawn_pedestrian(idx);
    else
      spawn_vehicle(idx);
  }
}

void Simulator::spawn_pedestrian(int trip_idx) {
  const auto& trip = demand_.trips[trip_idx];
  auto o = graph_.find_zone_anchor(trip.origin);
  auto d = graph_.find_zone_anchor(trip.dest);
  if (!o || !d) {
    ++dropped_;
    return;
  }
  auto key = std::make_pair(*o, *d);
  auto it = route_cache_.find(key);
  if (it == route_cache_.end()) {
    Route r;
    try {
      auto p = shortest_path(graph_, *o, *d);
      r.edges = p.edges;
    } catch (const Error&) {
      route_cache_[key] = -1;
      ++dropped_;
      return;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < r.edges.size(); ++i) {
      const auto& e = graph_.edges()[r.edges[i]];
      r.edge_start.push_back(acc);
      if (e.kind == EdgeKind::kCrossing) r.crossing_at.push_back(static_cast<int>(i));
      acc += e.length;
    }
    r.length = acc;
    if (!r.crossing_at.empty()) {
      const auto& e = graph_.edges()[r.edges[r.crossing_at[0]]];
      r.arrival_dist = std::max(0.0, r.edge_start[r.crossing_at[0]] - e.width / 2.0);
    }
    routes_.push_back(std::move(r));
    it = route_cache_.emplace(key, static_cast<int>(routes_.size()) - 1).first;
  }
  if (it->second < 0) {
    ++dropped_;
    return;
  }
  const Route& r = routes_[it->second];
  Ped p;
  p.trip = trip_idx;
  p.route = it->second;
  if (!r.crossing_at.empty()) {
    const int last = r.crossing_at.back();
    p.retire_at = r.edge_start[last] + graph_.edges()[r.edges[last]].length + cfg_.mb_ped_detect_m;
  }
  if (warmed_up_) {
    AgentRecord rec;
    rec.trip = trip_idx;
    rec.mode = TravelMode::kPedestrian;
    rec.spawn_s = time_s();
    rec.crossing = !r.crossing_at.empty();
    rec.arrival_s = r.arrival_dist / cfg_.ped_speed;
    p.record = static_cast<int>(records_.size());
    records_.push_back(rec);
  }
  peds_.push_back(p);
  if (r.crossing_at.empty()) {
    retire_ped(peds_.back());
    return;
  }
  active_peds_.push_back(static_cast<int>(peds_.size()) - 1);
}

void Simulator::retire_ped(Ped& p) {
  p.done = true;
  ++arrived_;
  if (p.record >= 0) records_[p.record].finished = true;
}

void Simulator::spawn_vehicle(int trip_idx) {
  const auto& trip = demand_.trips[trip_idx];
  Veh v;
  v.trip = trip_idx;
  v.from = gate_approach(trip.origin);
  v.to = gate_approach(trip.dest);
  v.movement = movement_of(v.from, v.to);
  if (v.from == Approach::kEast) {
    v.where = VehWhere::kWestbound;
    v.pos = graph_.corridor_length() + 20.0;
    v.next_stop = 0;
  } else {
    v.where = VehWhere::kApproach;
    v.pos = cfg_.approach_length_m;
  }
  if (warmed_up_) {
    AgentRecord rec;
    rec.trip = trip_idx;
    rec.mode = TravelMode::kVehicle;
    rec.spawn_s = time_s();
    v.record = static_cast<int>(records_.size());
    records_.push_back(rec);
  }
  vehs_.push_back(v);
  active_vehs_.push_back(static_cast<int>(vehs_.size()) - 1);
}

bool Simulator::ped_may_enter(const Ped&, int k) const {
  if (cfg_.debug_force_conflicts) return true;
  const bool walk = k == 0 ? pedestrian_walk(LocationKind::kIntersection, displays_[0], Approach::kEast)
                           : pedestrian_walk(LocationKind::kMidblock, displays_[k], Approach::kEast);
  // A queued vehicle can sit with its tail over a nearby crossing.
  return walk && !veh_commit_[k] && !veh_in_cell_[k];
}

void Simulator::compute_vehicle_zones() {
  std::fill(veh_commit_.begin(), veh_commit_.end(), 0);
  std::fill(veh_in_cell_.begin(), veh_in_cell_.end(), 0);
  const double L = cfg_.vehicle_length_m;
  for (int vid : active_vehs_) {
    const Veh& v = vehs_[vid];
    if (v.where != VehWhere::kEastbound && v.where != VehWhere::kWestbound) continue;
    const bool eb = v.where == VehWhere::kEastbound;
    for (std::size_t k = 0; k < crossings_.size(); ++k) {
      const double lo = cell_lo(static_cast<int>(k)), hi = cell_hi(static_cast<int>(k));
      const double f = v.pos;
      if (eb) {
        if (f > lo && f <= hi + L) veh_in_cell_[k] = 1;
        if (!v.queued && f >= lo - 1.0 && f <= hi + L) veh_commit_[k] = 1;
      } else {
        if (f >= lo - L && f < hi) veh_in_cell_[k] = 1;
        if (!v.queued && f >= lo - L && f <= hi + 1.0) veh_commit_[k] = 1;
      }
    }
  }
}

void Simulator::move_pedestrians() {
  const double dt = cfg_.sim_step_s;
  std::fill(ped_on_crossing_.begin(), ped_on_crossing_.end(), 0);
  std::fill(ped_near_.begin(), ped_near_.end(), 0);
  for (int pid : active_peds_) {
    Ped& p = peds_[pid];
    if (p.done) continue;
    const Route& r = routes_[p.route];
    double remaining = cfg_.ped_speed * dt;
    double moved = 0.0;
    while (remaining > 1e-12) {
      const auto& e = graph_.edges()[r.edges[p.edge_idx]];
      const double to_end = e.length - p.pos;
      if (remaining < to_end) {
        p.pos += remaining;
        moved += remaining;
        remaining = 0.0;
        break;
      }
      p.pos = e.length;
      moved += to_end;
      remaining -= to_end;
      if (p.edge_idx + 1 >= static_cast<int>(r.edges.size())) break;
      const auto& next = graph_.edges()[r.edges[p.edge_idx + 1]];
      if (next.kind == EdgeKind::kCrossing && !ped_may_enter(p, next.location)) break;
      if (e.kind == EdgeKind::kCrossing) ++p.next_crossing;
      ++p.edge_idx;
      p.pos = 0.0;
    }
    p.travelled = r.edge_start[p.edge_idx] + p.pos;
    const bool waiting = moved / dt < cfg_.ped_wait_speed;
    p.waiting = waiting;
    if (waiting) {
      p.wait_spell += dt;
      if (p.record >= 0) {
        auto& rec = records_[p.record];
        rec.wait_total_s += dt;
        rec.wait_max_s = std::max(rec.wait_max_s, p.wait_spell);
      }
    } else {
      p.wait_spell = 0.0;
    }
    if (p.travelled >= p.retire_at) {
      retire_ped(p);
      continue;
    }
    const auto& cur = graph_.edges()[r.edges[p.edge_idx]];
    if (cur.kind == EdgeKind::kCrossing) {
      ped_on_crossing_[cur.location] = 1;
    } else if (p.next_crossing < static_cast<int>(r.crossing_at.size())) {
      const int ci = r.crossing_at[p.next_crossing];
      const int k = graph_.edges()[r.edges[ci]].location;
      const double gap = r.edge_start[ci] - p.travelled;
      if (gap <= cfg_.yield_buffer_m) {
        const bool walk =
            k == 0 ? pedestrian_walk(LocationKind::kIntersection, displays_[0], Approach::kEast)
                   : pedestrian_walk(LocationKind::kMidblock, displays_[k], Approach::kEast);
        if (walk) ped_near_[k] = 1;
      }
    }
  }
}

bool Simulator::vehicle_permitted(const StopLine& s, const Veh& v) const {
  if (cfg_.debug_force_conflicts) return true;
  if (s.location == 0)
    return vehicle_green(LocationKind::kIntersection, displays_[0], static_cast<Approach>(s.direction),
                         v.movement);
  return vehicle_green(LocationKind::kMidblock, displays_[s.location],
                       s.direction == 0 ? Approach::kWest : Approach::kEast, Movement::kThrough);
}

bool Simulator::yield_blocked(int k) const {
  if (cfg_.debug_force_conflicts || k < 0) return false;
  return ped_on_crossing_[k] || ped_near_[k];
}

bool Simulator::try_pass(int stop, int vid) {
  StopLine& s = stops_[stop];
  Veh& v = vehs_[vid];
  if (s.queue.empty() && vehicle_permitted(s, v) && !yield_blocked(s.crossing)) {
    s.last_departure = clock_;
    return true;
  }
  v.queued = true;
  v.queued_at = stop;
  s.queue.push_back(vid);
  return false;
}

void Simulator::enter_box(int vid) {
  Veh& v = vehs_[vid];
  v.where = VehWhere::kBox;
  v.box_timer = cfg_.box_time_s;
  v.queued = false;
  v.queued_at = -1;
}

void Simulator::exit_box(int vid) {
  Veh& v = vehs_[vid];
  if (v.to == Approach::kEast) {
    if (yield_blocked(0)) return;  // hold in the box
    v.where = VehWhere::kEastbound;
    v.pos = -crossings_[0].width / 2.0 - 1.0;
    v.next_stop = 0;
  } else {
    v.where = VehWhere::kExit;
    v.pos = 0.0;
  }
}

// Moves a corridor vehicle `dist` metres, stopping at the first stop line
// it may not pass.
void Simulator::advance_corridor(int vid, double dist) {
  Veh& v = vehs_[vid];
  const bool eb = v.where == VehWhere::kEastbound;
  const auto& order = eb ? eastbound_stops_ : westbound_stops_;
  double target = eb ? v.pos + dist : v.pos - dist;
  while (v.next_stop < static_cast<int>(order.size())) {
    const int sid = order[v.next_stop];
    const double sx = stops_[sid].x;
    const bool reached = eb ? (sx <= target && sx >= v.pos) : (sx >= target && sx <= v.pos);
    if (!reached) {
      if (eb ? sx < v.pos : sx > v.pos) {  // already behind us (spawned past it)
        ++v.next_stop;
        continue;
      }
      break;
    }
    if (!try_pass(sid, vid)) {
      v.pos = sx;
      return;
    }
    ++v.next_stop;
  }
  v.pos = target;
  const double L = cfg_.vehicle_length_m;
  if (eb && v.pos >= graph_.corridor_length() + 20.0) {
    v.where = VehWhere::kDone;
  } else if (!eb && v.next_stop >= static_cast<int>(order.size()) &&
             v.pos <= cell_lo(0) - L) {
    enter_box(vid);
  }
}

void Simulator::move_vehicles() {
  const double dt = cfg_.sim_step_s;
  const double step_dist = cfg_.veh_free_speed * dt;
  const int headway = cfg_.headway_steps();

  // Queue discharge.
  for (std::size_t sid = 0; sid < stops_.size(); ++sid) {
    StopLine& s = stops_[sid];
    if (s.queue.empty()) continue;
    const int vid = s.queue.front();
    Veh& v = vehs_[vid];
    if (clock_ - s.last_departure < headway) continue;
    if (!vehicle_permitted(s, v) || yield_blocked(s.crossing)) continue;
    s.queue.pop_front();
    s.last_departure = clock_;
    v.queued = false;
    v.queued_at = -1;
    if (v.where == VehWhere::kApproach) {
      enter_box(vid);
    } else {
      ++v.next_stop;
    }
  }

  std::vector<double> before(active_vehs_.size());
  for (std::size_t i = 0; i < active_vehs_.size(); ++i) {
    const int vid = active_vehs_[i];
    Veh& v = vehs_[vid];
    bool moved = !v.queued;
    switch (v.where) {
      case VehWhere::kApproach:
        if (v.queued) break;
        v.pos -= step_dist;
        if (v.pos <= 0.0) {
          v.pos = 0.0;
          if (try_pass(v.from == Approach::kNorth ? kNorth : v.from == Approach::kSouth ? kSouth : kWest, vid))
            enter_box(vid);
        }
        break;
      case VehWhere::kWestbound:
      case VehWhere::kEastbound:
        if (v.queued) break;
        advance_corridor(vid, step_dist);
        break;
      case VehWhere::kBox:
        v.box_timer -= dt;
        if (v.box_timer <= 1e-9) {
          exit_box(vid);
          if (v.where == VehWhere::kBox) moved = false;
        }
        break;
      case VehWhere::kExit:
        v.pos += step_dist;
        if (v.pos >= cfg_.approach_length_m) v.where = VehWhere::kDone;
        break;
      case VehWhere::kDone:
        break;
    }
    const bool waiting = !moved;
    v.waiting = waiting;
    if (waiting) {
      v.wait_spell += dt;
      if (v.record >= 0) {
        auto& rec = records_[v.record];
        rec.wait_total_s += dt;
        rec.wait_max_s = std::max(rec.wait_max_s, v.wait_spell);
      }
    } else {
      v.wait_spell = 0.0;
    }
    if (v.where == VehWhere::kDone) {
      ++arrived_;
      if (v.record >= 0) records_[v.record].finished = true;
    }
  }
}

void Simulator::count_conflicts() {
  compute_vehicle_zones();
  for (std::size_t k = 0; k < crossings_.size(); ++k) {
    if (veh_in_cell_[k] && ped_on_crossing_[k]) {
      ++conflicts_window_;
      if (warmed_up_) ++conflicts_total_;
    }
  }
}

void Simulator::record_features() {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(cfg_.feature_columns());
  const auto& d0 = displays_[0];
  if (d0.stage != Stage::kAllRed) row(d0.phase - 1) = 1.0;
  for (std::size_t c = 1; c < displays_.size(); ++c) {
    const auto& d = displays_[c];
    if (!d.uncontrolled && d.stage != Stage::kAllRed) row(9 + 7 * (c - 1) + d.phase - 1) = 1.0;
  }
  auto slot = [&](int k, int offset) -> double& {
    return k == 0 ? row(4 + offset) : row(9 + 7 * (k - 1) + 2 + offset);
  };
  auto ped_slot = [&](int k, int offset) -> double& {
    return k == 0 ? row(7 + offset) : row(9 + 7 * (k - 1) + 5 + offset);
  };
  const double L = cfg_.vehicle_length_m;
  const double int_stop = stops_[kEast].x;
  for (int vid : active_vehs_) {
    const Veh& v = vehs_[vid];
    switch (v.where) {
      case VehWhere::kApproach:
        if (v.pos <= cfg_.int_detect_m) slot(0, 0) += 1.0;
        break;
      case VehWhere::kBox:
        slot(0, 1) += 1.0;
        break;
      case VehWhere::kExit:
        if (v.pos <= cfg_.int_detect_m) slot(0, 2) += 1.0;
        break;
      case VehWhere::kWestbound:
        if (v.pos >= int_stop && v.pos - int_stop <= cfg_.int_detect_m) slot(0, 0) += 1.0;
        else if (v.pos < int_stop) slot(0, 1) += 1.0;
        break;
      case VehWhere::kEastbound:
        if (v.pos <= cfg_.int_detect_m) slot(0, 2) += 1.0;
        break;
      case VehWhere::kDone:
        break;
    }
    if (v.where != VehWhere::kWestbound && v.where != VehWhere::kEastbound) continue;
    const double f = v.pos;
    const double r = cfg_.mb_veh_detect_m;
    for (int k = 1; k < static_cast<int>(crossings_.size()); ++k) {
      const double lo = cell_lo(k), hi = cell_hi(k);
      if (v.where == VehWhere::kEastbound) {
        if (f >= lo - r && f <= lo) slot(k, 0) += 1.0;
        else if (f > lo && f <= hi + L) slot(k, 1) += 1.0;
        else if (f > hi + L && f <= hi + L + r) slot(k, 2) += 1.0;
      } else {
        if (f >= hi && f <= hi + r) slot(k, 0) += 1.0;
        else if (f >= lo - L && f < hi) slot(k, 1) += 1.0;
        else if (f < lo - L && f >= lo - L - r) slot(k, 2) += 1.0;
      }
    }
  }
  for (int pid : active_peds_) {
    const Ped& p = peds_[pid];
    if (p.done) continue;
    const Route& rt = routes_[p.route];
    const auto& cur = graph_.edges()[rt.edges[p.edge_idx]];
    if (cur.kind == EdgeKind::kCrossing) {
      ped_slot(cur.location, 1) += 1.0;
      continue;
    }
    if (p.next_crossing > 0) {
      const int ci = rt.crossing_at[p.next_crossing - 1];
      const auto& e = graph_.edges()[rt.edges[ci]];
      if (p.travelled - (rt.edge_start[ci] + e.length) <= cfg_.mb_ped_detect_m) {
        ped_slot(e.location, 1) += 1.0;
        continue;
      }
    }
    if (p.next_crossing < static_cast<int>(rt.crossing_at.size())) {
      const int ci = rt.crossing_at[p.next_crossing];
      if (rt.edge_start[ci] - p.travelled <= cfg_.mb_ped_detect_m)
        ped_slot(graph_.edges()[rt.edges[ci]].location, 0) += 1.0;
    }
  }
  rows_.push_back(std::move(row));
  while (static_cast<int>(rows_.size()) > cfg_.action_repeat) rows_.pop_front();
}

void Simulator::sim_step() {
  if (cfg_.mode != ControlMode::kLearned) update_displays();
  spawn_due();
  compute_vehicle_zones();
  move_pedestrians();
  move_vehicles();
  count_conflicts();
  record_features();

  // Compact finished agents.
  active_peds_.erase(std::remove_if(active_peds_.begin(), active_peds_.end(),
                                    [&](int id) { return peds_[id].done; }),
                     active_peds_.end());
  active_vehs_.erase(std::remove_if(active_vehs_.begin(), active_vehs_.end(),
                                    [&](int id) { return vehs_[id].where == VehWhere::kDone; }),
                     active_vehs_.end());

  if (cfg_.mode == ControlMode::kLearned) {
    int_ctrl_ = tick(int_ctrl_, cfg_.timing);
    for (auto& c : mb_ctrl_) c = tick(c, cfg_.timing);
  }
  ++clock_;
  if (cfg_.mode == ControlMode::kLearned) update_displays();
}

int Simulator::crossing_of_location(int location) const {
  if (location < 0 || location >= static_cast<int>(crossings_.size()))
    throw Error(ErrorKind::kProtocol, "unknown location " + std::to_string(location));
  return location;
}

StepObservation Simulator::step(const std::vector<PhaseCommand>& commands) {
  if (cfg_.mode == ControlMode::kLearned) {
    if (commands.size() != crossings_.size())
      throw Error(ErrorKind::kProtocol, "expected " + std::to_string(crossings_.size()) +
                                            " commands, got " + std::to_string(commands.size()));
    std::vector<char> seen(crossings_.size(), 0);
    for (const auto& c : commands) {
      const int k = crossing_of_location(c.location);
      if (seen[k]) throw Error(ErrorKind::kProtocol, "duplicate command for a location");
      seen[k] = 1;
      if (k == 0)
        int_ctrl_ = apply_command(int_ctrl_, c.target_phase, cfg_.timing);
      else
        mb_ctrl_[k - 1] = apply_command(mb_ctrl_[k - 1], c.target_phase, cfg_.timing);
    }
    update_displays();
  } else {
    for (const auto& c : commands) crossing_of_location(c.location);
  }
  conflicts_window_ = 0;
  for (int i = 0; i < cfg_.action_repeat; ++i) sim_step();
  if (warmed_up_) ++action_steps_since_warmup_;

  StepObservation obs;
  obs.conflicts = conflicts_window_;
  obs.active_pedestrians = static_cast<int>(active_peds_.size());
  obs.active_vehicles = static_cast<int>(active_vehs_.size());
  obs.intersection.veh_queue.assign(4, 0.0);
  obs.intersection.ped_queue.assign(4, 0.0);
  obs.crosswalks.resize(crosswalks_.size());
  for (auto& c : obs.crosswalks) {
    c.veh_queue.assign(2, 0.0);
    c.ped_queue.assign(1, 0.0);
  }
  for (const auto& s : stops_) {
    LocationObs& lo = s.location == 0 ? obs.intersection : obs.crosswalks[s.location - 1];
    lo.veh_queue[s.direction] = static_cast<double>(s.queue.size());
    for (int vid : s.queue) lo.veh_max_wait = std::max(lo.veh_max_wait, vehs_[vid].wait_spell);
  }
  for (int vid : active_vehs_) {
    const Veh& v = vehs_[vid];
    if (v.where == VehWhere::kBox && v.waiting)  // held for the east crosswalk
      obs.intersection.veh_max_wait = std::max(obs.intersection.veh_max_wait, v.wait_spell);
  }
  for (int pid : active_peds_) {
    const Ped& p = peds_[pid];
    if (p.done || !p.waiting) continue;
    const Route& rt = routes_[p.route];
    if (p.next_crossing >= static_cast<int>(rt.crossing_at.size())) continue;
    const int ci = rt.crossing_at[p.next_crossing];
    const auto& e = graph_.edges()[rt.edges[ci]];
    if (rt.edge_start[ci] - p.travelled > 1e-9) continue;
    if (e.location == 0) {
      const int dir = e.id == crossings_[0].edge_ns ? 0 : 1;
      obs.intersection.ped_queue[dir] += 1.0;
      obs.intersection.ped_max_wait = std::max(obs.intersection.ped_max_wait, p.wait_spell);
    } else {
      auto& c = obs.crosswalks[e.location - 1];
      c.ped_queue[0] += 1.0;
      c.ped_max_wait = std::max(c.ped_max_wait, p.wait_spell);
    }
  }
  return obs;
}

StepObservation Simulator::step() {
  if (cfg_.mode == ControlMode::kLearned)
    throw Error(ErrorKind::kProtocol, "learned mode requires commands");
  return step(std::vector<PhaseCommand>{});
}

void Simulator::warmup_steps(int n) {
  for (int i = 0; i < n; ++i) {
    if (cfg_.mode == ControlMode::kLearned) {
      std::vector<PhaseCommand> cmds;
      cmds.push_back({0, static_cast<int>(rng_() % 4) + 1});
      for (std::size_t c = 0; c < mb_ctrl_.size(); ++c)
        cmds.push_back({static_cast<int>(c) + 1, static_cast<int>(rng_() % 2) + 1});
      step(cmds);
    } else {
      step();
    }
  }
  warmed_up_ = true;
  counted_from_ = clock_;
  action_steps_since_warmup_ = 0;
}

int Simulator::warmup() {
  std::uniform_int_distribution<int> dist(cfg_.warmup_min, cfg_.warmup_max);
  const int n = dist(rng_);
  warmup_steps(n);
  return n;
}

Eigen::MatrixXd Simulator::observe() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(cfg_.action_repeat, cfg_.feature_columns());
  const int offset = cfg_.action_repeat - static_cast<int>(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) m.row(offset + static_cast<int>(i)) = rows_[i];
  return m;
}

EpisodeMetrics Simulator::episode_metrics() const {
  EpisodeMetrics m;
  m.records = records_;
  m.conflicts = conflicts_total_;
  m.dropped_trips = dropped_;
  double arrival_sum = 0.0;
  for (const auto& r : records_) {
    if (r.mode == TravelMode::kPedestrian) {
      ++m.pedestrians;
      m.total_ped_wait_s += r.wait_total_s;
      m.max_ped_wait_s = std::max(m.max_ped_wait_s, r.wait_max_s);
      if (r.crossing) {
        ++m.crossing_pedestrians;
        arrival_sum += r.arrival_s;
      }
    } else {
      ++m.vehicles;
      m.total_veh_wait_s += r.wait_total_s;
      m.max_veh_wait_s = std::max(m.max_veh_wait_s, r.wait_max_s);
    }
  }
  if (m.pedestrians > 0) m.mean_ped_wait_s = m.total_ped_wait_s / m.pedestrians;
  if (m.vehicles > 0) m.mean_veh_wait_s = m.total_veh_wait_s / m.vehicles;
  if (m.crossing_pedestrians > 0) m.mean_ped_arrival_s = arrival_sum / m.crossing_pedestrians;
  return m;
}

TripAccounting Simulator::accounting() const {
  TripAccounting a;
  a.pending = static_cast<long long>(demand_.trips.size() - next_trip_);
  a.active = static_cast<long long>(active_peds_.size() + active_vehs_.size());
  a.arrived = arrived_;
  a.dropped = dropped_;
  return a;
}

void Simulator::inject_queued_vehicle(int location, int direction) {
  crossing_of_location(location);
  int sid = -1;
  for (std::size_t i = 0; i < stops_.size(); ++i)
    if (stops_[i].location == location && stops_[i].direction == direction) sid = static_cast<int>(i);
  if (sid < 0) throw Error(ErrorKind::kProtocol, "no such stop line");
  Veh v;
  v.trip = -1;
  const StopLine& s = stops_[sid];
  if (location == 0) {
    v.from = static_cast<Approach>(direction);
    v.to = v.from == Approach::kWest ? Approach::kEast : Approach::kWest;
    if (v.from == Approach::kEast) {
      v.where = VehWhere::kWestbound;
      v.pos = s.x;
      v.next_stop = static_cast<int>(westbound_stops_.size()) - 1;
    } else {
      v.where = VehWhere::kApproach;
      v.pos = 0.0;
    }
    v.movement = movement_of(v.from, v.to);
  } else {
    const bool eb = direction == 0;
    v.from = eb ? Approach::kWest : Approach::kEast;
    v.to = eb ? Approach::kEast : Approach::kWest;
    v.where = eb ? VehWhere::kEastbound : VehWhere::kWestbound;
    v.pos = s.x;
    const auto& order = eb ? eastbound_stops_ : westbound_stops_;
    v.next_stop = static_cast<int>(std::find(order.begin(), order.end(), sid) - order.begin());
  }
  v.queued = true;
  v.queued_at = sid;
  if (warmed_up_) {
    AgentRecord rec;
    rec.mode = TravelMode::kVehicle;
    rec.spawn_s = time_s();
    v.record = static_cast<int>(records_.size());
    records_.push_back(rec);
  }
  vehs_.push_back(v);
  const int vid = static_cast<int>(vehs_.size()) - 1;
  active_vehs_.push_back(vid);
  stops_[sid].queue.push_back(vid);
}

std::vector<double> Simulator::current_wait_spells(TravelMode mode) const {
  std::vector<double> out;
  if (mode == TravelMode::kVehicle) {
    for (int vid : active_vehs_) out.push_back(vehs_[vid].wait_spell);
  } else {
    for (int pid : active_peds_) out.push_back(peds_[pid].wait_spell);
  }
  return out;
}

int Simulator::queue_length(int location, int direction) const {
  for (const auto& s : stops_)
    if (s.location == location && s.direction == direction) return static_cast<int>(s.queue.size());
  throw Error(ErrorKind::kProtocol, "no such stop line");
}

}  // namespace decor
