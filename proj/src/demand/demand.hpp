#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "graph/corridor_graph.hpp"
#include "graph/scenario.hpp"

namespace decor {

enum class TravelMode { kPedestrian, kVehicle };

struct Trip {
  double depart_s = 0.0;
  std::string origin;
  std::string dest;
  TravelMode mode = TravelMode::kPedestrian;

  bool operator==(const Trip&) const = default;
};

struct DemandTable {
  std::vector<Trip> trips;  // sorted by depart_s
  double horizon_s = 0.0;
  std::string source_tag;
};

bool is_vehicle_gate(const std::string& name);

// Columns depart_s,origin,dest,mode with mode ped|veh. Pedestrian zones must
// exist in the scenario; vehicle endpoints must be gates W/N/S/E.
DemandTable parse_od_csv(const std::string& text, const Scenario& sc, const std::string& tag);
DemandTable load_od_csv(const std::string& path, const Scenario& sc);
void write_od_csv(const DemandTable& d, const std::string& path);
std::string format_od_csv(const DemandTable& d);

// Trips with depart < t go to .first, the rest to .second (times unchanged).
std::pair<DemandTable, DemandTable> split_at(const DemandTable& d, double t);

// Time-compression plus replication. Trips outside [t_start, t_start + T)
// are ignored. Output departures lie in [0, T).
DemandTable scale_demand(const DemandTable& d, double alpha, double t_start, double T,
                         std::uint64_t seed);

struct SynthOptions {
  double pedestrian_rate_per_hour = -1.0;  // < 0: take the scenario value
  double vehicle_rate_per_hour = -1.0;
  double horizon_s = 3600.0;
};

DemandTable synth_corridor_demand(std::uint64_t seed, const Scenario& sc,
                                  const SynthOptions& opt = {});

// Expected crossing share of the scenario's pedestrian OD weights.
double expected_crossing_fraction(const Scenario& sc);
// Same-side affinity that makes the expected crossing share hit `target`.
double fit_same_side_affinity(const Scenario& sc, double target);

double crossing_fraction(const DemandTable& d, const LayoutGraph& g);

}  // namespace decor
