#pragma once

#include <string>
#include <utility>
#include <vector>

#include "graph/corridor_graph.hpp"

namespace decor {

struct PedestrianDemandModel {
  double rate_per_hour = 2223.0;
  double crossing_fraction = 0.696;
  double distance_decay_m = 600.0;
  double same_side_affinity = 1.0;
  std::vector<double> profile{1.0};  // equal-width blocks over one hour
};

struct VehicleGate {
  std::string name;  // W, N, S or E
  double production = 1.0;
  double attraction = 1.0;
};

struct VehicleDemandModel {
  double rate_per_hour = 202.0;
  std::vector<VehicleGate> gates;
};

struct Scenario {
  CorridorSpec corridor;
  PedestrianDemandModel pedestrians;
  VehicleDemandModel vehicles;
  std::vector<std::pair<std::string, std::vector<CrosswalkProposal>>> layouts;
  std::string source_text;

  // Throws kConfig when the named layout is absent.
  const std::vector<CrosswalkProposal>& layout(const std::string& name) const;
};

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);  // kIo on missing file
// The corridor shipped in scenarios/corridor750.scn, compiled in.
Scenario builtin_scenario();

std::vector<CrosswalkProposal> parse_layout_list(const std::string& text);
std::string format_layout_list(const std::vector<CrosswalkProposal>& layout);

}  // namespace decor
