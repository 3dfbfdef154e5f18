#include "graph/scenario.hpp"

#include <cstdio>
#include <sstream>

#include "common/error.hpp"
#include "common/kv_config.hpp"
#include "graph/builtin_scenario.inc"

namespace decor {

namespace {

std::vector<double> parse_numbers(const std::string& text, const std::string& what) {
  std::istringstream is(text);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kConfig, "bad number '" + tok + "' in " + what);
    }
  }
  return out;
}

}  // namespace

const std::vector<CrosswalkProposal>& Scenario::layout(const std::string& name) const {
  for (const auto& [n, l] : layouts)
    if (n == name) return l;
  throw Error(ErrorKind::kConfig, "scenario has no layout named " + name);
}

std::vector<CrosswalkProposal> parse_layout_list(const std::string& text) {
  std::istringstream is(text);
  std::vector<CrosswalkProposal> out;
  std::string tok;
  while (is >> tok) {
    auto colon = tok.find(':');
    if (colon == std::string::npos)
      throw Error(ErrorKind::kConfig, "layout entry '" + tok + "' is not location:width");
    auto loc = parse_numbers(tok.substr(0, colon), "layout");
    auto width = parse_numbers(tok.substr(colon + 1), "layout");
    if (loc.size() != 1 || width.size() != 1)
      throw Error(ErrorKind::kConfig, "layout entry '" + tok + "' is not location:width");
    out.push_back({loc[0], width[0]});
  }
  return out;
}

std::string format_layout_list(const std::vector<CrosswalkProposal>& layout) {
  std::string out;
  char buf[80];
  for (const auto& p : layout) {
    std::snprintf(buf, sizeof buf, "%.17g:%.17g", p.location, p.width);
    if (!out.empty()) out += ' ';
    out += buf;
  }
  return out;
}

Scenario parse_scenario(const std::string& text) {
  auto kv = KeyValueFile::parse(text);
  Scenario sc;
  sc.source_text = text;
  auto& c = sc.corridor;
  c.name = kv.get_string("corridor", "name", c.name);
  c.length_m = kv.get_double("corridor", "length_m", c.length_m);
  c.road_half_width_m = kv.get_double("corridor", "road_half_width_m", c.road_half_width_m);
  c.stub_length_m = kv.get_double("corridor", "stub_length_m", c.stub_length_m);
  c.sidewalk_width_m = kv.get_double("corridor", "sidewalk_width_m", c.sidewalk_width_m);
  c.roadway_width_m = kv.get_double("corridor", "roadway_width_m", c.roadway_width_m);
  c.intersection_crosswalk_width_m = kv.get_double("corridor", "intersection_crosswalk_width_m",
                                                   c.intersection_crosswalk_width_m);
  c.loc_min_m = kv.get_double("corridor", "loc_min_m", c.loc_min_m);
  c.loc_max_m = kv.get_double("corridor", "loc_max_m", c.loc_max_m);
  c.width_min_m = kv.get_double("corridor", "width_min_m", c.width_min_m);
  c.width_max_m = kv.get_double("corridor", "width_max_m", c.width_max_m);
  c.max_crosswalks = static_cast<int>(kv.get_int("corridor", "max_crosswalks", c.max_crosswalks));
  c.norm_length_m = kv.get_double("corridor", "norm_length_m", c.length_m);
  c.norm_half_height_m = kv.get_double("corridor", "norm_half_height_m", c.norm_half_height_m);

  for (const auto& [name, value] : kv.entries("zones")) {
    std::istringstream is(value);
    std::string x, side, prod, attr;
    is >> x >> side >> prod >> attr;
    if (side != "north" && side != "south")
      throw Error(ErrorKind::kConfig, "zone " + name + ": side must be north or south");
    Zone z;
    z.name = name;
    auto nums = parse_numbers(x + " " + prod + " " + attr, "zone " + name);
    if (nums.size() != 3) throw Error(ErrorKind::kConfig, "zone " + name + ": expected x side P A");
    z.x = nums[0];
    z.side = side == "north" ? Side::kNorth : Side::kSouth;
    z.production = nums[1];
    z.attraction = nums[2];
    if (z.production < 0.0 || z.attraction < 0.0)
      throw Error(ErrorKind::kConfig, "zone " + name + ": negative weight");
    c.zones.push_back(z);
  }

  auto& p = sc.pedestrians;
  p.rate_per_hour = kv.get_double("pedestrian_demand", "rate_per_hour", p.rate_per_hour);
  p.crossing_fraction = kv.get_double("pedestrian_demand", "crossing_fraction", p.crossing_fraction);
  p.distance_decay_m = kv.get_double("pedestrian_demand", "distance_decay_m", p.distance_decay_m);
  p.same_side_affinity =
      kv.get_double("pedestrian_demand", "same_side_affinity", p.same_side_affinity);
  if (auto prof = kv.raw("pedestrian_demand", "profile"))
    p.profile = parse_numbers(*prof, "profile");
  if (p.profile.empty()) throw Error(ErrorKind::kConfig, "profile must not be empty");
  for (double v : p.profile)
    if (v < 0.0) throw Error(ErrorKind::kConfig, "profile entries must be >= 0");
  if (p.rate_per_hour < 0.0 || !(p.distance_decay_m > 0.0) || p.same_side_affinity < 0.0)
    throw Error(ErrorKind::kConfig, "bad pedestrian demand parameters");

  auto& v = sc.vehicles;
  v.rate_per_hour = kv.get_double("vehicle_demand", "rate_per_hour", v.rate_per_hour);
  for (const auto& [name, value] : kv.entries("vehicle_demand")) {
    if (name == "rate_per_hour") continue;
    if (name != "W" && name != "N" && name != "S" && name != "E")
      throw Error(ErrorKind::kConfig, "unknown vehicle gate " + name);
    auto nums = parse_numbers(value, "gate " + name);
    if (nums.size() != 2 || nums[0] < 0.0 || nums[1] < 0.0)
      throw Error(ErrorKind::kConfig, "gate " + name + ": expected production attraction");
    v.gates.push_back({name, nums[0], nums[1]});
  }
  if (v.rate_per_hour < 0.0) throw Error(ErrorKind::kConfig, "negative vehicle rate");

  for (const auto& [name, value] : kv.entries("layouts"))
    sc.layouts.emplace_back(name, parse_layout_list(value));
  return sc;
}

Scenario load_scenario(const std::string& path) {
  auto kv = KeyValueFile::load(path);
  return parse_scenario(kv.text());
}

Scenario builtin_scenario() { return parse_scenario(kBuiltinScenarioText); }

}  // namespace decor
