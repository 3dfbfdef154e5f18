#include "demand/demand.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace decor {

namespace {

void sort_trips(std::vector<Trip>& trips) {
  std::stable_sort(trips.begin(), trips.end(),
                   [](const Trip& a, const Trip& b) { return a.depart_s < b.depart_s; });
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct OdPair {
  int o;
  int d;
  double weight;
};

std::vector<OdPair> pedestrian_od(const Scenario& sc, double affinity) {
  const auto& zones = sc.corridor.zones;
  std::vector<OdPair> out;
  for (std::size_t i = 0; i < zones.size(); ++i)
    for (std::size_t j = 0; j < zones.size(); ++j) {
      if (i == j) continue;
      double w = zones[i].production * zones[j].attraction *
                 std::exp(-std::abs(zones[i].x - zones[j].x) / sc.pedestrians.distance_decay_m);
      if (zones[i].side == zones[j].side) w *= affinity;
      if (w > 0.0) out.push_back({static_cast<int>(i), static_cast<int>(j), w});
    }
  return out;
}

}  // namespace

bool is_vehicle_gate(const std::string& name) {
  return name == "W" || name == "N" || name == "S" || name == "E";
}

DemandTable parse_od_csv(const std::string& text, const Scenario& sc, const std::string& tag) {
  DemandTable d;
  d.source_tag = tag;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  auto is_zone = [&](const std::string& z) {
    return std::any_of(sc.corridor.zones.begin(), sc.corridor.zones.end(),
                       [&](const Zone& zone) { return zone.name == z; });
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (t.rfind("depart_s", 0) == 0) {
        if (t != "depart_s,origin,dest,mode")
          throw Error(ErrorKind::kParse, "line " + std::to_string(line_no) + ": bad header");
        continue;
      }
    }
    std::vector<std::string> cols;
    std::stringstream ss(t);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(trim(col));
    if (cols.size() != 4)
      throw Error(ErrorKind::kParse,
                  "line " + std::to_string(line_no) + ": expected 4 columns, got " +
                      std::to_string(cols.size()));
    Trip trip;
    try {
      std::size_t used = 0;
      trip.depart_s = std::stod(cols[0], &used);
      if (used != cols[0].size()) throw std::invalid_argument(cols[0]);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kParse,
                  "line " + std::to_string(line_no) + ": bad depart_s '" + cols[0] + "'");
    }
    if (!std::isfinite(trip.depart_s) || trip.depart_s < 0.0)
      throw Error(ErrorKind::kValidation,
                  "line " + std::to_string(line_no) + ": depart_s must be >= 0");
    trip.origin = cols[1];
    trip.dest = cols[2];
    if (cols[3] == "ped") {
      trip.mode = TravelMode::kPedestrian;
      for (const auto& z : {trip.origin, trip.dest})
        if (!is_zone(z))
          throw Error(ErrorKind::kValidation,
                      "line " + std::to_string(line_no) + ": unknown zone " + z);
    } else if (cols[3] == "veh") {
      trip.mode = TravelMode::kVehicle;
      for (const auto& z : {trip.origin, trip.dest})
        if (!is_vehicle_gate(z))
          throw Error(ErrorKind::kValidation,
                      "line " + std::to_string(line_no) + ": unknown vehicle gate " + z);
    } else {
      throw Error(ErrorKind::kParse,
                  "line " + std::to_string(line_no) + ": mode must be ped or veh");
    }
    d.trips.push_back(std::move(trip));
  }
  sort_trips(d.trips);
  if (!d.trips.empty()) d.horizon_s = std::floor(d.trips.back().depart_s) + 1.0;
  return d;
}

DemandTable load_od_csv(const std::string& path, const Scenario& sc) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open demand file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_od_csv(ss.str(), sc, path);
}

std::string format_od_csv(const DemandTable& d) {
  std::string out = "depart_s,origin,dest,mode\n";
  char buf[64];
  for (const auto& t : d.trips) {
    std::snprintf(buf, sizeof buf, "%.17g", t.depart_s);
    out += buf;
    out += ',' + t.origin + ',' + t.dest + ',' +
           (t.mode == TravelMode::kPedestrian ? "ped" : "veh") + '\n';
  }
  return out;
}

void write_od_csv(const DemandTable& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write demand file: " + path);
  out << format_od_csv(d);
}

std::pair<DemandTable, DemandTable> split_at(const DemandTable& d, double t) {
  DemandTable a, b;
  a.source_tag = d.source_tag + "[train]";
  b.source_tag = d.source_tag + "[eval]";
  for (const auto& trip : d.trips) (trip.depart_s < t ? a : b).trips.push_back(trip);
  a.horizon_s = std::min(t, d.horizon_s);
  b.horizon_s = d.horizon_s;
  return {std::move(a), std::move(b)};
}

DemandTable scale_demand(const DemandTable& d, double alpha, double t_start, double T,
                         std::uint64_t seed) {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw Error(ErrorKind::kInvalidScale, "demand scale must be > 0");
  if (!(T > 0.0)) throw Error(ErrorKind::kInvalidScale, "scaling window must be > 0");
  std::vector<const Trip*> window;
  for (const auto& t : d.trips)
    if (t.depart_s >= t_start && t.depart_s < t_start + T) window.push_back(&t);

  DemandTable out;
  out.source_tag = d.source_tag;
  out.horizon_s = T;
  const auto n = static_cast<long long>(window.size());
  const auto full = static_cast<long long>(std::floor(alpha));
  const long long target = std::llround(alpha * static_cast<double>(n));
  const long long partial = std::max(0LL, target - full * n);
  const double last_before_T = std::nextafter(T, 0.0);
  auto emit = [&](const Trip& src, double t) {
    Trip c = src;
    c.depart_s = std::min(t, last_before_T);
    out.trips.push_back(std::move(c));
  };
  for (long long k = 0; k < full; ++k)
    for (const Trip* t : window)
      emit(*t, (t->depart_s - t_start) / alpha + static_cast<double>(k) * T / alpha);

  if (partial > 0 && n > 0) {
    // Systematic sampling without replacement over the time-ordered block,
    // squeezed into the gap left after the full copies.
    Rng rng(seed);
    const double stride = static_cast<double>(n) / static_cast<double>(partial);
    const double offset = uniform01(rng) * stride;
    const double frac = alpha - static_cast<double>(full);
    const double base = static_cast<double>(full) * T / alpha;
    for (long long j = 0; j < partial; ++j) {
      auto idx = static_cast<long long>(offset + static_cast<double>(j) * stride);
      idx = std::min(idx, n - 1);
      const Trip* t = window[static_cast<std::size_t>(idx)];
      emit(*t, base + (t->depart_s - t_start) / alpha * frac);
    }
  }
  sort_trips(out.trips);
  return out;
}

double expected_crossing_fraction(const Scenario& sc) {
  double c = 0.0, total = 0.0;
  for (const auto& p : pedestrian_od(sc, sc.pedestrians.same_side_affinity)) {
    total += p.weight;
    if (sc.corridor.zones[p.o].side != sc.corridor.zones[p.d].side) c += p.weight;
  }
  return total > 0.0 ? c / total : 0.0;
}

double fit_same_side_affinity(const Scenario& sc, double target) {
  double c = 0.0, s = 0.0;
  for (const auto& p : pedestrian_od(sc, 1.0))
    (sc.corridor.zones[p.o].side != sc.corridor.zones[p.d].side ? c : s) += p.weight;
  if (!(target > 0.0) || target >= 1.0 || s <= 0.0)
    throw Error(ErrorKind::kConfig, "crossing fraction target unreachable");
  return c * (1.0 - target) / (target * s);
}

DemandTable synth_corridor_demand(std::uint64_t seed, const Scenario& sc,
                                  const SynthOptions& opt) {
  DemandTable d;
  d.source_tag = "synth:" + std::to_string(seed);
  d.horizon_s = opt.horizon_s;
  const double hours = opt.horizon_s / 3600.0;
  const double ped_rate =
      opt.pedestrian_rate_per_hour >= 0.0 ? opt.pedestrian_rate_per_hour : sc.pedestrians.rate_per_hour;
  const double veh_rate =
      opt.vehicle_rate_per_hour >= 0.0 ? opt.vehicle_rate_per_hour : sc.vehicles.rate_per_hour;

  Rng rng(derive_seed(seed, {kSeedDemand}));
  const auto& zones = sc.corridor.zones;

  // Pedestrians: Poisson count, departures from the block profile.
  if (ped_rate > 0.0 && zones.size() >= 2) {
    const auto n = std::poisson_distribution<long long>(ped_rate * hours)(rng);
    const auto& prof = sc.pedestrians.profile;
    std::vector<double> cum(prof.size() + 1, 0.0);
    for (std::size_t i = 0; i < prof.size(); ++i) cum[i + 1] = cum[i] + prof[i];
    if (!(cum.back() > 0.0)) throw Error(ErrorKind::kConfig, "profile sums to zero");
    const double block = opt.horizon_s / static_cast<double>(prof.size());
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(n));
    for (long long i = 0; i < n; ++i) {
      const double u = uniform01(rng) * cum.back();
      auto it = std::upper_bound(cum.begin(), cum.end(), u);
      std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()) - 1,
                                            prof.size() - 1);
      const double within = prof[b] > 0.0 ? (u - cum[b]) / prof[b] : 0.0;
      times.push_back(std::min((static_cast<double>(b) + within) * block,
                               std::nextafter(opt.horizon_s, 0.0)));
    }
    std::sort(times.begin(), times.end());

    // OD pairs by systematic sampling over the cumulative weights, then
    // shuffled onto the departure times.
    auto od = pedestrian_od(sc, sc.pedestrians.same_side_affinity);
    std::vector<double> cw(od.size() + 1, 0.0);
    for (std::size_t i = 0; i < od.size(); ++i) cw[i + 1] = cw[i] + od[i].weight;
    std::vector<int> pick;
    pick.reserve(times.size());
    const double step = cw.back() / static_cast<double>(std::max<long long>(n, 1));
    const double start = uniform01(rng) * step;
    for (long long i = 0; i < n; ++i) {
      const double u = start + static_cast<double>(i) * step;
      auto it = std::upper_bound(cw.begin(), cw.end(), u);
      pick.push_back(std::min(static_cast<int>(it - cw.begin()) - 1, static_cast<int>(od.size()) - 1));
    }
    std::shuffle(pick.begin(), pick.end(), rng);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const auto& p = od[pick[i]];
      d.trips.push_back({times[i], zones[p.o].name, zones[p.d].name, TravelMode::kPedestrian});
    }
  }

  // Vehicles: Poisson count, one departure per equal slot (jittered headway).
  if (veh_rate > 0.0 && !sc.vehicles.gates.empty()) {
    const auto n = std::poisson_distribution<long long>(veh_rate * hours)(rng);
    std::vector<std::pair<int, int>> pairs;
    std::vector<double> w;
    const auto& gates = sc.vehicles.gates;
    for (std::size_t i = 0; i < gates.size(); ++i)
      for (std::size_t j = 0; j < gates.size(); ++j) {
        if (i == j) continue;
        double weight = gates[i].production * gates[j].attraction;
        if (weight <= 0.0) continue;
        pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
        w.push_back(weight);
      }
    if (!pairs.empty()) {
      std::discrete_distribution<int> pick(w.begin(), w.end());
      const double slot = opt.horizon_s / static_cast<double>(std::max<long long>(n, 1));
      for (long long i = 0; i < n; ++i) {
        const double t = std::min((static_cast<double>(i) + uniform01(rng)) * slot,
                                  std::nextafter(opt.horizon_s, 0.0));
        const auto& p = pairs[pick(rng)];
        d.trips.push_back({t, gates[p.first].name, gates[p.second].name, TravelMode::kVehicle});
      }
    }
  }
  sort_trips(d.trips);
  return d;
}

double crossing_fraction(const DemandTable& d, const LayoutGraph& g) {
  long long ped = 0, crossing = 0;
  for (const auto& t : d.trips) {
    if (t.mode != TravelMode::kPedestrian) continue;
    auto so = g.zone_side(t.origin);
    auto sd = g.zone_side(t.dest);
    if (!so || !sd) throw Error(ErrorKind::kValidation, "trip zone not in layout: " + t.origin);
    ++ped;
    if (*so != *sd) ++crossing;
  }
  return ped > 0 ? static_cast<double>(crossing) / static_cast<double>(ped) : 0.0;
}

}  // namespace decor
