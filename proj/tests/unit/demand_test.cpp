#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>

#include "common/error.hpp"
#include "demand/demand.hpp"

namespace decor {
namespace {

DemandTable even_table(int n, double T, double t0 = 0.0) {
  DemandTable d;
  d.horizon_s = t0 + T;
  for (int i = 0; i < n; ++i)
    d.trips.push_back({t0 + (i + 0.5) * T / n, "Z1", "Z2", TravelMode::kPedestrian});
  return d;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kNumerical;
}

TEST_CASE("csv parsing") {
  auto sc = builtin_scenario();
  auto d = parse_od_csv("depart_s,origin,dest,mode\n5,Z1,Z2,ped\n1.5,W,E,veh\n3,Z3,Z4,ped\n", sc, "t");
  REQUIRE(d.trips.size() == 3);
  CHECK(d.trips[0].depart_s == 1.5);
  CHECK(d.trips[0].mode == TravelMode::kVehicle);
  CHECK(d.trips[2].origin == "Z1");
  CHECK(d.horizon_s == 6.0);

  auto empty = parse_od_csv("", sc, "t");
  CHECK(empty.trips.empty());
  CHECK(empty.horizon_s == 0.0);

  CHECK(kind_of([&] { parse_od_csv("depart_s,origin,dest,mode\n-1,Z1,Z2,ped\n", sc, "t"); }) ==
        ErrorKind::kValidation);
  CHECK(kind_of([&] { parse_od_csv("depart_s,origin,dest,mode\n1,Z1,Z99,ped\n", sc, "t"); }) ==
        ErrorKind::kValidation);
  CHECK(kind_of([&] { parse_od_csv("depart_s,origin,dest,mode\n1,Z1,Z2,bus\n", sc, "t"); }) ==
        ErrorKind::kParse);
  try {
    parse_od_csv("depart_s,origin,dest,mode\n1,Z1,Z2,ped\nx,Z1\n", sc, "t");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kParse);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("csv round trip") {
  auto sc = builtin_scenario();
  auto d = synth_corridor_demand(3, sc);
  auto path = std::filesystem::temp_directory_path() / "decor_demand_rt.csv";
  write_od_csv(d, path.string());
  auto back = load_od_csv(path.string(), sc);
  std::filesystem::remove(path);
  REQUIRE(back.trips.size() == d.trips.size());
  CHECK(back.trips == d.trips);
}

TEST_CASE("split at 2400 s") {
  auto sc = builtin_scenario();
  auto d = synth_corridor_demand(0, sc);
  auto [train, eval] = split_at(d, 2400.0);
  std::size_t expect = 0;
  for (const auto& t : d.trips) expect += t.depart_s < 2400.0;
  CHECK(train.trips.size() == expect);
  CHECK(train.trips.size() + eval.trips.size() == d.trips.size());
  for (const auto& t : train.trips) CHECK(t.depart_s < 2400.0);
  for (const auto& t : eval.trips) CHECK(t.depart_s >= 2400.0);
}

TEST_CASE("scale identity and doubling") {
  auto d = even_table(10, 1200.0, 100.0);
  auto s = scale_demand(d, 1.0, 100.0, 1200.0, 1);
  REQUIRE(s.trips.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(s.trips[i].depart_s == d.trips[i].depart_s - 100.0);

  DemandTable one;
  one.trips.push_back({700.0, "Z1", "Z2", TravelMode::kPedestrian});
  auto two = scale_demand(one, 2.0, 100.0, 1200.0, 1);
  REQUIRE(two.trips.size() == 2);
  CHECK(two.trips[0].depart_s == 300.0);
  CHECK(two.trips[1].depart_s == 900.0);
  CHECK(kind_of([&] { scale_demand(d, 0.0, 0, 10, 1); }) == ErrorKind::kInvalidScale);
  CHECK(kind_of([&] { scale_demand(d, -1.0, 0, 10, 1); }) == ErrorKind::kInvalidScale);
}

TEST_CASE("scale conservation, range and binned rate") {
  const double T = 1200.0;
  auto d = even_table(1000, T);
  for (double alpha : {0.5, 1.0, 1.5, 2.0, 2.75}) {
    CAPTURE(alpha);
    auto s = scale_demand(d, alpha, 0.0, T, 11);
    CHECK(static_cast<long long>(s.trips.size()) == std::llround(alpha * 1000));
    std::vector<int> bins(20, 0);
    for (const auto& t : s.trips) {
      CHECK(t.depart_s >= 0.0);
      CHECK(t.depart_s < T);
      bins[static_cast<int>(t.depart_s / 60.0)]++;
    }
    const double base = 1000.0 / 20.0;
    for (int b : bins) CHECK(std::abs(b / base - alpha) <= 0.1 * alpha);
  }
  auto a = scale_demand(d, 1.5, 0.0, T, 5);
  auto b = scale_demand(d, 1.5, 0.0, T, 5);
  CHECK(a.trips == b.trips);
}

TEST_CASE("synthetic demand") {
  auto sc = builtin_scenario();
  auto g = build_base_graph(sc.corridor);
  auto d = synth_corridor_demand(0, sc);
  long long ped = 0, veh = 0;
  for (const auto& t : d.trips) (t.mode == TravelMode::kPedestrian ? ped : veh)++;
  // 4 Poisson standard deviations
  CHECK(std::abs(ped - 2223) <= 4 * std::sqrt(2223.0));
  CHECK(std::abs(veh - 202) <= 4 * std::sqrt(202.0));
  const double cf = crossing_fraction(d, g);
  CHECK(cf >= 0.676);
  CHECK(cf <= 0.716);
  for (std::size_t i = 1; i < d.trips.size(); ++i)
    CHECK(d.trips[i - 1].depart_s <= d.trips[i].depart_s);

  auto again = synth_corridor_demand(0, sc);
  CHECK(again.trips == d.trips);

  SynthOptions zero;
  zero.pedestrian_rate_per_hour = 0.0;
  zero.vehicle_rate_per_hour = 0.0;
  CHECK(synth_corridor_demand(0, sc, zero).trips.empty());
}

TEST_CASE("frozen affinity reproduces the crossing share") {
  auto sc = builtin_scenario();
  CHECK(expected_crossing_fraction(sc) == doctest::Approx(0.696).epsilon(1e-9));
  CHECK(fit_same_side_affinity(sc, 0.696) ==
        doctest::Approx(sc.pedestrians.same_side_affinity).epsilon(1e-9));
}

TEST_CASE("crossing fraction extremes") {
  auto sc = builtin_scenario();
  auto g = build_base_graph(sc.corridor);
  DemandTable same, opposite;
  same.trips.push_back({0, "Z1", "Z3", TravelMode::kPedestrian});
  opposite.trips.push_back({0, "Z1", "Z2", TravelMode::kPedestrian});
  CHECK(crossing_fraction(same, g) == 0.0);
  CHECK(crossing_fraction(opposite, g) == 1.0);
}

}  // namespace
}  // namespace decor
