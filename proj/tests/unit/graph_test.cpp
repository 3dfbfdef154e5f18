#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "common/error.hpp"
#include "graph/corridor_graph.hpp"
#include "graph/scenario.hpp"

namespace decor {
namespace {

CorridorSpec small_spec(double length) {
  CorridorSpec s;
  s.length_m = length;
  s.norm_length_m = length;
  s.zones = {{"A", length * 0.25, Side::kNorth, 1, 1}, {"B", length * 0.75, Side::kSouth, 1, 1}};
  return s;
}

// O(V^2) Dijkstra straight from the edge list, no heap.
std::vector<double> oracle_distances(const LayoutGraph& g, int origin) {
  const int n = static_cast<int>(g.nodes().size());
  std::vector<double> d(n, std::numeric_limits<double>::infinity());
  std::vector<bool> done(n, false);
  d[origin] = 0.0;
  for (int iter = 0; iter < n; ++iter) {
    int u = -1;
    for (int v = 0; v < n; ++v)
      if (!done[v] && (u < 0 || d[v] < d[u])) u = v;
    if (u < 0 || !std::isfinite(d[u])) break;
    done[u] = true;
    for (const auto& e : g.edges()) {
      if (e.from != u || e.kind == EdgeKind::kRoadway) continue;
      d[e.to] = std::min(d[e.to], d[u] + e.length);
    }
  }
  return d;
}

TEST_CASE("base graph of the shipped corridor") {
  auto sc = builtin_scenario();
  auto g = build_base_graph(sc.corridor);
  CHECK(g.base_flag());
  CHECK(g.crosswalk_count() == 0);
  int anchors = 0, intersections = 0, crossings = 0;
  for (const auto& n : g.nodes()) {
    anchors += n.kind == NodeKind::kZoneAnchor;
    intersections += n.kind == NodeKind::kIntersection;
  }
  for (const auto& e : g.edges()) {
    CHECK(e.length > 0.0);
    CHECK(e.width > 0.0);
    if (e.kind == EdgeKind::kCrossing && e.location > 0) ++crossings;
  }
  CHECK(anchors == 14);
  CHECK(intersections == 3);
  CHECK(crossings == 0);
}

TEST_CASE("minimal and degenerate corridors") {
  auto g = build_base_graph(small_spec(10.0));
  CHECK(g.base_flag());
  CHECK(g.zone_anchor("A") >= 0);
  CHECK_THROWS_AS(build_base_graph(small_spec(0.0)), Error);
  try {
    build_base_graph(small_spec(0.0));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidSpec);
  }
}

TEST_CASE("rebuild inserts a crossing and splits both sidewalks") {
  auto base = build_base_graph(builtin_scenario().corridor);
  std::vector<CrosswalkProposal> p{{375.0, 5.0}};
  auto g = rebuild_layout(base, p);
  CHECK(g.crosswalk_count() == 1);
  CHECK(g.nodes().size() == base.nodes().size() + 3);  // two ends + roadway split
  int ends = 0;
  for (const auto& n : g.nodes()) ends += n.kind == NodeKind::kCrosswalkEnd;
  CHECK(ends == 2);
  const auto& cw = g.crosswalks()[0];
  CHECK(g.edges()[cw.edge_north_to_south].width == 5.0);
  CHECK(g.nodes()[cw.north_node].x == 375.0);
  CHECK(base.base_flag());

  auto same = rebuild_layout(base, std::vector<CrosswalkProposal>{});
  CHECK(same.nodes().size() == base.nodes().size());
  CHECK(same.edges().size() == base.edges().size());
}

TEST_CASE("rebuild validates proposals") {
  auto base = build_base_graph(builtin_scenario().corridor);
  auto kind_of = [&](std::vector<CrosswalkProposal> p) {
    try {
      rebuild_layout(base, p);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kNumerical;  // sentinel: no throw
  };
  CHECK(kind_of({{1.0, 5.0}}) == ErrorKind::kConstraintViolation);
  CHECK(kind_of({{749.0, 5.0}}) == ErrorKind::kConstraintViolation);
  CHECK(kind_of({{100.0, 1.0}}) == ErrorKind::kConstraintViolation);
  CHECK(kind_of({{100.0, 16.0}}) == ErrorKind::kConstraintViolation);
  CHECK(kind_of({{100.0, 4.0}, {100.5, 4.0}}) == ErrorKind::kMustMergeFirst);
  CHECK(kind_of({{100.0, 4.0}, {101.0, 4.0}}) == ErrorKind::kNumerical);
  auto g = rebuild_layout(base, std::vector<CrosswalkProposal>{{375.0, 5.0}});
  CHECK(kind_of({}) == ErrorKind::kNumerical);
  CHECK_THROWS_AS(rebuild_layout(g, std::vector<CrosswalkProposal>{}), Error);
}

TEST_CASE("rebuild is deterministic and order independent") {
  auto base = build_base_graph(builtin_scenario().corridor);
  std::vector<CrosswalkProposal> a{{400, 3}, {120, 8}, {600, 2}};
  std::vector<CrosswalkProposal> b{{600, 2}, {400, 3}, {120, 8}};
  auto ga = rebuild_layout(base, a);
  auto gb = rebuild_layout(base, b);
  REQUIRE(ga.nodes().size() == gb.nodes().size());
  REQUIRE(ga.edges().size() == gb.edges().size());
  for (std::size_t i = 0; i < ga.nodes().size(); ++i) {
    CHECK(ga.nodes()[i].x == gb.nodes()[i].x);
    CHECK(ga.nodes()[i].y == gb.nodes()[i].y);
    CHECK(ga.nodes()[i].label == gb.nodes()[i].label);
  }
  for (std::size_t i = 0; i < ga.edges().size(); ++i) {
    CHECK(ga.edges()[i].from == gb.edges()[i].from);
    CHECK(ga.edges()[i].to == gb.edges()[i].to);
    CHECK(ga.edges()[i].width == gb.edges()[i].width);
  }
  CHECK(ga.crosswalks()[0].location == 120);
}

TEST_CASE("feature matrices") {
  auto base = build_base_graph(builtin_scenario().corridor);
  auto g = rebuild_layout(base, std::vector<CrosswalkProposal>{{375.0, 15.0}});
  auto f = feature_matrices(g);
  CHECK(f.node_features.rows() == static_cast<long>(g.nodes().size()));
  CHECK(f.node_features.cols() == 2);
  CHECK(f.edge_features.cols() == 2);
  const auto& cw = g.crosswalks()[0];
  CHECK(f.node_features(cw.road_node, 0) == doctest::Approx(0.5));
  CHECK(f.node_features(cw.road_node, 1) == doctest::Approx(0.5));
  CHECK(f.edge_features(cw.edge_north_to_south, 1) == 1.0);
  for (Eigen::Index i = 0; i < f.node_features.size(); ++i) {
    CHECK(f.node_features.data()[i] >= 0.0);
    CHECK(f.node_features.data()[i] <= 1.0);
  }
  auto fb = feature_matrices(base);
  CHECK(fb.node_features.rows() == static_cast<long>(base.nodes().size()));
}

TEST_CASE("shortest path basics") {
  auto sc = builtin_scenario();
  auto base = build_base_graph(sc.corridor);
  int z7 = base.zone_anchor("Z7");  // x = 300, north
  auto empty = shortest_path(base, z7, z7);
  CHECK(empty.nodes.empty());
  CHECK(empty.length == 0.0);

  auto g = rebuild_layout(base, std::vector<CrosswalkProposal>{{375.0, 5.0}});
  int z8 = g.zone_anchor("Z8");  // x = 330, south
  int z7g = g.zone_anchor("Z7");
  auto p = shortest_path(g, z7g, z8);
  const auto& cw = g.crosswalks()[0];
  bool via = false;
  for (int e : p.edges) via |= e == cw.edge_north_to_south;
  CHECK(via);
  CHECK(p.length == oracle_distances(g, z7g)[z8]);
  // 30 stub + 75 + 10 + 45 + 30 stub
  CHECK(p.length == doctest::Approx(190.0));
}

TEST_CASE("equal-length alternatives cross at the first crossing reached") {
  auto base = build_base_graph(builtin_scenario().corridor);
  // Z3 (135 N) to Z6 (250 S): both crossings lie between them.
  auto g = rebuild_layout(base, std::vector<CrosswalkProposal>{{150, 4}, {240, 4}});
  auto p = shortest_path(g, g.zone_anchor("Z3"), g.zone_anchor("Z6"));
  bool first = false;
  for (int e : p.edges) first |= e == g.crosswalks()[0].edge_north_to_south;
  CHECK(first);
  auto back = shortest_path(g, g.zone_anchor("Z6"), g.zone_anchor("Z3"));
  bool second = false;
  for (int e : back.edges) second |= e == g.crosswalks()[1].edge_south_to_north;
  CHECK(second);
}

TEST_CASE("shortest path matches the oracle and never lengthens with more crossings") {
  auto sc = builtin_scenario();
  auto base = build_base_graph(sc.corridor);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> loc(2, 748), wid(2, 15);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<CrosswalkProposal> p;
    int n = static_cast<int>(rng() % 7);
    while (static_cast<int>(p.size()) < n) {
      CrosswalkProposal c{loc(rng), wid(rng)};
      bool ok = true;
      for (const auto& q : p) ok &= std::abs(q.location - c.location) >= 1.0;
      if (ok) p.push_back(c);
    }
    auto g = rebuild_layout(base, p);
    auto extra = p;
    extra.push_back({std::round(loc(rng)) + 0.5, 4.0});
    bool extra_ok = true;
    for (const auto& q : p) extra_ok &= std::abs(q.location - extra.back().location) >= 1.0;
    for (const auto& zo : sc.corridor.zones) {
      int o = g.zone_anchor(zo.name);
      auto d = oracle_distances(g, o);
      for (const auto& zd : sc.corridor.zones) {
        int t = g.zone_anchor(zd.name);
        auto r = shortest_path(g, o, t);
        CHECK(r.length == d[t]);
        double sum = 0.0;
        for (int e : r.edges) sum += g.edges()[e].length;
        CHECK(sum == doctest::Approx(r.length).epsilon(1e-12));
      }
      if (extra_ok && static_cast<int>(extra.size()) <= sc.corridor.max_crosswalks) {
        auto g2 = rebuild_layout(base, extra);
        auto d2 = oracle_distances(g2, g2.zone_anchor(zo.name));
        for (const auto& zd : sc.corridor.zones) {
          CHECK(d2[g2.zone_anchor(zd.name)] <= d[g.zone_anchor(zd.name)] + 1e-9);
        }
      }
    }
  }
}

TEST_CASE("unreachable pair raises no-path") {
  CorridorSpec s = small_spec(100.0);
  auto g = build_base_graph(s);
  // roadway-only node: R@100 is reachable only by roadway edges
  int road_end = -1;
  for (const auto& n : g.nodes())
    if (n.label == "R@100") road_end = n.id;
  REQUIRE(road_end >= 0);
  try {
    shortest_path(g, g.zone_anchor("A"), road_end);
    FAIL("expected no-path");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNoPath);
  }
}

TEST_CASE("scenario file matches the compiled-in copy") {
  auto file = load_scenario(std::string(DECOR_SCENARIO_DIR) + "/corridor750.scn");
  auto built = builtin_scenario();
  CHECK(file.source_text == built.source_text);
  CHECK(file.corridor.zones.size() == 14);
  CHECK(file.layout("baseline7").size() == 7);
  CHECK(file.layout("reference4").size() == 4);
  CHECK(file.vehicles.gates.size() == 4);
  CHECK_THROWS_AS(load_scenario("/nonexistent/x.scn"), Error);
  CHECK_THROWS_AS(file.layout("nope"), Error);
}

}  // namespace
}  // namespace decor
