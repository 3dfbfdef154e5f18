#include "graph/corridor_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <queue>
#include <sstream>
#include <tuple>

#include "common/error.hpp"

namespace decor {

const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::kIntersection: return "intersection";
    case NodeKind::kCrosswalkEnd: return "crosswalk_end";
    case NodeKind::kJunction: return "junction";
    case NodeKind::kZoneAnchor: return "zone_anchor";
  }
  return "?";
}

const char* to_string(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::kSidewalk: return "sidewalk";
    case EdgeKind::kCrossing: return "crossing";
    case EdgeKind::kRoadway: return "roadway";
  }
  return "?";
}

namespace {

std::string fmt_x(double x) {
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

void validate_spec(const CorridorSpec& spec) {
  if (!(spec.length_m > 0.0) || !std::isfinite(spec.length_m))
    throw Error(ErrorKind::kInvalidSpec, "corridor length must be > 0");
  if (!(spec.road_half_width_m > 0.0) || !(spec.stub_length_m > 0.0))
    throw Error(ErrorKind::kInvalidSpec, "road half width and stub length must be > 0");
  if (!(spec.sidewalk_width_m > 0.0) || !(spec.roadway_width_m > 0.0) ||
      !(spec.intersection_crosswalk_width_m > 0.0))
    throw Error(ErrorKind::kInvalidSpec, "edge widths must be > 0");
  if (!(spec.width_min_m > 0.0) || spec.width_min_m > spec.width_max_m ||
      spec.loc_min_m > spec.loc_max_m)
    throw Error(ErrorKind::kInvalidSpec, "crosswalk ranges are empty");
  if (!(spec.norm_length_m > 0.0) || !(spec.norm_half_height_m > 0.0))
    throw Error(ErrorKind::kInvalidSpec, "normalisation extents must be > 0");
  for (const auto& z : spec.zones) {
    if (z.x < 0.0 || z.x > spec.length_m)
      throw Error(ErrorKind::kInvalidSpec, "zone " + z.name + " lies outside the corridor");
  }
  for (std::size_t i = 0; i < spec.zones.size(); ++i)
    for (std::size_t j = i + 1; j < spec.zones.size(); ++j)
      if (spec.zones[i].name == spec.zones[j].name)
        throw Error(ErrorKind::kInvalidSpec, "duplicate zone " + spec.zones[i].name);
}

}  // namespace

void validate_proposal(const CorridorSpec& spec, const CrosswalkProposal& p) {
  if (!std::isfinite(p.location) || p.location < spec.loc_min_m || p.location > spec.loc_max_m)
    throw Error(ErrorKind::kConstraintViolation,
                "crosswalk location " + fmt_x(p.location) + " m outside [" +
                    fmt_x(spec.loc_min_m) + ", " + fmt_x(spec.loc_max_m) + "]");
  if (!std::isfinite(p.width) || p.width < spec.width_min_m || p.width > spec.width_max_m)
    throw Error(ErrorKind::kConstraintViolation,
                "crosswalk width " + fmt_x(p.width) + " m outside [" + fmt_x(spec.width_min_m) +
                    ", " + fmt_x(spec.width_max_m) + "]");
  if (p.location >= spec.length_m)
    throw Error(ErrorKind::kConstraintViolation, "crosswalk beyond corridor end");
}

std::vector<CrosswalkProposal> LayoutGraph::proposals() const {
  std::vector<CrosswalkProposal> out;
  out.reserve(crosswalks_.size());
  for (const auto& c : crosswalks_) out.push_back({c.location, c.width});
  return out;
}

std::optional<int> LayoutGraph::find_zone_anchor(const std::string& zone) const {
  for (std::size_t i = 0; i < spec_.zones.size(); ++i)
    if (spec_.zones[i].name == zone) return zone_anchor_[i];
  return std::nullopt;
}

int LayoutGraph::zone_anchor(const std::string& zone) const {
  auto a = find_zone_anchor(zone);
  if (!a) throw Error(ErrorKind::kValidation, "unknown zone: " + zone);
  return *a;
}

std::optional<Side> LayoutGraph::zone_side(const std::string& zone) const {
  for (const auto& z : spec_.zones)
    if (z.name == zone) return z.side;
  return std::nullopt;
}

LayoutGraph build_graph(const CorridorSpec& spec, std::span<const CrosswalkProposal> proposals) {
  validate_spec(spec);
  std::vector<CrosswalkProposal> sorted(proposals.begin(), proposals.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.location < b.location || (a.location == b.location && a.width < b.width);
  });

  LayoutGraph g;
  g.spec_ = spec;
  const double h = spec.road_half_width_m;
  const double L = spec.length_m;

  auto add_node = [&](double x, double y, NodeKind kind, std::string label) {
    int id = static_cast<int>(g.nodes_.size());
    g.nodes_.push_back({id, x, y, kind, std::move(label)});
    return id;
  };
  auto add_edge_pair = [&](int a, int b, double width, EdgeKind kind, int location) {
    const auto& na = g.nodes_[a];
    const auto& nb = g.nodes_[b];
    double len = std::hypot(na.x - nb.x, na.y - nb.y);
    if (!(len > 0.0))
      throw Error(ErrorKind::kInvalidSpec, "zero-length edge between " + na.label + " and " + nb.label);
    int id = static_cast<int>(g.edges_.size());
    g.edges_.push_back({id, a, b, len, width, kind, location});
    g.edges_.push_back({id + 1, b, a, len, width, kind, location});
    return id;
  };

  add_node(0.0, 0.0, NodeKind::kIntersection, "INT");
  add_node(0.0, h, NodeKind::kIntersection, "INT_N");
  add_node(0.0, -h, NodeKind::kIntersection, "INT_S");

  auto is_crosswalk_x = [&](double x) {
    return std::any_of(sorted.begin(), sorted.end(),
                       [&](const auto& p) { return p.location == x; });
  };

  // Sidewalk nodes per side, keyed by x.
  std::map<double, int> side_nodes[2];
  side_nodes[0][0.0] = 1;
  side_nodes[1][0.0] = 2;
  for (int s = 0; s < 2; ++s) {
    const Side side = s == 0 ? Side::kNorth : Side::kSouth;
    std::vector<double> xs{L};
    for (const auto& z : spec.zones)
      if (z.side == side) xs.push_back(z.x);
    for (const auto& p : sorted) xs.push_back(p.location);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    const char* tag = s == 0 ? "N@" : "S@";
    for (double x : xs) {
      if (x == 0.0) continue;
      NodeKind kind = is_crosswalk_x(x) ? NodeKind::kCrosswalkEnd : NodeKind::kJunction;
      side_nodes[s][x] = add_node(x, s == 0 ? h : -h, kind, tag + fmt_x(x));
    }
  }
  std::map<double, int> road_nodes;
  road_nodes[0.0] = 0;
  {
    std::vector<double> xs{L};
    for (const auto& p : sorted) xs.push_back(p.location);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    for (double x : xs) road_nodes[x] = add_node(x, 0.0, NodeKind::kJunction, "R@" + fmt_x(x));
  }
  for (const auto& z : spec.zones) {
    double y = (z.side == Side::kNorth ? 1.0 : -1.0) * (h + spec.stub_length_m);
    g.zone_anchor_.push_back(add_node(z.x, y, NodeKind::kZoneAnchor, z.name));
  }

  for (int s = 0; s < 2; ++s) {
    int prev = -1;
    for (const auto& [x, id] : side_nodes[s]) {
      if (prev >= 0) add_edge_pair(prev, id, spec.sidewalk_width_m, EdgeKind::kSidewalk, -1);
      prev = id;
    }
  }
  {
    int prev = -1;
    for (const auto& [x, id] : road_nodes) {
      if (prev >= 0) add_edge_pair(prev, id, spec.roadway_width_m, EdgeKind::kRoadway, -1);
      prev = id;
    }
  }
  g.int_edge_ns_ = add_edge_pair(1, 2, spec.intersection_crosswalk_width_m, EdgeKind::kCrossing, 0);
  g.int_edge_sn_ = g.int_edge_ns_ + 1;
  for (std::size_t c = 0; c < sorted.size(); ++c) {
    const auto& p = sorted[c];
    CrosswalkInfo info;
    info.location = p.location;
    info.width = p.width;
    info.north_node = side_nodes[0].at(p.location);
    info.south_node = side_nodes[1].at(p.location);
    info.road_node = road_nodes.at(p.location);
    info.edge_north_to_south = add_edge_pair(info.north_node, info.south_node, p.width,
                                             EdgeKind::kCrossing, static_cast<int>(c) + 1);
    info.edge_south_to_north = info.edge_north_to_south + 1;
    g.crosswalks_.push_back(info);
  }
  for (std::size_t i = 0; i < spec.zones.size(); ++i) {
    const auto& z = spec.zones[i];
    int s = z.side == Side::kNorth ? 0 : 1;
    add_edge_pair(g.zone_anchor_[i], side_nodes[s].at(z.x), spec.sidewalk_width_m,
                  EdgeKind::kSidewalk, -1);
  }

  g.out_edges_.assign(g.nodes_.size(), {});
  for (const auto& e : g.edges_) g.out_edges_[e.from].push_back(e.id);
  return g;
}

LayoutGraph build_base_graph(const CorridorSpec& spec) { return build_graph(spec, {}); }

LayoutGraph rebuild_layout(const LayoutGraph& base, std::span<const CrosswalkProposal> proposals) {
  if (!base.base_flag())
    throw Error(ErrorKind::kContract, "rebuild_layout expects a base graph without crosswalks");
  const auto& spec = base.spec();
  if (static_cast<int>(proposals.size()) > spec.max_crosswalks)
    throw Error(ErrorKind::kConstraintViolation,
                "too many crosswalks: " + std::to_string(proposals.size()) + " > " +
                    std::to_string(spec.max_crosswalks));
  for (const auto& p : proposals) validate_proposal(spec, p);
  std::vector<double> locs;
  for (const auto& p : proposals) locs.push_back(p.location);
  std::sort(locs.begin(), locs.end());
  for (std::size_t i = 1; i < locs.size(); ++i)
    if (locs[i] - locs[i - 1] < kMinCrosswalkSeparationM)
      throw Error(ErrorKind::kMustMergeFirst,
                  "crosswalks at " + fmt_x(locs[i - 1]) + " m and " + fmt_x(locs[i]) +
                      " m are closer than 1 m");
  return build_graph(spec, proposals);
}

FeatureMatrices feature_matrices(const LayoutGraph& g) {
  const auto& spec = g.spec();
  FeatureMatrices f;
  f.node_features.resize(static_cast<Eigen::Index>(g.nodes().size()), 2);
  for (const auto& n : g.nodes()) {
    f.node_features(n.id, 0) = n.x / spec.norm_length_m;
    f.node_features(n.id, 1) = (n.y + spec.norm_half_height_m) / (2.0 * spec.norm_half_height_m);
  }
  f.edge_features.resize(static_cast<Eigen::Index>(g.edges().size()), 2);
  f.edge_index.reserve(g.edges().size());
  for (const auto& e : g.edges()) {
    f.edge_features(e.id, 0) = e.length / spec.norm_length_m;
    f.edge_features(e.id, 1) = e.width / spec.width_max_m;
    f.edge_index.emplace_back(e.from, e.to);
  }
  return f;
}

PathResult shortest_path(const LayoutGraph& g, int origin, int dest) {
  const int n = static_cast<int>(g.nodes().size());
  if (origin < 0 || origin >= n || dest < 0 || dest >= n)
    throw Error(ErrorKind::kContract, "node id out of range");
  PathResult result;
  if (origin == dest) return result;

  // Search over (node, crossed) states. Primary key is length; among paths
  // equal within kTieTol the one that reaches its first crossing sooner wins,
  // then the lower predecessor state id.
  constexpr double kTieTol = 1e-9;
  const double inf = std::numeric_limits<double>::infinity();
  const int m = 2 * n;
  std::vector<double> dist(m, inf);
  std::vector<double> pre(m, inf);
  std::vector<int> pred(m, -1);
  std::vector<int> pred_edge(m, -1);
  std::vector<char> done(m, 0);
  auto better = [&](double d, double p, int from, int s) {
    if (d < dist[s] - kTieTol) return true;
    if (d > dist[s] + kTieTol) return false;
    if (p < pre[s] - kTieTol) return true;
    if (p > pre[s] + kTieTol) return false;
    return from < pred[s];
  };
  using Item = std::tuple<double, double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[2 * origin] = 0.0;
  pre[2 * origin] = 0.0;
  heap.emplace(0.0, 0.0, 2 * origin);
  while (!heap.empty()) {
    auto [d, p, s] = heap.top();
    heap.pop();
    if (done[s] || d != dist[s] || p != pre[s]) continue;
    done[s] = 1;
    const int u = s / 2;
    const bool crossed = s % 2 == 1;
    for (int eid : g.out_edges(u)) {
      const auto& e = g.edges()[eid];
      if (e.kind == EdgeKind::kRoadway) continue;
      const bool now_crossed = crossed || e.kind == EdgeKind::kCrossing;
      const int t = 2 * e.to + (now_crossed ? 1 : 0);
      if (done[t]) continue;
      const double nd = d + e.length;
      const double np = crossed || e.kind == EdgeKind::kCrossing ? p : p + e.length;
      if (better(nd, np, s, t)) {
        dist[t] = std::min(nd, dist[t]);
        pre[t] = np;
        pred[t] = s;
        pred_edge[t] = eid;
        heap.emplace(dist[t], np, t);
      } else if (nd < dist[t]) {
        dist[t] = nd;  // keep the exact minimum even when the tie-break loses
        heap.emplace(dist[t], pre[t], t);
      }
    }
  }
  const int s0 = 2 * dest;
  const int s1 = 2 * dest + 1;
  if (!std::isfinite(dist[s0]) && !std::isfinite(dist[s1]))
    throw Error(ErrorKind::kNoPath, "no pedestrian path from " + g.nodes()[origin].label + " to " +
                                        g.nodes()[dest].label);
  int end = s0;
  if (!std::isfinite(dist[s0]) ||
      (std::isfinite(dist[s1]) && (dist[s1] < dist[s0] - kTieTol ||
                                   (dist[s1] <= dist[s0] + kTieTol && pre[s1] < pre[s0]))))
    end = s1;
  for (int s = end; s != 2 * origin; s = pred[s]) {
    result.nodes.push_back(s / 2);
    result.edges.push_back(pred_edge[s]);
  }
  result.nodes.push_back(origin);
  std::reverse(result.nodes.begin(), result.nodes.end());
  std::reverse(result.edges.begin(), result.edges.end());
  result.length = std::min(dist[s0], dist[s1]);
  return result;
}

void export_graph_csv(const LayoutGraph& g, const std::string& nodes_path,
                      const std::string& edges_path) {
  std::ofstream nodes(nodes_path);
  std::ofstream edges(edges_path);
  if (!nodes || !edges) throw Error(ErrorKind::kIo, "cannot write graph CSV");
  nodes << std::setprecision(17);
  edges << std::setprecision(17);
  nodes << "id,x,y,kind,label\n";
  for (const auto& n : g.nodes())
    nodes << n.id << ',' << n.x << ',' << n.y << ',' << to_string(n.kind) << ',' << n.label << '\n';
  edges << "id,from,to,length,width,kind,location\n";
  for (const auto& e : g.edges())
    edges << e.id << ',' << e.from << ',' << e.to << ',' << e.length << ',' << e.width << ','
          << to_string(e.kind) << ',' << e.location << '\n';
}

}  // namespace decor
