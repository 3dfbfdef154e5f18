#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace decor {

enum class Side { kNorth, kSouth };

struct Zone {
  std::string name;
  double x = 0.0;  // metres from the intersection
  Side side = Side::kNorth;
  double production = 1.0;
  double attraction = 1.0;
};

// Geometry of the synthetic corridor. The intersection sits at x = 0 (west
// end); the roadway runs east to x = length_m with a sidewalk on each side.
struct CorridorSpec {
  std::string name = "corridor";
  double length_m = 750.0;
  double road_half_width_m = 5.0;
  double stub_length_m = 12.0;
  double sidewalk_width_m = 3.0;
  double roadway_width_m = 10.0;
  double intersection_crosswalk_width_m = 4.0;
  double loc_min_m = 2.0;
  double loc_max_m = 748.0;
  double width_min_m = 2.0;
  double width_max_m = 15.0;
  int max_crosswalks = 7;
  // Normalisation extents for feature matrices.
  double norm_length_m = 750.0;
  double norm_half_height_m = 20.0;
  std::vector<Zone> zones;
};

struct CrosswalkProposal {
  double location = 0.0;  // metres along the corridor
  double width = 0.0;     // metres

  bool operator==(const CrosswalkProposal&) const = default;
};

enum class NodeKind { kIntersection, kCrosswalkEnd, kJunction, kZoneAnchor };
enum class EdgeKind { kSidewalk, kCrossing, kRoadway };

const char* to_string(NodeKind kind);
const char* to_string(EdgeKind kind);

struct GraphNode {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  NodeKind kind = NodeKind::kJunction;
  std::string label;
};

struct GraphEdge {
  int id = 0;
  int from = 0;
  int to = 0;
  double length = 0.0;
  double width = 0.0;
  EdgeKind kind = EdgeKind::kSidewalk;
  // Controlled location served by a crossing edge: 0 = intersection,
  // 1..C = mid-block crosswalks in location order, -1 otherwise.
  int location = -1;
};

struct CrosswalkInfo {
  double location = 0.0;
  double width = 0.0;
  int north_node = -1;
  int south_node = -1;
  int road_node = -1;
  int edge_north_to_south = -1;
  int edge_south_to_north = -1;
};

// Directed pedestrian/vehicle network. Immutable once built.
class LayoutGraph {
 public:
  const CorridorSpec& spec() const { return spec_; }
  const std::vector<GraphNode>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  const std::vector<int>& out_edges(int node) const { return out_edges_.at(node); }
  double corridor_length() const { return spec_.length_m; }
  bool base_flag() const { return crosswalks_.empty(); }

  // Mid-block crosswalks sorted by location.
  const std::vector<CrosswalkInfo>& crosswalks() const { return crosswalks_; }
  std::vector<CrosswalkProposal> proposals() const;
  int crosswalk_count() const { return static_cast<int>(crosswalks_.size()); }

  int intersection_center() const { return 0; }
  int intersection_north() const { return 1; }
  int intersection_south() const { return 2; }
  int intersection_edge_north_to_south() const { return int_edge_ns_; }
  int intersection_edge_south_to_north() const { return int_edge_sn_; }

  std::optional<int> find_zone_anchor(const std::string& zone) const;
  int zone_anchor(const std::string& zone) const;  // throws kValidation
  std::optional<Side> zone_side(const std::string& zone) const;

  friend LayoutGraph build_graph(const CorridorSpec& spec,
                                 std::span<const CrosswalkProposal> proposals);

 private:
  CorridorSpec spec_;
  std::vector<GraphNode> nodes_;
  std::vector<GraphEdge> edges_;
  std::vector<std::vector<int>> out_edges_;
  std::vector<CrosswalkInfo> crosswalks_;
  std::vector<int> zone_anchor_;  // parallel to spec_.zones
  int int_edge_ns_ = -1;
  int int_edge_sn_ = -1;
};

// Shared builder; node and edge ids depend only on (spec, sorted proposals).
LayoutGraph build_graph(const CorridorSpec& spec, std::span<const CrosswalkProposal> proposals);

LayoutGraph build_base_graph(const CorridorSpec& spec);

// G_base plus crosswalks. Throws kConstraintViolation for out-of-range
// proposals or too many of them, kMustMergeFirst for pairs closer than 1 m.
LayoutGraph rebuild_layout(const LayoutGraph& base, std::span<const CrosswalkProposal> proposals);

void validate_proposal(const CorridorSpec& spec, const CrosswalkProposal& p);

inline constexpr double kMinCrosswalkSeparationM = 1.0;

struct FeatureMatrices {
  Eigen::MatrixXd node_features;  // |V| x 2: normalised (x, y)
  Eigen::MatrixXd edge_features;  // |E| x 2: normalised (length, width)
  std::vector<std::pair<int, int>> edge_index;  // (from, to) per edge
};

FeatureMatrices feature_matrices(const LayoutGraph& g);

struct PathResult {
  std::vector<int> nodes;  // origin..dest inclusive; empty when origin == dest
  std::vector<int> edges;
  double length = 0.0;
};

// Minimal-length pedestrian path over sidewalk and crossing edges. Among
// paths tied within 1e-9 m the one crossing earliest wins, then the lower
// predecessor id. `length` is the exact minimum. Throws kNoPath.
PathResult shortest_path(const LayoutGraph& g, int origin, int dest);

void export_graph_csv(const LayoutGraph& g, const std::string& nodes_path,
                      const std::string& edges_path);

}  // namespace decor
