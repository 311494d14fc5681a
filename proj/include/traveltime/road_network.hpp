#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "traveltime/csv.hpp"
#include "traveltime/error.hpp"

namespace traveltime {

using NodeId = int;
using ArcId = int;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class RoadClass { primary = 0, secondary = 1, tertiary = 2 };
inline constexpr int kNumRoadClasses = 3;

inline std::string_view to_string(RoadClass c) {
  switch (c) {
    case RoadClass::primary: return "primary";
    case RoadClass::secondary: return "secondary";
    case RoadClass::tertiary: return "tertiary";
  }
  return "tertiary";
}

inline std::optional<RoadClass> parse_road_class(std::string_view s) {
  if (s == "primary") return RoadClass::primary;
  if (s == "secondary") return RoadClass::secondary;
  if (s == "tertiary") return RoadClass::tertiary;
  return std::nullopt;
}

struct Node {
  NodeId id = 0;
  double x = 0.0;  // meters, projected
  double y = 0.0;
};

struct Arc {
  ArcId id = 0;
  NodeId from = 0;
  NodeId to = 0;
  double length = 0.0;  // meters
  RoadClass road_class = RoadClass::tertiary;
  ArcId reverse = -1;  // opposite direction of the same street, -1 when one-way
};

/// A walk through the network as a sequence of arc ids. Empty when origin == destination.
struct Path {
  std::vector<ArcId> arcs;

  std::size_t size() const { return arcs.size(); }
  bool empty() const { return arcs.empty(); }
  friend bool operator==(const Path&, const Path&) = default;
  friend auto operator<=>(const Path&, const Path&) = default;
};

/**
 * Directed road graph. Node and arc ids are dense: node i is nodes()[i] and
 * arc j is arcs()[j]. Immutable once constructed, so every query is safe to
 * call concurrently.
 */
class RoadNetwork {
 public:
  RoadNetwork() = default;

  RoadNetwork(std::vector<Node> nodes, std::vector<Arc> arcs) : nodes_(std::move(nodes)), arcs_(std::move(arcs)) {
    validate();
    out_.assign(nodes_.size(), {});
    in_.assign(nodes_.size(), {});
    for (const Arc& a : arcs_) {
      out_[a.from].push_back(a.id);
      in_[a.to].push_back(a.id);
    }
    canonical_.resize(arcs_.size());
    for (const Arc& a : arcs_) canonical_[a.id] = a.reverse >= 0 ? std::min(a.id, a.reverse) : a.id;
  }

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_arcs() const { return arcs_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Arc>& arcs() const { return arcs_; }
  const Node& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const Arc& arc(ArcId id) const { return arcs_.at(static_cast<std::size_t>(id)); }
  bool has_node(NodeId id) const { return id >= 0 && static_cast<std::size_t>(id) < nodes_.size(); }

  /// Outgoing arc ids of a node, in increasing id order.
  std::span<const ArcId> outgoing(NodeId n) const { return out_[static_cast<std::size_t>(n)]; }
  std::span<const ArcId> incoming(NodeId n) const { return in_[static_cast<std::size_t>(n)]; }

  /// Direction-merged id: the smaller of an arc's id and its reverse's id.
  ArcId canonical(ArcId a) const { return canonical_[static_cast<std::size_t>(a)]; }

  std::vector<double> lengths() const {
    std::vector<double> out(arcs_.size());
    for (const Arc& a : arcs_) out[a.id] = a.length;
    return out;
  }

 private:
  void validate() {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      if (n.id < 0 || static_cast<std::size_t>(n.id) >= nodes_.size())
        throw ValidationError("node " + std::to_string(n.id) + ": ids must be dense in [0, " +
                              std::to_string(nodes_.size()) + ")");
      if (!std::isfinite(n.x) || !std::isfinite(n.y))
        throw ValidationError("node " + std::to_string(n.id) + ": non-finite coordinates");
    }
    std::sort(nodes_.begin(), nodes_.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].id != static_cast<NodeId>(i)) throw ValidationError("duplicate node id " + std::to_string(nodes_[i].id));

    std::sort(arcs_.begin(), arcs_.end(), [](const Arc& a, const Arc& b) { return a.id < b.id; });
    for (std::size_t j = 0; j < arcs_.size(); ++j) {
      const Arc& a = arcs_[j];
      const std::string tag = "arc " + std::to_string(a.id) + ": ";
      if (a.id != static_cast<ArcId>(j)) {
        if (j > 0 && arcs_[j - 1].id == a.id) throw ValidationError(tag + "duplicate arc id");
        throw ValidationError(tag + "ids must be dense in [0, " + std::to_string(arcs_.size()) + ")");
      }
      if (!has_node(a.from)) throw ValidationError(tag + "from_node " + std::to_string(a.from) + " does not exist");
      if (!has_node(a.to)) throw ValidationError(tag + "to_node " + std::to_string(a.to) + " does not exist");
      if (a.from == a.to) throw ValidationError(tag + "self loop");
      if (!(a.length > 0.0) || !std::isfinite(a.length)) throw ValidationError(tag + "length must be positive");
    }
    for (const Arc& a : arcs_) {
      if (a.reverse < 0) continue;
      const std::string tag = "arc " + std::to_string(a.id) + ": ";
      if (static_cast<std::size_t>(a.reverse) >= arcs_.size())
        throw ValidationError(tag + "reverse arc " + std::to_string(a.reverse) + " does not exist");
      const Arc& r = arcs_[a.reverse];
      if (r.from != a.to || r.to != a.from || r.reverse != a.id)
        throw ValidationError(tag + "reverse arc " + std::to_string(a.reverse) + " is not its mirror");
    }
  }

  std::vector<Node> nodes_;
  std::vector<Arc> arcs_;
  std::vector<std::vector<ArcId>> out_;
  std::vector<std::vector<ArcId>> in_;
  std::vector<ArcId> canonical_;
};

// ---------------------------------------------------------------------------
// CSV persistence

inline const std::vector<std::string> kNodeColumns{"node_id", "x_m", "y_m"};
inline const std::vector<std::string> kArcColumns{"arc_id", "from_node", "to_node", "length_m", "road_class",
                                                  "reverse_arc_id"};

inline RoadNetwork load_network(std::istream& nodes_in, std::istream& arcs_in,
                                const std::string& nodes_name = "nodes.csv",
                                const std::string& arcs_name = "arcs.csv") {
  std::vector<Node> nodes;
  for (const auto& row : csv::read(nodes_in, kNodeColumns, nodes_name)) {
    nodes.push_back(Node{csv::parse_number<int>(row, 0, nodes_name), csv::parse_number<double>(row, 1, nodes_name),
                         csv::parse_number<double>(row, 2, nodes_name)});
  }
  std::vector<Arc> arcs;
  for (const auto& row : csv::read(arcs_in, kArcColumns, arcs_name)) {
    auto cls = parse_road_class(row.fields[4]);
    if (!cls) throw ParseError(arcs_name, row.line, "unknown road_class '" + row.fields[4] + "'");
    arcs.push_back(Arc{csv::parse_number<int>(row, 0, arcs_name), csv::parse_number<int>(row, 1, arcs_name),
                       csv::parse_number<int>(row, 2, arcs_name), csv::parse_number<double>(row, 3, arcs_name), *cls,
                       csv::parse_number<int>(row, 5, arcs_name)});
  }
  return RoadNetwork(std::move(nodes), std::move(arcs));
}

inline RoadNetwork load_network_files(const std::string& nodes_path, const std::string& arcs_path) {
  std::ifstream n(nodes_path), a(arcs_path);
  if (!n) throw ParseError(nodes_path, 0, "cannot open file");
  if (!a) throw ParseError(arcs_path, 0, "cannot open file");
  return load_network(n, a, nodes_path, arcs_path);
}

inline void write_network(const RoadNetwork& net, std::ostream& nodes_out, std::ostream& arcs_out) {
  nodes_out << "node_id,x_m,y_m\n";
  for (const Node& n : net.nodes()) csv::write_row(nodes_out, n.id, n.x, n.y);
  arcs_out << "arc_id,from_node,to_node,length_m,road_class,reverse_arc_id\n";
  for (const Arc& a : net.arcs())
    csv::write_row(arcs_out, a.id, a.from, a.to, a.length, std::string(to_string(a.road_class)), a.reverse);
}

// ---------------------------------------------------------------------------
// Path helpers

/// Node sequence of a path starting at `origin` (origin alone for an empty path).
inline std::vector<NodeId> path_nodes(const RoadNetwork& net, const Path& path, NodeId origin) {
  std::vector<NodeId> out{origin};
  out.reserve(path.size() + 1);
  for (ArcId a : path.arcs) out.push_back(net.arc(a).to);
  return out;
}

inline std::vector<NodeId> path_nodes(const RoadNetwork& net, const Path& path) {
  assert(!path.empty());
  return path_nodes(net, path, net.arc(path.arcs.front()).from);
}

inline double path_length(const RoadNetwork& net, const Path& path) {
  double total = 0.0;
  for (ArcId a : path.arcs) total += net.arc(a).length;
  return total;
}

inline double path_cost(const Path& path, std::span<const double> weights) {
  double total = 0.0;
  for (ArcId a : path.arcs) total += weights[static_cast<std::size_t>(a)];
  return total;
}

/// True when the path runs origin -> destination, is contiguous, and repeats no node.
inline bool is_valid_path(const RoadNetwork& net, const Path& path, NodeId origin, NodeId destination) {
  if (path.empty()) return origin == destination;
  std::vector<char> seen(net.num_nodes(), 0);
  NodeId at = origin;
  seen[at] = 1;
  for (ArcId a : path.arcs) {
    if (a < 0 || static_cast<std::size_t>(a) >= net.num_arcs()) return false;
    const Arc& arc = net.arc(a);
    if (arc.from != at || seen[arc.to]) return false;
    at = arc.to;
    seen[at] = 1;
  }
  return at == destination;
}

// ---------------------------------------------------------------------------
// Geometry queries

inline double point_segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double cx = ax + t * dx - px, cy = ay + t * dy - py;
  return std::sqrt(cx * cx + cy * cy);
}

/// Closest node by Euclidean distance; ties go to the smallest id.
inline NodeId nearest_node(const RoadNetwork& net, double x, double y) {
  if (net.num_nodes() == 0) throw ValidationError("nearest_node on an empty network");
  NodeId best = 0;
  double best_d2 = kInfinity;
  for (const Node& n : net.nodes()) {
    const double d2 = (n.x - x) * (n.x - x) + (n.y - y) * (n.y - y);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = n.id;
    }
  }
  return best;
}

/**
 * Closest arc treating arcs as undirected straight segments. Returns the
 * direction-merged (canonical) id; ties go to the smallest canonical id.
 */
inline ArcId nearest_arc(const RoadNetwork& net, double x, double y) {
  if (net.num_arcs() == 0) throw ValidationError("nearest_arc on a network without arcs");
  ArcId best = -1;
  double best_d = kInfinity;
  for (const Arc& a : net.arcs()) {
    if (net.canonical(a.id) != a.id) continue;
    const Node& u = net.node(a.from);
    const Node& v = net.node(a.to);
    const double d = point_segment_distance(x, y, u.x, u.y, v.x, v.y);
    if (d < best_d) {
      best_d = d;
      best = a.id;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Routing

/**
 * Minimum cost from every node to `target` under nonnegative arc weights
 * (Dijkstra on the reversed graph). Unreachable nodes get +infinity.
 */
inline std::vector<double> time_to_target_map(const RoadNetwork& net, std::span<const double> weights, NodeId target) {
  assert(weights.size() == net.num_arcs());
  std::vector<double> dist(net.num_nodes(), kInfinity);
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[target] = 0.0;
  heap.emplace(0.0, target);
  while (!heap.empty()) {
    auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[v]) continue;
    for (ArcId a : net.incoming(v)) {
      const NodeId u = net.arc(a).from;
      const double nd = d + weights[static_cast<std::size_t>(a)];
      if (nd < dist[u]) {
        dist[u] = nd;
        heap.emplace(nd, u);
      }
    }
  }
  return dist;
}

struct Route {
  Path path;
  double cost = 0.0;
};

/**
 * Extracts the lexicographically smallest (by arc id sequence) optimal path
 * from a precomputed cost-to-target map.
 */
inline Route route_from_cost_map(const RoadNetwork& net, std::span<const double> weights, std::span<const double> to_target,
                                 NodeId source, NodeId target) {
  Route route;
  route.cost = to_target[source];
  std::vector<char> seen(net.num_nodes(), 0);
  NodeId at = source;
  seen[at] = 1;
  while (at != target) {
    const double here = to_target[at];
    const double tol = 1e-9 * std::max(1.0, here);
    ArcId pick = -1;
    for (ArcId a : net.outgoing(at)) {
      const NodeId v = net.arc(a).to;
      if (seen[v] || !std::isfinite(to_target[v])) continue;
      if (std::abs(weights[static_cast<std::size_t>(a)] + to_target[v] - here) <= tol) {
        pick = a;
        break;
      }
    }
    assert(pick >= 0);
    route.path.arcs.push_back(pick);
    at = net.arc(pick).to;
    seen[at] = 1;
  }
  return route;
}

/// Minimum-weight simple path s -> t; nullopt when t is unreachable.
inline std::optional<Route> shortest_path(const RoadNetwork& net, std::span<const double> weights, NodeId source,
                                          NodeId target) {
  for (double w : weights)
    if (!(w >= 0.0)) throw ValidationError("shortest_path requires nonnegative weights");
  const auto to_target = time_to_target_map(net, weights, target);
  if (!std::isfinite(to_target[source])) return std::nullopt;
  return route_from_cost_map(net, weights, to_target, source, target);
}

/// Forward shortest-path tree: cost from `source` and the arc entering each node (-1 for the root/unreached).
struct PathTree {
  NodeId source = 0;
  std::vector<double> cost;
  std::vector<ArcId> parent_arc;

  bool reachable(NodeId v) const { return std::isfinite(cost[static_cast<std::size_t>(v)]); }

  Path path_to(const RoadNetwork& net, NodeId v) const {
    Path p;
    while (v != source) {
      const ArcId a = parent_arc[static_cast<std::size_t>(v)];
      p.arcs.push_back(a);
      v = net.arc(a).from;
    }
    std::reverse(p.arcs.begin(), p.arcs.end());
    return p;
  }
};

/// Dijkstra from `source`; ties keep the first arc that reached a node (nodes settle in id order on equal cost).
inline PathTree shortest_path_tree(const RoadNetwork& net, std::span<const double> weights, NodeId source) {
  PathTree tree;
  tree.source = source;
  tree.cost.assign(net.num_nodes(), kInfinity);
  tree.parent_arc.assign(net.num_nodes(), -1);
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  tree.cost[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > tree.cost[u]) continue;
    for (ArcId a : net.outgoing(u)) {
      const NodeId v = net.arc(a).to;
      const double nd = d + weights[static_cast<std::size_t>(a)];
      if (nd < tree.cost[v]) {
        tree.cost[v] = nd;
        tree.parent_arc[v] = a;
        heap.emplace(nd, v);
      }
    }
  }
  return tree;
}

/**
 * Every simple route of at most `max_arcs` arcs from `from` to `to` whose
 * interior nodes avoid `forbidden` (a per-node mask; empty means none).
 * Routes come out in lexicographic order of arc ids.
 */
inline std::vector<Path> enumerate_local_routes(const RoadNetwork& net, NodeId from, NodeId to, int max_arcs,
                                                std::span<const char> forbidden = {}) {
  if (max_arcs < 1) throw ValidationError("enumerate_local_routes requires K >= 1");
  if (from == to) throw ValidationError("enumerate_local_routes requires distinct end nodes");
  std::vector<Path> out;
  std::vector<char> on_stack(net.num_nodes(), 0);
  Path current;
  on_stack[from] = 1;
  std::function<void(NodeId)> dfs = [&](NodeId at) {
    for (ArcId a : net.outgoing(at)) {
      const NodeId v = net.arc(a).to;
      if (on_stack[v]) continue;
      if (v == to) {
        current.arcs.push_back(a);
        out.push_back(current);
        current.arcs.pop_back();
        continue;
      }
      if (static_cast<int>(current.size()) + 1 >= max_arcs) continue;
      if (!forbidden.empty() && forbidden[v]) continue;
      on_stack[v] = 1;
      current.arcs.push_back(a);
      dfs(v);
      current.arcs.pop_back();
      on_stack[v] = 0;
    }
  };
  dfs(from);
  return out;
}

}  // namespace traveltime
