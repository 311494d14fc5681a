#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "test_util.hpp"

using namespace traveltime;
using namespace traveltime::testing;

namespace {

const std::string kArcHeader = "arc_id,from_node,to_node,length_m,road_class,reverse_arc_id\n";

RoadNetwork cycle4() {
  return network_from_csv("node_id,x_m,y_m\n0,0,0\n1,100,0\n2,100,100\n3,0,100\n",
                          kArcHeader + "0,0,1,100,primary,-1\n1,1,2,100,primary,-1\n2,2,3,100,primary,-1\n3,3,0,100,primary,-1\n");
}

}  // namespace

TEST(LoadNetwork, MinimalGraph) {
  const auto net = network_from_csv("node_id,x_m,y_m\n0,0,0\n1,100,0\n", kArcHeader + "0,0,1,100,secondary,-1\n");
  EXPECT_EQ(net.num_nodes(), 2u);
  ASSERT_EQ(net.outgoing(0).size(), 1u);
  EXPECT_EQ(net.outgoing(0)[0], 0);
  EXPECT_TRUE(net.outgoing(1).empty());
  EXPECT_EQ(net.arc(0).road_class, RoadClass::secondary);
}

TEST(LoadNetwork, DanglingEndpointRejected) {
  try {
    network_from_csv("node_id,x_m,y_m\n0,0,0\n1,100,0\n", kArcHeader + "0,0,99,100,primary,-1\n");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("99"), std::string::npos);
  }
}

TEST(LoadNetwork, CycleAdjacencyHasOneArcPerNode) {
  const auto net = cycle4();
  for (NodeId v = 0; v < 4; ++v) {
    EXPECT_EQ(net.outgoing(v).size(), 1u);
    EXPECT_EQ(net.incoming(v).size(), 1u);
  }
}

TEST(LoadNetwork, RejectsBadRecords) {
  const std::string nodes = "node_id,x_m,y_m\n0,0,0\n1,100,0\n";
  EXPECT_THROW(network_from_csv(nodes, kArcHeader + "0,0,1,0,primary,-1\n"), ValidationError);
  EXPECT_THROW(network_from_csv(nodes, kArcHeader + "0,0,1,-5,primary,-1\n"), ValidationError);
  EXPECT_THROW(network_from_csv(nodes, kArcHeader + "0,0,0,10,primary,-1\n"), ValidationError);
  EXPECT_THROW(network_from_csv(nodes, kArcHeader + "0,0,1,10,primary,-1\n0,1,0,10,primary,-1\n"), ValidationError);
  EXPECT_THROW(network_from_csv("node_id,x_m,y_m\n0,0,0\n0,1,1\n", kArcHeader), ValidationError);
  EXPECT_THROW(network_from_csv(nodes, kArcHeader + "0,0,1,10,highway,-1\n"), ParseError);
  EXPECT_THROW(network_from_csv(nodes, kArcHeader + "0,0,1,10,primary,1\n1,1,0,10,primary,-1\n"), ValidationError);
}

TEST(LoadNetwork, ParseErrorCarriesLine) {
  try {
    network_from_csv("node_id,x_m,y_m\n0,0,0\n1,abc,0\n", kArcHeader);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(network_from_csv("id,x,y\n", kArcHeader), ParseError);
}

TEST(LoadNetwork, WriteReadRoundTrip) {
  const auto net = make_grid_network(3, 4, 120.0, ClassPattern{});
  std::ostringstream n, a;
  write_network(net, n, a);
  const auto back = network_from_csv(n.str(), a.str());
  ASSERT_EQ(back.num_arcs(), net.num_arcs());
  for (const Arc& arc : net.arcs()) {
    EXPECT_EQ(back.arc(arc.id).from, arc.from);
    EXPECT_EQ(back.arc(arc.id).reverse, arc.reverse);
    EXPECT_EQ(back.arc(arc.id).road_class, arc.road_class);
    EXPECT_DOUBLE_EQ(back.arc(arc.id).length, arc.length);
  }
}

TEST(Canonical, MergesDirections) {
  const auto net = line_network({0, 100, 250});
  EXPECT_EQ(net.canonical(0), 0);
  EXPECT_EQ(net.canonical(1), 0);
  EXPECT_EQ(net.canonical(3), 2);
}

TEST(NearestNode, ExactAndTie) {
  const auto net = make_grid_network(5, 5, 100.0, ClassPattern{});
  EXPECT_EQ(nearest_node(net, net.node(3).x, net.node(3).y), 3);
  EXPECT_EQ(nearest_node(net, 50.0, 0.0), 0);  // midpoint of nodes 0 and 1
}

TEST(NearestNode, MatchesExhaustiveScan) {
  const auto net = make_grid_network(5, 5, 100.0, ClassPattern{});
  std::mt19937_64 eng(5);
  std::uniform_real_distribution<double> u(-50.0, 450.0);
  for (int k = 0; k < 200; ++k) {
    const double x = u(eng), y = u(eng);
    NodeId best = -1;
    double bd = 1e300;
    for (const Node& n : net.nodes()) {
      const double d = std::hypot(n.x - x, n.y - y);
      if (d < bd) bd = d, best = n.id;
    }
    EXPECT_EQ(nearest_node(net, x, y), best);
  }
}

TEST(NearestArc, MidpointAndTie) {
  const auto net = make_grid_network(2, 2, 100.0, ClassPattern{});
  // Arc 0 joins nodes 0 -> 1 along y = 0.
  EXPECT_EQ(nearest_arc(net, 50.0, 0.0), 0);
  EXPECT_EQ(nearest_arc(net, 50.0, 1.0), 0);
  // Center of the square is equidistant from all four streets.
  std::set<ArcId> canon;
  for (const Arc& a : net.arcs()) canon.insert(net.canonical(a.id));
  EXPECT_EQ(nearest_arc(net, 50.0, 50.0), *canon.begin());
}

TEST(NearestArc, MatchesExhaustiveScan) {
  const auto net = make_grid_network(5, 5, 100.0, ClassPattern{});
  std::mt19937_64 eng(6);
  std::uniform_real_distribution<double> u(-30.0, 430.0);
  for (int k = 0; k < 100; ++k) {
    const double x = u(eng), y = u(eng);
    ArcId best = -1;
    double bd = 1e300;
    for (const Arc& a : net.arcs()) {
      const ArcId c = std::min(a.id, a.reverse >= 0 ? a.reverse : a.id);
      const Node& p = net.node(a.from);
      const Node& q = net.node(a.to);
      // Sampled brute-force distance to the segment.
      double d = 1e300;
      for (int s = 0; s <= 2000; ++s) {
        const double t = s / 2000.0;
        d = std::min(d, std::hypot(p.x + t * (q.x - p.x) - x, p.y + t * (q.y - p.y) - y));
      }
      if (d < bd - 1e-6 || (std::abs(d - bd) <= 1e-6 && c < best)) bd = d, best = c;
    }
    EXPECT_EQ(nearest_arc(net, x, y), best) << x << "," << y;
  }
}

TEST(ShortestPath, SameNodeIsEmpty) {
  const auto net = cycle4();
  const auto r = shortest_path(net, net.lengths(), 2, 2);
  ASSERT_TRUE(r);
  EXPECT_TRUE(r->path.empty());
  EXPECT_EQ(r->cost, 0.0);
}

TEST(ShortestPath, TriangleTakesTwoHops) {
  const auto net = network_from_csv("node_id,x_m,y_m\n0,0,0\n1,1,0\n2,2,0\n",
                                    kArcHeader + "0,0,1,1,primary,-1\n1,1,2,1,primary,-1\n2,0,2,3,primary,-1\n");
  const std::vector<double> w{1, 1, 3};
  const auto r = shortest_path(net, w, 0, 2);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->path.arcs, (std::vector<ArcId>{0, 1}));
  EXPECT_DOUBLE_EQ(r->cost, 2.0);
}

TEST(ShortestPath, UnreachableAndBadWeights) {
  const auto net = cycle4();
  const std::vector<double> w(4, 1.0);
  EXPECT_TRUE(shortest_path(net, w, 0, 3));
  const auto oneway = network_from_csv("node_id,x_m,y_m\n0,0,0\n1,1,0\n", kArcHeader + "0,0,1,1,primary,-1\n");
  EXPECT_FALSE(shortest_path(oneway, std::vector<double>{1.0}, 1, 0));
  EXPECT_THROW(shortest_path(oneway, std::vector<double>{-1.0}, 0, 1), ValidationError);
}

TEST(ShortestPath, TieBreakIsLexicographic) {
  const auto net = make_grid_network(2, 2, 100.0, ClassPattern{});
  const auto r = shortest_path(net, net.lengths(), 0, 3);
  ASSERT_TRUE(r);
  const auto all = all_simple_paths(net, 0, 3);
  std::vector<std::vector<ArcId>> optimal;
  for (const auto& p : all)
    if (std::abs(path_length(net, p) - 200.0) < 1e-9) optimal.push_back(p.arcs);
  EXPECT_EQ(r->path.arcs, *std::min_element(optimal.begin(), optimal.end()));
}

TEST(ShortestPath, MatchesBruteForceOnRandomGrids) {
  const auto net = make_grid_network(3, 3, 100.0, ClassPattern{});
  std::mt19937_64 eng(9);
  std::uniform_real_distribution<double> u(0.5, 5.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> w(net.num_arcs());
    for (double& x : w) x = u(eng);
    const NodeId s = static_cast<NodeId>(eng() % 9), t = static_cast<NodeId>(eng() % 9);
    if (s == t) continue;
    double best = 1e300;
    for (const auto& p : all_simple_paths(net, s, t)) best = std::min(best, path_cost(p, w));
    const auto r = shortest_path(net, w, s, t);
    ASSERT_TRUE(r);
    EXPECT_NEAR(r->cost, best, 1e-9);
    EXPECT_NEAR(path_cost(r->path, w), best, 1e-9);
    EXPECT_TRUE(is_valid_path(net, r->path, s, t));
  }
}

TEST(ShortestPath, FourByFourMatchesEnumeration) {
  const auto net = make_grid_network(4, 4, 100.0, ClassPattern{});
  std::mt19937_64 eng(10);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  std::vector<double> w(net.num_arcs());
  for (double& x : w) x = u(eng);
  double best = 1e300;
  for (const auto& p : all_simple_paths(net, 0, 15)) best = std::min(best, path_cost(p, w));
  EXPECT_NEAR(shortest_path(net, w, 0, 15)->cost, best, 1e-9);
}

TEST(EnumerateRoutes, FourCycleBothWays) {
  const auto net = network_from_csv("node_id,x_m,y_m\n0,0,0\n1,1,0\n2,1,1\n3,0,1\n",
                                    kArcHeader +
                                        "0,0,1,1,primary,1\n1,1,0,1,primary,0\n2,1,2,1,primary,3\n3,2,1,1,primary,2\n"
                                        "4,2,3,1,primary,5\n5,3,2,1,primary,4\n6,3,0,1,primary,7\n7,0,3,1,primary,6\n");
  const auto routes = enumerate_local_routes(net, 0, 2, 2);
  ASSERT_EQ(routes.size(), 2u);
  EXPECT_EQ(path_nodes(net, routes[0]), (std::vector<NodeId>{0, 1, 2}));
  EXPECT_EQ(path_nodes(net, routes[1]), (std::vector<NodeId>{0, 3, 2}));
}

TEST(EnumerateRoutes, KOneNonAdjacentIsEmpty) {
  const auto net = make_grid_network(3, 3, 100.0, ClassPattern{});
  EXPECT_TRUE(enumerate_local_routes(net, 0, 8, 1).empty());
  EXPECT_THROW(enumerate_local_routes(net, 0, 0, 3), ValidationError);
  EXPECT_THROW(enumerate_local_routes(net, 0, 1, 0), ValidationError);
}

TEST(EnumerateRoutes, MatchesBoundedBruteForce) {
  const auto net = make_grid_network(3, 4, 100.0, ClassPattern{});  // 12 nodes
  std::vector<char> forbidden(net.num_nodes(), 0);
  forbidden[5] = 1;
  for (const auto& mask : {std::vector<char>{}, forbidden}) {
    for (int K : {1, 3, 6}) {
      const auto got = enumerate_local_routes(net, 0, 11, K, mask);
      std::set<std::vector<ArcId>> want;
      for (const auto& p : all_simple_paths(net, 0, 11)) {
        if (static_cast<int>(p.size()) > K) continue;
        const auto nodes = path_nodes(net, p, 0);
        bool ok = true;
        for (std::size_t i = 1; i + 1 < nodes.size(); ++i) ok = ok && (mask.empty() || !mask[nodes[i]]);
        if (ok) want.insert(p.arcs);
      }
      std::set<std::vector<ArcId>> have;
      for (const auto& p : got) {
        EXPECT_TRUE(is_valid_path(net, p, 0, 11));
        have.insert(p.arcs);
      }
      EXPECT_EQ(have.size(), got.size()) << "duplicates";
      EXPECT_EQ(have, want) << "K=" << K;
    }
  }
}

TEST(EnumerateRoutes, FiveByFiveKSix) {
  const auto net = make_grid_network(5, 5, 100.0, ClassPattern{});
  const auto got = enumerate_local_routes(net, 6, 18, 6);
  std::size_t want = 0;
  // Bounded DFS written independently: count simple paths of <= 6 arcs.
  std::vector<char> on(net.num_nodes(), 0);
  std::function<void(NodeId, int)> go = [&](NodeId at, int depth) {
    if (at == 18) {
      ++want;
      return;
    }
    if (depth == 6) return;
    on[at] = 1;
    for (const Arc& a : net.arcs())
      if (a.from == at && !on[a.to]) go(a.to, depth + 1);
    on[at] = 0;
  };
  go(6, 0);
  EXPECT_EQ(got.size(), want);
}

TEST(TimeToTarget, LineAndTarget) {
  const auto net = network_from_csv("node_id,x_m,y_m\n0,0,0\n1,1,0\n2,2,0\n",
                                    kArcHeader + "0,0,1,1,primary,-1\n1,1,2,1,primary,-1\n");
  const auto h = time_to_target_map(net, std::vector<double>{2.0, 3.0}, 2);
  EXPECT_EQ(h[2], 0.0);
  EXPECT_DOUBLE_EQ(h[1], 3.0);
  EXPECT_DOUBLE_EQ(h[0], 5.0);
  const auto back = time_to_target_map(net, std::vector<double>{2.0, 3.0}, 0);
  EXPECT_TRUE(std::isinf(back[2]));
}

TEST(TimeToTarget, MatchesBruteForce) {
  const auto net = make_grid_network(3, 3, 100.0, ClassPattern{});
  std::mt19937_64 eng(12);
  std::uniform_real_distribution<double> u(1.0, 9.0);
  std::vector<double> w(net.num_arcs());
  for (double& x : w) x = u(eng);
  const auto h = time_to_target_map(net, w, 4);
  for (NodeId s = 0; s < 9; ++s) {
    if (s == 4) continue;
    double best = 1e300;
    for (const auto& p : all_simple_paths(net, s, 4)) best = std::min(best, path_cost(p, w));
    EXPECT_NEAR(h[s], best, 1e-9);
  }
}

TEST(PathTree, AgreesWithShortestPath) {
  const auto net = make_grid_network(4, 4, 100.0, ClassPattern{});
  std::mt19937_64 eng(13);
  std::uniform_real_distribution<double> u(1.0, 9.0);
  std::vector<double> w(net.num_arcs());
  for (double& x : w) x = u(eng);
  const auto tree = shortest_path_tree(net, w, 5);
  for (NodeId v = 0; v < 16; ++v) {
    const auto r = shortest_path(net, w, 5, v);
    EXPECT_NEAR(tree.cost[v], r->cost, 1e-9);
    EXPECT_NEAR(path_cost(tree.path_to(net, v), w), r->cost, 1e-9);
    EXPECT_TRUE(is_valid_path(net, tree.path_to(net, v), 5, v));
  }
}

TEST(PathHelpers, ValidityRules) {
  const auto net = make_grid_network(2, 3, 100.0, ClassPattern{});
  const auto r = shortest_path(net, net.lengths(), 0, 5);
  EXPECT_TRUE(is_valid_path(net, r->path, 0, 5));
  EXPECT_FALSE(is_valid_path(net, r->path, 1, 5));
  Path broken = r->path;
  std::swap(broken.arcs.front(), broken.arcs.back());
  EXPECT_FALSE(is_valid_path(net, broken, 0, 5));
  // Out-and-back revisits node 0.
  Path loop;
  loop.arcs = {net.outgoing(0)[0], net.arc(net.outgoing(0)[0]).reverse};
  EXPECT_FALSE(is_valid_path(net, loop, 0, 0));
  EXPECT_DOUBLE_EQ(path_length(net, r->path), 300.0);
}
