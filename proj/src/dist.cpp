#include "qccs/dist.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace qccs::dist::detail {

namespace {

// Edmonds-Karp max flow on a small dense-ish graph with double capacities.
struct FlowGraph {
  struct Edge {
    int to;
    double cap;
    int rev;
  };
  std::vector<std::vector<Edge>> adj;

  explicit FlowGraph(int n) : adj(static_cast<size_t>(n)) {}

  void add_edge(int a, int b, double cap) {
    adj[static_cast<size_t>(a)].push_back({b, cap, static_cast<int>(adj[static_cast<size_t>(b)].size())});
    adj[static_cast<size_t>(b)].push_back({a, 0.0, static_cast<int>(adj[static_cast<size_t>(a)].size()) - 1});
  }

  double max_flow(int s, int t, double eps) {
    double total = 0.0;
    for (;;) {
      std::vector<int> prev_node(adj.size(), -1), prev_edge(adj.size(), -1);
      std::deque<int> queue{s};
      prev_node[static_cast<size_t>(s)] = s;
      while (!queue.empty() && prev_node[static_cast<size_t>(t)] < 0) {
        int u = queue.front();
        queue.pop_front();
        for (size_t k = 0; k < adj[static_cast<size_t>(u)].size(); ++k) {
          const Edge& e = adj[static_cast<size_t>(u)][k];
          if (e.cap > eps && prev_node[static_cast<size_t>(e.to)] < 0) {
            prev_node[static_cast<size_t>(e.to)] = u;
            prev_edge[static_cast<size_t>(e.to)] = static_cast<int>(k);
            queue.push_back(e.to);
          }
        }
      }
      if (prev_node[static_cast<size_t>(t)] < 0) break;
      double push = std::numeric_limits<double>::infinity();
      for (int v = t; v != s; v = prev_node[static_cast<size_t>(v)])
        push = std::min(push, adj[static_cast<size_t>(prev_node[static_cast<size_t>(v)])]
                                  [static_cast<size_t>(prev_edge[static_cast<size_t>(v)])].cap);
      for (int v = t; v != s; v = prev_node[static_cast<size_t>(v)]) {
        Edge& e = adj[static_cast<size_t>(prev_node[static_cast<size_t>(v)])]
                     [static_cast<size_t>(prev_edge[static_cast<size_t>(v)])];
        e.cap -= push;
        adj[static_cast<size_t>(e.to)][static_cast<size_t>(e.rev)].cap += push;
      }
      total += push;
    }
    return total;
  }
};

}  // namespace

bool transport_feasible(const std::vector<double>& row_sums, const std::vector<double>& col_sums,
                        const std::vector<std::pair<int, int>>& edges, double feas_tol,
                        std::vector<double>* edge_flow) {
  int nr = static_cast<int>(row_sums.size());
  int nc = static_cast<int>(col_sums.size());
  double total_rows = 0.0, total_cols = 0.0;
  for (double r : row_sums) total_rows += r;
  for (double c : col_sums) total_cols += c;
  if (std::abs(total_rows - total_cols) > feas_tol) return false;

  // source 0, rows 1..nr, cols nr+1..nr+nc, sink nr+nc+1
  FlowGraph g(nr + nc + 2);
  int sink = nr + nc + 1;
  for (int i = 0; i < nr; ++i) g.add_edge(0, 1 + i, row_sums[static_cast<size_t>(i)]);
  for (int j = 0; j < nc; ++j) g.add_edge(1 + nr + j, sink, col_sums[static_cast<size_t>(j)]);
  std::vector<std::pair<int, size_t>> edge_slots;  // (row node, slot in its adjacency)
  edge_slots.reserve(edges.size());
  for (const auto& [i, j] : edges) {
    edge_slots.emplace_back(1 + i, g.adj[static_cast<size_t>(1 + i)].size());
    g.add_edge(1 + i, 1 + nr + j, std::numeric_limits<double>::infinity());
  }
  double eps = feas_tol / (static_cast<double>(nr + nc) + 1.0);
  double flow = g.max_flow(0, sink, eps);
  if (flow < total_rows - feas_tol) return false;
  if (edge_flow) {
    edge_flow->clear();
    for (const auto& [node, slot] : edge_slots) {
      // Flow through a forward edge equals the reverse edge's gained capacity.
      const auto& e = g.adj[static_cast<size_t>(node)][slot];
      double used = g.adj[static_cast<size_t>(e.to)][static_cast<size_t>(e.rev)].cap;
      edge_flow->push_back(used);
    }
  }
  return true;
}

}  // namespace qccs::dist::detail
