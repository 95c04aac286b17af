#pragma once

#include <optional>
#include <vector>

namespace rdassoc {

/// Successive-shortest-path min-cost flow with Johnson potentials.
/// Arc costs must be non-negative when the first path is requested.
class MinCostFlow {
 public:
  explicit MinCostFlow(int node_count);

  /// Returns the arc id; the residual twin gets id + 1.
  int add_arc(int from, int to, int capacity, double cost);

  /// Pushes one unit along a cheapest residual path; returns its cost or
  /// nullopt when the sink is unreachable.
  std::optional<double> augment(int source, int sink);

  int flow(int arc) const { return arcs_[static_cast<std::size_t>(arc)].flow; }
  int arc_head(int arc) const { return arcs_[static_cast<std::size_t>(arc)].to; }
  const std::vector<int>& out_arcs(int node) const { return adjacency_[static_cast<std::size_t>(node)]; }
  int node_count() const { return static_cast<int>(adjacency_.size()); }

  std::vector<int> flows() const;
  void restore_flows(const std::vector<int>& flows);

 private:
  struct Arc {
    int to;
    int capacity;
    int flow;
    double cost;
  };

  std::vector<Arc> arcs_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<double> potential_;
};

}  // namespace rdassoc
