#include "rdassoc/min_cost_flow.hpp"

#include <functional>
#include <limits>
#include <queue>
#include <stdexcept>

namespace rdassoc {

MinCostFlow::MinCostFlow(int node_count)
    : adjacency_(static_cast<std::size_t>(node_count)), potential_(static_cast<std::size_t>(node_count), 0.0) {}

int MinCostFlow::add_arc(int from, int to, int capacity, double cost) {
  if (cost < 0.0) throw std::invalid_argument("arc costs must be non-negative");
  if (from < 0 || to < 0 || from >= node_count() || to >= node_count()) throw std::out_of_range("arc endpoint");
  const int id = static_cast<int>(arcs_.size());
  arcs_.push_back({to, capacity, 0, cost});
  arcs_.push_back({from, 0, 0, -cost});
  adjacency_[static_cast<std::size_t>(from)].push_back(id);
  adjacency_[static_cast<std::size_t>(to)].push_back(id + 1);
  return id;
}

std::optional<double> MinCostFlow::augment(int source, int sink) {
  const auto n = adjacency_.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, inf);
  std::vector<int> via(n, -1);
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  dist[static_cast<std::size_t>(source)] = 0.0;
  queue.push({0.0, source});
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    const auto uu = static_cast<std::size_t>(u);
    if (d > dist[uu]) continue;
    for (int id : adjacency_[uu]) {
      const Arc& arc = arcs_[static_cast<std::size_t>(id)];
      if (arc.flow >= arc.capacity) continue;
      const auto vv = static_cast<std::size_t>(arc.to);
      // Reduced costs are non-negative up to rounding.
      const double reduced = std::max(0.0, arc.cost + potential_[uu] - potential_[vv]);
      if (dist[uu] + reduced < dist[vv]) {
        dist[vv] = dist[uu] + reduced;
        via[vv] = id;
        queue.push({dist[vv], arc.to});
      }
    }
  }
  const auto sink_index = static_cast<std::size_t>(sink);
  if (dist[sink_index] == inf) return std::nullopt;
  for (std::size_t v = 0; v < n; ++v) {
    if (dist[v] < inf) potential_[v] += dist[v];
  }

  double cost = 0.0;
  for (int v = sink; v != source;) {
    const int id = via[static_cast<std::size_t>(v)];
    arcs_[static_cast<std::size_t>(id)].flow += 1;
    arcs_[static_cast<std::size_t>(id ^ 1)].flow -= 1;
    cost += arcs_[static_cast<std::size_t>(id)].cost;
    v = arcs_[static_cast<std::size_t>(id ^ 1)].to;
  }
  return cost;
}

std::vector<int> MinCostFlow::flows() const {
  std::vector<int> out;
  out.reserve(arcs_.size());
  for (const auto& arc : arcs_) out.push_back(arc.flow);
  return out;
}

void MinCostFlow::restore_flows(const std::vector<int>& flows) {
  if (flows.size() != arcs_.size()) throw std::invalid_argument("flow snapshot does not match the network");
  for (std::size_t i = 0; i < arcs_.size(); ++i) arcs_[i].flow = flows[i];
}

}  // namespace rdassoc
