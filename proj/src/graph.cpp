#include "rdassoc/graph.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace rdassoc {

AssociationGraph::AssociationGraph(const ObservationSet& obs, const SensorArray& array) : array_(array) {
  if (obs.sensor_count() != array.size()) {
    throw std::invalid_argument("observation set and sensor array disagree on sensor count");
  }
  const auto n = idx(array.size());
  columns_.resize(n);
  source_slot_.resize(n);
  alive_.resize(n);
  edges_.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto& column = obs.per_sensor[s];
    std::vector<int> order(column.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      const auto& da = column[idx(a)];
      const auto& db = column[idx(b)];
      return std::tie(da.range, da.doppler) < std::tie(db.range, db.doppler);
    });
    for (int slot : order) {
      const auto& det = column[idx(slot)];
      if (det.is_null) continue;
      Detection copy = det;
      copy.sensor = static_cast<int>(s);
      columns_[s].push_back(copy);
      source_slot_[s].push_back(slot);
    }
    alive_[s].assign(columns_[s].size(), 1);
    edges_[s].resize(columns_[s].size());
  }
}

void AssociationGraph::add_edge(NodeId from, NodeId to) {
  if (to.sensor <= from.sensor) throw std::invalid_argument("edges must point to a later sensor");
  edges_[idx(from.sensor)][idx(from.slot)].push_back({to, to.sensor - from.sensor - 1});
}

bool AssociationGraph::has_edge(NodeId from, NodeId to) const {
  const auto& out = edges_[idx(from.sensor)][idx(from.slot)];
  return std::any_of(out.begin(), out.end(), [&](const Edge& e) { return e.to == to; });
}

void AssociationGraph::remove_node(NodeId node) {
  alive_[idx(node.sensor)][idx(node.slot)] = 0;
  edges_[idx(node.sensor)][idx(node.slot)].clear();
  for (int s = 0; s < node.sensor; ++s) {
    for (auto& out : edges_[idx(s)]) {
      std::erase_if(out, [&](const Edge& e) { return e.to == node; });
    }
  }
}

void AssociationGraph::remove_skip_edges() {
  for (auto& column : edges_) {
    for (auto& out : column) {
      std::erase_if(out, [](const Edge& e) { return e.skip > 0; });
    }
  }
}

std::vector<NodeId> AssociationGraph::alive_nodes(int sensor) const {
  std::vector<NodeId> nodes;
  const auto& column = alive_[idx(sensor)];
  for (std::size_t k = 0; k < column.size(); ++k) {
    if (column[k]) nodes.push_back({sensor, static_cast<int>(k)});
  }
  return nodes;
}

std::size_t AssociationGraph::alive_count() const {
  std::size_t n = 0;
  for (const auto& column : alive_) n += static_cast<std::size_t>(std::count(column.begin(), column.end(), 1));
  return n;
}

std::size_t AssociationGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& column : edges_) {
    for (const auto& out : column) n += out.size();
  }
  return n;
}

int AssociationGraph::longest_path() const {
  // Nodes only point forward, so sweeping sensors from the back is a
  // topological order.
  std::vector<std::vector<int>> depth(columns_.size());
  int best = 0;
  for (int s = sensor_count() - 1; s >= 0; --s) {
    depth[idx(s)].assign(columns_[idx(s)].size(), 0);
    for (std::size_t k = 0; k < columns_[idx(s)].size(); ++k) {
      if (!alive_[idx(s)][k]) continue;
      int longest = 1;
      for (const auto& e : edges_[idx(s)][k]) {
        longest = std::max(longest, 1 + depth[idx(e.to.sensor)][idx(e.to.slot)]);
      }
      depth[idx(s)][k] = longest;
      best = std::max(best, longest);
    }
  }
  return best;
}

Chain AssociationGraph::make_chain(std::span<const NodeId> nodes) const {
  Chain chain;
  chain.nodes.assign(nodes.begin(), nodes.end());
  chain.detections.reserve(nodes.size());
  for (const auto& node : nodes) chain.detections.push_back(detection(node));
  return chain;
}

void connect_gated(AssociationGraph& graph, int skip, double slack) {
  const auto& array = graph.array();
  for (int i = 0; i + skip + 1 < graph.sensor_count(); ++i) {
    const int j = i + skip + 1;
    const double baseline = array.baseline(i, j);
    for (const auto& a : graph.alive_nodes(i)) {
      for (const auto& b : graph.alive_nodes(j)) {
        if (geometric_gate(graph.detection(a), graph.detection(b), baseline, slack)) graph.add_edge(a, b);
      }
    }
  }
}

}  // namespace rdassoc
