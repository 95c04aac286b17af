#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rdassoc/geometry.hpp"
#include "rdassoc/scene.hpp"

namespace rdassoc {

/// Work counters shared by all association algorithms.
struct EvalCounters {
  std::uint64_t likelihood_evals = 0;
  std::uint64_t fit_evals = 0;

  std::uint64_t total() const { return likelihood_evals + fit_evals; }
};

/// Triangle-inequality feasibility of two ranges seen from sensors `baseline`
/// apart, widened by `slack` meters to tolerate noise.
inline bool geometric_gate(const Detection& a, const Detection& b, double baseline, double slack) {
  const double diff = a.range - b.range;
  return (diff < baseline + slack && -diff < baseline + slack) && (a.range + b.range > baseline - slack);
}

struct Edge {
  NodeId to;
  int skip = 0;  // number of sensors bypassed
};

/// Detections arranged in one column per sensor with forward edges.
///
/// Columns are sorted by (range, doppler) so that traversal order does not
/// depend on the order detections were reported in. `observation_slot` maps a
/// node back to its index in the source ObservationSet.
class AssociationGraph {
 public:
  AssociationGraph(const ObservationSet& obs, const SensorArray& array);

  const SensorArray& array() const { return array_; }
  int sensor_count() const { return array_.size(); }
  int column_size(int sensor) const { return static_cast<int>(columns_[idx(sensor)].size()); }

  const Detection& detection(NodeId node) const { return columns_[idx(node.sensor)][idx(node.slot)]; }
  int observation_slot(NodeId node) const { return source_slot_[idx(node.sensor)][idx(node.slot)]; }
  bool alive(NodeId node) const { return alive_[idx(node.sensor)][idx(node.slot)] != 0; }

  std::span<const Edge> children(NodeId node) const { return edges_[idx(node.sensor)][idx(node.slot)]; }

  /// Adds from -> to; `to` must be on a later sensor.
  void add_edge(NodeId from, NodeId to);
  bool has_edge(NodeId from, NodeId to) const;

  /// Marks a node dead and drops every edge touching it.
  void remove_node(NodeId node);
  void remove_skip_edges();

  std::vector<NodeId> alive_nodes(int sensor) const;
  std::size_t alive_count() const;
  std::size_t edge_count() const;

  /// Largest number of nodes on any path through the current edges.
  int longest_path() const;

  /// Chain made of the given nodes.
  Chain make_chain(std::span<const NodeId> nodes) const;

  EvalCounters& counters() { return counters_; }
  const EvalCounters& counters() const { return counters_; }

 private:
  static std::size_t idx(int i) { return static_cast<std::size_t>(i); }

  SensorArray array_;
  std::vector<std::vector<Detection>> columns_;
  std::vector<std::vector<int>> source_slot_;
  std::vector<std::vector<char>> alive_;
  std::vector<std::vector<std::vector<Edge>>> edges_;
  EvalCounters counters_;
};

/// Connects every gated pair of detections on sensors `skip + 1` apart.
void connect_gated(AssociationGraph& graph, int skip, double slack);

}  // namespace rdassoc
