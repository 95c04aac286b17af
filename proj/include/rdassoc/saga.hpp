#pragma once

#include <optional>
#include <vector>

#include "rdassoc/geometry.hpp"
#include "rdassoc/graph.hpp"
#include "rdassoc/scene.hpp"

namespace rdassoc {

/// Tuning shared by the graph search and the baseline associators.
struct SagaConfig {
  int rho = 4;                     // tolerated missed detections per target
  double p_fa = 0.01;              // tail probability of the initial thresholds
  double beta = 2.0;               // threshold relaxation factor
  std::optional<double> tau_z;     // state-similarity threshold; default_tau_z() when unset
  double alpha = 0.05;             // detection-error probability of the chain likelihood
  double gate_slack_sigmas = 6.0;  // range gate slack in units of sigma_r
  int max_relaxations = 40;
  int max_connecting_paths = 64;
  MeasurementLimits limits;
  Resolution resolution;  // neighbourhood half-widths for SAESL

  /// Throws std::invalid_argument for out-of-range settings.
  void validate(int n_sensors) const;
  int min_chain_length(int n_sensors) const;
};

/// Per-length thresholds on the fitting error and the quadratic chain
/// likelihood. Index n holds the threshold for chains of n detections.
struct SearchThresholds {
  std::vector<double> fit;
  std::vector<double> likelihood;

  double fit_at(std::size_t n) const { return fit.at(n); }
  double likelihood_at(std::size_t n) const { return likelihood.at(n); }
  std::size_t max_length() const { return fit.empty() ? 0 : fit.size() - 1; }
  void relax(double beta);
};

/// Chi-squared(2n) upper (1 - p_fa) quantiles for n = 2..max_len.
SearchThresholds initial_thresholds(double p_fa, int max_len);

/// A chain attributed to one target and its refined state.
struct AssociatedTarget {
  Chain chain;
  StateFit fit;
};

struct AssociationResult {
  std::vector<AssociatedTarget> targets;
  EvalCounters counters;
  int rounds = 0;  // relaxation rounds (SAGA) or extraction iterations (baselines)

  std::vector<KinematicState> states() const;
};

/// Graph over all detections with gated edges between consecutive sensors.
AssociationGraph build_graph(const ObservationSet& obs, const SensorArray& array, const NoiseModel& noise,
                             const SagaConfig& config);

/// Adds skip-h edges (sensor i to i + h + 1) that pass the range gate and
/// whose two-detection state differs by more than tau_z from the state of
/// every existing path between the same endpoints.
void add_skip_edges(AssociationGraph& graph, int h, const SagaConfig& config, const ChainScoring& scoring,
                    double slack, double tau_z);

/// Outcome flags of one depth-first search.
struct SearchTrace {
  bool threshold_blocked = false;  // some branch or termination failed on a threshold
};

/// Depth-first search from `start` guided by the fitting error. Children are
/// explored in ascending fitting error and a chain is returned at the first
/// node where it has at least `gamma` detections and passes both thresholds.
std::optional<Chain> ga_dfs(AssociationGraph& graph, NodeId start, int gamma, const SearchThresholds& thresholds,
                            const ChainScoring& scoring, SearchTrace* trace = nullptr);

/// Extracts node-disjoint chains by repeated guided search over a graph whose
/// skip edges and thresholds are relaxed in stages.
AssociationResult saga_associate(const ObservationSet& obs, const SensorArray& array, const NoiseModel& noise,
                                 const SagaConfig& config = {});

}  // namespace rdassoc
