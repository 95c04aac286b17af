#pragma once

#include <optional>
#include <vector>

#include "rdassoc/geometry.hpp"
#include "rdassoc/graph.hpp"
#include "rdassoc/saga.hpp"
#include "rdassoc/scene.hpp"

namespace rdassoc {

/// State implied by a pair of connected detections, scored against the
/// whole observation set.
struct CandidateState {
  KinematicState state;
  NodeId from;
  NodeId to;
  double likelihood = 0.0;
};

/// Exact state through two detections; nullopt when the implied y^2 is not
/// positive. Same inversion as two_detection_state.
std::optional<KinematicState> edge_candidate_state(const Detection& det_i, const Detection& det_q, double l_i,
                                                   double l_q);

/// Per-sensor cost charged when a sensor has no detection to compare with:
/// the 0.99 quantile of chi-squared with 4 degrees of freedom.
double default_saturation_cost();

/// Sum over sensors of the smallest normalized squared distance between the
/// predicted (range, doppler) of `z` and that sensor's detections. Sensors
/// without detections contribute `saturation`. Adds one likelihood
/// evaluation per (state, detection) pair to `counters` when given.
double candidate_likelihood(const KinematicState& z, const ObservationSet& obs, const SensorArray& array,
                            const NoiseModel& noise, double saturation, EvalCounters* counters = nullptr);
double candidate_likelihood(const KinematicState& z, const ObservationSet& obs, const SensorArray& array,
                            const NoiseModel& noise);

/// Same score over the alive nodes of a graph.
double candidate_likelihood(const KinematicState& z, AssociationGraph& graph, const NoiseModel& noise,
                            double saturation);

struct SaeslResult {
  std::vector<CandidateState> candidates;  // in extraction order
  AssociationResult association;           // parallel to candidates
};

/// Exhaustive candidate search: repeatedly takes the edge whose two-detection
/// state explains the remaining detections best and removes every detection
/// within one resolution cell of that state's predictions.
SaeslResult saesl_associate(const ObservationSet& obs, const SensorArray& array, const NoiseModel& noise,
                            const SagaConfig& config = {});

/// Greedy chains grown from the cheapest consecutive pairs by appending the
/// nearest detection of each remaining sensor.
AssociationResult nn_associate(const ObservationSet& obs, const SensorArray& array, const NoiseModel& noise,
                               const SagaConfig& config = {});

struct McfOptions {
  std::optional<int> max_flow;  // defaults to the largest column plus expected false alarms
};

/// Node-disjoint chains from a min-cost flow over the gated graph.
AssociationResult mcf_associate(const ObservationSet& obs, const SensorArray& array, const NoiseModel& noise,
                                const SagaConfig& config = {}, const McfOptions& options = {});

}  // namespace rdassoc
