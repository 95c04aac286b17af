#include "rdassoc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

#include "rdassoc/chi_squared.hpp"
#include "rdassoc/min_cost_flow.hpp"

namespace rdassoc {

namespace {

double normalized_distance(const RangeDoppler& predicted, const Detection& det, double sigma_r, double sigma_d) {
  const double er = (predicted.range - det.range) / sigma_r;
  const double ed = (predicted.doppler - det.doppler) / sigma_d;
  return er * er + ed * ed;
}

// Scores with the refined state; the fitting error is the geometric one.
StateFit score_chain(const Chain& chain, const SensorArray& array, const ChainScoring& scoring,
                     const KinematicState& state) {
  StateFit fit;
  fit.state = state;
  fit.fit_error = fitting_error(chain, array, scoring.norm);
  fit.residual = chain_residual(chain, state, array, scoring.sigma_r, scoring.sigma_d);
  fit.log_likelihood =
      fit.residual + static_cast<double>(chain.size()) * std::log(scoring.alpha / (1.0 - scoring.alpha));
  return fit;
}

std::vector<std::pair<NodeId, NodeId>> gated_pairs(const AssociationGraph& graph, int max_skip, double slack) {
  std::vector<std::pair<NodeId, NodeId>> pairs;
  const auto& array = graph.array();
  for (int h = 0; h <= max_skip; ++h) {
    for (int i = 0; i + h + 1 < graph.sensor_count(); ++i) {
      const int q = i + h + 1;
      const double baseline = array.baseline(i, q);
      for (const auto& a : graph.alive_nodes(i)) {
        for (const auto& b : graph.alive_nodes(q)) {
          if (geometric_gate(graph.detection(a), graph.detection(b), baseline, slack)) pairs.emplace_back(a, b);
        }
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

std::optional<KinematicState> pair_state(const AssociationGraph& graph, NodeId a, NodeId b) {
  const auto& array = graph.array();
  return edge_candidate_state(graph.detection(a), graph.detection(b), array.position(a.sensor),
                              array.position(b.sensor));
}

}  // namespace

std::optional<KinematicState> edge_candidate_state(const Detection& det_i, const Detection& det_q, double l_i,
                                                   double l_q) {
  return two_detection_state(det_i, l_i, det_q, l_q);
}

double default_saturation_cost() {
  static const double cost = chi_squared_quantile(0.99, 4);
  return cost;
}

double candidate_likelihood(const KinematicState& z, const ObservationSet& obs, const SensorArray& array,
                            const NoiseModel& noise, double saturation, EvalCounters* counters) {
  if (obs.sensor_count() != array.size()) {
    throw std::invalid_argument("observation set and sensor array disagree on sensor count");
  }
  double total = 0.0;
  for (int s = 0; s < array.size(); ++s) {
    const auto predicted = range_doppler(z, array.position(s));
    double best = saturation;
    bool any = false;
    for (const auto& det : obs.per_sensor[static_cast<std::size_t>(s)]) {
      if (det.is_null) continue;
      const double cost = normalized_distance(predicted, det, noise.sigma_r, noise.sigma_d);
      if (counters) ++counters->likelihood_evals;
      best = any ? std::min(best, cost) : cost;
      any = true;
    }
    total += best;
  }
  return total;
}

double candidate_likelihood(const KinematicState& z, const ObservationSet& obs, const SensorArray& array,
                            const NoiseModel& noise) {
  return candidate_likelihood(z, obs, array, noise, default_saturation_cost());
}

double candidate_likelihood(const KinematicState& z, AssociationGraph& graph, const NoiseModel& noise,
                            double saturation) {
  const auto& array = graph.array();
  double total = 0.0;
  for (int s = 0; s < graph.sensor_count(); ++s) {
    const auto predicted = range_doppler(z, array.position(s));
    double best = saturation;
    bool any = false;
    for (const auto& node : graph.alive_nodes(s)) {
      const double cost = normalized_distance(predicted, graph.detection(node), noise.sigma_r, noise.sigma_d);
      ++graph.counters().likelihood_evals;
      best = any ? std::min(best, cost) : cost;
      any = true;
    }
    total += best;
  }
  return total;
}

SaeslResult saesl_associate(const ObservationSet& obs, const SensorArray& array, const NoiseModel& noise,
                            const SagaConfig& config) {
  const int n_sensors = array.size();
  config.validate(n_sensors);
  noise.validate_for_scoring();
  const ChainScoring scoring = ChainScoring::nominal(noise, config.limits, config.alpha);
  const double saturation = default_saturation_cost();

  AssociationGraph graph(obs, array);
  std::vector<CandidateState> pool;
  for (const auto& [a, b] : gated_pairs(graph, config.rho, config.gate_slack_sigmas * noise.sigma_r)) {
    if (auto z = pair_state(graph, a, b)) pool.push_back({*z, a, b, 0.0});
  }

  SaeslResult result;
  for (;;) {
    const CandidateState* best = nullptr;
    for (auto& c : pool) {
      if (!graph.alive(c.from) || !graph.alive(c.to)) continue;
      c.likelihood = candidate_likelihood(c.state, graph, noise, saturation);
      // Pool is sorted by endpoints, so strict comparison keeps the
      // lexicographically first edge among ties.
      if (!best || c.likelihood < best->likelihood) best = &c;
    }
    if (!best) break;
    ++result.association.rounds;
    const CandidateState chosen = *best;

    std::vector<NodeId> captured;
    std::vector<NodeId> nearest;
    for (int s = 0; s < n_sensors; ++s) {
      const auto predicted = range_doppler(chosen.state, array.position(s));
      std::optional<NodeId> closest;
      double closest_cost = std::numeric_limits<double>::infinity();
      for (const auto& node : graph.alive_nodes(s)) {
        const auto& det = graph.detection(node);
        const bool endpoint = node == chosen.from || node == chosen.to;
        if (!endpoint && (std::abs(det.range - predicted.range) > config.resolution.range ||
                          std::abs(det.doppler - predicted.doppler) > config.resolution.doppler)) {
          continue;
        }
        captured.push_back(node);
        const double cost = normalized_distance(predicted, det, noise.sigma_r, noise.sigma_d);
        if (cost < closest_cost) {
          closest_cost = cost;
          closest = node;
        }
      }
      if (closest) nearest.push_back(*closest);
    }
    for (const auto& node : captured) graph.remove_node(node);
    if (captured.size() < 2) continue;

    const Chain chain = graph.make_chain(nearest);
    const auto refined = gauss_newton_refine(chain, array, chosen.state, noise);
    result.candidates.push_back(chosen);
    result.association.targets.push_back({chain, score_chain(chain, array, scoring, refined)});
  }
  result.association.counters = graph.counters();
  return result;
}

AssociationResult nn_associate(const ObservationSet& obs, const SensorArray& array, const NoiseModel& noise,
                               const SagaConfig& config) {
  const int n_sensors = array.size();
  config.validate(n_sensors);
  noise.validate_for_scoring();
  const ChainScoring scoring = ChainScoring::nominal(noise, config.limits, config.alpha);
  const SearchThresholds thresholds = initial_thresholds(config.p_fa, n_sensors);
  const double gate = default_saturation_cost();
  const int min_length = config.min_chain_length(n_sensors);
  const double slack = config.gate_slack_sigmas * noise.sigma_r;

  AssociationGraph graph(obs, array);
  AssociationResult result;
  // Same length staging as the graph search: full chains first.
  for (int h = 0; h <= config.rho; ++h) {
    const int gamma = std::max(min_length, n_sensors - h);
    for (;;) {
      struct Seed {
        double cost;
        NodeId a, b;
      };
      std::vector<Seed> seeds;
      for (const auto& [a, b] : gated_pairs(graph, 0, slack)) {
        const auto& da = graph.detection(a);
        const auto& db = graph.detection(b);
        const double er = (da.range - db.range) / noise.sigma_r;
        const double ed = (da.doppler - db.doppler) / noise.sigma_d;
        seeds.push_back({er * er + ed * ed, a, b});
      }
      std::sort(seeds.begin(), seeds.end(), [](const Seed& x, const Seed& y) {
        return std::tie(x.cost, x.a, x.b) < std::tie(y.cost, y.a, y.b);
      });

      bool accepted = false;
      for (const auto& seed : seeds) {
        if (!graph.alive(seed.a) || !graph.alive(seed.b)) continue;
        auto state = pair_state(graph, seed.a, seed.b);
        if (!state) continue;

        std::vector<NodeId> nodes{seed.a, seed.b};
        for (int s = 0; s < n_sensors; ++s) {
          if (s == seed.a.sensor || s == seed.b.sensor) continue;
          const auto predicted = range_doppler(*state, array.position(s));
          std::optional<NodeId> closest;
          double closest_cost = gate;
          for (const auto& node : graph.alive_nodes(s)) {
            const double cost = normalized_distance(predicted, graph.detection(node), noise.sigma_r, noise.sigma_d);
            ++graph.counters().likelihood_evals;
            if (cost < closest_cost) {
              closest_cost = cost;
              closest = node;
            }
          }
          if (!closest) continue;
          nodes.insert(std::upper_bound(nodes.begin(), nodes.end(), *closest), *closest);
          ++graph.counters().fit_evals;
          if (auto fit = predict_state(graph.make_chain(nodes), array, scoring)) state = fit->state;
        }

        const auto n = nodes.size();
        if (static_cast<int>(n) < gamma) continue;
        const Chain chain = graph.make_chain(nodes);
        ++graph.counters().fit_evals;
        ++graph.counters().likelihood_evals;
        const auto fit = predict_state(chain, array, scoring);
        if (!fit || !(fit->fit_error < thresholds.fit_at(n)) || !(fit->residual < thresholds.likelihood_at(n))) {
          continue;
        }
        const auto refined = estimate_state(chain, array, scoring);
        if (!refined) continue;
        for (const auto& node : nodes) graph.remove_node(node);
        result.targets.push_back({chain, *refined});
        accepted = true;
      }
      ++result.rounds;
      if (!accepted) break;
    }
  }
  result.counters = graph.counters();
  return result;
}

AssociationResult mcf_associate(const ObservationSet& obs, const SensorArray& array, const NoiseModel& noise,
                                const SagaConfig& config, const McfOptions& options) {
  const int n_sensors = array.size();
  config.validate(n_sensors);
  noise.validate_for_scoring();
  const ChainScoring scoring = ChainScoring::nominal(noise, config.limits, config.alpha);
  const double saturation = default_saturation_cost();
  const double skip_cost = std::abs(std::log(config.alpha));
  const double detection_reward = std::log(config.alpha / (1.0 - config.alpha));
  const int min_length = config.min_chain_length(n_sensors);

  AssociationGraph graph(obs, array);
  AssociationResult result;

  std::vector<NodeId> nodes;
  std::vector<std::vector<int>> index(static_cast<std::size_t>(n_sensors));
  int largest_column = 0;
  for (int s = 0; s < n_sensors; ++s) {
    for (const auto& node : graph.alive_nodes(s)) {
      index[static_cast<std::size_t>(s)].push_back(static_cast<int>(nodes.size()));
      nodes.push_back(node);
    }
    largest_column = std::max(largest_column, graph.column_size(s));
  }
  if (nodes.empty()) return result;

  // Node k splits into in = 2 + 2k and out = 3 + 2k.
  const int source = 0;
  const int sink = 1;
  MinCostFlow flow(2 + 2 * static_cast<int>(nodes.size()));
  auto in_of = [](int k) { return 2 + 2 * k; };
  auto out_of = [](int k) { return 3 + 2 * k; };
  auto node_index = [&](NodeId node) { return index[static_cast<std::size_t>(node.sensor)][static_cast<std::size_t>(node.slot)]; };

  std::vector<int> through(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const int kk = static_cast<int>(k);
    const int s = nodes[k].sensor;
    through[k] = flow.add_arc(in_of(kk), out_of(kk), 1, 0.0);
    if (s <= config.rho) flow.add_arc(source, in_of(kk), 1, skip_cost * s);
    if (n_sensors - 1 - s <= config.rho) flow.add_arc(out_of(kk), sink, 1, skip_cost * (n_sensors - 1 - s));
  }
  // Edge cost is the candidate likelihood relative to the best edge leaving
  // the same detection, spread over the sensors.
  struct Scored {
    NodeId a, b;
    double likelihood;
  };
  std::vector<Scored> scored;
  std::vector<double> best_out(nodes.size(), std::numeric_limits<double>::infinity());
  for (const auto& [a, b] : gated_pairs(graph, config.rho, config.gate_slack_sigmas * noise.sigma_r)) {
    const auto z = pair_state(graph, a, b);
    if (!z) continue;
    const double likelihood = candidate_likelihood(*z, graph, noise, saturation);
    auto& best = best_out[static_cast<std::size_t>(node_index(a))];
    best = std::min(best, likelihood);
    scored.push_back({a, b, likelihood});
  }
  for (const auto& e : scored) {
    const double relative = e.likelihood - best_out[static_cast<std::size_t>(node_index(e.a))];
    flow.add_arc(out_of(node_index(e.a)), in_of(node_index(e.b)), 1,
                 relative / n_sensors + skip_cost * (e.b.sensor - e.a.sensor - 1));
  }

  const int k_max = options.max_flow.value_or(
      largest_column + static_cast<int>(std::ceil(noise.false_alarm_rate)));
  double total = 0.0;
  double best_objective = 0.0;  // no chains at all
  std::vector<int> best_flows = flow.flows();
  for (int k = 1; k <= k_max; ++k) {
    const auto cost = flow.augment(source, sink);
    if (!cost) break;
    total += *cost;
    int used = 0;
    for (int arc : through) used += flow.flow(arc);
    const double objective = total + detection_reward * used;
    ++result.rounds;
    if (objective < best_objective) {
      best_objective = objective;
      best_flows = flow.flows();
    }
  }
  flow.restore_flows(best_flows);

  for (int arc : flow.out_arcs(source)) {
    if ((arc & 1) != 0 || flow.flow(arc) <= 0) continue;
    std::vector<NodeId> path;
    int v = flow.arc_head(arc);
    while (v != sink) {
      const int k = (v - 2) / 2;
      path.push_back(nodes[static_cast<std::size_t>(k)]);
      int next = sink;
      for (int out : flow.out_arcs(out_of(k))) {
        if ((out & 1) == 0 && flow.flow(out) > 0) {
          next = flow.arc_head(out);
          break;
        }
      }
      v = next;
    }
    if (static_cast<int>(path.size()) < min_length) continue;
    const Chain chain = graph.make_chain(path);
    if (auto fit = estimate_state(chain, array, scoring)) result.targets.push_back({chain, *fit});
  }
  result.counters = graph.counters();
  return result;
}

}  // namespace rdassoc
