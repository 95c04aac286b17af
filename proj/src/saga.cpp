#include "rdassoc/saga.hpp"

#include <algorithm>
#include <stdexcept>

#include "rdassoc/chi_squared.hpp"
#include "rdassoc/metrics.hpp"

namespace rdassoc {

void SagaConfig::validate(int n_sensors) const {
  if (n_sensors < 2 || n_sensors > kMaxSensors) throw std::invalid_argument("unsupported sensor count");
  if (rho < 0 || rho > n_sensors - 2) throw std::invalid_argument("rho must lie in [0, n_sensors - 2]");
  if (!(p_fa > 0.0 && p_fa < 1.0)) throw std::invalid_argument("p_fa must lie in (0, 1)");
  if (!(beta > 1.0)) throw std::invalid_argument("beta must exceed 1");
  if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("alpha must lie in (0, 0.5)");
  if (tau_z && !(*tau_z > 0.0)) throw std::invalid_argument("tau_z must be positive");
  if (!(gate_slack_sigmas >= 0.0)) throw std::invalid_argument("gate slack must be non-negative");
  if (max_relaxations < 1 || max_connecting_paths < 1) throw std::invalid_argument("search caps must be positive");
}

int SagaConfig::min_chain_length(int n_sensors) const { return std::max(2, n_sensors - rho); }

void SearchThresholds::relax(double beta) {
  for (auto& t : fit) t *= beta;
  for (auto& t : likelihood) t *= beta;
}

SearchThresholds initial_thresholds(double p_fa, int max_len) {
  if (!(p_fa > 0.0 && p_fa < 1.0)) throw std::invalid_argument("p_fa must lie in (0, 1)");
  if (max_len < 2) throw std::invalid_argument("chains have at least two detections");
  SearchThresholds t;
  t.fit.assign(static_cast<std::size_t>(max_len) + 1, 0.0);
  for (int n = 2; n <= max_len; ++n) {
    t.fit[static_cast<std::size_t>(n)] = chi_squared_quantile(1.0 - p_fa, 2 * n);
  }
  t.likelihood = t.fit;
  return t;
}

std::vector<KinematicState> AssociationResult::states() const {
  std::vector<KinematicState> out;
  out.reserve(targets.size());
  for (const auto& t : targets) out.push_back(t.fit.state);
  return out;
}

AssociationGraph build_graph(const ObservationSet& obs, const SensorArray& array, const NoiseModel& noise,
                             const SagaConfig& config) {
  AssociationGraph graph(obs, array);
  connect_gated(graph, 0, config.gate_slack_sigmas * noise.sigma_r);
  return graph;
}

namespace {

// Paths a -> ... -> b whose interior nodes sit on sensors strictly between.
void collect_paths(const AssociationGraph& graph, NodeId target, std::vector<NodeId>& path,
                   std::vector<std::vector<NodeId>>& out, std::size_t cap) {
  for (const auto& e : graph.children(path.back())) {
    if (out.size() >= cap) return;
    if (e.to == target) {
      if (path.size() > 1) {
        path.push_back(e.to);
        out.push_back(path);
        path.pop_back();
      }
    } else if (e.to.sensor < target.sensor && graph.alive(e.to)) {
      path.push_back(e.to);
      collect_paths(graph, target, path, out, cap);
      path.pop_back();
    }
  }
}

double state_distance(const KinematicState& a, const KinematicState& b) { return (a.vector() - b.vector()).norm(); }

class GuidedSearch {
 public:
  GuidedSearch(AssociationGraph& graph, int gamma, const SearchThresholds& thresholds, const ChainScoring& scoring)
      : graph_(graph), gamma_(gamma), thresholds_(thresholds), scoring_(scoring) {}

  std::optional<Chain> run(NodeId start) {
    path_.assign(1, start);
    if (visit(0.0)) return graph_.make_chain(path_);
    return std::nullopt;
  }

  bool blocked() const { return blocked_; }

 private:
  struct Branch {
    double fit;
    double range;
    NodeId node;
  };

  bool visit(double fit_so_far) {
    const NodeId node = path_.back();
    const double branch_cap = thresholds_.fit_at(thresholds_.max_length());

    std::vector<Branch> branches;
    for (const auto& e : graph_.children(node)) {
      if (!graph_.alive(e.to)) continue;
      path_.push_back(e.to);
      const double fit = fitting_error(graph_.make_chain(path_), graph_.array(), scoring_.norm);
      path_.pop_back();
      ++graph_.counters().fit_evals;
      if (fit < branch_cap) {
        branches.push_back({fit, graph_.detection(e.to).range, e.to});
      } else {
        blocked_ = true;
      }
    }
    std::sort(branches.begin(), branches.end(), [](const Branch& a, const Branch& b) {
      return std::tie(a.fit, a.range, a.node) < std::tie(b.fit, b.range, b.node);
    });
    for (const auto& b : branches) {
      path_.push_back(b.node);
      if (visit(b.fit)) return true;
      path_.pop_back();
    }

    // No extension succeeded: try to end the chain here.
    const std::size_t n = path_.size();
    if (static_cast<int>(n) < gamma_) return false;
    if (!(fit_so_far < thresholds_.fit_at(n))) {
      blocked_ = true;
      return false;
    }
    ++graph_.counters().likelihood_evals;
    const auto fit = predict_state(graph_.make_chain(path_), graph_.array(), scoring_);
    if (!fit) return false;
    if (!(fit->residual < thresholds_.likelihood_at(n))) {
      blocked_ = true;
      return false;
    }
    return true;
  }

  AssociationGraph& graph_;
  int gamma_;
  const SearchThresholds& thresholds_;
  const ChainScoring& scoring_;
  std::vector<NodeId> path_;
  bool blocked_ = false;
};

}  // namespace

void add_skip_edges(AssociationGraph& graph, int h, const SagaConfig& config, const ChainScoring& scoring,
                    double slack, double tau_z) {
  if (h < 1) throw std::invalid_argument("skip level must be at least 1");
  const auto& array = graph.array();
  for (int i = 0; i + h + 1 < graph.sensor_count(); ++i) {
    const int q = i + h + 1;
    const double baseline = array.baseline(i, q);
    for (const auto& a : graph.alive_nodes(i)) {
      for (const auto& b : graph.alive_nodes(q)) {
        if (!geometric_gate(graph.detection(a), graph.detection(b), baseline, slack)) continue;

        std::vector<std::vector<NodeId>> paths;
        std::vector<NodeId> path{a};
        collect_paths(graph, b, path, paths, static_cast<std::size_t>(config.max_connecting_paths));
        if (paths.empty()) {
          graph.add_edge(a, b);
          continue;
        }

        const std::vector<NodeId> ends{a, b};
        ++graph.counters().fit_evals;
        const auto direct = predict_state(graph.make_chain(ends), array, scoring);
        // An infeasible pair state is not comparable; only the gate applies.
        bool distinct = true;
        if (!direct) {
          graph.add_edge(a, b);
          continue;
        }
        for (const auto& p : paths) {
          ++graph.counters().fit_evals;
          const auto via = predict_state(graph.make_chain(p), array, scoring);
          if (via && state_distance(via->state, direct->state) <= tau_z) {
            distinct = false;
            break;
          }
        }
        if (distinct) graph.add_edge(a, b);
      }
    }
  }
}

std::optional<Chain> ga_dfs(AssociationGraph& graph, NodeId start, int gamma, const SearchThresholds& thresholds,
                            const ChainScoring& scoring, SearchTrace* trace) {
  if (gamma < 2) throw std::invalid_argument("minimum chain length must be at least 2");
  if (!graph.alive(start)) return std::nullopt;
  GuidedSearch search(graph, gamma, thresholds, scoring);
  auto chain = search.run(start);
  if (trace) trace->threshold_blocked = trace->threshold_blocked || search.blocked();
  return chain;
}

AssociationResult saga_associate(const ObservationSet& obs, const SensorArray& array, const NoiseModel& noise,
                                 const SagaConfig& config) {
  const int n_sensors = array.size();
  config.validate(n_sensors);
  const ChainScoring scoring = ChainScoring::nominal(noise, config.limits, config.alpha);
  const double slack = config.gate_slack_sigmas * noise.sigma_r;
  const double tau_z = config.tau_z.value_or(default_tau_z(array, noise));

  AssociationGraph graph = build_graph(obs, array, noise, config);
  SearchThresholds thresholds = initial_thresholds(config.p_fa, n_sensors);
  const int min_length = config.min_chain_length(n_sensors);

  std::vector<Chain> chains;
  AssociationResult result;
  for (int round = 0; round < config.max_relaxations; ++round) {
    graph.remove_skip_edges();
    int extracted = 0;
    SearchTrace trace;
    for (int h = 0; h <= config.rho; ++h) {
      const int gamma = n_sensors - h;
      if (h > 0) add_skip_edges(graph, h, config, scoring, slack, tau_z);
      // A root on sensor s leaves n_sensors - s sensors for the chain.
      for (int s = 0; s <= h; ++s) {
        for (const auto& root : graph.alive_nodes(s)) {
          if (!graph.alive(root)) continue;
          auto chain = ga_dfs(graph, root, gamma, thresholds, scoring, &trace);
          if (!chain) continue;
          for (const auto& node : chain->nodes) graph.remove_node(node);
          chains.push_back(std::move(*chain));
          ++extracted;
        }
      }
    }
    result.rounds = round + 1;
    if (graph.longest_path() < min_length) break;
    if (extracted == 0 && !trace.threshold_blocked) break;  // relaxing cannot change the outcome
    thresholds.relax(config.beta);
  }

  for (auto& chain : chains) {
    auto fit = estimate_state(chain, array, scoring);
    if (!fit) continue;
    result.targets.push_back({std::move(chain), *fit});
  }
  result.counters = graph.counters();
  return result;
}

}  // namespace rdassoc
