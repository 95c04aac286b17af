#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "rdassoc/experiment.hpp"
#include "rdassoc/saga.hpp"
#include "test_support.hpp"

using namespace rdassoc;
using fixtures::pure_label;

namespace {

// Exact measurements scored as if the sensors were very accurate, so that
// only the true associations fit.
const NoiseModel kSharp = NoiseModel::from_snr(40.0);

std::vector<std::pair<double, double>> key(const Chain& chain) {
  std::vector<std::pair<double, double>> k;
  for (const auto& d : chain.detections) k.emplace_back(d.range, d.doppler);
  return k;
}

void enumerate_paths(const AssociationGraph& graph, std::vector<NodeId>& path, std::vector<std::vector<NodeId>>& out) {
  if (static_cast<int>(path.size()) == graph.sensor_count()) {
    out.push_back(path);
    return;
  }
  for (const auto& e : graph.children(path.back())) {
    path.push_back(e.to);
    enumerate_paths(graph, path, out);
    path.pop_back();
  }
}

ObservationSet drop(ObservationSet obs, int sensor, int label) {
  auto& column = obs.per_sensor[static_cast<std::size_t>(sensor)];
  auto& labels = obs.truth_labels[static_cast<std::size_t>(sensor)];
  for (std::size_t k = 0; k < column.size(); ++k) {
    if (labels[k] == label) {
      column.erase(column.begin() + static_cast<std::ptrdiff_t>(k));
      labels.erase(labels.begin() + static_cast<std::ptrdiff_t>(k));
      break;
    }
  }
  return obs;
}

void expect_invariants(const AssociationResult& result, int min_length) {
  std::set<NodeId> used;
  for (const auto& t : result.targets) {
    EXPECT_GE(static_cast<int>(t.chain.size()), min_length);
    ASSERT_EQ(t.chain.nodes.size(), t.chain.size());
    for (std::size_t i = 0; i < t.chain.size(); ++i) {
      EXPECT_TRUE(used.insert(t.chain.nodes[i]).second);
      EXPECT_EQ(t.chain.nodes[i].sensor, t.chain.detections[i].sensor);
      if (i > 0) EXPECT_GT(t.chain.detections[i].sensor, t.chain.detections[i - 1].sensor);
    }
  }
}

}  // namespace

TEST(InitialThresholds, MatchChiSquaredQuantiles) {
  for (double p_fa : {0.5, 0.1, 0.01, 1e-4}) {
    const auto t = initial_thresholds(p_fa, 32);
    ASSERT_EQ(t.max_length(), 32u);
    for (int n = 2; n <= 32; ++n) {
      const boost::math::chi_squared_distribution<double> dist(2 * n);
      const double oracle = boost::math::quantile(dist, 1.0 - p_fa);
      EXPECT_NEAR(t.fit_at(static_cast<std::size_t>(n)), oracle, 1e-8 * oracle) << "n=" << n;
      EXPECT_EQ(t.fit_at(static_cast<std::size_t>(n)), t.likelihood_at(static_cast<std::size_t>(n)));
    }
  }
}

TEST(InitialThresholds, ReferenceValues) {
  const auto t = initial_thresholds(0.01, 6);
  EXPECT_NEAR(t.fit_at(6), 26.217, 1e-3);
  EXPECT_NEAR(t.fit_at(2), 13.277, 1e-3);
}

TEST(InitialThresholds, VanishAsFalseAlarmProbabilityApproachesOne) {
  const auto loose = initial_thresholds(1.0 - 1e-3, 6);
  const auto t = initial_thresholds(1.0 - 1e-12, 6);
  for (std::size_t n = 2; n <= 6; ++n) {
    EXPECT_LT(t.fit_at(n), loose.fit_at(n));
    EXPECT_LT(t.fit_at(n), 0.1);
  }
  EXPECT_LT(t.fit_at(2), 1e-5);
  EXPECT_THROW(initial_thresholds(0.0, 6), std::invalid_argument);
  EXPECT_THROW(initial_thresholds(0.01, 1), std::invalid_argument);
}

TEST(InitialThresholds, RelaxScalesEveryLength) {
  auto t = initial_thresholds(0.01, 6);
  const auto before = t;
  t.relax(2.0);
  for (std::size_t n = 2; n <= 6; ++n) {
    EXPECT_DOUBLE_EQ(t.fit_at(n), 2 * before.fit_at(n));
    EXPECT_DOUBLE_EQ(t.likelihood_at(n), 2 * before.likelihood_at(n));
  }
}

TEST(SagaConfig, Validation) {
  SagaConfig c;
  EXPECT_NO_THROW(c.validate(6));
  EXPECT_THROW(c.validate(5), std::invalid_argument);  // rho = 4 > 5 - 2
  c.beta = 1.0;
  EXPECT_THROW(c.validate(6), std::invalid_argument);
  c = {};
  c.alpha = 0.5;
  EXPECT_THROW(c.validate(6), std::invalid_argument);
  c = {};
  EXPECT_EQ(c.min_chain_length(6), 2);
  c.rho = 1;
  EXPECT_EQ(c.min_chain_length(6), 5);
}

TEST(SkipEdges, BridgeAMissedDetection) {
  const auto array = SensorArray::uniform(4, 3.0);
  const KinematicState z{1, 6, 2, -1};
  const auto obs = drop(simulate_observations({z}, array, fixtures::noiseless(), 1), 2, 0);
  SagaConfig config;
  config.rho = 1;
  const auto scoring = ChainScoring::nominal(NoiseModel{});
  auto graph = build_graph(obs, array, NoiseModel{}, config);
  EXPECT_EQ(graph.longest_path(), 2);
  add_skip_edges(graph, 1, config, scoring, 6 * 0.3, default_tau_z(array, NoiseModel{}));
  EXPECT_TRUE(graph.has_edge({1, 0}, {3, 0}));
  EXPECT_EQ(graph.longest_path(), 3);

  const auto chain = ga_dfs(graph, {0, 0}, 3, initial_thresholds(0.01, 4), scoring);
  ASSERT_TRUE(chain);
  EXPECT_EQ(chain->size(), 3u);
  EXPECT_EQ(chain->detections.back().sensor, 3);
}

TEST(SkipEdges, SuppressedWhenIntermediatePathAgrees) {
  const auto array = SensorArray::uniform(4, 3.0);
  const auto obs = simulate_observations({{1, 6, 2, -1}}, array, fixtures::noiseless(), 1);
  SagaConfig config;
  config.rho = 2;
  const auto scoring = ChainScoring::nominal(NoiseModel{});
  auto graph = build_graph(obs, array, NoiseModel{}, config);
  add_skip_edges(graph, 1, config, scoring, 6 * 0.3, default_tau_z(array, NoiseModel{}));
  add_skip_edges(graph, 2, config, scoring, 6 * 0.3, default_tau_z(array, NoiseModel{}));
  EXPECT_EQ(graph.edge_count(), 3u);
  EXPECT_GT(graph.counters().fit_evals, 0u);
}

TEST(SkipEdges, AuditOnAdverseScenes) {
  const auto array = SensorArray::uniform(6, 4.0);
  NoiseModel noise;
  noise.p_miss = 0.1;
  const SagaConfig config;
  const double slack = config.gate_slack_sigmas * noise.sigma_r;
  const auto scoring = ChainScoring::nominal(noise);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto targets = simulate_scene(20, {}, std::nullopt, array, seed);
    const auto obs = simulate_observations(targets, array, noise, seed + 100);
    for (int h = 1; h <= config.rho; ++h) {
      auto graph = build_graph(obs, array, noise, config);
      add_skip_edges(graph, h, config, scoring, slack, default_tau_z(array, noise));
      for (int s = 0; s < 6; ++s) {
        for (const auto& node : graph.alive_nodes(s)) {
          for (const auto& e : graph.children(node)) {
            EXPECT_TRUE(e.skip == 0 || e.skip == h);
            EXPECT_EQ(e.to.sensor, s + e.skip + 1);
            EXPECT_TRUE(geometric_gate(graph.detection(node), graph.detection(e.to), array.baseline(s, e.to.sensor),
                                       slack));
          }
        }
      }
    }
  }
}

TEST(GaDfs, SingleNoiselessTarget) {
  const auto array = SensorArray::uniform(6, 4.0);
  const KinematicState z{-2, 5, 3, 1};
  const auto obs = simulate_observations({z}, array, fixtures::noiseless(), 1);
  auto graph = build_graph(obs, array, NoiseModel{}, SagaConfig{});
  const auto scoring = ChainScoring::nominal(NoiseModel{});
  const auto chain = ga_dfs(graph, {0, 0}, 6, initial_thresholds(0.01, 6), scoring);
  ASSERT_TRUE(chain);
  EXPECT_EQ(chain->size(), 6u);
  EXPECT_NEAR(fitting_error(*chain, array, scoring.norm), 0.0, 1e-9);
  EXPECT_GT(graph.counters().fit_evals, 0u);
  EXPECT_EQ(graph.counters().likelihood_evals, 1u);
}

TEST(GaDfs, RejectsPathAboveThreshold) {
  const auto array = SensorArray::uniform(6, 4.0);
  NoiseModel noise;
  const auto obs = simulate_observations({{-2, 5, 3, 1}}, array, noise, 3);
  auto graph = build_graph(obs, array, noise, SagaConfig{});
  auto thresholds = initial_thresholds(0.01, 6);
  thresholds.relax(1e-12);
  SearchTrace trace;
  EXPECT_FALSE(ga_dfs(graph, {0, 0}, 6, thresholds, ChainScoring::nominal(noise), &trace));
  EXPECT_TRUE(trace.threshold_blocked);
  EXPECT_THROW(ga_dfs(graph, {0, 0}, 1, thresholds, ChainScoring::nominal(noise)), std::invalid_argument);
}

TEST(GaDfs, ThreeTargetsMatchExhaustiveEnumeration) {
  const auto array = SensorArray::uniform(4, 3.0);
  const auto scoring = ChainScoring::nominal(kSharp);
  const auto thresholds = initial_thresholds(0.01, 4);
  int scenes = 0;
  for (std::uint64_t seed = 1; scenes < 50; ++seed) {
    std::vector<KinematicState> targets;
    try {
      targets = simulate_scene(3, {}, Separation{0.3, 0.5}, array, seed);
    } catch (const std::runtime_error&) {
      continue;
    }
    ++scenes;
    const auto obs = simulate_observations(targets, array, fixtures::noiseless(), seed);

    // Oracle: every gated full-length path, kept when it passes both tests.
    auto oracle_graph = build_graph(obs, array, kSharp, SagaConfig{});
    std::set<std::vector<std::pair<double, double>>> expected;
    for (const auto& root : oracle_graph.alive_nodes(0)) {
      std::vector<NodeId> path{root};
      std::vector<std::vector<NodeId>> paths;
      enumerate_paths(oracle_graph, path, paths);
      for (const auto& p : paths) {
        const auto chain = oracle_graph.make_chain(p);
        const auto fit = predict_state(chain, array, scoring);
        if (fit && fit->fit_error < thresholds.fit_at(4) && fit->residual < thresholds.likelihood_at(4)) {
          expected.insert(key(chain));
        }
      }
    }
    ASSERT_EQ(expected.size(), 3u) << "seed " << seed;

    auto graph = build_graph(obs, array, kSharp, SagaConfig{});
    std::set<std::vector<std::pair<double, double>>> found;
    for (const auto& root : graph.alive_nodes(0)) {
      const auto chain = ga_dfs(graph, root, 4, thresholds, scoring);
      ASSERT_TRUE(chain) << "seed " << seed;
      EXPECT_GE(pure_label(*chain, obs), 0);
      for (const auto& n : chain->nodes) graph.remove_node(n);
      found.insert(key(*chain));
    }
    EXPECT_EQ(found, expected) << "seed " << seed;
  }
}

TEST(SagaAssociate, RecoversNoiselessWellSeparatedScene) {
  const auto array = SensorArray::uniform(6, 4.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto targets = simulate_scene(20, {}, Separation{0.3, 0.5}, array, seed);
    const auto obs = simulate_observations(targets, array, fixtures::noiseless(), seed);
    const auto result = saga_associate(obs, array, kSharp);
    ASSERT_EQ(result.targets.size(), 20u) << "seed " << seed;
    std::set<int> labels;
    for (const auto& t : result.targets) {
      EXPECT_EQ(t.chain.size(), 6u);
      const int label = pure_label(t.chain, obs);
      EXPECT_GE(label, 0);
      labels.insert(label);
      EXPECT_LT((t.fit.state.vector() - targets[static_cast<std::size_t>(label)].vector()).norm(), 1e-6);
    }
    EXPECT_EQ(labels.size(), 20u);
    expect_invariants(result, 6);
  }
}

TEST(SagaAssociate, AllMissedGivesEmptyResult) {
  const auto array = SensorArray::uniform(6, 4.0);
  NoiseModel noise;
  noise.p_miss = 1.0;
  const auto obs = simulate_observations(simulate_scene(20, {}, std::nullopt, array, 1), array, noise, 2);
  const auto result = saga_associate(obs, array, noise);
  EXPECT_TRUE(result.targets.empty());
  EXPECT_GE(result.rounds, 1);
}

TEST(SagaAssociate, NominalScenesKeepInvariants) {
  const auto array = SensorArray::uniform(6, 4.0);
  NoiseModel noise;
  noise.p_miss = 0.05;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto obs = simulate_observations(simulate_scene(20, {}, std::nullopt, array, seed), array, noise, seed);
    for (int rho : {0, 1, 2, 4}) {
      SagaConfig config;
      config.rho = rho;
      const auto result = saga_associate(obs, array, noise, config);
      expect_invariants(result, config.min_chain_length(6));
      EXPECT_LE(result.rounds, config.max_relaxations);
      EXPECT_GT(result.counters.total(), 0u);
      EXPECT_EQ(count_invariant_violations(result, config.min_chain_length(6)), 0);
    }
  }
}

TEST(SagaAssociate, IndependentOfReportOrder) {
  const auto array = SensorArray::uniform(6, 4.0);
  NoiseModel noise;
  noise.p_miss = 0.05;
  auto obs = simulate_observations(simulate_scene(20, {}, std::nullopt, array, 7), array, noise, 8);
  const auto a = saga_associate(obs, array, noise);
  std::mt19937_64 rng(3);
  for (std::size_t s = 0; s < obs.per_sensor.size(); ++s) {
    std::vector<std::size_t> perm(obs.per_sensor[s].size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto column = obs.per_sensor[s];
    for (std::size_t k = 0; k < perm.size(); ++k) column[k] = obs.per_sensor[s][perm[k]];
    obs.per_sensor[s] = column;
  }
  const auto b = saga_associate(obs, array, noise);
  ASSERT_EQ(a.targets.size(), b.targets.size());
  for (std::size_t i = 0; i < a.targets.size(); ++i) {
    EXPECT_EQ(key(a.targets[i].chain), key(b.targets[i].chain));
  }
  EXPECT_EQ(a.counters.total(), b.counters.total());
}

TEST(SagaAssociate, MissedDetectionsRecoveredThroughSkipEdges) {
  const auto array = SensorArray::uniform(6, 4.0);
  const auto targets = simulate_scene(10, {}, Separation{0.3, 0.5}, array, 11);
  auto obs = simulate_observations(targets, array, fixtures::noiseless(), 12);
  for (int label = 0; label < 10; ++label) obs = drop(obs, 1 + label % 4, label);
  SagaConfig config;
  config.rho = 1;
  const auto result = saga_associate(obs, array, kSharp, config);
  ASSERT_EQ(result.targets.size(), 10u);
  for (const auto& t : result.targets) {
    EXPECT_EQ(t.chain.size(), 5u);
    EXPECT_GE(pure_label(t.chain, obs), 0);
  }
}

TEST(SagaAssociate, NominalOspaBelowSaturation) {
  ExperimentConfig c;
  c.trials = 20;
  const auto r = run_sweep(c, 1);
  ASSERT_EQ(r.summary.size(), 1u);
  EXPECT_LT(r.summary[0].ospa.mean + 3 * r.summary[0].ospa.stderr_, c.d_bar);
}
