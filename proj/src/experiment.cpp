#include "rdassoc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>

#include "rdassoc/baselines.hpp"

namespace rdassoc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string csv_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

int to_int(double value, std::string_view param) {
  if (value != std::floor(value)) throw std::invalid_argument(std::string(param) + " must be an integer");
  return static_cast<int>(value);
}

}  // namespace

std::string_view algorithm_name(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::saga: return "saga";
    case Algorithm::saesl: return "saesl";
    case Algorithm::nn: return "nn";
    case Algorithm::mcf: return "mcf";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  for (auto a : {Algorithm::saga, Algorithm::saesl, Algorithm::nn, Algorithm::mcf}) {
    if (algorithm_name(a) == name) return a;
  }
  throw std::invalid_argument("unknown algorithm '" + std::string(name) + "' (expected saga, saesl, nn or mcf)");
}

std::string_view scene_mode_name(SceneMode mode) {
  return mode == SceneMode::well_separated ? "well_separated" : "adverse";
}

SceneMode parse_scene_mode(std::string_view name) {
  if (name == "well_separated") return SceneMode::well_separated;
  if (name == "adverse") return SceneMode::adverse;
  throw std::invalid_argument("unknown scene mode '" + std::string(name) + "' (expected well_separated or adverse)");
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(n_targets >= 0, "n_targets must be non-negative");
  require(n_sensors >= 2 && n_sensors <= kMaxSensors, "n_sensors must lie in [2, 32]");
  require(std::isfinite(snr_db), "snr_db must be finite");
  require(array_width_m > 0.0, "array_width_m must be positive");
  require(p_miss >= 0.0 && p_miss <= 1.0, "p_miss must lie in [0, 1]");
  require(false_alarm_rate >= 0.0, "false_alarm_rate must be non-negative");
  require(rho >= 0, "rho must be non-negative");
  require(!algorithms.empty(), "at least one algorithm is required");
  require(trials >= 1, "trials must be positive");
  require(sweep_param.empty() == sweep_values.empty(), "sweep needs both a parameter and values");
  require(resolution.range > 0.0 && resolution.doppler > 0.0, "resolution must be positive");
  require(kappa > 0.0, "kappa must be positive");
  require(d_bar > 0.0, "d_bar must be positive");
  require(alpha > 0.0 && alpha < 0.5, "alpha must lie in (0, 0.5)");
  require(beta > 1.0, "beta must exceed 1");
  require(p_fa > 0.0 && p_fa < 1.0, "p_fa must lie in (0, 1)");
  if (!sweep_param.empty()) {
    for (double v : sweep_values) with(sweep_param, v).validate();
  }
}

const std::vector<std::string>& sweepable_parameters() {
  static const std::vector<std::string> names{"n_targets", "n_sensors", "snr_db",         "array_width_m",
                                              "p_miss",    "rho",       "false_alarm_rate", "kappa"};
  return names;
}

ExperimentConfig ExperimentConfig::with(std::string_view param, double value) const {
  ExperimentConfig c = *this;
  c.sweep_param.clear();
  c.sweep_values.clear();
  if (param == "n_targets") c.n_targets = to_int(value, param);
  else if (param == "n_sensors") c.n_sensors = to_int(value, param);
  else if (param == "snr_db") c.snr_db = value;
  else if (param == "array_width_m") c.array_width_m = value;
  else if (param == "p_miss") c.p_miss = value;
  else if (param == "rho") c.rho = to_int(value, param);
  else if (param == "false_alarm_rate") c.false_alarm_rate = value;
  else if (param == "kappa") c.kappa = value;
  else throw std::invalid_argument("cannot sweep '" + std::string(param) + "'");
  return c;
}

SensorArray ExperimentConfig::array() const { return SensorArray::uniform(n_sensors, array_width_m); }

NoiseModel ExperimentConfig::noise() const {
  const double p = scene_mode == SceneMode::well_separated ? 0.0 : p_miss;
  return NoiseModel::from_snr(snr_db, resolution, kappa, p, false_alarm_rate);
}

SagaConfig ExperimentConfig::saga_config() const {
  SagaConfig c;
  // Chains need at least two detections, which caps the tolerated misses.
  c.rho = std::min(rho, n_sensors - 2);
  c.p_fa = p_fa;
  c.beta = beta;
  c.alpha = alpha;
  c.limits = limits;
  c.resolution = resolution;
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json algos = nlohmann::json::array();
  for (auto a : c.algorithms) algos.push_back(std::string(algorithm_name(a)));
  return {
      {"n_targets", c.n_targets},
      {"n_sensors", c.n_sensors},
      {"snr_db", c.snr_db},
      {"array_width_m", c.array_width_m},
      {"p_miss", c.p_miss},
      {"false_alarm_rate", c.false_alarm_rate},
      {"rho", c.rho},
      {"algorithms", algos},
      {"trials", c.trials},
      {"seed", c.seed},
      {"sweep_param", c.sweep_param},
      {"sweep_values", c.sweep_values},
      {"scene_mode", std::string(scene_mode_name(c.scene_mode))},
      {"resolution", {{"range", c.resolution.range}, {"doppler", c.resolution.doppler}}},
      {"kappa", c.kappa},
      {"d_bar", c.d_bar},
      {"alpha", c.alpha},
      {"beta", c.beta},
      {"p_fa", c.p_fa},
      {"noiseless", c.noiseless},
      {"limits", {{"max_range", c.limits.max_range}, {"max_doppler", c.limits.max_doppler}}},
  };
}

void merge_json(ExperimentConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "n_targets") c.n_targets = value.get<int>();
      else if (key == "n_sensors") c.n_sensors = value.get<int>();
      else if (key == "snr_db") c.snr_db = value.get<double>();
      else if (key == "array_width_m") c.array_width_m = value.get<double>();
      else if (key == "p_miss") c.p_miss = value.get<double>();
      else if (key == "false_alarm_rate") c.false_alarm_rate = value.get<double>();
      else if (key == "rho") c.rho = value.get<int>();
      else if (key == "algorithms" || key == "algorithm") {
        c.algorithms.clear();
        if (value.is_string()) {
          c.algorithms.push_back(parse_algorithm(value.get<std::string>()));
        } else {
          for (const auto& a : value) c.algorithms.push_back(parse_algorithm(a.get<std::string>()));
        }
      } else if (key == "trials") c.trials = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "sweep_param") c.sweep_param = value.get<std::string>();
      else if (key == "sweep_values") c.sweep_values = value.get<std::vector<double>>();
      else if (key == "sweep") {
        c.sweep_param = value.at("param").get<std::string>();
        c.sweep_values = value.at("values").get<std::vector<double>>();
      } else if (key == "scene_mode") c.scene_mode = parse_scene_mode(value.get<std::string>());
      else if (key == "resolution") {
        c.resolution.range = value.value("range", c.resolution.range);
        c.resolution.doppler = value.value("doppler", c.resolution.doppler);
      } else if (key == "kappa") c.kappa = value.get<double>();
      else if (key == "d_bar") c.d_bar = value.get<double>();
      else if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "beta") c.beta = value.get<double>();
      else if (key == "p_fa") c.p_fa = value.get<double>();
      else if (key == "noiseless") c.noiseless = value.get<bool>();
      else if (key == "limits") {
        c.limits.max_range = value.value("max_range", c.limits.max_range);
        c.limits.max_doppler = value.value("max_doppler", c.limits.max_doppler);
      } else {
        throw std::invalid_argument("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad config value: ") + e.what());
  }
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  const std::string text = to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t trial_seed(std::uint64_t base, std::size_t value_index, int trial) {
  std::uint64_t s = splitmix64(base);
  s = splitmix64(s ^ static_cast<std::uint64_t>(value_index));
  return splitmix64(s ^ static_cast<std::uint64_t>(trial));
}

TrialScene simulate_trial(const ExperimentConfig& config, std::uint64_t seed) {
  const SensorArray array = config.array();
  std::optional<Separation> separation;
  if (config.scene_mode == SceneMode::well_separated) {
    separation = Separation{config.resolution.range, config.resolution.doppler};
  }
  TrialScene scene;
  scene.targets = simulate_scene(config.n_targets, config.bounds, separation, array, splitmix64(seed ^ 1));
  NoiseModel noise = config.noise();
  if (config.noiseless) {
    noise.sigma_r = 0.0;
    noise.sigma_d = 0.0;
  }
  scene.observations = simulate_observations(scene.targets, array, noise, splitmix64(seed ^ 2), config.limits);
  return scene;
}

AssociationResult run_algorithm(Algorithm algorithm, const ObservationSet& obs, const SensorArray& array,
                                const NoiseModel& noise, const SagaConfig& config) {
  switch (algorithm) {
    case Algorithm::saga: return saga_associate(obs, array, noise, config);
    case Algorithm::saesl: return saesl_associate(obs, array, noise, config).association;
    case Algorithm::nn: return nn_associate(obs, array, noise, config);
    case Algorithm::mcf: return mcf_associate(obs, array, noise, config);
  }
  throw std::invalid_argument("unknown algorithm");
}

int minimum_output_length(Algorithm algorithm, const SagaConfig& config, int n_sensors) {
  return algorithm == Algorithm::saesl ? 2 : config.min_chain_length(n_sensors);
}

int count_invariant_violations(const AssociationResult& result, int min_length) {
  int violations = 0;
  std::set<NodeId> used;
  for (const auto& t : result.targets) {
    if (static_cast<int>(t.chain.size()) < min_length) ++violations;
    int last_sensor = -1;
    for (const auto& node : t.chain.nodes) {
      if (!used.insert(node).second) ++violations;
      if (node.sensor <= last_sensor) ++violations;
      last_sensor = node.sensor;
    }
  }
  return violations;
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  if (values.empty()) return a;
  const double n = static_cast<double>(values.size());
  for (double v : values) a.mean += v;
  a.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.stderr_ = std::sqrt(ss / (n - 1.0) / n);
  }
  return a;
}

SweepResult run_sweep(const ExperimentConfig& config, int threads) {
  config.validate();
  std::vector<double> values = config.sweep_values;
  const bool swept = !config.sweep_param.empty();
  if (!swept) values = {0.0};

  const std::size_t n_alg = config.algorithms.size();
  const std::size_t per_value = static_cast<std::size_t>(config.trials) * n_alg;
  SweepResult result;
  result.trials.resize(values.size() * per_value);

  const std::size_t jobs = values.size() * static_cast<std::size_t>(config.trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      const std::size_t vi = job / static_cast<std::size_t>(config.trials);
      const int trial = static_cast<int>(job % static_cast<std::size_t>(config.trials));
      const ExperimentConfig point = swept ? config.with(config.sweep_param, values[vi]) : config;
      const std::uint64_t seed = trial_seed(config.seed, vi, trial);

      std::optional<TrialScene> scene;
      std::string scene_error;
      try {
        scene = simulate_trial(point, seed);
      } catch (const std::exception& e) {
        scene_error = e.what();
      }
      const SensorArray array = point.array();
      const NoiseModel noise = point.noise();
      const SagaConfig saga = point.saga_config();

      for (std::size_t ai = 0; ai < n_alg; ++ai) {
        TrialResult& r = result.trials[vi * per_value + static_cast<std::size_t>(trial) * n_alg + ai];
        r.sweep_param = swept ? config.sweep_param : "none";
        r.sweep_value = values[vi];
        r.trial_index = trial;
        r.seed = seed;
        r.algorithm = config.algorithms[ai];
        if (!scene) {
          r.ok = false;
          r.error = scene_error;
          continue;
        }
        try {
          const auto start = std::chrono::steady_clock::now();
          const auto out = run_algorithm(r.algorithm, scene->observations, array, noise, saga);
          r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          r.estimates = out.states();
          r.metrics = evaluate(r.estimates, scene->targets, point.d_bar, out.counters);
          r.invariant_violations =
              count_invariant_violations(out, minimum_output_length(r.algorithm, saga, point.n_sensors));
        } catch (const std::exception& e) {
          r.ok = false;
          r.error = e.what();
        }
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(jobs)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    for (std::size_t ai = 0; ai < n_alg; ++ai) {
      SweepPoint p;
      p.sweep_value = values[vi];
      p.algorithm = config.algorithms[ai];
      std::vector<double> ospa, dp, dv, card, le, fe, wall;
      for (int trial = 0; trial < config.trials; ++trial) {
        const auto& r = result.trials[vi * per_value + static_cast<std::size_t>(trial) * n_alg + ai];
        if (!r.ok) {
          ++p.failed;
          continue;
        }
        ++p.completed;
        ospa.push_back(r.metrics.ospa);
        dp.push_back(r.metrics.d_p_rmse);
        dv.push_back(r.metrics.d_v_rmse);
        card.push_back(r.metrics.cardinality_error);
        le.push_back(static_cast<double>(r.metrics.counters.likelihood_evals));
        fe.push_back(static_cast<double>(r.metrics.counters.fit_evals));
        wall.push_back(r.wall_time_s);
      }
      p.ospa = aggregate(ospa);
      p.d_p_rmse = aggregate(dp);
      p.d_v_rmse = aggregate(dv);
      p.cardinality_error = aggregate(card);
      p.likelihood_evals = aggregate(le);
      p.fit_evals = aggregate(fe);
      p.wall_time_s = aggregate(wall);
      result.summary.push_back(p);
    }
  }
  return result;
}

void write_trials_csv(std::ostream& out, const SweepResult& result, Algorithm algorithm) {
  out << "sweep_param,sweep_value,algorithm,trial,ospa,d_p_rmse,d_v_rmse,cardinality_error,likelihood_evals,"
         "fit_evals,wall_time_s\n";
  for (const auto& r : result.trials) {
    if (r.algorithm != algorithm || !r.ok) continue;
    out << r.sweep_param << ',' << csv_double(r.sweep_value) << ',' << algorithm_name(r.algorithm) << ','
        << r.trial_index << ',' << csv_double(r.metrics.ospa) << ',' << csv_double(r.metrics.d_p_rmse) << ','
        << csv_double(r.metrics.d_v_rmse) << ',' << r.metrics.cardinality_error << ','
        << r.metrics.counters.likelihood_evals << ',' << r.metrics.counters.fit_evals << ','
        << csv_double(r.wall_time_s) << '\n';
  }
}

nlohmann::json summary_json(const SweepResult& result) {
  auto agg = [](const Aggregate& a) { return nlohmann::json{{"mean", a.mean}, {"stderr", a.stderr_}}; };
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : result.summary) {
    points.push_back({
        {"sweep_value", p.sweep_value},
        {"algorithm", std::string(algorithm_name(p.algorithm))},
        {"completed", p.completed},
        {"failed", p.failed},
        {"ospa", agg(p.ospa)},
        {"d_p_rmse", agg(p.d_p_rmse)},
        {"d_v_rmse", agg(p.d_v_rmse)},
        {"cardinality_error", agg(p.cardinality_error)},
        {"likelihood_evals", agg(p.likelihood_evals)},
        {"fit_evals", agg(p.fit_evals)},
        {"wall_time_s", agg(p.wall_time_s)},
    });
  }
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& r : result.trials) {
    if (r.ok) continue;
    failures.push_back({{"sweep_value", r.sweep_value},
                        {"trial", r.trial_index},
                        {"algorithm", std::string(algorithm_name(r.algorithm))},
                        {"error", r.error}});
  }
  return {{"points", points}, {"failures", failures}};
}

std::filesystem::path output_directory(const std::string& requested) {
  if (!requested.empty()) return requested;
  if (const char* env = std::getenv("RDASSOC_OUTPUT_DIR"); env && *env) return env;
  return "results";
}

std::vector<std::filesystem::path> write_sweep_outputs(const std::filesystem::path& dir,
                                                       const ExperimentConfig& config, const SweepResult& result) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto open = [&](const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    written.push_back(path);
    return out;
  };
  nlohmann::json files = nlohmann::json::array();
  for (auto a : config.algorithms) {
    const auto path = dir / ("trials_" + std::string(algorithm_name(a)) + ".csv");
    auto out = open(path);
    write_trials_csv(out, result, a);
    files.push_back(path.filename().string());
  }
  {
    auto out = open(dir / "summary.json");
    out << summary_json(result).dump(2) << '\n';
    files.push_back("summary.json");
  }
  {
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(config)));
    auto out = open(dir / "manifest.json");
    const nlohmann::json manifest{
        {"config", to_json(config)}, {"config_hash", hash}, {"seed", config.seed}, {"files", files}};
    out << manifest.dump(2) << '\n';
  }
  return written;
}

}  // namespace rdassoc
