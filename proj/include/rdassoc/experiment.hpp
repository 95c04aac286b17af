#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rdassoc/metrics.hpp"
#include "rdassoc/saga.hpp"
#include "rdassoc/scene.hpp"

namespace rdassoc {

enum class Algorithm { saga, saesl, nn, mcf };

std::string_view algorithm_name(Algorithm algorithm);
/// Throws std::invalid_argument for unknown names.
Algorithm parse_algorithm(std::string_view name);

enum class SceneMode {
  well_separated,  // targets resolvable at every sensor, no missed detections
  adverse,         // unconstrained placement with missed detections
};

std::string_view scene_mode_name(SceneMode mode);
SceneMode parse_scene_mode(std::string_view name);

struct ExperimentConfig {
  int n_targets = 20;
  int n_sensors = 6;
  double snr_db = -10.0;
  double array_width_m = 4.0;
  double p_miss = 0.05;
  double false_alarm_rate = 0.0;
  int rho = 4;
  std::vector<Algorithm> algorithms{Algorithm::saga};
  int trials = 10;
  std::uint64_t seed = 1;
  std::string sweep_param;  // empty: a single point
  std::vector<double> sweep_values;
  SceneMode scene_mode = SceneMode::adverse;
  Resolution resolution;
  double kappa = 10.0;
  double d_bar = 5.0;
  double alpha = 0.05;
  double beta = 2.0;
  double p_fa = 0.01;
  bool noiseless = false;  // simulate exact measurements; scoring still uses snr_db
  MeasurementLimits limits;
  SceneBounds bounds;

  /// Throws std::invalid_argument describing the first bad field.
  void validate() const;

  /// Copy with one sweepable parameter set. Throws std::invalid_argument for
  /// names that cannot be swept.
  ExperimentConfig with(std::string_view param, double value) const;

  SensorArray array() const;
  /// Noise model used for scoring.
  NoiseModel noise() const;
  SagaConfig saga_config() const;
};

/// Parameters accepted by ExperimentConfig::with.
const std::vector<std::string>& sweepable_parameters();

nlohmann::json to_json(const ExperimentConfig& config);
/// Overrides fields present in `j`; unknown keys throw std::invalid_argument.
void merge_json(ExperimentConfig& config, const nlohmann::json& j);

/// FNV-1a hash of the canonical JSON form.
std::uint64_t config_hash(const ExperimentConfig& config);

/// Seed of one trial, independent of execution order.
std::uint64_t trial_seed(std::uint64_t base, std::size_t value_index, int trial);

/// Scene and observations of one trial; shared by every algorithm.
struct TrialScene {
  std::vector<KinematicState> targets;
  ObservationSet observations;
};

TrialScene simulate_trial(const ExperimentConfig& config, std::uint64_t seed);

/// Runs one algorithm. Chains carry the sensor columns of `obs`.
AssociationResult run_algorithm(Algorithm algorithm, const ObservationSet& obs, const SensorArray& array,
                                const NoiseModel& noise, const SagaConfig& config);

/// Number of duplicated detections plus chains shorter than `min_length`.
int count_invariant_violations(const AssociationResult& result, int min_length);

/// Shortest chain an algorithm may return under `config`.
int minimum_output_length(Algorithm algorithm, const SagaConfig& config, int n_sensors);

struct TrialResult {
  std::string sweep_param;
  double sweep_value = 0.0;
  int trial_index = 0;
  std::uint64_t seed = 0;
  Algorithm algorithm = Algorithm::saga;
  EvalReport metrics;
  double wall_time_s = 0.0;  // association call only
  std::vector<KinematicState> estimates;
  int invariant_violations = 0;
  bool ok = true;
  std::string error;
};

struct Aggregate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct SweepPoint {
  double sweep_value = 0.0;
  Algorithm algorithm = Algorithm::saga;
  int completed = 0;
  int failed = 0;
  Aggregate ospa, d_p_rmse, d_v_rmse, cardinality_error, likelihood_evals, fit_evals, wall_time_s;
};

struct SweepResult {
  std::vector<TrialResult> trials;  // value-major, then trial, then algorithm
  std::vector<SweepPoint> summary;
};

/// Runs every (sweep value, trial, algorithm). Trials run on `threads`
/// workers; results do not depend on the thread count. A trial that throws
/// is recorded with ok = false.
SweepResult run_sweep(const ExperimentConfig& config, int threads = 1);

/// Mean and standard error of `values`.
Aggregate aggregate(const std::vector<double>& values);

/// CSV with a fixed header; rows of one algorithm.
void write_trials_csv(std::ostream& out, const SweepResult& result, Algorithm algorithm);
nlohmann::json summary_json(const SweepResult& result);

/// Output directory: `requested` when non-empty, else $RDASSOC_OUTPUT_DIR,
/// else "results".
std::filesystem::path output_directory(const std::string& requested);

/// Writes trials_<algorithm>.csv per algorithm, summary.json and
/// manifest.json; returns the written paths.
std::vector<std::filesystem::path> write_sweep_outputs(const std::filesystem::path& dir,
                                                       const ExperimentConfig& config, const SweepResult& result);

}  // namespace rdassoc
