#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "rdassoc/kinematics.hpp"

namespace rdassoc {

/// Sensors on the x-axis, sorted by position.
class SensorArray {
 public:
  explicit SensorArray(Eigen::VectorXd positions);

  /// `count` equally spaced sensors spanning `width` meters, centered on `center`.
  static SensorArray uniform(int count, double width, double center = 0.0);

  int size() const { return static_cast<int>(positions_.size()); }
  double position(int sensor) const { return positions_(sensor); }
  const Eigen::VectorXd& positions() const { return positions_; }
  double width() const { return positions_(positions_.size() - 1) - positions_(0); }
  double baseline(int a, int b) const;

 private:
  Eigen::VectorXd positions_;
};

/// Rayleigh range and Doppler resolution of a single sensor.
struct Resolution {
  double range = 0.3;    // m
  double doppler = 0.5;  // m/s
};

/// Unambiguous measurement extent of a sensor.
struct MeasurementLimits {
  double max_range = 19.2;    // m
  double max_doppler = 16.0;  // m/s
};

struct Detection {
  double range = 0.0;
  double doppler = 0.0;
  int sensor = 0;
  bool is_null = false;

  static Detection null(int sensor) { return {0.0, 0.0, sensor, true}; }
};

/// Unordered detections per sensor. `truth_labels` mirrors `per_sensor` and
/// holds the generating target index (-1 for false alarms); association code
/// never reads it.
struct ObservationSet {
  std::vector<std::vector<Detection>> per_sensor;
  std::vector<std::vector<int>> truth_labels;

  int sensor_count() const { return static_cast<int>(per_sensor.size()); }
  std::size_t total_detections() const;
  bool has_truth() const { return !truth_labels.empty(); }
};

/// Measurement noise and detection anomalies.
///
/// sigma_r/sigma_d are standard deviations. `false_alarm_rate` is the mean
/// number of spurious detections per sensor per snapshot.
struct NoiseModel {
  double sigma_r = 0.3;
  double sigma_d = 0.5;
  double p_miss = 0.0;
  double false_alarm_rate = 0.0;
  double snr_db = -10.0;
  double kappa = 10.0;

  /// Standard deviations at the range-Doppler Cramer-Rao bound for the given SNR.
  static NoiseModel from_snr(double snr_db, const Resolution& resolution = {}, double kappa = 10.0,
                             double p_miss = 0.0, double false_alarm_rate = 0.0);

  double sigma_r2() const { return sigma_r * sigma_r; }
  double sigma_d2() const { return sigma_d * sigma_d; }

  /// Throws std::invalid_argument unless the model is usable for scoring
  /// (strictly positive deviations).
  void validate_for_scoring() const;
};

/// Uniform sampling box for target states.
struct SceneBounds {
  double x_min = -8.0, x_max = 8.0;
  double y_min = 2.0, y_max = 12.0;
  double vx_min = -10.0, vx_max = 10.0;
  double vy_min = -10.0, vy_max = 10.0;
};

/// Two targets are separated at a sensor if they differ by at least `range`
/// in range or by at least `doppler` in Doppler.
struct Separation {
  double range = 0.3;
  double doppler = 0.5;
};

bool well_separated(const KinematicState& a, const KinematicState& b, const SensorArray& array,
                    const Separation& separation);

/// Draws `n_targets` states uniformly inside `bounds`. When `separation` is
/// set, each new target is rejection-sampled until it is separated from all
/// previous ones at every sensor. Throws std::runtime_error when more than
/// `attempt_budget` draws are rejected.
std::vector<KinematicState> simulate_scene(int n_targets, const SceneBounds& bounds,
                                           const std::optional<Separation>& separation,
                                           const SensorArray& array, std::uint64_t seed,
                                           int attempt_budget = 200000);

/// Noisy, shuffled observations of `targets`, with Bernoulli misses and
/// Poisson false alarms uniform over [0, max_range] x [-max_doppler, max_doppler].
ObservationSet simulate_observations(const std::vector<KinematicState>& targets,
                                     const SensorArray& array, const NoiseModel& noise,
                                     std::uint64_t seed, const MeasurementLimits& limits = {});

}  // namespace rdassoc
