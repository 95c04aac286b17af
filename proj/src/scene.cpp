#include "rdassoc/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace rdassoc {

SensorArray::SensorArray(Eigen::VectorXd positions) : positions_(std::move(positions)) {
  if (positions_.size() < 2) {
    throw std::invalid_argument("sensor array needs at least two sensors");
  }
  for (Eigen::Index i = 1; i < positions_.size(); ++i) {
    if (!(positions_(i) > positions_(i - 1))) {
      throw std::invalid_argument("sensor positions must be strictly increasing");
    }
  }
}

SensorArray SensorArray::uniform(int count, double width, double center) {
  if (count < 2 || !(width > 0.0)) {
    throw std::invalid_argument("uniform array needs count >= 2 and width > 0");
  }
  return SensorArray(Eigen::VectorXd::LinSpaced(count, center - width / 2, center + width / 2));
}

double SensorArray::baseline(int a, int b) const { return std::abs(positions_(a) - positions_(b)); }

std::size_t ObservationSet::total_detections() const {
  std::size_t n = 0;
  for (const auto& column : per_sensor) n += column.size();
  return n;
}

NoiseModel NoiseModel::from_snr(double snr_db, const Resolution& resolution, double kappa,
                                double p_miss, double false_alarm_rate) {
  const double gain = kappa * std::pow(10.0, snr_db / 10.0);
  NoiseModel m;
  m.sigma_r = resolution.range / std::sqrt(gain);
  m.sigma_d = resolution.doppler / std::sqrt(gain);
  m.p_miss = p_miss;
  m.false_alarm_rate = false_alarm_rate;
  m.snr_db = snr_db;
  m.kappa = kappa;
  return m;
}

void NoiseModel::validate_for_scoring() const {
  if (!(sigma_r > 0.0) || !(sigma_d > 0.0) || !std::isfinite(sigma_r) || !std::isfinite(sigma_d)) {
    throw std::invalid_argument("noise model needs positive finite sigma_r and sigma_d");
  }
}

bool well_separated(const KinematicState& a, const KinematicState& b, const SensorArray& array,
                    const Separation& separation) {
  for (int i = 0; i < array.size(); ++i) {
    const auto pa = range_doppler(a, array.position(i));
    const auto pb = range_doppler(b, array.position(i));
    if (std::abs(pa.range - pb.range) < separation.range &&
        std::abs(pa.doppler - pb.doppler) < separation.doppler) {
      return false;
    }
  }
  return true;
}

std::vector<KinematicState> simulate_scene(int n_targets, const SceneBounds& bounds,
                                           const std::optional<Separation>& separation,
                                           const SensorArray& array, std::uint64_t seed,
                                           int attempt_budget) {
  if (n_targets < 0) throw std::invalid_argument("negative target count");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(bounds.x_min, bounds.x_max);
  std::uniform_real_distribution<double> uy(bounds.y_min, bounds.y_max);
  std::uniform_real_distribution<double> uvx(bounds.vx_min, bounds.vx_max);
  std::uniform_real_distribution<double> uvy(bounds.vy_min, bounds.vy_max);

  std::vector<KinematicState> targets;
  targets.reserve(static_cast<std::size_t>(n_targets));
  int rejected = 0;
  while (static_cast<int>(targets.size()) < n_targets) {
    KinematicState z;
    z.x = ux(rng);
    z.y = uy(rng);
    z.vx = uvx(rng);
    z.vy = uvy(rng);
    const bool ok = !separation || std::all_of(targets.begin(), targets.end(), [&](const auto& other) {
      return well_separated(z, other, array, *separation);
    });
    if (ok) {
      targets.push_back(z);
    } else if (++rejected > attempt_budget) {
      throw std::runtime_error("scene too dense for the separation constraint");
    }
  }
  return targets;
}

ObservationSet simulate_observations(const std::vector<KinematicState>& targets,
                                     const SensorArray& array, const NoiseModel& noise,
                                     std::uint64_t seed, const MeasurementLimits& limits) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::poisson_distribution<int> false_alarms(noise.false_alarm_rate > 0 ? noise.false_alarm_rate : 1.0);

  ObservationSet obs;
  obs.per_sensor.resize(static_cast<std::size_t>(array.size()));
  obs.truth_labels.resize(static_cast<std::size_t>(array.size()));

  for (int i = 0; i < array.size(); ++i) {
    std::vector<Detection> column;
    std::vector<int> labels;
    for (std::size_t k = 0; k < targets.size(); ++k) {
      // Draw every variate unconditionally so the stream does not depend on p_miss.
      const double u = uniform(rng);
      const double wr = unit(rng);
      const double wd = unit(rng);
      if (u < noise.p_miss) continue;
      const auto rd = range_doppler(targets[k], array.position(i));
      column.push_back({rd.range + noise.sigma_r * wr, rd.doppler + noise.sigma_d * wd, i, false});
      labels.push_back(static_cast<int>(k));
    }
    if (noise.false_alarm_rate > 0) {
      const int count = false_alarms(rng);
      for (int f = 0; f < count; ++f) {
        // Range in (0, max_range].
        const double r = limits.max_range * (1.0 - uniform(rng));
        const double d = limits.max_doppler * (2.0 * uniform(rng) - 1.0);
        column.push_back({r, d, i, false});
        labels.push_back(-1);
      }
    }
    std::vector<std::size_t> order(column.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    auto& out = obs.per_sensor[static_cast<std::size_t>(i)];
    auto& out_labels = obs.truth_labels[static_cast<std::size_t>(i)];
    for (std::size_t j : order) {
      out.push_back(column[j]);
      out_labels.push_back(labels[j]);
    }
  }
  return obs;
}

}  // namespace rdassoc
