#include "rdassoc/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace rdassoc {

RangeDopplerBound crb_range_doppler(double snr_db, double kappa, const Resolution& resolution) {
  const double gain = kappa * std::pow(10.0, snr_db / 10.0);
  return {resolution.range * resolution.range / gain, resolution.doppler * resolution.doppler / gain};
}

Eigen::Matrix4d fisher_information(const KinematicState& z, const SensorArray& array, double sigma_r2,
                                   double sigma_d2) {
  const Eigen::Vector2d weights(1.0 / sigma_r2, 1.0 / sigma_d2);
  Eigen::Matrix4d info = Eigen::Matrix4d::Zero();
  for (int i = 0; i < array.size(); ++i) {
    const Eigen::Matrix<double, 2, 4> jac = range_doppler_jacobian(z, array.position(i));
    info.noalias() += jac.transpose() * weights.asDiagonal() * jac;
  }
  return info;
}

CrbReport crb_position_velocity(const KinematicState& z, const SensorArray& array, double sigma_r2,
                                double sigma_d2) {
  if (!(z.y > 0.0)) throw std::invalid_argument("target must lie in front of the array");
  const Eigen::Matrix4d info = fisher_information(z, array, sigma_r2, sigma_d2);
  const Eigen::FullPivLU<Eigen::Matrix4d> lu(info);
  if (!lu.isInvertible() || lu.rcond() < 1e-14) {
    throw UnobservableStateError("Fisher information is singular");
  }
  const Eigen::Matrix4d cov = lu.inverse();
  CrbReport report;
  report.sigma_r2 = sigma_r2;
  report.sigma_d2 = sigma_d2;
  report.crb_p = cov(0, 0) + cov(1, 1);
  report.crb_v = cov(2, 2) + cov(3, 3);
  report.tau_z = 10.0 * std::sqrt(report.crb_p + report.crb_v);
  return report;
}

double default_tau_z(const SensorArray& array, const NoiseModel& noise) {
  return crb_position_velocity(reference_state(), array, noise.sigma_r2(), noise.sigma_d2()).tau_z;
}

namespace {

double squared_position(const KinematicState& a, const KinematicState& b) {
  return (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y);
}

double squared_velocity(const KinematicState& a, const KinematicState& b) {
  return (a.vx - b.vx) * (a.vx - b.vx) + (a.vy - b.vy) * (a.vy - b.vy);
}

}  // namespace

LocalizationErrors localization_errors(const std::vector<KinematicState>& estimates,
                                       const std::vector<KinematicState>& truth) {
  LocalizationErrors out;
  if (estimates.empty() || truth.empty()) return out;
  for (const auto& est : estimates) {
    double best_p = std::numeric_limits<double>::infinity();
    double best_v = std::numeric_limits<double>::infinity();
    for (const auto& t : truth) {
      best_p = std::min(best_p, squared_position(est, t));
      best_v = std::min(best_v, squared_velocity(est, t));
    }
    out.d_p += best_p;
    out.d_v += best_v;
  }
  out.count = static_cast<int>(estimates.size());
  out.d_p /= out.count;
  out.d_v /= out.count;
  return out;
}

double nearest_truth_cost(const KinematicState& estimate, const std::vector<KinematicState>& truth,
                          const OspaOptions& options) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : truth) {
    best = std::min(best, options.position_weight * squared_position(estimate, t) +
                              options.velocity_weight * squared_velocity(estimate, t));
  }
  return best;
}

bool is_valid_estimate(const KinematicState& estimate, const std::vector<KinematicState>& truth, double d_bar,
                       const OspaOptions& options) {
  return std::sqrt(nearest_truth_cost(estimate, truth, options)) < d_bar;
}

double ospa(const std::vector<KinematicState>& estimates, const std::vector<KinematicState>& truth, double d_bar,
            const OspaOptions& options) {
  if (!(d_bar > 0.0)) throw std::invalid_argument("OSPA cutoff must be positive");
  const auto n_truth = static_cast<double>(truth.size());

  if (options.form == OspaOptions::Form::standard) {
    const double denom = std::max(static_cast<double>(estimates.size()), n_truth);
    if (denom == 0.0) return 0.0;
    double sum = 0.0;
    for (const auto& est : estimates) {
      const double d = truth.empty() ? d_bar : std::sqrt(nearest_truth_cost(est, truth, options));
      sum += std::pow(std::min(d, d_bar), 2);
    }
    sum += d_bar * d_bar * std::abs(static_cast<double>(estimates.size()) - n_truth);
    return std::sqrt(sum / denom);
  }

  if (estimates.empty()) return d_bar * std::sqrt(n_truth);
  double sum = 0.0;
  int valid = 0;
  for (const auto& est : estimates) {
    if (truth.empty()) break;
    const double cost = nearest_truth_cost(est, truth, options);
    if (std::sqrt(cost) < d_bar) {
      sum += std::pow(std::min(cost, d_bar), 2);
      ++valid;
    }
  }
  sum += std::abs(valid - n_truth) * d_bar * d_bar;
  return std::sqrt(sum / static_cast<double>(estimates.size()));
}

double expected_miss(int n_s, int rho, double p_miss) {
  if (!(p_miss >= 0.0 && p_miss <= 1.0)) throw std::invalid_argument("p_miss must lie in [0, 1]");
  const int upper = std::min(n_s - 2, rho + 1);
  double sum = 0.0;
  double binom = 1.0;  // C(n_s, k), built incrementally
  for (int k = 1; k <= upper; ++k) {
    binom *= static_cast<double>(n_s - k + 1) / k;
    sum += binom * std::pow(p_miss, k) * std::pow(1.0 - p_miss, n_s - k);
  }
  return sum;
}

double recoverable_loss_probability(int n_s, int rho, double p_miss) {
  if (!(p_miss >= 0.0 && p_miss <= 1.0)) throw std::invalid_argument("p_miss must lie in [0, 1]");
  const int tolerated = std::min(rho, n_s - 2);
  double kept = 0.0;
  double binom = 1.0;
  for (int k = 0; k <= tolerated; ++k) {
    if (k > 0) binom *= static_cast<double>(n_s - k + 1) / k;
    kept += binom * std::pow(p_miss, k) * std::pow(1.0 - p_miss, n_s - k);
  }
  return 1.0 - kept;
}

EvalReport evaluate(const std::vector<KinematicState>& estimates, const std::vector<KinematicState>& truth,
                    double d_bar, const EvalCounters& counters, const OspaOptions& options) {
  EvalReport report;
  report.counters = counters;
  report.n_estimates = static_cast<int>(estimates.size());
  std::vector<KinematicState> valid;
  for (const auto& est : estimates) {
    if (!truth.empty() && is_valid_estimate(est, truth, d_bar, options)) valid.push_back(est);
  }
  report.n_valid = static_cast<int>(valid.size());
  const auto errors = localization_errors(valid, truth);
  report.d_p_rmse = std::sqrt(errors.d_p);
  report.d_v_rmse = std::sqrt(errors.d_v);
  report.ospa = ospa(estimates, truth, d_bar, options);
  report.cardinality_error = report.n_valid - static_cast<int>(truth.size());
  return report;
}

}  // namespace rdassoc
