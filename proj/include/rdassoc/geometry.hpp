#pragma once

#include <Eigen/Core>
#include <compare>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rdassoc/kinematics.hpp"
#include "rdassoc/scene.hpp"

namespace rdassoc {

/// Largest chain the fixed-capacity fitting kernels accept.
inline constexpr int kMaxSensors = 32;

using ChainVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxSensors, 1>;

/// Identity of a detection: its sensor and its slot in that sensor's column.
struct NodeId {
  int sensor = 0;
  int slot = 0;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

/// Detections attributed to one target, at strictly increasing sensors.
/// `nodes` is parallel to `detections` when the chain came from an
/// ObservationSet and may be empty for hand-built chains.
struct Chain {
  std::vector<Detection> detections;
  std::vector<NodeId> nodes;

  std::size_t size() const { return detections.size(); }
};

/// Throws std::invalid_argument if the chain has NULL entries, repeated or
/// decreasing sensors, or sensors outside the array.
void validate_chain(const Chain& chain, const SensorArray& array);

class DegenerateGeometryError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Scales of the two fitting-error terms (range-Doppler product, squared range).
struct FitNormalization {
  double eta1 = 1.0;
  double eta2 = 1.0;

  /// Variances of the fit residuals evaluated at the largest range and
  /// Doppler the sensors report.
  static FitNormalization conservative(const NoiseModel& noise, const MeasurementLimits& limits = {});
};

/// Everything needed to score a chain against the measurement model.
struct ChainScoring {
  FitNormalization norm;
  double sigma_r = 0.3;
  double sigma_d = 0.5;
  double alpha = 0.05;

  static ChainScoring nominal(const NoiseModel& noise, const MeasurementLimits& limits = {},
                              double alpha = 0.05);
};

struct LinearFeatures {
  double x = 0.0;
  double vx = 0.0;
};

/// Closed-form state of a chain plus its scores.
struct StateFit {
  KinematicState state;
  double fit_error = 0.0;       // normalized geometric fitting error
  double residual = 0.0;        // quadratic part of the chain likelihood
  double log_likelihood = 0.0;  // residual + n log(alpha / (1 - alpha))
  Eigen::Vector2d s1 = Eigen::Vector2d::Zero();  // (-vx, intercept) of r*d vs sensor x
  Eigen::Vector2d s2 = Eigen::Vector2d::Zero();  // (-2x, intercept) of r^2 - l^2 vs sensor x
};

/// Residual of the least-squares line through (l_i, q_i), i.e.
/// (I - H (H^T H)^{-1} H^T) q with H = [l, 1].
template <typename DerivedL, typename DerivedQ>
ChainVector line_fit_residual(const Eigen::MatrixBase<DerivedL>& l, const Eigen::MatrixBase<DerivedQ>& q) {
  const ChainVector centered = (l.array() - l.mean()).matrix();
  const double sxx = centered.squaredNorm();
  const double slope = centered.dot(q) / sxx;
  return (q.array() - q.mean() - slope * centered.array()).matrix();
}

/// Dense projector I - H (H^T H)^{-1} H^T onto the complement of span{l, 1}.
Eigen::MatrixXd residual_projector(const Eigen::VectorXd& sensor_x);

LinearFeatures fit_linear_features(const Chain& chain, const SensorArray& array);

double fitting_error(const Chain& chain, const SensorArray& array, const FitNormalization& norm);

/// Closed-form state from a chain. Returns nullopt when the implied y^2 is not
/// positive, which marks a geometrically inconsistent association.
std::optional<StateFit> predict_state(const Chain& chain, const SensorArray& array,
                                      const ChainScoring& scoring);

/// Sum of squared normalized range and Doppler residuals of the chain at `state`.
double chain_residual(const Chain& chain, const KinematicState& state, const SensorArray& array,
                      double sigma_r, double sigma_d);

/// Negative log-likelihood of a chain including the per-detection miss penalty.
double chain_log_likelihood(const Chain& chain, const KinematicState& state, const SensorArray& array,
                            const NoiseModel& noise, double alpha = 0.05);

/// Exact state through two detections at distinct sensors; nullopt when the
/// implied y^2 is not positive.
std::optional<KinematicState> two_detection_state(const Detection& a, double l_a, const Detection& b,
                                                  double l_b);

struct GaussNewtonOptions {
  int max_iterations = 20;
  int max_halvings = 8;
  double tolerance = 1e-8;
};

struct GaussNewtonResult {
  KinematicState state;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
};

GaussNewtonResult gauss_newton_solve(const Chain& chain, const SensorArray& array,
                                     const KinematicState& init, double sigma_r, double sigma_d,
                                     const GaussNewtonOptions& options = {});

/// Best-effort refinement of `init`; returns `init` when the normal matrix is
/// singular or an iterate is not finite.
KinematicState gauss_newton_refine(const Chain& chain, const SensorArray& array,
                                   const KinematicState& init, const NoiseModel& noise,
                                   const GaussNewtonOptions& options = {});

/// predict_state followed by gauss_newton_refine; scores are re-evaluated at
/// the refined state.
std::optional<StateFit> estimate_state(const Chain& chain, const SensorArray& array,
                                       const ChainScoring& scoring);

}  // namespace rdassoc
