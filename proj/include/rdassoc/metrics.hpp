#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <vector>

#include "rdassoc/graph.hpp"
#include "rdassoc/kinematics.hpp"
#include "rdassoc/scene.hpp"

namespace rdassoc {

// ---------------------------------------------------------------------------
// Cramer-Rao bounds
// ---------------------------------------------------------------------------

struct RangeDopplerBound {
  double sigma_r2 = 0.0;  // m^2
  double sigma_d2 = 0.0;  // (m/s)^2
};

/// Range and Doppler variance bounds of an FMCW sensor:
/// delta^2 / (kappa * SNR) for each axis.
RangeDopplerBound crb_range_doppler(double snr_db, double kappa, const Resolution& resolution = {});

struct CrbReport {
  double sigma_r2 = 0.0;
  double sigma_d2 = 0.0;
  double crb_p = 0.0;  // trace of the position block of the inverse FIM, m^2
  double crb_v = 0.0;  // trace of the velocity block, (m/s)^2
  double tau_z = 0.0;  // 10 sqrt(crb_p + crb_v)
};

class UnobservableStateError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Fisher information of (x, y, vx, vy) from one range-Doppler pair per sensor.
Eigen::Matrix4d fisher_information(const KinematicState& z, const SensorArray& array, double sigma_r2,
                                   double sigma_d2);

/// Throws UnobservableStateError when the FIM is singular.
CrbReport crb_position_velocity(const KinematicState& z, const SensorArray& array, double sigma_r2,
                                double sigma_d2);

/// Broadside reference target used to set the state-similarity threshold.
inline KinematicState reference_state() { return {0.0, 7.0, 0.0, 0.0}; }

/// tau_z evaluated at reference_state() with the noise model's variances.
double default_tau_z(const SensorArray& array, const NoiseModel& noise);

// ---------------------------------------------------------------------------
// Localization metrics
// ---------------------------------------------------------------------------

struct LocalizationErrors {
  double d_p = 0.0;  // mean squared position error, m^2
  double d_v = 0.0;  // mean squared velocity error, (m/s)^2
  int count = 0;
};

/// Mean over estimates of the squared distance to the nearest truth, computed
/// separately for position and velocity. Zero with count 0 when either set is empty.
LocalizationErrors localization_errors(const std::vector<KinematicState>& estimates,
                                       const std::vector<KinematicState>& truth);

struct OspaOptions {
  enum class Form {
    printed,   // normalized by the number of estimates, squared-distance cost
    standard,  // normalized by max(|estimates|, |truth|), distance cost
  };
  Form form = Form::printed;
  double position_weight = 1.0;
  double velocity_weight = 1.0;
};

/// Combined position-velocity squared distance to the nearest truth.
double nearest_truth_cost(const KinematicState& estimate, const std::vector<KinematicState>& truth,
                          const OspaOptions& options = {});

/// True when the nearest truth lies closer than d_bar in the joint state norm.
bool is_valid_estimate(const KinematicState& estimate, const std::vector<KinematicState>& truth, double d_bar,
                       const OspaOptions& options = {});

/// OSPA with cutoff d_bar. The printed form uses per-estimate nearest-truth
/// matching, valid-estimate cardinality and divides by the number of
/// estimates; with no estimates it saturates at d_bar * sqrt(|truth|).
double ospa(const std::vector<KinematicState>& estimates, const std::vector<KinematicState>& truth, double d_bar,
            const OspaOptions& options = {});

/// Fraction of targets predicted lost for robustness level rho:
/// sum_{k=1}^{min(n_s - 2, rho + 1)} C(n_s, k) p^k (1 - p)^(n_s - k).
double expected_miss(int n_s, int rho, double p_miss);

/// Probability that a target keeps fewer than max(2, n_s - rho) detections,
/// i.e. the loss rate of an association that recovers every recoverable chain.
double recoverable_loss_probability(int n_s, int rho, double p_miss);

struct EvalReport {
  double d_p_rmse = 0.0;
  double d_v_rmse = 0.0;
  double ospa = 0.0;
  int n_valid = 0;
  int n_estimates = 0;
  int cardinality_error = 0;  // n_valid - |truth|
  EvalCounters counters;
};

/// RMSEs are over valid estimates only; `counters` is copied through.
EvalReport evaluate(const std::vector<KinematicState>& estimates, const std::vector<KinematicState>& truth,
                    double d_bar, const EvalCounters& counters = {}, const OspaOptions& options = {});

}  // namespace rdassoc
