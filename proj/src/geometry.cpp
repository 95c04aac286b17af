#include "rdassoc/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace rdassoc {

namespace {

struct ChainColumns {
  ChainVector l;
  ChainVector r;
  ChainVector d;
};

ChainColumns gather(const Chain& chain, const SensorArray& array) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  if (n < 2) throw std::invalid_argument("chain needs at least two detections");
  if (n > kMaxSensors) throw std::invalid_argument("chain longer than kMaxSensors");
  ChainColumns c;
  c.l.resize(n);
  c.r.resize(n);
  c.d.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& det = chain.detections[static_cast<std::size_t>(i)];
    c.l(i) = array.position(det.sensor);
    c.r(i) = det.range;
    c.d(i) = det.doppler;
  }
  const ChainVector centered = (c.l.array() - c.l.mean()).matrix();
  if (!(centered.squaredNorm() > 1e-12 * (1.0 + c.l.squaredNorm()))) {
    throw DegenerateGeometryError("chain sensors are coincident");
  }
  return c;
}

// Regression weights mapping q to minus the slope of q against l.
ChainVector slope_weights(const ChainVector& l) {
  const ChainVector centered = (l.array() - l.mean()).matrix();
  return -centered / centered.squaredNorm();
}

}  // namespace

void validate_chain(const Chain& chain, const SensorArray& array) {
  int previous = -1;
  for (const auto& det : chain.detections) {
    if (det.is_null) throw std::invalid_argument("chain contains a NULL detection");
    if (det.sensor < 0 || det.sensor >= array.size()) throw std::invalid_argument("sensor index out of range");
    if (det.sensor <= previous) throw std::invalid_argument("chain sensors must be strictly increasing");
    previous = det.sensor;
  }
  if (!chain.nodes.empty() && chain.nodes.size() != chain.detections.size()) {
    throw std::invalid_argument("chain node list does not match its detections");
  }
}

FitNormalization FitNormalization::conservative(const NoiseModel& noise, const MeasurementLimits& limits) {
  const double sr2 = noise.sigma_r2();
  const double sd2 = noise.sigma_d2();
  const double rmax2 = limits.max_range * limits.max_range;
  const double dmax2 = limits.max_doppler * limits.max_doppler;
  return {sr2 * dmax2 + rmax2 * sd2 + sr2 * sd2, 4.0 * rmax2 * sr2};
}

ChainScoring ChainScoring::nominal(const NoiseModel& noise, const MeasurementLimits& limits, double alpha) {
  noise.validate_for_scoring();
  return {FitNormalization::conservative(noise, limits), noise.sigma_r, noise.sigma_d, alpha};
}

Eigen::MatrixXd residual_projector(const Eigen::VectorXd& sensor_x) {
  const Eigen::Index n = sensor_x.size();
  Eigen::MatrixXd h(n, 2);
  h.col(0) = sensor_x;
  h.col(1).setOnes();
  const Eigen::Matrix2d normal = h.transpose() * h;
  return Eigen::MatrixXd::Identity(n, n) - h * normal.inverse() * h.transpose();
}

LinearFeatures fit_linear_features(const Chain& chain, const SensorArray& array) {
  const auto c = gather(chain, array);
  const ChainVector u = slope_weights(c.l);
  const ChainVector q1 = c.r.cwiseProduct(c.d);
  const ChainVector q2 = c.r.cwiseAbs2() - c.l.cwiseAbs2();
  return {u.dot(q2) / 2.0, u.dot(q1)};
}

double fitting_error(const Chain& chain, const SensorArray& array, const FitNormalization& norm) {
  const auto c = gather(chain, array);
  const ChainVector q1 = c.r.cwiseProduct(c.d);
  const ChainVector q2 = c.r.cwiseAbs2() - c.l.cwiseAbs2();
  return line_fit_residual(c.l, q1).squaredNorm() / norm.eta1 +
         line_fit_residual(c.l, q2).squaredNorm() / norm.eta2;
}

std::optional<StateFit> predict_state(const Chain& chain, const SensorArray& array, const ChainScoring& scoring) {
  const auto c = gather(chain, array);
  const auto n = static_cast<double>(c.l.size());
  const ChainVector u = slope_weights(c.l);
  const ChainVector q1 = c.r.cwiseProduct(c.d);
  const ChainVector q2 = c.r.cwiseAbs2() - c.l.cwiseAbs2();

  StateFit fit;
  const double vx = u.dot(q1);
  const double x = u.dot(q2) / 2.0;
  const ChainVector offset = (x - c.l.array()).matrix();
  const double y2 = (c.r.cwiseAbs2() - offset.cwiseAbs2()).mean();
  if (!(y2 > 0.0) || !std::isfinite(y2)) return std::nullopt;
  const double y = std::sqrt(y2);
  const double vy = (q1 - offset * vx).sum() / (n * y);

  fit.state = {x, y, vx, vy};
  fit.s1 = {-vx, q1.mean() + vx * c.l.mean()};
  fit.s2 = {-2.0 * x, q2.mean() + 2.0 * x * c.l.mean()};
  fit.fit_error = line_fit_residual(c.l, q1).squaredNorm() / scoring.norm.eta1 +
                  line_fit_residual(c.l, q2).squaredNorm() / scoring.norm.eta2;
  fit.residual = chain_residual(chain, fit.state, array, scoring.sigma_r, scoring.sigma_d);
  fit.log_likelihood = fit.residual + n * std::log(scoring.alpha / (1.0 - scoring.alpha));
  return fit;
}

double chain_residual(const Chain& chain, const KinematicState& state, const SensorArray& array,
                      double sigma_r, double sigma_d) {
  double sum = 0.0;
  for (const auto& det : chain.detections) {
    const auto p = range_doppler(state, array.position(det.sensor));
    const double er = (p.range - det.range) / sigma_r;
    const double ed = (p.doppler - det.doppler) / sigma_d;
    sum += er * er + ed * ed;
  }
  return sum;
}

double chain_log_likelihood(const Chain& chain, const KinematicState& state, const SensorArray& array,
                            const NoiseModel& noise, double alpha) {
  const double n = static_cast<double>(chain.size());
  return chain_residual(chain, state, array, noise.sigma_r, noise.sigma_d) + n * std::log(alpha / (1.0 - alpha));
}

std::optional<KinematicState> two_detection_state(const Detection& a, double l_a, const Detection& b, double l_b) {
  const double base = l_a - l_b;
  if (base == 0.0) throw DegenerateGeometryError("two detections at the same sensor position");
  KinematicState z;
  z.x = (b.range * b.range - a.range * a.range + l_a * l_a - l_b * l_b) / (2.0 * base);
  z.vx = (b.range * b.doppler - a.range * a.doppler) / base;
  const double y2 = a.range * a.range - (z.x - l_a) * (z.x - l_a);
  if (!(y2 > 0.0) || !std::isfinite(y2)) return std::nullopt;
  z.y = std::sqrt(y2);
  z.vy = (a.range * a.doppler - (z.x - l_a) * z.vx) / z.y;
  return z;
}

GaussNewtonResult gauss_newton_solve(const Chain& chain, const SensorArray& array, const KinematicState& init,
                                     double sigma_r, double sigma_d, const GaussNewtonOptions& options) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  using Residual = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 2 * kMaxSensors, 1>;
  using Jacobian = Eigen::Matrix<double, Eigen::Dynamic, 4, 0, 2 * kMaxSensors, 4>;

  auto residual = [&](const KinematicState& z, Residual& e, Jacobian* jac) {
    e.resize(2 * n);
    if (jac) jac->resize(2 * n, 4);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& det = chain.detections[static_cast<std::size_t>(i)];
      const double l = array.position(det.sensor);
      const auto p = range_doppler(z, l);
      e(2 * i) = (p.range - det.range) / sigma_r;
      e(2 * i + 1) = (p.doppler - det.doppler) / sigma_d;
      if (jac) {
        const auto j = range_doppler_jacobian(z, l);
        jac->row(2 * i) = j.row(0) / sigma_r;
        jac->row(2 * i + 1) = j.row(1) / sigma_d;
      }
    }
  };

  GaussNewtonResult result;
  result.state = init;
  Residual e;
  Jacobian jac;
  residual(init, e, nullptr);
  result.initial_cost = e.squaredNorm();
  result.final_cost = result.initial_cost;
  if (!std::isfinite(result.initial_cost) || !(init.y > 0.0)) return result;

  Eigen::Vector4d z = init.vector();
  double cost = result.initial_cost;
  for (int it = 0; it < options.max_iterations; ++it) {
    residual(KinematicState::from_vector(z), e, &jac);
    const Eigen::Matrix4d normal = jac.transpose() * jac;
    const Eigen::Vector4d rhs = -jac.transpose() * e;
    const Eigen::LDLT<Eigen::Matrix4d> ldlt(normal);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
    const Eigen::Vector4d step = ldlt.solve(rhs);
    if (!step.allFinite()) break;
    if ((normal * step - rhs).norm() > 1e-6 * (1.0 + rhs.norm())) break;  // numerically singular

    double scale = 1.0;
    bool accepted = false;
    Eigen::Vector4d candidate;
    double candidate_cost = cost;
    for (int halving = 0; halving <= options.max_halvings; ++halving, scale *= 0.5) {
      candidate = z + scale * step;
      if (!(candidate(1) > 0.0) || !candidate.allFinite()) continue;
      Residual trial;
      residual(KinematicState::from_vector(candidate), trial, nullptr);
      candidate_cost = trial.squaredNorm();
      if (std::isfinite(candidate_cost) && candidate_cost <= cost) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      result.converged = step.norm() < options.tolerance;
      break;
    }
    z = candidate;
    cost = candidate_cost;
    result.iterations = it + 1;
    if ((scale * step).norm() < options.tolerance) {
      result.converged = true;
      break;
    }
  }
  result.state = KinematicState::from_vector(z);
  result.final_cost = cost;
  return result;
}

KinematicState gauss_newton_refine(const Chain& chain, const SensorArray& array, const KinematicState& init,
                                   const NoiseModel& noise, const GaussNewtonOptions& options) {
  if (chain.size() < 2) return init;
  return gauss_newton_solve(chain, array, init, noise.sigma_r, noise.sigma_d, options).state;
}

std::optional<StateFit> estimate_state(const Chain& chain, const SensorArray& array, const ChainScoring& scoring) {
  auto fit = predict_state(chain, array, scoring);
  if (!fit) return std::nullopt;
  const auto refined = gauss_newton_solve(chain, array, fit->state, scoring.sigma_r, scoring.sigma_d);
  fit->state = refined.state;
  fit->residual = refined.final_cost;
  fit->log_likelihood =
      fit->residual + static_cast<double>(chain.size()) * std::log(scoring.alpha / (1.0 - scoring.alpha));
  return fit;
}

}  // namespace rdassoc
