#pragma once

#include <Eigen/Core>
#include <cmath>

namespace rdassoc {

/// Planar position and velocity of a point target, in array coordinates.
/// The array lies on the x-axis and targets are in front of it (y > 0).
template <typename Scalar>
struct BasicKinematicState {
  Scalar x{0};
  Scalar y{0};
  Scalar vx{0};
  Scalar vy{0};

  using Vector = Eigen::Matrix<Scalar, 4, 1>;

  Vector vector() const { return Vector(x, y, vx, vy); }

  static BasicKinematicState from_vector(const Vector& v) { return {v(0), v(1), v(2), v(3)}; }

  bool finite() const {
    using std::isfinite;
    return isfinite(x) && isfinite(y) && isfinite(vx) && isfinite(vy);
  }
};

using KinematicState = BasicKinematicState<double>;

template <typename Scalar>
struct BasicRangeDoppler {
  Scalar range{0};
  Scalar doppler{0};
};

using RangeDoppler = BasicRangeDoppler<double>;

/// Range and radial velocity of `z` seen from a sensor at (sensor_x, 0).
template <typename Scalar>
BasicRangeDoppler<Scalar> range_doppler(const BasicKinematicState<Scalar>& z, Scalar sensor_x) {
  using std::sqrt;
  const Scalar dx = z.x - sensor_x;
  const Scalar r = sqrt(dx * dx + z.y * z.y);
  return {r, (dx * z.vx + z.y * z.vy) / r};
}

/// d(range, doppler) / d(x, y, vx, vy).
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 4> range_doppler_jacobian(const BasicKinematicState<Scalar>& z, Scalar sensor_x) {
  using std::sqrt;
  const Scalar dx = z.x - sensor_x;
  const Scalar r = sqrt(dx * dx + z.y * z.y);
  const Scalar d = (dx * z.vx + z.y * z.vy) / r;
  const Scalar cx = dx / r;
  const Scalar cy = z.y / r;

  Eigen::Matrix<Scalar, 2, 4> jac;
  jac << cx, cy, Scalar(0), Scalar(0),
      (z.vx - d * cx) / r, (z.vy - d * cy) / r, cx, cy;
  return jac;
}

}  // namespace rdassoc
