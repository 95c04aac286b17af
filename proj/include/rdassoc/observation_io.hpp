#pragma once

#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "rdassoc/kinematics.hpp"
#include "rdassoc/scene.hpp"

namespace rdassoc {

/// Line-oriented observation file:
///
///   rdassoc-observations 1
///   array <n> <l_0> ... <l_{n-1}>
///   target <x> <y> <vx> <vy>                   (optional, ground truth)
///   detection <sensor> <range> <doppler> <label>
///
/// Blank lines and lines starting with '#' are ignored.
struct ObservationFile {
  SensorArray array;
  ObservationSet observations;
  std::vector<KinematicState> targets;
};

class ObservationFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_observations(std::ostream& out, const SensorArray& array, const ObservationSet& obs,
                        const std::vector<KinematicState>& targets = {});

/// Throws ObservationFormatError naming the offending line.
ObservationFile read_observations(std::istream& in);

}  // namespace rdassoc
