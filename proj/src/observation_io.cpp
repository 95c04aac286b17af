#include "rdassoc/observation_io.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

namespace rdassoc {

namespace {

constexpr const char* kMagic = "rdassoc-observations";
constexpr int kVersion = 1;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw ObservationFormatError("observation file line " + std::to_string(line) + ": " + what);
}

}  // namespace

void write_observations(std::ostream& out, const SensorArray& array, const ObservationSet& obs,
                        const std::vector<KinematicState>& targets) {
  if (obs.sensor_count() != array.size()) {
    throw std::invalid_argument("observation set and sensor array disagree on sensor count");
  }
  out << kMagic << ' ' << kVersion << '\n';
  out << "array " << array.size();
  for (int s = 0; s < array.size(); ++s) out << ' ' << format_double(array.position(s));
  out << '\n';
  for (const auto& t : targets) {
    out << "target " << format_double(t.x) << ' ' << format_double(t.y) << ' ' << format_double(t.vx) << ' '
        << format_double(t.vy) << '\n';
  }
  for (int s = 0; s < obs.sensor_count(); ++s) {
    const auto& column = obs.per_sensor[static_cast<std::size_t>(s)];
    for (std::size_t k = 0; k < column.size(); ++k) {
      if (column[k].is_null) continue;
      const int label = obs.has_truth() ? obs.truth_labels[static_cast<std::size_t>(s)][k] : -1;
      out << "detection " << s << ' ' << format_double(column[k].range) << ' ' << format_double(column[k].doppler)
          << ' ' << label << '\n';
    }
  }
}

ObservationFile read_observations(std::istream& in) {
  std::string line;
  int number = 0;
  bool header = false;
  std::optional<SensorArray> array;
  ObservationSet obs;
  std::vector<KinematicState> targets;

  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string tag;
    fields >> tag;
    if (!header) {
      int version = 0;
      if (tag != kMagic || !(fields >> version)) fail(number, "missing header");
      if (version != kVersion) fail(number, "unsupported version " + std::to_string(version));
      header = true;
      continue;
    }
    if (tag == "array") {
      if (array) fail(number, "duplicate array line");
      int n = 0;
      if (!(fields >> n) || n < 2) fail(number, "bad sensor count");
      Eigen::VectorXd positions(n);
      for (int s = 0; s < n; ++s) {
        if (!(fields >> positions(s))) fail(number, "expected " + std::to_string(n) + " sensor positions");
      }
      try {
        array.emplace(positions);
      } catch (const std::invalid_argument& e) {
        fail(number, e.what());
      }
      obs.per_sensor.assign(static_cast<std::size_t>(n), {});
      obs.truth_labels.assign(static_cast<std::size_t>(n), {});
    } else if (tag == "target") {
      KinematicState z;
      if (!(fields >> z.x >> z.y >> z.vx >> z.vy)) fail(number, "target needs x y vx vy");
      targets.push_back(z);
    } else if (tag == "detection") {
      if (!array) fail(number, "detection before array line");
      int sensor = 0;
      Detection det;
      int label = -1;
      if (!(fields >> sensor >> det.range >> det.doppler >> label)) {
        fail(number, "detection needs sensor range doppler label");
      }
      if (sensor < 0 || sensor >= array->size()) fail(number, "sensor index out of range");
      if (!std::isfinite(det.range) || !std::isfinite(det.doppler)) fail(number, "non-finite measurement");
      det.sensor = sensor;
      obs.per_sensor[static_cast<std::size_t>(sensor)].push_back(det);
      obs.truth_labels[static_cast<std::size_t>(sensor)].push_back(label);
    } else {
      fail(number, "unknown record '" + tag + "'");
    }
    std::string extra;
    if (fields >> extra) fail(number, "trailing field '" + extra + "'");
  }
  if (!header) throw ObservationFormatError("observation file is empty");
  if (!array) throw ObservationFormatError("observation file has no array line");
  return {*array, std::move(obs), std::move(targets)};
}

}  // namespace rdassoc
