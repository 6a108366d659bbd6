#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unimts/error.hpp"
#include "unimts/skeleton.hpp"

namespace unimts {

/// Device location name -> skeleton joint index.
class DeviceMapping {
 public:
  void add(std::string location, std::size_t joint) {
    if (find(location))
      throw Error(ErrorKind::DuplicateId, "location '" + location + "' is mapped twice");
    entries_.emplace_back(std::move(location), joint);
  }

  std::optional<std::size_t> find(std::string_view location) const {
    for (const auto& [name, joint] : entries_)
      if (name == location) return joint;
    return std::nullopt;
  }

  std::size_t at(std::string_view location) const {
    if (auto j = find(location)) return *j;
    throw Error(ErrorKind::UnknownLocation, "no joint mapped for location '" + std::string(location) + "'");
  }

  void validate(std::size_t joints) const {
    for (const auto& [name, joint] : entries_)
      if (joint >= joints)
        throw Error(ErrorKind::BadConfig, "location '" + name + "' maps to joint " + std::to_string(joint) +
                                              " outside [0, " + std::to_string(joints) + ")");
  }

  const std::vector<std::pair<std::string, std::size_t>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::size_t>> entries_;
};

/// Channel groups a device reports: accelerometer only, or accelerometer
/// plus gyroscope.
enum class DeviceChannels { Accel = 3, AccelGyro = 6 };

/// One device's samples, frame-major: frames x width, width 3 or 6
/// (ax ay az [gx gy gz]).
struct DeviceRecording {
  std::string location;
  DeviceChannels channels = DeviceChannels::AccelGyro;
  std::vector<double> samples;

  std::size_t width() const { return static_cast<std::size_t>(channels); }
  std::size_t frames() const { return samples.size() / width(); }
};

}  // namespace unimts
