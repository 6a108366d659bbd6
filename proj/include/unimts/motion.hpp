#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "unimts/error.hpp"
#include "unimts/quat.hpp"

namespace unimts {

/// Per-joint global positions (meters) and local-to-global orientations.
/// Storage is joint-major: element (v, t) lives at v * frames + t.
struct SkeletonSequence {
  std::size_t joints = 0;
  std::size_t frames = 0;
  double frame_rate = 0.0;
  std::vector<Vec3> positions;
  std::vector<Quaternion> orientations;

  SkeletonSequence() = default;
  SkeletonSequence(std::size_t v, std::size_t t, double fs)
      : joints(v), frames(t), frame_rate(fs), positions(v * t, Vec3{0, 0, 0}),
        orientations(v * t, Quaternion::identity()) {}

  Vec3& position(std::size_t v, std::size_t t) { return positions[v * frames + t]; }
  const Vec3& position(std::size_t v, std::size_t t) const { return positions[v * frames + t]; }
  Quaternion& orientation(std::size_t v, std::size_t t) { return orientations[v * frames + t]; }
  const Quaternion& orientation(std::size_t v, std::size_t t) const {
    return orientations[v * frames + t];
  }

  void validate() const {
    if (frames < 3) throw Error(ErrorKind::TooShort, "skeleton sequence needs at least 3 frames");
    if (!(frame_rate > 0.0) || !std::isfinite(frame_rate))
      throw Error(ErrorKind::BadRate, "frame rate must be positive");
    if (positions.size() != joints * frames || orientations.size() != joints * frames)
      throw Error(ErrorKind::ShapeMismatch, "skeleton storage does not match V x T");
    for (const auto& p : positions)
      for (double c : p)
        if (!std::isfinite(c)) throw Error(ErrorKind::NonFinite, "non-finite joint position");
    for (const auto& q : orientations) require_unit(q);
  }
};

inline constexpr std::size_t kAccelChannels = 3;
inline constexpr std::size_t kImuChannels = 6;

/// C x T x V tensor of inertial channels (ax ay az gx gy gz per joint) plus
/// the joint mask. Element (c, t, v) lives at (c * frames + t) * joints + v.
struct MotionTimeSeries {
  std::size_t channels = kImuChannels;
  std::size_t frames = 0;
  std::size_t joints = 0;
  double sample_rate = 0.0;
  std::vector<double> data;
  std::vector<std::uint8_t> mask;

  MotionTimeSeries() = default;
  MotionTimeSeries(std::size_t c, std::size_t t, std::size_t v, double fs)
      : channels(c), frames(t), joints(v), sample_rate(fs), data(c * t * v, 0.0),
        mask(v, 1) {}

  std::size_t index(std::size_t c, std::size_t t, std::size_t v) const {
    return (c * frames + t) * joints + v;
  }
  double& at(std::size_t c, std::size_t t, std::size_t v) { return data[index(c, t, v)]; }
  double at(std::size_t c, std::size_t t, std::size_t v) const { return data[index(c, t, v)]; }

  bool selected(std::size_t v) const { return mask[v] != 0; }

  /// Channel triple starting at `first_channel` for joint v at frame t.
  Vec3 triple(std::size_t first_channel, std::size_t t, std::size_t v) const {
    return {at(first_channel, t, v), at(first_channel + 1, t, v), at(first_channel + 2, t, v)};
  }
  void set_triple(std::size_t first_channel, std::size_t t, std::size_t v, const Vec3& x) {
    for (std::size_t i = 0; i < 3; ++i) at(first_channel + i, t, v) = x[i];
  }

  /// Shape consistency plus the masked-joints-are-zero invariant.
  void validate() const {
    if (data.size() != channels * frames * joints)
      throw Error(ErrorKind::ShapeMismatch, "time-series storage does not match C x T x V");
    if (mask.size() != joints) throw Error(ErrorKind::ShapeMismatch, "mask length differs from V");
    for (std::size_t v = 0; v < joints; ++v) {
      if (selected(v)) continue;
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t t = 0; t < frames; ++t)
          if (at(c, t, v) != 0.0)
            throw Error(ErrorKind::ShapeMismatch,
                        "masked joint " + std::to_string(v) + " carries nonzero data");
    }
  }
};

}  // namespace unimts
