#pragma once

// Per-joint random rotation augmentation and random joint masking.

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "unimts/error.hpp"
#include "unimts/motion.hpp"
#include "unimts/quat.hpp"
#include "unimts/rng.hpp"

namespace unimts {

struct JointMask {
  std::size_t joints = 0;
  std::vector<std::size_t> selected;  // sorted, distinct

  bool contains(std::size_t v) const {
    return std::binary_search(selected.begin(), selected.end(), v);
  }

  void validate() const {
    if (selected.empty() || selected.size() > joints)
      throw Error(ErrorKind::BadRange, "mask must select between 1 and V joints");
    for (std::size_t i = 0; i < selected.size(); ++i) {
      if (selected[i] >= joints) throw Error(ErrorKind::BadRange, "mask joint out of range");
      if (i > 0 && selected[i] <= selected[i - 1])
        throw Error(ErrorKind::BadRange, "mask joints must be sorted and distinct");
    }
  }
};

/// Left-multiplies the accel triple and the gyro triple of joint v by
/// rotations[v].matrix at every frame.
inline MotionTimeSeries rotate_augment_with(const MotionTimeSeries& x,
                                            std::span<const Rotation> rotations) {
  if (rotations.size() != x.joints)
    throw Error(ErrorKind::ShapeMismatch, "need exactly one rotation per joint");
  if (x.channels != kImuChannels)
    throw Error(ErrorKind::ShapeMismatch, "rotation augmentation expects 6 channels");
  MotionTimeSeries out = x;
  for (std::size_t v = 0; v < x.joints; ++v) {
    const Mat3& r = rotations[v].matrix;
    for (std::size_t t = 0; t < x.frames; ++t) {
      out.set_triple(0, t, v, mat_vec(r, x.triple(0, t, v)));
      out.set_triple(3, t, v, mat_vec(r, x.triple(3, t, v)));
    }
  }
  return out;
}

/// One uniform rotation per joint, in joint order.
inline std::vector<Rotation> sample_joint_rotations(std::size_t joints, Rng& rng) {
  std::vector<Rotation> out;
  out.reserve(joints);
  for (std::size_t v = 0; v < joints; ++v) out.push_back(sample_uniform_rotation(rng));
  return out;
}

struct RotationAugmented {
  MotionTimeSeries series;
  std::vector<Rotation> rotations;
};

/// Samples R_v ~ Uniform(SO(3)) for every joint and applies it to all frames.
/// Rotations are drawn for masked joints too, so the number of draws depends
/// only on V.
inline RotationAugmented rotate_augment(const MotionTimeSeries& x, Rng& rng) {
  auto rotations = sample_joint_rotations(x.joints, rng);
  auto series = rotate_augment_with(x, rotations);
  return {std::move(series), std::move(rotations)};
}

/// k ~ Uniform{min_k..max_k}, then k distinct joints uniformly without
/// replacement (partial Fisher-Yates).
inline JointMask sample_joint_mask(std::size_t joints, std::size_t min_k, std::size_t max_k,
                                   Rng& rng) {
  if (min_k < 1 || min_k > max_k || max_k > joints)
    throw Error(ErrorKind::BadRange, "need 1 <= min_k <= max_k <= V");
  const std::size_t k = min_k + rng.below(max_k - min_k + 1);
  std::vector<std::size_t> pool(joints);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(joints - i);
    std::swap(pool[i], pool[j]);
  }
  JointMask mask{joints, {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k)}};
  std::sort(mask.selected.begin(), mask.selected.end());
  return mask;
}

inline JointMask full_mask(std::size_t joints) {
  JointMask mask{joints, std::vector<std::size_t>(joints)};
  std::iota(mask.selected.begin(), mask.selected.end(), std::size_t{0});
  return mask;
}

/// X ⊙ M: zeroes every channel of unselected joints and records the mask.
inline MotionTimeSeries apply_mask(const MotionTimeSeries& x, const JointMask& m) {
  if (m.joints != x.joints) throw Error(ErrorKind::ShapeMismatch, "mask V differs from series V");
  m.validate();
  MotionTimeSeries out = x;
  for (std::size_t v = 0; v < x.joints; ++v) {
    const bool keep = m.contains(v);
    out.mask[v] = keep ? 1 : 0;
    if (keep) continue;
    for (std::size_t c = 0; c < x.channels; ++c)
      for (std::size_t t = 0; t < x.frames; ++t) out.at(c, t, v) = 0.0;
  }
  return out;
}

}  // namespace unimts
