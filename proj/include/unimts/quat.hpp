#pragma once

// Hamilton-convention quaternions, scalar first (w, x, y, z).

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "unimts/error.hpp"
#include "unimts/rng.hpp"

namespace unimts {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static constexpr Quaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }
  static constexpr Quaternion pure(const Vec3& v) { return {0.0, v[0], v[1], v[2]}; }

  /// Rotation by `angle` radians about the unit vector `axis`.
  static Quaternion from_axis_angle(const Vec3& axis, double angle) {
    const double s = std::sin(0.5 * angle);
    return {std::cos(0.5 * angle), axis[0] * s, axis[1] * s, axis[2] * s};
  }

  constexpr Vec3 vec() const { return {x, y, z}; }
  constexpr double norm_sq() const { return w * w + x * x + y * y + z * z; }
  double norm() const { return std::sqrt(norm_sq()); }

  Quaternion normalized() const {
    const double n = norm();
    return {w / n, x / n, y / n, z / n};
  }

  constexpr Quaternion operator-() const { return {-w, -x, -y, -z}; }
  constexpr bool operator==(const Quaternion&) const = default;
};

/// Hamilton product a ⊗ b.
constexpr Quaternion quat_mul(const Quaternion& a, const Quaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

constexpr Quaternion operator*(const Quaternion& a, const Quaternion& b) {
  return quat_mul(a, b);
}

constexpr Quaternion quat_conj(const Quaternion& q) { return {q.w, -q.x, -q.y, -q.z}; }

constexpr double quat_dot(const Quaternion& a, const Quaternion& b) {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

inline constexpr double kUnitTolerance = 1e-6;

inline void require_unit(const Quaternion& q) {
  if (std::abs(q.norm() - 1.0) > kUnitTolerance) {
    throw Error(ErrorKind::NonUnitQuaternion,
                "quaternion norm " + std::to_string(q.norm()) + " is not 1");
  }
}

/// Vector part of q* ⊗ (0, v) ⊗ q: expresses a global-frame vector in the
/// local frame of a local-to-global orientation q.
inline Vec3 rotate_global_to_local(const Quaternion& q, const Vec3& v) {
  require_unit(q);
  return quat_mul(quat_mul(quat_conj(q), Quaternion::pure(v)), q).vec();
}

/// Vector part of q ⊗ (0, v) ⊗ q*.
inline Vec3 rotate_local_to_global(const Quaternion& q, const Vec3& v) {
  require_unit(q);
  return quat_mul(quat_mul(q, Quaternion::pure(v)), quat_conj(q)).vec();
}

/// Matrix R with R·v = q ⊗ v ⊗ q* for unit q.
constexpr Mat3 to_matrix(const Quaternion& q) {
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
           {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
           {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

constexpr Vec3 mat_vec(const Mat3& r, const Vec3& v) {
  return {r[0][0] * v[0] + r[0][1] * v[1] + r[0][2] * v[2],
          r[1][0] * v[0] + r[1][1] * v[1] + r[1][2] * v[2],
          r[2][0] * v[0] + r[2][1] * v[1] + r[2][2] * v[2]};
}

constexpr Mat3 transpose(const Mat3& r) {
  return {{{r[0][0], r[1][0], r[2][0]},
           {r[0][1], r[1][1], r[2][1]},
           {r[0][2], r[1][2], r[2][2]}}};
}

constexpr Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
  return out;
}

constexpr double determinant(const Mat3& r) {
  return r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
         r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
         r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
}

inline constexpr Mat3 kIdentity3 = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

struct Rotation {
  Quaternion quaternion;
  Mat3 matrix = kIdentity3;
};

/// Haar-uniform rotation: a normalized 4-vector of independent standard
/// normals, canonicalized to w >= 0.
inline Rotation sample_uniform_rotation(Rng& rng) {
  Quaternion q;
  double n = 0.0;
  do {
    q = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    n = q.norm();
  } while (n < 1e-12);
  q = {q.w / n, q.x / n, q.y / n, q.z / n};
  if (q.w < 0.0) q = -q;
  return {q, to_matrix(q)};
}

/// Flips q_t to -q_t whenever it points away from q_{t-1}, so the sequence
/// stays on one sheet of the double cover.
inline std::vector<Quaternion> enforce_continuity(std::span<const Quaternion> qs) {
  std::vector<Quaternion> out(qs.begin(), qs.end());
  for (std::size_t t = 1; t < out.size(); ++t) {
    if (quat_dot(out[t - 1], out[t]) < 0.0) out[t] = -out[t];
  }
  return out;
}

}  // namespace unimts
