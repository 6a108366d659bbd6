#pragma once

// Synthesis of local-frame accelerometer and gyroscope signals from skeleton
// trajectories: finite-difference kinematics, Gaussian sensor noise and
// resampling to the model rate.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <span>
#include <thread>
#include <vector>

#include "unimts/error.hpp"
#include "unimts/motion.hpp"
#include "unimts/quat.hpp"
#include "unimts/rng.hpp"

namespace unimts {

/// Uniform-grid derivative of a vector-valued series.
///
/// Interior points use central differences; both ends use second-order
/// one-sided stencils, so the result is exact for polynomials of degree <= 2.
/// With exactly three frames the second derivative falls back to the single
/// available three-point stencil.
template <std::size_t N>
std::vector<std::array<double, N>> differentiate(std::span<const std::array<double, N>> x,
                                                 double fs, int order) {
  const std::size_t n = x.size();
  if (n < 3) throw Error(ErrorKind::TooShort, "differentiation needs at least 3 samples");
  if (!(fs > 0.0)) throw Error(ErrorKind::BadRate, "sample rate must be positive");
  if (order != 1 && order != 2) throw Error(ErrorKind::BadConfig, "derivative order must be 1 or 2");

  std::vector<std::array<double, N>> out(n);
  if (order == 1) {
    const double h = 0.5 * fs;
    for (std::size_t i = 0; i < N; ++i) {
      out[0][i] = (-3.0 * x[0][i] + 4.0 * x[1][i] - x[2][i]) * h;
      for (std::size_t t = 1; t + 1 < n; ++t) out[t][i] = (x[t + 1][i] - x[t - 1][i]) * h;
      out[n - 1][i] = (3.0 * x[n - 1][i] - 4.0 * x[n - 2][i] + x[n - 3][i]) * h;
    }
    return out;
  }

  const double h2 = fs * fs;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t t = 1; t + 1 < n; ++t)
      out[t][i] = (x[t + 1][i] - 2.0 * x[t][i] + x[t - 1][i]) * h2;
    if (n >= 4) {
      out[0][i] = (2.0 * x[0][i] - 5.0 * x[1][i] + 4.0 * x[2][i] - x[3][i]) * h2;
      out[n - 1][i] =
          (2.0 * x[n - 1][i] - 5.0 * x[n - 2][i] + 4.0 * x[n - 3][i] - x[n - 4][i]) * h2;
    } else {
      out[0][i] = out[1][i];
      out[n - 1][i] = out[1][i];
    }
  }
  return out;
}

namespace detail {

inline void check_joint(const SkeletonSequence& seq, std::size_t joint) {
  if (joint >= seq.joints)
    throw Error(ErrorKind::BadRange, "joint index " + std::to_string(joint) + " out of range");
}

inline std::vector<Vec3> joint_positions(const SkeletonSequence& seq, std::size_t joint) {
  const auto first = seq.positions.begin() + static_cast<std::ptrdiff_t>(joint * seq.frames);
  return {first, first + static_cast<std::ptrdiff_t>(seq.frames)};
}

inline std::span<const Quaternion> joint_orientations(const SkeletonSequence& seq,
                                                      std::size_t joint) {
  return std::span<const Quaternion>(seq.orientations).subspan(joint * seq.frames, seq.frames);
}

inline std::vector<Vec3> to_local(const SkeletonSequence& seq, std::size_t joint,
                                  const std::vector<Vec3>& global) {
  const auto qs = joint_orientations(seq, joint);
  std::vector<Vec3> out(global.size());
  for (std::size_t t = 0; t < global.size(); ++t) out[t] = rotate_global_to_local(qs[t], global[t]);
  return out;
}

}  // namespace detail

/// Local-frame linear velocity, v = q* ⊗ p' ⊗ q.
inline std::vector<Vec3> linear_velocity(const SkeletonSequence& seq, std::size_t joint) {
  detail::check_joint(seq, joint);
  const auto p = detail::joint_positions(seq, joint);
  return detail::to_local(seq, joint, differentiate<3>(p, seq.frame_rate, 1));
}

inline constexpr Vec3 kDefaultGravity = {0.0, 0.0, -9.81};

/// Local-frame linear acceleration, a = q* ⊗ p'' ⊗ q. The pure kinematic
/// form carries no gravity; `gravity` adds q* ⊗ g ⊗ q on request.
inline std::vector<Vec3> linear_acceleration(const SkeletonSequence& seq, std::size_t joint,
                                             bool gravity = false,
                                             const Vec3& g = kDefaultGravity) {
  detail::check_joint(seq, joint);
  auto p = differentiate<3>(detail::joint_positions(seq, joint), seq.frame_rate, 2);
  if (gravity)
    for (auto& a : p)
      for (int i = 0; i < 3; ++i) a[i] += g[i];
  return detail::to_local(seq, joint, p);
}

/// Local-frame angular velocity, the vector part of 2 q* ⊗ q'.
/// The scalar part is returned through `scalar_residual` when requested; it
/// vanishes for exactly unit-norm curves.
inline std::vector<Vec3> angular_velocity(const SkeletonSequence& seq, std::size_t joint,
                                          std::vector<double>* scalar_residual = nullptr) {
  detail::check_joint(seq, joint);
  const auto qs = enforce_continuity(detail::joint_orientations(seq, joint));
  std::vector<std::array<double, 4>> raw(qs.size());
  for (std::size_t t = 0; t < qs.size(); ++t) raw[t] = {qs[t].w, qs[t].x, qs[t].y, qs[t].z};
  const auto dq = differentiate<4>(raw, seq.frame_rate, 1);

  std::vector<Vec3> out(qs.size());
  if (scalar_residual) scalar_residual->assign(qs.size(), 0.0);
  for (std::size_t t = 0; t < qs.size(); ++t) {
    const Quaternion qdot{dq[t][0], dq[t][1], dq[t][2], dq[t][3]};
    const Quaternion w = quat_mul(quat_conj(qs[t]), qdot);
    out[t] = {2.0 * w.x, 2.0 * w.y, 2.0 * w.z};
    if (scalar_residual) (*scalar_residual)[t] = 2.0 * w.w;
  }
  return out;
}

struct NoiseParams {
  double sigma_accel = 0.05;  // m/s^2
  double sigma_gyro = 0.005;  // rad/s
};

/// x + n with n ~ N(0, sigma) per channel group, applied to unmasked joints
/// only. Draw order is channel-major, then frame, then joint.
inline MotionTimeSeries add_noise(const MotionTimeSeries& x, double sigma_accel,
                                  double sigma_gyro, Rng& rng) {
  if (sigma_accel < 0.0 || sigma_gyro < 0.0)
    throw Error(ErrorKind::NegativeSigma, "noise standard deviation must be non-negative");
  MotionTimeSeries out = x;
  for (std::size_t c = 0; c < x.channels; ++c) {
    const double sigma = c < kAccelChannels ? sigma_accel : sigma_gyro;
    if (sigma == 0.0) continue;
    for (std::size_t t = 0; t < x.frames; ++t)
      for (std::size_t v = 0; v < x.joints; ++v)
        if (x.selected(v)) out.at(c, t, v) += sigma * rng.normal();
  }
  return out;
}

/// Number of frames produced by resample().
inline std::size_t resampled_length(std::size_t frames, double fs_in, double fs_out) {
  const double span = static_cast<double>(frames - 1) * fs_out / fs_in;
  return static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
}

/// Linear interpolation of a row-major T x k signal onto t' = i / fs_out.
inline std::vector<double> resample(std::span<const double> x, std::size_t width, double fs_in,
                                    double fs_out) {
  if (!(fs_in > 0.0) || !(fs_out > 0.0) || !std::isfinite(fs_in) || !std::isfinite(fs_out))
    throw Error(ErrorKind::BadRate, "sample rates must be positive");
  if (width == 0 || x.size() % width != 0)
    throw Error(ErrorKind::ShapeMismatch, "signal length is not a multiple of its width");
  const std::size_t frames = x.size() / width;
  if (frames < 2) throw Error(ErrorKind::TooShort, "resampling needs at least 2 frames");
  if (fs_in == fs_out) return {x.begin(), x.end()};

  const std::size_t out_frames = resampled_length(frames, fs_in, fs_out);
  std::vector<double> out(out_frames * width);
  for (std::size_t i = 0; i < out_frames; ++i) {
    const double pos = static_cast<double>(i) * fs_in / fs_out;
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    if (lo >= frames - 1) lo = frames - 2;
    const double frac = std::clamp(pos - static_cast<double>(lo), 0.0, 1.0);
    for (std::size_t k = 0; k < width; ++k) {
      const double a = x[lo * width + k];
      const double b = x[(lo + 1) * width + k];
      out[i * width + k] = frac == 0.0 ? a : a + frac * (b - a);
    }
  }
  return out;
}

/// Resamples every (channel, joint) track of a time series.
inline MotionTimeSeries resample(const MotionTimeSeries& x, double fs_out) {
  if (x.sample_rate == fs_out) return x;
  const std::size_t width = x.channels * x.joints;
  // Re-layout C x T x V into T x (C*V) rows.
  std::vector<double> rows(x.frames * width);
  for (std::size_t c = 0; c < x.channels; ++c)
    for (std::size_t t = 0; t < x.frames; ++t)
      for (std::size_t v = 0; v < x.joints; ++v)
        rows[t * width + c * x.joints + v] = x.at(c, t, v);
  const auto res = resample(rows, width, x.sample_rate, fs_out);
  MotionTimeSeries out(x.channels, res.size() / width, x.joints, fs_out);
  out.mask = x.mask;
  for (std::size_t c = 0; c < x.channels; ++c)
    for (std::size_t t = 0; t < out.frames; ++t)
      for (std::size_t v = 0; v < x.joints; ++v)
        out.at(c, t, v) = res[t * width + c * x.joints + v];
  return out;
}

struct SimulationOptions {
  NoiseParams noise;
  double target_fs = 20.0;
  bool gravity = false;
  Vec3 gravity_vector = kDefaultGravity;
};

/// Full physics pass for one sequence: per joint [accel; gyro] channels,
/// Gaussian noise, then resampling to `target_fs`. All joints are selected.
inline MotionTimeSeries simulate_sequence(const SkeletonSequence& seq,
                                          const SimulationOptions& options, Rng& rng) {
  seq.validate();
  MotionTimeSeries raw(kImuChannels, seq.frames, seq.joints, seq.frame_rate);
  for (std::size_t v = 0; v < seq.joints; ++v) {
    const auto accel = linear_acceleration(seq, v, options.gravity, options.gravity_vector);
    const auto gyro = angular_velocity(seq, v);
    for (std::size_t t = 0; t < seq.frames; ++t) {
      raw.set_triple(0, t, v, accel[t]);
      raw.set_triple(3, t, v, gyro[t]);
    }
  }
  auto noisy = add_noise(raw, options.noise.sigma_accel, options.noise.sigma_gyro, rng);
  return resample(noisy, options.target_fs);
}

/// Seed of the noise stream for the sequence at `index` of a batch.
constexpr std::uint64_t sequence_seed(std::uint64_t master, std::uint64_t index) {
  return master ^ index;
}

/// Simulates a batch; results do not depend on `workers` because each
/// sequence draws from its own seed stream.
inline std::vector<MotionTimeSeries> simulate_batch(std::span<const SkeletonSequence> seqs,
                                                    const SimulationOptions& options,
                                                    std::uint64_t master_seed,
                                                    unsigned workers = 1) {
  std::vector<MotionTimeSeries> out(seqs.size());
  auto run = [&](std::size_t i) {
    Rng rng(sequence_seed(master_seed, i));
    out[i] = simulate_sequence(seqs[i], options, rng);
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(seqs.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < seqs.size(); ++i) run(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < seqs.size(); i += workers) run(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace unimts
