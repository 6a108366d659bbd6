#pragma once

// Synthetic three-activity dataset on the 22-joint skeleton: every joint
// oscillates (translation along, and rotation about, a class axis) at the
// class frequency, with larger amplitude on the class's driven joint group.
// Acceleration and angular-rate amplitudes are equal across classes, so the
// frequency content and the axis are the distinguishing cues.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "unimts/augment.hpp"
#include "unimts/contrastive.hpp"
#include "unimts/inference.hpp"
#include "unimts/io/embedding_file.hpp"
#include "unimts/io/manifest.hpp"
#include "unimts/io/skeleton_file.hpp"
#include "unimts/motion.hpp"
#include "unimts/physics.hpp"
#include "unimts/rng.hpp"
#include "unimts/skeleton.hpp"
#include "unimts/text_embed.hpp"

namespace unimts::toy {

inline constexpr std::size_t kClasses = 3;
inline constexpr std::size_t kDescriptionsPerClass = 3;
inline constexpr std::array<double, kClasses> kFrequencies = {0.5, 1.5, 3.0};
inline const std::array<std::string, kClasses> kClassNames = {"walking", "waving", "bouncing"};

inline const std::array<std::array<std::string, kDescriptionsPerClass>, kClasses> kDescriptions = {{
    {"a person walks slowly forward", "someone takes slow steps with the legs", "the legs swing in a slow walk"},
    {"a person waves both arms", "someone swings the arms side to side", "the arms wave back and forth"},
    {"a person bounces quickly in place", "someone bobs the upper body rapidly",
     "the torso and head shake up and down fast"},
}};

/// Joints with the larger amplitude for each class (SMPL-22 indices).
inline const std::array<std::vector<std::size_t>, kClasses> kDrivenJoints = {{
    {1, 2, 4, 5, 7, 8, 10, 11},
    {16, 17, 18, 19, 20, 21},
    {0, 3, 6, 9, 12, 13, 14, 15},
}};

struct Options {
  std::size_t train_per_class = 50;
  std::size_t test_per_class = 10;
  double duration = 2.0;         // seconds
  double frame_rate = 40.0;      // Hz, before simulation resamples
  double accel_amplitude = 5.0;  // m/s^2 on driven joints
  double gyro_amplitude = 2.0;   // rad/s on driven joints
  double passive_gain = 0.6;     // amplitude factor on the other joints
  double jitter = 0.1;           // relative frequency/amplitude jitter
  std::size_t dim = 64;
  std::uint64_t seed = 7;
};

/// One skeleton sequence of class `cls`.
inline SkeletonSequence make_sequence(std::size_t cls, const Options& o, Rng& rng) {
  const auto skeleton = smpl22();
  const std::size_t joints = skeleton.joints();
  const auto frames = static_cast<std::size_t>(std::llround(o.duration * o.frame_rate)) + 1;
  SkeletonSequence seq(joints, frames, o.frame_rate);
  Vec3 axis{0.0, 0.0, 0.0};
  axis[cls % 3] = 1.0;
  const double f = kFrequencies[cls] * (1.0 + o.jitter * (2.0 * rng.uniform() - 1.0));
  const double w = 2.0 * std::numbers::pi * f;
  for (std::size_t v = 0; v < joints; ++v) {
    bool driven = false;
    for (auto d : kDrivenJoints[cls]) driven = driven || d == v;
    const double gain = (driven ? 1.0 : o.passive_gain) * (1.0 + o.jitter * (2.0 * rng.uniform() - 1.0));
    const double amp_pos = gain * o.accel_amplitude / (w * w);
    const double amp_rot = gain * o.gyro_amplitude / w;
    const double phase_pos = 2.0 * std::numbers::pi * rng.uniform();
    const double phase_rot = 2.0 * std::numbers::pi * rng.uniform();
    const Vec3 base{0.1 * static_cast<double>(v % 5), 0.1 * static_cast<double>(v % 3), 0.05 * static_cast<double>(v)};
    for (std::size_t t = 0; t < frames; ++t) {
      const double time = static_cast<double>(t) / o.frame_rate;
      const double s = amp_pos * std::sin(w * time + phase_pos);
      seq.position(v, t) = {base[0] + s * axis[0], base[1] + s * axis[1], base[2] + s * axis[2]};
      seq.orientation(v, t) = Quaternion::from_axis_angle(axis, amp_rot * std::sin(w * time + phase_rot));
    }
  }
  return seq;
}

inline std::string description_id(std::size_t cls, std::size_t k) {
  return kClassNames[cls] + "." + std::to_string(k);
}

struct Dataset {
  PretrainData train;
  std::vector<std::size_t> train_labels;
  std::vector<SkeletonSequence> test;
  std::vector<std::size_t> test_labels;
  /// Description embeddings (ids "<class>.<k>") plus one entry per class
  /// name holding the normalized mean of its descriptions.
  TextEmbeddingTable embeddings;
};

/// Fixed orthonormal description vectors: Gram-Schmidt on seeded normals.
inline std::vector<std::vector<double>> orthonormal_vectors(std::size_t count, std::size_t dim, std::uint64_t seed) {
  if (count > dim) throw Error(ErrorKind::BadConfig, "more orthonormal vectors than dimensions");
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  while (out.size() < count) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    for (const auto& u : out) {
      const double d = similarity(v, u);
      for (std::size_t i = 0; i < dim; ++i) v[i] -= d * u[i];
    }
    const double n = std::sqrt(similarity(v, v));
    if (n < 1e-6) continue;
    for (auto& x : v) x /= n;
    out.push_back(std::move(v));
  }
  return out;
}

inline Dataset make_dataset(const Options& o) {
  Dataset d;
  d.embeddings = TextEmbeddingTable(o.dim);
  const auto basis = orthonormal_vectors(kClasses * kDescriptionsPerClass, o.dim, derive_seed(o.seed, {1}));
  for (std::size_t c = 0; c < kClasses; ++c)
    for (std::size_t k = 0; k < kDescriptionsPerClass; ++k)
      d.embeddings.add(description_id(c, k), kDescriptions[c][k], basis[c * kDescriptionsPerClass + k]);
  for (std::size_t c = 0; c < kClasses; ++c) {
    std::vector<double> mean(o.dim, 0.0);
    for (std::size_t k = 0; k < kDescriptionsPerClass; ++k)
      for (std::size_t i = 0; i < o.dim; ++i) mean[i] += basis[c * kDescriptionsPerClass + k][i];
    const double n = std::sqrt(similarity(mean, mean));
    for (auto& x : mean) x /= n;
    d.embeddings.add(kClassNames[c], kClassNames[c], std::move(mean));
  }

  Rng train_rng(derive_seed(o.seed, {2}));
  for (std::size_t i = 0; i < kClasses * o.train_per_class; ++i) {
    const std::size_t c = i % kClasses;
    d.train.sequences.push_back(make_sequence(c, o, train_rng));
    std::vector<Description> ds;
    for (std::size_t k = 0; k < kDescriptionsPerClass; ++k)
      ds.push_back({description_id(c, k), kDescriptions[c][k], k > 0});
    d.train.descriptions.add(std::move(ds));
    d.train_labels.push_back(c);
  }
  Rng test_rng(derive_seed(o.seed, {3}));
  for (std::size_t i = 0; i < kClasses * o.test_per_class; ++i) {
    d.test.push_back(make_sequence(i % kClasses, o, test_rng));
    d.test_labels.push_back(i % kClasses);
  }
  return d;
}

inline std::vector<std::string> class_names() { return {kClassNames.begin(), kClassNames.end()}; }

inline LabelSet labels(const Dataset& d) { return label_set_from_table(class_names(), d.embeddings); }

/// Held-out evaluation views: simulated, rotated per joint with fresh
/// rotations, and masked to `min_k`..`max_k` random joints.
inline std::vector<LabeledSample> test_samples(const Dataset& d, const SimulationOptions& sim, std::uint64_t seed,
                                               std::size_t min_k = 1, std::size_t max_k = 5) {
  const auto simulated = simulate_batch(d.test, sim, derive_seed(seed, {4}));
  std::vector<LabeledSample> out;
  for (std::size_t i = 0; i < simulated.size(); ++i) {
    Rng rot(derive_seed(seed, {5, i}));
    Rng mask(derive_seed(seed, {6, i}));
    auto x = rotate_augment(simulated[i], rot).series;
    x = apply_mask(x, sample_joint_mask(x.joints, min_k, max_k, mask));
    out.push_back({std::move(x), d.test_labels[i]});
  }
  return out;
}

/// Writes the dataset as files: skeletons/*.skel, descriptions/*.txt,
/// embeddings.tsv, mapping.txt (every joint name maps to itself), and the
/// train/ and test/ recording sets with train_manifest.txt and
/// manifest.txt. Recordings hold the rotated channels of 1..5 random
/// joints as "<joint>:ag" devices at the simulation rate.
inline void write_files(const std::filesystem::path& dir, const Dataset& d, const SimulationOptions& sim,
                        std::uint64_t seed) {
  namespace fs = std::filesystem;
  for (const char* sub : {"skeletons", "descriptions", "train", "test"}) fs::create_directories(dir / sub);
  const auto skeleton = smpl22();
  auto stem = [](std::size_t i) {
    std::string s = std::to_string(i);
    return "seq" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
  };
  for (std::size_t i = 0; i < d.train.sequences.size(); ++i) {
    io::write_skeleton_file(dir / "skeletons" / (stem(i) + ".skel"), d.train.sequences[i]);
    io::write_file(dir / "descriptions" / (stem(i) + ".txt"), io::format_descriptions(d.train.descriptions.at(i)));
  }
  io::write_embedding_file(dir / "embeddings.tsv", d.embeddings);
  std::string mapping;
  for (const auto& n : skeleton.names) mapping += n + " " + n + "\n";
  io::write_file(dir / "mapping.txt", mapping);

  auto write_set = [&](const std::vector<SkeletonSequence>& seqs, const std::vector<std::size_t>& labels,
                       const std::string& sub, const std::string& manifest_name, std::uint64_t set_seed) {
    std::string manifest = "mapping mapping.txt\nlabels";
    for (const auto& n : kClassNames) manifest += " " + n;
    manifest += "\n";
    const auto simulated = simulate_batch(seqs, sim, derive_seed(set_seed, {4}));
    for (std::size_t i = 0; i < simulated.size(); ++i) {
      Rng rot(derive_seed(set_seed, {5, i}));
      Rng mask(derive_seed(set_seed, {6, i}));
      const auto x = rotate_augment(simulated[i], rot).series;
      const auto m = sample_joint_mask(x.joints, 1, 5, mask);
      std::vector<DeviceRecording> devices;
      std::string spec;
      for (auto v : m.selected) {
        DeviceRecording rec{skeleton.names[v], DeviceChannels::AccelGyro, {}};
        for (std::size_t t = 0; t < x.frames; ++t)
          for (std::size_t c = 0; c < kImuChannels; ++c) rec.samples.push_back(x.at(c, t, v));
        devices.push_back(std::move(rec));
        spec += (spec.empty() ? "" : ",") + skeleton.names[v] + ":ag";
      }
      const std::string file = sub + "/" + stem(i) + ".txt";
      io::write_file(dir / file, io::format_recording(devices));
      std::string fs_text;
      io::append_real(fs_text, x.sample_rate);
      manifest += "sample " + file + " " + kClassNames[labels[i]] + " " + fs_text + " 1 " + spec + "\n";
    }
    io::write_file(dir / manifest_name, manifest);
  };
  write_set(d.train.sequences, d.train_labels, "train", "train_manifest.txt", derive_seed(seed, {7}));
  write_set(d.test, d.test_labels, "test", "manifest.txt", seed);
}

}  // namespace unimts::toy
