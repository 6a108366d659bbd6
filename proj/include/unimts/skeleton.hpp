#pragma once

// Skeleton graph structure and the partitioned, normalized adjacency stacks
// used by spatial graph convolution.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "unimts/error.hpp"

namespace unimts {

using Edge = std::pair<std::size_t, std::size_t>;  // (parent, child)

/// Kinematic tree: joint names plus parent indices (-1 marks the root).
struct SkeletonStructure {
  std::vector<std::string> names;
  std::vector<int> parents;

  std::size_t joints() const { return parents.size(); }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (std::size_t v = 0; v < parents.size(); ++v)
      if (parents[v] >= 0) out.emplace_back(static_cast<std::size_t>(parents[v]), v);
    return out;
  }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t v = 0; v < names.size(); ++v)
      if (names[v] == name) return v;
    return std::nullopt;
  }

  /// Connected tree: one root, every other joint reaches it without cycles.
  void validate() const {
    const std::size_t v_count = parents.size();
    if (v_count == 0) throw Error(ErrorKind::BadConfig, "skeleton has no joints");
    if (names.size() != v_count) throw Error(ErrorKind::BadConfig, "one name per joint required");
    std::size_t roots = 0;
    for (std::size_t v = 0; v < v_count; ++v) {
      if (parents[v] < 0) {
        ++roots;
        continue;
      }
      if (static_cast<std::size_t>(parents[v]) >= v_count || static_cast<std::size_t>(parents[v]) == v)
        throw Error(ErrorKind::BadConfig, "joint " + std::to_string(v) + " has an invalid parent");
    }
    if (roots != 1) throw Error(ErrorKind::BadConfig, "skeleton must have exactly one root");
    for (std::size_t v = 0; v < v_count; ++v) {
      std::size_t steps = 0;
      for (int cur = static_cast<int>(v); parents[static_cast<std::size_t>(cur)] >= 0;
           cur = parents[static_cast<std::size_t>(cur)]) {
        if (++steps > v_count) throw Error(ErrorKind::BadConfig, "skeleton parents form a cycle");
      }
    }
  }

  /// FNV-1a over the joint count and parent table; names do not matter.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t x) {
      for (int i = 0; i < 8; ++i) {
        h ^= (x >> (8 * i)) & 0xFF;
        h *= 0x100000001b3ULL;
      }
    };
    mix(parents.size());
    for (int p : parents) mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(p)));
    return h;
  }
};

/// The 22-joint SMPL body tree.
inline SkeletonStructure smpl22() {
  return {{"pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee", "spine2",
           "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot", "neck",
           "left_collar", "right_collar", "head", "left_shoulder", "right_shoulder",
           "left_elbow", "right_elbow", "left_wrist", "right_wrist"},
          {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19}};
}

/// Straight chain 0-1-...-(n-1).
inline SkeletonStructure chain_skeleton(std::size_t n) {
  SkeletonStructure s;
  for (std::size_t v = 0; v < n; ++v) {
    s.names.push_back("j" + std::to_string(v));
    s.parents.push_back(static_cast<int>(v) - 1);
  }
  return s;
}

enum class Partition : std::uint32_t { Uniform = 0, Distance = 1 };

constexpr std::size_t partition_kernels(Partition p) { return p == Partition::Uniform ? 1 : 2; }

inline constexpr double kAdjacencyAlpha = 0.001;

/// Stacked 0/1 adjacency matrices A_k (row-major V x V), their normalizers
/// Λ_k^{ii} = Σ_l A_k^{il} + α, and Λ_k^{-1/2} A_k Λ_k^{-1/2}.
struct AdjacencySet {
  std::size_t joints = 0;
  Partition partition = Partition::Distance;
  std::vector<std::vector<double>> a;
  std::vector<std::vector<double>> lambda;
  std::vector<std::vector<double>> normalized;

  std::size_t kernels() const { return a.size(); }
  double at(std::size_t k, std::size_t i, std::size_t l) const { return a[k][i * joints + l]; }
};

/// Builds partitions for an arbitrary undirected edge list.
///  - Uniform (K_s = 1): A_1 = I + adjacency.
///  - Distance (K_s = 2): A_1 = I, A_2 = adjacency.
inline AdjacencySet build_adjacency(std::size_t joints, const std::vector<Edge>& edges,
                                    Partition partition, std::size_t kernels) {
  if (kernels != partition_kernels(partition))
    throw Error(ErrorKind::BadStrategy,
                "partition strategy expects K_s = " + std::to_string(partition_kernels(partition)) +
                    ", got " + std::to_string(kernels));
  AdjacencySet adj;
  adj.joints = joints;
  adj.partition = partition;
  adj.a.assign(kernels, std::vector<double>(joints * joints, 0.0));
  std::vector<double>& neighbors = adj.a[kernels - 1];
  for (const auto& [p, c] : edges) {
    if (p >= joints || c >= joints || p == c)
      throw Error(ErrorKind::BadConfig, "edge refers to an invalid joint");
    neighbors[p * joints + c] = 1.0;
    neighbors[c * joints + p] = 1.0;
  }
  for (std::size_t i = 0; i < joints; ++i) adj.a[0][i * joints + i] = 1.0;

  adj.lambda.assign(kernels, std::vector<double>(joints, kAdjacencyAlpha));
  adj.normalized.assign(kernels, std::vector<double>(joints * joints, 0.0));
  for (std::size_t k = 0; k < kernels; ++k) {
    for (std::size_t i = 0; i < joints; ++i)
      for (std::size_t l = 0; l < joints; ++l) adj.lambda[k][i] += adj.a[k][i * joints + l];
    for (std::size_t i = 0; i < joints; ++i)
      for (std::size_t l = 0; l < joints; ++l)
        adj.normalized[k][i * joints + l] =
            adj.a[k][i * joints + l] / std::sqrt(adj.lambda[k][i] * adj.lambda[k][l]);
  }
  return adj;
}

inline AdjacencySet build_adjacency(const SkeletonStructure& skeleton, Partition partition,
                                    std::size_t kernels) {
  skeleton.validate();
  return build_adjacency(skeleton.joints(), skeleton.edges(), partition, kernels);
}

}  // namespace unimts
