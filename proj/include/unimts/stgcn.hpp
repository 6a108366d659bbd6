#pragma once

// Spatio-temporal graph convolutional encoder: stacked blocks of
// (spatial graph conv -> ReLU -> K_t x 1 temporal conv -> channel affine ->
// ReLU), graph average pooling, and a linear projection into the embedding
// space shared with text.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "unimts/diff/ops.hpp"
#include "unimts/diff/tape.hpp"
#include "unimts/error.hpp"
#include "unimts/motion.hpp"
#include "unimts/params.hpp"
#include "unimts/rng.hpp"
#include "unimts/skeleton.hpp"

namespace unimts {

struct BlockSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_t = 1;

  bool operator==(const BlockSpec&) const = default;
};

struct EncoderConfig {
  std::vector<BlockSpec> blocks;
  Partition partition = Partition::Distance;
  std::size_t embedding_dim = 64;

  static EncoderConfig defaults() {
    return {{{6, 32, 9}, {32, 64, 9}}, Partition::Distance, 64};
  }

  std::size_t spatial_kernels() const { return partition_kernels(partition); }
  std::size_t output_channels() const { return blocks.back().out_channels; }

  void validate() const {
    if (blocks.empty()) throw Error(ErrorKind::BadConfig, "encoder needs at least one block");
    if (blocks.front().in_channels != kImuChannels)
      throw Error(ErrorKind::BadConfig, "first block must take 6 input channels");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& b = blocks[i];
      if (b.out_channels == 0) throw Error(ErrorKind::BadConfig, "block with zero channels");
      if (b.kernel_t % 2 == 0) throw Error(ErrorKind::BadConfig, "temporal kernel must be odd");
      if (i > 0 && b.in_channels != blocks[i - 1].out_channels)
        throw Error(ErrorKind::BadConfig, "block channel chain is inconsistent");
    }
    if (embedding_dim == 0) throw Error(ErrorKind::BadConfig, "embedding dimension must be positive");
  }

  bool operator==(const EncoderConfig&) const = default;
};

/// Σ_k Φ_k (X · Λ_k^{-1/2} A_k Λ_k^{-1/2}) for x[C x T x V] and
/// phi[K_s x C' x C]; `normalized[k]` is the V x V normalized adjacency.
template <class Real>
diff::Var<Real> spatial_conv(const diff::Var<Real>& x,
                             std::span<const diff::Tensor<Real>> normalized,
                             const diff::Var<Real>& phi) {
  diff::detail::require_rank(x, 3, "spatial_conv");
  diff::detail::require_rank(phi, 3, "spatial_conv");
  const std::size_t c_in = x.shape()[0], frames = x.shape()[1], joints = x.shape()[2];
  const std::size_t kernels = phi.shape()[0], c_out = phi.shape()[1];
  if (phi.shape()[2] != c_in || kernels != normalized.size())
    throw Error(ErrorKind::ShapeMismatch,
                "spatial_conv: weights " + diff::to_string(phi.shape()) + " for input " +
                    diff::to_string(x.shape()));
  auto& tape = x.tape();
  diff::Var<Real> total;
  for (std::size_t k = 0; k < kernels; ++k) {
    if (normalized[k].shape() != diff::Shape{joints, joints})
      throw Error(ErrorKind::ShapeMismatch, "spatial_conv: adjacency does not match V");
    const auto mixed = diff::contract_last(x, tape.constant(normalized[k]));
    const auto weights = diff::reshape(diff::slice(phi, 0, k, 1), {c_out, c_in});
    const auto mapped = diff::matmul(weights, diff::reshape(mixed, {c_in, frames * joints}));
    total = k == 0 ? mapped : diff::add(total, mapped);
  }
  return diff::reshape(total, {c_out, frames, joints});
}

/// K_t x 1 convolution along time with zero padding; weights[C'' x C' x K_t].
template <class Real>
diff::Var<Real> temporal_conv(const diff::Var<Real>& x, const diff::Var<Real>& weights) {
  return diff::conv_kx1(x, weights);
}

/// Mean over joints and the first `valid_frames` frames, per channel.
template <class Real>
diff::Var<Real> global_pool(const diff::Var<Real>& x, std::size_t valid_frames) {
  diff::detail::require_rank(x, 3, "global_pool");
  if (valid_frames < 1 || valid_frames > x.shape()[1])
    throw Error(ErrorKind::BadLength, "valid frame count must lie in [1, T]");
  const auto head = valid_frames == x.shape()[1] ? x : diff::slice(x, 1, 0, valid_frames);
  return diff::mean_axes(head, {1, 2});
}

template <class Real>
diff::Tensor<Real> to_tensor(const MotionTimeSeries& x) {
  diff::Tensor<Real> out(diff::Shape{x.channels, x.frames, x.joints});
  for (std::size_t i = 0; i < x.data.size(); ++i) out[i] = static_cast<Real>(x.data[i]);
  return out;
}

namespace param_names {
inline std::string spatial(std::size_t b) { return "encoder.block" + std::to_string(b) + ".spatial"; }
inline std::string temporal(std::size_t b) { return "encoder.block" + std::to_string(b) + ".temporal"; }
inline std::string affine_scale(std::size_t b) { return "encoder.block" + std::to_string(b) + ".scale"; }
inline std::string affine_shift(std::size_t b) { return "encoder.block" + std::to_string(b) + ".shift"; }
inline constexpr const char* kProjWeight = "encoder.proj.weight";
inline constexpr const char* kProjBias = "encoder.proj.bias";
inline constexpr const char* kLogInvGamma = "log_inv_gamma";
inline constexpr const char* kHeadWeight = "head.weight";
inline constexpr const char* kHeadBias = "head.bias";
}  // namespace param_names

template <class Real>
diff::Tensor<Real> uniform_tensor(diff::Shape shape, double bound, Rng& rng) {
  diff::Tensor<Real> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<Real>((2.0 * rng.uniform() - 1.0) * bound);
  return t;
}

/// The graph encoder g_φ bound to one skeleton and configuration.
template <class Real>
class GraphEncoder {
 public:
  GraphEncoder(EncoderConfig config, const SkeletonStructure& skeleton)
      : config_(std::move(config)),
        adjacency_(build_adjacency(skeleton, config_.partition, config_.spatial_kernels())) {
    config_.validate();
    for (const auto& n : adjacency_.normalized) {
      diff::Tensor<Real> t(diff::Shape{adjacency_.joints, adjacency_.joints});
      for (std::size_t i = 0; i < n.size(); ++i) t[i] = static_cast<Real>(n[i]);
      normalized_.push_back(std::move(t));
    }
  }

  const EncoderConfig& config() const { return config_; }
  const AdjacencySet& adjacency() const { return adjacency_; }
  std::span<const diff::Tensor<Real>> normalized_adjacency() const { return normalized_; }
  std::size_t joints() const { return adjacency_.joints; }

  /// He-uniform convolution weights, Xavier-uniform projection, unit affine
  /// scale and zero shift/bias.
  void init_parameters(ParameterStore<Real>& store, Rng& rng) const {
    const std::size_t ks = config_.spatial_kernels();
    for (std::size_t b = 0; b < config_.blocks.size(); ++b) {
      const auto& blk = config_.blocks[b];
      store.add(param_names::spatial(b),
                uniform_tensor<Real>({ks, blk.out_channels, blk.in_channels},
                                     std::sqrt(6.0 / static_cast<double>(blk.in_channels * ks)), rng));
      store.add(param_names::temporal(b),
                uniform_tensor<Real>({blk.out_channels, blk.out_channels, blk.kernel_t},
                                     std::sqrt(6.0 / static_cast<double>(blk.out_channels * blk.kernel_t)),
                                     rng));
      store.add(param_names::affine_scale(b), diff::Tensor<Real>({blk.out_channels}, Real{1}));
      store.add(param_names::affine_shift(b), diff::Tensor<Real>({blk.out_channels}, Real{0}));
    }
    const std::size_t c = config_.output_channels(), e = config_.embedding_dim;
    store.add(param_names::kProjWeight,
              uniform_tensor<Real>({e, c}, std::sqrt(6.0 / static_cast<double>(c + e)), rng));
    store.add(param_names::kProjBias, diff::Tensor<Real>({e}, Real{0}));
  }

  /// Pooled features before projection, [C_last].
  diff::Var<Real> features(diff::Tape<Real>& tape, ParameterStore<Real>& store,
                           const diff::Tensor<Real>& input, std::size_t valid_frames) const {
    if (input.rank() != 3 || input.extent(0) != kImuChannels || input.extent(2) != joints())
      throw Error(ErrorKind::ShapeMismatch,
                  "encoder input " + diff::to_string(input.shape()) + " does not match 6 x T x " +
                      std::to_string(joints()));
    auto h = tape.constant(input);
    for (std::size_t b = 0; b < config_.blocks.size(); ++b) {
      h = diff::relu(spatial_conv(h, normalized_adjacency(),
                                  tape.parameter(store.at(param_names::spatial(b)))));
      h = temporal_conv(h, tape.parameter(store.at(param_names::temporal(b))));
      h = diff::mul_channel(h, tape.parameter(store.at(param_names::affine_scale(b))));
      h = diff::add_channel(h, tape.parameter(store.at(param_names::affine_shift(b))));
      h = diff::relu(h);
    }
    return global_pool(h, valid_frames);
  }

  /// g_φ(X): [embedding_dim].
  diff::Var<Real> encode(diff::Tape<Real>& tape, ParameterStore<Real>& store,
                         const diff::Tensor<Real>& input, std::size_t valid_frames) const {
    const auto pooled = features(tape, store, input, valid_frames);
    const std::size_t c = config_.output_channels(), e = config_.embedding_dim;
    const auto projected = diff::matmul(tape.parameter(store.at(param_names::kProjWeight)),
                                        diff::reshape(pooled, {c, 1}));
    return diff::add(diff::reshape(projected, {e}), tape.parameter(store.at(param_names::kProjBias)));
  }

  diff::Var<Real> encode(diff::Tape<Real>& tape, ParameterStore<Real>& store,
                         const MotionTimeSeries& x) const {
    return encode(tape, store, to_tensor<Real>(x), x.frames);
  }

 private:
  EncoderConfig config_;
  AdjacencySet adjacency_;
  std::vector<diff::Tensor<Real>> normalized_;
};

}  // namespace unimts
