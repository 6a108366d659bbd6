#pragma once

// Contrastive pre-training of the graph encoder against text embeddings.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "unimts/augment.hpp"
#include "unimts/diff/ops.hpp"
#include "unimts/diff/optim.hpp"
#include "unimts/diff/tape.hpp"
#include "unimts/error.hpp"
#include "unimts/hash.hpp"
#include "unimts/io/checkpoint.hpp"
#include "unimts/io/skeleton_file.hpp"
#include "unimts/io/timeseries_file.hpp"
#include "unimts/model.hpp"
#include "unimts/parallel.hpp"
#include "unimts/physics.hpp"
#include "unimts/rng.hpp"
#include "unimts/text_embed.hpp"

namespace unimts {

inline double similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw Error(ErrorKind::DimMismatch,
                "similarity of " + std::to_string(u.size()) + "- and " + std::to_string(v.size()) + "-dim vectors");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

/// −(1/B) Σ_i log softmax_k(⟨G_i, F_k⟩ · inv_gamma)_i for G, F of shape
/// [B x dim] and a scalar inverse temperature. `symmetric` averages in the
/// text-to-series direction as well.
template <class Real>
diff::Var<Real> contrastive_loss(const diff::Var<Real>& g, const diff::Var<Real>& f,
                                 const diff::Var<Real>& inv_gamma, bool symmetric = false) {
  diff::detail::require_rank(g, 2, "contrastive_loss");
  diff::detail::require_rank(f, 2, "contrastive_loss");
  if (g.shape() != f.shape())
    throw Error(ErrorKind::DimMismatch,
                "contrastive_loss: " + diff::to_string(g.shape()) + " vs " + diff::to_string(f.shape()));
  const std::size_t batch = g.shape()[0];
  std::vector<std::size_t> diagonal(batch);
  std::iota(diagonal.begin(), diagonal.end(), std::size_t{0});
  const auto logits = diff::scale(diff::matmul(g, diff::transpose(f)), inv_gamma);
  auto loss = diff::scale(diff::mean(diff::pick(diff::log_softmax_rows(logits), diagonal)), Real{-1});
  if (symmetric) {
    const auto back = diff::scale(diff::mean(diff::pick(diff::log_softmax_rows(diff::transpose(logits)), diagonal)),
                                  Real{-1});
    loss = diff::scale(diff::add(loss, back), Real{0.5});
  }
  return loss;
}

/// Value-only loss for rows of plain vectors and a fixed γ.
inline double contrastive_loss_value(const std::vector<std::vector<double>>& g,
                                     const std::vector<std::vector<double>>& f, double gamma,
                                     bool symmetric = false) {
  if (g.empty() || g.size() != f.size()) throw Error(ErrorKind::DimMismatch, "contrastive_loss: unpaired rows");
  auto to_tensor = [](const std::vector<std::vector<double>>& rows) {
    diff::Tensor<double> t(diff::Shape{rows.size(), rows.front().size()});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.front().size()) throw Error(ErrorKind::DimMismatch, "ragged embedding rows");
      std::copy(rows[i].begin(), rows[i].end(), t.data() + i * rows.front().size());
    }
    return t;
  };
  diff::Tape<double> tape;
  return contrastive_loss(tape.constant(to_tensor(g)), tape.constant(to_tensor(f)),
                          tape.constant(diff::Tensor<double>::scalar(1.0 / gamma)), symmetric)
      .value()[0];
}

struct TrainConfig {
  std::size_t batch = 64;
  std::size_t epochs = 10;
  double lr = 1e-4;
  std::size_t mask_min = 1;
  std::size_t mask_max = 5;
  std::uint64_t seed = 0;
  bool rotation_augmentation = true;
  bool text_augmentation = true;
  bool symmetric_loss = false;
  bool deterministic = false;
  unsigned workers = 1;
  SimulationOptions simulation;
  double max_inverse_temperature = kMaxInverseTemperature;
  /// Directory for cached simulations; empty keeps them in memory only.
  std::filesystem::path cache_dir;

  void validate(std::size_t joints) const {
    if (batch < 2) throw Error(ErrorKind::BadConfig, "batch size must be at least 2");
    if (!(lr > 0.0)) throw Error(ErrorKind::BadConfig, "learning rate must be positive");
    if (mask_min < 1 || mask_min > mask_max || mask_max > joints)
      throw Error(ErrorKind::BadRange, "mask range must satisfy 1 <= min <= max <= V");
    if (!(max_inverse_temperature > 0.0)) throw Error(ErrorKind::BadConfig, "temperature clamp must be positive");
  }
};

/// Motion sequences with their descriptions, index-aligned.
struct PretrainData {
  std::vector<SkeletonSequence> sequences;
  DescriptionSet descriptions;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double inverse_temperature = 0.0;
};

struct PretrainResult {
  std::vector<EpochMetrics> epochs;
  std::size_t iterations = 0;
};

/// Replaces the per-joint rotation sampler (tests force identities).
using RotationSampler = std::function<std::vector<Rotation>(std::size_t joints, Rng& rng)>;

namespace detail {

enum StreamTag : std::uint64_t { kShuffle = 1, kRotation = 2, kMask = 3, kDescription = 4, kSimulation = 5 };

/// FNV-1a over the exact bits of a skeleton sequence.
inline std::uint64_t sequence_hash(const SkeletonSequence& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t x) {
    for (int i = 0; i < 8; ++i) {
      h ^= (x >> (8 * i)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  };
  mix(s.joints);
  mix(s.frames);
  mix(std::bit_cast<std::uint64_t>(s.frame_rate));
  for (const auto& p : s.positions)
    for (double c : p) mix(std::bit_cast<std::uint64_t>(c));
  for (const auto& q : s.orientations)
    for (double c : {q.w, q.x, q.y, q.z}) mix(std::bit_cast<std::uint64_t>(c));
  return h;
}

/// Cache key: (skeleton content hash, target fs, noise seed) plus the
/// remaining simulation options.
inline std::string simulation_key(const SkeletonSequence& s, const SimulationOptions& o, std::uint64_t noise_seed) {
  std::uint64_t k = sequence_hash(s);
  for (double d : {o.target_fs, o.noise.sigma_accel, o.noise.sigma_gyro, o.gravity ? 1.0 : 0.0, o.gravity_vector[0],
                   o.gravity_vector[1], o.gravity_vector[2]})
    k = mix64(k ^ std::bit_cast<std::uint64_t>(d));
  k = mix64(k ^ noise_seed);
  return hex64(k);
}

}  // namespace detail

/// Simulates every sequence once (noise stream = seed ^ index), reusing
/// cached results under `cache_dir` when present.
inline std::vector<MotionTimeSeries> simulate_dataset(const std::vector<SkeletonSequence>& sequences,
                                                      const SimulationOptions& options, std::uint64_t seed,
                                                      const std::filesystem::path& cache_dir, unsigned workers) {
  if (!cache_dir.empty()) std::filesystem::create_directories(cache_dir);
  std::vector<MotionTimeSeries> out(sequences.size());
  parallel_for(sequences.size(), workers, [&](std::size_t i) {
    const auto noise_seed = sequence_seed(derive_seed(seed, {detail::kSimulation}), i);
    std::filesystem::path cached;
    if (!cache_dir.empty()) {
      cached = cache_dir / (detail::simulation_key(sequences[i], options, noise_seed) + ".umts");
      if (std::filesystem::exists(cached)) {
        out[i] = io::read_timeseries_file(cached);
        return;
      }
    }
    Rng rng(noise_seed);
    out[i] = simulate_sequence(sequences[i], options, rng);
    if (!cached.empty()) {
      const auto tmp = cached.string() + ".tmp" + std::to_string(i);
      io::write_timeseries_file(tmp, out[i], true);
      std::filesystem::rename(tmp, cached);
    }
  });
  return out;
}

/// One augmented, masked training view of a simulated sequence.
inline MotionTimeSeries training_view(const MotionTimeSeries& sim, const TrainConfig& cfg, std::uint64_t iteration,
                                      std::uint64_t slot, const RotationSampler& sampler) {
  MotionTimeSeries x = sim;
  if (cfg.rotation_augmentation) {
    Rng rot(derive_seed(cfg.seed, {detail::kRotation, iteration, slot}));
    const auto rotations = sampler ? sampler(x.joints, rot) : sample_joint_rotations(x.joints, rot);
    x = rotate_augment_with(x, rotations);
  }
  Rng mask_rng(derive_seed(cfg.seed, {detail::kMask, iteration, slot}));
  return apply_mask(x, sample_joint_mask(x.joints, cfg.mask_min, cfg.mask_max, mask_rng));
}

/// Contrastive pre-training (simulate -> noise -> rotate -> mask -> encode
/// -> describe -> loss -> Adam). `table` supplies frozen text embeddings;
/// when null the model's trainable text encoder is used. Writes one metrics
/// line per epoch to `metrics` when given.
template <class Real>
PretrainResult pretrain(Model<Real>& model, const PretrainData& data, const TrainConfig& cfg,
                        const TextEmbeddingTable* table, std::ostream* metrics = nullptr,
                        const RotationSampler& sampler = {}) {
  if (data.sequences.empty()) throw Error(ErrorKind::EmptyDataset, "pre-training dataset is empty");
  if (data.descriptions.size() != data.sequences.size())
    throw Error(ErrorKind::ShapeMismatch, "one description set per sequence required");
  const std::size_t dim = model.encoder.embedding_dim;
  if (table && table->dim() != dim)
    throw Error(ErrorKind::DimMismatch, "text embeddings have dim " + std::to_string(table->dim()) +
                                            ", encoder projects to " + std::to_string(dim));
  if (!table && model.text.mode != TextMode::Trainable)
    throw Error(ErrorKind::BadConfig, "no embedding table and the model has no trainable text encoder");
  cfg.validate(model.skeleton.joints());
  for (const auto& s : data.sequences)
    if (s.joints != model.skeleton.joints())
      throw Error(ErrorKind::ShapeMismatch, "sequence has " + std::to_string(s.joints) + " joints, skeleton has " +
                                                std::to_string(model.skeleton.joints()));

  const unsigned workers = cfg.deterministic ? 1u : std::max(1u, cfg.workers);
  auto simulated = simulate_dataset(data.sequences, cfg.simulation, cfg.seed, cfg.cache_dir, workers);
  model.sample_rate = cfg.simulation.target_fs;
  std::size_t shortest = std::numeric_limits<std::size_t>::max();
  for (const auto& s : simulated) shortest = std::min(shortest, s.frames);
  model.window_frames = shortest;

  // Text rows are resolved up front so a missing id fails before training.
  std::vector<std::vector<const TextEntry*>> text_rows(data.sequences.size());
  if (table)
    for (std::size_t i = 0; i < data.sequences.size(); ++i)
      for (const auto& d : data.descriptions.at(i)) {
        const auto* e = table->find(d.id);
        if (!e) e = table->lookup(d.text);
        if (!e) throw Error(ErrorKind::UnknownId, "no embedding for description '" + d.id + "' (" + d.text + ")");
        text_rows[i].push_back(e);
      }

  const auto encoder = model.graph();
  const auto text_encoder = model.text_encoder();
  if (table) set_text_frozen(model.params, true);
  auto trainable = model.params.all();
  diff::Adam<Real> adam({cfg.lr, 0.9, 0.999, 1e-8});
  auto& log_inv_gamma = model.params.at(param_names::kLogInvGamma);
  const double clamp = std::log(cfg.max_inverse_temperature);

  PretrainResult result;
  std::vector<std::size_t> order(data.sequences.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle(derive_seed(cfg.seed, {detail::kShuffle, epoch}));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t b = std::min(cfg.batch, order.size() - start);
      if (b < 2) continue;
      const std::uint64_t it = result.iterations;
      std::vector<MotionTimeSeries> views(b);
      std::vector<std::size_t> chosen(b);
      parallel_for(b, workers, [&](std::size_t j) {
        const std::size_t idx = order[start + j];
        views[j] = training_view(simulated[idx], cfg, it, j, sampler);
        Rng pick(derive_seed(cfg.seed, {detail::kDescription, it, j}));
        chosen[j] = cfg.text_augmentation ? pick.below(data.descriptions.at(idx).size()) : 0;
      });

      try {
        diff::Tape<Real> tape;
        std::vector<diff::Var<Real>> series, texts;
        for (std::size_t j = 0; j < b; ++j) {
          const std::size_t idx = order[start + j];
          series.push_back(encoder.encode(tape, model.params, views[j]));
          if (table) {
            const auto& vec = text_rows[idx][chosen[j]]->vector;
            diff::Tensor<Real> t(diff::Shape{dim});
            for (std::size_t k = 0; k < dim; ++k) t[k] = static_cast<Real>(vec[k]);
            texts.push_back(tape.constant(std::move(t)));
          } else {
            texts.push_back(text_encoder.embed(tape, model.params, data.descriptions.at(idx)[chosen[j]].text));
          }
        }
        const auto inv_gamma = diff::exp(tape.parameter(log_inv_gamma));
        const auto loss = contrastive_loss(diff::stack(series), diff::stack(texts), inv_gamma, cfg.symmetric_loss);
        model.params.zero_grad();
        tape.backward(loss);
        adam.step(trainable);
        auto& lig = log_inv_gamma.value[0];
        if (static_cast<double>(lig) > clamp) lig = static_cast<Real>(clamp);
        for (const auto* p : trainable)
          if (!p->value.all_finite()) throw Error(ErrorKind::NonFinite, "parameter '" + p->name + "' diverged");
        loss_sum += static_cast<double>(loss.value()[0]);
        ++loss_count;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonFinite) throw;
        throw Error(ErrorKind::NonFinite, "iteration " + std::to_string(it) + ": " + e.what());
      }
      ++result.iterations;
    }
    EpochMetrics m{epoch, loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0, model.inverse_temperature()};
    result.epochs.push_back(m);
    if (metrics) {
      *metrics << m.epoch << '\t' << m.mean_loss << '\t' << m.inverse_temperature << '\n';
      metrics->flush();
    }
  }
  return result;
}

}  // namespace unimts
