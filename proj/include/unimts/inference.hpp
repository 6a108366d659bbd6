#pragma once

// Zero-shot classification, fine-tuning with a linear head, and evaluation
// metrics over real (device-recorded) datasets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "unimts/device.hpp"
#include "unimts/diff/ops.hpp"
#include "unimts/diff/optim.hpp"
#include "unimts/diff/tape.hpp"
#include "unimts/error.hpp"
#include "unimts/io/manifest.hpp"
#include "unimts/model.hpp"
#include "unimts/motion.hpp"
#include "unimts/parallel.hpp"
#include "unimts/physics.hpp"
#include "unimts/rng.hpp"
#include "unimts/text_embed.hpp"

namespace unimts {

/// Places each device's channels at its mapped joint; everything else,
/// including a missing gyroscope, stays zero. Mapped joints are selected.
inline MotionTimeSeries assign_to_joints(std::span<const DeviceRecording> devices, const DeviceMapping& mapping,
                                         std::size_t joints, double sample_rate) {
  if (devices.empty()) throw Error(ErrorKind::Empty, "sample has no devices");
  const std::size_t frames = devices.front().frames();
  MotionTimeSeries x(kImuChannels, frames, joints, sample_rate);
  std::fill(x.mask.begin(), x.mask.end(), std::uint8_t{0});
  for (const auto& d : devices) {
    const std::size_t v = mapping.at(d.location);
    if (v >= joints) throw Error(ErrorKind::BadConfig, "location '" + d.location + "' maps outside the skeleton");
    if (x.selected(v))
      throw Error(ErrorKind::DuplicateJoint, "two devices map to joint " + std::to_string(v));
    if (d.samples.size() % d.width() != 0 || d.frames() != frames)
      throw Error(ErrorKind::ShapeMismatch, "device '" + d.location + "' has a different frame count");
    x.mask[v] = 1;
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t c = 0; c < d.width(); ++c) x.at(c, t, v) = d.samples[t * d.width() + c];
  }
  return x;
}

/// Candidate classes with one embedding each.
struct LabelSet {
  std::vector<std::string> names;
  std::vector<std::vector<double>> vectors;

  std::size_t size() const { return names.size(); }
  std::size_t dim() const { return vectors.empty() ? 0 : vectors.front().size(); }

  void validate() const {
    if (names.size() < 2) throw Error(ErrorKind::BadConfig, "a label set needs at least two classes");
    if (vectors.size() != names.size()) throw Error(ErrorKind::ShapeMismatch, "one embedding per label required");
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (vectors[i].size() != dim()) throw Error(ErrorKind::DimMismatch, "label embeddings differ in dimension");
      for (std::size_t j = 0; j < i; ++j)
        if (names[i] == names[j]) throw Error(ErrorKind::DuplicateId, "duplicate label '" + names[i] + "'");
    }
  }
};

/// Label embeddings looked up by id, then by exact text.
inline LabelSet label_set_from_table(const std::vector<std::string>& names, const TextEmbeddingTable& table) {
  LabelSet out;
  for (const auto& n : names) {
    const auto* e = table.lookup(n);
    if (!e) throw Error(ErrorKind::UnknownId, "no embedding for label '" + n + "'");
    out.names.push_back(n);
    out.vectors.push_back(e->vector);
  }
  out.validate();
  return out;
}

/// Label embeddings from the model's trainable text encoder (names are
/// tokenized like descriptions, so "climbing_stairs" reads as two words).
template <class Real>
LabelSet label_set_from_model(const std::vector<std::string>& names, const Model<Real>& model) {
  if (model.text.mode != TextMode::Trainable)
    throw Error(ErrorKind::BadConfig, "model has no text encoder; supply label embeddings");
  const auto enc = model.text_encoder();
  LabelSet out;
  for (const auto& n : names) {
    out.names.push_back(n);
    out.vectors.push_back(enc.embed_value(model.params, n));
  }
  out.validate();
  return out;
}

/// Non-overlapping windows of `length` frames. A recording shorter than one
/// window is returned whole; a trailing remainder shorter than half a window
/// is dropped.
inline std::vector<MotionTimeSeries> split_windows(const MotionTimeSeries& x, std::size_t length,
                                                   std::size_t stride = 0) {
  if (stride == 0) stride = length;
  if (length == 0 || x.frames <= length) return {x};
  std::vector<MotionTimeSeries> out;
  for (std::size_t start = 0; start < x.frames; start += stride) {
    const std::size_t n = std::min(length, x.frames - start);
    if (2 * n < length) break;
    MotionTimeSeries w(x.channels, n, x.joints, x.sample_rate);
    w.mask = x.mask;
    for (std::size_t c = 0; c < x.channels; ++c)
      for (std::size_t t = 0; t < n; ++t)
        for (std::size_t v = 0; v < x.joints; ++v) w.at(c, t, v) = x.at(c, start + t, v);
    out.push_back(std::move(w));
    if (start + n >= x.frames) break;
  }
  return out;
}

namespace detail {

template <class Real>
MotionTimeSeries prepare_input(const MotionTimeSeries& x, const Model<Real>& model) {
  if (x.channels != kImuChannels || x.joints != model.skeleton.joints())
    throw Error(ErrorKind::ShapeMismatch, "input is " + std::to_string(x.channels) + " x T x " +
                                              std::to_string(x.joints) + ", model expects 6 x T x " +
                                              std::to_string(model.skeleton.joints()));
  x.validate();
  if (x.sample_rate != model.sample_rate) return resample(x, model.sample_rate);
  return x;
}

template <class Real>
std::vector<double> to_vector(const diff::Var<Real>& v) {
  std::vector<double> out;
  for (Real r : v.value().values()) out.push_back(static_cast<double>(r));
  return out;
}

}  // namespace detail

/// g_φ(X) averaged over the windows of the (resampled) input.
template <class Real>
std::vector<double> embed_series(const MotionTimeSeries& x, const Model<Real>& model,
                                 const GraphEncoder<Real>& encoder) {
  const auto prepared = detail::prepare_input(x, model);
  auto& params = const_cast<ParameterStore<Real>&>(model.params);
  std::vector<double> sum(model.encoder.embedding_dim, 0.0);
  const auto windows = split_windows(prepared, model.window_frames);
  for (const auto& w : windows) {
    diff::Tape<Real> tape;
    const auto e = detail::to_vector(encoder.encode(tape, params, w));
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += e[i];
  }
  for (auto& v : sum) v /= static_cast<double>(windows.size());
  return sum;
}

template <class Real>
std::vector<double> embed_series(const MotionTimeSeries& x, const Model<Real>& model) {
  return embed_series(x, model, model.graph());
}

/// Index of the largest value; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

struct Prediction {
  std::size_t label = 0;
  std::vector<double> scores;
};

/// Scores against precomputed label embeddings.
inline Prediction classify_embedding(std::span<const double> embedding, const LabelSet& labels) {
  if (labels.dim() != embedding.size())
    throw Error(ErrorKind::DimMismatch, "label embeddings have dim " + std::to_string(labels.dim()) +
                                            ", model embeds into " + std::to_string(embedding.size()));
  Prediction p;
  for (const auto& l : labels.vectors) p.scores.push_back(similarity(embedding, l));
  p.label = argmax(p.scores);
  return p;
}

/// Zero-shot: score_j = ⟨g_φ(x), f(label_j)⟩, prediction = argmax.
template <class Real>
Prediction zero_shot_classify(const MotionTimeSeries& x, const Model<Real>& model, const LabelSet& labels) {
  if (labels.dim() != model.encoder.embedding_dim)
    throw Error(ErrorKind::DimMismatch, "label embeddings have dim " + std::to_string(labels.dim()) +
                                            ", model embeds into " + std::to_string(model.encoder.embedding_dim));
  return classify_embedding(embed_series(x, model), labels);
}

/// Fine-tuned: scores are the head's logits h_ψ(g_φ(x)).
template <class Real>
Prediction head_classify(const MotionTimeSeries& x, const Model<Real>& model) {
  if (!model.has_head()) throw Error(ErrorKind::BadConfig, "model has no classification head");
  const auto emb = embed_series(x, model);
  const auto& w = model.params.at(param_names::kHeadWeight).value;
  const auto& b = model.params.at(param_names::kHeadBias).value;
  Prediction p;
  for (std::size_t j = 0; j < w.extent(0); ++j) {
    double s = static_cast<double>(b[j]);
    for (std::size_t k = 0; k < emb.size(); ++k) s += static_cast<double>(w(j, k)) * emb[k];
    p.scores.push_back(s);
  }
  p.label = argmax(p.scores);
  return p;
}

struct LabeledSample {
  MotionTimeSeries x;
  std::size_t label = 0;
};

struct FinetuneConfig {
  std::size_t epochs = 10;
  std::size_t batch = 16;
  double lr = 1e-4;
  std::uint64_t seed = 0;
};

struct FinetuneResult {
  std::vector<double> epoch_losses;
  std::size_t iterations = 0;
};

/// Cross-entropy fine-tuning of the graph encoder and a linear head. Text
/// parameters and the temperature are frozen; `labels` is only read. The
/// head starts from the label embeddings scaled by 1/γ when their dimension
/// matches the encoder's, so step zero reproduces zero-shot scores.
template <class Real>
FinetuneResult finetune(Model<Real>& model, const std::vector<LabeledSample>& train, const LabelSet& labels,
                        const FinetuneConfig& cfg, std::ostream* metrics = nullptr) {
  if (train.empty()) throw Error(ErrorKind::EmptyDataset, "fine-tuning dataset is empty");
  labels.validate();
  if (cfg.batch < 1) throw Error(ErrorKind::BadConfig, "batch size must be positive");
  if (!(cfg.lr > 0.0)) throw Error(ErrorKind::BadConfig, "learning rate must be positive");
  const std::size_t classes = labels.size(), dim = model.encoder.embedding_dim;
  for (const auto& s : train)
    if (s.label >= classes) throw Error(ErrorKind::UnknownId, "sample label outside the label set");

  const bool reuse = model.has_head() && model.class_names == labels.names;
  if (!reuse) {
    for (const char* n : {param_names::kHeadWeight, param_names::kHeadBias})
      if (model.params.contains(n))
        throw Error(ErrorKind::BadConfig, "model already has a head for different classes");
    diff::Tensor<Real> w(diff::Shape{classes, dim});
    if (labels.dim() == dim) {
      const double s = model.inverse_temperature();
      for (std::size_t j = 0; j < classes; ++j)
        for (std::size_t k = 0; k < dim; ++k) w(j, k) = static_cast<Real>(labels.vectors[j][k] * s);
    } else {
      Rng rng(derive_seed(cfg.seed, {0x4EAD}));
      const double bound = std::sqrt(6.0 / static_cast<double>(classes + dim));
      for (auto& v : w.values()) v = static_cast<Real>((2.0 * rng.uniform() - 1.0) * bound);
    }
    model.params.add(param_names::kHeadWeight, std::move(w));
    model.params.add(param_names::kHeadBias, diff::Tensor<Real>(diff::Shape{classes}));
    model.class_names = labels.names;
  }
  set_text_frozen(model.params, true);
  model.params.at(param_names::kLogInvGamma).trainable = false;

  // Windows of long recordings become separate training instances.
  std::vector<LabeledSample> items;
  for (const auto& s : train)
    for (auto& w : split_windows(detail::prepare_input(s.x, model), model.window_frames))
      items.push_back({std::move(w), s.label});

  const auto encoder = model.graph();
  auto params = model.params.all();
  diff::Adam<Real> adam({cfg.lr, 0.9, 0.999, 1e-8});
  FinetuneResult result;
  std::vector<std::size_t> order(items.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle(derive_seed(cfg.seed, {0xF1E, epoch}));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t b = std::min(cfg.batch, order.size() - start);
      diff::Tape<Real> tape;
      const auto weight = tape.parameter(model.params.at(param_names::kHeadWeight));
      const auto bias = tape.parameter(model.params.at(param_names::kHeadBias));
      std::vector<diff::Var<Real>> logits;
      std::vector<std::size_t> targets;
      for (std::size_t j = 0; j < b; ++j) {
        const auto& item = items[order[start + j]];
        const auto e = encoder.encode(tape, model.params, item.x);
        logits.push_back(
            diff::add(diff::reshape(diff::matmul(weight, diff::reshape(e, {dim, 1})), {classes}), bias));
        targets.push_back(item.label);
      }
      const auto loss =
          diff::scale(diff::mean(diff::pick(diff::log_softmax_rows(diff::stack(logits)), targets)), Real{-1});
      model.params.zero_grad();
      tape.backward(loss);
      adam.step(params);
      sum += static_cast<double>(loss.value()[0]);
      ++count;
      ++result.iterations;
    }
    result.epoch_losses.push_back(sum / static_cast<double>(count));
    if (metrics) {
      *metrics << epoch << '\t' << result.epoch_losses.back() << '\n';
      metrics->flush();
    }
  }
  return result;
}

struct EvalReport {
  std::size_t samples = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double r_at_2 = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

inline std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const std::size_t> y_true,
                                                              std::span<const std::size_t> y_pred,
                                                              std::size_t classes) {
  if (y_true.size() != y_pred.size()) throw Error(ErrorKind::ShapeMismatch, "label and prediction counts differ");
  std::vector<std::vector<std::size_t>> c(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] >= classes || y_pred[i] >= classes) throw Error(ErrorKind::BadRange, "class index out of range");
    ++c[y_true[i]][y_pred[i]];
  }
  return c;
}

inline double accuracy_of(const std::vector<std::vector<std::size_t>>& confusion) {
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < confusion.size(); ++i)
    for (std::size_t j = 0; j < confusion.size(); ++j) {
      total += confusion[i][j];
      if (i == j) hit += confusion[i][j];
    }
  if (total == 0) throw Error(ErrorKind::EmptyDataset, "no samples");
  return static_cast<double>(hit) / static_cast<double>(total);
}

/// Unweighted mean over classes of 2PR/(P+R); a class with P+R = 0 scores 0.
inline double macro_f1_of(const std::vector<std::vector<std::size_t>>& confusion) {
  const std::size_t d = confusion.size();
  if (d == 0) throw Error(ErrorKind::EmptyDataset, "no classes");
  double sum = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    std::size_t tp = confusion[k][k], predicted = 0, actual = 0;
    for (std::size_t i = 0; i < d; ++i) {
      predicted += confusion[i][k];
      actual += confusion[k][i];
    }
    const double p = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    const double r = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    sum += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  return sum / static_cast<double>(d);
}

/// Rank of `label` under the argmax tie rule (0 = top).
inline std::size_t rank_of(std::span<const double> scores, std::size_t label) {
  std::size_t rank = 0;
  for (std::size_t j = 0; j < scores.size(); ++j)
    if (scores[j] > scores[label] || (scores[j] == scores[label] && j < label)) ++rank;
  return rank;
}

inline EvalReport compute_metrics(std::span<const std::size_t> y_true, const std::vector<std::vector<double>>& scores) {
  if (y_true.empty()) throw Error(ErrorKind::EmptyDataset, "cannot evaluate an empty dataset");
  if (scores.size() != y_true.size()) throw Error(ErrorKind::ShapeMismatch, "one score row per sample required");
  const std::size_t classes = scores.front().size();
  std::vector<std::size_t> y_pred;
  std::size_t top2 = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != classes) throw Error(ErrorKind::ShapeMismatch, "ragged score rows");
    if (y_true[i] >= classes) throw Error(ErrorKind::BadRange, "class index out of range");
    y_pred.push_back(argmax(scores[i]));
    if (rank_of(scores[i], y_true[i]) < 2) ++top2;
  }
  EvalReport r;
  r.samples = y_true.size();
  r.confusion = confusion_matrix(y_true, y_pred, classes);
  r.accuracy = accuracy_of(r.confusion);
  r.macro_f1 = macro_f1_of(r.confusion);
  r.r_at_2 = static_cast<double>(top2) / static_cast<double>(y_true.size());
  return r;
}

enum class EvalMode { ZeroShot, Finetuned };

/// Scores every sample in parallel (the model is read-only) and summarizes.
template <class Real>
EvalReport evaluate(const Model<Real>& model, const std::vector<LabeledSample>& dataset, const LabelSet* labels,
                    EvalMode mode, unsigned workers = 1) {
  if (dataset.empty()) throw Error(ErrorKind::EmptyDataset, "cannot evaluate an empty dataset");
  if (mode == EvalMode::ZeroShot && !labels) throw Error(ErrorKind::BadConfig, "zero-shot evaluation needs labels");
  std::vector<std::vector<double>> scores(dataset.size());
  const auto encoder = model.graph();
  parallel_for(dataset.size(), workers, [&](std::size_t i) {
    scores[i] = mode == EvalMode::ZeroShot ? classify_embedding(embed_series(dataset[i].x, model, encoder), *labels).scores
                                           : head_classify(dataset[i].x, model).scores;
  });
  std::vector<std::size_t> truth;
  for (const auto& s : dataset) truth.push_back(s.label);
  return compute_metrics(truth, scores);
}

inline std::string format_report(const EvalReport& r, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "Samples  " << r.samples << '\n';
  out << "Acc      " << r.accuracy << '\n';
  out << "F1       " << r.macro_f1 << '\n';
  out << "R@2      " << r.r_at_2 << '\n';
  std::size_t width = 4;
  for (const auto& n : names) width = std::max(width, n.size());
  out << "confusion (rows = true, columns = predicted)\n";
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    out << "  " << std::left << std::setw(static_cast<int>(width)) << (i < names.size() ? names[i] : std::to_string(i))
        << std::right;
    for (auto c : r.confusion[i]) out << ' ' << std::setw(6) << c;
    out << '\n';
  }
  return out.str();
}

/// Machine-readable key=value form.
inline std::string format_report_kv(const EvalReport& r, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "samples=" << r.samples << "\naccuracy=" << r.accuracy << "\nmacro_f1=" << r.macro_f1
      << "\nr_at_2=" << r.r_at_2 << '\n';
  out << "classes=";
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    out << "confusion." << i << '=';
    for (std::size_t j = 0; j < r.confusion[i].size(); ++j) out << (j ? "," : "") << r.confusion[i][j];
    out << '\n';
  }
  return out.str();
}

/// Reads every manifest sample: per-device columns, accelerations scaled by
/// the sample's unit factor, placed at mapped joints, resampled to the
/// model's rate. Labels index `class_names`.
template <class Real>
std::vector<LabeledSample> load_labeled_dataset(const io::Manifest& manifest, const Model<Real>& model,
                                                const std::vector<std::string>& class_names) {
  const auto mapping = io::read_mapping_file(manifest.mapping_path, model.skeleton);
  std::vector<LabeledSample> out;
  for (const auto& s : manifest.samples) {
    auto devices = io::read_recording_file(s.path, s.devices);
    for (auto& d : devices)
      for (std::size_t i = 0; i < d.samples.size(); ++i)
        if (i % d.width() < kAccelChannels) d.samples[i] *= s.unit_scale;
    auto x = assign_to_joints(devices, mapping, model.skeleton.joints(), s.sample_rate);
    if (x.frames >= 2 && x.sample_rate != model.sample_rate) x = resample(x, model.sample_rate);
    const auto it = std::find(class_names.begin(), class_names.end(), s.label);
    if (it == class_names.end()) throw Error(ErrorKind::UnknownId, "label '" + s.label + "' is not a model class");
    out.push_back({std::move(x), static_cast<std::size_t>(it - class_names.begin())});
  }
  if (out.empty()) throw Error(ErrorKind::EmptyDataset, "manifest lists no samples");
  return out;
}

}  // namespace unimts
