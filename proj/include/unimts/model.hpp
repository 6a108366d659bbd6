#pragma once

// Everything a trained model needs at inference time.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "unimts/diff/tensor.hpp"
#include "unimts/error.hpp"
#include "unimts/params.hpp"
#include "unimts/rng.hpp"
#include "unimts/skeleton.hpp"
#include "unimts/stgcn.hpp"
#include "unimts/text_embed.hpp"

namespace unimts {

inline constexpr double kInitialTemperature = 0.07;
inline constexpr double kMaxInverseTemperature = 100.0;

template <class Real>
struct Model {
  EncoderConfig encoder;
  SkeletonStructure skeleton;
  double sample_rate = 20.0;
  std::size_t window_frames = 0;
  TextEncoderConfig text;
  std::vector<std::string> class_names;
  ParameterStore<Real> params;

  GraphEncoder<Real> graph() const { return GraphEncoder<Real>(encoder, skeleton); }
  HashTextEncoder<Real> text_encoder() const { return HashTextEncoder<Real>(text, encoder.embedding_dim); }

  bool has_head() const { return params.contains(param_names::kHeadWeight); }

  double inverse_temperature() const {
    return std::exp(static_cast<double>(params.at(param_names::kLogInvGamma).value[0]));
  }
};

/// Name and shape of every parameter the model's configuration requires.
template <class Real>
std::vector<std::pair<std::string, diff::Shape>> expected_parameters(const Model<Real>& m) {
  std::vector<std::pair<std::string, diff::Shape>> out;
  const std::size_t ks = m.encoder.spatial_kernels(), e = m.encoder.embedding_dim;
  for (std::size_t b = 0; b < m.encoder.blocks.size(); ++b) {
    const auto& blk = m.encoder.blocks[b];
    out.emplace_back(param_names::spatial(b), diff::Shape{ks, blk.out_channels, blk.in_channels});
    out.emplace_back(param_names::temporal(b), diff::Shape{blk.out_channels, blk.out_channels, blk.kernel_t});
    out.emplace_back(param_names::affine_scale(b), diff::Shape{blk.out_channels});
    out.emplace_back(param_names::affine_shift(b), diff::Shape{blk.out_channels});
  }
  out.emplace_back(param_names::kProjWeight, diff::Shape{e, m.encoder.output_channels()});
  out.emplace_back(param_names::kProjBias, diff::Shape{e});
  out.emplace_back(param_names::kLogInvGamma, diff::Shape{1});
  if (m.text.mode == TextMode::Trainable) {
    out.emplace_back(param_names::kTextTokens, diff::Shape{m.text.slots, m.text.token_dim});
    out.emplace_back(param_names::kTextProj, diff::Shape{e, m.text.token_dim});
  }
  if (!m.class_names.empty()) {
    out.emplace_back(param_names::kHeadWeight, diff::Shape{m.class_names.size(), e});
    out.emplace_back(param_names::kHeadBias, diff::Shape{m.class_names.size()});
  }
  return out;
}

/// Parameters present, correctly shaped, and nothing extra.
template <class Real>
void validate_parameters(const Model<Real>& m) {
  const auto expected = expected_parameters(m);
  for (const auto& [name, shape] : expected) {
    const auto* p = m.params.find(name);
    if (!p) throw Error(ErrorKind::BadConfig, "missing parameter '" + name + "'");
    if (p->value.shape() != shape)
      throw Error(ErrorKind::BadConfig, "parameter '" + name + "' has shape " + diff::to_string(p->value.shape()) +
                                            ", expected " + diff::to_string(shape));
  }
  if (m.params.size() != expected.size()) throw Error(ErrorKind::BadConfig, "unexpected extra parameters");
}

/// Fresh model: encoder weights, temperature 1/0.07 and, in trainable text
/// mode, the hashed text encoder.
template <class Real>
Model<Real> make_model(EncoderConfig encoder, SkeletonStructure skeleton, TextEncoderConfig text, Rng& rng,
                       double sample_rate = 20.0) {
  Model<Real> m;
  m.encoder = std::move(encoder);
  m.skeleton = std::move(skeleton);
  m.sample_rate = sample_rate;
  m.text = text;
  m.graph().init_parameters(m.params, rng);
  m.params.add(param_names::kLogInvGamma,
               diff::Tensor<Real>(diff::Shape{1}, static_cast<Real>(std::log(1.0 / kInitialTemperature))));
  if (text.mode == TextMode::Trainable) m.text_encoder().init_parameters(m.params, rng);
  return m;
}

}  // namespace unimts
