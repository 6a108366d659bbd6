#pragma once

// Binary checkpoint, all integers and reals little-endian:
//
//   "UMTSCKPT"                         8 bytes
//   version                            u32
//   encoder: partition u32, embedding_dim u32, block count u32,
//            per block (in u32, out u32, kernel_t u32)
//   skeleton: hash u64, joint count u32, per joint (name str, parent i32)
//   sample_rate f64, window_frames u32
//   text: mode u32, slots u32, token_dim u32
//   classes: count u32, per class name str
//   parameters: count u32, per parameter
//            (name str, trainable u32, rank u32, dims u64[rank], values f64[])
//   crc32 of every preceding byte      u32
//
// str = u32 length followed by the bytes.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "unimts/error.hpp"
#include "unimts/io/binary.hpp"
#include "unimts/io/parse.hpp"
#include "unimts/model.hpp"

namespace unimts::io {

inline constexpr std::string_view kCheckpointMagic = "UMTSCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class Real>
std::string encode_checkpoint(const Model<Real>& m) {
  ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(m.encoder.partition));
  w.u32(static_cast<std::uint32_t>(m.encoder.embedding_dim));
  w.u32(static_cast<std::uint32_t>(m.encoder.blocks.size()));
  for (const auto& b : m.encoder.blocks) {
    w.u32(static_cast<std::uint32_t>(b.in_channels));
    w.u32(static_cast<std::uint32_t>(b.out_channels));
    w.u32(static_cast<std::uint32_t>(b.kernel_t));
  }
  w.u64(m.skeleton.hash());
  w.u32(static_cast<std::uint32_t>(m.skeleton.joints()));
  for (std::size_t v = 0; v < m.skeleton.joints(); ++v) {
    w.str(m.skeleton.names[v]);
    w.i32(m.skeleton.parents[v]);
  }
  w.f64(m.sample_rate);
  w.u32(static_cast<std::uint32_t>(m.window_frames));
  w.u32(static_cast<std::uint32_t>(m.text.mode));
  w.u32(static_cast<std::uint32_t>(m.text.slots));
  w.u32(static_cast<std::uint32_t>(m.text.token_dim));
  w.u32(static_cast<std::uint32_t>(m.class_names.size()));
  for (const auto& c : m.class_names) w.str(c);
  w.u32(static_cast<std::uint32_t>(m.params.size()));
  for (const auto& p : m.params.items()) {
    w.str(p.name);
    w.u32(p.trainable ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) w.u64(d);
    for (Real v : p.value.values()) w.f64(static_cast<double>(v));
  }
  const auto crc = crc32_of(w.bytes());
  w.u32(crc);
  return w.take();
}

/// Decodes and verifies a checkpoint. When `expected_skeleton` is given its
/// hash must match the stored one.
template <class Real>
Model<Real> decode_checkpoint(std::string_view bytes, const std::string& source,
                              const SkeletonStructure* expected_skeleton = nullptr) {
  ByteReader r(bytes, ErrorKind::CorruptCheckpoint, source);
  if (r.raw(kCheckpointMagic.size()) != kCheckpointMagic) r.fail("bad magic");
  if (const auto version = r.u32(); version != kCheckpointVersion)
    throw Error(ErrorKind::VersionMismatch, source + ": checkpoint version " + std::to_string(version) +
                                                ", this build reads version " + std::to_string(kCheckpointVersion));
  if (bytes.size() < kCheckpointMagic.size() + 8) r.fail("file too short");
  const auto body = bytes.substr(0, bytes.size() - 4);
  ByteReader tail(bytes.substr(bytes.size() - 4), ErrorKind::CorruptCheckpoint, source);
  if (tail.u32() != crc32_of(body)) r.fail("CRC mismatch");
  r = ByteReader(body, ErrorKind::CorruptCheckpoint, source);
  r.raw(kCheckpointMagic.size() + 4);

  Model<Real> m;
  const auto partition = r.u32();
  if (partition > 1) r.fail("unknown partition strategy");
  m.encoder.partition = static_cast<Partition>(partition);
  m.encoder.embedding_dim = r.u32();
  const auto blocks = r.u32();
  if (blocks == 0 || blocks > 64) r.fail("implausible block count");
  for (std::uint32_t b = 0; b < blocks; ++b) {
    BlockSpec spec;
    spec.in_channels = r.u32();
    spec.out_channels = r.u32();
    spec.kernel_t = r.u32();
    m.encoder.blocks.push_back(spec);
  }
  const auto stored_hash = r.u64();
  const auto joints = r.u32();
  if (joints == 0 || joints > kMaxJoints) r.fail("implausible joint count");
  for (std::uint32_t v = 0; v < joints; ++v) {
    m.skeleton.names.push_back(r.str(256));
    m.skeleton.parents.push_back(r.i32());
  }
  m.sample_rate = r.f64();
  m.window_frames = r.u32();
  const auto mode = r.u32();
  if (mode > 1) r.fail("unknown text mode");
  m.text.mode = static_cast<TextMode>(mode);
  m.text.slots = r.u32();
  m.text.token_dim = r.u32();
  if (m.text.mode == TextMode::Trainable && (m.text.slots == 0 || m.text.token_dim == 0))
    r.fail("text encoder sizes must be positive");
  const auto classes = r.u32();
  if (classes > r.remaining()) r.fail("implausible class count");
  for (std::uint32_t c = 0; c < classes; ++c) m.class_names.push_back(r.str(4096));
  const auto count = r.u32();
  if (count > r.remaining()) r.fail("implausible parameter count");
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = r.str(4096);
    const auto trainable = r.u32();
    if (trainable > 1) r.fail("bad trainable flag");
    const auto rank = r.u32();
    if (rank > 8) r.fail("implausible tensor rank");
    diff::Shape shape;
    std::uint64_t elements = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto extent = r.u64();
      if (extent != 0 && elements > r.remaining() / extent) r.fail("tensor larger than the file");
      elements *= extent;
      shape.push_back(static_cast<std::size_t>(extent));
    }
    if (elements * 8 > r.remaining()) r.fail("tensor larger than the file");
    diff::Tensor<Real> value(shape);
    for (auto& v : value.values()) {
      const double x = r.f64();
      if (!std::isfinite(x)) r.fail("non-finite value in parameter '" + name + "'");
      v = static_cast<Real>(x);
    }
    if (m.params.contains(name)) r.fail("duplicate parameter '" + name + "'");
    m.params.add(std::move(name), std::move(value)).trainable = trainable == 1;
  }
  if (r.remaining() != 0) r.fail("trailing bytes");

  try {
    m.skeleton.validate();
    m.encoder.validate();
    validate_parameters(m);
  } catch (const Error& e) {
    throw Error(ErrorKind::CorruptCheckpoint, source + ": " + e.what());
  }
  if (m.skeleton.hash() != stored_hash) throw Error(ErrorKind::CorruptCheckpoint, source + ": skeleton hash mismatch");
  if (expected_skeleton && expected_skeleton->hash() != stored_hash)
    throw Error(ErrorKind::SkeletonMismatch, source + ": checkpoint was trained on a different skeleton");
  return m;
}

template <class Real>
void save_checkpoint(const std::filesystem::path& path, const Model<Real>& m) {
  write_file(path, encode_checkpoint(m));
}

template <class Real>
Model<Real> load_checkpoint(const std::filesystem::path& path, const SkeletonStructure* expected_skeleton = nullptr) {
  return decode_checkpoint<Real>(read_file(path), path.string(), expected_skeleton);
}

}  // namespace unimts::io
