#pragma once

// Time-series formats.
//
// Text:   line 1 "V T fs C"; line 2 the mask as V values of 0/1; then T lines
//         of C*V reals, joint-major (ax ay az gx gy gz for joint 0, then
//         joint 1, ...).
// Binary: "UMTS", u32 version, u32 V, u32 T, u32 C, f64 fs, V mask bytes,
//         then T*V*C little-endian f64 in the text layout.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "unimts/error.hpp"
#include "unimts/io/binary.hpp"
#include "unimts/io/parse.hpp"
#include "unimts/motion.hpp"

namespace unimts::io {

inline constexpr std::string_view kTimeSeriesMagic = "UMTS";
inline constexpr std::uint32_t kTimeSeriesVersion = 1;

namespace detail {

inline void check_mask_consistency(const MotionTimeSeries& x, const std::string& source) {
  for (std::size_t v = 0; v < x.joints; ++v) {
    if (x.selected(v)) continue;
    for (std::size_t t = 0; t < x.frames; ++t)
      for (std::size_t c = 0; c < x.channels; ++c)
        if (x.at(c, t, v) != 0.0)
          throw parse_error(source, t + 3,
                            "joint " + std::to_string(v) + " is masked but carries nonzero data");
  }
}

}  // namespace detail

inline std::string format_timeseries_text(const MotionTimeSeries& x) {
  std::string out = std::to_string(x.joints) + " " + std::to_string(x.frames) + " ";
  append_real(out, x.sample_rate);
  out += " " + std::to_string(x.channels) + "\n";
  for (std::size_t v = 0; v < x.joints; ++v) {
    out += x.selected(v) ? '1' : '0';
    out += v + 1 == x.joints ? '\n' : ' ';
  }
  for (std::size_t t = 0; t < x.frames; ++t) {
    for (std::size_t v = 0; v < x.joints; ++v)
      for (std::size_t c = 0; c < x.channels; ++c) {
        append_real(out, x.at(c, t, v));
        out += ' ';
      }
    out.back() = '\n';
  }
  return out;
}

inline MotionTimeSeries parse_timeseries_text(std::string_view text, const std::string& source) {
  LineReader reader(text, source);
  std::string_view line;
  if (!reader.next(line)) throw reader.error("empty file; expected header 'V T fs C'");
  const auto header = split_ws(line);
  if (header.size() != 4) throw reader.error("header must be 'V T fs C'");
  const auto joints = parse_count(header[0], reader, kMaxJoints);
  const auto frames = parse_count(header[1], reader, kMaxFrames);
  const double fs = parse_real(header[2], reader);
  const auto channels = parse_count(header[3], reader, kMaxChannels);
  if (joints == 0 || frames == 0 || channels == 0) throw reader.error("V, T and C must be positive");
  if (!(fs > 0.0)) throw reader.error("fs must be positive");

  if (!reader.next(line)) throw reader.error("missing mask line");
  const auto mask_toks = split_ws(line);
  if (mask_toks.size() != joints) throw reader.error("mask must list one 0/1 per joint");
  std::vector<std::uint8_t> mask;
  for (auto tok : mask_toks) {
    if (tok != "0" && tok != "1") throw reader.error("mask entries must be 0 or 1");
    mask.push_back(tok == "1" ? 1 : 0);
  }

  const std::size_t width = channels * joints;
  std::vector<double> rows;
  std::size_t seen = 0;
  while (seen < frames) {
    if (!reader.next(line))
      throw reader.error("expected " + std::to_string(frames) + " frame lines, found " +
                         std::to_string(seen));
    const auto toks = split_ws(line);
    if (toks.size() != width)
      throw reader.error("expected " + std::to_string(width) + " values, found " +
                         std::to_string(toks.size()));
    for (auto tok : toks) rows.push_back(parse_real(tok, reader));
    ++seen;
  }
  while (reader.next(line))
    if (!split_ws(line).empty()) throw reader.error("trailing data after the last frame");

  MotionTimeSeries x(channels, frames, joints, fs);
  x.mask = std::move(mask);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t v = 0; v < joints; ++v)
      for (std::size_t c = 0; c < channels; ++c) x.at(c, t, v) = rows[t * width + v * channels + c];
  detail::check_mask_consistency(x, source);
  return x;
}

inline std::string encode_timeseries_binary(const MotionTimeSeries& x) {
  ByteWriter w;
  w.raw(kTimeSeriesMagic);
  w.u32(kTimeSeriesVersion);
  w.u32(static_cast<std::uint32_t>(x.joints));
  w.u32(static_cast<std::uint32_t>(x.frames));
  w.u32(static_cast<std::uint32_t>(x.channels));
  w.f64(x.sample_rate);
  for (std::size_t v = 0; v < x.joints; ++v) w.raw(std::string(1, x.selected(v) ? '\1' : '\0'));
  for (std::size_t t = 0; t < x.frames; ++t)
    for (std::size_t v = 0; v < x.joints; ++v)
      for (std::size_t c = 0; c < x.channels; ++c) w.f64(x.at(c, t, v));
  return w.take();
}

inline MotionTimeSeries decode_timeseries_binary(std::string_view bytes, const std::string& source) {
  ByteReader r(bytes, ErrorKind::ParseError, source);
  if (r.raw(4) != kTimeSeriesMagic) r.fail("bad magic");
  if (const auto version = r.u32(); version != kTimeSeriesVersion)
    throw Error(ErrorKind::VersionMismatch, source + ": time-series version " + std::to_string(version));
  const std::size_t joints = r.u32(), frames = r.u32(), channels = r.u32();
  const double fs = r.f64();
  if (joints == 0 || joints > kMaxJoints || channels == 0 || channels > kMaxChannels || frames == 0 ||
      frames > kMaxFrames)
    r.fail("implausible dimensions");
  if (!(fs > 0.0) || !std::isfinite(fs)) r.fail("fs must be positive");
  const std::size_t payload = joints + frames * joints * channels * 8;
  if (r.remaining() != payload) r.fail("payload size does not match the header");
  MotionTimeSeries x(channels, frames, joints, fs);
  for (std::size_t v = 0; v < joints; ++v) {
    const char m = r.raw(1)[0];
    if (m != 0 && m != 1) r.fail("mask bytes must be 0 or 1");
    x.mask[v] = static_cast<std::uint8_t>(m);
  }
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t v = 0; v < joints; ++v)
      for (std::size_t c = 0; c < channels; ++c) {
        const double value = r.f64();
        if (!std::isfinite(value)) r.fail("non-finite sample");
        x.at(c, t, v) = value;
      }
  detail::check_mask_consistency(x, source);
  return x;
}

/// Reads either variant, detected by the magic bytes.
inline MotionTimeSeries read_timeseries_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (std::string_view(bytes).substr(0, 4) == kTimeSeriesMagic)
    return decode_timeseries_binary(bytes, path.string());
  return parse_timeseries_text(bytes, path.string());
}

inline void write_timeseries_file(const std::filesystem::path& path, const MotionTimeSeries& x,
                                  bool binary = false) {
  write_file(path, binary ? encode_timeseries_binary(x) : format_timeseries_text(x));
}

}  // namespace unimts::io
