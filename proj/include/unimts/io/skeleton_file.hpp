#pragma once

// Skeleton motion text format:
//   line 1: V T fs
//   then T lines of 7*V reals, per joint: px py pz qw qx qy qz

#include <cmath>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "unimts/error.hpp"
#include "unimts/io/parse.hpp"
#include "unimts/motion.hpp"

namespace unimts::io {

inline constexpr double kQuaternionNormMin = 0.9;
inline constexpr double kQuaternionNormMax = 1.1;

/// Parses a skeleton file body. Quaternions with norms in [0.9, 1.1] are
/// normalized (a warning is appended when the correction exceeds 1e-6);
/// anything else is BadQuaternion.
inline SkeletonSequence parse_skeleton(std::string_view text, const std::string& source,
                                       std::vector<std::string>* warnings = nullptr) {
  LineReader reader(text, source);
  std::string_view line;
  if (!reader.next(line)) throw reader.error("empty file; expected header 'V T fs'");
  const auto header = split_ws(line);
  if (header.size() != 3) throw reader.error("header must be 'V T fs'");
  const auto joints = parse_count(header[0], reader, kMaxJoints);
  const auto frames = parse_count(header[1], reader, kMaxFrames);
  const double fs = parse_real(header[2], reader);
  if (joints == 0) throw reader.error("V must be positive");
  if (frames < 3) throw reader.error("T must be at least 3");
  if (!(fs > 0.0)) throw reader.error("fs must be positive");

  std::vector<std::vector<double>> rows;
  while (rows.size() < frames) {
    if (!reader.next(line))
      throw reader.error("expected " + std::to_string(frames) + " frame lines, found " +
                         std::to_string(rows.size()));
    const auto toks = split_ws(line);
    if (toks.size() != 7 * joints)
      throw reader.error("expected " + std::to_string(7 * joints) + " values, found " +
                         std::to_string(toks.size()));
    std::vector<double> row;
    row.reserve(toks.size());
    for (auto tok : toks) row.push_back(parse_real(tok, reader));
    rows.push_back(std::move(row));
  }
  while (reader.next(line))
    if (!split_ws(line).empty()) throw reader.error("trailing data after the last frame");

  SkeletonSequence seq(joints, frames, fs);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t v = 0; v < joints; ++v) {
      const double* r = rows[t].data() + 7 * v;
      seq.position(v, t) = {r[0], r[1], r[2]};
      Quaternion q{r[3], r[4], r[5], r[6]};
      const double n = q.norm();
      if (!(n >= kQuaternionNormMin && n <= kQuaternionNormMax))
        throw Error(ErrorKind::BadQuaternion,
                    source + ":" + std::to_string(t + 2) + ": joint " + std::to_string(v) +
                        " quaternion norm " + std::to_string(n) + " outside [0.9, 1.1]");
      if (warnings && std::abs(n - 1.0) > 1e-6)
        warnings->push_back(source + ":" + std::to_string(t + 2) + ": normalized joint " +
                            std::to_string(v) + " quaternion (norm " + std::to_string(n) + ")");
      seq.orientation(v, t) = q.normalized();
    }
  }
  return seq;
}

inline SkeletonSequence read_skeleton_file(const std::filesystem::path& path,
                                           std::vector<std::string>* warnings = nullptr) {
  return parse_skeleton(read_file(path), path.string(), warnings);
}

inline std::string format_skeleton(const SkeletonSequence& seq) {
  std::string out = std::to_string(seq.joints) + " " + std::to_string(seq.frames) + " ";
  append_real(out, seq.frame_rate);
  out += '\n';
  for (std::size_t t = 0; t < seq.frames; ++t) {
    for (std::size_t v = 0; v < seq.joints; ++v) {
      const auto& p = seq.position(v, t);
      const auto& q = seq.orientation(v, t);
      for (double x : {p[0], p[1], p[2], q.w, q.x, q.y, q.z}) {
        append_real(out, x);
        out += ' ';
      }
    }
    out.back() = '\n';
  }
  return out;
}

inline void write_skeleton_file(const std::filesystem::path& path, const SkeletonSequence& seq) {
  write_file(path, format_skeleton(seq));
}

}  // namespace unimts::io
