#pragma once

// Device mapping file: lines "location joint", joint given by skeleton name
// or index.
//
// Manifest file:
//   mapping <path>
//   labels <name> <name> ...
//   sample <path> <label> <fs> <unit_scale> <loc>:<a|ag>[,<loc>:<a|ag>...]
// Relative paths resolve against the manifest's directory.
//
// Recording file: header "T W", then T lines of W reals; columns are the
// devices of the sample in order, 3 (a) or 6 (ag) columns each.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "unimts/device.hpp"
#include "unimts/error.hpp"
#include "unimts/io/parse.hpp"
#include "unimts/skeleton.hpp"

namespace unimts::io {

inline DeviceMapping parse_mapping(std::string_view text, const std::string& source,
                                   const SkeletonStructure& skeleton) {
  LineReader reader(text, source);
  DeviceMapping mapping;
  std::string_view line;
  while (reader.next_content(line)) {
    const auto toks = split_ws(line);
    if (toks.size() != 2) throw reader.error("expected 'location joint'");
    std::size_t joint = 0;
    if (auto named = skeleton.find(toks[1])) {
      joint = *named;
    } else {
      joint = parse_count(toks[1], reader, kMaxJoints);
      if (joint >= skeleton.joints())
        throw reader.error("joint " + std::to_string(joint) + " is outside the skeleton");
    }
    if (mapping.find(toks[0])) throw reader.error("location '" + std::string(toks[0]) + "' is mapped twice");
    mapping.add(std::string(toks[0]), joint);
  }
  return mapping;
}

inline DeviceMapping read_mapping_file(const std::filesystem::path& path, const SkeletonStructure& skeleton) {
  return parse_mapping(read_file(path), path.string(), skeleton);
}

struct DeviceSpec {
  std::string location;
  DeviceChannels channels = DeviceChannels::AccelGyro;
};

struct ManifestSample {
  std::filesystem::path path;
  std::string label;
  double sample_rate = 0.0;
  double unit_scale = 1.0;
  std::vector<DeviceSpec> devices;
};

struct Manifest {
  std::filesystem::path mapping_path;
  std::vector<std::string> labels;
  std::vector<ManifestSample> samples;

  std::size_t label_index(std::string_view name) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == name) return i;
    throw Error(ErrorKind::UnknownId, "label '" + std::string(name) + "' is not declared");
  }
};

inline Manifest parse_manifest(std::string_view text, const std::string& source,
                               const std::filesystem::path& base_dir) {
  LineReader reader(text, source);
  Manifest m;
  auto resolve = [&](std::string_view p) {
    std::filesystem::path path{std::string(p)};
    return path.is_absolute() ? path : base_dir / path;
  };
  std::string_view line;
  while (reader.next_content(line)) {
    const auto toks = split_ws(line);
    if (toks[0] == "mapping") {
      if (toks.size() != 2) throw reader.error("expected 'mapping <path>'");
      if (!m.mapping_path.empty()) throw reader.error("second mapping line");
      m.mapping_path = resolve(toks[1]);
    } else if (toks[0] == "labels") {
      if (!m.labels.empty()) throw reader.error("second labels line");
      for (std::size_t i = 1; i < toks.size(); ++i) {
        for (const auto& l : m.labels)
          if (l == toks[i]) throw reader.error("duplicate label '" + std::string(toks[i]) + "'");
        m.labels.emplace_back(toks[i]);
      }
      if (m.labels.size() < 2) throw reader.error("at least two labels are required");
    } else if (toks[0] == "sample") {
      if (toks.size() != 6) throw reader.error("expected 'sample <path> <label> <fs> <unit_scale> <devices>'");
      if (m.labels.empty()) throw reader.error("labels must be declared before samples");
      ManifestSample s;
      s.path = resolve(toks[1]);
      s.label = std::string(toks[2]);
      bool known = false;
      for (const auto& l : m.labels) known = known || l == s.label;
      if (!known) throw reader.error("label '" + s.label + "' is not declared");
      s.sample_rate = parse_real(toks[3], reader);
      if (!(s.sample_rate > 0.0)) throw reader.error("fs must be positive");
      s.unit_scale = parse_real(toks[4], reader);
      if (!(s.unit_scale > 0.0)) throw reader.error("unit scale must be positive");
      for (auto dev : split_on(toks[5], ',')) {
        const auto parts = split_on(dev, ':');
        if (parts.size() != 2 || parts[0].empty() || (parts[1] != "a" && parts[1] != "ag"))
          throw reader.error("device must be '<location>:a' or '<location>:ag', got '" + std::string(dev) + "'");
        for (const auto& d : s.devices)
          if (d.location == parts[0])
            throw reader.error("device '" + std::string(parts[0]) + "' listed twice");
        s.devices.push_back({std::string(parts[0]),
                             parts[1] == "a" ? DeviceChannels::Accel : DeviceChannels::AccelGyro});
      }
      m.samples.push_back(std::move(s));
    } else {
      throw reader.error("unknown directive '" + std::string(toks[0]) + "'");
    }
  }
  if (m.mapping_path.empty()) throw reader.error("manifest has no mapping line");
  if (m.labels.empty()) throw reader.error("manifest has no labels line");
  return m;
}

inline Manifest read_manifest_file(const std::filesystem::path& path) {
  return parse_manifest(read_file(path), path.string(), path.parent_path());
}

/// Splits a recording into per-device blocks as declared by the sample.
inline std::vector<DeviceRecording> parse_recording(std::string_view text, const std::string& source,
                                                    const std::vector<DeviceSpec>& devices) {
  LineReader reader(text, source);
  std::string_view line;
  if (!reader.next(line)) throw reader.error("empty file; expected header 'T W'");
  const auto header = split_ws(line);
  if (header.size() != 2) throw reader.error("header must be 'T W'");
  const auto frames = parse_count(header[0], reader, kMaxFrames);
  const auto width = parse_count(header[1], reader, 6 * kMaxJoints);
  if (frames == 0) throw reader.error("T must be positive");
  std::size_t expected = 0;
  for (const auto& d : devices) expected += static_cast<std::size_t>(d.channels);
  if (width != expected)
    throw reader.error("W = " + std::to_string(width) + " but the manifest declares " +
                       std::to_string(expected) + " columns");

  std::vector<DeviceRecording> out;
  for (const auto& d : devices) out.push_back({d.location, d.channels, {}});
  for (std::size_t t = 0; t < frames; ++t) {
    if (!reader.next(line))
      throw reader.error("expected " + std::to_string(frames) + " frame lines, found " + std::to_string(t));
    const auto toks = split_ws(line);
    if (toks.size() != width)
      throw reader.error("expected " + std::to_string(width) + " values, found " + std::to_string(toks.size()));
    std::size_t col = 0;
    for (auto& rec : out)
      for (std::size_t c = 0; c < rec.width(); ++c) rec.samples.push_back(parse_real(toks[col++], reader));
  }
  while (reader.next(line))
    if (!split_ws(line).empty()) throw reader.error("trailing data after the last frame");
  return out;
}

inline std::vector<DeviceRecording> read_recording_file(const std::filesystem::path& path,
                                                        const std::vector<DeviceSpec>& devices) {
  return parse_recording(read_file(path), path.string(), devices);
}

inline std::string format_recording(const std::vector<DeviceRecording>& devices) {
  if (devices.empty()) throw Error(ErrorKind::Empty, "recording without devices");
  const std::size_t frames = devices.front().frames();
  std::size_t width = 0;
  for (const auto& d : devices) {
    if (d.frames() != frames) throw Error(ErrorKind::ShapeMismatch, "devices disagree on frame count");
    width += d.width();
  }
  std::string out = std::to_string(frames) + " " + std::to_string(width) + "\n";
  for (std::size_t t = 0; t < frames; ++t) {
    for (const auto& d : devices)
      for (std::size_t c = 0; c < d.width(); ++c) {
        append_real(out, d.samples[t * d.width() + c]);
        out += ' ';
      }
    out.back() = '\n';
  }
  return out;
}

}  // namespace unimts::io
