#pragma once

// Skeleton structure file: one joint per line, "name parent", where parent is
// the name of an earlier joint or "-" for the root. Blank lines and lines
// starting with '#' are ignored.

#include <filesystem>
#include <string>
#include <string_view>

#include "unimts/error.hpp"
#include "unimts/io/parse.hpp"
#include "unimts/skeleton.hpp"

namespace unimts::io {

inline SkeletonStructure parse_structure(std::string_view text, const std::string& source) {
  LineReader reader(text, source);
  SkeletonStructure s;
  std::string_view line;
  while (reader.next_content(line)) {
    const auto toks = split_ws(line);
    if (toks.size() != 2) throw reader.error("expected 'name parent'");
    if (s.find(toks[0])) throw reader.error("duplicate joint name '" + std::string(toks[0]) + "'");
    if (s.joints() >= kMaxJoints) throw reader.error("too many joints");
    int parent = -1;
    if (toks[1] != "-") {
      const auto p = s.find(toks[1]);
      if (!p) throw reader.error("parent '" + std::string(toks[1]) + "' is not an earlier joint");
      parent = static_cast<int>(*p);
    }
    s.names.emplace_back(toks[0]);
    s.parents.push_back(parent);
  }
  if (s.joints() == 0) throw reader.error("structure file lists no joints");
  try {
    s.validate();
  } catch (const Error& e) {
    throw parse_error(source, reader.line(), e.what());
  }
  return s;
}

inline SkeletonStructure read_structure_file(const std::filesystem::path& path) {
  return parse_structure(read_file(path), path.string());
}

inline std::string format_structure(const SkeletonStructure& s) {
  std::string out;
  for (std::size_t v = 0; v < s.joints(); ++v) {
    out += s.names[v];
    out += ' ';
    out += s.parents[v] < 0 ? std::string("-") : s.names[static_cast<std::size_t>(s.parents[v])];
    out += '\n';
  }
  return out;
}

}  // namespace unimts::io
