#pragma once

// Description file: one description per line. Lines above a line holding
// only "--" are originals; lines below it are paraphrases. Blank lines and
// '#' comments are skipped. The n-th description (0-based, counting both
// sections) of stem S gets the id "S:n".

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "unimts/error.hpp"
#include "unimts/io/parse.hpp"

namespace unimts {

struct Description {
  std::string id;
  std::string text;
  bool paraphrase = false;

  bool operator==(const Description&) const = default;
};

}  // namespace unimts

namespace unimts::io {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<Description> parse_descriptions(std::string_view text, const std::string& source,
                                                   const std::string& stem) {
  LineReader reader(text, source);
  std::vector<Description> out;
  bool paraphrases = false;
  std::string_view line;
  while (reader.next_content(line)) {
    auto body = trim(line);
    if (body == "--") {
      if (paraphrases) throw reader.error("second '--' separator");
      paraphrases = true;
      continue;
    }
    out.push_back({stem + ":" + std::to_string(out.size()), std::move(body), paraphrases});
  }
  if (out.empty()) throw Error(ErrorKind::Empty, source + ": no descriptions");
  return out;
}

inline std::vector<Description> read_description_file(const std::filesystem::path& path) {
  return parse_descriptions(read_file(path), path.string(), path.stem().string());
}

inline std::string format_descriptions(const std::vector<Description>& ds) {
  std::string out;
  bool separated = false;
  for (const auto& d : ds) {
    if (d.paraphrase && !separated) {
      out += "--\n";
      separated = true;
    }
    out += d.text + "\n";
  }
  return out;
}

}  // namespace unimts::io
