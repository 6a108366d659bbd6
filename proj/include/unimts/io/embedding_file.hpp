#pragma once

// Embedding table text format:
//   line 1: "N dim"
//   then N lines: id <TAB> text <TAB> dim whitespace-separated reals

#include <filesystem>
#include <string>
#include <string_view>

#include "unimts/error.hpp"
#include "unimts/io/parse.hpp"
#include "unimts/text_table.hpp"

namespace unimts::io {

inline constexpr std::size_t kMaxEmbeddingDim = 1 << 16;
inline constexpr std::size_t kMaxEmbeddingRows = 1 << 24;

inline TextEmbeddingTable parse_embeddings(std::string_view text, const std::string& source) {
  LineReader reader(text, source);
  std::string_view line;
  if (!reader.next(line)) throw reader.error("empty file; expected header 'N dim'");
  const auto header = split_ws(line);
  if (header.size() != 2) throw reader.error("header must be 'N dim'");
  const auto rows = parse_count(header[0], reader, kMaxEmbeddingRows);
  const auto dim = parse_count(header[1], reader, kMaxEmbeddingDim);
  if (dim == 0) throw reader.error("dim must be positive");

  TextEmbeddingTable table(dim);
  while (table.size() < rows) {
    if (!reader.next(line))
      throw reader.error("expected " + std::to_string(rows) + " rows, found " + std::to_string(table.size()));
    const auto fields = split_on(line, '\t');
    if (fields.size() != 3) throw reader.error("row must be 'id<TAB>text<TAB>values'");
    const auto id = fields[0];
    if (id.empty() || id.find(' ') != std::string_view::npos)
      throw reader.error("id must be nonempty and contain no spaces");
    const auto values = split_ws(fields[2]);
    if (values.size() != dim)
      throw Error(ErrorKind::DimMismatch, source + ":" + std::to_string(reader.line()) + ": expected " +
                                              std::to_string(dim) + " values, found " +
                                              std::to_string(values.size()));
    std::vector<double> vec;
    vec.reserve(dim);
    for (auto tok : values) vec.push_back(parse_real(tok, reader));
    if (table.find(id))
      throw Error(ErrorKind::DuplicateId,
                  source + ":" + std::to_string(reader.line()) + ": duplicate id '" + std::string(id) + "'");
    table.add(std::string(id), std::string(fields[1]), std::move(vec));
  }
  while (reader.next(line))
    if (!split_ws(line).empty()) throw reader.error("trailing data after the last row");
  return table;
}

inline TextEmbeddingTable read_embedding_file(const std::filesystem::path& path) {
  return parse_embeddings(read_file(path), path.string());
}

inline std::string format_embeddings(const TextEmbeddingTable& table) {
  std::string out = std::to_string(table.size()) + " " + std::to_string(table.dim()) + "\n";
  for (const auto& e : table.entries()) {
    out += e.id;
    out += '\t';
    out += e.text;
    out += '\t';
    for (std::size_t i = 0; i < e.vector.size(); ++i) {
      if (i) out += ' ';
      append_real(out, e.vector[i]);
    }
    out += '\n';
  }
  return out;
}

inline void write_embedding_file(const std::filesystem::path& path, const TextEmbeddingTable& table) {
  write_file(path, format_embeddings(table));
}

}  // namespace unimts::io
