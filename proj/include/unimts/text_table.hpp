#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "unimts/error.hpp"

namespace unimts {

struct TextEntry {
  std::string id;
  std::string text;
  std::vector<double> vector;
};

/// Text id -> (text, embedding). Frozen tables are never modified by
/// training.
class TextEmbeddingTable {
 public:
  TextEmbeddingTable() = default;
  explicit TextEmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool frozen() const { return frozen_; }
  void set_frozen(bool f) { frozen_ = f; }

  void add(std::string id, std::string text, std::vector<double> vector) {
    if (vector.size() != dim_)
      throw Error(ErrorKind::DimMismatch, "embedding for '" + id + "' has " +
                                              std::to_string(vector.size()) + " values, expected " +
                                              std::to_string(dim_));
    if (index_.contains(id)) throw Error(ErrorKind::DuplicateId, "duplicate text id '" + id + "'");
    index_.emplace(id, entries_.size());
    entries_.push_back({std::move(id), std::move(text), std::move(vector)});
  }

  const TextEntry* find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

  const TextEntry& at(std::string_view id) const {
    if (const auto* e = find(id)) return *e;
    throw Error(ErrorKind::UnknownId, "unknown text id '" + std::string(id) + "'");
  }

  /// Entry by id, falling back to an exact text match.
  const TextEntry* lookup(std::string_view key) const {
    if (const auto* e = find(key)) return e;
    for (const auto& e : entries_)
      if (e.text == key) return &e;
    return nullptr;
  }

  const std::vector<TextEntry>& entries() const { return entries_; }

  void l2_normalize() {
    for (auto& e : entries_) {
      double n = 0.0;
      for (double v : e.vector) n += v * v;
      n = std::sqrt(n);
      if (n > 0.0)
        for (double& v : e.vector) v /= n;
    }
  }

  bool operator==(const TextEmbeddingTable& o) const {
    if (dim_ != o.dim_ || entries_.size() != o.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (entries_[i].id != o.entries_[i].id || entries_[i].text != o.entries_[i].text ||
          entries_[i].vector != o.entries_[i].vector)
        return false;
    return true;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<TextEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  bool frozen_ = true;
};

}  // namespace unimts
