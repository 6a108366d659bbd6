#pragma once

// Text embedding providers: frozen tables loaded from files, and a small
// trainable hashed bag-of-words encoder for self-contained runs.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "unimts/diff/ops.hpp"
#include "unimts/diff/tape.hpp"
#include "unimts/error.hpp"
#include "unimts/io/description_file.hpp"
#include "unimts/io/embedding_file.hpp"
#include "unimts/params.hpp"
#include "unimts/rng.hpp"
#include "unimts/text_table.hpp"

namespace unimts {

/// Reads an embedding file into a frozen table, optionally L2-normalized.
inline TextEmbeddingTable load_embeddings(const std::filesystem::path& path, bool l2_normalize = false) {
  auto table = io::read_embedding_file(path);
  if (l2_normalize) table.l2_normalize();
  table.set_frozen(true);
  return table;
}

/// Lowercased alphanumeric runs.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      cur += static_cast<char>(std::tolower(u));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// FNV-1a of the token, reduced modulo the slot count.
inline std::size_t token_slot(std::string_view token, std::size_t slots) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : token) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(h % slots);
}

enum class TextMode : std::uint32_t { File = 0, Trainable = 1 };

struct TextEncoderConfig {
  TextMode mode = TextMode::File;
  std::size_t slots = 4096;
  std::size_t token_dim = 64;

  bool operator==(const TextEncoderConfig&) const = default;
};

namespace param_names {
inline constexpr const char* kTextTokens = "text.tokens";
inline constexpr const char* kTextProj = "text.proj";
inline constexpr const char* kTextPrefix = "text.";
}  // namespace param_names

/// Hashed bag-of-words: tokens index rows of a slots x token_dim table, the
/// rows are mean-pooled and mapped linearly to the output dimension.
template <class Real>
class HashTextEncoder {
 public:
  HashTextEncoder(TextEncoderConfig config, std::size_t dim) : config_(config), dim_(dim) {
    if (config_.slots == 0 || config_.token_dim == 0 || dim_ == 0)
      throw Error(ErrorKind::BadConfig, "text encoder sizes must be positive");
  }

  std::size_t dim() const { return dim_; }

  void init_parameters(ParameterStore<Real>& store, Rng& rng) const {
    diff::Tensor<Real> tokens(diff::Shape{config_.slots, config_.token_dim});
    for (auto& v : tokens.values()) v = static_cast<Real>(rng.normal());
    store.add(param_names::kTextTokens, std::move(tokens));
    const double bound = std::sqrt(6.0 / static_cast<double>(config_.token_dim + dim_));
    diff::Tensor<Real> proj(diff::Shape{dim_, config_.token_dim});
    for (auto& v : proj.values()) v = static_cast<Real>((2.0 * rng.uniform() - 1.0) * bound);
    store.add(param_names::kTextProj, std::move(proj));
  }

  std::vector<std::size_t> slots_of(std::string_view text) const {
    const auto tokens = tokenize(text);
    if (tokens.empty()) throw Error(ErrorKind::EmptyText, "text '" + std::string(text) + "' has no tokens");
    std::vector<std::size_t> rows;
    rows.reserve(tokens.size());
    for (const auto& t : tokens) rows.push_back(token_slot(t, config_.slots));
    return rows;
  }

  diff::Var<Real> embed(diff::Tape<Real>& tape, ParameterStore<Real>& store, std::string_view text) const {
    const auto pooled = diff::gather_mean_rows(tape.parameter(store.at(param_names::kTextTokens)), slots_of(text));
    const auto mapped = diff::matmul(tape.parameter(store.at(param_names::kTextProj)),
                                     diff::reshape(pooled, {config_.token_dim, 1}));
    return diff::reshape(mapped, {dim_});
  }

  std::vector<double> embed_value(const ParameterStore<Real>& store, std::string_view text) const {
    const auto rows = slots_of(text);
    const auto& tokens = store.at(param_names::kTextTokens).value;
    const auto& proj = store.at(param_names::kTextProj).value;
    std::vector<double> pooled(config_.token_dim, 0.0);
    for (auto r : rows)
      for (std::size_t j = 0; j < config_.token_dim; ++j) pooled[j] += static_cast<double>(tokens(r, j));
    for (auto& v : pooled) v /= static_cast<double>(rows.size());
    std::vector<double> out(dim_, 0.0);
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < config_.token_dim; ++j) out[i] += static_cast<double>(proj(i, j)) * pooled[j];
    return out;
  }

 private:
  TextEncoderConfig config_;
  std::size_t dim_;
};

template <class Real>
void set_text_frozen(ParameterStore<Real>& store, bool frozen) {
  for (auto* p : store.with_prefix(param_names::kTextPrefix)) p->trainable = !frozen;
}

/// Descriptions per motion sequence: originals followed by paraphrases.
class DescriptionSet {
 public:
  void add(std::vector<Description> descriptions) {
    if (descriptions.empty()) throw Error(ErrorKind::Empty, "sequence without descriptions");
    sets_.push_back(std::move(descriptions));
  }

  std::size_t size() const { return sets_.size(); }
  const std::vector<Description>& at(std::size_t seq) const {
    if (seq >= sets_.size()) throw Error(ErrorKind::UnknownId, "no descriptions for sequence " + std::to_string(seq));
    return sets_[seq];
  }

 private:
  std::vector<std::vector<Description>> sets_;
};

/// Uniform draw over all descriptions of `seq`.
inline const Description& sample_description(const DescriptionSet& ds, std::size_t seq, Rng& rng) {
  const auto& all = ds.at(seq);
  if (all.empty()) throw Error(ErrorKind::Empty, "sequence " + std::to_string(seq) + " has no descriptions");
  return all[rng.below(all.size())];
}

}  // namespace unimts
