#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"

namespace domforge {

using PieceId = std::uint32_t;

struct MergeRule {
  std::string left;
  std::string right;

  bool operator==(const MergeRule&) const = default;
};

// Byte range [begin, end) of one pre-token inside its source text.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Splits on Unicode whitespace, then at every alphanumeric/other boundary, so
// each pre-token is a maximal run of letters-or-digits or a maximal run of
// other non-space characters. "restart WAS8.5" -> restart, WAS8, ., 5
std::vector<std::string> pre_tokenize(std::string_view text);
std::vector<TokenSpan> pre_tokenize_spans(std::string_view text);

// Subword inventory, ranked merge rules and the protected-word set.
//
// Immutable once built; every factory validates the invariants:
//   * ids are dense and unique,
//   * both sides and the result of every merge are pieces,
//   * every protected word is a piece,
//   * the unk piece is a piece.
class Vocabulary {
 public:
  static Vocabulary create(std::vector<std::string> pieces,
                           std::vector<MergeRule> merges,
                           std::vector<std::string> protected_words,
                           std::string unk_piece);
  static Vocabulary from_json(const nlohmann::json& doc);
  static Vocabulary load(const std::filesystem::path& path);

  nlohmann::json to_json() const;
  // Serialized form written to vocabulary files (ends with a newline).
  std::string dump() const;

  std::size_t size() const { return pieces_.size(); }
  const std::vector<std::string>& pieces() const { return pieces_; }
  const std::vector<MergeRule>& merges() const { return merges_; }
  const std::string& unk_piece() const { return pieces_[unk_id_]; }
  PieceId unk_id() const { return unk_id_; }

  std::optional<PieceId> id(std::string_view piece) const;
  const std::string& piece(PieceId id) const { return pieces_.at(id); }
  bool contains(std::string_view piece) const { return id(piece).has_value(); }
  bool is_protected(std::string_view word) const;
  // Sorted ascending.
  std::vector<std::string> protected_words() const;

  // Merge lookup by piece ids: (rank, merged id).
  std::optional<std::pair<std::uint32_t, PieceId>> merge(PieceId left,
                                                         PieceId right) const;

 private:
  Vocabulary() = default;
  void index();

  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };

  std::vector<std::string> pieces_;
  std::vector<MergeRule> merges_;
  std::unordered_set<std::string, StringHash, std::equal_to<>> protected_;
  PieceId unk_id_ = 0;
  std::unordered_map<std::string, PieceId, StringHash, std::equal_to<>> ids_;
  // key = left << 32 | right; value = (rank, result)
  std::unordered_map<std::uint64_t, std::pair<std::uint32_t, PieceId>> merge_index_;
};

struct PieceSequence {
  std::vector<std::string> pieces;
  // Index of the first piece of each pre-token.
  std::vector<std::size_t> word_boundaries;

  bool operator==(const PieceSequence&) const = default;
};

std::vector<PieceId> encode_word_ids(const Vocabulary& vocab, std::string_view word);
std::vector<std::string> encode_word(const Vocabulary& vocab, std::string_view word);
PieceSequence encode_text(const Vocabulary& vocab, std::string_view text);

// Throws VocabularyError on a piece missing from the vocabulary or on
// malformed boundaries.
std::string decode(const Vocabulary& vocab, const PieceSequence& seq);

bool is_single_token(const Vocabulary& vocab, std::string_view word);

// Appends new words with dense ids and marks every word protected. Words that
// are already pieces keep their id and only gain the protected flag.
// Throws VocabularyError for empty words or words containing whitespace.
Vocabulary add_protected(const Vocabulary& vocab, std::span<const std::string> words);

}  // namespace domforge
