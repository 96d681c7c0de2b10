#include "domforge/tokenizer.h"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "domforge/error.h"
#include "domforge/unicode.h"

namespace domforge {

namespace {

enum class CharClass { kSpace, kAlnum, kOther };

CharClass classify(const unicode::DecodedChar& c) {
  if (!c.valid) return CharClass::kOther;
  if (unicode::is_space(c.code_point)) return CharClass::kSpace;
  return unicode::is_alnum(c.code_point) ? CharClass::kAlnum : CharClass::kOther;
}

bool has_space(std::string_view word) {
  for (std::size_t pos = 0; pos < word.size();) {
    const auto c = unicode::decode_at(word, pos);
    if (c.valid && unicode::is_space(c.code_point)) return true;
    pos += c.length;
  }
  return false;
}

constexpr std::uint64_t merge_key(PieceId left, PieceId right) {
  return (static_cast<std::uint64_t>(left) << 32) | right;
}

}  // namespace

std::vector<TokenSpan> pre_tokenize_spans(std::string_view text) {
  std::vector<TokenSpan> spans;
  std::size_t pos = 0;
  std::size_t start = 0;
  CharClass current = CharClass::kSpace;
  while (pos < text.size()) {
    const auto c = unicode::decode_at(text, pos);
    const CharClass cls = classify(c);
    if (cls != current) {
      if (current != CharClass::kSpace) spans.push_back({start, pos});
      start = pos;
      current = cls;
    }
    pos += c.length;
  }
  if (current != CharClass::kSpace) spans.push_back({start, pos});
  return spans;
}

std::vector<std::string> pre_tokenize(std::string_view text) {
  std::vector<std::string> words;
  for (const TokenSpan& span : pre_tokenize_spans(text)) {
    words.emplace_back(text.substr(span.begin, span.end - span.begin));
  }
  return words;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary Vocabulary::create(std::vector<std::string> pieces,
                              std::vector<MergeRule> merges,
                              std::vector<std::string> protected_words,
                              std::string unk_piece) {
  Vocabulary vocab;
  vocab.pieces_ = std::move(pieces);
  vocab.merges_ = std::move(merges);
  vocab.protected_.insert(protected_words.begin(), protected_words.end());
  if (vocab.pieces_.size() >= std::numeric_limits<PieceId>::max()) {
    throw VocabularyError("vocabulary too large");
  }
  vocab.index();
  const auto unk = vocab.id(unk_piece);
  if (!unk) throw VocabularyError("unk piece '" + unk_piece + "' is not in pieces");
  vocab.unk_id_ = *unk;
  return vocab;
}

void Vocabulary::index() {
  ids_.clear();
  ids_.reserve(pieces_.size());
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (pieces_[i].empty()) {
      throw VocabularyError("empty piece at id " + std::to_string(i));
    }
    if (!ids_.emplace(pieces_[i], static_cast<PieceId>(i)).second) {
      throw VocabularyError("duplicate piece '" + pieces_[i] + "'");
    }
  }
  merge_index_.clear();
  merge_index_.reserve(merges_.size());
  for (std::size_t rank = 0; rank < merges_.size(); ++rank) {
    const MergeRule& rule = merges_[rank];
    const auto left = id(rule.left);
    const auto right = id(rule.right);
    const auto merged = id(rule.left + rule.right);
    if (!left || !right || !merged) {
      throw VocabularyError("merge rule " + std::to_string(rank) + " ('" + rule.left +
                            "', '" + rule.right + "') references a missing piece");
    }
    // A repeated rule keeps its first (lowest) rank.
    merge_index_.try_emplace(merge_key(*left, *right),
                             static_cast<std::uint32_t>(rank), *merged);
  }
  for (const auto& word : protected_) {
    if (!ids_.contains(word)) {
      throw VocabularyError("protected word '" + word + "' is not a piece");
    }
  }
}

Vocabulary Vocabulary::from_json(const nlohmann::json& doc) {
  try {
    std::vector<MergeRule> merges;
    for (const auto& rule : doc.at("merges")) {
      if (!rule.is_array() || rule.size() != 2) {
        throw VocabularyError("merge rule must be a two-element array");
      }
      merges.push_back({rule[0].get<std::string>(), rule[1].get<std::string>()});
    }
    std::vector<std::string> protected_words;
    if (doc.contains("protected")) {
      protected_words = doc.at("protected").get<std::vector<std::string>>();
    }
    return create(doc.at("pieces").get<std::vector<std::string>>(), std::move(merges),
                  std::move(protected_words), doc.at("unk_piece").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw VocabularyError(std::string("malformed vocabulary: ") + e.what());
  }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocabulary file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw VocabularyError("cannot parse " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

nlohmann::json Vocabulary::to_json() const {
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& rule : merges_) merges.push_back({rule.left, rule.right});
  return {
      {"pieces", pieces_},
      {"merges", std::move(merges)},
      {"protected", protected_words()},
      {"unk_piece", unk_piece()},
  };
}

std::string Vocabulary::dump() const { return to_json().dump() + "\n"; }

std::optional<PieceId> Vocabulary::id(std::string_view piece) const {
  const auto it = ids_.find(piece);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

bool Vocabulary::is_protected(std::string_view word) const {
  return protected_.find(word) != protected_.end();
}

std::vector<std::string> Vocabulary::protected_words() const {
  std::vector<std::string> words(protected_.begin(), protected_.end());
  std::sort(words.begin(), words.end());
  return words;
}

std::optional<std::pair<std::uint32_t, PieceId>> Vocabulary::merge(PieceId left,
                                                                   PieceId right) const {
  const auto it = merge_index_.find(merge_key(left, right));
  if (it == merge_index_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Encoding

std::vector<PieceId> encode_word_ids(const Vocabulary& vocab, std::string_view word) {
  if (vocab.is_protected(word)) return {*vocab.id(word)};

  std::vector<PieceId> symbols;
  symbols.reserve(word.size());
  for (std::size_t pos = 0; pos < word.size();) {
    const auto c = unicode::decode_at(word, pos);
    const auto id = vocab.id(word.substr(pos, c.length));
    symbols.push_back(id.value_or(vocab.unk_id()));
    pos += c.length;
  }

  // Lowest rank first; strict comparison keeps the leftmost occurrence.
  while (symbols.size() > 1) {
    std::uint32_t best_rank = std::numeric_limits<std::uint32_t>::max();
    std::size_t best_pos = 0;
    PieceId best_result = 0;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      const auto merge = vocab.merge(symbols[i], symbols[i + 1]);
      if (merge && merge->first < best_rank) {
        best_rank = merge->first;
        best_pos = i;
        best_result = merge->second;
      }
    }
    if (best_rank == std::numeric_limits<std::uint32_t>::max()) break;
    symbols[best_pos] = best_result;
    symbols.erase(symbols.begin() + static_cast<std::ptrdiff_t>(best_pos) + 1);
  }
  return symbols;
}

std::vector<std::string> encode_word(const Vocabulary& vocab, std::string_view word) {
  std::vector<std::string> pieces;
  for (PieceId id : encode_word_ids(vocab, word)) pieces.push_back(vocab.piece(id));
  return pieces;
}

PieceSequence encode_text(const Vocabulary& vocab, std::string_view text) {
  PieceSequence seq;
  for (const TokenSpan& span : pre_tokenize_spans(text)) {
    seq.word_boundaries.push_back(seq.pieces.size());
    for (PieceId id : encode_word_ids(vocab, text.substr(span.begin, span.end - span.begin))) {
      seq.pieces.push_back(vocab.piece(id));
    }
  }
  return seq;
}

std::string decode(const Vocabulary& vocab, const PieceSequence& seq) {
  const auto& bounds = seq.word_boundaries;
  if (!seq.pieces.empty() && (bounds.empty() || bounds.front() != 0)) {
    throw VocabularyError("word boundaries must start at 0");
  }
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    if (bounds[i] >= seq.pieces.size() || (i > 0 && bounds[i] <= bounds[i - 1])) {
      throw VocabularyError("word boundaries must be strictly increasing piece indices");
    }
  }
  std::string text;
  std::size_t next_boundary = 0;
  for (std::size_t i = 0; i < seq.pieces.size(); ++i) {
    if (!vocab.contains(seq.pieces[i])) {
      throw VocabularyError("unknown piece '" + seq.pieces[i] + "'");
    }
    if (next_boundary < bounds.size() && bounds[next_boundary] == i) {
      if (i > 0) text.push_back(' ');
      ++next_boundary;
    }
    text += seq.pieces[i];
  }
  return text;
}

bool is_single_token(const Vocabulary& vocab, std::string_view word) {
  const auto ids = encode_word_ids(vocab, word);
  return ids.size() == 1 && vocab.piece(ids.front()) == word;
}

Vocabulary add_protected(const Vocabulary& vocab, std::span<const std::string> words) {
  std::vector<std::string> pieces = vocab.pieces();
  std::vector<std::string> protected_words = vocab.protected_words();
  std::unordered_set<std::string> seen;
  for (const std::string& word : words) {
    if (word.empty()) throw VocabularyError("cannot protect an empty word");
    if (has_space(word)) {
      throw VocabularyError("protected word '" + word + "' contains whitespace");
    }
    if (!vocab.contains(word) && seen.insert(word).second) pieces.push_back(word);
    protected_words.push_back(word);
  }
  return Vocabulary::create(std::move(pieces), vocab.merges(), std::move(protected_words),
                            vocab.unk_piece());
}

}  // namespace domforge
