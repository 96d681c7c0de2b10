#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "domforge/corpus.h"
#include "domforge/tokenizer.h"
#include "json.hpp"

namespace domforge {

// Pre-token occurrence counts. total == sum of counts; every count >= 1.
struct FrequencyTable {
  std::unordered_map<std::string, std::uint64_t> counts;
  std::uint64_t total = 0;

  void add(std::string_view word, std::uint64_t n = 1);
  // Associative, commutative merge used to combine shard tables.
  void merge(const FrequencyTable& other);
  // Count descending, then word ascending.
  std::vector<std::pair<std::string, std::uint64_t>> sorted() const;

  bool operator==(const FrequencyTable&) const = default;
};

// Adds every pre-token of `doc`. Throws IngestionError naming the document
// when its text is not valid UTF-8.
void count_document(FrequencyTable& table, const Document& doc);

// Shards `docs` across `workers` threads and merges the shard tables.
FrequencyTable count_words(std::span<const Document> docs, unsigned workers = 1);

// TSV `word<TAB>count`, count descending then word ascending.
void write_frequency_tsv(const FrequencyTable& table, std::ostream& out);

struct TokenizationStats {
  std::uint64_t word_count = 0;
  std::uint64_t oov_count = 0;
  std::uint64_t piece_count = 0;
  double coverage = 1.0;
  double oov_rate = 0.0;
  double bpe_tok_ratio = 1.0;
  // Set for an empty corpus, where coverage and ratio are reported as 1.0.
  bool degenerate = true;
};

TokenizationStats table_stats(const Vocabulary& vocab, const FrequencyTable& freq,
                              unsigned workers = 1);
TokenizationStats corpus_stats(const Vocabulary& vocab, std::span<const Document> docs,
                               unsigned workers = 1);
nlohmann::json to_json(const TokenizationStats& stats);

// A word that does not encode as a single piece, with its corpus count and
// current piece count.
struct OovWord {
  std::string word;
  std::uint64_t count = 0;
  std::uint64_t pieces = 0;
};

// OOV words with count >= min_count, sorted by count descending then word
// ascending. This ordering drives both selection and the coverage curve.
std::vector<OovWord> ranked_oov_words(const Vocabulary& vocab, const FrequencyTable& freq,
                                      std::uint64_t min_count = 1, unsigned workers = 1);

struct SelectOptions {
  // Words seen fewer times are never candidates.
  std::uint64_t min_count = 2;
  // When > 0, the selected count is rounded up to a multiple of this value
  // (bounded by the number of candidates).
  std::size_t round_to = 0;
};

struct Selection {
  std::vector<std::string> words;
  bool unreachable = false;
  double baseline_coverage = 1.0;
  // Coverage after adding `words`.
  double coverage = 1.0;
  // Size of the minimal prefix before any rounding.
  std::size_t minimal_count = 0;
};

// Shortest prefix of the ranked OOV list whose addition brings occurrence
// coverage to at least `threshold`. If no prefix reaches it, every candidate
// is returned and `unreachable` is set. Throws ValidationError unless
// 0 < threshold <= 1.
Selection select_protected(const Vocabulary& vocab, const FrequencyTable& freq,
                           double threshold, const SelectOptions& options = {});
nlohmann::json to_json(const Selection& selection);

struct CoverageRow {
  std::size_t added = 0;
  double coverage = 1.0;
  double bpe_tok_ratio = 1.0;
};

struct CoverageCurve {
  std::vector<CoverageRow> rows;
};

// Coverage and BPE/TOK ratio after adding the top-k ranked OOV words for each
// checkpoint k, counting each added word as one piece. Checkpoints must be
// strictly increasing and no larger than the number of ranked OOV words;
// otherwise ValidationError.
CoverageCurve coverage_curve(const Vocabulary& vocab, const FrequencyTable& freq,
                             std::span<const std::size_t> checkpoints,
                             std::uint64_t min_count = 1);
nlohmann::json to_json(const CoverageCurve& curve);
std::string format_table(const CoverageCurve& curve);

// What a downstream trainer needs to initialize the new embedding rows.
struct ExtensionManifest {
  std::vector<std::string> added_words;
  std::uint32_t first_new_id = 0;
  std::uint64_t seed = 0;
  std::string init_policy = "random";

  nlohmann::json to_json() const;
  static ExtensionManifest from_json(const nlohmann::json& doc);
  bool operator==(const ExtensionManifest&) const = default;
};

inline constexpr std::string_view kExtendedVocabFile = "vocab.extended.json";
inline constexpr std::string_view kManifestFile = "extension_manifest.json";

// Writes the extended vocabulary and its manifest into `out_dir`. Throws
// ValidationError on duplicate words and IoError on write failure.
ExtensionManifest emit_extension(const Vocabulary& vocab, std::span<const std::string> words,
                                 std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace domforge
