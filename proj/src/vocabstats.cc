#include "domforge/vocabstats.h"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "domforge/error.h"
#include "domforge/io.h"
#include "domforge/parallel.h"
#include "domforge/unicode.h"

namespace domforge {

namespace fs = std::filesystem;

namespace {

struct WordEncoding {
  std::uint64_t pieces = 0;
  bool single = false;
};

// Encodes every distinct word once; corpus statistics are then weighted sums
// over the table instead of a second pass over the text.
std::vector<std::pair<const std::pair<const std::string, std::uint64_t>*, WordEncoding>>
encode_types(const Vocabulary& vocab, const FrequencyTable& freq, unsigned workers) {
  std::vector<std::pair<const std::pair<const std::string, std::uint64_t>*, WordEncoding>>
      types;
  types.reserve(freq.counts.size());
  for (const auto& entry : freq.counts) types.push_back({&entry, {}});
  parallel_for(types.size(), workers, [&](std::size_t i) {
    const std::string& word = types[i].first->first;
    const auto ids = encode_word_ids(vocab, word);
    types[i].second.pieces = ids.size();
    types[i].second.single = ids.size() == 1 && vocab.piece(ids.front()) == word;
  });
  return types;
}

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

void FrequencyTable::add(std::string_view word, std::uint64_t n) {
  if (n == 0) return;
  auto it = counts.find(std::string(word));
  if (it == counts.end()) {
    counts.emplace(std::string(word), n);
  } else {
    it->second += n;
  }
  total += n;
}

void FrequencyTable::merge(const FrequencyTable& other) {
  for (const auto& [word, n] : other.counts) counts[word] += n;
  total += other.total;
}

std::vector<std::pair<std::string, std::uint64_t>> FrequencyTable::sorted() const {
  std::vector<std::pair<std::string, std::uint64_t>> rows(counts.begin(), counts.end());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return rows;
}

void count_document(FrequencyTable& table, const Document& doc) {
  if (const auto bad = unicode::find_invalid_utf8(doc.text)) {
    throw IngestionError("document '" + doc.id + "' is not valid UTF-8 (byte " +
                         std::to_string(*bad) + ")");
  }
  for (const TokenSpan& span : pre_tokenize_spans(doc.text)) {
    table.add(std::string_view(doc.text).substr(span.begin, span.end - span.begin));
  }
}

FrequencyTable count_words(std::span<const Document> docs, unsigned workers) {
  const std::size_t shards = std::max<std::size_t>(1, std::min<std::size_t>(workers, docs.size()));
  std::vector<FrequencyTable> partial(shards);
  const std::size_t chunk = (docs.size() + shards - 1) / std::max<std::size_t>(shards, 1);
  parallel_for(shards, workers, [&](std::size_t shard) {
    const std::size_t begin = shard * chunk;
    const std::size_t end = std::min(docs.size(), begin + chunk);
    for (std::size_t i = begin; i < end; ++i) count_document(partial[shard], docs[i]);
  });
  FrequencyTable result = std::move(partial.front());
  for (std::size_t i = 1; i < partial.size(); ++i) result.merge(partial[i]);
  return result;
}

void write_frequency_tsv(const FrequencyTable& table, std::ostream& out) {
  for (const auto& [word, n] : table.sorted()) out << word << '\t' << n << '\n';
}

TokenizationStats table_stats(const Vocabulary& vocab, const FrequencyTable& freq,
                              unsigned workers) {
  TokenizationStats stats;
  for (const auto& [entry, enc] : encode_types(vocab, freq, workers)) {
    stats.word_count += entry->second;
    stats.piece_count += entry->second * enc.pieces;
    if (!enc.single) stats.oov_count += entry->second;
  }
  stats.degenerate = stats.word_count == 0;
  if (!stats.degenerate) {
    stats.coverage = ratio(stats.word_count - stats.oov_count, stats.word_count);
    stats.oov_rate = ratio(stats.oov_count, stats.word_count);
    stats.bpe_tok_ratio = ratio(stats.piece_count, stats.word_count);
  }
  return stats;
}

TokenizationStats corpus_stats(const Vocabulary& vocab, std::span<const Document> docs,
                               unsigned workers) {
  return table_stats(vocab, count_words(docs, workers), workers);
}

nlohmann::json to_json(const TokenizationStats& stats) {
  return {
      {"word_count", stats.word_count},   {"oov_count", stats.oov_count},
      {"piece_count", stats.piece_count}, {"coverage", stats.coverage},
      {"oov_rate", stats.oov_rate},       {"bpe_tok_ratio", stats.bpe_tok_ratio},
      {"degenerate", stats.degenerate},
  };
}

std::vector<OovWord> ranked_oov_words(const Vocabulary& vocab, const FrequencyTable& freq,
                                      std::uint64_t min_count, unsigned workers) {
  std::vector<OovWord> words;
  for (const auto& [entry, enc] : encode_types(vocab, freq, workers)) {
    if (!enc.single && entry->second >= min_count) {
      words.push_back({entry->first, entry->second, enc.pieces});
    }
  }
  std::sort(words.begin(), words.end(), [](const OovWord& a, const OovWord& b) {
    return a.count != b.count ? a.count > b.count : a.word < b.word;
  });
  return words;
}

Selection select_protected(const Vocabulary& vocab, const FrequencyTable& freq,
                           double threshold, const SelectOptions& options) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ValidationError("threshold must be in (0, 1], got " + std::to_string(threshold));
  }
  const TokenizationStats base = table_stats(vocab, freq);
  const std::vector<OovWord> candidates = ranked_oov_words(vocab, freq, options.min_count);

  Selection selection;
  selection.baseline_coverage = base.coverage;
  std::uint64_t covered = base.word_count - base.oov_count;
  const auto coverage = [&] { return ratio(covered, base.word_count); };

  std::size_t k = 0;
  while (coverage() < threshold && k < candidates.size()) covered += candidates[k++].count;
  selection.unreachable = coverage() < threshold;
  selection.minimal_count = k;

  if (options.round_to > 0 && k > 0) {
    const std::size_t rounded = (k + options.round_to - 1) / options.round_to * options.round_to;
    while (k < std::min(rounded, candidates.size())) covered += candidates[k++].count;
  }
  for (std::size_t i = 0; i < k; ++i) selection.words.push_back(candidates[i].word);
  selection.coverage = coverage();
  return selection;
}

nlohmann::json to_json(const Selection& selection) {
  return {
      {"words", selection.words},
      {"count", selection.words.size()},
      {"minimal_count", selection.minimal_count},
      {"unreachable", selection.unreachable},
      {"baseline_coverage", selection.baseline_coverage},
      {"coverage", selection.coverage},
  };
}

CoverageCurve coverage_curve(const Vocabulary& vocab, const FrequencyTable& freq,
                             std::span<const std::size_t> checkpoints,
                             std::uint64_t min_count) {
  const TokenizationStats base = table_stats(vocab, freq);
  const std::vector<OovWord> ranked = ranked_oov_words(vocab, freq, min_count);
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (checkpoints[i] > ranked.size()) {
      throw ValidationError("checkpoint " + std::to_string(checkpoints[i]) +
                            " exceeds the number of OOV word types (" +
                            std::to_string(ranked.size()) + ")");
    }
    if (i > 0 && checkpoints[i] <= checkpoints[i - 1]) {
      throw ValidationError("checkpoints must be strictly increasing");
    }
  }

  CoverageCurve curve;
  std::uint64_t covered = base.word_count - base.oov_count;
  std::uint64_t pieces = base.piece_count;
  std::size_t k = 0;
  for (std::size_t checkpoint : checkpoints) {
    for (; k < checkpoint; ++k) {
      covered += ranked[k].count;
      pieces -= ranked[k].count * (ranked[k].pieces - 1);
    }
    curve.rows.push_back(
        {checkpoint, ratio(covered, base.word_count), ratio(pieces, base.word_count)});
  }
  return curve;
}

nlohmann::json to_json(const CoverageCurve& curve) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : curve.rows) {
    rows.push_back({{"added", row.added},
                    {"coverage", row.coverage},
                    {"bpe_tok_ratio", row.bpe_tok_ratio}});
  }
  return {{"rows", std::move(rows)}};
}

std::string format_table(const CoverageCurve& curve) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "added" << std::setw(12) << "coverage"
      << "bpe/tok\n";
  for (const auto& row : curve.rows) {
    std::ostringstream cov;
    cov << std::fixed << std::setprecision(1) << row.coverage * 100.0 << '%';
    out << std::left << std::setw(12) << ("+" + std::to_string(row.added)) << std::setw(12)
        << cov.str() << std::fixed << std::setprecision(2) << row.bpe_tok_ratio << '\n';
  }
  return out.str();
}

nlohmann::json ExtensionManifest::to_json() const {
  return {
      {"added_words", added_words},
      {"first_new_id", first_new_id},
      {"seed", seed},
      {"init_policy", init_policy},
  };
}

ExtensionManifest ExtensionManifest::from_json(const nlohmann::json& doc) {
  try {
    ExtensionManifest manifest;
    manifest.added_words = doc.at("added_words").get<std::vector<std::string>>();
    manifest.first_new_id = doc.at("first_new_id").get<std::uint32_t>();
    manifest.seed = doc.at("seed").get<std::uint64_t>();
    manifest.init_policy = doc.at("init_policy").get<std::string>();
    return manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed extension manifest: ") + e.what());
  }
}

ExtensionManifest emit_extension(const Vocabulary& vocab, std::span<const std::string> words,
                                 std::uint64_t seed, const fs::path& out_dir) {
  std::unordered_set<std::string_view> seen;
  for (const std::string& word : words) {
    if (!seen.insert(word).second) {
      throw ValidationError("duplicate word in extension list: '" + word + "'");
    }
  }
  const Vocabulary extended = add_protected(vocab, words);

  ExtensionManifest manifest;
  manifest.added_words.assign(words.begin(), words.end());
  manifest.first_new_id = static_cast<std::uint32_t>(vocab.size());
  manifest.seed = seed;

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_file_atomic(out_dir / kExtendedVocabFile, extended.dump());
  write_file_atomic(out_dir / kManifestFile, manifest.to_json().dump(2) + "\n");
  return manifest;
}

}  // namespace domforge
