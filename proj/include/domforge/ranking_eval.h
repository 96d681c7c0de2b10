#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

namespace domforge {

// ---------------------------------------------------------------------------
// BM25

inline constexpr double kDefaultK1 = 1.2;
inline constexpr double kDefaultB = 0.75;

struct Posting {
  std::uint32_t doc = 0;  // ordinal
  std::uint32_t tf = 0;
};

// Index terms are lowercased pre-tokens.
std::vector<std::string> index_terms(std::string_view text);

class InvertedIndex {
 public:
  InvertedIndex(std::unordered_map<std::string, std::vector<Posting>> postings,
                std::vector<std::uint32_t> doc_lengths, std::vector<std::string> doc_ids,
                double k1, double b);

  std::size_t num_docs() const { return doc_ids_.size(); }
  const std::vector<std::uint32_t>& doc_lengths() const { return doc_lengths_; }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }
  double avg_doc_length() const { return avg_doc_length_; }
  double k1() const { return k1_; }
  double b() const { return b_; }
  // Empty span for unknown terms.
  std::span<const Posting> postings(std::string_view term) const;
  std::size_t num_terms() const { return postings_.size(); }

 private:
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::vector<std::uint32_t> doc_lengths_;
  std::vector<std::string> doc_ids_;
  double avg_doc_length_ = 0.0;
  double k1_;
  double b_;
};

// Throws ValidationError on an empty corpus or duplicate ids.
InvertedIndex build_index(std::span<const std::pair<std::string, std::string>> docs,
                          double k1 = kDefaultK1, double b = kDefaultB, unsigned workers = 1);

// ln((N - df + 0.5) / (df + 0.5) + 1)
double bm25_idf(std::size_t num_docs, std::size_t doc_freq);

struct RankedEntry {
  std::string doc_id;
  double score = 0.0;

  bool operator==(const RankedEntry&) const = default;
};

struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;  // score non-increasing, ids distinct
};

// Top `top_k` documents by BM25 score over the distinct query terms, ties
// broken by document ordinal. Zero-scoring documents fill the list when
// fewer than `top_k` documents match.
RankedList bm25_rank(const InvertedIndex& index, std::string_view query, std::size_t top_k,
                     std::string query_id = {});

// ---------------------------------------------------------------------------
// Reading comprehension

struct F1Options {
  bool remove_articles = false;
};

// Lowercase, drop punctuation, optionally drop a/an/the, split on whitespace.
std::vector<std::string> normalize_answer(std::string_view text, const F1Options& options = {});

// Bag-of-tokens F1. Both empty: 1.0; exactly one empty: 0.0.
double answer_f1(std::string_view prediction, std::string_view gold,
                 const F1Options& options = {});

struct RcScores {
  double f1 = 0.0;
  std::optional<double> ha_f1;  // undefined without answerable examples
  std::size_t examples = 0;
  std::size_t answerable = 0;
};

// F1 averages every gold example (missing predictions score as ""); HA_F1
// averages the examples whose gold answer is non-empty. Throws
// ValidationError for predictions without a gold entry.
RcScores eval_rc(const std::map<std::string, std::string>& predictions,
                 const std::map<std::string, std::string>& golds, const F1Options& options = {});

// ---------------------------------------------------------------------------
// Ranking metrics

using RelevanceJudgments = std::map<std::string, std::set<std::string>>;

int match_at_k(const RankedList& run, const std::set<std::string>& relevant, std::size_t k);

struct QueryMetrics {
  double ap = 0.0;
  double rr = 0.0;
  double p_at_1 = 0.0;
  double p_at_5 = 0.0;
  int match_at_1 = 0;
  int match_at_5 = 0;
};

// AP is the mean, over ranks r holding a relevant document, of
// (relevant documents within the top r) / r; 0 when none is retrieved.
QueryMetrics query_metrics(const RankedList& run, const std::set<std::string>& relevant);

struct RetrievalScores {
  // Means over queries with at least one relevant document.
  std::optional<double> map;
  std::optional<double> mrr;
  std::optional<double> p_at_1;
  std::optional<double> p_at_5;
  // Means over all queries; queries without relevant documents count as 0.
  double match_at_1 = 0.0;
  double match_at_5 = 0.0;
  std::size_t queries = 0;
  std::size_t judged_queries = 0;
};

// Throws ValidationError when a run's query has no judgment entry.
RetrievalScores eval_retrieval(std::span<const RankedList> runs,
                               const RelevanceJudgments& judgments);

nlohmann::json to_json(const RcScores& scores);
nlohmann::json to_json(const RetrievalScores& scores);
std::string format_table(const RcScores& scores);
std::string format_table(const RetrievalScores& scores, std::string_view system = "run");

// ---------------------------------------------------------------------------
// File formats

// `query_id<TAB>doc_id<TAB>rank<TAB>score`, lists ordered by rank.
std::vector<RankedList> read_runs(std::istream& in);
void write_runs(std::span<const RankedList> runs, std::ostream& out);

// `query_id<TAB>doc_id`; a line with an empty doc_id (or only a query_id)
// declares a query with no relevant documents.
RelevanceJudgments read_judgments(std::istream& in);

}  // namespace domforge
