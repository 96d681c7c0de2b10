#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "domforge/rng.h"
#include "json.hpp"

namespace domforge {

struct Section {
  std::string heading;
  std::string body;

  bool operator==(const Section&) const = default;
};

struct StructuredDoc {
  std::string doc_id;
  std::string title;
  std::vector<Section> sections;
};

inline constexpr std::string_view kPreambleHeading = "PREAMBLE";

// Splits `raw` into sections. A heading line is either
//   * `#`..`######` followed by whitespace and text, or
//   * a title-case line (every word capitalized apart from short function
//     words, at most 8 words, no trailing sentence punctuation) that is
//     followed by a blank line.
// Text before the first heading becomes a PREAMBLE section. Bodies are
// trimmed of surrounding whitespace. Throws IngestionError when `raw` has no
// non-whitespace content.
StructuredDoc parse_structured_doc(std::string_view raw, std::string doc_id,
                                   std::string title = {});

// Lowercase, trimmed, internal whitespace collapsed to single spaces.
std::string normalize_heading(std::string_view heading);

struct SectionRoleConfig {
  std::set<std::string> problem_headings;
  std::set<std::string> solution_headings;

  static SectionRoleConfig defaults();
  // {"problem_headings": [...], "solution_headings": [...]}; missing keys keep
  // the defaults. Throws ValidationError when the sets overlap.
  static SectionRoleConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  void validate() const;
};

struct SectionRoles {
  std::vector<std::size_t> problem;
  std::vector<std::size_t> solution;
};

SectionRoles classify_sections(const StructuredDoc& doc, const SectionRoleConfig& cfg);

struct Candidate {
  std::string doc_id;
  std::string title;
  std::string context;

  bool operator==(const Candidate&) const = default;
};

// Half-open code point range [char_start, char_end) inside
// candidates[doc_index].context. `text` is the expected span content.
struct AnswerSpan {
  std::size_t doc_index = 0;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::string text;

  bool operator==(const AnswerSpan&) const = default;
};

struct RCExample {
  std::string example_id;
  std::string query;
  std::vector<Candidate> candidates;
  std::optional<AnswerSpan> answer;  // absent: unanswerable

  bool operator==(const RCExample&) const = default;
};

nlohmann::json to_json(const RCExample& example);
RCExample rc_example_from_json(const nlohmann::json& doc);

// Empty when the example is well formed. Otherwise one message per violated
// invariant (index range, empty or unfaithful span, duplicate candidates).
std::vector<std::string> check_invariants(const RCExample& example);

// Title (if any) and every section, joined by blank lines.
std::string render_document(const StructuredDoc& doc);

enum class SkipReason { kNoProblemSection, kNoSolutionSection, kEmptyQuery, kEmptyAnswer };
std::string_view to_string(SkipReason reason);

// nullopt when `doc` can produce an example under `cfg`.
std::optional<SkipReason> ineligibility(const StructuredDoc& doc, const SectionRoleConfig& cfg);

// Documents negatives are drawn from. `exclude` is the position of the
// source document itself, which is never drawn.
struct NegativePool {
  std::span<const StructuredDoc> docs;
  std::optional<std::size_t> exclude;

  std::size_t available() const { return docs.size() - (exclude ? 1 : 0); }
};

// Builds one synthetic example: first problem section as query, the document
// minus that section as positive context, first solution section body as
// the answer span, plus `num_negatives` distinct pool documents. Candidate
// order is shuffled. Returns nullopt for ineligible documents; throws
// ValidationError when the pool holds fewer than `num_negatives` documents.
std::optional<RCExample> make_rc_example(const StructuredDoc& doc, const NegativePool& pool,
                                         const SectionRoleConfig& cfg,
                                         std::size_t num_negatives, Rng& rng);

struct RcGenerationReport {
  std::uint64_t documents_seen = 0;
  std::uint64_t eligible = 0;
  std::map<std::string, std::uint64_t> skipped;

  std::uint64_t skipped_total() const;
  nlohmann::json to_json() const;
};

struct RcCorpus {
  std::vector<RCExample> examples;
  RcGenerationReport report;
};

// One example per eligible document, in corpus order. The randomness for the
// i-th document comes from derive_seed(seed, i), so the output does not
// depend on `workers`. Throws ValidationError on duplicate doc ids.
RcCorpus generate_rc_corpus(std::span<const StructuredDoc> docs, const SectionRoleConfig& cfg,
                            std::size_t num_negatives, std::uint64_t seed,
                            unsigned workers = 1);

}  // namespace domforge
