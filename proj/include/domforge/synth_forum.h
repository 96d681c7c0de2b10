#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace domforge {

enum class PostType { kQuestion, kAnswer, kOther };

struct ForumPost {
  std::int64_t post_id = 0;
  PostType type = PostType::kOther;
  std::optional<std::int64_t> parent_id;           // answers only
  std::optional<std::int64_t> accepted_answer_id;  // questions only
  std::optional<std::string> title;
  std::string body;  // HTML
};

struct ParsedPosts {
  std::vector<ForumPost> posts;
  std::uint64_t rows = 0;
  // Rows skipped for a missing or non-numeric Id/PostTypeId, a duplicate Id,
  // an answer without ParentId, or a question with one.
  std::uint64_t malformed = 0;
};

// Streams a forum-archive Posts.xml (<posts><row .../>...</posts>). Per-row
// problems are counted in `malformed`; an XML or encoding error aborts with
// IngestionError.
ParsedPosts parse_posts(std::istream& in);
ParsedPosts parse_posts_file(const std::filesystem::path& path);

// HTML to plain text: tags removed, <pre>/<code> content kept verbatim,
// block elements become line breaks, entities decoded, runs of whitespace
// outside code collapsed to one space.
std::string strip_markup(std::string_view html);

enum class PairLabel { kPositive, kNegative };

struct QAPair {
  std::string pair_id;
  std::string question_text;
  std::string answer_text;
  PairLabel label = PairLabel::kPositive;
  std::int64_t source_question_id = 0;
  std::int64_t source_answer_id = 0;

  bool operator==(const QAPair&) const = default;
};

nlohmann::json to_json(const QAPair& pair);

struct ForumReport {
  std::uint64_t questions = 0;
  std::uint64_t answers = 0;
  std::uint64_t other = 0;
  std::uint64_t malformed_rows = 0;
  std::uint64_t without_accepted = 0;
  // AcceptedAnswerId names a post absent from the dump.
  std::uint64_t dangling_accepted = 0;
  // AcceptedAnswerId names a post that is not an answer to this question.
  std::uint64_t mismatched_accepted = 0;
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;

  nlohmann::json to_json() const;
};

struct PairingResult {
  std::vector<QAPair> pairs;
  ForumReport report;
};

// One positive (question, accepted answer) pair per resolvable question and
// one negative drawn uniformly from answers to other questions in the dump.
// Pairs are emitted in dump order, positive first. The negative for question
// q is drawn with derive_seed(seed, q). Throws ValidationError when fewer
// than two questions have answers.
PairingResult pair_accepted(std::span<const ForumPost> posts, std::uint64_t seed);

}  // namespace domforge
