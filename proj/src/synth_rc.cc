#include "domforge/synth_rc.h"

#include <algorithm>
#include <unordered_set>

#include "domforge/error.h"
#include "domforge/parallel.h"
#include "domforge/unicode.h"

namespace domforge {

namespace {

constexpr std::size_t kMaxHeadingWords = 8;

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r\f\v") == std::string_view::npos;
}

std::string_view trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r\n\f\v");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string_view> split_words(std::string_view s) {
  std::vector<std::string_view> words;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto begin = s.find_first_not_of(" \t", pos);
    if (begin == std::string_view::npos) break;
    auto end = s.find_first_of(" \t", begin);
    if (end == std::string_view::npos) end = s.size();
    words.push_back(s.substr(begin, end - begin));
    pos = end;
  }
  return words;
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  for (std::string_view word : split_words(trim(s))) {
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

bool is_minor_word(std::string_view word) {
  static const std::unordered_set<std::string_view> kMinor = {
      "a",  "an", "and", "as",  "at",   "but", "by", "for", "from", "in",
      "into", "nor", "of", "on", "or", "the", "to", "vs", "via", "with"};
  return kMinor.contains(word);
}

std::optional<std::string> markdown_heading(std::string_view line) {
  std::size_t hashes = 0;
  while (hashes < line.size() && line[hashes] == '#') ++hashes;
  if (hashes == 0 || hashes > 6 || hashes == line.size()) return std::nullopt;
  if (line[hashes] != ' ' && line[hashes] != '\t') return std::nullopt;
  std::string heading = collapse_spaces(line.substr(hashes));
  if (heading.empty()) return std::nullopt;
  return heading;
}

bool is_title_case(std::string_view line) {
  const auto words = split_words(trim(line));
  if (words.empty() || words.size() > kMaxHeadingWords) return false;
  const char last = trim(line).back();
  if (last == '.' || last == ',' || last == ';' || last == '!' || last == '?') return false;
  bool has_letter = false;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto first = unicode::decode_at(words[i], 0);
    const bool upper = first.valid && unicode::to_lower(first.code_point) != first.code_point;
    const bool digit = first.code_point >= '0' && first.code_point <= '9';
    has_letter = has_letter || upper;
    if (upper || (digit && i > 0)) continue;
    if (i > 0 && is_minor_word(words[i])) continue;
    return false;
  }
  return has_letter;
}

std::string render_section(const Section& section) {
  if (section.heading == kPreambleHeading) return section.body;
  if (section.body.empty()) return section.heading;
  return section.heading + "\n" + section.body;
}

// Renders the document without section `skip` and reports the byte offset
// of section `locate`'s body in the result.
std::string render(const StructuredDoc& doc, std::optional<std::size_t> skip,
                   std::optional<std::size_t> locate, std::size_t* located_at) {
  std::string out;
  const auto append_part = [&](const std::string& part) {
    if (!out.empty()) out += "\n\n";
    out += part;
  };
  if (!doc.title.empty()) append_part(doc.title);
  for (std::size_t i = 0; i < doc.sections.size(); ++i) {
    if (skip && *skip == i) continue;
    const Section& section = doc.sections[i];
    const std::string rendered = render_section(section);
    if (rendered.empty()) continue;
    append_part(rendered);
    if (locate && *locate == i && located_at != nullptr) {
      *located_at = out.size() - section.body.size();
    }
  }
  return out;
}

// k distinct values from [0, n), Floyd's algorithm.
std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> picked;
  std::unordered_set<std::size_t> seen;
  picked.reserve(k);
  for (std::size_t j = n - k; j < n; ++j) {
    const std::size_t t = rng.uniform(j + 1);
    const std::size_t value = seen.contains(t) ? j : t;
    seen.insert(value);
    picked.push_back(value);
  }
  return picked;
}

}  // namespace

StructuredDoc parse_structured_doc(std::string_view raw, std::string doc_id, std::string title) {
  if (is_blank(raw) || trim(raw).empty()) {
    throw IngestionError("document '" + doc_id + "' is empty");
  }
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos <= raw.size();) {
    auto end = raw.find('\n', pos);
    if (end == std::string_view::npos) end = raw.size();
    std::string_view line = raw.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }

  StructuredDoc doc{std::move(doc_id), std::move(title), {}};
  std::string heading(kPreambleHeading);
  std::string body;
  bool in_body_line = false;
  const auto flush = [&] {
    std::string trimmed(trim(body));
    if (heading != kPreambleHeading || !trimmed.empty()) {
      doc.sections.push_back({heading, std::move(trimmed)});
    }
    body.clear();
    in_body_line = false;
  };

  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::optional<std::string> found = markdown_heading(lines[i]);
    if (!found && i + 1 < lines.size() && is_blank(lines[i + 1]) && is_title_case(lines[i])) {
      found = collapse_spaces(lines[i]);
    }
    if (found) {
      flush();
      heading = std::move(*found);
      continue;
    }
    if (in_body_line) body.push_back('\n');
    body += lines[i];
    in_body_line = true;
  }
  flush();
  return doc;
}

std::string normalize_heading(std::string_view heading) {
  return unicode::to_lower(collapse_spaces(heading));
}

SectionRoleConfig SectionRoleConfig::defaults() {
  return {
      {"Abstract", "Error Description", "Question", "Symptom", "Problem"},
      {"Cause", "Resolving the Problem", "Resolution", "Answer", "Fix"},
  };
}

SectionRoleConfig SectionRoleConfig::from_json(const nlohmann::json& doc) {
  SectionRoleConfig cfg = defaults();
  try {
    if (doc.contains("problem_headings")) {
      cfg.problem_headings = doc.at("problem_headings").get<std::set<std::string>>();
    }
    if (doc.contains("solution_headings")) {
      cfg.solution_headings = doc.at("solution_headings").get<std::set<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed section config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json SectionRoleConfig::to_json() const {
  return {{"problem_headings", problem_headings}, {"solution_headings", solution_headings}};
}

void SectionRoleConfig::validate() const {
  std::set<std::string> problem;
  for (const auto& h : problem_headings) problem.insert(normalize_heading(h));
  for (const auto& h : solution_headings) {
    if (problem.contains(normalize_heading(h))) {
      throw ValidationError("heading '" + h + "' is both a problem and a solution heading");
    }
  }
}

SectionRoles classify_sections(const StructuredDoc& doc, const SectionRoleConfig& cfg) {
  std::set<std::string> problem;
  std::set<std::string> solution;
  for (const auto& h : cfg.problem_headings) problem.insert(normalize_heading(h));
  for (const auto& h : cfg.solution_headings) solution.insert(normalize_heading(h));
  SectionRoles roles;
  for (std::size_t i = 0; i < doc.sections.size(); ++i) {
    const std::string key = normalize_heading(doc.sections[i].heading);
    if (problem.contains(key)) {
      roles.problem.push_back(i);
    } else if (solution.contains(key)) {
      roles.solution.push_back(i);
    }
  }
  return roles;
}

nlohmann::json to_json(const RCExample& example) {
  nlohmann::json candidates = nlohmann::json::array();
  for (const auto& c : example.candidates) {
    candidates.push_back({{"doc_id", c.doc_id}, {"title", c.title}, {"context", c.context}});
  }
  nlohmann::json answer = nullptr;
  if (example.answer) {
    answer = {{"doc_index", example.answer->doc_index},
              {"char_start", example.answer->char_start},
              {"char_end", example.answer->char_end},
              {"text", example.answer->text}};
  }
  return {{"example_id", example.example_id},
          {"query", example.query},
          {"candidates", std::move(candidates)},
          {"answer", std::move(answer)}};
}

RCExample rc_example_from_json(const nlohmann::json& doc) {
  try {
    RCExample example;
    example.example_id = doc.at("example_id").get<std::string>();
    example.query = doc.at("query").get<std::string>();
    for (const auto& c : doc.at("candidates")) {
      example.candidates.push_back({c.at("doc_id").get<std::string>(),
                                    c.value("title", std::string{}),
                                    c.at("context").get<std::string>()});
    }
    if (doc.contains("answer") && !doc["answer"].is_null()) {
      const auto& a = doc["answer"];
      AnswerSpan span{a.at("doc_index").get<std::size_t>(), a.at("char_start").get<std::size_t>(),
                      a.at("char_end").get<std::size_t>(), {}};
      if (a.contains("text")) {
        span.text = a["text"].get<std::string>();
      } else if (span.doc_index < example.candidates.size()) {
        const std::string& ctx = example.candidates[span.doc_index].context;
        const std::size_t b = unicode::byte_offset(ctx, span.char_start);
        span.text = ctx.substr(b, unicode::byte_offset(ctx, span.char_end) - b);
      }
      example.answer = std::move(span);
    }
    return example;
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("malformed RC example: ") + e.what());
  }
}

std::vector<std::string> check_invariants(const RCExample& example) {
  std::vector<std::string> problems;
  if (example.candidates.empty()) problems.push_back("no candidates");
  std::unordered_set<std::string_view> ids;
  for (const auto& c : example.candidates) {
    if (!ids.insert(c.doc_id).second) problems.push_back("duplicate candidate " + c.doc_id);
  }
  if (!example.answer) return problems;
  const AnswerSpan& a = *example.answer;
  if (a.doc_index >= example.candidates.size()) {
    problems.push_back("answer doc_index out of range");
    return problems;
  }
  const std::string& ctx = example.candidates[a.doc_index].context;
  if (a.char_start >= a.char_end) problems.push_back("empty answer span");
  if (a.char_end > unicode::length(ctx)) {
    problems.push_back("answer span past end of context");
    return problems;
  }
  const std::size_t b = unicode::byte_offset(ctx, a.char_start);
  const std::size_t e = unicode::byte_offset(ctx, a.char_end);
  if (std::string_view(ctx).substr(b, e - b) != a.text) {
    problems.push_back("answer span does not match answer text");
  }
  return problems;
}

std::string render_document(const StructuredDoc& doc) {
  return render(doc, std::nullopt, std::nullopt, nullptr);
}

std::string_view to_string(SkipReason reason) {
  switch (reason) {
    case SkipReason::kNoProblemSection: return "no_problem_section";
    case SkipReason::kNoSolutionSection: return "no_solution_section";
    case SkipReason::kEmptyQuery: return "empty_query";
    case SkipReason::kEmptyAnswer: return "empty_answer";
  }
  return "unknown";
}

std::optional<SkipReason> ineligibility(const StructuredDoc& doc, const SectionRoleConfig& cfg) {
  const SectionRoles roles = classify_sections(doc, cfg);
  if (roles.problem.empty()) return SkipReason::kNoProblemSection;
  if (roles.solution.empty()) return SkipReason::kNoSolutionSection;
  if (doc.sections[roles.problem.front()].body.empty()) return SkipReason::kEmptyQuery;
  if (doc.sections[roles.solution.front()].body.empty()) return SkipReason::kEmptyAnswer;
  return std::nullopt;
}

std::optional<RCExample> make_rc_example(const StructuredDoc& doc, const NegativePool& pool,
                                         const SectionRoleConfig& cfg,
                                         std::size_t num_negatives, Rng& rng) {
  if (ineligibility(doc, cfg)) return std::nullopt;
  if (pool.available() < num_negatives) {
    throw ValidationError("negative pool too small for document '" + doc.doc_id + "': need " +
                          std::to_string(num_negatives) + ", have " +
                          std::to_string(pool.available()));
  }
  const SectionRoles roles = classify_sections(doc, cfg);
  const std::size_t query_index = roles.problem.front();
  const std::size_t answer_index = roles.solution.front();
  const Section& solution = doc.sections[answer_index];

  std::size_t body_offset = 0;
  std::string context = render(doc, query_index, answer_index, &body_offset);

  RCExample example;
  example.example_id = "rc-" + doc.doc_id;
  example.query = doc.sections[query_index].body;
  example.candidates.push_back({doc.doc_id, doc.title, std::move(context)});
  for (std::size_t slot : sample_distinct(pool.available(), num_negatives, rng)) {
    if (pool.exclude && slot >= *pool.exclude) ++slot;
    const StructuredDoc& negative = pool.docs[slot];
    example.candidates.push_back({negative.doc_id, negative.title, render_document(negative)});
  }

  std::vector<std::size_t> order(example.candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<Candidate> shuffled;
  shuffled.reserve(order.size());
  std::size_t positive_at = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] == 0) positive_at = i;
    shuffled.push_back(std::move(example.candidates[order[i]]));
  }
  example.candidates = std::move(shuffled);

  const std::string& ctx = example.candidates[positive_at].context;
  const std::size_t start = unicode::length(std::string_view(ctx).substr(0, body_offset));
  example.answer = AnswerSpan{positive_at, start, start + unicode::length(solution.body),
                              solution.body};
  return example;
}

std::uint64_t RcGenerationReport::skipped_total() const {
  std::uint64_t n = 0;
  for (const auto& [reason, count] : skipped) n += count;
  return n;
}

nlohmann::json RcGenerationReport::to_json() const {
  return {{"documents_seen", documents_seen},
          {"eligible", eligible},
          {"skipped", skipped_total()},
          {"skipped_by_reason", skipped}};
}

RcCorpus generate_rc_corpus(std::span<const StructuredDoc> docs, const SectionRoleConfig& cfg,
                            std::size_t num_negatives, std::uint64_t seed, unsigned workers) {
  cfg.validate();
  std::unordered_set<std::string_view> ids;
  for (const auto& doc : docs) {
    if (!ids.insert(doc.doc_id).second) {
      throw ValidationError("duplicate doc_id '" + doc.doc_id + "'");
    }
  }

  std::vector<std::optional<RCExample>> slots(docs.size());
  parallel_for(docs.size(), workers, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    slots[i] = make_rc_example(docs[i], NegativePool{docs, i}, cfg, num_negatives, rng);
  });

  RcCorpus corpus;
  corpus.report.documents_seen = docs.size();
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (slots[i]) {
      ++corpus.report.eligible;
      corpus.examples.push_back(std::move(*slots[i]));
    } else {
      ++corpus.report.skipped[std::string(to_string(*ineligibility(docs[i], cfg)))];
    }
  }
  return corpus;
}

}  // namespace domforge
