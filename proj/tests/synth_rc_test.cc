#include <gtest/gtest.h>

#include <set>

#include "domforge/error.h"
#include "domforge/rng.h"
#include "domforge/synth_rc.h"
#include "domforge/unicode.h"

using namespace domforge;

namespace {

std::string span_text(const RCExample& ex) {
  const std::string& ctx = ex.candidates[ex.answer->doc_index].context;
  const std::size_t b = unicode::byte_offset(ctx, ex.answer->char_start);
  return ctx.substr(b, unicode::byte_offset(ctx, ex.answer->char_end) - b);
}

StructuredDoc doc(std::string id, std::vector<Section> sections, std::string title = {}) {
  return {std::move(id), std::move(title), std::move(sections)};
}

std::vector<StructuredDoc> filler(std::size_t n) {
  std::vector<StructuredDoc> docs;
  for (std::size_t i = 0; i < n; ++i) {
    docs.push_back(doc("n" + std::to_string(i), {{"Notes", "filler " + std::to_string(i)}},
                       "Filler " + std::to_string(i)));
  }
  return docs;
}

}  // namespace

TEST(ParseStructuredDoc, Examples) {
  const StructuredDoc d =
      parse_structured_doc("## Question\nwhy X\n## Resolving the Problem\ndo Y", "d1");
  ASSERT_EQ(d.sections.size(), 2u);
  EXPECT_EQ(d.sections[0], (Section{"Question", "why X"}));
  EXPECT_EQ(d.sections[1], (Section{"Resolving the Problem", "do Y"}));

  const StructuredDoc plain = parse_structured_doc("no headings here", "d2");
  ASSERT_EQ(plain.sections.size(), 1u);
  EXPECT_EQ(plain.sections[0], (Section{"PREAMBLE", "no headings here"}));

  EXPECT_THROW(parse_structured_doc("", "d3"), IngestionError);
  EXPECT_THROW(parse_structured_doc(" \n\t\n", "d4"), IngestionError);
}

TEST(ParseStructuredDoc, TitleCaseHeadingsNeedBlankLine) {
  const StructuredDoc d = parse_structured_doc(
      "Intro text.\n\nError Description\n\nThe server stops.\nSecond line.\n\n"
      "Resolving the Problem\n\nApply fix pack 3.\n\nNot A Heading\nbecause no blank follows",
      "t1");
  ASSERT_EQ(d.sections.size(), 3u);
  EXPECT_EQ(d.sections[0], (Section{"PREAMBLE", "Intro text."}));
  EXPECT_EQ(d.sections[1], (Section{"Error Description", "The server stops.\nSecond line."}));
  EXPECT_EQ(d.sections[2].heading, "Resolving the Problem");
  EXPECT_EQ(d.sections[2].body,
            "Apply fix pack 3.\n\nNot A Heading\nbecause no blank follows");
}

TEST(ParseStructuredDoc, SentencesAreNotHeadings) {
  const StructuredDoc d = parse_structured_doc(
      "Restart The Server.\n\nbody\n\nall lowercase words\n\nmore\n\n#NoSpace\n\nend", "t2");
  ASSERT_EQ(d.sections.size(), 1u);
  EXPECT_EQ(d.sections[0].heading, "PREAMBLE");
}

TEST(ParseStructuredDoc, MarkdownHeadingWhitespaceCollapsed) {
  const StructuredDoc d = parse_structured_doc("###   Resolving   the Problem  \r\nfix\r\n", "m");
  ASSERT_EQ(d.sections.size(), 1u);
  EXPECT_EQ(d.sections[0], (Section{"Resolving the Problem", "fix"}));
}

TEST(ClassifySections, Examples) {
  const SectionRoleConfig cfg = SectionRoleConfig::defaults();
  const SectionRoles roles = classify_sections(doc("a", {{"Question", "q"}, {"Cause", "c"}}), cfg);
  EXPECT_EQ(roles.problem, std::vector<std::size_t>{0});
  EXPECT_EQ(roles.solution, std::vector<std::size_t>{1});

  const SectionRoles none = classify_sections(doc("b", {{"PREAMBLE", "x"}, {"Notes", "y"}}), cfg);
  EXPECT_TRUE(none.problem.empty());
  EXPECT_TRUE(none.solution.empty());

  EXPECT_EQ(classify_sections(doc("c", {{"  question ", "q"}}), cfg).problem,
            std::vector<std::size_t>{0});
}

TEST(SectionRoleConfig, OverlapRejected) {
  EXPECT_THROW(SectionRoleConfig::from_json(
                   {{"problem_headings", {"Cause"}}, {"solution_headings", {" cause"}}}),
               ValidationError);
  const auto cfg = SectionRoleConfig::from_json({{"problem_headings", {"Issue"}}});
  EXPECT_EQ(cfg.problem_headings, std::set<std::string>{"Issue"});
  EXPECT_EQ(cfg.solution_headings, SectionRoleConfig::defaults().solution_headings);
}

TEST(MakeRcExample, Examples) {
  const SectionRoleConfig cfg = SectionRoleConfig::defaults();
  Rng rng(1);
  const auto pool = filler(12);

  EXPECT_FALSE(make_rc_example(doc("a", {{"Cause", "c"}}), {pool, {}}, cfg, 0, rng));

  const StructuredDoc qc = doc("qc", {{"Question", "why does it crash"}, {"Cause", "bad driver"}});
  const auto one = make_rc_example(qc, {pool, {}}, cfg, 0, rng);
  ASSERT_TRUE(one);
  ASSERT_EQ(one->candidates.size(), 1u);
  EXPECT_EQ(one->answer->doc_index, 0u);
  EXPECT_EQ(one->query, "why does it crash");
  EXPECT_EQ(one->candidates[0].context.find("why does it crash"), std::string::npos);
  EXPECT_EQ(one->candidates[0].context.find("Question"), std::string::npos);
  EXPECT_EQ(span_text(*one), "bad driver");

  const auto eleven = make_rc_example(qc, {pool, {}}, cfg, 10, rng);
  ASSERT_TRUE(eleven);
  EXPECT_EQ(eleven->candidates.size(), 11u);
  EXPECT_EQ(eleven->candidates[eleven->answer->doc_index].doc_id, "qc");
  EXPECT_TRUE(check_invariants(*eleven).empty());

  EXPECT_THROW(make_rc_example(qc, {pool, {}}, cfg, 13, rng), ValidationError);
}

TEST(MakeRcExample, ContextKeepsHeadingsAndNonAsciiOffsets) {
  const SectionRoleConfig cfg = SectionRoleConfig::defaults();
  Rng rng(2);
  const StructuredDoc d = doc("u", {{"PREAMBLE", "Caf\xc3\xa9 notes \xe2\x82\xac"},
                                    {"Symptom", "fails"},
                                    {"Environment", "\xc3\x9c" "bersicht"},
                                    {"Resolution", "r\xc3\xa9install"}},
                              "Title \xc3\xa9");
  const auto ex = make_rc_example(d, {std::span<const StructuredDoc>{}, {}}, cfg, 0, rng);
  ASSERT_TRUE(ex);
  EXPECT_EQ(ex->candidates[0].context,
            "Title \xc3\xa9\n\nCaf\xc3\xa9 notes \xe2\x82\xac\n\nEnvironment\n\xc3\x9c"
            "bersicht\n\nResolution\nr\xc3\xa9install");
  EXPECT_EQ(span_text(*ex), "r\xc3\xa9install");
  EXPECT_EQ(ex->answer->char_end - ex->answer->char_start, 9u);
}

TEST(GenerateRcCorpus, ReportAndDeterminism) {
  const SectionRoleConfig cfg = SectionRoleConfig::defaults();
  EXPECT_EQ(generate_rc_corpus({}, cfg, 0, 1).report.documents_seen, 0u);

  const std::vector<StructuredDoc> three = {
      doc("a", {{"Question", "q"}, {"Fix", "f"}}),
      doc("b", {{"Cause", "c"}}),
      doc("c", {{"Question", "q"}}),
  };
  const RcCorpus c = generate_rc_corpus(three, cfg, 2, 5);
  EXPECT_EQ(c.examples.size(), 1u);
  EXPECT_EQ(c.report.eligible, 1u);
  EXPECT_EQ(c.report.skipped_total(), 2u);
  EXPECT_EQ(c.report.skipped.at("no_problem_section"), 1u);
  EXPECT_EQ(c.report.skipped.at("no_solution_section"), 1u);

  std::vector<StructuredDoc> dup = three;
  dup[1].doc_id = "a";
  EXPECT_THROW(generate_rc_corpus(dup, cfg, 0, 1), ValidationError);
}

TEST(GenerateRcCorpus, Properties) {
  const SectionRoleConfig cfg = SectionRoleConfig::defaults();
  std::vector<StructuredDoc> docs = filler(5);
  for (int i = 0; i < 40; ++i) {
    docs.push_back(doc("d" + std::to_string(i),
                       {{"Abstract", "problem " + std::to_string(i)},
                        {"Cause", "cause " + std::to_string(i)},
                        {"Fix", "fix " + std::to_string(i)}},
                       "Doc " + std::to_string(i)));
  }
  const RcCorpus a = generate_rc_corpus(docs, cfg, 10, 77, 1);
  const RcCorpus b = generate_rc_corpus(docs, cfg, 10, 77, 8);
  ASSERT_EQ(a.examples, b.examples);
  ASSERT_EQ(a.examples.size(), 40u);
  EXPECT_NE(generate_rc_corpus(docs, cfg, 10, 78).examples, a.examples);

  std::set<std::size_t> positive_slots;
  for (const RCExample& ex : a.examples) {
    ASSERT_TRUE(check_invariants(ex).empty());
    ASSERT_EQ(ex.candidates.size(), 11u);
    const std::string own = ex.example_id.substr(3);
    std::set<std::string> ids;
    for (const auto& c : ex.candidates) ids.insert(c.doc_id);
    ASSERT_EQ(ids.size(), 11u);
    ASSERT_EQ(ex.candidates[ex.answer->doc_index].doc_id, own);
    // The answer is the first solution section.
    ASSERT_EQ(span_text(ex), "cause " + own.substr(1));
    ASSERT_EQ(ex.candidates[ex.answer->doc_index].context.find(ex.query), std::string::npos);
    positive_slots.insert(ex.answer->doc_index);
  }
  EXPECT_GT(positive_slots.size(), 3u);  // shuffling moves the positive around
}

TEST(RcExampleJson, RoundTripAndDerivedText) {
  RCExample ex{"e1", "q", {{"d1", "T", "T\n\nCause\nbad"}, {"d2", "", "x"}}, AnswerSpan{0, 9, 12, "bad"}};
  EXPECT_EQ(rc_example_from_json(to_json(ex)), ex);

  nlohmann::json j = to_json(ex);
  j["answer"].erase("text");
  EXPECT_EQ(rc_example_from_json(j), ex);

  RCExample unanswerable = ex;
  unanswerable.answer.reset();
  EXPECT_TRUE(to_json(unanswerable)["answer"].is_null());
  EXPECT_EQ(rc_example_from_json(to_json(unanswerable)), unanswerable);
  EXPECT_THROW(rc_example_from_json(nlohmann::json{{"query", "q"}}), IngestionError);
}

TEST(CheckInvariants, DetectsViolations) {
  RCExample ex{"e", "q", {{"d1", "", "hello world"}}, AnswerSpan{0, 6, 11, "world"}};
  EXPECT_TRUE(check_invariants(ex).empty());
  RCExample wrong = ex;
  wrong.answer->text = "worle";
  EXPECT_FALSE(check_invariants(wrong).empty());
  RCExample range = ex;
  range.answer->doc_index = 1;
  EXPECT_FALSE(check_invariants(range).empty());
  RCExample empty = ex;
  empty.answer->char_end = 6;
  empty.answer->text.clear();
  EXPECT_FALSE(check_invariants(empty).empty());
  RCExample dup = ex;
  dup.candidates.push_back(ex.candidates[0]);
  EXPECT_FALSE(check_invariants(dup).empty());
}
