#include "domforge/synth_forum.h"

#include <cctype>
#include <expat.h>

#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <memory>
#include <unordered_map>
#include <unordered_set>

#include "domforge/error.h"
#include "domforge/rng.h"
#include "domforge/unicode.h"

namespace domforge {

namespace {

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

struct ParseState {
  ParsedPosts result;
  std::unordered_set<std::int64_t> ids;
  int depth = 0;
};

void handle_row(ParseState& state, const XML_Char** attrs) {
  ++state.result.rows;
  std::optional<std::string_view> id, type, parent, accepted, title, body;
  for (std::size_t i = 0; attrs[i] != nullptr; i += 2) {
    const std::string_view name = attrs[i];
    const std::string_view value = attrs[i + 1];
    if (name == "Id") id = value;
    else if (name == "PostTypeId") type = value;
    else if (name == "ParentId") parent = value;
    else if (name == "AcceptedAnswerId") accepted = value;
    else if (name == "Title") title = value;
    else if (name == "Body") body = value;
  }

  ForumPost post;
  const auto post_id = id ? parse_int(*id) : std::nullopt;
  const auto type_id = type ? parse_int(*type) : std::nullopt;
  if (!post_id || !type_id || state.ids.contains(*post_id)) {
    ++state.result.malformed;
    return;
  }
  post.post_id = *post_id;
  post.type = *type_id == 1 ? PostType::kQuestion
                            : (*type_id == 2 ? PostType::kAnswer : PostType::kOther);
  if (parent) {
    post.parent_id = parse_int(*parent);
    if (!post.parent_id) {
      ++state.result.malformed;
      return;
    }
  }
  if (accepted && post.type == PostType::kQuestion) {
    post.accepted_answer_id = parse_int(*accepted);
    if (!post.accepted_answer_id) {
      ++state.result.malformed;
      return;
    }
  }
  if ((post.type == PostType::kAnswer && !post.parent_id) ||
      (post.type == PostType::kQuestion && post.parent_id)) {
    ++state.result.malformed;
    return;
  }
  if (post.type != PostType::kAnswer) post.parent_id.reset();
  if (title) post.title = std::string(*title);
  if (body) post.body = std::string(*body);
  state.ids.insert(post.post_id);
  state.result.posts.push_back(std::move(post));
}

void XMLCALL on_start(void* data, const XML_Char* name, const XML_Char** attrs) {
  auto& state = *static_cast<ParseState*>(data);
  ++state.depth;
  if (state.depth == 2 && std::strcmp(name, "row") == 0) handle_row(state, attrs);
}

void XMLCALL on_end(void* data, const XML_Char*) { --static_cast<ParseState*>(data)->depth; }

// ---------------------------------------------------------------------------
// Markup

bool is_block_tag(std::string_view tag) {
  static const std::unordered_set<std::string_view> kBlock = {
      "p",  "div", "br", "li", "ul", "ol",         "pre",     "blockquote", "h1",
      "h2", "h3",  "h4", "h5", "h6", "table",      "tr",      "hr",         "dl",
      "dt", "dd",  "section", "article", "header", "footer", "thead",      "tbody"};
  return kBlock.contains(tag);
}

std::optional<char32_t> decode_entity(std::string_view name) {
  if (name.size() > 1 && name[0] == '#') {
    char32_t cp = 0;
    const bool hex = name[1] == 'x' || name[1] == 'X';
    const std::string_view digits = name.substr(hex ? 2 : 1);
    unsigned long value = 0;
    const auto [ptr, ec] =
        std::from_chars(digits.data(), digits.data() + digits.size(), value, hex ? 16 : 10);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || digits.empty() ||
        value > 0x10FFFF || (value >= 0xD800 && value <= 0xDFFF) || value == 0) {
      return std::nullopt;
    }
    cp = static_cast<char32_t>(value);
    return cp;
  }
  static const std::unordered_map<std::string_view, char32_t> kNamed = {
      {"amp", '&'},       {"lt", '<'},        {"gt", '>'},        {"quot", '"'},
      {"apos", '\''},     {"nbsp", 0xA0},     {"copy", 0xA9},     {"reg", 0xAE},
      {"trade", 0x2122},  {"hellip", 0x2026}, {"mdash", 0x2014},  {"ndash", 0x2013},
      {"lsquo", 0x2018},  {"rsquo", 0x2019},  {"ldquo", 0x201C},  {"rdquo", 0x201D},
      {"bull", 0x2022},   {"middot", 0xB7},   {"times", 0xD7},    {"laquo", 0xAB},
      {"raquo", 0xBB},    {"deg", 0xB0},      {"euro", 0x20AC},   {"shy", 0xAD}};
  const auto it = kNamed.find(name);
  if (it == kNamed.end()) return std::nullopt;
  return it->second;
}

class PlainTextWriter {
 public:
  void text(std::string_view s) {
    for (std::size_t pos = 0; pos < s.size();) {
      const auto c = unicode::decode_at(s, pos);
      character(s.substr(pos, c.length), c.valid && unicode::is_space(c.code_point));
      pos += c.length;
    }
  }

  void character(std::string_view bytes, bool space) {
    if (verbatim_ > 0) {
      flush_space();
      out_ += bytes;
    } else if (space) {
      pending_space_ = true;
    } else {
      flush_space();
      out_ += bytes;
    }
  }

  void line_break() {
    while (!out_.empty() && out_.back() == ' ') out_.pop_back();
    if (!out_.empty() && out_.back() != '\n') out_.push_back('\n');
    pending_space_ = false;
  }

  void enter_verbatim() { ++verbatim_; }
  void leave_verbatim() {
    if (verbatim_ > 0) --verbatim_;
  }

  std::string finish() {
    const auto end = out_.find_last_not_of(" \n\t\r");
    out_.erase(end == std::string::npos ? 0 : end + 1);
    const auto begin = out_.find_first_not_of(" \n\t\r");
    return begin == std::string::npos ? std::string{} : out_.substr(begin);
  }

 private:
  void flush_space() {
    if (pending_space_ && !out_.empty() && out_.back() != ' ' && out_.back() != '\n') {
      out_.push_back(' ');
    }
    pending_space_ = false;
  }

  std::string out_;
  int verbatim_ = 0;
  bool pending_space_ = false;
};

}  // namespace

ParsedPosts parse_posts(std::istream& in) {
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
      XML_ParserCreate("UTF-8"), &XML_ParserFree);
  if (!parser) throw IngestionError("cannot allocate XML parser");
  ParseState state;
  XML_SetUserData(parser.get(), &state);
  XML_SetElementHandler(parser.get(), on_start, on_end);

  std::array<char, 1 << 16> buffer{};
  for (;;) {
    in.read(buffer.data(), buffer.size());
    const auto got = static_cast<int>(in.gcount());
    const bool done = got < static_cast<int>(buffer.size());
    if (XML_Parse(parser.get(), buffer.data(), got, done) == XML_STATUS_ERROR) {
      throw IngestionError("Posts.xml line " +
                           std::to_string(XML_GetCurrentLineNumber(parser.get())) + ": " +
                           XML_ErrorString(XML_GetErrorCode(parser.get())));
    }
    if (done) break;
  }
  return std::move(state.result);
}

ParsedPosts parse_posts_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  return parse_posts(in);
}

std::string strip_markup(std::string_view html) {
  PlainTextWriter writer;
  std::size_t pos = 0;
  while (pos < html.size()) {
    const char c = html[pos];
    if (c == '<') {
      if (html.substr(pos, 4) == "<!--") {
        const auto end = html.find("-->", pos + 4);
        pos = end == std::string_view::npos ? html.size() : end + 3;
        continue;
      }
      const auto end = html.find('>', pos + 1);
      if (end == std::string_view::npos) {
        writer.text(html.substr(pos));
        break;
      }
      std::string_view tag = html.substr(pos + 1, end - pos - 1);
      const bool closing = !tag.empty() && tag.front() == '/';
      if (closing) tag.remove_prefix(1);
      std::string name;
      for (char ch : tag) {
        if (!std::isalnum(static_cast<unsigned char>(ch))) break;
        name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
      }
      const bool self_closing = !tag.empty() && tag.back() == '/';
      if (name == "pre" || name == "code") {
        if (name == "pre") writer.line_break();
        if (closing) {
          writer.leave_verbatim();
        } else if (!self_closing) {
          writer.enter_verbatim();
        }
      } else if (is_block_tag(name)) {
        writer.line_break();
      }
      pos = end + 1;
      continue;
    }
    if (c == '&') {
      const auto semi = html.find(';', pos + 1);
      if (semi != std::string_view::npos && semi - pos <= 10) {
        if (const auto cp = decode_entity(html.substr(pos + 1, semi - pos - 1))) {
          std::string bytes;
          unicode::append_utf8(bytes, *cp);
          writer.character(bytes, unicode::is_space(*cp));
          pos = semi + 1;
          continue;
        }
      }
    }
    const auto decoded = unicode::decode_at(html, pos);
    writer.character(html.substr(pos, decoded.length),
                     decoded.valid && unicode::is_space(decoded.code_point));
    pos += decoded.length;
  }
  return writer.finish();
}

nlohmann::json to_json(const QAPair& pair) {
  return {{"pair_id", pair.pair_id},
          {"question_text", pair.question_text},
          {"answer_text", pair.answer_text},
          {"label", pair.label == PairLabel::kPositive ? "positive" : "negative"},
          {"source_question_id", pair.source_question_id},
          {"source_answer_id", pair.source_answer_id}};
}

nlohmann::json ForumReport::to_json() const {
  return {{"questions", questions},
          {"answers", answers},
          {"other", other},
          {"malformed_rows", malformed_rows},
          {"without_accepted", without_accepted},
          {"dangling_accepted", dangling_accepted},
          {"mismatched_accepted", mismatched_accepted},
          {"positives", positives},
          {"negatives", negatives}};
}

PairingResult pair_accepted(std::span<const ForumPost> posts, std::uint64_t seed) {
  PairingResult result;
  ForumReport& report = result.report;

  std::unordered_map<std::int64_t, std::size_t> by_id;
  by_id.reserve(posts.size());
  for (std::size_t i = 0; i < posts.size(); ++i) {
    by_id.emplace(posts[i].post_id, i);
    switch (posts[i].type) {
      case PostType::kQuestion: ++report.questions; break;
      case PostType::kAnswer: ++report.answers; break;
      case PostType::kOther: ++report.other; break;
    }
  }

  // Negative pool: answers whose parent is a question present in the dump.
  std::vector<std::size_t> pool;
  std::unordered_set<std::int64_t> answered;
  for (std::size_t i = 0; i < posts.size(); ++i) {
    if (posts[i].type != PostType::kAnswer) continue;
    const auto parent = by_id.find(*posts[i].parent_id);
    if (parent == by_id.end() || posts[parent->second].type != PostType::kQuestion) continue;
    pool.push_back(i);
    answered.insert(*posts[i].parent_id);
  }
  if (answered.size() < 2) {
    throw ValidationError("degenerate forum dump: " + std::to_string(answered.size()) +
                          " question(s) with answers, at least 2 are needed for negatives");
  }

  const auto question_text = [](const ForumPost& q) {
    std::string body = strip_markup(q.body);
    return q.title && !q.title->empty() ? *q.title + "\n" + body : body;
  };

  for (const ForumPost& question : posts) {
    if (question.type != PostType::kQuestion) continue;
    if (!question.accepted_answer_id) {
      ++report.without_accepted;
      continue;
    }
    const auto found = by_id.find(*question.accepted_answer_id);
    if (found == by_id.end()) {
      ++report.dangling_accepted;
      continue;
    }
    const ForumPost& accepted = posts[found->second];
    if (accepted.type != PostType::kAnswer || accepted.parent_id != question.post_id) {
      ++report.mismatched_accepted;
      continue;
    }

    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(question.post_id)));
    std::optional<std::size_t> negative;
    for (int attempt = 0; attempt < 64 && !negative; ++attempt) {
      const std::size_t candidate = pool[rng.uniform(pool.size())];
      if (posts[candidate].parent_id != question.post_id) negative = candidate;
    }
    if (!negative) {
      std::vector<std::size_t> others;
      for (std::size_t i : pool) {
        if (posts[i].parent_id != question.post_id) others.push_back(i);
      }
      negative = others[rng.uniform(others.size())];
    }
    const ForumPost& wrong = posts[*negative];

    const std::string qtext = question_text(question);
    const std::string qid = "q" + std::to_string(question.post_id);
    result.pairs.push_back({qid + "-a" + std::to_string(accepted.post_id), qtext,
                            strip_markup(accepted.body), PairLabel::kPositive,
                            question.post_id, accepted.post_id});
    result.pairs.push_back({qid + "-a" + std::to_string(wrong.post_id), qtext,
                            strip_markup(wrong.body), PairLabel::kNegative, question.post_id,
                            wrong.post_id});
    ++report.positives;
    ++report.negatives;
  }
  return result;
}

}  // namespace domforge
