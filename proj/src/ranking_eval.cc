#include "domforge/ranking_eval.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "domforge/error.h"
#include "domforge/parallel.h"
#include "domforge/tokenizer.h"
#include "domforge/unicode.h"

namespace domforge {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  for (;;) {
    const auto tab = line.find('\t', pos);
    fields.push_back(line.substr(pos, tab == std::string_view::npos ? line.npos : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return fields;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string cell(const std::optional<double>& value) {
  if (!value) return "-";
  std::ostringstream out;
  out << std::fixed << std::setprecision(3) << *value;
  return out.str();
}

}  // namespace

std::vector<std::string> index_terms(std::string_view text) {
  std::vector<std::string> terms;
  for (const TokenSpan& span : pre_tokenize_spans(text)) {
    terms.push_back(unicode::to_lower(text.substr(span.begin, span.end - span.begin)));
  }
  return terms;
}

InvertedIndex::InvertedIndex(std::unordered_map<std::string, std::vector<Posting>> postings,
                             std::vector<std::uint32_t> doc_lengths,
                             std::vector<std::string> doc_ids, double k1, double b)
    : postings_(std::move(postings)),
      doc_lengths_(std::move(doc_lengths)),
      doc_ids_(std::move(doc_ids)),
      k1_(k1),
      b_(b) {
  if (!doc_lengths_.empty()) {
    double sum = 0.0;
    for (auto len : doc_lengths_) sum += len;
    avg_doc_length_ = sum / static_cast<double>(doc_lengths_.size());
  }
}

std::span<const Posting> InvertedIndex::postings(std::string_view term) const {
  const auto it = postings_.find(std::string(term));
  if (it == postings_.end()) return {};
  return it->second;
}

InvertedIndex build_index(std::span<const std::pair<std::string, std::string>> docs, double k1,
                          double b, unsigned workers) {
  if (docs.empty()) throw ValidationError("cannot index an empty corpus");
  std::unordered_set<std::string_view> seen;
  for (const auto& [id, text] : docs) {
    if (!seen.insert(id).second) throw ValidationError("duplicate doc_id '" + id + "'");
  }

  std::vector<std::vector<std::pair<std::string, std::uint32_t>>> per_doc(docs.size());
  std::vector<std::uint32_t> lengths(docs.size());
  parallel_for(docs.size(), workers, [&](std::size_t i) {
    std::vector<std::string> terms = index_terms(docs[i].second);
    lengths[i] = static_cast<std::uint32_t>(terms.size());
    std::sort(terms.begin(), terms.end());
    for (std::size_t j = 0; j < terms.size();) {
      std::size_t k = j;
      while (k < terms.size() && terms[k] == terms[j]) ++k;
      per_doc[i].emplace_back(std::move(terms[j]), static_cast<std::uint32_t>(k - j));
      j = k;
    }
  });

  std::unordered_map<std::string, std::vector<Posting>> postings;
  std::vector<std::string> ids;
  ids.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    ids.push_back(docs[i].first);
    for (auto& [term, tf] : per_doc[i]) {
      postings[std::move(term)].push_back({static_cast<std::uint32_t>(i), tf});
    }
  }
  return InvertedIndex(std::move(postings), std::move(lengths), std::move(ids), k1, b);
}

double bm25_idf(std::size_t num_docs, std::size_t doc_freq) {
  const double n = static_cast<double>(num_docs);
  const double df = static_cast<double>(doc_freq);
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

RankedList bm25_rank(const InvertedIndex& index, std::string_view query, std::size_t top_k,
                     std::string query_id) {
  std::vector<std::string> terms;
  std::unordered_set<std::string> seen;
  for (std::string& term : index_terms(query)) {
    if (seen.insert(term).second) terms.push_back(std::move(term));
  }

  const std::size_t n = index.num_docs();
  std::vector<double> scores(n, 0.0);
  for (const std::string& term : terms) {
    const auto postings = index.postings(term);
    if (postings.empty()) continue;
    const double idf = bm25_idf(n, postings.size());
    for (const Posting& p : postings) {
      const double tf = p.tf;
      const double norm =
          1.0 - index.b() + index.b() * index.doc_lengths()[p.doc] / index.avg_doc_length();
      scores[p.doc] += idf * tf * (index.k1() + 1.0) / (tf + index.k1() * norm);
    }
  }

  std::vector<std::uint32_t> order(n);
  for (std::uint32_t i = 0; i < n; ++i) order[i] = i;
  const std::size_t k = std::min(top_k, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
                    });
  RankedList list{std::move(query_id), {}};
  list.entries.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    list.entries.push_back({index.doc_ids()[order[i]], scores[order[i]]});
  }
  return list;
}

std::vector<std::string> normalize_answer(std::string_view text, const F1Options& options) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (std::size_t pos = 0; pos < text.size();) {
    const auto c = unicode::decode_at(text, pos);
    if (c.valid && (unicode::is_space(c.code_point) || unicode::is_alnum(c.code_point))) {
      unicode::append_utf8(cleaned, unicode::is_space(c.code_point) ? U' '
                                                                    : unicode::to_lower(c.code_point));
    }
    pos += c.length;
  }
  std::vector<std::string> tokens;
  std::istringstream in(cleaned);
  for (std::string token; in >> token;) {
    if (options.remove_articles && (token == "a" || token == "an" || token == "the")) continue;
    tokens.push_back(std::move(token));
  }
  return tokens;
}

double answer_f1(std::string_view prediction, std::string_view gold, const F1Options& options) {
  const auto pred_tokens = normalize_answer(prediction, options);
  const auto gold_tokens = normalize_answer(gold, options);
  if (pred_tokens.empty() && gold_tokens.empty()) return 1.0;
  if (pred_tokens.empty() || gold_tokens.empty()) return 0.0;

  std::unordered_map<std::string_view, long> bag;
  for (const auto& t : gold_tokens) ++bag[t];
  long common = 0;
  for (const auto& t : pred_tokens) {
    auto it = bag.find(t);
    if (it != bag.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  // 2PR / (P + R) with a single rounding.
  return 2.0 * static_cast<double>(common) /
         static_cast<double>(pred_tokens.size() + gold_tokens.size());
}

RcScores eval_rc(const std::map<std::string, std::string>& predictions,
                 const std::map<std::string, std::string>& golds, const F1Options& options) {
  for (const auto& [id, _] : predictions) {
    if (!golds.contains(id)) throw ValidationError("prediction for unknown example '" + id + "'");
  }
  RcScores scores;
  double total = 0.0;
  double answerable_total = 0.0;
  for (const auto& [id, gold] : golds) {
    const auto it = predictions.find(id);
    const double f1 = answer_f1(it == predictions.end() ? std::string_view{} : it->second, gold,
                                options);
    total += f1;
    ++scores.examples;
    if (!normalize_answer(gold, options).empty()) {
      answerable_total += f1;
      ++scores.answerable;
    }
  }
  if (scores.examples > 0) scores.f1 = total / static_cast<double>(scores.examples);
  if (scores.answerable > 0) {
    scores.ha_f1 = answerable_total / static_cast<double>(scores.answerable);
  }
  return scores;
}

int match_at_k(const RankedList& run, const std::set<std::string>& relevant, std::size_t k) {
  const std::size_t limit = std::min(k, run.entries.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (relevant.contains(run.entries[i].doc_id)) return 1;
  }
  return 0;
}

QueryMetrics query_metrics(const RankedList& run, const std::set<std::string>& relevant) {
  QueryMetrics m;
  std::size_t found = 0;
  std::size_t in_top1 = 0;
  std::size_t in_top5 = 0;
  double precision_sum = 0.0;
  for (std::size_t i = 0; i < run.entries.size(); ++i) {
    if (!relevant.contains(run.entries[i].doc_id)) continue;
    const std::size_t rank = i + 1;
    ++found;
    precision_sum += static_cast<double>(found) / static_cast<double>(rank);
    if (m.rr == 0.0) m.rr = 1.0 / static_cast<double>(rank);
    if (rank <= 1) ++in_top1;
    if (rank <= 5) ++in_top5;
  }
  m.ap = found == 0 ? 0.0 : precision_sum / static_cast<double>(found);
  m.p_at_1 = static_cast<double>(in_top1) / 1.0;
  m.p_at_5 = static_cast<double>(in_top5) / 5.0;
  m.match_at_1 = match_at_k(run, relevant, 1);
  m.match_at_5 = match_at_k(run, relevant, 5);
  return m;
}

RetrievalScores eval_retrieval(std::span<const RankedList> runs,
                               const RelevanceJudgments& judgments) {
  RetrievalScores scores;
  double ap = 0.0, rr = 0.0, p1 = 0.0, p5 = 0.0, m1 = 0.0, m5 = 0.0;
  for (const RankedList& run : runs) {
    const auto it = judgments.find(run.query_id);
    if (it == judgments.end()) {
      throw ValidationError("no judgments for query '" + run.query_id + "'");
    }
    const QueryMetrics m = query_metrics(run, it->second);
    ++scores.queries;
    m1 += m.match_at_1;
    m5 += m.match_at_5;
    if (it->second.empty()) continue;
    ++scores.judged_queries;
    ap += m.ap;
    rr += m.rr;
    p1 += m.p_at_1;
    p5 += m.p_at_5;
  }
  if (scores.queries > 0) {
    scores.match_at_1 = m1 / static_cast<double>(scores.queries);
    scores.match_at_5 = m5 / static_cast<double>(scores.queries);
  }
  if (scores.judged_queries > 0) {
    const double n = static_cast<double>(scores.judged_queries);
    scores.map = ap / n;
    scores.mrr = rr / n;
    scores.p_at_1 = p1 / n;
    scores.p_at_5 = p5 / n;
  }
  return scores;
}

nlohmann::json to_json(const RcScores& scores) {
  return {{"F1", scores.f1},
          {"HA_F1", scores.ha_f1 ? nlohmann::json(*scores.ha_f1) : nlohmann::json(nullptr)},
          {"examples", scores.examples},
          {"answerable", scores.answerable},
          {"convention", "token-level bag F1, lowercase, punctuation stripped"}};
}

nlohmann::json to_json(const RetrievalScores& scores) {
  const auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"MAP", opt(scores.map)},
          {"MRR", opt(scores.mrr)},
          {"P@1", opt(scores.p_at_1)},
          {"P@5", opt(scores.p_at_5)},
          {"Match@1", scores.match_at_1},
          {"Match@5", scores.match_at_5},
          {"queries", scores.queries},
          {"judged_queries", scores.judged_queries}};
}

std::string format_table(const RcScores& scores) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "F1" << std::setw(10) << "HA_F1" << std::setw(10)
      << "examples" << "answerable\n";
  out << std::left << std::setw(10) << cell(scores.f1) << std::setw(10) << cell(scores.ha_f1)
      << std::setw(10) << scores.examples << scores.answerable << '\n';
  return out.str();
}

std::string format_table(const RetrievalScores& scores, std::string_view system) {
  std::ostringstream out;
  const int width = static_cast<int>(std::max<std::size_t>(8, system.size() + 2));
  out << std::left << std::setw(width) << "" << std::setw(8) << "MAP" << std::setw(8) << "MRR"
      << std::setw(8) << "P@1" << std::setw(8) << "P@5" << std::setw(8) << "M@1"
      << "M@5\n";
  out << std::left << std::setw(width) << system << std::setw(8) << cell(scores.map)
      << std::setw(8) << cell(scores.mrr) << std::setw(8) << cell(scores.p_at_1) << std::setw(8)
      << cell(scores.p_at_5) << std::setw(8) << cell(scores.match_at_1)
      << cell(scores.match_at_5) << '\n';
  return out.str();
}

std::vector<RankedList> read_runs(std::istream& in) {
  struct Row {
    long rank;
    std::string doc;
    double score;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    long rank = 0;
    double score = 0.0;
    if (f.size() != 4 ||
        std::from_chars(f[2].data(), f[2].data() + f[2].size(), rank).ec != std::errc() ||
        std::from_chars(f[3].data(), f[3].data() + f[3].size(), score).ec != std::errc()) {
      throw ValidationError("runs line " + std::to_string(line_no) +
                            ": expected query_id<TAB>doc_id<TAB>rank<TAB>score");
    }
    auto [it, inserted] = rows.try_emplace(std::string(f[0]));
    if (inserted) order.push_back(it->first);
    it->second.push_back({rank, std::string(f[1]), score});
  }

  std::vector<RankedList> runs;
  for (const std::string& query : order) {
    auto& list = rows[query];
    std::stable_sort(list.begin(), list.end(),
                     [](const Row& a, const Row& b) { return a.rank < b.rank; });
    RankedList run{query, {}};
    std::unordered_set<std::string> docs;
    for (auto& row : list) {
      if (!docs.insert(row.doc).second) {
        throw ValidationError("query '" + query + "' lists document '" + row.doc + "' twice");
      }
      if (!run.entries.empty() && row.score > run.entries.back().score) {
        throw ValidationError("query '" + query + "': scores increase with rank");
      }
      run.entries.push_back({std::move(row.doc), row.score});
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

void write_runs(std::span<const RankedList> runs, std::ostream& out) {
  for (const RankedList& run : runs) {
    for (std::size_t i = 0; i < run.entries.size(); ++i) {
      out << run.query_id << '\t' << run.entries[i].doc_id << '\t' << (i + 1) << '\t'
          << format_double(run.entries[i].score) << '\n';
    }
  }
}

RelevanceJudgments read_judgments(std::istream& in) {
  RelevanceJudgments judgments;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() > 2 || f[0].empty()) {
      throw ValidationError("judgments line " + std::to_string(line_no) +
                            ": expected query_id<TAB>doc_id");
    }
    auto& relevant = judgments[std::string(f[0])];
    if (f.size() == 2 && !f[1].empty()) relevant.emplace(f[1]);
  }
  return judgments;
}

}  // namespace domforge
