#include "oracles.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

#include "domforge/unicode.h"

namespace oracle {

using namespace domforge;

std::vector<std::pair<std::string, std::uint64_t>> sorted_oov(const Vocabulary& vocab,
                                                              const FrequencyTable& freq,
                                                              std::uint64_t min_count) {
  std::vector<std::pair<std::string, std::uint64_t>> oov;
  for (const auto& [word, count] : freq.counts) {
    const auto pieces = encode_word(vocab, word);
    const bool single = pieces.size() == 1 && pieces[0] == word;
    if (!single && count >= min_count) oov.emplace_back(word, count);
  }
  std::sort(oov.begin(), oov.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return oov;
}

namespace {

std::uint64_t all_oov_occurrences(const Vocabulary& vocab, const FrequencyTable& freq) {
  std::uint64_t n = 0;
  for (const auto& [word, count] : freq.counts) {
    if (!is_single_token(vocab, word)) n += count;
  }
  return n;
}

}  // namespace

std::optional<std::size_t> brute_force_prefix(const Vocabulary& vocab, const FrequencyTable& freq,
                                              double threshold, std::uint64_t min_count) {
  const auto oov = sorted_oov(vocab, freq, min_count);
  const std::uint64_t missing = all_oov_occurrences(vocab, freq);
  for (std::size_t k = 0; k <= oov.size(); ++k) {
    std::uint64_t added = 0;
    for (std::size_t i = 0; i < k; ++i) added += oov[i].second;
    const double coverage =
        freq.total == 0 ? 1.0
                        : static_cast<double>(freq.total - (missing - added)) /
                              static_cast<double>(freq.total);
    if (coverage >= threshold) return k;
  }
  return std::nullopt;
}

std::optional<std::size_t> prefix_sum_select(const Vocabulary& vocab, const FrequencyTable& freq,
                                             double threshold, std::uint64_t min_count) {
  const auto oov = sorted_oov(vocab, freq, min_count);
  std::uint64_t remaining = all_oov_occurrences(vocab, freq);
  const auto reached = [&] {
    return freq.total == 0 || static_cast<double>(freq.total - remaining) /
                                      static_cast<double>(freq.total) >=
                                  threshold;
  };
  for (std::size_t k = 0;; ++k) {
    if (reached()) return k;
    if (k == oov.size()) return std::nullopt;
    remaining -= oov[k].second;
  }
}

Vocabulary train_bpe(const FrequencyTable& freq, std::size_t target_size) {
  std::vector<std::string> pieces = {"[UNK]"};
  std::unordered_map<std::string, int> piece_id = {{"[UNK]", 0}};
  const auto intern = [&](const std::string& s) {
    auto [it, inserted] = piece_id.try_emplace(s, static_cast<int>(pieces.size()));
    if (inserted) pieces.push_back(s);
    return it->second;
  };

  std::vector<std::string> chars;
  for (const auto& [word, _] : freq.counts) {
    for (std::size_t pos = 0; pos < word.size();) {
      const auto c = unicode::decode_at(word, pos);
      chars.push_back(word.substr(pos, c.length));
      pos += c.length;
    }
  }
  std::sort(chars.begin(), chars.end());
  chars.erase(std::unique(chars.begin(), chars.end()), chars.end());
  for (const auto& c : chars) intern(c);

  std::vector<std::pair<std::vector<int>, std::uint64_t>> words;
  for (const auto& [word, count] : freq.sorted()) {
    std::vector<int> symbols;
    for (std::size_t pos = 0; pos < word.size();) {
      const auto c = unicode::decode_at(word, pos);
      symbols.push_back(piece_id.at(word.substr(pos, c.length)));
      pos += c.length;
    }
    words.emplace_back(std::move(symbols), count);
  }

  // Pair counts are maintained incrementally; pair_words may hold stale
  // entries, which are skipped when the word no longer has the pair.
  const auto key = [](int a, int b) {
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
  };
  std::unordered_map<std::uint64_t, std::int64_t> pair_counts;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> pair_words;
  const auto account = [&](std::size_t w, std::int64_t sign) {
    const auto& [symbols, count] = words[w];
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      const auto k = key(symbols[i], symbols[i + 1]);
      pair_counts[k] += sign * static_cast<std::int64_t>(count);
      if (sign > 0) pair_words[k].push_back(w);
    }
  };
  for (std::size_t w = 0; w < words.size(); ++w) account(w, 1);

  std::vector<MergeRule> merges;
  while (pieces.size() < target_size) {
    std::uint64_t best = 0;
    std::int64_t best_count = 0;
    for (const auto& [k, count] : pair_counts) {
      if (count <= 0) continue;
      const int l = static_cast<int>(k >> 32), r = static_cast<int>(k & 0xFFFFFFFF);
      const int bl = static_cast<int>(best >> 32), br = static_cast<int>(best & 0xFFFFFFFF);
      if (count > best_count ||
          (count == best_count &&
           std::tie(pieces[l], pieces[r]) < std::tie(pieces[bl], pieces[br]))) {
        best = k;
        best_count = count;
      }
    }
    if (best_count == 0) break;
    const int left = static_cast<int>(best >> 32), right = static_cast<int>(best & 0xFFFFFFFF);
    merges.push_back({pieces[left], pieces[right]});
    const int result = intern(pieces[left] + pieces[right]);
    std::vector<std::size_t> touched = std::move(pair_words[best]);
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (std::size_t w : touched) {
      auto& symbols = words[w].first;
      bool has = false;
      for (std::size_t i = 0; i + 1 < symbols.size() && !has; ++i) {
        has = symbols[i] == left && symbols[i + 1] == right;
      }
      if (!has) continue;
      account(w, -1);
      std::vector<int> out;
      out.reserve(symbols.size());
      for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
          out.push_back(result);
          ++i;
        } else {
          out.push_back(symbols[i]);
        }
      }
      symbols = std::move(out);
      account(w, 1);
    }
    pair_counts.erase(best);
  }
  return Vocabulary::create(pieces, merges, {}, "[UNK]");
}

RankedList bm25_exhaustive(const std::vector<std::pair<std::string, std::string>>& docs,
                           const std::string& query, std::size_t top_k, double k1, double b) {
  std::vector<std::vector<std::string>> terms;
  for (const auto& [_, text] : docs) terms.push_back(index_terms(text));
  double length_sum = 0.0;
  for (const auto& t : terms) length_sum += static_cast<double>(t.size());
  const double avg = length_sum / static_cast<double>(docs.size());

  std::vector<std::string> q;
  for (const auto& t : index_terms(query)) {
    if (std::find(q.begin(), q.end(), t) == q.end()) q.push_back(t);
  }

  const double n = static_cast<double>(docs.size());
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    double score = 0.0;
    for (const auto& t : q) {
      double df = 0;
      for (const auto& other : terms) df += std::count(other.begin(), other.end(), t) > 0 ? 1 : 0;
      const double tf = static_cast<double>(std::count(terms[d].begin(), terms[d].end(), t));
      if (tf == 0) continue;
      const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
      const double norm = 1.0 - b + b * static_cast<double>(terms[d].size()) / avg;
      score += idf * tf * (k1 + 1.0) / (tf + k1 * norm);
    }
    scored.emplace_back(score, d);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    return x.first != y.first ? x.first > y.first : x.second < y.second;
  });
  RankedList list;
  for (std::size_t i = 0; i < std::min(top_k, scored.size()); ++i) {
    list.entries.push_back({docs[scored[i].second].first, scored[i].first});
  }
  return list;
}

Metrics query_metrics(const std::vector<std::string>& ranking, const std::set<std::string>& rel) {
  Metrics m;
  const auto is_rel = [&](std::size_t i) { return rel.count(ranking[i]) == 1; };
  std::vector<double> precisions;
  for (std::size_t r = 1; r <= ranking.size(); ++r) {
    if (!is_rel(r - 1)) continue;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < r; ++i) hits += is_rel(i);
    precisions.push_back(static_cast<double>(hits) / static_cast<double>(r));
  }
  if (!precisions.empty()) {
    double sum = 0;
    for (double p : precisions) sum += p;
    m.ap = sum / static_cast<double>(precisions.size());
  }
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (is_rel(i)) {
      m.rr = 1.0 / static_cast<double>(i + 1);
      break;
    }
  }
  const auto top = [&](std::size_t k) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) hits += is_rel(i);
    return hits;
  };
  m.p1 = static_cast<double>(top(1)) / 1.0;
  m.p5 = static_cast<double>(top(5)) / 5.0;
  m.m1 = top(1) > 0 ? 1.0 : 0.0;
  m.m5 = top(5) > 0 ? 1.0 : 0.0;
  return m;
}

Metrics corpus_metrics(const std::vector<std::vector<std::string>>& rankings,
                       const std::vector<std::set<std::string>>& relevant) {
  Metrics sum;
  double judged = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    const Metrics m = query_metrics(rankings[q], relevant[q]);
    sum.m1 += m.m1;
    sum.m5 += m.m5;
    if (relevant[q].empty()) continue;
    judged += 1;
    sum.ap += m.ap;
    sum.rr += m.rr;
    sum.p1 += m.p1;
    sum.p5 += m.p5;
  }
  const double all = static_cast<double>(rankings.size());
  Metrics mean;
  if (all > 0) {
    mean.m1 = sum.m1 / all;
    mean.m5 = sum.m5 / all;
  }
  if (judged > 0) {
    mean.ap = sum.ap / judged;
    mean.rr = sum.rr / judged;
    mean.p1 = sum.p1 / judged;
    mean.p5 = sum.p5 / judged;
  }
  return mean;
}

std::string zipf_corpus(std::size_t tokens, std::size_t types, double s, std::uint64_t seed) {
  static const char* kOnsets[] = {"b", "c", "d", "f", "g", "k", "l", "m", "n", "p",
                                  "r", "s", "t", "v", "w", "z", "st", "tr", "pl", "ch"};
  static const char* kNuclei[] = {"a", "e", "i", "o", "u", "ai", "ou", "y"};
  static const char* kCodas[] = {"", "", "n", "r", "s", "t", "x", "ng"};
  Rng rng(seed);
  std::set<std::string> seen;
  std::vector<std::string> words;
  while (words.size() < types) {
    std::string w;
    const std::size_t syllables = 1 + rng.uniform(4);
    for (std::size_t i = 0; i < syllables; ++i) {
      w += kOnsets[rng.uniform(std::size(kOnsets))];
      w += kNuclei[rng.uniform(std::size(kNuclei))];
      w += kCodas[rng.uniform(std::size(kCodas))];
    }
    if (rng.bernoulli(0.05)) w += std::to_string(rng.uniform(100));
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  std::vector<double> cumulative(types);
  double total = 0;
  for (std::size_t r = 0; r < types; ++r) {
    total += 1.0 / std::pow(static_cast<double>(r + 1), s);
    cumulative[r] = total;
  }
  std::string text;
  text.reserve(tokens * 8);
  for (std::size_t i = 0; i < tokens; ++i) {
    const double u = rng.unit() * total;
    const auto r = std::min<std::size_t>(
        types - 1, std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    text += words[r];
    text += (i + 1) % 20 == 0 ? '\n' : ' ';
  }
  return text;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      case '\n': out += "&#xA;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string fuzzed_posts_xml(std::size_t rows, std::uint64_t seed) {
  Rng rng(seed);
  struct Row {
    std::string id;
    std::string type;
    std::string parent;
    std::string accepted;
    std::string title;
    std::string body;
  };
  std::vector<Row> out;
  std::vector<std::int64_t> questions;
  std::map<std::int64_t, std::vector<std::int64_t>> answers_of;
  std::vector<std::int64_t> all_answers;
  std::map<std::int64_t, std::size_t> question_row;
  static const char* kBodies[] = {
      "<p>Try <code>sudo apt-get update</code> first.</p>",
      "<p>Reinstall the &quot;nvidia&quot; driver &amp; reboot.</p><pre>dmesg | tail</pre>",
      "<ul><li>one</li><li>two</li></ul>",
      "plain text with caf\xc3\xa9 and &#233;",
      "<div>broken <b>markup</p>",
  };
  std::int64_t next_id = 1;
  for (std::size_t i = 0; i < rows; ++i) {
    Row row;
    const std::int64_t id = next_id++;
    row.id = std::to_string(id);
    row.body = kBodies[rng.uniform(std::size(kBodies))];
    const double kind = rng.unit();
    if (kind < 0.3 || questions.empty()) {
      row.type = "1";
      row.title = "How do I fix problem " + std::to_string(id) + "?";
      questions.push_back(id);
      question_row[id] = out.size();
    } else if (kind < 0.9) {
      row.type = "2";
      const double p = rng.unit();
      if (p < 0.04) {
        row.parent = std::to_string(id + 1000000);  // parent outside the dump
      } else if (p < 0.06) {
        row.parent = "";  // malformed: answer without parent
      } else {
        const std::int64_t parent = questions[rng.uniform(questions.size())];
        row.parent = std::to_string(parent);
        answers_of[parent].push_back(id);
      }
      all_answers.push_back(id);
    } else if (kind < 0.95) {
      row.type = std::to_string(3 + rng.uniform(5));
    } else {
      const double m = rng.unit();
      if (m < 0.3) {
        row.type = "";  // missing PostTypeId
      } else if (m < 0.6) {
        row.id = "x" + row.id;
        row.type = "1";
      } else {
        row.id = out.empty() ? row.id : out.back().id;  // duplicate id
        row.type = "2";
        row.parent = questions.empty() ? "" : std::to_string(questions.front());
      }
    }
    out.push_back(std::move(row));
  }
  for (const std::int64_t q : questions) {
    Row& row = out[question_row[q]];
    const double p = rng.unit();
    const auto& own = answers_of[q];
    if (p < 0.6 && !own.empty()) {
      row.accepted = std::to_string(own[rng.uniform(own.size())]);
    } else if (p < 0.7) {
      row.accepted = std::to_string(q + 2000000);
    } else if (p < 0.8 && !all_answers.empty()) {
      row.accepted = std::to_string(all_answers[rng.uniform(all_answers.size())]);
    } else if (p < 0.85) {
      row.accepted = std::to_string(questions[rng.uniform(questions.size())]);
    }
  }

  std::ostringstream xml;
  xml << "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<posts>\n";
  for (const Row& row : out) {
    xml << "  <row Id=\"" << xml_escape(row.id) << '"';
    if (!row.type.empty()) xml << " PostTypeId=\"" << row.type << '"';
    if (!row.parent.empty()) xml << " ParentId=\"" << row.parent << '"';
    if (!row.accepted.empty()) xml << " AcceptedAnswerId=\"" << row.accepted << '"';
    if (!row.title.empty()) xml << " Title=\"" << xml_escape(row.title) << '"';
    xml << " Body=\"" << xml_escape(row.body) << "\" />\n";
  }
  xml << "</posts>\n";
  return xml.str();
}

std::vector<std::string> verify_pairs(const std::vector<ForumPost>& posts,
                                      const std::vector<QAPair>& pairs) {
  std::map<std::int64_t, const ForumPost*> by_id;
  for (const ForumPost& p : posts) by_id[p.post_id] = &p;
  std::vector<std::string> problems;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const QAPair& pair = pairs[i];
    const auto q = by_id.find(pair.source_question_id);
    const auto a = by_id.find(pair.source_answer_id);
    if (q == by_id.end() || a == by_id.end()) {
      problems.push_back(pair.pair_id + ": references a post missing from the dump");
      continue;
    }
    if (q->second->type != PostType::kQuestion || a->second->type != PostType::kAnswer) {
      problems.push_back(pair.pair_id + ": wrong post types");
      continue;
    }
    if (pair.label == PairLabel::kPositive) {
      ++positives;
      if (a->second->parent_id != q->second->post_id ||
          q->second->accepted_answer_id != a->second->post_id) {
        problems.push_back(pair.pair_id + ": positive fails accepted-answer linkage");
      }
      const bool next_is_negative = i + 1 < pairs.size() &&
                                    pairs[i + 1].label == PairLabel::kNegative &&
                                    pairs[i + 1].source_question_id == pair.source_question_id;
      if (!next_is_negative) problems.push_back(pair.pair_id + ": positive not followed by its negative");
    } else {
      ++negatives;
      if (a->second->parent_id == q->second->post_id) {
        problems.push_back(pair.pair_id + ": negative answers its own question");
      }
    }
  }
  if (positives != negatives) {
    problems.push_back(std::to_string(positives) + " positives vs " + std::to_string(negatives) +
                       " negatives");
  }
  return problems;
}

}  // namespace oracle
