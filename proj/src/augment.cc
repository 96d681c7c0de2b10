#include "domforge/augment.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "domforge/error.h"
#include "domforge/parallel.h"
#include "domforge/tokenizer.h"
#include "domforge/unicode.h"

namespace domforge {

namespace {

struct ByteRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct Edit {
  std::string text;
  std::optional<std::size_t> kept_at;  // new byte offset of the protected range
};

using DropPredicate = std::function<bool(std::string_view token)>;

// Removes the pre-tokens selected by `drop`. Tokens overlapping `keep` always
// survive and keep their inner spacing. When a run of tokens disappears the
// separator kept between its neighbours is the dropped gap with the most
// line breaks, so paragraph and title lines survive; an empty separator
// becomes one space so neighbours do not fuse.
Edit drop_tokens(std::string_view text, const DropPredicate& drop,
                 std::optional<ByteRange> keep, bool keep_one) {
  const std::vector<TokenSpan> spans = pre_tokenize_spans(text);
  if (spans.empty()) return {std::string(text), keep ? std::optional(keep->begin) : std::nullopt};

  if (keep) {
    const bool aligned =
        std::any_of(spans.begin(), spans.end(), [&](auto& s) { return s.begin == keep->begin; }) &&
        std::any_of(spans.begin(), spans.end(), [&](auto& s) { return s.end == keep->end; });
    // Spans not on token boundaries are left untouched rather than risk
    // splitting the answer.
    if (!aligned) return {std::string(text), keep->begin};
  }

  std::vector<bool> dropped(spans.size(), false);
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const bool inside = keep && spans[i].begin < keep->end && spans[i].end > keep->begin;
    if (!inside) dropped[i] = drop(text.substr(spans[i].begin, spans[i].end - spans[i].begin));
  }
  if (keep_one && std::all_of(dropped.begin(), dropped.end(), [](bool d) { return d; })) {
    dropped[0] = false;
  }

  const auto gap = [&](std::size_t i) {
    return text.substr(spans[i].end, spans[i + 1].begin - spans[i].end);
  };

  Edit edit;
  edit.text = std::string(text.substr(0, spans.front().begin));
  std::optional<std::size_t> previous;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (dropped[i]) continue;
    if (previous) {
      if (*previous + 1 == i) {
        edit.text += gap(*previous);
      } else {
        std::string_view best = gap(*previous);
        for (std::size_t g = *previous + 1; g < i; ++g) {
          if (std::count(gap(g).begin(), gap(g).end(), '\n') >
              std::count(best.begin(), best.end(), '\n')) {
            best = gap(g);
          }
        }
        edit.text += best.empty() ? std::string_view(" ") : best;
      }
    }
    if (keep && spans[i].begin == keep->begin) edit.kept_at = edit.text.size();
    edit.text += text.substr(spans[i].begin, spans[i].end - spans[i].begin);
    previous = i;
  }
  edit.text += text.substr(spans.back().end);
  return edit;
}

ByteRange answer_bytes(const std::string& context, const AnswerSpan& answer) {
  return {unicode::byte_offset(context, answer.char_start),
          unicode::byte_offset(context, answer.char_end)};
}

// Applies `drop` to the query and every candidate context.
RCExample drop_words(const RCExample& example, const DropPredicate& drop) {
  RCExample out = example;
  out.query = drop_tokens(example.query, drop, std::nullopt, true).text;
  for (std::size_t j = 0; j < out.candidates.size(); ++j) {
    std::string& context = out.candidates[j].context;
    if (out.answer && out.answer->doc_index == j) {
      const Edit edit = drop_tokens(context, drop, answer_bytes(context, *out.answer), false);
      const std::size_t start = unicode::length(std::string_view(edit.text).substr(0, *edit.kept_at));
      out.answer->char_end = start + (out.answer->char_end - out.answer->char_start);
      out.answer->char_start = start;
      context = edit.text;
    } else {
      context = drop_tokens(context, drop, std::nullopt, false).text;
    }
  }
  return out;
}

RCExample truncate_query(const RCExample& example, double fraction) {
  RCExample out = example;
  const auto spans = pre_tokenize_spans(example.query);
  if (spans.empty()) return out;
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(spans.size()))));
  out.query = example.query.substr(0, spans[std::min(keep, spans.size()) - 1].end);
  return out;
}

RCExample drop_titles(const RCExample& example) {
  RCExample out = example;
  for (std::size_t j = 0; j < out.candidates.size(); ++j) {
    Candidate& c = out.candidates[j];
    if (c.title.empty()) continue;
    std::size_t cut = 0;
    if (c.context == c.title) {
      cut = c.context.size();
    } else if (c.context.starts_with(c.title + "\n\n")) {
      cut = c.title.size() + 2;
    } else if (c.context.starts_with(c.title + "\n")) {
      cut = c.title.size() + 1;
    } else {
      continue;
    }
    if (out.answer && out.answer->doc_index == j) {
      const std::size_t shift = unicode::length(std::string_view(c.context).substr(0, cut));
      if (out.answer->char_start < shift) continue;  // span overlaps the title
      out.answer->char_start -= shift;
      out.answer->char_end -= shift;
    }
    c.context.erase(0, cut);
    c.title.clear();
  }
  return out;
}

}  // namespace

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kQueryTruncate: return "query_truncate";
    case StrategyKind::kWordDropout: return "word_dropout";
    case StrategyKind::kDuplicatePositive: return "duplicate_positive";
    case StrategyKind::kStopwordRemoval: return "stopword_removal";
    case StrategyKind::kTitleDrop: return "title_drop";
  }
  return "unknown";
}

StrategyKind strategy_kind_from_string(std::string_view name) {
  for (StrategyKind kind : {StrategyKind::kQueryTruncate, StrategyKind::kWordDropout,
                            StrategyKind::kDuplicatePositive, StrategyKind::kStopwordRemoval,
                            StrategyKind::kTitleDrop}) {
    if (to_string(kind) == name) return kind;
  }
  throw ValidationError("unknown augmentation strategy '" + std::string(name) + "'");
}

void AugmentationStrategy::validate() const {
  switch (kind) {
    case StrategyKind::kQueryTruncate:
      if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ValidationError("query_truncate fraction must be in (0, 1)");
      }
      break;
    case StrategyKind::kWordDropout:
      if (!(rate > 0.0 && rate < 1.0)) {
        throw ValidationError("word_dropout rate must be in (0, 1)");
      }
      break;
    case StrategyKind::kStopwordRemoval:
      if (stopwords.empty() && stopword_list != "en") {
        throw ValidationError("unknown stopword list '" + stopword_list + "'");
      }
      break;
    case StrategyKind::kDuplicatePositive:
    case StrategyKind::kTitleDrop:
      break;
  }
}

nlohmann::json AugmentationStrategy::to_json() const {
  nlohmann::json doc = {{"kind", to_string(kind)}};
  switch (kind) {
    case StrategyKind::kQueryTruncate: doc["fraction"] = fraction; break;
    case StrategyKind::kWordDropout: doc["rate"] = rate; break;
    case StrategyKind::kStopwordRemoval:
      doc["stopword_list"] = stopword_list;
      if (!stopwords.empty()) doc["stopwords"] = stopwords;
      break;
    default: break;
  }
  return doc;
}

AugmentationStrategy AugmentationStrategy::from_json(const nlohmann::json& doc) {
  try {
    AugmentationStrategy s;
    s.kind = strategy_kind_from_string(doc.at("kind").get<std::string>());
    s.fraction = doc.value("fraction", s.fraction);
    s.rate = doc.value("rate", s.rate);
    s.stopword_list = doc.value("stopword_list", s.stopword_list);
    s.stopwords = doc.value("stopwords", s.stopwords);
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed strategy: ") + e.what());
  }
}

void AugmentationPlan::validate() const {
  if (factor < 1) throw ValidationError("augmentation factor must be >= 1");
  if (factor > 1 && strategies.empty()) {
    throw ValidationError("augmentation plan needs at least one strategy when factor > 1");
  }
  for (const auto& s : strategies) s.validate();
}

AugmentationPlan AugmentationPlan::from_json(const nlohmann::json& doc) {
  try {
    AugmentationPlan plan;
    plan.factor = doc.value("factor", 1u);
    plan.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("strategies")) {
      for (const auto& s : doc.at("strategies")) {
        plan.strategies.push_back(AugmentationStrategy::from_json(s));
      }
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed augmentation plan: ") + e.what());
  }
}

nlohmann::json AugmentationPlan::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& s : strategies) list.push_back(s.to_json());
  return {{"factor", factor}, {"seed", seed}, {"strategies", std::move(list)}};
}

RCExample apply_strategy(const RCExample& example, const AugmentationStrategy& strategy,
                         Rng& rng) {
  strategy.validate();
  if (const auto problems = check_invariants(example); !problems.empty()) {
    throw ValidationError("example '" + example.example_id + "' is invalid: " + problems.front());
  }

  RCExample out;
  switch (strategy.kind) {
    case StrategyKind::kQueryTruncate:
      out = truncate_query(example, strategy.fraction);
      break;
    case StrategyKind::kWordDropout:
      out = drop_words(example, [&](std::string_view) { return rng.bernoulli(strategy.rate); });
      break;
    case StrategyKind::kDuplicatePositive:
      out = example;
      break;
    case StrategyKind::kStopwordRemoval: {
      std::unordered_set<std::string> custom;
      for (const auto& w : strategy.stopwords) custom.insert(unicode::to_lower(w));
      const auto& list = strategy.stopwords.empty() ? english_stopwords() : custom;
      out = drop_words(example, [&](std::string_view token) {
        return list.contains(unicode::to_lower(token));
      });
      break;
    }
    case StrategyKind::kTitleDrop:
      out = drop_titles(example);
      break;
  }
  out.example_id = example.example_id + "~" + std::string(to_string(strategy.kind));
  if (const auto problems = check_invariants(out); !problems.empty()) {
    throw std::logic_error("augmentation broke example '" + example.example_id +
                           "': " + problems.front());
  }
  return out;
}

std::vector<RCExample> augment_corpus(std::span<const RCExample> examples,
                                      const AugmentationPlan& plan, unsigned workers) {
  plan.validate();
  const std::size_t factor = plan.factor;
  std::vector<RCExample> out(examples.size() * factor);
  parallel_for(examples.size(), workers, [&](std::size_t i) {
    const RCExample& original = examples[i];
    out[i * factor] = original;
    const std::uint64_t example_seed = derive_seed(plan.seed, i);
    for (std::size_t v = 1; v < factor; ++v) {
      const AugmentationStrategy& strategy = plan.strategies[(v - 1) % plan.strategies.size()];
      Rng rng(derive_seed(example_seed, v));
      try {
        RCExample variant = apply_strategy(original, strategy, rng);
        variant.example_id = original.example_id + "#aug" + std::to_string(v) + "-" +
                             std::string(to_string(strategy.kind));
        out[i * factor + v] = std::move(variant);
      } catch (const Error& e) {
        throw ValidationError("augmenting example '" + original.example_id + "' (#" +
                              std::to_string(i) + "): " + e.what());
      }
    }
  });
  return out;
}

}  // namespace domforge
