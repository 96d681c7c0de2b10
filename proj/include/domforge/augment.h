#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "domforge/rng.h"
#include "domforge/synth_rc.h"
#include "json.hpp"

namespace domforge {

enum class StrategyKind {
  kQueryTruncate,
  kWordDropout,
  kDuplicatePositive,
  kStopwordRemoval,
  kTitleDrop,
};

std::string_view to_string(StrategyKind kind);
StrategyKind strategy_kind_from_string(std::string_view name);

struct AugmentationStrategy {
  StrategyKind kind = StrategyKind::kDuplicatePositive;
  double fraction = 0.5;             // query_truncate, in (0, 1)
  double rate = 0.1;                 // word_dropout, in (0, 1)
  std::string stopword_list = "en";  // stopword_removal
  // Overrides the named list when non-empty. Matched case-insensitively.
  std::vector<std::string> stopwords;

  // Throws ValidationError for out-of-range params or an unknown list id.
  void validate() const;
  nlohmann::json to_json() const;
  static AugmentationStrategy from_json(const nlohmann::json& doc);
};

struct AugmentationPlan {
  std::vector<AugmentationStrategy> strategies;
  std::uint32_t factor = 1;
  std::uint64_t seed = 0;

  void validate() const;
  // {"factor": 10, "seed": 1, "strategies": [{"kind": "word_dropout", "rate": 0.1}, ...]}
  static AugmentationPlan from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

// Bundled English stopword list (list id "en").
const std::unordered_set<std::string>& english_stopwords();

// Returns a perturbed copy satisfying every RCExample invariant. Words inside
// the answer span are never removed; span offsets are recomputed after every
// edit. The copy's id is `example.example_id + "~" + kind`.
RCExample apply_strategy(const RCExample& example, const AugmentationStrategy& strategy,
                         Rng& rng);

// Originals in input order, each followed by factor-1 variants whose strategy
// cycles through plan.strategies. Variant v of example i draws from
// derive_seed(derive_seed(seed, i), v).
std::vector<RCExample> augment_corpus(std::span<const RCExample> examples,
                                      const AugmentationPlan& plan, unsigned workers = 1);

}  // namespace domforge
