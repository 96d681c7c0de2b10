#include "domforge/cli.h"

#include <openssl/evp.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "domforge/augment.h"
#include "domforge/corpus.h"
#include "domforge/error.h"
#include "domforge/io.h"
#include "domforge/parallel.h"
#include "domforge/ranking_eval.h"
#include "domforge/synth_forum.h"
#include "domforge/synth_rc.h"
#include "domforge/tokenizer.h"
#include "domforge/vocabstats.h"
#include "json.hpp"

namespace domforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xF];
  }
  return hex;
}

namespace {

// Reads --config files of the form
//   {"workers": 4, "select": {"threshold": 0.9, "min-count": 3}}
// where nested objects hold the options of the subcommand they are named
// after. Underscores in keys are accepted for dashes.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json doc = json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string& name = opt->get_lnames().front();
      if (opt->count() > 0) {
        doc[name] = opt->results().size() == 1 ? json(opt->results().front()) : json(opt->results());
      } else if (default_also && !opt->get_default_str().empty()) {
        doc[name] = opt->get_default_str();
      }
    }
    return doc.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    flatten(doc, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& value) {
    return value.is_string() ? value.get<std::string>() : value.dump();
  }

  static void flatten(const json& doc, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : doc.items()) {
      std::string name = key;
      std::replace(name.begin(), name.end(), '_', '-');
      if (value.is_object()) {
        auto nested = parents;
        nested.push_back(name);
        flatten(value, nested, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = name;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

std::string env_name(std::string_view option) {
  std::string name = "DOMFORGE_";
  for (char c : option) {
    name += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return name;
}

template <typename T>
CLI::Option* option(CLI::App* app, const std::string& name, T& value, const std::string& help) {
  return app->add_option("--" + name, value, help)->envname(env_name(name));
}

CLI::Option* flag(CLI::App* app, const std::string& name, bool& value, const std::string& help) {
  return app->add_flag("--" + name, value, help)->envname(env_name(name));
}

struct Globals {
  fs::path out = "out";
  unsigned workers = 1;
  std::string log_level = "info";
};

struct OutputFile {
  std::string name;
  std::uint64_t bytes = 0;
  std::string sha256;
};

// State shared by a single subcommand invocation.
class Run {
 public:
  Run(std::string subcommand, const Globals& globals, std::shared_ptr<spdlog::logger> log)
      : subcommand_(std::move(subcommand)), globals_(globals), log_(std::move(log)) {}

  const Globals& globals() const { return globals_; }
  spdlog::logger& log() { return *log_; }
  json& inputs() { return inputs_; }
  json& outputs() { return output_counts_; }

  fs::path path(std::string_view name) const { return globals_.out / name; }

  void emit(std::string_view name, const std::string& content) {
    fs::create_directories(globals_.out);
    write_file_atomic(path(name), content);
    record(name, content);
    log_->info("wrote {} ({} bytes)", path(name).string(), content.size());
  }

  // For files written by a module rather than through emit().
  void adopt(std::string_view name) { record(name, read_file(path(name))); }

  json report(const json& config, double seconds) const {
    json files = json::array();
    std::string combined;
    for (const OutputFile& f : files_) {
      files.push_back({{"file", f.name}, {"bytes", f.bytes}, {"sha256", f.sha256}});
      combined += f.name + '\t' + f.sha256 + '\n';
    }
    return {{"subcommand", subcommand_},
            {"version", kVersion},
            {"config", config},
            {"inputs", inputs_},
            {"outputs", output_counts_},
            {"duration_seconds", seconds},
            {"files", std::move(files)},
            {"digest", sha256_hex(combined)}};
  }

 private:
  void record(std::string_view name, const std::string& content) {
    files_.push_back({std::string(name), content.size(), sha256_hex(content)});
  }

  std::string subcommand_;
  Globals globals_;
  std::shared_ptr<spdlog::logger> log_;
  json inputs_ = json::object();
  json output_counts_ = json::object();
  std::vector<OutputFile> files_;
};

json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<Document> load_corpus(Run& run, const fs::path& path) {
  std::vector<Document> docs = read_documents(path);
  run.inputs()["documents"] = docs.size();
  run.log().info("read {} documents from {}", docs.size(), path.string());
  return docs;
}

template <typename Range, typename ToJson>
std::string jsonl(const Range& records, ToJson&& convert) {
  std::string text;
  for (const auto& r : records) {
    text += convert(r).dump();
    text += '\n';
  }
  return text;
}

// ---------------------------------------------------------------------------
// vocabulary statistics

struct CorpusArgs {
  fs::path vocab;
  fs::path corpus;
};

void add_corpus_args(CLI::App* sub, CorpusArgs& args) {
  option(sub, "vocab", args.vocab, "Base vocabulary JSON")->required()->check(CLI::ExistingFile);
  option(sub, "corpus", args.corpus, "Corpus directory or JSON-lines file")
      ->required()
      ->check(CLI::ExistingPath);
}

FrequencyTable count_corpus(Run& run, const fs::path& corpus) {
  const std::vector<Document> docs = load_corpus(run, corpus);
  FrequencyTable freq = count_words(docs, run.globals().workers);
  run.inputs()["word_occurrences"] = freq.total;
  run.inputs()["word_types"] = freq.counts.size();
  return freq;
}

void cmd_stats(Run& run, const CorpusArgs& args) {
  const Vocabulary vocab = Vocabulary::load(args.vocab);
  const FrequencyTable freq = count_corpus(run, args.corpus);
  const TokenizationStats stats = table_stats(vocab, freq, run.globals().workers);
  json doc = to_json(stats);
  doc["vocab_size"] = vocab.size();
  std::ostringstream tsv;
  write_frequency_tsv(freq, tsv);
  run.emit("stats.json", doc.dump(2) + "\n");
  run.emit("frequencies.tsv", tsv.str());
  run.outputs()["frequency_rows"] = freq.counts.size();
}

struct CurveArgs {
  CorpusArgs corpus;
  std::vector<std::size_t> checkpoints;
  std::uint64_t min_count = 1;
};

void cmd_curve(Run& run, const CurveArgs& args) {
  const Vocabulary vocab = Vocabulary::load(args.corpus.vocab);
  const FrequencyTable freq = count_corpus(run, args.corpus.corpus);
  const CoverageCurve curve = coverage_curve(vocab, freq, args.checkpoints, args.min_count);
  run.emit("curve.json", to_json(curve).dump(2) + "\n");
  run.emit("curve.txt", format_table(curve));
  run.outputs()["rows"] = curve.rows.size();
}

struct SelectArgs {
  CorpusArgs corpus;
  double threshold = 0.95;
  SelectOptions options;
};

void add_select_args(CLI::App* sub, SelectArgs& args) {
  option(sub, "threshold", args.threshold, "Target occurrence coverage in (0, 1]")
      ->check(CLI::Range(0.0, 1.0))
      ->check(CLI::Validator([](const std::string& s) -> std::string {
                return std::stod(s) > 0.0 ? "" : "threshold must be > 0";
              }, "(0,1]"));
  option(sub, "min-count", args.options.min_count, "Ignore words seen fewer times");
  option(sub, "round-to", args.options.round_to, "Round the selection size up to a multiple");
}

Selection run_selection(Run& run, const Vocabulary& vocab, const FrequencyTable& freq,
                        const SelectArgs& args) {
  Selection selection = select_protected(vocab, freq, args.threshold, args.options);
  if (selection.unreachable) {
    run.log().warn("coverage {:.4f} never reaches {}; selected every candidate",
                   selection.coverage, args.threshold);
  }
  run.log().info("selected {} words, coverage {:.4f} -> {:.4f}", selection.words.size(),
                 selection.baseline_coverage, selection.coverage);
  return selection;
}

void cmd_select(Run& run, const SelectArgs& args) {
  const Vocabulary vocab = Vocabulary::load(args.corpus.vocab);
  const FrequencyTable freq = count_corpus(run, args.corpus.corpus);
  const Selection selection = run_selection(run, vocab, freq, args);
  json doc = to_json(selection);
  doc["threshold"] = args.threshold;
  run.emit("selection.json", doc.dump(2) + "\n");
  run.outputs()["selected"] = selection.words.size();
}

struct ExtendArgs {
  SelectArgs select;
  fs::path words;
  std::uint64_t seed = 0;
};

void cmd_extend(Run& run, const ExtendArgs& args) {
  const Vocabulary vocab = Vocabulary::load(args.select.corpus.vocab);
  std::vector<std::string> words;
  if (!args.words.empty()) {
    for (std::string& line : read_lines(args.words)) {
      if (!line.empty()) words.push_back(std::move(line));
    }
    run.inputs()["words"] = words.size();
  } else if (!args.select.corpus.corpus.empty()) {
    const FrequencyTable freq = count_corpus(run, args.select.corpus.corpus);
    words = run_selection(run, vocab, freq, args.select).words;
  } else {
    throw ValidationError("extend needs --words or --corpus");
  }
  fs::create_directories(run.globals().out);
  const ExtensionManifest manifest = emit_extension(vocab, words, args.seed, run.globals().out);
  run.adopt(kExtendedVocabFile);
  run.adopt(kManifestFile);
  run.outputs()["added_words"] = manifest.added_words.size();
  run.outputs()["first_new_id"] = manifest.first_new_id;
}

// ---------------------------------------------------------------------------
// synthetic data

struct GenRcArgs {
  fs::path docs;
  fs::path sections;
  std::size_t negatives = 10;
  std::uint64_t seed = 0;
};

void cmd_gen_rc(Run& run, const GenRcArgs& args) {
  const SectionRoleConfig cfg = args.sections.empty()
                                    ? SectionRoleConfig::defaults()
                                    : SectionRoleConfig::from_json(read_json_file(args.sections));
  const std::vector<Document> raw = load_corpus(run, args.docs);
  std::vector<StructuredDoc> docs(raw.size());
  parallel_for(raw.size(), run.globals().workers, [&](std::size_t i) {
    docs[i] = parse_structured_doc(raw[i].text, raw[i].id, raw[i].title);
  });
  const RcCorpus corpus =
      generate_rc_corpus(docs, cfg, args.negatives, args.seed, run.globals().workers);
  run.emit("rc_examples.jsonl",
           jsonl(corpus.examples, [](const RCExample& ex) { return to_json(ex); }));
  run.emit("rc_report.json", corpus.report.to_json().dump(2) + "\n");
  run.outputs()["examples"] = corpus.examples.size();
  run.outputs()["skipped"] = corpus.report.skipped_total();
}

struct GenQaArgs {
  fs::path posts;
  std::uint64_t seed = 0;
};

void cmd_gen_qa(Run& run, const GenQaArgs& args) {
  const ParsedPosts parsed = parse_posts_file(args.posts);
  run.inputs()["rows"] = parsed.rows;
  run.inputs()["malformed_rows"] = parsed.malformed;
  PairingResult result = pair_accepted(parsed.posts, args.seed);
  result.report.malformed_rows = parsed.malformed;
  run.emit("qa_pairs.jsonl", jsonl(result.pairs, [](const QAPair& p) { return to_json(p); }));
  run.emit("qa_report.json", result.report.to_json().dump(2) + "\n");
  run.outputs()["positives"] = result.report.positives;
  run.outputs()["negatives"] = result.report.negatives;
}

struct AugmentArgs {
  fs::path input;
  fs::path plan;
  std::optional<std::uint32_t> factor;
  std::uint64_t seed = 0;
};

std::vector<RCExample> read_rc_examples(const fs::path& path) {
  std::vector<RCExample> examples;
  std::size_t line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      examples.push_back(rc_example_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw IngestionError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return examples;
}

void cmd_augment(Run& run, const AugmentArgs& args) {
  AugmentationPlan plan = AugmentationPlan::from_json(read_json_file(args.plan));
  if (args.factor) plan.factor = *args.factor;
  plan.seed = args.seed;
  const std::vector<RCExample> examples = read_rc_examples(args.input);
  run.inputs()["examples"] = examples.size();
  const std::vector<RCExample> out = augment_corpus(examples, plan, run.globals().workers);
  run.emit("augmented.jsonl", jsonl(out, [](const RCExample& ex) { return to_json(ex); }));
  run.outputs()["examples"] = out.size();
  run.outputs()["plan"] = plan.to_json();
}

// ---------------------------------------------------------------------------
// ranking and evaluation

void emit_retrieval_report(Run& run, const RetrievalScores& scores, std::string_view system) {
  json doc = to_json(scores);
  doc["system"] = system;
  run.emit("eval_retrieval.json", doc.dump(2) + "\n");
  run.emit("eval_retrieval.txt", format_table(scores, system));
}

struct RankArgs {
  fs::path docs;
  fs::path queries;
  fs::path judgments;
  std::size_t k = 50;
  double k1 = kDefaultK1;
  double b = kDefaultB;
};

void cmd_rank_bm25(Run& run, const RankArgs& args) {
  const std::vector<Document> raw = load_corpus(run, args.docs);
  std::vector<std::pair<std::string, std::string>> docs;
  docs.reserve(raw.size());
  for (const Document& d : raw) {
    docs.emplace_back(d.id, d.title.empty() ? d.text : d.title + "\n" + d.text);
  }
  const InvertedIndex index = build_index(docs, args.k1, args.b, run.globals().workers);

  std::vector<std::pair<std::string, std::string>> queries;
  std::size_t line_no = 0;
  for (const std::string& line : read_lines(args.queries)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw ValidationError(args.queries.string() + ":" + std::to_string(line_no) +
                            ": expected query_id<TAB>text");
    }
    queries.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  run.inputs()["queries"] = queries.size();

  std::vector<RankedList> runs(queries.size());
  parallel_for(queries.size(), run.globals().workers, [&](std::size_t i) {
    runs[i] = bm25_rank(index, queries[i].second, args.k, queries[i].first);
  });
  std::ostringstream tsv;
  write_runs(runs, tsv);
  run.emit("run.tsv", tsv.str());
  run.outputs()["ranked_lists"] = runs.size();

  if (!args.judgments.empty()) {
    std::ifstream in(args.judgments);
    emit_retrieval_report(run, eval_retrieval(runs, read_judgments(in)), "BM25");
  }
}

struct EvalRcArgs {
  fs::path predictions;
  fs::path golds;
  bool remove_articles = false;
};

std::map<std::string, std::string> read_answer_map(const fs::path& path) {
  const json doc = read_json_file(path);
  if (!doc.is_object()) throw ValidationError(path.string() + ": expected an object");
  std::map<std::string, std::string> answers;
  for (const auto& [id, value] : doc.items()) {
    if (value.is_null()) {
      answers[id] = "";
    } else if (value.is_string()) {
      answers[id] = value.get<std::string>();
    } else {
      throw ValidationError(path.string() + ": answer for '" + id + "' is not a string");
    }
  }
  return answers;
}

void cmd_eval_rc(Run& run, const EvalRcArgs& args) {
  const auto predictions = read_answer_map(args.predictions);
  const auto golds = read_answer_map(args.golds);
  run.inputs()["predictions"] = predictions.size();
  run.inputs()["golds"] = golds.size();
  const RcScores scores = eval_rc(predictions, golds, {args.remove_articles});
  json doc = to_json(scores);
  doc["remove_articles"] = args.remove_articles;
  run.emit("eval_rc.json", doc.dump(2) + "\n");
  run.emit("eval_rc.txt", format_table(scores));
}

struct EvalRetrievalArgs {
  fs::path runs;
  fs::path judgments;
  std::string system = "run";
};

void cmd_eval_retrieval(Run& run, const EvalRetrievalArgs& args) {
  std::ifstream runs_in(args.runs);
  std::ifstream judgments_in(args.judgments);
  const std::vector<RankedList> runs = read_runs(runs_in);
  const RelevanceJudgments judgments = read_judgments(judgments_in);
  run.inputs()["queries"] = runs.size();
  run.inputs()["judged_queries"] = judgments.size();
  emit_retrieval_report(run, eval_retrieval(runs, judgments), args.system);
}

// ---------------------------------------------------------------------------

json config_echo(const CLI::App& app, const CLI::App& sub) {
  json doc = json::object();
  const auto add = [&doc](const CLI::App& a) {
    for (const CLI::Option* opt : a.get_options()) {
      if (opt->get_lnames().empty()) continue;
      const std::string& name = opt->get_lnames().front();
      if (name == "help" || name == "config" || name == "version") continue;
      if (opt->count() > 0) {
        const auto& results = opt->results();
        doc[name] = opt->get_expected_max() > 1 ? json(results) : json(results.back());
      } else if (!opt->get_default_str().empty()) {
        doc[name] = opt->get_default_str();
      } else {
        doc[name] = nullptr;
      }
    }
  };
  add(app);
  add(sub);
  return doc;
}

// CLI11 reads the config file before the environment. Environment values are
// passed on as flags instead, so a flag beats the environment and the
// environment beats the config file.
std::vector<std::string> with_environment(const CLI::App& app, const std::vector<std::string>& args) {
  const auto given = [&](const std::string& name) {
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == "--" + name || a.starts_with("--" + name + "=");
    });
  };
  const auto from_env = [&](const CLI::App& a) {
    std::vector<std::string> extra;
    for (const CLI::Option* opt : a.get_options()) {
      if (opt->get_lnames().empty() || opt->get_envname().empty()) continue;
      const std::string& name = opt->get_lnames().front();
      const char* value = std::getenv(opt->get_envname().c_str());
      if (value != nullptr && !given(name)) extra.push_back("--" + name + "=" + value);
    }
    return extra;
  };

  std::vector<std::string> result = from_env(app);
  result.insert(result.end(), args.begin(), args.end());
  const auto sub = std::find_if(args.begin(), args.end(), [&](const std::string& a) {
    return !a.starts_with("-") && app.get_subcommand_no_throw(a) != nullptr;
  });
  if (sub != args.end()) {
    const auto extra = from_env(*app.get_subcommand_no_throw(*sub));
    result.insert(result.end(), extra.begin(), extra.end());
  }
  return result;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Domain adaptation toolkit for technical-support QA data.", "domforge"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file; objects named after a subcommand hold its options");
  app.set_version_flag("--version", std::string(kVersion));

  Globals globals;
  option(&app, "out", globals.out, "Output directory");
  option(&app, "workers", globals.workers, "Worker threads")->check(CLI::Range(1u, 1024u));
  option(&app, "log-level", globals.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  std::function<void(Run&)> action;
  const auto command = [&](const std::string& name, const std::string& help) {
    return app.add_subcommand(name, help);
  };

  CorpusArgs stats_args;
  CLI::App* stats = command("stats", "Word frequencies and tokenization statistics");
  add_corpus_args(stats, stats_args);
  stats->callback([&] { action = [&](Run& r) { cmd_stats(r, stats_args); }; });

  CurveArgs curve_args;
  CLI::App* curve = command("curve", "Coverage and BPE/TOK ratio per number of added words");
  add_corpus_args(curve, curve_args.corpus);
  option(curve, "checkpoints", curve_args.checkpoints, "Numbers of added words, increasing")
      ->required()
      ->delimiter(',');
  option(curve, "min-count", curve_args.min_count, "Ignore words seen fewer times");
  curve->callback([&] { action = [&](Run& r) { cmd_curve(r, curve_args); }; });

  SelectArgs select_args;
  CLI::App* select = command("select", "Smallest word list reaching a coverage threshold");
  add_corpus_args(select, select_args.corpus);
  add_select_args(select, select_args);
  select->callback([&] { action = [&](Run& r) { cmd_select(r, select_args); }; });

  ExtendArgs extend_args;
  CLI::App* extend = command("extend", "Add protected words to a vocabulary");
  option(extend, "vocab", extend_args.select.corpus.vocab, "Base vocabulary JSON")
      ->required()
      ->check(CLI::ExistingFile);
  option(extend, "corpus", extend_args.select.corpus.corpus, "Select words from this corpus")
      ->check(CLI::ExistingPath);
  option(extend, "words", extend_args.words, "Newline-separated words to add")
      ->check(CLI::ExistingFile);
  add_select_args(extend, extend_args.select);
  option(extend, "seed", extend_args.seed, "Embedding init seed recorded in the manifest")
      ->required();
  extend->callback([&] { action = [&](Run& r) { cmd_extend(r, extend_args); }; });

  GenRcArgs rc_args;
  CLI::App* gen_rc = command("gen-rc", "Synthetic reading-comprehension examples");
  option(gen_rc, "docs", rc_args.docs, "Sectioned documents")->required()->check(CLI::ExistingPath);
  option(gen_rc, "sections", rc_args.sections, "Section role config JSON")
      ->check(CLI::ExistingFile);
  option(gen_rc, "negatives", rc_args.negatives, "Negative documents per example");
  option(gen_rc, "seed", rc_args.seed, "Random seed")->required();
  gen_rc->callback([&] { action = [&](Run& r) { cmd_gen_rc(r, rc_args); }; });

  GenQaArgs qa_args;
  CLI::App* gen_qa = command("gen-qa", "Accepted-answer pairs from a Posts.xml dump");
  option(gen_qa, "posts", qa_args.posts, "Posts.xml")->required()->check(CLI::ExistingFile);
  option(gen_qa, "seed", qa_args.seed, "Random seed")->required();
  gen_qa->callback([&] { action = [&](Run& r) { cmd_gen_qa(r, qa_args); }; });

  AugmentArgs augment_args;
  CLI::App* augment = command("augment", "Expand RC examples with perturbed copies");
  option(augment, "input", augment_args.input, "RC examples JSON-lines")
      ->required()
      ->check(CLI::ExistingFile);
  option(augment, "plan", augment_args.plan, "Augmentation plan JSON")
      ->required()
      ->check(CLI::ExistingFile);
  option(augment, "factor", augment_args.factor, "Output size multiple (overrides the plan)")
      ->check(CLI::PositiveNumber);
  option(augment, "seed", augment_args.seed, "Random seed (overrides the plan)")->required();
  augment->callback([&] { action = [&](Run& r) { cmd_augment(r, augment_args); }; });

  RankArgs rank_args;
  CLI::App* rank = command("rank-bm25", "BM25 ranking of queries against a document set");
  option(rank, "docs", rank_args.docs, "Documents")->required()->check(CLI::ExistingPath);
  option(rank, "queries", rank_args.queries, "TSV query_id<TAB>text")
      ->required()
      ->check(CLI::ExistingFile);
  option(rank, "judgments", rank_args.judgments, "Also evaluate against TSV judgments")
      ->check(CLI::ExistingFile);
  option(rank, "k", rank_args.k, "Documents per query")->check(CLI::PositiveNumber);
  option(rank, "k1", rank_args.k1, "BM25 k1")->check(CLI::NonNegativeNumber);
  option(rank, "b", rank_args.b, "BM25 b")->check(CLI::Range(0.0, 1.0));
  rank->callback([&] { action = [&](Run& r) { cmd_rank_bm25(r, rank_args); }; });

  EvalRcArgs eval_rc_args;
  CLI::App* eval_rc_cmd = command("eval-rc", "F1 and HA_F1 of RC predictions");
  option(eval_rc_cmd, "predictions", eval_rc_args.predictions, "JSON example_id -> answer")
      ->required()
      ->check(CLI::ExistingFile);
  option(eval_rc_cmd, "golds", eval_rc_args.golds, "JSON example_id -> gold answer")
      ->required()
      ->check(CLI::ExistingFile);
  flag(eval_rc_cmd, "remove-articles", eval_rc_args.remove_articles, "Drop a/an/the");
  eval_rc_cmd->callback([&] { action = [&](Run& r) { cmd_eval_rc(r, eval_rc_args); }; });

  EvalRetrievalArgs eval_ret_args;
  CLI::App* eval_ret = command("eval-retrieval", "MAP, MRR, P@k and Match@k of a run");
  option(eval_ret, "runs", eval_ret_args.runs, "TSV query_id<TAB>doc_id<TAB>rank<TAB>score")
      ->required()
      ->check(CLI::ExistingFile);
  option(eval_ret, "judgments", eval_ret_args.judgments, "TSV query_id<TAB>doc_id")
      ->required()
      ->check(CLI::ExistingFile);
  option(eval_ret, "system", eval_ret_args.system, "Row label in the table");
  eval_ret->callback([&] { action = [&](Run& r) { cmd_eval_retrieval(r, eval_ret_args); }; });

  std::vector<std::string> reversed = with_environment(app, args);
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const CLI::ConversionError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const CLI::FileError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << "run 'domforge --help' for usage\n";
    return kExitUsage;
  }

  const CLI::App* sub = app.get_subcommands().front();
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("domforge", sink);
  logger->set_level(spdlog::level::from_str(globals.log_level));
  logger->set_pattern("[%H:%M:%S.%e] [%l] %v");

  Run state(sub->get_name(), globals, logger);
  const auto start = std::chrono::steady_clock::now();
  try {
    action(state);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const json report = state.report(config_echo(app, *sub), seconds);
    write_file_atomic(state.path(sub->get_name() + ".report.json"), report.dump(2) + "\n");
    logger->info("{} finished in {:.3f}s, digest {}", sub->get_name(), seconds,
                 report["digest"].get<std::string>());
    return kExitOk;
  } catch (const ValidationError& e) {
    logger->error("{}", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    logger->error("{}", e.what());
    return kExitRuntime;
  }
}

}  // namespace domforge::cli
