#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "domforge/cli.h"
#include "domforge/io.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace domforge;

namespace {

const fs::path kSample = DOMFORGE_SAMPLE_DIR;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), {"--log-level", "warn"});
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string sample(const char* name) { return (kSample / name).string(); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::path(::testing::TempDir()) /
           ("domforge_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string out(const std::string& sub = "out") const { return (dir_ / sub).string(); }
  json report(const std::string& sub, const std::string& name) const {
    return json::parse(read_file(dir_ / sub / (name + ".report.json")));
  }

  fs::path dir_;
};

// Every command of the pipeline on the sample data.
std::vector<std::vector<std::string>> pipeline(const std::string& out, unsigned workers) {
  const std::string w = std::to_string(workers);
  const std::string rc = (fs::path(out) / "rc_examples.jsonl").string();
  return {
      {"--out", out, "--workers", w, "stats", "--vocab", sample("vocab.json"), "--corpus", sample("docs.jsonl")},
      {"--out", out, "--workers", w, "curve", "--vocab", sample("vocab.json"), "--corpus",
       sample("docs.jsonl"), "--checkpoints", "0,10,50,100"},
      {"--out", out, "--workers", w, "select", "--vocab", sample("vocab.json"), "--corpus",
       sample("docs.jsonl")},
      {"--out", out, "--workers", w, "extend", "--vocab", sample("vocab.json"), "--corpus",
       sample("docs.jsonl"), "--seed", "7"},
      {"--out", out, "--workers", w, "gen-rc", "--docs", sample("docs.jsonl"), "--sections",
       sample("sections.json"), "--seed", "3"},
      {"--out", out, "--workers", w, "gen-qa", "--posts", sample("Posts.xml"), "--seed", "3"},
      {"--out", out, "--workers", w, "augment", "--input", rc, "--plan", sample("augment_plan.json"),
       "--seed", "3"},
      {"--out", out, "--workers", w, "rank-bm25", "--docs", sample("docs.jsonl"), "--queries",
       sample("queries.tsv"), "--judgments", sample("qrels.tsv"), "--k", "5"},
      {"--out", out, "--workers", w, "eval-rc", "--predictions", sample("rc_predictions.json"),
       "--golds", sample("rc_golds.json")},
      {"--out", out, "--workers", w, "eval-retrieval", "--runs",
       (fs::path(out) / "run.tsv").string(), "--judgments", sample("qrels.tsv"), "--system", "BM25"},
  };
}

}  // namespace

TEST_F(CliTest, HelpVersionAndUsageErrors) {
  Result help = run({"--help"});
  EXPECT_EQ(help.code, cli::kExitOk);
  EXPECT_NE(help.out.find("gen-rc"), std::string::npos);
  EXPECT_EQ(run({"select", "--help"}).code, cli::kExitOk);
  Result version = run({"--version"});
  EXPECT_EQ(version.code, cli::kExitOk);
  EXPECT_EQ(version.out, std::string(cli::kVersion) + "\n");

  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"stats", "--vocab", sample("vocab.json"), "--corpus", sample("docs.jsonl"),
                 "--bogus"}).code,
            cli::kExitUsage);
}

TEST_F(CliTest, ValidationErrors) {
  const std::vector<std::string> base = {"--out", out(), "select", "--vocab", sample("vocab.json"),
                                         "--corpus", sample("docs.jsonl"), "--threshold"};
  for (const char* bad : {"1.5", "0", "-0.1", "abc"}) {
    auto args = base;
    args.push_back(bad);
    EXPECT_EQ(run(args).code, cli::kExitValidation) << bad;
  }
  EXPECT_EQ(run({"--out", out(), "stats", "--vocab", out("missing.json"), "--corpus",
                 sample("docs.jsonl")}).code,
            cli::kExitValidation);
  EXPECT_EQ(run({"--workers", "0", "--out", out(), "gen-qa", "--posts", sample("Posts.xml"),
                 "--seed", "1"}).code,
            cli::kExitValidation);
  // The seed of a stochastic command is mandatory.
  EXPECT_NE(run({"--out", out(), "gen-qa", "--posts", sample("Posts.xml")}).code, cli::kExitOk);
  EXPECT_FALSE(fs::exists(dir_ / "out" / "qa_pairs.jsonl"));
  // A validation failure inside the module also maps to 3.
  EXPECT_EQ(run({"--out", out(), "gen-rc", "--docs", sample("docs.jsonl"), "--negatives", "500",
                 "--seed", "1"}).code,
            cli::kExitValidation);
}

TEST_F(CliTest, ConfigFileAndEnvironmentPrecedence) {
  const fs::path config = dir_ / "config.json";
  write_file_atomic(config, json{{"out", out("from_config")},
                                 {"select", {{"threshold", 0.5}, {"min_count", 3}}}}
                                .dump());
  const std::vector<std::string> args = {"--config", config.string(), "select", "--vocab",
                                         sample("vocab.json"), "--corpus", sample("docs.jsonl")};
  ASSERT_EQ(run(args).code, cli::kExitOk);
  json r = report("from_config", "select");
  EXPECT_EQ(r["config"]["threshold"], "0.5");
  EXPECT_EQ(r["config"]["min-count"], "3");

  ::setenv("DOMFORGE_THRESHOLD", "0.7", 1);
  ASSERT_EQ(run(args).code, cli::kExitOk);
  EXPECT_EQ(report("from_config", "select")["config"]["threshold"], "0.7");

  auto with_flag = args;
  with_flag.insert(with_flag.end(), {"--threshold", "0.9"});
  ASSERT_EQ(run(with_flag).code, cli::kExitOk);
  EXPECT_EQ(report("from_config", "select")["config"]["threshold"], "0.9");
  ::unsetenv("DOMFORGE_THRESHOLD");

  const json selection = json::parse(read_file(dir_ / "from_config" / "selection.json"));
  EXPECT_DOUBLE_EQ(selection["threshold"].get<double>(), 0.9);

  write_file_atomic(config, "{not json");
  EXPECT_EQ(run(args).code, cli::kExitValidation);
}

TEST_F(CliTest, PipelineReportsAndDeterminism) {
  for (const auto& args : pipeline(out("a"), 1)) {
    const Result r = run(args);
    ASSERT_EQ(r.code, cli::kExitOk) << args[6] << ": " << r.err;
  }
  for (const auto& args : pipeline(out("b"), 3)) ASSERT_EQ(run(args).code, cli::kExitOk);

  for (const char* sub : {"stats", "curve", "select", "extend", "gen-rc", "gen-qa", "augment",
                          "rank-bm25", "eval-rc", "eval-retrieval"}) {
    const json a = report("a", sub);
    const json b = report("b", sub);
    EXPECT_EQ(a["subcommand"], sub);
    EXPECT_EQ(a["version"], cli::kVersion);
    EXPECT_FALSE(a["files"].empty()) << sub;
    EXPECT_EQ(a["digest"], b["digest"]) << sub;
    for (const json& f : a["files"]) {
      const std::string content = read_file(dir_ / "a" / f["file"].get<std::string>());
      EXPECT_EQ(f["bytes"].get<std::size_t>(), content.size());
      EXPECT_EQ(f["sha256"], cli::sha256_hex(content));
    }
  }
  EXPECT_EQ(report("a", "gen-qa")["config"]["seed"], "3");
  EXPECT_EQ(report("a", "augment")["outputs"]["examples"], 180);

  for (const auto& entry : fs::recursive_directory_iterator(dir_)) {
    EXPECT_EQ(entry.path().string().find(".tmp"), std::string::npos) << entry.path();
  }
}

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(cli::sha256_hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(cli::sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
