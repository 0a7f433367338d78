// End-to-end runs of the rrag binary on a synthetic corpus.
#include <sys/wait.h>

#include <cstdio>
#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "rrag/hash.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using namespace rrag;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int status = -1;
  std::string output;  // stdout and stderr
};

Outcome run(const std::string& args) {
  const std::string cmd = std::string(RRAG_CLI) + " " + args + " 2>&1";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return o;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) o.output.append(buf, n);
  const int raw = pclose(pipe);
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return o;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    fixtures::make_synthetic({.samples = 25}).write(dir_ / "corpus.tsv", dir_ / "qa.jsonl");
  }

  std::string base(const std::string& out = "out") const {
    return "--corpus " + (dir_ / "corpus.tsv").string() + " --qa " + (dir_ / "qa.jsonl").string() +
           " --task popqa --out-dir " + (dir_ / out).string();
  }

  // The whole offline pipeline; returns the first failing step's outcome.
  Outcome pipeline(const std::string& out, int parallelism) const {
    const std::string common = base(out) + " --parallelism " + std::to_string(parallelism);
    for (const std::string step : {"index", "retrieve", "synthesize --generator-model mock:echo", "augment",
                                   "build-icl", "export-sft", "infer --mode instruct-icl --inference-model mock:echo",
                                   "judge --judge-model mock:echo", "eval --with-judge --retrieval-k 5"}) {
      auto o = run(common + " " + step);
      if (o.status != 0) {
        o.output = step + ": " + o.output;
        return o;
      }
    }
    return {0, {}};
  }

  fixtures::TempDir dir_;
};

nlohmann::json manifest(const fs::path& path) { return nlohmann::json::parse(fixtures::read_file(path)); }

}  // namespace

TEST_F(Cli, FullPipelineIsDeterministicAcrossParallelism) {
  const auto a = pipeline("p1", 1);
  ASSERT_EQ(a.status, 0) << a.output;
  const auto b = pipeline("p8", 8);
  ASSERT_EQ(b.status, 0) << b.output;
  for (const char* f : {"retrievals.jsonl", "rationales.jsonl", "augmented.jsonl", "demonstrations.jsonl", "sft.jsonl",
                        "generations.jsonl", "judgments.jsonl", "report.json"}) {
    ASSERT_TRUE(fs::exists(dir_ / "p1" / f)) << f;
    EXPECT_EQ(fixtures::read_file(dir_ / "p1" / f), fixtures::read_file(dir_ / "p8" / f)) << f;
  }
}

TEST_F(Cli, ManifestsRecordInputsOutputsAndConfig) {
  ASSERT_EQ(pipeline("out", 4).status, 0);
  const auto m = manifest(dir_ / "out" / "infer.manifest.json");
  EXPECT_EQ(m["command"], "infer");
  EXPECT_EQ(m["versions"]["rrag"], RRAG_VERSION);
  EXPECT_EQ(m["inputs"]["qa"]["sha256"], sha256_hex(fixtures::read_file(dir_ / "qa.jsonl")));
  EXPECT_EQ(m["outputs"]["generations.jsonl"], sha256_hex(fixtures::read_file(dir_ / "out" / "generations.jsonl")));
  EXPECT_EQ(m["config"]["infer.mode"], "instruct-icl");
  EXPECT_EQ(m["config"]["parallelism"], 4);
  EXPECT_FALSE(m["config"].contains("eval.retrieval-k"));
}

TEST_F(Cli, MissingPrerequisiteNamesTheProducer) {
  ASSERT_EQ(run(base() + " index").status, 0);
  const auto o = run(base() + " synthesize --generator-model mock:echo");
  EXPECT_EQ(o.status, 1);
  EXPECT_NE(o.output.find("run `rrag retrieve`"), std::string::npos) << o.output;
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("--help").status, 0);
  EXPECT_EQ(run("").status, 1);
  EXPECT_EQ(run("frobnicate").status, 1);
  EXPECT_EQ(run(base() + " index --no-such-flag").status, 1);
  EXPECT_EQ(run("--qa /nonexistent.jsonl --out-dir " + (dir_ / "x").string() + " check-qa").status, 1);
  ASSERT_EQ(run(base() + " index").status, 0);
  ASSERT_EQ(run(base() + " retrieve").status, 0);
  // Unreachable endpoint: every sample fails, which is a runtime failure.
  const auto o = run(base() + " --max-retries 0 --timeout-ms 500 synthesize --generator-model m "
                               "--generator-url http://127.0.0.1:1");
  EXPECT_EQ(o.status, 2) << o.output;
  // One scripted failure among successes is a partial run.
  {
    std::ofstream script(dir_ / "script.jsonl");
    script << R"({"sample_id": "s0", "reply": "", "fail": true})" << '\n';
    for (int i = 1; i < 25; ++i) script << R"({"sample_id": "s)" << i << R"(", "reply": "ok"})" << '\n';
  }
  const auto partial = run(base() + " synthesize --generator-model mock:scripted=" + (dir_ / "script.jsonl").string());
  EXPECT_EQ(partial.status, 3) << partial.output;
}

TEST_F(Cli, FlagsOverrideConfigFile) {
  {
    std::ofstream cfg(dir_ / "run.toml");
    cfg << "seed = 5\nparallelism = 2\n[retrieve]\ndepth = 12\n";
  }
  ASSERT_EQ(run(base() + " index").status, 0);
  const auto o = run(base() + " --config " + (dir_ / "run.toml").string() + " --seed 9 retrieve");
  ASSERT_EQ(o.status, 0) << o.output;
  const auto m = manifest(dir_ / "out" / "retrieve.manifest.json");
  EXPECT_EQ(m["config"]["seed"], 9);
  EXPECT_EQ(m["config"]["parallelism"], 2);
  EXPECT_EQ(m["config"]["retrieve.depth"], 12);
}

TEST_F(Cli, SweepsWriteCsv) {
  for (const std::string step : {"index", "retrieve", "synthesize --variant template", "augment"}) {
    ASSERT_EQ(run(base() + " " + step).status, 0) << step;
  }
  ASSERT_EQ(run(base() + " sweep-docs --k-values 1,5,10 --inference-model mock:extractive").status, 0);
  const auto csv = fixtures::read_file(dir_ / "out" / "sweep_docs.csv");
  EXPECT_EQ(csv.rfind("k_or_n,accuracy,precision\n1,", 0), 0u) << csv;
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  ASSERT_EQ(run(base() + " sweep-demos --inference-model mock:extractive").status, 0);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "sweep_demos.csv"));
}

TEST_F(Cli, ConfigSchemaAndTemplates) {
  const auto schema = run("config-schema");
  ASSERT_EQ(schema.status, 0);
  EXPECT_NE(schema.output.find("[infer]"), std::string::npos);
  EXPECT_NE(schema.output.find("k1"), std::string::npos);
  const auto dump = run("--out-dir " + (dir_ / "out").string() + " dump-templates");
  ASSERT_EQ(dump.status, 0);
  EXPECT_EQ(fixtures::read_file(dir_ / "out" / "templates.txt"), dump.output);
}
