#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "fairflow_cli.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string line; std::getline(ss, line);) out.push_back(line);
  return out;
}

struct CliResult {
  int code;
  std::string out, err;
};

// One synthetic corpus pushed through ingest and recommend, shared by the
// whole suite.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("fairflow_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    ASSERT_EQ(run({"synth", "--users", "120", "--items", "90", "--suppliers", "25", "--seed", "3", "--out",
                   path("corpus")}).code, 0);
    ASSERT_EQ(run({"ingest", "--ratings", path("corpus/ratings.tsv"), "--suppliers",
                   path("corpus/suppliers.tsv"), "--seed", "3", "--out", path("data")}).code, 0);
    ASSERT_EQ(run({"recommend", "--train", path("data/train.tsv"), "--k", "20", "--t", "20", "--out",
                   path("long.tsv")}).code, 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string path(const std::string& rel) { return (dir_ / rel).string(); }

  static CliResult run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = fairflow::cli::run(std::move(args), out, err);
    return {code, out.str(), err.str()};
  }

  static std::vector<std::string> rerank_args(const std::string& variant, const std::string& out) {
    return {"rerank", "--input", path("long.tsv"), "--suppliers", path("data/suppliers.tsv"), "--variant",
            variant, "--t", "20", "--n", "5", "--lambda", "0.3", "--out", path(out)};
  }

  static std::vector<std::string> eval_args(const std::string& input, const std::string& out) {
    return {"evaluate", "--input", path(input), "--train", path("data/train.tsv"), "--test",
            path("data/test.tsv"), "--suppliers", path("data/suppliers.tsv"), "--n", "5", "--out", path(out)};
  }

  static fs::path dir_;
};

fs::path CliPipeline::dir_;

TEST_F(CliPipeline, IngestWritesSplitAndStats) {
  EXPECT_TRUE(fs::exists(path("data/train.tsv")));
  EXPECT_TRUE(fs::exists(path("data/test.tsv")));
  EXPECT_TRUE(fs::exists(path("data/suppliers.tsv")));
  const auto stats = nlohmann::json::parse(slurp(path("data/stats.json")));
  EXPECT_EQ(stats["users"].get<int>(), 120);
  EXPECT_EQ(stats["train_ratings"].get<int>() + stats["test_ratings"].get<int>(), stats["ratings"].get<int>());
}

TEST_F(CliPipeline, RerankIsDeterministic) {
  ASSERT_EQ(run(rerank_args("supplier", "a.tsv")).code, 0);
  ASSERT_EQ(run(rerank_args("supplier", "b.tsv")).code, 0);
  EXPECT_EQ(slurp(path("a.tsv")), slurp(path("b.tsv")));
  EXPECT_TRUE(fs::exists(path("a.tsv.stats.json")));
  const auto stats = nlohmann::json::parse(slurp(path("a.tsv.stats.json")));
  ASSERT_TRUE(stats.is_array());
  EXPECT_FALSE(stats.empty());
}

TEST_F(CliPipeline, NoneVariantEqualsTruncation) {
  ASSERT_EQ(run(rerank_args("none", "none.tsv")).code, 0);
  const auto long_lists = fairflow::import_ranked_batch(path("long.tsv"), 20);
  const auto final_lists = fairflow::import_ranked_batch(path("none.tsv"), 5);
  EXPECT_EQ(final_lists, fairflow::truncate(long_lists, 5));
}

TEST_F(CliPipeline, EvaluateWritesCsvAndJson) {
  ASSERT_EQ(run(rerank_args("item", "item.tsv")).code, 0);
  ASSERT_EQ(run(rerank_args("none", "base.tsv")).code, 0);
  auto args = eval_args("item.tsv", "report");
  args.insert(args.end(), {"--groups", "--long", path("long.tsv"), "--t", "20", "--mcnemar", path("base.tsv")});
  const auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = lines_of(slurp(path("report.csv")));
  ASSERT_EQ(csv.size(), 2u);
  EXPECT_EQ(csv[0], "P,1-IA,5-IA,LT,1-SA,5-SA,IG,IE,SG,SE");
  const auto j = nlohmann::json::parse(slurp(path("report.json")));
  EXPECT_TRUE(j.contains("mcnemar"));
  EXPECT_TRUE(j["sg"].is_number());
  EXPECT_EQ(lines_of(slurp(path("report.groups.csv"))).size(), 11u);
}

TEST_F(CliPipeline, EvaluateWithoutSuppliersLeavesSupplierMetricsEmpty) {
  ASSERT_EQ(run(rerank_args("none", "base2.tsv")).code, 0);
  const auto r = run({"evaluate", "--input", path("base2.tsv"), "--train", path("data/train.tsv"), "--test",
                      path("data/test.tsv"), "--n", "5", "--out", path("bare")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(path("bare.json")));
  EXPECT_TRUE(j["sg"].is_null());
  EXPECT_TRUE(j["se"].is_null());
}

TEST_F(CliPipeline, SweepWritesOneRowPerCellPlusBase) {
  const auto r = run({"sweep", "--input", path("long.tsv"), "--train", path("data/train.tsv"), "--test",
                      path("data/test.tsv"), "--suppliers", path("data/suppliers.tsv"), "--t", "20", "--n", "5",
                      "--lambda", "0,0.5,1", "--beta", "0.6,1", "--variant", "item,supplier,reverse", "--out",
                      path("sweep.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines_of(slurp(path("sweep.csv")));
  ASSERT_EQ(rows.size(), 1u + 1u + 3u * 3u * 2u);
  EXPECT_EQ(rows[0], "variant,lambda,beta,seed,P,1-IA,5-IA,LT,1-SA,5-SA,IG,IE,SG,SE,error");
  EXPECT_EQ(rows[1].rfind("base,", 0), 0u);
}

TEST_F(CliPipeline, ConfigFillsMissingFlagsAndCommandLineWins) {
  std::ofstream(path("run.conf")) << "# rerank settings\nvariant = reverse\nn = 4\nt = 20\n";
  auto args = std::vector<std::string>{"rerank", "--input", path("long.tsv"), "--n", "5", "--config",
                                       path("run.conf"), "--out", path("conf.tsv")};
  ASSERT_EQ(run(args).code, 0);
  const auto got = fairflow::import_ranked_batch(path("conf.tsv"), 5);
  const auto want = fairflow::reverse_rerank(fairflow::import_ranked_batch(path("long.tsv"), 20), 5);
  EXPECT_EQ(got, want);
}

TEST_F(CliPipeline, ExitCodes) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"rerank", "--bogus"}).code, 1);
  EXPECT_EQ(run({"rerank", "--input", path("long.tsv"), "--variant", "supplier", "--t", "20", "--n", "5", "--out",
                 path("x.tsv")}).code, 1);
  EXPECT_EQ(run({"rerank", "--input", path("long.tsv"), "--t", "20", "--n", "30", "--out", path("x.tsv")}).code, 1);
  EXPECT_EQ(run({"rerank", "--input", path("missing.tsv"), "--t", "20", "--n", "5", "--out", path("x.tsv")}).code,
            2);
  EXPECT_EQ(run({"rerank", "--config", path("missing.conf")}).code, 1);
  std::ofstream(path("garbage.tsv")) << "u1\ta\tnot-a-number\n";
  EXPECT_EQ(run({"ingest", "--ratings", path("garbage.tsv"), "--out", path("g")}).code, 2);
}

TEST_F(CliPipeline, BinaryReportsExitCodes) {
  const char* bin = std::getenv("FAIRFLOW_CLI");
  if (!bin) GTEST_SKIP() << "FAIRFLOW_CLI not set";
  const auto quiet = " >/dev/null 2>&1";
  auto status = [](int raw) { return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1; };
  EXPECT_EQ(status(std::system((std::string(bin) + " --help" + quiet).c_str())), 0);
  EXPECT_EQ(status(std::system((std::string(bin) + quiet).c_str())), 1);
  EXPECT_EQ(status(std::system((std::string(bin) + " evaluate --input " + path("nope.tsv") + " --out " +
                                path("r") + quiet).c_str())),
            2);
}

}  // namespace
