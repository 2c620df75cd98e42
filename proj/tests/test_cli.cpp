#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>

#include "nlmilp/json_util.hpp"
#include "nlmilp/state.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
namespace ju = nlmilp::json_util;

namespace {

const fs::path kData = NLMILP_DATA_DIR;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result cli(const std::string& args) {
  fs::path err = fs::temp_directory_path() / "nlmilp_cli_stderr.txt";
  std::string cmd = std::string(NLMILP_CLI) + " " + args + " 2>" + err.string();
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
  int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = fs::exists(err) ? ju::read_text(err) : "";
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("nlmilp_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    ju::write_file(dir / "config.json",
                   {{"backend", {{"kind", "scripted"}, {"transcript", (kData / "transcripts" / "suite_clean.json").string()}}}});
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string config() const { return (dir / "config.json").string(); }
  fs::path dir;
};

}  // namespace

TEST_F(Cli, RunPrintsOutcomeAndState) {
  auto r = cli("run " + (kData / "instances" / "factory.json").string() + " --config " + config() + " --state " +
               (dir / "s.json").string());
  ASSERT_EQ(r.code, 0) << r.err;
  json out = json::parse(r.out);
  EXPECT_EQ(out["status"], "Optimal");
  EXPECT_NEAR(out["objective"].get<double>(), 2000, 1e-6);
  EXPECT_EQ(out["score"]["solved"], true);
  EXPECT_NO_THROW(nlmilp::load_state(dir / "s.json"));
}

TEST_F(Cli, StageOutOfOrderExitsTwo) {
  std::string p = (dir / "proj").string();
  ASSERT_EQ(cli("init " + p + " --instance " + (kData / "instances" / "factory.json").string() + " --config " + config()).code, 0);
  auto r = cli("stage " + p + " Formulate");
  EXPECT_EQ(r.code, 2);
  json err = json::parse(r.err);
  EXPECT_EQ(err["error"], "StagePrecondition");
  auto ok = cli("stage " + p + " ExtractParams");
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(json::parse(ok.out)["cursor"], "ExtractClauses");
}

TEST_F(Cli, ErrorsAreJsonOnStderr) {
  ju::write_text(dir / "bad.lp", "Minimize\n obj: x +\nEnd\n");
  auto r = cli("lp check " + (dir / "bad.lp").string());
  EXPECT_EQ(r.code, 1);
  json err = json::parse(r.err);
  EXPECT_EQ(err["error"], "LpSyntaxError");
  EXPECT_TRUE(err.contains("message"));
}

TEST_F(Cli, EquivSelfIsIdentity) {
  std::string f = (kData / "reference" / "facility.lp").string();
  auto r = cli("equiv " + f + " " + f);
  ASSERT_EQ(r.code, 0) << r.err;
  json out = json::parse(r.out);
  EXPECT_EQ(out["equivalent"], true);
  auto diff = cli("equiv " + f + " " + (kData / "reference" / "factory.lp").string());
  EXPECT_EQ(diff.code, 1);
}

TEST_F(Cli, SiftPrintsHistoryCsv) {
  auto r = cli("sift rows " + (kData / "models" / "scuc_like.lp").string() + " --seed 1");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')).find("iteration"), 0u) << r.out.substr(0, 80);
  json summary = json::parse(r.err);
  EXPECT_EQ(summary["status"], "Optimal");
}

TEST_F(Cli, LpWriteIsCanonical) {
  std::string golden = std::string(NLMILP_TEST_DIR) + "/golden/crew_annotated.lp";
  auto r = cli("lp write " + golden);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, ju::read_text(golden));
}

TEST_F(Cli, EvalAblation) {
  std::string base = "eval --suite " + (kData / "instances").string() + " --transcript " +
                     (kData / "transcripts" / "suite_fault.json").string();
  auto full = cli(base);
  ASSERT_EQ(full.code, 0) << full.err;
  EXPECT_EQ(json::parse(full.out)["solved"], 3);
  auto ablated = cli(base + " --ablate disable_debug --csv " + (dir / "r.csv").string());
  ASSERT_EQ(ablated.code, 0) << ablated.err;
  json rep = json::parse(ablated.out);
  EXPECT_EQ(rep["solved"], 2);
  EXPECT_TRUE(fs::exists(dir / "r.csv"));
  auto bad = cli(base + " --ablate disable_all");
  EXPECT_EQ(bad.code, 1);
}
