#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "nlmilp/error.hpp"
#include "nlmilp/eval.hpp"
#include "nlmilp/json_util.hpp"

using namespace nlmilp;
using namespace nlmilp::eval;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kData = NLMILP_DATA_DIR;

Instance factory() { return load_instance(kData / "instances" / "factory.json"); }

pipeline::SolveOutcome optimal(double obj, std::map<std::string, double> primal) {
  return {SolveStatus::kOptimal, obj, std::move(primal), ""};
}

pipeline::RunConfig scripted(const std::string& transcript) {
  pipeline::RunConfig c;
  c.backend.kind = llm::BackendSpec::Kind::kScripted;
  c.backend.transcript = (kData / "transcripts" / transcript).string();
  return c;
}

}  // namespace

TEST(Instances, SchemaViolationNamesPath) {
  try {
    instance_from_json(json{{"id", "a"}, {"description", "d"}, {"truth", {{"objective", "ten"}}}}, "x.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaViolation);
    EXPECT_NE(std::string(e.what()).find("objective"), std::string::npos) << e.what();
  }
  EXPECT_THROW(instance_from_json(json{{"id", "a"}, {"truth", json::object()}}), Error);
  EXPECT_THROW(instance_from_json(json::array()), Error);
  EXPECT_EQ(load_suite(kData / "instances").size(), 3u);
}

TEST(Score, ReferencePointChecks) {
  Instance in = factory();
  ScoreRecord r = score(optimal(2000, {{"x(0)", 0}, {"x(1)", 100}, {"x(2)", 0}}), in, {});
  EXPECT_TRUE(r.solved);
  EXPECT_TRUE(r.solution_correct);
  EXPECT_EQ(r.failure_stage, "None");

  // Right value, but the point only earns 1500.
  ScoreRecord wrong = score(optimal(2000, {{"x(0)", 50}, {"x(1)", 0}, {"x(2)", 0}}), in, {});
  EXPECT_TRUE(wrong.value_correct);
  EXPECT_FALSE(wrong.solution_correct);
  EXPECT_FALSE(wrong.solved);

  // Infeasible point.
  ScoreRecord infeasible = score(optimal(2000, {{"x(0)", 0}, {"x(1)", 101}, {"x(2)", 0}}), in, {});
  EXPECT_FALSE(infeasible.solution_correct);
}

TEST(Score, TiedOptimaBothAccepted) {
  auto dir = fs::temp_directory_path() / "nlmilp_eval_tie";
  fs::create_directories(dir);
  json_util::write_text(dir / "tie.lp", "Maximize\n obj: x + y\nSubject To\n c: x + y <= 4\nEnd\n");
  json j = {{"id", "tie"}, {"description", "d"}, {"truth", {{"objective", 4}, {"reference_lp", "tie.lp"}}}};
  json_util::write_file(dir / "tie.json", j);
  Instance in = load_instance(dir / "tie.json");
  EXPECT_TRUE(score(optimal(4, {{"x", 4}, {"y", 0}}), in, {}).solved);
  EXPECT_TRUE(score(optimal(4, {{"x", 1.5}, {"y", 2.5}}), in, {}).solved);
  EXPECT_FALSE(score(optimal(4, {{"x", 4}}), in, {}).solution_correct);  // column missing
  fs::remove_all(dir);
}

TEST(Score, ExpectedInfeasibleAndErrors) {
  Instance in = factory();
  in.truth = Truth{"infeasible", std::nullopt, {}, std::nullopt};
  pipeline::SolveOutcome o;
  o.status = SolveStatus::kInfeasible;
  EXPECT_TRUE(score(o, in, {}).solved);
  o.status = SolveStatus::kError;
  ScoreRecord r = score(o, in, {});
  EXPECT_FALSE(r.ran);
  EXPECT_FALSE(r.solved);
}

TEST(Suite, EmptyHasUndefinedAccuracy) {
  SuiteReport rep = run_suite({}, scripted("suite_clean.json"), {}, kData);
  EXPECT_EQ(rep.total, 0);
  EXPECT_FALSE(rep.accuracy);
  EXPECT_EQ(report_to_json(rep)["accuracy"], "undefined");
  EXPECT_EQ(report_csv(rep), "id,ran,value_correct,solution_correct,solved,failure_stage,status,objective,seconds\n");
}

TEST(Suite, UnknownAblationRejected) {
  Ablation a;
  EXPECT_THROW(set_ablation(a, "disable_everything"), Error);
  set_ablation(a, "disable_debug");
  EXPECT_TRUE(a.disable_debug);
  EXPECT_FALSE(apply_ablation({}, a).debug);
}

TEST(Suite, DebugAblationOnFaultFixture) {
  auto suite = load_suite(kData / "instances");
  SuiteReport full = run_suite(suite, scripted("suite_fault.json"), {}, kData, 2);
  EXPECT_EQ(full.solved, 3);
  ASSERT_TRUE(full.accuracy);
  EXPECT_DOUBLE_EQ(*full.accuracy, 1.0);

  Ablation a;
  set_ablation(a, "disable_debug");
  SuiteReport ablated = run_suite(suite, scripted("suite_fault.json"), a, kData, 2);
  EXPECT_EQ(ablated.solved, 2);
  for (const auto& r : ablated.records) {
    if (r.id == "factory") {
      EXPECT_FALSE(r.solved);
      EXPECT_EQ(r.failure_stage, "Coding");
    } else {
      EXPECT_TRUE(r.solved) << r.id;
    }
  }
  std::string csv = report_csv(ablated);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_NE(csv.find("factory,0,0,0,0,Coding"), std::string::npos) << csv;
}

TEST(Suite, CleanTranscriptSolvesAll) {
  SuiteReport rep = run_suite(load_suite(kData / "instances"), scripted("suite_clean.json"), {}, kData);
  EXPECT_EQ(rep.solved, 3);
}

TEST(Transcripts, RegenerationMatchesCommitted) {
  fs::path out = fs::temp_directory_path() / "nlmilp_transcripts";
  fs::remove_all(out);
  std::string cmd = "sh " NLMILP_ROOT "/tools/build_transcripts.sh " NLMILP_CLI " " + out.string();
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  for (std::string f : {"suite_clean.json", "suite_fault.json", "unfixable.json"}) {
    EXPECT_EQ(json_util::read_file(out / f), json_util::read_file(kData / "transcripts" / f)) << f;
  }
  fs::remove_all(out);
}
