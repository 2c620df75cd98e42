#include <gtest/gtest.h>

#include <filesystem>

#include "nlmilp/error.hpp"
#include "nlmilp/json_util.hpp"
#include "nlmilp/llm.hpp"

using namespace nlmilp;
using namespace nlmilp::llm;
using nlohmann::json;

namespace {

PromptTemplate tmpl(std::string body, std::vector<std::string> required = {}) {
  return {"t", "Test", std::move(body), std::move(required)};
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST(Templates, RenderAndPlaceholders) {
  auto t = tmpl("Given {a} and {b}, return {\"x\": 1} for {a}.", {"a"});
  EXPECT_EQ(placeholders_of(t.body), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(render(t, {{"a", "A"}, {"b", "B"}}), "Given A and B, return {\"x\": 1} for A.");
  EXPECT_EQ(render(t, {{"a", "A"}}), "Given A and , return {\"x\": 1} for A.");
  EXPECT_EQ(code_of([&] { render(t, {{"b", "B"}}); }), ErrorCode::kMissingPlaceholder);
}

TEST(Templates, DefaultsCoverPipelinePrompts) {
  const auto& reg = default_templates();
  for (std::string name : {"review_item", "detect_structure", "classify_problem", "debug_model"}) EXPECT_TRUE(reg.contains(name)) << name;
  EXPECT_EQ(code_of([&] { reg.get("no_such_template"); }), ErrorCode::kInvalidArgument);
}

TEST(Fingerprint, StableAndBindingSensitive) {
  std::string a = fingerprint("t", {{"x", "1"}, {"y", "2"}});
  EXPECT_EQ(a, fingerprint("t", {{"y", "2"}, {"x", "1"}}));
  EXPECT_NE(a, fingerprint("t", {{"x", "1"}, {"y", "3"}}));
  EXPECT_NE(a, fingerprint("u", {{"x", "1"}, {"y", "2"}}));
  EXPECT_EQ(a.rfind("t/", 0), 0u);
  EXPECT_EQ(hash_hex("").size(), 16u);
  // FNV-1a 64 offset basis.
  EXPECT_EQ(hash_hex(""), "cbf29ce484222325");
  EXPECT_EQ(hash_hex("a"), "af63dc4c8601ec8c");
}

TEST(Payload, FencedBareAndBroken) {
  EXPECT_EQ(extract_payload("sure:\n```json\n{\"a\": 1}\n```\nbye"), json({{"a", 1}}));
  EXPECT_EQ(extract_payload("{\"a\": [1, 2]}"), json({{"a", {1, 2}}}));
  EXPECT_EQ(code_of([] { extract_payload("no json here"); }), ErrorCode::kUnparseable);
  EXPECT_EQ(code_of([] { extract_payload("```json\n{\"a\": \n```"); }), ErrorCode::kUnparseable);
}

TEST(Complete, RepairReaskUsesNextListEntry) {
  AnswerBackend b(json{{"t:*", {"garbage", json{{"ok", true}, {"confidence", 5}}}}});
  Prompt p = make_prompt(tmpl("ask"), {}, "s");
  auto r = complete(b, p);
  EXPECT_EQ(r.retry_count, 1);
  EXPECT_EQ(r.payload["ok"], true);
  EXPECT_EQ(confidence_of(r), 5);
  EXPECT_EQ(r.attempts.size(), 2u);
  EXPECT_EQ(b.recorded().size(), 2u);
  EXPECT_TRUE(b.recorded().count(p.fingerprint + "#repair1"));
}

TEST(Complete, ValidatorFailureTriggersRepair) {
  AnswerBackend b(json{{"t:s", {json{{"v", 0}}, json{{"v", 2}}}}});
  auto r = complete(b, make_prompt(tmpl("ask"), {}, "s"), [](const json& j) {
    if (j.value("v", 0) < 1) throw Error(ErrorCode::kInvalidPayload, "v must be positive");
  });
  EXPECT_EQ(r.payload["v"], 2);
  EXPECT_EQ(r.retry_count, 1);
}

TEST(Complete, UnparseableAfterRetriesCarriesAttempts) {
  AnswerBackend b(json{{"t:*", "never json"}});
  try {
    complete(b, make_prompt(tmpl("ask"), {}), {}, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnparseable);
    EXPECT_NE(std::string(e.what()).find("attempt 3"), std::string::npos);
  }
}

TEST(Confidence, MissingOrOutOfRangeIsOne) {
  LlmResponse r;
  r.payload = json::object();
  EXPECT_EQ(confidence_of(r), 1);
  r.confidence = 9;
  EXPECT_EQ(confidence_of(r), 1);
  r.confidence = 0;
  EXPECT_EQ(confidence_of(r), 1);
  r.confidence = 3;
  EXPECT_EQ(confidence_of(r), 3);
}

TEST(Scripted, MissIsRecorded) {
  Prompt p = make_prompt(tmpl("hello {x}"), {{"x", "1"}});
  ScriptedBackend b({{p.fingerprint, "```json\n{}\n```"}});
  EXPECT_EQ(complete(b, p).payload, json::object());
  Prompt q = make_prompt(tmpl("hello {x}"), {{"x", "2"}});
  EXPECT_EQ(code_of([&] { b.complete(q); }), ErrorCode::kTranscriptMiss);
  ASSERT_EQ(b.misses().size(), 1u);
  EXPECT_EQ(b.misses()[0].fingerprint, q.fingerprint);
  EXPECT_EQ(b.calls(), 2u);
}

TEST(Answers, SubjectBeatsWildcardAndMergeIsLastWins) {
  auto dir = std::filesystem::temp_directory_path() / "nlmilp_answers_test";
  std::filesystem::create_directories(dir);
  json_util::write_file(dir / "a.json", {{"t:*", "\"a\""}, {"t:s", "\"as\""}});
  json_util::write_file(dir / "b.json", {{"t:s", "\"bs\""}});
  json merged = merge_answer_files({dir / "a.json", dir / "b.json"});
  AnswerBackend b(merged);
  EXPECT_EQ(b.complete(make_prompt(tmpl("q"), {}, "s")), "\"bs\"");
  EXPECT_EQ(b.complete(make_prompt(tmpl("q"), {}, "other")), "\"a\"");
  std::filesystem::remove_all(dir);
}
