#include <gtest/gtest.h>

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <map>
#include <cstdio>
#include <filesystem>
#include <thread>

#include "nlmilp/json_util.hpp"
#include "nlmilp/service.hpp"
#include "nlmilp/state.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
namespace ju = nlmilp::json_util;

namespace {

const fs::path kData = NLMILP_DATA_DIR;
const std::vector<std::string> kStages = {"ExtractParams", "ExtractClauses", "Formulate", "Code", "Assemble",
                                          "SolveDebug"};

json scripted() {
  return {{"backend", {{"kind", "scripted"}, {"transcript", (kData / "transcripts" / "suite_clean.json").string()}}}};
}

class ServiceTest : public ::testing::Test {
 protected:
  void start(std::optional<std::string> token = std::nullopt) {
    root = fs::temp_directory_path() /
           ("nlmilp_service_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root);
    nlmilp::service::ServiceConfig c;
    c.port = 0;
    c.root = root;
    c.token = token;
    c.run_config = scripted();
    c.base = kData;
    service = std::make_unique<nlmilp::service::Service>(c);
    port = service->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
    if (token) client->set_bearer_token_auth(*token);
  }
  void TearDown() override {
    if (service) service->stop();
    fs::remove_all(root);
  }

  json post(const std::string& path, const json& body, int expect) {
    auto r = client->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(r);
    if (!r) return nullptr;
    EXPECT_EQ(r->status, expect) << path << " " << r->body;
    return r->body.empty() ? json(nullptr) : json::parse(r->body);
  }
  json get(const std::string& path, int expect = 200) {
    auto r = client->Get(path);
    EXPECT_TRUE(r);
    if (!r) return nullptr;
    EXPECT_EQ(r->status, expect) << path << " " << r->body;
    return json::parse(r->body);
  }

  std::string create(const std::string& instance, const json& config = json::object()) {
    json in = ju::read_file(kData / "instances" / (instance + ".json"));
    json body = {{"description", in["description"]}, {"data", in["data"]}};
    if (!config.empty()) body["config"] = config;
    return post("/projects", body, 201)["id"];
  }

  // Queues a stage and polls the run until it leaves queued/running.
  json run_stage(const std::string& id, const std::string& stage) {
    json q = post("/projects/" + id + "/stages/" + stage + "/run", json::object(), 202);
    std::string rid = q["run"];
    EXPECT_EQ(q["status"], "queued");
    for (int i = 0; i < 600; ++i) {
      json r = get("/runs/" + rid);
      if (r["status"] != "queued" && r["status"] != "running") return r;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    ADD_FAILURE() << "run " << rid << " did not finish";
    return nullptr;
  }

  std::size_t event_count(const std::string& id) {
    auto r = client->Get("/projects/" + id + "/events?from=0");
    std::string body = r ? r->body : "";
    return static_cast<std::size_t>(std::count(body.begin(), body.end(), '\n'));
  }

  fs::path root;
  std::unique_ptr<nlmilp::service::Service> service;
  std::unique_ptr<httplib::Client> client;
  int port = 0;
};

}  // namespace

TEST_F(ServiceTest, FullLifecycleMatchesCli) {
  start();
  std::string id = create("factory");
  std::size_t events = event_count(id);
  for (const auto& stage : kStages) {
    json r = run_stage(id, stage);
    EXPECT_EQ(r["status"], "done") << stage << " " << r.dump();
    std::size_t now = event_count(id);
    EXPECT_GT(now, events) << stage;
    events = now;
  }
  json s = get("/projects/" + id + "/state");
  EXPECT_EQ(s["cursor"], "Done");
  EXPECT_EQ(s["outcome"]["status"], "Optimal");
  EXPECT_NEAR(s["outcome"]["objective"].get<double>(), 2000, 1e-6);

  // Same final state as the CLI on the same transcript.
  fs::path cfg = root / "cli_config.json", out = root / "cli_state.json";
  ju::write_file(cfg, scripted());
  std::string cmd = std::string(NLMILP_CLI) + " run " + (kData / "instances" / "factory.json").string() +
                    " --config " + cfg.string() + " --state " + out.string() + " >/dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(nlmilp::state_from_json(s["state"]), nlmilp::load_state(out));

  // Artifacts carry content-hash names.
  for (std::string kind : {"lp", "report", "log"}) {
    auto r = client->Get("/projects/" + id + "/artifacts/" + kind);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200) << kind;
    std::string name = r->get_header_value("X-Artifact-Name");
    EXPECT_EQ(name.rfind(kind + "-", 0), 0u) << name;
    EXPECT_EQ(name.size(), kind.size() + 1 + 16 + (kind == "lp" ? 3 : kind == "report" ? 5 : 6)) << name;
  }
  auto lp = client->Get("/projects/" + id + "/artifacts/lp");
  EXPECT_NE(lp->body.find("Maximize"), std::string::npos);

  // Events are an ndjson tail.
  auto tail = client->Get("/projects/" + id + "/events?from=" + std::to_string(events - 1));
  ASSERT_TRUE(tail);
  EXPECT_EQ(std::count(tail->body.begin(), tail->body.end(), '\n'), 1);
  EXPECT_NO_THROW(json::parse(tail->body.substr(0, tail->body.find('\n'))));
  EXPECT_EQ(get("/projects/" + id + "/notifications").type(), json::value_t::array);
}

TEST_F(ServiceTest, ErrorStatuses) {
  start();
  get("/projects/nope/state", 404);
  get("/runs/r99", 404);
  post("/projects", {{"text", "x"}}, 422);
  post("/projects", json::array(), 422);
  auto bad = client->Post("/projects", "{not json", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 422);

  std::string id = create("factory");
  post("/projects/" + id + "/stages/Formulate/run", json::object(), 409);
  post("/projects/" + id + "/stages/Nonsense/run", json::object(), 422);
  EXPECT_EQ(run_stage(id, "ExtractParams")["status"], "done");
  json again = post("/projects/" + id + "/stages/ExtractParams/run", json::object(), 409);
  EXPECT_EQ(again["error"], "StagePrecondition");
  get("/projects/" + id + "/artifacts/report", 404);
  get("/projects/" + id + "/artifacts/binary", 404);
  get("/projects/" + id + "/events?from=x", 422);
  post("/reviews/" + id + "~Formulate:c9", {{"action", "keep"}}, 404);
  post("/reviews/" + id + "~x", {{"action", "explode"}}, 422);
  auto patch = client->Patch("/projects/" + id + "/items/zzz", "{}", "application/json");
  ASSERT_TRUE(patch);
  EXPECT_EQ(patch->status, 404);
}

TEST_F(ServiceTest, TokenRequired) {
  start("s3cret");
  std::string id = create("factory");
  httplib::Client anon("127.0.0.1", port);
  auto r = anon.Get("/projects/" + id + "/state");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 401);
  httplib::Client wrong("127.0.0.1", port);
  wrong.set_bearer_token_auth("nope");
  EXPECT_EQ(wrong.Get("/projects/" + id + "/state")->status, 401);
  get("/projects/" + id + "/state");
}

TEST_F(ServiceTest, ReviewModifyRewindsCodedClause) {
  start();
  fs::create_directories(root);
  fs::path low = root / "low_confidence.json";
  ju::write_file(low, {{"formulate_clause:c2", {{"formulation", "sum_{j in K} Hours_j x_j <= MaxHours"}, {"confidence", 3}}}});
  json files = {(kData / "answers" / "defaults.json").string(), (kData / "answers" / "factory.json").string(),
                low.string()};
  json config = {{"backend", {{"kind", "answers"}, {"answers", files}}},
                 {"escalation", {{"threshold", 4}, {"route", "User"}}}};
  std::string id = create("factory", config);
  for (std::string stage : {"ExtractParams", "ExtractClauses", "Formulate", "Code"}) {
    EXPECT_EQ(run_stage(id, stage)["status"], "done") << stage;
  }
  json reviews = get("/projects/" + id + "/reviews");
  ASSERT_EQ(reviews.size(), 1u) << reviews.dump();
  EXPECT_EQ(reviews[0]["target"], "c2");
  EXPECT_EQ(reviews[0]["confidence"], 3);
  std::string rid = reviews[0]["review"];

  json before = get("/projects/" + id + "/state");
  EXPECT_EQ(before["cursor"], "Assemble");
  post("/reviews/" + rid, {{"action", "modify"}, {"payload", {{"colour", "red"}}}}, 422);
  json after = post("/reviews/" + rid,
                    {{"action", "modify"}, {"payload", {{"formulation", "total hours sum_{j in K} Hours_j x_j <= MaxHours"}}}},
                    200);
  EXPECT_EQ(after["pending_reviews"], 0);
  EXPECT_EQ(after["cursor"], "Code");
  bool found = false;
  for (const auto& c : after["state"]["clauses"]) {
    if (c["id"] == "c2") {
      found = true;
      EXPECT_EQ(c["status"], "formulated");
    }
  }
  EXPECT_TRUE(found);
  EXPECT_EQ(get("/projects/" + id + "/reviews").size(), 0u);
  for (std::string stage : {"Code", "Assemble", "SolveDebug"}) EXPECT_EQ(run_stage(id, stage)["status"], "done");
  EXPECT_EQ(get("/projects/" + id + "/state")["outcome"]["status"], "Optimal");
}

TEST_F(ServiceTest, PatchItem) {
  start();
  std::string id = create("factory");
  for (std::string stage : {"ExtractParams", "ExtractClauses", "Formulate", "Code"}) run_stage(id, stage);
  auto r = client->Patch("/projects/" + id + "/items/c2", json{{"formulation", "hours within budget"}}.dump(),
                         "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200) << r->body;
  json s = json::parse(r->body);
  EXPECT_EQ(s["cursor"], "Code");
  auto bad = client->Patch("/projects/" + id + "/items/c2", json{{"colour", "red"}}.dump(), "application/json");
  EXPECT_EQ(bad->status, 422);
}

TEST_F(ServiceTest, DataGenerateAndUpload) {
  start();
  json in = ju::read_file(kData / "instances" / "factory.json");
  std::string id = post("/projects", {{"description", in["description"]}}, 201)["id"];
  get("/projects/" + id + "/data", 409);
  EXPECT_EQ(run_stage(id, "ExtractParams")["status"], "done");

  json schema = get("/projects/" + id + "/data");
  ASSERT_EQ(schema.size(), 4u);
  for (const auto& e : schema) EXPECT_TRUE(e.contains("shape") && e.contains("resolved")) << e.dump();

  std::size_t events = event_count(id);
  json gen = post("/projects/" + id + "/data/generate",
                  {{"seed", 7}, {"overwrite", true}, {"ranges", {{"MaxHours", {{"lower", 50}, {"upper", 60}}}}}}, 200);
  EXPECT_GT(event_count(id), events);
  std::map<std::string, json> by;
  for (const auto& e : gen) by[e["symbol"]] = e["value"];
  double k = by["K"].get<double>();
  EXPECT_TRUE(k >= 1 && k <= 10 && k == std::floor(k));
  ASSERT_EQ(by["Hours"].size(), static_cast<std::size_t>(k));
  for (const auto& v : by["Profit"]) EXPECT_TRUE(v.get<double>() >= 1 && v.get<double>() <= 10);
  EXPECT_GE(by["MaxHours"].get<double>(), 50);
  EXPECT_LE(by["MaxHours"].get<double>(), 60);
  // Existing data is kept unless overwrite is set.
  EXPECT_EQ(post("/projects/" + id + "/data/generate", {{"seed", 8}}, 200), gen);

  auto r = client->Put("/projects/" + id + "/data", json({{"data", {{"Nope", 1}}}}).dump(), "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 404);
  r = client->Put("/projects/" + id + "/data", json({{"data", {{"K", 3}, {"Hours", {1, 2}}}}}).dump(),
                  "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 422) << r->body;
  post("/projects/" + id + "/data/generate", {{"ranges", {{"K", {{"lower", 5}, {"upper", 4}}}}}}, 422);
  post("/projects/" + id + "/data/generate", {{"ranges", {{"Zz", json::object()}}}}, 404);

  // Upload the instance's own data; the run then solves to its optimum.
  r = client->Put("/projects/" + id + "/data", json({{"data", in["data"]}}).dump(), "application/json");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200) << r->body;
  for (std::size_t i = 1; i < kStages.size(); ++i) EXPECT_EQ(run_stage(id, kStages[i])["status"], "done");
  json s = get("/projects/" + id + "/state");
  EXPECT_NEAR(s["outcome"]["objective"].get<double>(), 2000, 1e-6);

  // New data after solving sends the run back to Assemble.
  r = client->Put("/projects/" + id + "/data", json({{"data", {{"MaxHours", 50}}}}).dump(), "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(get("/projects/" + id + "/state")["cursor"], "Assemble");
  EXPECT_EQ(run_stage(id, "Assemble")["status"], "done");
  EXPECT_EQ(run_stage(id, "SolveDebug")["status"], "done");
  EXPECT_NEAR(get("/projects/" + id + "/state")["outcome"]["objective"].get<double>(), 1000, 1e-6);
}
