#include "nlmilp/service.hpp"

#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "nlmilp/error.hpp"
#include "nlmilp/json_util.hpp"
#include "nlmilp/project.hpp"

namespace nlmilp::service {

namespace fs = std::filesystem;
namespace ju = json_util;

ServiceConfig config_from_json(const json& j, const fs::path& base) {
  ju::expect_object(j, "service", {"host", "port", "token", "root", "run_config", "workers"});
  ServiceConfig c;
  c.base = base;
  c.host = ju::get_string_or(j, "host", "service", c.host);
  if (j.contains("port")) c.port = static_cast<int>(ju::get_int(j, "port", "service"));
  if (j.contains("token")) c.token = ju::get_string(j, "token", "service");
  if (j.contains("root")) {
    c.root = ju::get_string(j, "root", "service");
    if (c.root.is_relative()) c.root = base / c.root;
  }
  if (j.contains("run_config")) {
    c.run_config = j["run_config"];
    pipeline::run_config_from_json(c.run_config, "service/run_config");
  }
  if (j.contains("workers")) c.workers = static_cast<int>(ju::get_int(j, "workers", "service"));
  return c;
}

ServiceConfig load_config(const std::optional<fs::path>& file) {
  ServiceConfig c;
  c.base = fs::current_path();
  if (file) c = config_from_json(ju::read_file(*file), fs::absolute(*file).parent_path());
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
  if (auto v = env("NLMILP_HOST")) c.host = *v;
  if (auto v = env("NLMILP_PORT")) c.port = std::atoi(v->c_str());
  if (auto v = env("NLMILP_TOKEN")) c.token = *v;
  if (auto v = env("NLMILP_ROOT")) c.root = *v;
  if (auto v = env("NLMILP_TRANSCRIPT")) c.run_config["backend"] = {{"kind", "scripted"}, {"transcript", fs::absolute(*v).string()}};
  if (auto v = env("NLMILP_ENGINE")) c.run_config["solver"]["engine"] = *v;
  pipeline::run_config_from_json(c.run_config, "service/run_config");
  return c;
}

namespace {

struct HttpError {
  int status;
  std::string code;
  std::string message;
};

int status_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kUnknownTarget:
    case ErrorCode::kUnknownClause:
    case ErrorCode::kUnknownSymbol:
      return 404;
    case ErrorCode::kStagePrecondition:
    case ErrorCode::kBusy:
      return 409;
    case ErrorCode::kInvalidPayload:
    case ErrorCode::kSchemaViolation:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidShape:
    case ErrorCode::kShapeMismatch:
    case ErrorCode::kDuplicateSymbol:
    case ErrorCode::kParseError:
      return 422;
    default:
      return 500;
  }
}

struct RunRecord {
  std::string id;
  std::string project;
  std::string stage;
  std::string status = "queued";  // queued | running | done | failed
  json error = nullptr;
};

json run_record_json(const RunRecord& r) {
  return {{"id", r.id}, {"project", r.project}, {"stage", r.stage}, {"status", r.status}, {"error", r.error}};
}

}  // namespace

struct Service::Impl {
  ServiceConfig config;
  httplib::Server server;
  std::thread listener;

  std::mutex mutex;  // guards everything below
  std::map<std::string, std::unique_ptr<std::mutex>> project_locks;
  std::set<std::string> busy;
  std::map<std::string, RunRecord> runs;
  std::vector<std::thread> workers;
  int next_run = 1;

  explicit Impl(ServiceConfig c) : config(std::move(c)) {
    fs::create_directories(config.root);
    routes();
  }

  fs::path dir_of(const std::string& id) const { return config.root / id; }

  std::mutex& lock_of(const std::string& id) {
    std::lock_guard g(mutex);
    auto& m = project_locks[id];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
  }

  void require_project(const std::string& id) {
    if (id.find_first_of("/\\.") != std::string::npos || !project::exists(dir_of(id))) {
      throw HttpError{404, "UnknownTarget", "no project '" + id + "'"};
    }
  }

  void require_idle(const std::string& id) {
    std::lock_guard g(mutex);
    if (busy.count(id)) throw HttpError{409, "Busy", "a run is in progress for project '" + id + "'"};
  }

  static json body_of(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
      json j = json::parse(req.body);
      if (!j.is_object()) throw HttpError{422, "SchemaViolation", "body must be a JSON object"};
      return j;
    } catch (const json::parse_error& e) {
      throw HttpError{422, "SchemaViolation", std::string("body is not JSON: ") + e.what()};
    }
  }

  static void send(httplib::Response& res, int status, const json& j) {
    res.status = status;
    res.set_content(j.dump(2) + "\n", "application/json");
  }

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  Handler wrap(Handler h) {
    return [this, h](const httplib::Request& req, httplib::Response& res) {
      try {
        if (config.token) {
          std::string auth = req.get_header_value("Authorization");
          if (auth != "Bearer " + *config.token) throw HttpError{401, "Unauthorized", "missing or wrong token"};
        }
        h(req, res);
      } catch (const HttpError& e) {
        send(res, e.status, {{"error", e.code}, {"message", e.message}});
      } catch (const Error& e) {
        send(res, status_for(e), {{"error", e.code_name()}, {"message", e.what()}});
      } catch (const std::exception& e) {
        send(res, 500, {{"error", "Internal"}, {"message", e.what()}});
      }
    };
  }

  // Appends the request to the project's event log.
  static void audit(project::Project& p, const httplib::Request& req, const std::string& what) {
    p.run.log.add("API", "request", what, req.method, {{"path", req.path}});
  }

  std::string new_project_id() {
    std::lock_guard g(mutex);
    for (int k = 1;; ++k) {
      std::string id = "p" + std::to_string(k);
      if (!fs::exists(dir_of(id))) {
        fs::create_directories(dir_of(id));
        return id;
      }
    }
  }

  void run_job(const std::string& rid, const std::string& id, pipeline::Stage stage) {
    {
      std::lock_guard g(mutex);
      runs[rid].status = "running";
    }
    json error = nullptr;
    try {
      std::lock_guard pl(lock_of(id));
      project::Project p = project::open(dir_of(id));
      project::run_stage(p, stage);
    } catch (const Error& e) {
      error = {{"error", e.code_name()}, {"message", e.what()}};
    } catch (const std::exception& e) {
      error = {{"error", "Internal"}, {"message", e.what()}};
    }
    std::lock_guard g(mutex);
    runs[rid].status = error.is_null() ? "done" : "failed";
    runs[rid].error = error;
    busy.erase(id);
  }

  void routes() {
    server.Post("/projects", wrap([this](const httplib::Request& req, httplib::Response& res) {
      json body = body_of(req);
      ju::expect_object(body, "body", {"description", "data", "config"});
      if (!body.contains("description") || !body["description"].is_string()) {
        throw HttpError{422, "SchemaViolation", "body needs a string \"description\""};
      }
      std::map<std::string, Tensor> data;
      if (body.contains("data")) {
        if (!body["data"].is_object()) throw HttpError{422, "SchemaViolation", "\"data\" must be an object"};
        for (const auto& item : body["data"].items()) data[item.key()] = pipeline::tensor_from_nested(item.value());
      }
      json cfg = config.run_config;
      if (body.contains("config")) {
        if (!body["config"].is_object()) throw HttpError{422, "SchemaViolation", "\"config\" must be an object"};
        for (const auto& item : body["config"].items()) cfg[item.key()] = item.value();
      }
      pipeline::run_config_from_json(cfg, "body/config");
      std::string id = new_project_id();
      project::Project p = project::create(dir_of(id), id, body["description"].get<std::string>(), cfg, config.base, data);
      audit(p, req, "projects");
      project::save(p);
      send(res, 201, {{"id", id}, {"cursor", std::string(pipeline::to_string(p.run.cursor))}});
    }));

    server.Get(R"(/projects/([^/]+)/state)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.matches[1];
      require_project(id);
      std::lock_guard pl(lock_of(id));
      project::Project p = project::open(dir_of(id));
      send(res, 200, project::summary(p));
    }));

    server.Post(R"(/projects/([^/]+)/stages/([^/]+)/run)",
                wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.matches[1];
      require_project(id);
      pipeline::Stage stage;
      try {
        stage = pipeline::stage_from_string(std::string(req.matches[2]));
      } catch (const Error& e) {
        throw HttpError{422, "InvalidArgument", e.what()};
      }
      std::string rid;
      {
        std::lock_guard pl(lock_of(id));
        require_idle(id);
        project::Project p = project::open(dir_of(id));
        if (p.run.cursor != stage) {
          std::string msg = static_cast<int>(p.run.cursor) > static_cast<int>(stage)
                                ? "stage precondition: " + std::string(pipeline::to_string(stage)) + " is already done"
                                : "stage precondition: " + std::string(pipeline::to_string(stage)) + " needs " +
                                      std::string(pipeline::to_string(p.run.cursor)) + " to run first";
          throw HttpError{409, "StagePrecondition", msg};
        }
        audit(p, req, std::string(pipeline::to_string(stage)));
        project::save(p);
        std::lock_guard g(mutex);
        rid = "r" + std::to_string(next_run++);
        runs[rid] = RunRecord{rid, id, std::string(pipeline::to_string(stage))};
        busy.insert(id);
        workers.emplace_back([this, rid, id, stage] { run_job(rid, id, stage); });
      }
      send(res, 202, {{"run", rid}, {"status", "queued"}});
    }));

    server.Get(R"(/runs/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard g(mutex);
      auto it = runs.find(req.matches[1]);
      if (it == runs.end()) throw HttpError{404, "UnknownTarget", "no run '" + std::string(req.matches[1]) + "'"};
      send(res, 200, run_record_json(it->second));
    }));

    server.Get(R"(/projects/([^/]+)/reviews)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.matches[1];
      require_project(id);
      std::lock_guard pl(lock_of(id));
      project::Project p = project::open(dir_of(id));
      json out = json::array();
      for (const auto& r : p.run.reviews) {
        json j = ec::pending_review_to_json(r);
        j["review"] = id + "~" + r.id;
        out.push_back(j);
      }
      send(res, 200, out);
    }));

    // Review ids are "<project>~<review>".
    server.Post(R"(/reviews/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::string rid = req.matches[1];
      auto sep = rid.find('~');
      if (sep == std::string::npos) throw HttpError{404, "UnknownTarget", "no review '" + rid + "'"};
      std::string id = rid.substr(0, sep);
      require_project(id);
      json body = body_of(req);
      ju::expect_object(body, "body", {"action", "payload"});
      if (!body.contains("action") || !body["action"].is_string()) {
        throw HttpError{422, "SchemaViolation", "body needs a string \"action\""};
      }
      std::string action = body["action"];
      if (action != "keep" && action != "remove" && action != "modify") {
        throw HttpError{422, "SchemaViolation", "action must be keep, remove or modify"};
      }
      std::lock_guard pl(lock_of(id));
      require_idle(id);
      project::Project p = project::open(dir_of(id));
      audit(p, req, rid);
      project::resolve_review(p, rid.substr(sep + 1), action, body.value("payload", json::object()));
      send(res, 200, project::summary(p));
    }));

    server.Patch(R"(/projects/([^/]+)/items/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.matches[1];
      require_project(id);
      json body = body_of(req);
      std::lock_guard pl(lock_of(id));
      require_idle(id);
      project::Project p = project::open(dir_of(id));
      std::string item = req.matches[2];
      if (!p.state.find_clause(item) && !p.state.has_symbol(item)) {
        throw HttpError{404, "UnknownTarget", "no item '" + item + "'"};
      }
      audit(p, req, item);
      project::patch_item(p, item, body);
      send(res, 200, project::summary(p));
    }));

    server.Get(R"(/projects/([^/]+)/data)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.matches[1];
      require_project(id);
      std::lock_guard pl(lock_of(id));
      send(res, 200, project::data_schema(project::open(dir_of(id))));
    }));

    server.Put(R"(/projects/([^/]+)/data)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.matches[1];
      require_project(id);
      json body = body_of(req);
      ju::expect_object(body, "body", {"data"});
      if (!body.contains("data") || !body["data"].is_object()) {
        throw HttpError{422, "SchemaViolation", "\"data\" must be an object"};
      }
      std::map<std::string, Tensor> data;
      for (const auto& item : body["data"].items()) {
        data[item.key()] = pipeline::tensor_from_nested(item.value(), "data/" + item.key());
      }
      std::lock_guard pl(lock_of(id));
      require_idle(id);
      project::Project p = project::open(dir_of(id));
      audit(p, req, "data");
      project::upload_data(p, data);
      send(res, 200, project::data_schema(p));
    }));

    // body: {"seed": n, "overwrite": bool, "ranges": {"sym": {"lower", "upper", "integer"}}}
    server.Post(R"(/projects/([^/]+)/data/generate)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.matches[1];
      require_project(id);
      json body = body_of(req);
      ju::expect_object(body, "body", {"seed", "overwrite", "ranges"});
      std::uint64_t seed = body.contains("seed") ? static_cast<std::uint64_t>(ju::get_int(body, "seed", "body")) : 1;
      bool overwrite = ju::get_bool_or(body, "overwrite", "body", false);
      std::map<std::string, project::GenerateRange> ranges;
      if (body.contains("ranges")) {
        if (!body["ranges"].is_object()) throw HttpError{422, "SchemaViolation", "\"ranges\" must be an object"};
        for (const auto& [sym, r] : body["ranges"].items()) {
          std::string path = "body/ranges/" + sym;
          ju::expect_object(r, path, {"lower", "upper", "integer"});
          project::GenerateRange g;
          if (r.contains("lower")) g.lower = ju::get_number(r, "lower", path);
          if (r.contains("upper")) g.upper = ju::get_number(r, "upper", path);
          g.integer = ju::get_bool_or(r, "integer", path, true);
          ranges[sym] = g;
        }
      }
      std::lock_guard pl(lock_of(id));
      require_idle(id);
      project::Project p = project::open(dir_of(id));
      audit(p, req, "data");
      project::generate_data(p, ranges, seed, overwrite);
      send(res, 200, project::data_schema(p));
    }));

    server.Get(R"(/projects/([^/]+)/notifications)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.matches[1];
      require_project(id);
      std::lock_guard pl(lock_of(id));
      project::Project p = project::open(dir_of(id));
      send(res, 200, json(p.run.notifications));
    }));

    server.Get(R"(/projects/([^/]+)/artifacts/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.matches[1];
      std::string kind = req.matches[2];
      require_project(id);
      if (kind != "lp" && kind != "report" && kind != "log") {
        throw HttpError{404, "UnknownTarget", "no artifact kind '" + kind + "'"};
      }
      std::lock_guard pl(lock_of(id));
      project::Project p = project::open(dir_of(id));
      auto f = project::artifact(p, kind);
      if (!f) throw HttpError{404, "UnknownTarget", "no " + kind + " artifact yet"};
      res.set_header("X-Artifact-Name", f->filename().string());
      res.set_content(ju::read_text(*f), kind == "report" ? "application/json" : "text/plain");
    }));

    // Line-delimited events from ?from=<seq index>.
    server.Get(R"(/projects/([^/]+)/events)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.matches[1];
      require_project(id);
      std::size_t from = 0;
      if (req.has_param("from")) {
        std::string v = req.get_param_value("from");
        if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
          throw HttpError{422, "InvalidArgument", "from must be a non-negative integer"};
        }
        from = static_cast<std::size_t>(std::stoull(v));
      }
      std::lock_guard pl(lock_of(id));
      project::Project p = project::open(dir_of(id));
      std::string out;
      const auto& events = p.run.log.events();
      for (std::size_t i = from; i < events.size(); ++i) out += event_to_json(events[i]).dump() + "\n";
      res.set_content(out, "application/x-ndjson");
    }));
  }

  void drain() {
    std::vector<std::thread> pending;
    {
      std::lock_guard g(mutex);
      pending.swap(workers);
    }
    for (auto& t : pending) t.join();
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() {
  stop();
  impl_->drain();
}

void Service::listen() {
  if (!impl_->server.listen(impl_->config.host, impl_->config.port)) {
    throw Error(ErrorCode::kIoError, "cannot listen on " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  }
}

int Service::start() {
  int port = impl_->config.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(impl_->config.host);
  } else if (!impl_->server.bind_to_port(impl_->config.host, port)) {
    port = -1;
  }
  if (port < 0) throw Error(ErrorCode::kIoError, "cannot bind " + impl_->config.host);
  impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::stop() {
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
}

void Service::drain() { impl_->drain(); }

}  // namespace nlmilp::service
