#include "nlmilp/llm.hpp"

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "nlmilp/error.hpp"
#include "nlmilp/json_util.hpp"

namespace nlmilp::llm {

namespace ju = json_util;

namespace {

bool is_name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// on_name for every `{name}`, on_text for everything else.
template <typename OnName, typename OnText>
void scan_placeholders(const std::string& body, OnName on_name, OnText on_text) {
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] == '{') {
      std::size_t j = i + 1;
      while (j < body.size() && is_name_char(body[j])) ++j;
      if (j > i + 1 && j < body.size() && body[j] == '}' &&
          !std::isdigit(static_cast<unsigned char>(body[i + 1]))) {
        on_name(body.substr(i + 1, j - i - 1));
        i = j + 1;
        continue;
      }
    }
    on_text(body[i]);
    ++i;
  }
}

PromptTemplate template_from_json(const json& j, const std::string& path) {
  ju::expect_object(j, path, {"name", "stage", "required", "body"});
  PromptTemplate t;
  t.name = ju::get_string(j, "name", path);
  t.stage = ju::get_string_or(j, "stage", path, "");
  const json& body = ju::require(j, "body", path);
  if (body.is_string()) {
    t.body = body.get<std::string>();
  } else if (body.is_array()) {
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (!body[i].is_string()) ju::violation(path + "/body/" + std::to_string(i), "expected string");
      if (i) t.body += '\n';
      t.body += body[i].get<std::string>();
    }
  } else {
    ju::violation(path + "/body", "expected string or array of lines");
  }
  if (j.contains("required")) {
    const json& req = ju::get_array(j, "required", path);
    for (std::size_t i = 0; i < req.size(); ++i) {
      if (!req[i].is_string()) ju::violation(path + "/required/" + std::to_string(i), "expected string");
      t.required.push_back(req[i].get<std::string>());
    }
  } else {
    t.required = placeholders_of(t.body);
  }
  return t;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

TemplateRegistry::TemplateRegistry(std::filesystem::path path) : path_(std::move(path)) { load(); }

TemplateRegistry TemplateRegistry::from_json(const json& j, const std::string& origin) {
  TemplateRegistry reg;
  ju::expect_object(j, origin, {"templates"});
  const json& list = ju::get_array(j, "templates", origin);
  for (std::size_t i = 0; i < list.size(); ++i) {
    reg.add(template_from_json(list[i], origin + "/templates/" + std::to_string(i)));
  }
  return reg;
}

void TemplateRegistry::load() {
  std::error_code ec;
  auto stamp = std::filesystem::last_write_time(path_, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot stat " + path_.string());
  TemplateRegistry fresh = from_json(ju::read_file(path_), path_.filename().string());
  std::lock_guard lock(*mutex_);
  templates_ = std::move(fresh.templates_);
  stamp_ = stamp;
}

bool TemplateRegistry::reload_if_changed() {
  if (path_.empty()) return false;
  std::error_code ec;
  auto stamp = std::filesystem::last_write_time(path_, ec);
  if (ec) return false;
  {
    std::lock_guard lock(*mutex_);
    if (stamp == stamp_) return false;
  }
  load();
  return true;
}

PromptTemplate TemplateRegistry::get(const std::string& name) const {
  std::lock_guard lock(*mutex_);
  auto it = templates_.find(name);
  if (it == templates_.end()) throw Error(ErrorCode::kInvalidArgument, "no prompt template named " + name);
  return it->second;
}

bool TemplateRegistry::contains(const std::string& name) const {
  std::lock_guard lock(*mutex_);
  return templates_.count(name) > 0;
}

void TemplateRegistry::add(PromptTemplate tmpl) {
  std::lock_guard lock(*mutex_);
  std::string name = tmpl.name;
  if (templates_.count(name)) throw Error(ErrorCode::kInvalidArgument, "duplicate prompt template " + name);
  templates_.emplace(std::move(name), std::move(tmpl));
}

std::vector<std::string> TemplateRegistry::names() const {
  std::lock_guard lock(*mutex_);
  std::vector<std::string> out;
  for (const auto& [name, _] : templates_) out.push_back(name);
  return out;
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("NLMILP_DATA_DIR"); env && *env) return env;
  return NLMILP_DATA_DIR;
}

const TemplateRegistry& default_templates() {
  static TemplateRegistry reg(data_dir() / "prompts" / "templates.json");
  return reg;
}

std::vector<std::string> placeholders_of(const std::string& body) {
  std::vector<std::string> names;
  scan_placeholders(
      body,
      [&](const std::string& n) {
        if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
      },
      [](char) {});
  return names;
}

std::string render(const PromptTemplate& tmpl, const Bindings& bindings) {
  for (const auto& name : tmpl.required) {
    if (!bindings.count(name)) {
      throw Error(ErrorCode::kMissingPlaceholder,
                  "template " + tmpl.name + ": placeholder {" + name + "} is unbound");
    }
  }
  std::string out;
  out.reserve(tmpl.body.size() + 256);
  scan_placeholders(
      tmpl.body,
      [&](const std::string& n) {
        auto it = bindings.find(n);
        if (it != bindings.end()) out += it->second;
      },
      [&](char c) { out += c; });
  return out;
}

std::string hash_hex(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

std::string fingerprint(const std::string& template_name, const Bindings& bindings) {
  json canon = json::object();
  for (const auto& [k, v] : bindings) canon[k] = v;
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canon.dump())));
  return template_name + "/" + hex;
}

Prompt make_prompt(const PromptTemplate& tmpl, const Bindings& bindings, std::string subject) {
  Prompt p;
  p.template_name = tmpl.name;
  p.subject = std::move(subject);
  p.text = render(tmpl, bindings);
  p.fingerprint = fingerprint(tmpl.name, bindings);
  return p;
}

namespace {

std::string shape_text(const Shape& shape) {
  if (shape.empty()) return "scalar";
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += dim_to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace

std::string describe_parameter(const Parameter& p) {
  return "- " + p.symbol + " " + shape_text(p.shape) + " parameter: " + p.definition;
}

std::string describe_variable(const Variable& v) {
  std::string s = "- " + v.symbol + " " + shape_text(v.shape) + " " + std::string(to_string(v.type)) +
                  " variable: " + v.definition;
  return s;
}

std::string describe_symbols(const ClauseContext& context) {
  std::string out;
  for (const auto& p : context.parameters) out += describe_parameter(p) + "\n";
  for (const auto& v : context.variables) out += describe_variable(v) + "\n";
  if (out.empty()) return "(none)\n";
  return out;
}

std::string_view to_string(Tier tier) { return tier == Tier::kStrong ? "strong" : "standard"; }

BackendSpec backend_spec_from_json(const json& j, const std::string& path) {
  ju::expect_object(j, path, {"kind", "transcript", "answers", "endpoint", "model", "tier",
                              "max_in_flight", "min_interval", "timeout"});
  BackendSpec spec;
  std::string kind = ju::get_string(j, "kind", path);
  if (kind == "scripted") {
    spec.kind = BackendSpec::Kind::kScripted;
    spec.transcript = ju::get_string(j, "transcript", path);
  } else if (kind == "answers") {
    spec.kind = BackendSpec::Kind::kAnswers;
    const json& a = ju::require(j, "answers", path);
    if (a.is_string()) {
      spec.answers.push_back(a.get<std::string>());
    } else if (a.is_array() && !a.empty()) {
      for (const auto& f : a) {
        if (!f.is_string()) ju::violation(path + "/answers", "expected file names");
        spec.answers.push_back(f.get<std::string>());
      }
    } else {
      ju::violation(path + "/answers", "expected a file name or a list of them");
    }
  } else if (kind == "remote-http") {
    spec.kind = BackendSpec::Kind::kRemoteHttp;
    spec.endpoint = ju::get_string_or(j, "endpoint", path, "");
  } else {
    ju::violation(path + "/kind", "expected scripted, answers or remote-http");
  }
  spec.model = ju::get_string_or(j, "model", path, "");
  std::string tier = ju::get_string_or(j, "tier", path, "standard");
  if (tier == "strong") {
    spec.tier = Tier::kStrong;
  } else if (tier != "standard") {
    ju::violation(path + "/tier", "expected standard or strong");
  }
  if (j.contains("max_in_flight")) spec.max_in_flight = static_cast<int>(ju::get_int(j, "max_in_flight", path));
  if (j.contains("min_interval")) spec.min_interval = ju::get_number(j, "min_interval", path);
  if (j.contains("timeout")) spec.timeout = ju::get_number(j, "timeout", path);
  if (spec.max_in_flight < 1) ju::violation(path + "/max_in_flight", "must be >= 1");
  return spec;
}

json backend_spec_to_json(const BackendSpec& spec) {
  json j;
  switch (spec.kind) {
    case BackendSpec::Kind::kScripted:
      j["kind"] = "scripted";
      j["transcript"] = spec.transcript;
      break;
    case BackendSpec::Kind::kAnswers:
      j["kind"] = "answers";
      j["answers"] = spec.answers;
      break;
    case BackendSpec::Kind::kRemoteHttp:
      j["kind"] = "remote-http";
      if (!spec.endpoint.empty()) j["endpoint"] = spec.endpoint;
      break;
  }
  if (!spec.model.empty()) j["model"] = spec.model;
  j["tier"] = std::string(to_string(spec.tier));
  return j;
}

ScriptedBackend::ScriptedBackend(std::map<std::string, std::string> transcript, std::string id, Tier tier)
    : transcript_(std::move(transcript)), id_(std::move(id)), tier_(tier) {}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path, Tier tier) {
  json j = ju::read_file(path);
  if (!j.is_object()) ju::violation("/", "transcript must be an object of fingerprint -> response");
  std::map<std::string, std::string> map;
  for (const auto& item : j.items()) {
    if (!item.value().is_string()) ju::violation("/" + item.key(), "expected string");
    map[item.key()] = item.value().get<std::string>();
  }
  return std::make_unique<ScriptedBackend>(std::move(map), "scripted:" + path.filename().string(), tier);
}

std::string ScriptedBackend::complete(const Prompt& prompt) {
  std::lock_guard lock(mutex_);
  ++calls_;
  auto it = transcript_.find(prompt.fingerprint);
  if (it == transcript_.end()) {
    misses_.push_back(prompt);
    throw Error(ErrorCode::kTranscriptMiss, "no transcript entry for " + prompt.fingerprint);
  }
  return it->second;
}

std::vector<Prompt> ScriptedBackend::misses() const {
  std::lock_guard lock(mutex_);
  return misses_;
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

AnswerBackend::AnswerBackend(json answers, Tier tier) : answers_(std::move(answers)), tier_(tier) {
  if (!answers_.is_object()) ju::violation("/", "answers must be an object");
}

std::string AnswerBackend::complete(const Prompt& prompt) {
  std::lock_guard lock(mutex_);
  int repair = 0;
  if (auto pos = prompt.fingerprint.find("#repair"); pos != std::string::npos) {
    repair = std::atoi(prompt.fingerprint.c_str() + pos + 7);
  }
  const json* hit = nullptr;
  for (const std::string& key : {prompt.template_name + ":" + prompt.subject, prompt.template_name + ":*"}) {
    auto it = answers_.find(key);
    if (it != answers_.end()) {
      hit = &*it;
      break;
    }
  }
  if (!hit) {
    throw Error(ErrorCode::kTranscriptMiss,
                "no answer for " + prompt.template_name + ":" + prompt.subject + " (" + prompt.fingerprint + ")");
  }
  json value = *hit;
  if (value.is_array()) {
    if (value.empty()) throw Error(ErrorCode::kTranscriptMiss, "empty answer list for " + prompt.fingerprint);
    value = value[std::min<std::size_t>(repair, value.size() - 1)];
  }
  // Objects are wrapped into a fenced block; strings are sent verbatim.
  std::string text = value.is_string() ? value.get<std::string>() : "```json\n" + value.dump(2) + "\n```";
  recorded_[prompt.fingerprint] = text;
  return text;
}

RemoteBackend::RemoteBackend(BackendSpec spec) : spec_(std::move(spec)) {
  if (spec_.endpoint.empty()) {
    if (const char* env = std::getenv("ENGINE_LLM_ENDPOINT"); env && *env) spec_.endpoint = env;
  }
  if (spec_.endpoint.empty()) {
    throw Error(ErrorCode::kTransportError, "remote backend needs an endpoint (ENGINE_LLM_ENDPOINT)");
  }
}

std::string RemoteBackend::complete(const Prompt& prompt) {
  {
    std::unique_lock lock(mutex_);
    slot_.wait(lock, [&] { return in_flight_ < spec_.max_in_flight; });
    auto gap = std::chrono::duration<double>(spec_.min_interval);
    auto next = last_start_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(gap);
    auto now = std::chrono::steady_clock::now();
    if (last_start_.time_since_epoch().count() != 0 && next > now) {
      std::this_thread::sleep_for(next - now);
    }
    last_start_ = std::chrono::steady_clock::now();
    ++in_flight_;
  }
  struct Release {
    RemoteBackend* self;
    ~Release() {
      std::lock_guard lock(self->mutex_);
      --self->in_flight_;
      self->slot_.notify_one();
    }
  } release{this};

  // Split "scheme://host[:port]/path".
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(spec_.endpoint, m, url_re)) {
    throw Error(ErrorCode::kTransportError, "bad endpoint URL " + spec_.endpoint);
  }
  std::string base = m[1].str();
  std::string path = m[2].matched ? m[2].str() : "/v1/chat/completions";

  httplib::Client client(base);
  auto t = static_cast<time_t>(spec_.timeout);
  client.set_read_timeout(t, 0);
  client.set_connection_timeout(std::min<time_t>(t, 30), 0);
  httplib::Headers headers;
  if (const char* key = std::getenv("ENGINE_LLM_KEY"); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  json body = {{"messages", json::array({{{"role", "user"}, {"content", prompt.text}}})}, {"temperature", 0}};
  if (!spec_.model.empty()) body["model"] = spec_.model;

  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) throw Error(ErrorCode::kTransportError, "request to " + spec_.endpoint + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw Error(ErrorCode::kTransportError,
                "HTTP " + std::to_string(res->status) + " from " + spec_.endpoint + ": " + res->body.substr(0, 300));
  }
  try {
    json reply = json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kTransportError, std::string("unexpected reply shape: ") + e.what());
  }
}

json merge_answer_files(const std::vector<std::filesystem::path>& files) {
  json out = json::object();
  for (const auto& f : files) {
    json j = ju::read_file(f);
    if (!j.is_object()) ju::violation(f.string(), "answers must be an object");
    for (const auto& item : j.items()) out[item.key()] = item.value();
  }
  return out;
}

std::unique_ptr<Backend> make_backend(const BackendSpec& spec, const std::filesystem::path& base) {
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) path = base / path;
    return path;
  };
  switch (spec.kind) {
    case BackendSpec::Kind::kScripted:
      if (spec.transcript.empty()) throw Error(ErrorCode::kInvalidArgument, "scripted backend needs a transcript file");
      return ScriptedBackend::from_file(resolve(spec.transcript), spec.tier);
    case BackendSpec::Kind::kAnswers:
    {
      std::vector<std::filesystem::path> files;
      for (const auto& f : spec.answers) files.push_back(resolve(f));
      if (files.empty()) throw Error(ErrorCode::kInvalidArgument, "answers backend needs at least one file");
      return std::make_unique<AnswerBackend>(merge_answer_files(files), spec.tier);
    }
    case BackendSpec::Kind::kRemoteHttp:
      return std::make_unique<RemoteBackend>(spec);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown backend kind");
}

json extract_payload(const std::string& raw) {
  std::string block;
  auto open = raw.find("```");
  if (open != std::string::npos) {
    auto eol = raw.find('\n', open);
    if (eol == std::string::npos) throw Error(ErrorCode::kUnparseable, "fenced block has no body");
    std::string tag = raw.substr(open + 3, eol - open - 3);
    while (!tag.empty() && std::isspace(static_cast<unsigned char>(tag.back()))) tag.pop_back();
    if (!tag.empty() && tag != "json") throw Error(ErrorCode::kUnparseable, "fenced block is not json");
    auto close = raw.find("```", eol + 1);
    if (close == std::string::npos) throw Error(ErrorCode::kUnparseable, "missing closing fence");
    block = raw.substr(eol + 1, close - eol - 1);
  } else {
    block = raw;
  }
  try {
    return json::parse(block);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kUnparseable, std::string("invalid JSON: ") + e.what());
  }
}

namespace {

std::optional<int> stated_confidence(const json& payload, const std::string& raw) {
  if (payload.is_object()) {
    auto it = payload.find("confidence");
    if (it != payload.end()) {
      if (it->is_number_integer()) return it->get<int>();
      if (it->is_number_float()) {
        double v = it->get<double>();
        if (v == static_cast<int>(v)) return static_cast<int>(v);
        return 0;
      }
      return 0;
    }
  }
  static const std::regex re(R"(confidence\s*[:=]\s*(-?\d+))", std::regex::icase);
  std::smatch m;
  if (std::regex_search(raw, m, re)) {
    try {
      return std::stoi(m[1].str());
    } catch (...) {
      return 0;
    }
  }
  return std::nullopt;
}

}  // namespace

LlmResponse complete(Backend& backend, const Prompt& prompt, const Validator& validate, int retries) {
  LlmResponse out;
  out.backend = backend.id();
  out.fingerprint = prompt.fingerprint;
  auto t0 = std::chrono::steady_clock::now();
  Prompt current = prompt;
  for (int attempt = 0;; ++attempt) {
    std::string raw = backend.complete(current);
    out.attempts.push_back(raw);
    std::string reason;
    bool parse_failure = false;
    try {
      json payload = extract_payload(raw);
      if (validate) validate(payload);
      out.raw = raw;
      out.payload = std::move(payload);
      out.confidence = stated_confidence(out.payload, raw);
      out.retry_count = attempt;
      out.latency = seconds_since(t0);
      return out;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kUnparseable) parse_failure = true;
      reason = e.what();
      if (attempt >= retries) {
        if (!parse_failure) throw;
        std::string all;
        for (std::size_t i = 0; i < out.attempts.size(); ++i) {
          all += "\n--- attempt " + std::to_string(i + 1) + " ---\n" + out.attempts[i];
        }
        throw Error(ErrorCode::kUnparseable, "no usable reply to " + prompt.fingerprint + " after " +
                                                 std::to_string(attempt + 1) + " attempts: " + reason + all);
      }
    }
    current.fingerprint = prompt.fingerprint + "#repair" + std::to_string(attempt + 1);
    current.text = prompt.text + "\n\nYour previous reply could not be used (" + reason +
                   "). Reply again with a single fenced ```json block in the requested format.";
  }
}

int confidence_of(const LlmResponse& response) {
  if (!response.confidence) {
    auto stated = stated_confidence(response.payload, response.raw);
    if (stated && *stated >= 1 && *stated <= 5) return *stated;
    return 1;
  }
  if (response.confidence && *response.confidence >= 1 && *response.confidence <= 5) return *response.confidence;
  return 1;
}

}  // namespace nlmilp::llm
