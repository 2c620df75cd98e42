#include "nlmilp/events.hpp"

#include <fstream>
#include <sstream>

#include "nlmilp/error.hpp"
#include "nlmilp/json_util.hpp"

namespace nlmilp {

namespace ju = json_util;
using nlohmann::json;

bool Event::same_content(const Event& o) const {
  return seq == o.seq && stage == o.stage && kind == o.kind && subject == o.subject &&
         fingerprint == o.fingerprint && outcome == o.outcome && detail == o.detail;
}

json event_to_json(const Event& e) {
  json j = {{"seq", e.seq}, {"stage", e.stage}, {"kind", e.kind}, {"outcome", e.outcome}};
  if (!e.subject.empty()) j["subject"] = e.subject;
  if (!e.fingerprint.empty()) j["fingerprint"] = e.fingerprint;
  if (!e.detail.empty()) j["detail"] = e.detail;
  j["t"] = e.t;
  return j;
}

Event event_from_json(const json& j, const std::string& path) {
  ju::expect_object(j, path, {"seq", "stage", "kind", "subject", "fingerprint", "outcome", "detail", "t"});
  Event e;
  e.seq = ju::get_int(j, "seq", path);
  e.stage = ju::get_string(j, "stage", path);
  e.kind = ju::get_string(j, "kind", path);
  e.subject = ju::get_string_or(j, "subject", path, "");
  e.fingerprint = ju::get_string_or(j, "fingerprint", path, "");
  e.outcome = ju::get_string(j, "outcome", path);
  if (j.contains("detail")) e.detail = j["detail"];
  if (j.contains("t")) e.t = ju::get_number(j, "t", path);
  return e;
}

Event& EventLog::add(Event e) {
  e.seq = static_cast<long>(events_.size());
  e.t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  events_.push_back(std::move(e));
  return events_.back();
}

Event& EventLog::add(std::string stage, std::string kind, std::string subject, std::string outcome,
                     json detail, std::string fingerprint) {
  Event e;
  e.stage = std::move(stage);
  e.kind = std::move(kind);
  e.subject = std::move(subject);
  e.outcome = std::move(outcome);
  e.detail = std::move(detail);
  e.fingerprint = std::move(fingerprint);
  return add(std::move(e));
}

std::size_t EventLog::count(const std::string& kind) const {
  std::size_t n = 0;
  for (const auto& e : events_) n += e.kind == kind;
  return n;
}

std::string EventLog::to_jsonl() const {
  std::string out;
  for (const auto& e : events_) out += event_to_json(e).dump() + "\n";
  return out;
}

EventLog EventLog::from_jsonl(const std::string& text) {
  EventLog log;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& ex) {
      throw Error(ErrorCode::kSchemaViolation, "line " + std::to_string(n) + ": " + ex.what());
    }
    log.events_.push_back(event_from_json(j, "line " + std::to_string(n)));
  }
  return log;
}

void EventLog::append_to(const std::filesystem::path& path, std::size_t from) const {
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::kIoError, "cannot append to " + path.string());
  for (std::size_t i = from; i < events_.size(); ++i) out << event_to_json(events_[i]).dump() << "\n";
}

}  // namespace nlmilp
