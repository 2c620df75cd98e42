#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace nlmilp {

// One line of a run's audit log.
struct Event {
  long seq = 0;
  std::string stage;        // pipeline stage the event belongs to
  std::string kind;         // llm, correction, escalation, debug_attempt, error, ...
  std::string subject;      // clause id, symbol, or empty
  std::string fingerprint;  // prompt fingerprint for llm exchanges
  std::string outcome;
  nlohmann::json detail = nlohmann::json::object();
  double t = 0.0;  // seconds since the log was opened; not compared on replay

  bool same_content(const Event& other) const;
};

nlohmann::json event_to_json(const Event& e);
Event event_from_json(const nlohmann::json& j, const std::string& path);

class EventLog {
 public:
  EventLog() : start_(std::chrono::steady_clock::now()) {}

  Event& add(Event e);
  Event& add(std::string stage, std::string kind, std::string subject, std::string outcome,
             nlohmann::json detail = nlohmann::json::object(), std::string fingerprint = "");

  const std::vector<Event>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  std::size_t count(const std::string& kind) const;

  // JSON lines, one event per line.
  std::string to_jsonl() const;
  static EventLog from_jsonl(const std::string& text);
  void append_to(const std::filesystem::path& path, std::size_t from = 0) const;

 private:
  std::chrono::steady_clock::time_point start_;
  std::vector<Event> events_;
};

}  // namespace nlmilp
