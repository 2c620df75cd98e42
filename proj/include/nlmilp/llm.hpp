#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlmilp/state.hpp"

namespace nlmilp::llm {

using nlohmann::json;
using Bindings = std::map<std::string, std::string>;

struct PromptTemplate {
  std::string name;
  std::string stage;
  std::string body;  // `{name}` placeholders; other braces are literal
  std::vector<std::string> required;
};

// Named templates loaded from a JSON file:
//   {"templates": [{"name", "stage", "required": [...], "body"}]}
// The body may also be given as an array of lines.
class TemplateRegistry {
 public:
  TemplateRegistry() = default;
  explicit TemplateRegistry(std::filesystem::path path);

  static TemplateRegistry from_json(const json& j, const std::string& origin = "templates");

  PromptTemplate get(const std::string& name) const;
  bool contains(const std::string& name) const;
  void add(PromptTemplate tmpl);
  std::vector<std::string> names() const;

  // Re-reads the backing file when its modification time changed. Returns
  // true when something was reloaded.
  bool reload_if_changed();

 private:
  void load();

  std::filesystem::path path_;
  std::filesystem::file_time_type stamp_{};
  std::map<std::string, PromptTemplate> templates_;
  std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
};

// Default registry under the data directory.
std::filesystem::path data_dir();
const TemplateRegistry& default_templates();

// Placeholders used by a body, in order of first appearance.
std::vector<std::string> placeholders_of(const std::string& body);

// Substitutes bindings; unbound required names throw kMissingPlaceholder,
// unbound optional names render empty.
std::string render(const PromptTemplate& tmpl, const Bindings& bindings);

// 16 hex digits of FNV-1a 64.
std::string hash_hex(const std::string& text);

// "<template>/<fnv1a64 of the canonical bindings JSON>"
std::string fingerprint(const std::string& template_name, const Bindings& bindings);

struct Prompt {
  std::string template_name;
  std::string subject;      // item the prompt is about; not part of the fingerprint
  std::string fingerprint;
  std::string text;
};

Prompt make_prompt(const PromptTemplate& tmpl, const Bindings& bindings, std::string subject = "");

// Prompt context block: one line per symbol, no numeric data.
std::string describe_symbols(const ClauseContext& context);
std::string describe_parameter(const Parameter& p);
std::string describe_variable(const Variable& v);

enum class Tier { kStandard, kStrong };

std::string_view to_string(Tier tier);

struct BackendSpec {
  enum class Kind { kScripted, kRemoteHttp, kAnswers } kind = Kind::kScripted;
  std::string transcript;  // scripted: fingerprint -> response file
  std::vector<std::string> answers;  // answers: files merged left to right
  std::string endpoint;    // remote: URL, else ENGINE_LLM_ENDPOINT
  std::string model;
  Tier tier = Tier::kStandard;
  int max_in_flight = 4;
  double min_interval = 0.0;  // seconds between request starts
  double timeout = 120.0;
};

BackendSpec backend_spec_from_json(const json& j, const std::string& path);
json backend_spec_to_json(const BackendSpec& spec);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  virtual Tier tier() const { return Tier::kStandard; }
  // Raw completion text. Throws kTransportError or kTranscriptMiss.
  virtual std::string complete(const Prompt& prompt) = 0;
};

// Replays a transcript: JSON object fingerprint -> response text. Misses are
// recorded with the prompt so transcripts can be extended.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(std::map<std::string, std::string> transcript, std::string id = "scripted",
                           Tier tier = Tier::kStandard);
  static std::unique_ptr<ScriptedBackend> from_file(const std::filesystem::path& path,
                                                    Tier tier = Tier::kStandard);

  std::string id() const override { return id_; }
  Tier tier() const override { return tier_; }
  std::string complete(const Prompt& prompt) override;

  std::vector<Prompt> misses() const;
  std::size_t calls() const;

 private:
  std::map<std::string, std::string> transcript_;
  std::string id_;
  Tier tier_;
  mutable std::mutex mutex_;
  std::vector<Prompt> misses_;
  std::size_t calls_ = 0;
};

// Authoring backend: answers by "<template>:<subject>" then "<template>:*".
// A list value answers successive repair re-asks. Every exchange is recorded
// as a fingerprint -> response transcript.
class AnswerBackend : public Backend {
 public:
  explicit AnswerBackend(json answers, Tier tier = Tier::kStandard);

  std::string id() const override { return "answers"; }
  Tier tier() const override { return tier_; }
  std::string complete(const Prompt& prompt) override;

  const std::map<std::string, std::string>& recorded() const { return recorded_; }

 private:
  json answers_;
  Tier tier_;
  std::mutex mutex_;
  std::map<std::string, std::string> recorded_;
};

// Key-wise merge; later files win.
json merge_answer_files(const std::vector<std::filesystem::path>& files);

// Chat-completions style HTTP endpoint. Key from ENGINE_LLM_KEY.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(BackendSpec spec);

  std::string id() const override { return "remote:" + spec_.model; }
  Tier tier() const override { return spec_.tier; }
  std::string complete(const Prompt& prompt) override;

 private:
  BackendSpec spec_;
  std::mutex mutex_;
  int in_flight_ = 0;
  std::chrono::steady_clock::time_point last_start_{};
  std::condition_variable_any slot_;
};

std::unique_ptr<Backend> make_backend(const BackendSpec& spec, const std::filesystem::path& base = {});

struct LlmResponse {
  std::string raw;
  json payload;
  std::optional<int> confidence;  // as stated, unvalidated
  std::string backend;
  std::string fingerprint;
  double latency = 0.0;  // seconds, all attempts
  int retry_count = 0;
  std::vector<std::string> attempts;
};

// Throws kInvalidPayload (or any Error) to request a repair re-ask.
using Validator = std::function<void(const json&)>;

// Payload of the first fenced ```json block (or a bare JSON document).
// Throws kUnparseable.
json extract_payload(const std::string& raw);

// Asks, then re-asks up to `retries` times with a repair prompt on parse or
// validation failure. Parse failures end in kUnparseable carrying every raw
// attempt; a validator error on the last attempt is rethrown as is.
LlmResponse complete(Backend& backend, const Prompt& prompt, const Validator& validate = {},
                     int retries = 2);

// Stated confidence when it is an integer in 1..5, else 1.
int confidence_of(const LlmResponse& response);

}  // namespace nlmilp::llm
