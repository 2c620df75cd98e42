#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlmilp/events.hpp"
#include "nlmilp/llm.hpp"
#include "nlmilp/state.hpp"

namespace nlmilp::ec {

using nlohmann::json;

enum class ReflectStage { kParamExtraction, kClauseExtraction, kClauseModeling, kVariableCheck };

std::string_view to_string(ReflectStage stage);
ReflectStage reflect_stage_from_string(std::string_view text);

// What a reflective prompt is asked about.
enum class ReflectTarget { kParameter, kConstraint, kClause, kClauseList, kVariable };

struct ReflectivePrompt {
  std::string id;
  ReflectStage stage = ReflectStage::kParamExtraction;
  ReflectTarget target = ReflectTarget::kParameter;
  std::vector<std::string> actions;  // allowed revise actions
  llm::PromptTemplate tmpl;          // tmpl.name == id
};

// {"prompts": [{"id", "stage", "target", "actions", "body"}]}, applied in
// file order.
class ReflectionRegistry {
 public:
  static ReflectionRegistry from_json(const json& j, const std::string& origin = "reflection");
  static ReflectionRegistry load(const std::filesystem::path& path);

  const std::vector<ReflectivePrompt>& prompts() const { return prompts_; }
  std::vector<const ReflectivePrompt*> for_stage(ReflectStage stage) const;

 private:
  std::vector<ReflectivePrompt> prompts_;
};

const ReflectionRegistry& default_reflection();

struct ReflectOptions {
  int passes = 1;
  int retries = 2;
  std::string stage_tag;  // event log stage; defaults to the reflect stage name
};

// Runs every registered prompt of `stage` over the applicable items and
// applies revise verdicts. Returns the number of changes made.
int reflect(State& state, ReflectStage stage, const ReflectionRegistry& registry, llm::Backend& backend,
            EventLog& log, const ReflectOptions& options = {});

enum class Route { kUser, kStrongBackend, kOff };

std::string_view to_string(Route route);
Route route_from_string(std::string_view text);

struct EscalationPolicy {
  int threshold = 4;  // escalate when confidence < threshold
  Route route = Route::kOff;
};

enum class FeedbackAction { kKeep, kRemove, kModify };
enum class Author { kHuman, kStrongBackend };

std::string_view to_string(FeedbackAction action);
FeedbackAction feedback_action_from_string(std::string_view text);
std::string_view to_string(Author author);

struct FeedbackDecision {
  std::string target;  // clause id or symbol
  FeedbackAction action = FeedbackAction::kKeep;
  json payload = json::object();
  Author author = Author::kHuman;
};

// A low-confidence item waiting for a human.
struct PendingReview {
  std::string id;
  std::string target;
  std::string stage;
  int confidence = 1;
  std::string content;
  std::string response;
};

json pending_review_to_json(const PendingReview& r);
PendingReview pending_review_from_json(const json& j, const std::string& path);

struct EscalationItem {
  std::string target;
  std::string stage;
  std::string description;  // problem text for the reviewer
  std::string content;      // what is being judged
  std::string response;     // raw model reply that produced it
};

struct EscalationOutcome {
  FeedbackDecision decision;           // Keep unless the strong backend said otherwise
  bool escalated = false;              // confidence < threshold
  bool queried = false;                // strong backend was called
  std::optional<PendingReview> review; // route User, or strong backend failure
};

bool should_escalate(std::optional<int> confidence, const EscalationPolicy& policy);

EscalationOutcome escalate(const EscalationItem& item, std::optional<int> confidence,
                           const EscalationPolicy& policy, llm::Backend* strong, int retries = 2);

// Checks payload shape against the target's kind. Throws kUnknownTarget or
// kInvalidPayload.
void validate_feedback(const State& state, const FeedbackDecision& decision);

// Keep: nothing. Remove: item and its edges go; clauses that used a removed
// symbol drop back to Extracted. Modify: payload replaces fields and every
// downstream status is reset (a new description -> Extracted, a new
// formulation -> Formulated, new code -> Coded; a changed symbol sends its
// Coded clauses back to Formulated).
void apply_feedback(State& state, const FeedbackDecision& decision, EventLog* log = nullptr,
                    const std::string& stage = "Review");

}  // namespace nlmilp::ec
