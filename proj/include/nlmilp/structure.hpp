#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlmilp/events.hpp"
#include "nlmilp/ir.hpp"
#include "nlmilp/llm.hpp"
#include "nlmilp/state.hpp"

namespace nlmilp::structure {

using nlohmann::json;

struct StructureTemplate {
  ir::AnnotationKind kind = ir::AnnotationKind::kSOS1;
  std::string definition;
  std::string example;   // before/after formulation
  std::string question;  // applicability question
  bool needs_binary = false;  // only clauses touching a binary are candidates
};

// {"structures": [{"kind", "candidates": "binary"|"any", "definition",
// "example", "question"}]}, one entry per kind.
class StructurePool {
 public:
  static StructurePool from_json(const json& j, const std::string& origin = "structures");
  static StructurePool load(const std::filesystem::path& path);
  const std::vector<StructureTemplate>& templates() const { return templates_; }

 private:
  std::vector<StructureTemplate> templates_;
};

const StructurePool& default_pool();

struct StructureProposal {
  ir::AnnotationKind kind = ir::AnnotationKind::kSOS1;
  std::vector<std::string> targets;  // clause ids the annotation replaces
  std::string annotation;            // markup; may carry plain constraints too
  int confidence = 1;
};

json proposal_to_json(const StructureProposal& p);

// Formulated clauses a template is asked about: constraints, restricted to
// those connected to a binary variable when the template needs one.
std::vector<std::string> candidate_clauses(const State& state, const StructureTemplate& tmpl);

// One query per template with a non-empty candidate group. A failing query
// skips that template with a warning event.
std::vector<StructureProposal> detect_structures(const State& state, const StructurePool& pool,
                                                 llm::Backend& backend, EventLog& log, int retries = 2,
                                                 const std::string& stage = "Formulate");

struct Verdict {
  bool accepted = false;
  std::string reason;
};

// Parses the annotation against the state and grounds it on the state's data,
// so every annotation invariant is checked on concrete columns. Also rejects
// SOS sets whose members are kept nonzero by their bounds.
Verdict verify_proposal(const State& state, const StructureProposal& proposal);

// Replaces the first target's formulation with the annotation, removes the
// other targets, and drops variables left with no clause.
void apply_proposal(State& state, const StructureProposal& proposal, EventLog* log = nullptr,
                    const std::string& stage = "Formulate");

enum class ProblemClass { kTSP, kSAT, kNetworkFlow, kRouting, kRegression, kNone };

std::string_view to_string(ProblemClass cls);
std::optional<ProblemClass> problem_class_from_string(std::string_view text);

struct ProblemClassAdvisory {
  ProblemClass cls = ProblemClass::kNone;
  std::string rationale;
  std::string solver;
  std::string warning;  // set when the query failed
};

json advisory_to_json(const ProblemClassAdvisory& a);

ProblemClassAdvisory classify_problem(const std::string& description, llm::Backend& backend, int retries = 2);

}  // namespace nlmilp::structure
