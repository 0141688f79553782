#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hworld/evaluation.hpp"
#include "hworld/observation.hpp"
#include "hworld/task_episode.hpp"

namespace hworld {

/// Parser/validator finding. `location` points at the offending element
/// ("/objects[3]", "line 12", ...).
struct Diagnostic {
    std::string severity = "error"; // "error" | "warning"
    std::string code;
    std::string message;
    std::string location;
};

std::string format_diagnostic(const Diagnostic& d);

/// Parsed-but-not-yet-validated scenario file contents.
struct ScenarioFile {
    std::string name;
    std::string start_area;
    std::vector<std::string> areas;
    std::map<std::string, std::string> anchors;
    std::vector<Node> objects;
    std::vector<Edge> relations;
    std::map<std::string, std::string> verb_map;
    std::map<std::string, std::vector<std::string>> state_vocabulary; // slot -> extra values
    std::vector<WorldRule> rules;
    std::vector<Skill> skills;
    std::vector<Task> tasks;
    std::vector<PlanTemplate> templates;
    nlohmann::ordered_json raw; // verbatim document, embedded into episode dirs
};

struct ParseResult {
    std::optional<ScenarioFile> scenario;
    std::vector<Diagnostic> diagnostics;
    bool ok() const { return scenario.has_value(); }
};

/// Parses scenario text. Syntax errors carry line positions; structural
/// conversion errors carry element paths. Returns a scenario only when no
/// error-severity diagnostic was produced.
ParseResult parse_scenario(const std::string& text);

/// One validation check outcome. `check_id` is stable; `detail` lists the
/// offending elements when the check fails.
struct CheckResult {
    std::string check_id;
    bool pass = true;
    std::string detail;
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    bool all_pass() const {
        for (const CheckResult& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

/// Static validation: GT action coverage, verb-normalization coverage,
/// storage open/close pairing, state-descriptor vocabulary, structural
/// anomalies (dangling refs, empty tasks, duplicates), goal label coverage.
ValidationReport validate_scenario(const ScenarioFile& sf);

/// One replayed ground-truth skill: snapshot references, the primitive
/// actions, the whole-graph delta, and execution metadata.
struct TransitionRecord {
    std::string skill_id;
    int order = 0; // position within the task's chain
    std::string pre_digest;
    AgentPhysState pre_agent;
    std::vector<PrimitiveAction> primitives;
    std::string post_digest;
    AgentPhysState post_agent;
    DeltaSet delta;
    std::string exec_meta; // "ok" for replayed GT records
};

nlohmann::ordered_json record_to_json(const TransitionRecord& r);
TransitionRecord record_from_json(const nlohmann::json& j);

/// Compilation product: the runnable episode, per-task ground truth, the
/// replayed transition records, and every snapshot the replay touched.
struct CompiledEpisode {
    Episode episode;
    WorldGraph init;
    AgentPhysState start_agent;
    std::vector<TaskGroundTruth> gt;                    // parallel to episode.tasks
    std::vector<std::vector<TransitionRecord>> records; // parallel to episode.tasks
    std::map<std::string, WorldGraph> snapshots;        // digest -> graph
    nlohmann::ordered_json scenario_doc;
};

/// Instantiates the world, replays every task's GT chain in order (shared
/// world state, no resets), verifies each task's goal at its chain end, and
/// derives the changed-slot sets. Throws ReplayFailure when a GT step fails
/// or a goal does not hold.
CompiledEpisode compile_episode(const ScenarioFile& sf);

/// Directory layout: manifest.json, snapshots/<digest>.json, records/<task_id>.json.
void write_episode_dir(const CompiledEpisode& ce, const std::string& dir);
CompiledEpisode load_episode_dir(const std::string& dir);

/// Mechanical dataset audit over a compiled episode. All rates in [0, 1].
struct AuditReport {
    double coverage = 0.0;            // authored GT steps present in records
    double hallucination_rate = 0.0;  // record symbols with no declaration
    double missing_key_state_rate = 0.0; // goal clauses unsatisfied at task end
    double replay_success_rate = 0.0; // records that re-execute to their post digest
    double temporal_error_rate = 0.0; // order/digest chain violations
    std::vector<std::string> notes;
};

AuditReport audit_compiled(const CompiledEpisode& ce);

} // namespace hworld
