#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hworld/rule_engine.hpp"
#include "hworld/task_episode.hpp"
#include "hworld/world_graph.hpp"

namespace hworld {

/// Sentinel for a slot with no value on one side of a comparison.
inline constexpr const char* kAbsentSlot = "(absent)";

/// Comparison attributes: "location", "containment", "support", "state",
/// "state.<key>", "amount". Containment/support collapse the incident edge
/// partners into one sorted "+"-joined string so edge multiplicity changes
/// surface as slot changes.
std::string slot_value(const WorldGraph& g, const std::string& object, const std::string& attr);

/// One slot whose value differs between a task's initial and final GT states.
struct ChangedSlot {
    std::string object;
    std::string attr;
    std::string init_value;
    std::string gt_value;
};

std::vector<ChangedSlot> compute_changed_slots(const WorldGraph& pre, const WorldGraph& post);

nlohmann::ordered_json changed_slot_to_json(const ChangedSlot& c);
ChangedSlot changed_slot_from_json(const nlohmann::json& j);

/// Per-task ground truth frozen at compile time.
struct TaskGroundTruth {
    WorldGraph pre;
    AgentPhysState pre_agent;
    WorldGraph gt_end;
    AgentPhysState gt_end_agent;
    std::vector<PrimitiveAction> gt_primitives;
    std::vector<ChangedSlot> changed;
    int budget = 0; // primitive-step budget for the predicted run
};

/// Edge-case conventions, overridable without recompiling callers.
struct ScoreConfig {
    double both_empty_f1 = 1.0;   // neither side predicted/required any action
    double one_empty_f1 = 0.0;    // exactly one side empty
    double empty_changed_wsr = 1.0;  // task whose GT changes nothing
    double empty_key_tcr = 1.0;      // task with no key actions
    double empty_attempt_validity = 1.0; // run that attempted nothing
};

/// Multiset F1 over action types (order- and argument-insensitive).
double action_f1(const std::vector<PrimitiveAction>& predicted,
                 const std::vector<PrimitiveAction>& gt,
                 const ScoreConfig& cfg = {});

struct ReplayOutcome {
    WorldGraph end;
    AgentPhysState end_agent;
    int attempted = 0;
    int valid = 0;
    std::vector<PrimitiveAction> valid_actions;
};

/// Replays predicted primitives from the GT task pre-state under the rule
/// base. Invalid actions (Fail / NoRule) are skipped; they leave no trace on
/// the world by construction.
ReplayOutcome replay_predicted(const RuleBase& rules, const TaskGroundTruth& gt,
                               const std::vector<PrimitiveAction>& predicted);

struct TaskScore {
    std::string task_id;
    double f1 = 0.0;
    double wsr = 0.0;
    double tsr = 0.0;
    double tcr = 0.0;
    double validity = 0.0;
    int attempted = 0;
    int valid = 0;
    int budget = 0;
};

/// Scores one task from its predicted primitive sequence. WSR compares the
/// replayed end state against the GT end state over the task's changed-slot
/// set; TSR checks the goal on the replayed end state within budget; TCR is
/// the order-insensitive key-action completion rate over valid actions.
TaskScore score_task(const RuleBase& rules, const Task& task, const TaskGroundTruth& gt,
                     const std::vector<PrimitiveAction>& predicted,
                     const std::vector<std::string>& known_labels,
                     const ScoreConfig& cfg = {});

struct ScoreCard {
    std::vector<TaskScore> tasks;
    double mean_f1 = 0.0;
    double mean_wsr = 0.0;
    double goal_tsr = 0.0;    // per-task success rate
    double episode_tsr = 0.0; // 1.0 iff every task succeeded
    double mean_tcr = 0.0;
    double mean_validity = 0.0;
};

ScoreCard summarize(std::vector<TaskScore> tasks);
nlohmann::ordered_json scorecard_to_json(const ScoreCard& sc);
std::string scorecard_to_tsv(const ScoreCard& sc);

/// Mean metric per task position across episodes of equal length. Ragged
/// inputs are truncated to the shortest episode.
std::vector<double> aggregate_long_horizon(const std::vector<std::vector<double>>& per_episode);

struct BootstrapResult {
    double delta = 0.0; // mean(a) - mean(b)
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double p_value = 1.0;
    int resamples = 0;
};

/// Paired bootstrap over per-task metric pairs. Percentile CI on the
/// resampled mean difference; two-sided sign-flip p-value. Throws
/// LengthMismatch when the vectors differ in size.
BootstrapResult paired_bootstrap(const std::vector<double>& a, const std::vector<double>& b,
                                 int resamples, uint64_t seed, double ci = 0.95);

} // namespace hworld
