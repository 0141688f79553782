#pragma once

#include <memory>
#include <random>

#include "hworld/belief.hpp"
#include "hworld/scenario.hpp"

namespace hworld {

/// One plan entry: a skill id plus whatever role bindings the planner chose
/// to fix. Roles left out are bound by the runtime against the belief graph.
struct PlanStep {
    std::string skill_id;
    Binding binding;
};

/// Everything a planner may see. Built exclusively from observations,
/// feedback, oracle reports (already merged into the belief) and the public
/// task description; never from the hidden graph.
struct PlanRequest {
    std::string task_id;
    std::string instruction;
    GoalPredicate goal;
    Observation observation;
    BeliefGraph belief;
    std::vector<std::string> completed; // skill ids finished this task
    std::string failure_text;           // empty on the initial plan
    std::vector<std::string> diff_hint; // diff interface: unsatisfied goal clauses
    int replans_used = 0;
};

struct PlanResponse {
    std::vector<PlanStep> steps;
    bool give_up = false;
};

struct RepairRequest {
    PrimitiveAction failed;
    Feedback feedback;
    BeliefGraph belief;
    int repairs_used = 0;
};

struct RepairResponse {
    std::optional<PrimitiveAction> correction;
};

class PlannerInterface {
public:
    virtual ~PlannerInterface() = default;
    virtual PlanResponse plan(const PlanRequest& req) = 0;
    virtual RepairResponse repair(const RepairRequest& req) = 0;

    /// Push notifications. The remote adapter mirrors these onto the wire;
    /// in-process planners ignore them.
    virtual void on_task_context(const Task&, const AgentPhysState&) {}
    virtual void on_observation(const Observation&) {}
    virtual void on_feedback(const Feedback&) {}
};

/// Template-table planner. Picks the first heuristic template whose match
/// clauses all pattern-match the task goal ("*" selector/value wildcards),
/// returns its skill list minus the completed prefix, and repairs failures
/// with a fixed policy: position violations route to the believed position,
/// open/closed violations toggle the container, empty-hand violations pick
/// the missing object up.
class HeuristicPlanner : public PlannerInterface {
public:
    explicit HeuristicPlanner(const Episode& ep) : episode_(&ep) {}
    PlanResponse plan(const PlanRequest& req) override;
    RepairResponse repair(const RepairRequest& req) override;

private:
    const Episode* episode_;
};

/// Fixed-script planner for tests: per task, one canned plan (reissued with
/// the completed prefix removed on replans) and no repair suggestions.
class ScriptedPlanner : public PlannerInterface {
public:
    void set_plan(const std::string& task_id, std::vector<PlanStep> steps) {
        plans_[task_id] = std::move(steps);
    }
    PlanResponse plan(const PlanRequest& req) override;
    RepairResponse repair(const RepairRequest& req) override;

private:
    std::map<std::string, std::vector<PlanStep>> plans_;
};

struct RunConfig {
    std::string interface = "flow"; // "flow" | "diff"
    ForgettingConfig forgetting;
    BeliefParams belief;
    uint64_t seed = 0;
    int step_budget_factor = 4; // budget = factor * |GT primitive chain|
    int replan_budget = 5;
    int repair_cap = 3;         // repair attempts per failed action
    double oracle_trigger = 0.6; // query below this confidence, refuse at or above
};

struct RunCounters {
    int steps = 0;
    int valid = 0;
    int replans = 0;
    int repairs = 0;
    int oracle_queries = 0;
};

struct TaskRunLog {
    std::string task_id;
    std::string status; // "goal" | "budget" | "replans_exhausted" | "gave_up" | "planner_error"
    bool goal_reached = false;
    RunCounters counters;
    std::vector<PrimitiveAction> attempted; // every submitted primitive, in order
    std::vector<nlohmann::ordered_json> events;
};

/// One JSON object per line, exactly the order events were logged. Two runs
/// that behaved identically serialize identically.
std::string log_to_jsonl(const TaskRunLog& log);

struct EpisodeRunLog {
    std::string episode_id;
    std::vector<TaskRunLog> tasks;
    BeliefGraph final_belief;
    WorldGraph final_world;
};

/// Ranks belief candidates for a role: the agent's hands first, then belief
/// nodes with the role's label and facets, observed positions before
/// hypothesis ones, then confidence, recency, id. Returns nullopt when no
/// candidate exists.
std::optional<std::string> bind_instance(const BeliefGraph& belief, const AgentPhysState& agent,
                                         const RoleSpec& spec);

/// Truthful privileged glance used by the runtime when binding fails:
/// everything located in `area`, closed containers included.
VisualReport visual_oracle(const WorldGraph& g, const std::string& area);

/// Runs one task against the live world. The world, agent and belief evolve
/// in place; the returned log carries every submitted primitive for scoring.
TaskRunLog run_task(WorldGraph& world, AgentPhysState& agent, BeliefGraph& belief,
                    const CompiledEpisode& ce, size_t task_index, PlannerInterface& planner,
                    const RunConfig& cfg);

/// Runs every task in order over the shared world (no resets), applying the
/// configured forgetting mode at task boundaries.
EpisodeRunLog run_episode(const CompiledEpisode& ce, PlannerInterface& planner,
                          const RunConfig& cfg);

/// Scores an episode run: per-task predicted primitives are replayed from the
/// task's GT pre-state.
ScoreCard score_run(const CompiledEpisode& ce, const EpisodeRunLog& run,
                    const ScoreConfig& cfg = {});

} // namespace hworld
