#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hworld/rule_engine.hpp"

namespace hworld {

/// Binding requirement for one skill role: instances must carry this label;
/// optional facet constraints narrow the candidates further (keys as in
/// belief states: "state", bare facet names, "amount").
struct RoleSpec {
    std::string label;
    std::map<std::string, std::string> facets;
};

/// Action template inside a skill: object/target are "?role" references or
/// literal strings (area ids, positional literals).
struct ActionTemplate {
    std::string type;
    std::optional<std::string> object;
    std::optional<std::string> target;
};

/// A skill is a short context-bracketed action group: optional preparatory
/// actions, the center action that names the skill's purpose, and optional
/// wind-down actions.
struct Skill {
    std::string skill_id;
    std::map<std::string, RoleSpec> roles;
    std::vector<ActionTemplate> pre;
    ActionTemplate center;
    std::vector<ActionTemplate> post;
    std::string source; // provenance annotation from the scenario file
};

/// Instantiates pre ++ [center] ++ post with the given role binding.
/// Throws UnboundVariable when a "?role" reference has no binding.
std::vector<PrimitiveAction> expand_skill(const Skill& skill, const Binding& binding);

/// One goal conjunct. Selectors name a concrete instance or, when
/// `*_is_label` is set, any instance with that label (existential).
/// Slot clauses compare "state", "state.<key>", "amount", "location", or the
/// reserved pseudo-slot "exists" ("true"/"false").
struct GoalClause {
    enum class Kind { Slot, Relation };
    Kind kind = Kind::Slot;

    // Kind::Slot
    std::string selector;
    bool selector_is_label = false;
    std::string slot;
    std::string value;

    // Kind::Relation (contains / supports)
    EdgeKind relation = EdgeKind::Contains;
    std::string container;
    bool container_is_label = false;
    std::string object;
    bool object_is_label = false;
};

using GoalPredicate = std::vector<GoalClause>;

std::string render_goal_clause(const GoalClause& c);

/// Slot clauses: {"object"|"label", "slot", "value"}; relation clauses:
/// {"relation", "container"|"container_label", "object"|"object_label"}.
nlohmann::ordered_json goal_clause_to_json(const GoalClause& c);
GoalClause goal_clause_from_json(const nlohmann::json& j);

/// True iff every clause holds on g. Label selectors are existential and
/// evaluate false (not an error) when no instance matches.
bool check_goal(const GoalPredicate& goal, const WorldGraph& g);

/// As check_goal, but first verifies every label selector against the
/// scenario vocabulary; throws UnknownLabel for a label that can never occur.
bool check_goal(const GoalPredicate& goal, const WorldGraph& g,
                const std::set<std::string>& known_labels);

/// Reference to one ground-truth skill invocation with its authored binding.
struct GtSkillRef {
    std::string skill_id;
    Binding binding;
};

struct Task {
    std::string task_id;
    std::string instruction;
    GoalPredicate goal;
    std::vector<GtSkillRef> gt_skills;
    /// (action type, object label) pairs counted by task completion; defaults
    /// to the center actions of the GT skill sequence when unset in the file.
    std::vector<std::pair<std::string, std::string>> key_actions;
};

/// Heuristic planner table entry: when every pattern matches some goal
/// clause, the plan is the listed skill sequence.
struct PlanTemplate {
    GoalPredicate match;
    std::vector<std::string> skills;
};

/// A fully compiled scenario: the step-0 world spec, the rule base, the skill
/// library, the ordered tasks (sharing world state, never reset), and the
/// planner templates. Produced by the scenario compiler.
struct Episode {
    std::string episode_id;
    ScenarioInit init;
    std::string start_area;
    std::map<std::string, std::string> anchors; // area -> image ref
    RuleBase rules;
    std::map<std::string, Skill> skills;
    std::vector<Task> tasks;
    std::vector<PlanTemplate> templates;
    std::set<std::string> known_labels; // object labels incl. rule-created ones
};

} // namespace hworld
