#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hworld/world_graph.hpp"

namespace hworld {

/// Agent proprioception: where the agent stands and what each hand holds.
/// Lives alongside the hidden graph and is consulted by agent_at/hand
/// predicates. It is agent-visible (it is not part of the hidden state).
struct AgentPhysState {
    std::string current_area;
    std::optional<std::string> left_hand;
    std::optional<std::string> right_hand;

    bool holds(const std::string& id) const { return left_hand == id || right_hand == id; }
    bool has_empty_hand() const { return !left_hand || !right_hand; }

    bool operator==(const AgentPhysState&) const = default;
};

/// One atomic action as submitted by a planner: a verb plus up to two
/// arguments (an instance id, an area id, or a positional literal).
struct PrimitiveAction {
    std::string type;
    std::optional<std::string> object;
    std::optional<std::string> target;

    bool operator==(const PrimitiveAction&) const = default;
};

std::string to_string(const PrimitiveAction& a);
nlohmann::ordered_json action_to_json(const PrimitiveAction& a);
PrimitiveAction action_from_json(const nlohmann::json& j);

nlohmann::ordered_json agent_to_json(const AgentPhysState& a);
AgentPhysState agent_from_json(const nlohmann::json& j);

enum class PredicateKind { At, State, Contains, AgentAt, Hand };

/// Precondition atom. Argument strings use three spellings:
///   "?x"           variable, resolved through the rule binding
///   "@agent_area"  the agent's current area at check time
///   anything else  literal (instance id, area id, state value, "empty", ...)
/// Arities: at(o, area) | state(o, value) | state(o, key, value)
///          contains(container, o) | agent_at(area) | hand(left|right|any, content)
struct Predicate {
    PredicateKind kind = PredicateKind::At;
    std::vector<std::string> args;

    bool operator==(const Predicate&) const = default;
};

std::string to_string(PredicateKind k);
PredicateKind predicate_kind_from_string(const std::string& s);

using Binding = std::map<std::string, std::string>;

/// Renders "at(capsule_01, coffee_area)" style text: kind(arg, arg). Variables
/// still unbound render as their declared label so failure text stays readable.
std::string render_predicate(const Predicate& p);

/// How one action argument slot of a rule pattern matches.
struct PatternArg {
    enum class Match { Any, Label, Area, Literal };
    Match match = Match::Any;
    std::string value; // label or literal text (unused for Any/Area)
    std::string var;   // binding variable name, may be empty for Literal
};

struct ActionPattern {
    std::string type;
    std::optional<PatternArg> object;
    std::optional<PatternArg> target;
};

/// Template for a node created by an effect. `instance_id` may contain the
/// placeholder "{n}" which is replaced by the smallest positive integer that
/// keeps the id unique in the output graph. `location` accepts an area id,
/// "@agent_area", or "@held".
struct NodeTemplate {
    std::string instance_id;
    std::string label;
    NodeKind kind = NodeKind::Object;
    std::string location;
    std::optional<std::string> state;
    std::map<std::string, std::string> state_slots;
    std::optional<Amount> amount;
};

struct EdgeTemplate {
    EdgeKind kind = EdgeKind::Contains;
    std::string src; // "?var", a node-template id, or a literal id
    std::string dst;
};

/// slot is "state", "state.<key>", "amount" or "location".
/// For location the value may be an area id, "@agent_area" or "@held".
struct AttrUpdate {
    std::string node;
    std::string slot;
    std::string value;
};

struct AgentUpdate {
    enum class Kind {
        HandHoldingSet, // the hand currently holding `arg` is set to `value`
        EmptyHandSet,   // the first empty hand (left first) is set to `value`
        MoveTo          // agent moves to area `value`
    };
    Kind kind = Kind::MoveTo;
    std::string arg;
    std::string value;
};

struct EffectSet {
    std::vector<NodeTemplate> node_add;
    std::vector<std::string> node_remove; // "?var" or literal ids
    std::vector<EdgeTemplate> edge_add;
    std::vector<EdgeTemplate> edge_remove;
    std::vector<AttrUpdate> attr_updates;
    std::vector<AgentUpdate> agent_updates;
};

/// A world rule: ordered precondition conjunction plus delta-set effects.
/// `var_labels` declares labels for variables first bound inside the
/// preconditions (existential grounding); action-pattern variables are
/// declared on the pattern itself.
struct WorldRule {
    std::string rule_id;
    ActionPattern pattern;
    std::map<std::string, std::string> var_labels;
    std::vector<Predicate> preconditions;
    EffectSet effects;
    std::string source; // provenance annotation from the scenario file
};

enum class Outcome { Success, Fail, NoRule };

std::string to_string(Outcome o);
Outcome outcome_from_string(const std::string& s);

/// Result of executing one primitive. On Fail, `violated` is the earliest
/// violated precondition in authored order (grounded as far as binding
/// allowed) and `violated_text` its rendering. `action` echoes the submitted
/// action with its verb normalized. `diff_hint` is filled by the runtime in
/// diff-interface mode only.
struct Feedback {
    Outcome outcome = Outcome::Success;
    PrimitiveAction action;
    std::optional<Predicate> violated;
    std::string violated_text;
    std::vector<std::string> diff_hint;
};

nlohmann::ordered_json feedback_to_json(const Feedback& fb);
Feedback feedback_from_json(const nlohmann::json& j);

/// Ordered rule store plus the verb-normalization table.
class RuleBase {
public:
    void set_verb_map(std::map<std::string, std::string> m) { verb_map_ = std::move(m); }
    void add_rule(WorldRule r) { rules_.push_back(std::move(r)); }

    const std::vector<WorldRule>& rules() const { return rules_; }
    const std::map<std::string, std::string>& verb_map() const { return verb_map_; }

    /// Raw verb -> normalized action type, or nullopt for unknown vocabulary.
    /// Normalized types map to themselves.
    std::optional<std::string> normalize(const std::string& verb) const;

    struct MatchResult {
        const WorldRule* rule = nullptr;
        Binding binding;
    };

    /// First rule in load order whose pattern unifies with the (already
    /// normalized) action. The graph resolves instance labels; an argument
    /// that names no live node unifies provisionally with label patterns so
    /// that precondition checks report the state error.
    std::optional<MatchResult> match_rule(const PrimitiveAction& action, const WorldGraph& g) const;

private:
    std::vector<WorldRule> rules_;
    std::map<std::string, std::string> verb_map_;
};

struct PrecondResult {
    bool ok = false;
    Predicate violated;    // meaningful when !ok
    Binding binding;       // extended with existentially grounded variables
};

/// Evaluates the rule's preconditions in authored order against (g, agent),
/// extending the binding when a declared variable first appears. No
/// backtracking: the first satisfying candidate (lexicographic instance id)
/// is committed.
PrecondResult check_preconditions(const WorldRule& rule, const WorldGraph& g,
                                  const AgentPhysState& agent, Binding binding);

/// Applies the rule's effects to a copy of g, increments the step counter and
/// revalidates. `agent` is updated in place for agent_updates. Throws
/// EffectIntegrityError when an effect would break a graph invariant.
WorldGraph apply_rule(const WorldGraph& g, const WorldRule& rule, const Binding& binding,
                      AgentPhysState& agent);

struct ExecResult {
    WorldGraph graph;
    AgentPhysState agent;
    Feedback feedback;
};

/// Full step: normalize verb, match, check preconditions, apply. On Fail or
/// NoRule the returned graph and agent compare equal to the inputs (the step
/// counter does not advance). An EffectIntegrityError surfaces as Fail with
/// the error text, leaving the inputs untouched.
ExecResult execute_primitive(const WorldGraph& g, const AgentPhysState& agent,
                             const RuleBase& rules, const PrimitiveAction& action);

/// Grounded effect footprint: the concrete node ids, edges and attribute
/// writes `apply_rule` would perform, including the implied removal of edges
/// incident to removed nodes. Exposed for effect/diff consistency checks.
struct GroundedEffects {
    std::vector<Node> nodes_added;
    std::vector<std::string> nodes_removed;
    std::set<Edge> edges_added;
    std::set<Edge> edges_removed;
    std::vector<AttrUpdate> attr_writes; // slot values fully resolved
};

GroundedEffects ground_effects(const WorldGraph& g, const WorldRule& rule, const Binding& binding,
                               const AgentPhysState& agent);

} // namespace hworld
