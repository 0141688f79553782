#pragma once

#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hworld/observation.hpp"
#include "hworld/rule_engine.hpp"

namespace hworld {

/// Attribute value as the agent believes it. Hypothesis values (negations
/// learned from failure feedback, spelled "!<value>") are tagged so they are
/// always distinguishable from observed values.
struct SlotValue {
    std::string value;
    bool hypothesis = false;

    bool operator==(const SlotValue&) const = default;
};

enum class BeliefSource { InitialObservation, StateChange, ActionFeedback, Hypothesis, VlmExploration };

std::string to_string(BeliefSource s);
BeliefSource belief_source_from_string(const std::string& s);

struct BeliefMeta {
    BeliefSource source = BeliefSource::InitialObservation;
    double confidence = 1.0;
    std::optional<int> last_observed_step;

    bool operator==(const BeliefMeta&) const = default;
};

/// One believed object. `states` keys are facet names: "state" for the
/// primary state, bare facet names for state.<key> slots, "amount".
struct BeliefNode {
    std::string instance_id;
    std::string label;
    std::optional<SlotValue> position;
    std::map<std::string, SlotValue> states;
    BeliefMeta meta;

    bool operator==(const BeliefNode&) const = default;
};

struct BeliefGraph {
    std::map<std::string, BeliefNode> nodes;
    std::set<Edge> edges;
    int current_step = 0;

    bool operator==(const BeliefGraph&) const = default;
};

/// Tunables for belief maintenance. Defaults follow the benchmark protocol;
/// every value is config-exposed (CLI flags / environment overrides).
struct BeliefParams {
    double rho_absent = 0.5;  // confidence after an expected object is missing
    double rho_fail = 0.3;    // confidence of a failure-derived hypothesis
    int delta_stale = 10;     // steps without observation before a node is stale
    double vlm_confidence = 0.85; // confidence stamped on visual-oracle reports
};

/// Builds the step-0 belief from the first observation: one node per visible
/// object with meta (initial_observation, 1.0, 0).
BeliefGraph init_from_observation(const Observation& obs, const BeliefParams& params);

/// Two-pass update. Pass 1 integrates the observation: objects shown by the
/// area's episode-start view enter belief if unknown, currently visible known
/// objects get their last_observed_step refreshed, then delta entries apply
/// (changes overwrite attributes at confidence 1.0, appearances add nodes,
/// disappearances drop confidence to rho_absent but never delete). Pass 2
/// integrates feedback: FAIL rewrites the contradicted attribute as a
/// hypothesis-tagged negation at rho_fail; SUCCESS raises the confidence of
/// the nodes the action exercised to 1.0. Unmappable failure predicates leave
/// a hypothesis marker in states["feedback"] instead of crashing.
/// Throws SimError("KeyError", ...) for a delta naming an unknown instance
/// outside the appeared list.
BeliefGraph update(BeliefGraph b, const Observation& obs, const Feedback* fb,
                   const BeliefParams& params);

/// Ids whose last observation is more than delta_stale steps old (strict),
/// sorted. A node never stamped with a step counts as stale.
std::vector<std::string> flag_stale(const BeliefGraph& b, int delta_stale);

/// Merges a visual-oracle report: every entry becomes/overwrites a node with
/// meta (vlm_exploration, params.vlm_confidence, step); containment edges from
/// the report are added.
BeliefGraph integrate_visual_report(BeliefGraph b, const VisualReport& report,
                                    const BeliefParams& params, int step);

enum class MemoryMode { Full, None, Bounded };

std::string to_string(MemoryMode m);
MemoryMode memory_mode_from_string(const std::string& s);

struct ForgettingConfig {
    MemoryMode mode = MemoryMode::Full;
    int cap = 20;       // Bounded: max retained nodes before eviction
    double rate = 0.1;  // Bounded: per-node drop probability outside the current area
};

/// Task-boundary forgetting. FULL is a no-op. NONE keeps only nodes whose
/// observed position is the current area. BOUNDED evicts lowest-confidence,
/// oldest nodes above the cap, then independently drops each remaining node
/// not in the current area with probability `rate` using the run's seeded RNG.
BeliefGraph apply_forgetting(BeliefGraph b, const ForgettingConfig& cfg,
                             const std::string& current_area, std::mt19937_64& rng);

nlohmann::ordered_json serialize_belief(const BeliefGraph& b);
BeliefGraph parse_belief(const nlohmann::json& j);
std::string belief_digest(const BeliefGraph& b);

} // namespace hworld
