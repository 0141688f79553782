#pragma once

#include <string>
#include <vector>

#include "hworld/world_graph.hpp"

namespace hworld {

/// Slot-level difference between two views of the same node.
struct AttrChange {
    std::string instance_id;
    std::string slot; // "state", "state.<key>", "amount", "location"
    std::string old_value;
    std::string new_value;

    bool operator==(const AttrChange&) const = default;
};

struct EdgeChange {
    Edge edge;
    bool added = true;

    bool operator==(const EdgeChange&) const = default;
};

/// Difference between two graph views. Invariants: an id appears in at most
/// one of appeared/disappeared, and changed entries have old != new.
struct DeltaSet {
    std::vector<AttrChange> changed;    // sorted by (instance_id, slot)
    std::vector<Node> appeared;         // sorted by instance_id, full nodes
    std::vector<std::string> disappeared; // sorted ids
    std::vector<EdgeChange> edge_changes; // sorted by (edge, added)

    bool empty() const {
        return changed.empty() && appeared.empty() && disappeared.empty() && edge_changes.empty();
    }
    bool operator==(const DeltaSet&) const = default;
};

nlohmann::ordered_json delta_to_json(const DeltaSet& d);
DeltaSet delta_from_json(const nlohmann::json& j);

/// What one glance at a functional area yields: the episode-start anchor
/// image reference, the objects that image showed (the step-0 local view,
/// which is how a newly visited area's contents become known), and the
/// difference between that step-0 view and the area now. The diff baseline is
/// always episode start, never the previous step.
struct Observation {
    std::string area;
    std::string image_ref;
    int step = 0;
    std::vector<Node> init_view; // step-0 local subgraph nodes, sorted by id
    DeltaSet delta;
    std::string delta_text; // render_diff(delta)
};

nlohmann::ordered_json observation_to_json(const Observation& o);
Observation observation_from_json(const nlohmann::json& j);
std::string observation_digest(const Observation& o);

/// Truthful privileged glance at one area, closed containers included (it
/// models an anchor image of the opened storage). Produced only by the
/// runtime's visual oracle.
struct VisualReport {
    struct Entry {
        std::string instance_id;
        std::string label;
        std::string area;
        std::optional<std::string> container; // containing object, if any
        std::optional<std::string> state;
        std::map<std::string, std::string> state_slots;
        std::optional<Amount> amount;
    };
    std::string area;
    std::vector<Entry> entries; // sorted by instance_id
};

nlohmann::ordered_json report_to_json(const VisualReport& r);

/// Nodes located in `area` plus the area node itself, minus the contents of
/// closed containers (transitively), with the edges among the kept nodes.
/// Throws UnknownArea for an id that is not an area.
WorldGraph local_subgraph(const WorldGraph& g, const std::string& area);

/// Area-scoped diff: compares local_subgraph(a, area) with local_subgraph(b, area).
DeltaSet graph_diff(const WorldGraph& a, const WorldGraph& b, const std::string& area);

/// Whole-graph diff (transition records and changed-slot derivation).
DeltaSet graph_diff_full(const WorldGraph& a, const WorldGraph& b);

/// Applies a delta to a view (typically the episode-start local subgraph),
/// reconstructing the later view exactly: remove disappeared, add appeared,
/// replay edge changes, then attribute changes.
WorldGraph apply_delta(const WorldGraph& base, const DeltaSet& d);

/// Deterministic text rendering. Line templates, one per entry:
///   <id>: <slot> <old> -> <new>
///   appeared: <id> (<label>) at <area>
///   disappeared: <id>
///   edge: <src> <kind> <dst> added|removed
/// Sections in that order, each sorted; an empty delta renders the single
/// line "no changes since episode start".
std::string render_diff(const DeltaSet& d);

/// Full-state rendering used by the flow interface: one line per node
///   <id> (<label>): <slot>=<value>, ...
/// followed by edge lines, or "area <id> is empty" for a bare area.
std::string render_state(const WorldGraph& view);

/// Builds the observation of `area` at the current step: anchor image ref,
/// step-0 view, and the diff of now against episode start.
Observation observe(const WorldGraph& g_init, const WorldGraph& g_now, const std::string& area,
                    const std::string& image_ref);

} // namespace hworld
