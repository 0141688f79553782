#pragma once

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hworld/errors.hpp"

namespace hworld {

enum class NodeKind { Area, Object, Substance, Product };
enum class Amount { Full, Partial, Empty };
enum class EdgeKind { LocatedIn, Contains, Supports, Functional };

std::string to_string(NodeKind k);
std::string to_string(Amount a);
std::string to_string(EdgeKind k);
NodeKind node_kind_from_string(const std::string& s);
Amount amount_from_string(const std::string& s);
EdgeKind edge_kind_from_string(const std::string& s);

/// Directed typed edge. Ordering is lexicographic over (src, kind, dst) so a
/// std::set of edges iterates in canonical order.
struct Edge {
    std::string src;
    EdgeKind kind = EdgeKind::Contains;
    std::string dst;

    auto operator<=>(const Edge&) const = default;
};

/// One attributed node of the hidden world graph.
///
/// `location` names the area an object sits in. It is absent for area nodes
/// and for objects currently held by the agent (a held instance is nowhere in
/// the spatial graph until a rule places it again).
/// `state` is the primary symbolic state ("open", "whole", ...); additional
/// named facets live in `state_slots` and serialize as "state.<key>".
struct Node {
    std::string instance_id;
    std::string label;
    NodeKind kind = NodeKind::Object;
    std::optional<std::string> location;
    std::optional<std::string> state;
    std::map<std::string, std::string> state_slots;
    std::optional<Amount> amount;

    bool operator==(const Node&) const = default;
};

/// Everything needed to build the step-0 world: area ids in presentation
/// order, fully specified nodes, and initial contains/supports edges.
struct ScenarioInit {
    std::vector<std::string> areas;
    std::vector<Node> nodes;
    std::vector<Edge> edges;
};

/// Immutable-by-convention world snapshot. The only mutation path is rule
/// application (rule_engine holds friend access); everything public is const.
class WorldGraph {
public:
    WorldGraph() = default;

    /// Builds and validates the step-0 graph. Throws DuplicateInstanceId,
    /// UnknownAreaReference or ContainmentCycle on a malformed init.
    static WorldGraph instantiate(const ScenarioInit& init);

    const std::map<std::string, Node>& nodes() const { return nodes_; }
    const std::set<Edge>& edges() const { return edges_; }
    const std::vector<std::string>& areas() const { return areas_; }
    int step() const { return step_; }

    /// Null when the id does not name a live node.
    const Node* find(const std::string& id) const;
    bool is_area(const std::string& id) const;
    bool has_edge(const std::string& src, EdgeKind kind, const std::string& dst) const;

    /// Ids of containers with a contains edge onto `id`, sorted.
    std::vector<std::string> containers_of(const std::string& id) const;
    /// Ids of nodes with a supports edge onto `id`, sorted.
    std::vector<std::string> supporters_of(const std::string& id) const;
    /// Ids contained (directly) in `id`, sorted.
    std::vector<std::string> contents_of(const std::string& id) const;

    bool operator==(const WorldGraph&) const = default;

private:
    friend class EffectApplier;
    friend WorldGraph parse_graph(const nlohmann::json& doc);
    friend WorldGraph subgraph_from_parts(std::vector<std::string> areas,
                                          std::map<std::string, Node> nodes,
                                          std::set<Edge> edges, int step);

    std::map<std::string, Node> nodes_; // keyed by instance_id, canonical order
    std::set<Edge> edges_;              // contains/supports/functional only
    std::vector<std::string> areas_;    // load order from the scenario
    int step_ = 0;
};

/// Assembles a graph view from parts without scenario validation. Internal
/// plumbing for local subgraphs and delta application; not a mutation path
/// for live world state.
WorldGraph subgraph_from_parts(std::vector<std::string> areas, std::map<std::string, Node> nodes,
                               std::set<Edge> edges, int step);

/// Canonical node serialization: fixed field order, state facets flattened to
/// "state.<key>" entries, optional fields omitted when absent.
nlohmann::ordered_json node_to_json(const Node& n);
Node node_from_json(const nlohmann::json& j);

/// Canonical one-document serialization (areas, nodes, edges arrays plus the
/// step counter). Key order and array order are stable, so equal graphs dump
/// to identical bytes.
nlohmann::ordered_json serialize_graph(const WorldGraph& g);

/// Inverse of serialize_graph. Validates the same invariants as instantiate.
WorldGraph parse_graph(const nlohmann::json& doc);

/// 16-hex-digit FNV-1a digest over the canonicalized areas+nodes+edges.
/// The step counter is deliberately excluded: two graphs with identical
/// content hash equal regardless of how many rules produced them.
std::string snapshot_hash(const WorldGraph& g);

/// FNV-1a 64 over an arbitrary string, formatted as 16 hex digits. Shared by
/// the snapshot, observation and belief digests.
std::string fnv1a_hex(const std::string& payload);

/// Throws if structural invariants are broken (unique ids are implicit in the
/// node map; checks locations, edge endpoints, containment acyclicity, areas).
void validate_graph(const WorldGraph& g);

} // namespace hworld
