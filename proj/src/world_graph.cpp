#include "hworld/world_graph.hpp"

#include <algorithm>
#include <functional>

namespace hworld {

std::string to_string(NodeKind k) {
    switch (k) {
    case NodeKind::Area: return "area";
    case NodeKind::Object: return "object";
    case NodeKind::Substance: return "substance";
    case NodeKind::Product: return "product";
    }
    return "object";
}

std::string to_string(Amount a) {
    switch (a) {
    case Amount::Full: return "full";
    case Amount::Partial: return "partial";
    case Amount::Empty: return "empty";
    }
    return "full";
}

std::string to_string(EdgeKind k) {
    switch (k) {
    case EdgeKind::LocatedIn: return "located_in";
    case EdgeKind::Contains: return "contains";
    case EdgeKind::Supports: return "supports";
    case EdgeKind::Functional: return "functional";
    }
    return "contains";
}

NodeKind node_kind_from_string(const std::string& s) {
    if (s == "area") return NodeKind::Area;
    if (s == "object") return NodeKind::Object;
    if (s == "substance") return NodeKind::Substance;
    if (s == "product") return NodeKind::Product;
    throw FormatError("unknown node kind '" + s + "'");
}

Amount amount_from_string(const std::string& s) {
    if (s == "full") return Amount::Full;
    if (s == "partial") return Amount::Partial;
    if (s == "empty") return Amount::Empty;
    throw FormatError("unknown amount '" + s + "' (expected full|partial|empty)");
}

EdgeKind edge_kind_from_string(const std::string& s) {
    if (s == "located_in") return EdgeKind::LocatedIn;
    if (s == "contains") return EdgeKind::Contains;
    if (s == "supports") return EdgeKind::Supports;
    if (s == "functional") return EdgeKind::Functional;
    throw FormatError("unknown edge kind '" + s + "'");
}

const Node* WorldGraph::find(const std::string& id) const {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : &it->second;
}

bool WorldGraph::is_area(const std::string& id) const {
    const Node* n = find(id);
    return n != nullptr && n->kind == NodeKind::Area;
}

bool WorldGraph::has_edge(const std::string& src, EdgeKind kind, const std::string& dst) const {
    return edges_.count(Edge{src, kind, dst}) > 0;
}

std::vector<std::string> WorldGraph::containers_of(const std::string& id) const {
    std::vector<std::string> out;
    for (const Edge& e : edges_)
        if (e.kind == EdgeKind::Contains && e.dst == id) out.push_back(e.src);
    return out;
}

std::vector<std::string> WorldGraph::supporters_of(const std::string& id) const {
    std::vector<std::string> out;
    for (const Edge& e : edges_)
        if (e.kind == EdgeKind::Supports && e.dst == id) out.push_back(e.src);
    return out;
}

std::vector<std::string> WorldGraph::contents_of(const std::string& id) const {
    std::vector<std::string> out;
    for (const Edge& e : edges_)
        if (e.kind == EdgeKind::Contains && e.src == id) out.push_back(e.dst);
    return out;
}

WorldGraph WorldGraph::instantiate(const ScenarioInit& init) {
    WorldGraph g;
    g.areas_ = init.areas;
    for (const std::string& area : init.areas) {
        Node n;
        n.instance_id = area;
        n.label = area;
        n.kind = NodeKind::Area;
        if (!g.nodes_.emplace(area, std::move(n)).second)
            throw DuplicateInstanceId("area '" + area + "' declared twice");
    }
    for (const Node& n : init.nodes) {
        if (n.kind == NodeKind::Area)
            throw FormatError("area nodes are derived from the areas list, got node '" +
                              n.instance_id + "' with kind area");
        if (!g.nodes_.emplace(n.instance_id, n).second)
            throw DuplicateInstanceId("instance '" + n.instance_id + "' declared twice");
    }
    for (const Edge& e : init.edges) {
        if (e.kind == EdgeKind::LocatedIn)
            throw FormatError("located_in is carried by the location attribute, not stored edges");
        g.edges_.insert(e);
    }
    validate_graph(g);
    return g;
}

void validate_graph(const WorldGraph& g) {
    std::set<std::string> area_set(g.areas().begin(), g.areas().end());
    if (area_set.size() != g.areas().size())
        throw DuplicateInstanceId("duplicate id in areas list");

    for (const auto& [id, n] : g.nodes()) {
        if (id != n.instance_id)
            throw FormatError("node map key '" + id + "' differs from instance_id");
        if (n.kind == NodeKind::Area) {
            if (!area_set.count(id))
                throw UnknownAreaReference("area node '" + id + "' missing from areas list");
            if (n.location)
                throw FormatError("area '" + id + "' must not carry a location");
        } else if (n.location && !area_set.count(*n.location)) {
            throw UnknownAreaReference("node '" + id + "' located in unknown area '" +
                                       *n.location + "'");
        }
    }
    for (const std::string& area : g.areas())
        if (!g.nodes().count(area))
            throw UnknownAreaReference("areas list names '" + area + "' but no node exists");

    for (const Edge& e : g.edges()) {
        if (!g.nodes().count(e.src) || !g.nodes().count(e.dst))
            throw FormatError("edge " + e.src + " -" + to_string(e.kind) + "-> " + e.dst +
                              " references a missing node");
        if (e.src == e.dst)
            throw ContainmentCycle("self edge on '" + e.src + "'");
    }

    // Containment must be acyclic. Depth-first walk over contains edges.
    std::map<std::string, int> mark; // 0 unseen, 1 on stack, 2 done
    std::function<void(const std::string&)> visit = [&](const std::string& id) {
        mark[id] = 1;
        for (const std::string& inner : g.contents_of(id)) {
            int m = mark[inner];
            if (m == 1)
                throw ContainmentCycle("containment cycle through '" + inner + "'");
            if (m == 0) visit(inner);
        }
        mark[id] = 2;
    };
    for (const auto& [id, n] : g.nodes())
        if (mark[id] == 0) visit(id);
}

nlohmann::ordered_json node_to_json(const Node& n) {
    nlohmann::ordered_json j;
    j["instance_id"] = n.instance_id;
    j["label"] = n.label;
    j["kind"] = to_string(n.kind);
    if (n.location) j["location"] = *n.location;
    if (n.state) j["state"] = *n.state;
    for (const auto& [k, v] : n.state_slots) j["state." + k] = v;
    if (n.amount) j["amount"] = to_string(*n.amount);
    return j;
}

Node node_from_json(const nlohmann::json& j) {
    Node n;
    n.instance_id = j.at("instance_id").get<std::string>();
    n.label = j.at("label").get<std::string>();
    n.kind = node_kind_from_string(j.at("kind").get<std::string>());
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        if (key == "location") n.location = it.value().get<std::string>();
        else if (key == "state") n.state = it.value().get<std::string>();
        else if (key == "amount") n.amount = amount_from_string(it.value().get<std::string>());
        else if (key.rfind("state.", 0) == 0)
            n.state_slots[key.substr(6)] = it.value().get<std::string>();
        else if (key != "instance_id" && key != "label" && key != "kind")
            throw FormatError("unknown node field '" + key + "'");
    }
    return n;
}

namespace {

nlohmann::ordered_json graph_body(const WorldGraph& g) {
    nlohmann::ordered_json j;
    j["areas"] = g.areas();
    auto nodes = nlohmann::ordered_json::array();
    for (const auto& [id, n] : g.nodes()) nodes.push_back(node_to_json(n));
    j["nodes"] = std::move(nodes);
    auto edges = nlohmann::ordered_json::array();
    for (const Edge& e : g.edges())
        edges.push_back(nlohmann::ordered_json::array({e.src, to_string(e.kind), e.dst}));
    j["edges"] = std::move(edges);
    return j;
}

} // namespace

nlohmann::ordered_json serialize_graph(const WorldGraph& g) {
    nlohmann::ordered_json j;
    j["format"] = "hworld-graph";
    j["version"] = 1;
    j["step"] = g.step();
    auto body = graph_body(g);
    j["areas"] = std::move(body["areas"]);
    j["nodes"] = std::move(body["nodes"]);
    j["edges"] = std::move(body["edges"]);
    return j;
}

WorldGraph subgraph_from_parts(std::vector<std::string> areas, std::map<std::string, Node> nodes,
                               std::set<Edge> edges, int step) {
    WorldGraph g;
    g.areas_ = std::move(areas);
    g.nodes_ = std::move(nodes);
    g.edges_ = std::move(edges);
    g.step_ = step;
    return g;
}

WorldGraph parse_graph(const nlohmann::json& doc) {
    if (doc.value("format", "") != "hworld-graph")
        throw FormatError("not a hworld-graph document");
    if (doc.value("version", 0) != 1)
        throw FormatError("unsupported hworld-graph version");
    WorldGraph g;
    g.step_ = doc.value("step", 0);
    g.areas_ = doc.at("areas").get<std::vector<std::string>>();
    for (const auto& nj : doc.at("nodes")) {
        Node n = node_from_json(nj);
        if (!g.nodes_.emplace(n.instance_id, n).second)
            throw DuplicateInstanceId("instance '" + n.instance_id + "' appears twice");
    }
    for (const auto& ej : doc.at("edges")) {
        if (!ej.is_array() || ej.size() != 3)
            throw FormatError("edge entries are [src, kind, dst] triples");
        EdgeKind k = edge_kind_from_string(ej.at(1).get<std::string>());
        if (k == EdgeKind::LocatedIn) continue; // accepted on input, derived from location
        g.edges_.insert(Edge{ej.at(0).get<std::string>(), k, ej.at(2).get<std::string>()});
    }
    validate_graph(g);
    return g;
}

std::string fnv1a_hex(const std::string& payload) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : payload) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

std::string snapshot_hash(const WorldGraph& g) {
    return fnv1a_hex(graph_body(g).dump());
}

} // namespace hworld
