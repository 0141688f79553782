#include "hworld/observation.hpp"

#include <algorithm>
#include <functional>

namespace hworld {

namespace {

constexpr const char* kHeld = "(held)";
constexpr const char* kNone = "(none)";

/// Flattened comparable slots of one node.
std::map<std::string, std::string> node_slots(const Node& n) {
    std::map<std::string, std::string> m;
    if (n.kind != NodeKind::Area) m["location"] = n.location ? *n.location : kHeld;
    if (n.state) m["state"] = *n.state;
    for (const auto& [k, v] : n.state_slots) m["state." + k] = v;
    if (n.amount) m["amount"] = to_string(*n.amount);
    return m;
}

DeltaSet diff_views(const WorldGraph& a, const WorldGraph& b) {
    DeltaSet d;
    for (const auto& [id, na] : a.nodes()) {
        const Node* nb = b.find(id);
        if (nb == nullptr) {
            d.disappeared.push_back(id);
            continue;
        }
        auto sa = node_slots(na);
        auto sb = node_slots(*nb);
        std::set<std::string> keys;
        for (const auto& [k, v] : sa) keys.insert(k);
        for (const auto& [k, v] : sb) keys.insert(k);
        for (const std::string& k : keys) {
            auto ia = sa.find(k);
            auto ib = sb.find(k);
            std::string va = ia == sa.end() ? kNone : ia->second;
            std::string vb = ib == sb.end() ? kNone : ib->second;
            if (va != vb) d.changed.push_back(AttrChange{id, k, va, vb});
        }
    }
    for (const auto& [id, nb] : b.nodes())
        if (a.find(id) == nullptr) d.appeared.push_back(nb);
    for (const Edge& e : a.edges())
        if (!b.edges().count(e)) d.edge_changes.push_back(EdgeChange{e, false});
    for (const Edge& e : b.edges())
        if (!a.edges().count(e)) d.edge_changes.push_back(EdgeChange{e, true});

    // Map iteration already gives id order; normalize the remaining sorts.
    std::sort(d.edge_changes.begin(), d.edge_changes.end(), [](const auto& x, const auto& y) {
        return std::tie(x.edge, x.added) < std::tie(y.edge, y.added);
    });
    return d;
}

} // namespace

WorldGraph local_subgraph(const WorldGraph& g, const std::string& area) {
    if (!g.is_area(area)) throw UnknownArea("'" + area + "' is not an area");

    std::map<std::string, Node> in_area;
    for (const auto& [id, n] : g.nodes())
        if (n.location && *n.location == area) in_area.emplace(id, n);

    // Contents of closed containers are hidden, transitively: anything inside
    // a hidden or closed container is hidden too.
    std::map<std::string, int> hidden; // -1 visiting, 0/1 resolved
    std::function<bool(const std::string&)> is_hidden = [&](const std::string& id) -> bool {
        auto it = hidden.find(id);
        if (it != hidden.end()) return it->second == 1;
        hidden[id] = 0; // containment is acyclic; a cycle guard is still cheap
        bool h = false;
        for (const std::string& c : g.containers_of(id)) {
            const Node* cn = g.find(c);
            if (cn == nullptr) continue;
            if ((cn->state && *cn->state == "closed") || is_hidden(c)) {
                h = true;
                break;
            }
        }
        hidden[id] = h ? 1 : 0;
        return h;
    };

    std::map<std::string, Node> kept;
    kept.emplace(area, *g.find(area));
    for (const auto& [id, n] : in_area)
        if (!is_hidden(id)) kept.emplace(id, n);

    std::set<Edge> edges;
    for (const Edge& e : g.edges())
        if (kept.count(e.src) && kept.count(e.dst)) edges.insert(e);

    return subgraph_from_parts({area}, std::move(kept), std::move(edges), g.step());
}

DeltaSet graph_diff(const WorldGraph& a, const WorldGraph& b, const std::string& area) {
    return diff_views(local_subgraph(a, area), local_subgraph(b, area));
}

DeltaSet graph_diff_full(const WorldGraph& a, const WorldGraph& b) { return diff_views(a, b); }

WorldGraph apply_delta(const WorldGraph& base, const DeltaSet& d) {
    std::map<std::string, Node> nodes = base.nodes();
    std::set<Edge> edges = base.edges();

    for (const std::string& id : d.disappeared) {
        nodes.erase(id);
        for (auto it = edges.begin(); it != edges.end();)
            it = (it->src == id || it->dst == id) ? edges.erase(it) : std::next(it);
    }
    for (const Node& n : d.appeared) nodes[n.instance_id] = n;
    for (const EdgeChange& ec : d.edge_changes) {
        if (ec.added) edges.insert(ec.edge);
        else edges.erase(ec.edge);
    }
    for (const AttrChange& c : d.changed) {
        auto it = nodes.find(c.instance_id);
        if (it == nodes.end()) continue; // changed + disappeared cannot co-occur
        Node& n = it->second;
        const std::string& v = c.new_value;
        if (c.slot == "location")
            n.location = (v == kHeld || v == kNone) ? std::optional<std::string>{}
                                                    : std::optional<std::string>{v};
        else if (c.slot == "state")
            n.state = v == kNone ? std::optional<std::string>{} : std::optional<std::string>{v};
        else if (c.slot == "amount")
            n.amount = v == kNone ? std::optional<Amount>{}
                                  : std::optional<Amount>{amount_from_string(v)};
        else if (c.slot.rfind("state.", 0) == 0) {
            if (v == kNone) n.state_slots.erase(c.slot.substr(6));
            else n.state_slots[c.slot.substr(6)] = v;
        }
    }
    return subgraph_from_parts(base.areas(), std::move(nodes), std::move(edges), 0);
}

std::string render_diff(const DeltaSet& d) {
    if (d.empty()) return "no changes since episode start";
    std::vector<std::string> lines;
    for (const AttrChange& c : d.changed)
        lines.push_back(c.instance_id + ": " + c.slot + " " + c.old_value + " -> " + c.new_value);
    for (const Node& n : d.appeared)
        lines.push_back("appeared: " + n.instance_id + " (" + n.label + ") at " +
                        (n.location ? *n.location : kHeld));
    for (const std::string& id : d.disappeared) lines.push_back("disappeared: " + id);
    for (const EdgeChange& ec : d.edge_changes)
        lines.push_back("edge: " + ec.edge.src + " " + to_string(ec.edge.kind) + " " +
                        ec.edge.dst + (ec.added ? " added" : " removed"));
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += "\n";
        out += lines[i];
    }
    return out;
}

std::string render_state(const WorldGraph& view) {
    std::vector<std::string> lines;
    for (const auto& [id, n] : view.nodes()) {
        if (n.kind == NodeKind::Area) continue;
        std::string line = id + " (" + n.label + "):";
        auto slots = node_slots(n);
        bool first = true;
        for (const auto& [k, v] : slots) {
            line += (first ? " " : ", ") + k + "=" + v;
            first = false;
        }
        lines.push_back(std::move(line));
    }
    for (const Edge& e : view.edges())
        lines.push_back("edge: " + e.src + " " + to_string(e.kind) + " " + e.dst);
    if (lines.empty()) {
        std::string where = view.areas().size() == 1 ? view.areas()[0] : "view";
        return "area " + where + " is empty";
    }
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += "\n";
        out += lines[i];
    }
    return out;
}

Observation observe(const WorldGraph& g_init, const WorldGraph& g_now, const std::string& area,
                    const std::string& image_ref) {
    Observation o;
    o.area = area;
    o.image_ref = image_ref;
    o.step = g_now.step();
    WorldGraph init_view = local_subgraph(g_init, area);
    for (const auto& [id, n] : init_view.nodes())
        if (n.kind != NodeKind::Area) o.init_view.push_back(n);
    o.delta = graph_diff(g_init, g_now, area);
    o.delta_text = render_diff(o.delta);
    return o;
}

nlohmann::ordered_json delta_to_json(const DeltaSet& d) {
    nlohmann::ordered_json j;
    auto changed = nlohmann::ordered_json::array();
    for (const AttrChange& c : d.changed) {
        nlohmann::ordered_json cj;
        cj["instance_id"] = c.instance_id;
        cj["slot"] = c.slot;
        cj["old"] = c.old_value;
        cj["new"] = c.new_value;
        changed.push_back(std::move(cj));
    }
    j["changed"] = std::move(changed);
    auto appeared = nlohmann::ordered_json::array();
    for (const Node& n : d.appeared) appeared.push_back(node_to_json(n));
    j["appeared"] = std::move(appeared);
    j["disappeared"] = d.disappeared;
    auto edges = nlohmann::ordered_json::array();
    for (const EdgeChange& ec : d.edge_changes) {
        nlohmann::ordered_json ej;
        ej["src"] = ec.edge.src;
        ej["kind"] = to_string(ec.edge.kind);
        ej["dst"] = ec.edge.dst;
        ej["op"] = ec.added ? "added" : "removed";
        edges.push_back(std::move(ej));
    }
    j["edges"] = std::move(edges);
    return j;
}

DeltaSet delta_from_json(const nlohmann::json& j) {
    DeltaSet d;
    for (const auto& cj : j.at("changed"))
        d.changed.push_back(AttrChange{cj.at("instance_id").get<std::string>(),
                                       cj.at("slot").get<std::string>(),
                                       cj.at("old").get<std::string>(),
                                       cj.at("new").get<std::string>()});
    for (const auto& nj : j.at("appeared")) d.appeared.push_back(node_from_json(nj));
    d.disappeared = j.at("disappeared").get<std::vector<std::string>>();
    for (const auto& ej : j.at("edges"))
        d.edge_changes.push_back(
            EdgeChange{Edge{ej.at("src").get<std::string>(),
                            edge_kind_from_string(ej.at("kind").get<std::string>()),
                            ej.at("dst").get<std::string>()},
                       ej.at("op").get<std::string>() == "added"});
    return d;
}

nlohmann::ordered_json observation_to_json(const Observation& o) {
    nlohmann::ordered_json j;
    j["area"] = o.area;
    j["image_ref"] = o.image_ref;
    j["step"] = o.step;
    auto view = nlohmann::ordered_json::array();
    for (const Node& n : o.init_view) view.push_back(node_to_json(n));
    j["init_view"] = std::move(view);
    j["delta"] = delta_to_json(o.delta);
    j["text"] = o.delta_text;
    return j;
}

Observation observation_from_json(const nlohmann::json& j) {
    Observation o;
    o.area = j.at("area").get<std::string>();
    o.image_ref = j.at("image_ref").get<std::string>();
    o.step = j.at("step").get<int>();
    for (const auto& nj : j.at("init_view")) o.init_view.push_back(node_from_json(nj));
    o.delta = delta_from_json(j.at("delta"));
    o.delta_text = j.value("text", "");
    return o;
}

std::string observation_digest(const Observation& o) {
    return fnv1a_hex(observation_to_json(o).dump());
}

nlohmann::ordered_json report_to_json(const VisualReport& r) {
    nlohmann::ordered_json j;
    j["area"] = r.area;
    auto entries = nlohmann::ordered_json::array();
    for (const VisualReport::Entry& e : r.entries) {
        nlohmann::ordered_json ej;
        ej["instance_id"] = e.instance_id;
        ej["label"] = e.label;
        ej["area"] = e.area;
        ej["container"] = e.container ? nlohmann::ordered_json(*e.container)
                                      : nlohmann::ordered_json(nullptr);
        ej["state"] = e.state ? nlohmann::ordered_json(*e.state) : nlohmann::ordered_json(nullptr);
        ej["states"] = e.state_slots;
        ej["amount"] = e.amount ? nlohmann::ordered_json(to_string(*e.amount))
                                : nlohmann::ordered_json(nullptr);
        entries.push_back(std::move(ej));
    }
    j["entries"] = std::move(entries);
    return j;
}

} // namespace hworld
