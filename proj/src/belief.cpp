#include "hworld/belief.hpp"

#include <algorithm>

namespace hworld {

std::string to_string(BeliefSource s) {
    switch (s) {
    case BeliefSource::InitialObservation: return "initial_observation";
    case BeliefSource::StateChange: return "state_change";
    case BeliefSource::ActionFeedback: return "action_feedback";
    case BeliefSource::Hypothesis: return "hypothesis";
    case BeliefSource::VlmExploration: return "vlm_exploration";
    }
    return "state_change";
}

BeliefSource belief_source_from_string(const std::string& s) {
    if (s == "initial_observation") return BeliefSource::InitialObservation;
    if (s == "state_change") return BeliefSource::StateChange;
    if (s == "action_feedback") return BeliefSource::ActionFeedback;
    if (s == "hypothesis") return BeliefSource::Hypothesis;
    if (s == "vlm_exploration") return BeliefSource::VlmExploration;
    throw FormatError("unknown belief source '" + s + "'");
}

std::string to_string(MemoryMode m) {
    switch (m) {
    case MemoryMode::Full: return "full";
    case MemoryMode::None: return "none";
    case MemoryMode::Bounded: return "bounded";
    }
    return "full";
}

MemoryMode memory_mode_from_string(const std::string& s) {
    if (s == "full") return MemoryMode::Full;
    if (s == "none") return MemoryMode::None;
    if (s == "bounded") return MemoryMode::Bounded;
    throw FormatError("unknown memory mode '" + s + "' (expected none|bounded|full)");
}

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

BeliefNode node_from_world(const Node& n, BeliefSource source, double confidence, int step) {
    BeliefNode bn;
    bn.instance_id = n.instance_id;
    bn.label = n.label;
    if (n.location) bn.position = SlotValue{*n.location, false};
    if (n.state) bn.states["state"] = SlotValue{*n.state, false};
    for (const auto& [k, v] : n.state_slots) bn.states[k] = SlotValue{v, false};
    if (n.amount) bn.states["amount"] = SlotValue{to_string(*n.amount), false};
    bn.meta = BeliefMeta{source, clamp01(confidence), step};
    return bn;
}

/// AttrChange slot name -> belief facet key ("" means position).
std::string belief_key(const std::string& slot) {
    if (slot == "location") return "";
    if (slot.rfind("state.", 0) == 0) return slot.substr(6);
    return slot; // "state", "amount"
}

void write_facet(BeliefNode& bn, const std::string& slot, SlotValue v) {
    std::string key = belief_key(slot);
    if (key.empty()) bn.position = std::move(v);
    else bn.states[key] = std::move(v);
}

void apply_failure(BeliefGraph& b, const Feedback& fb, const BeliefParams& params, int t) {
    BeliefMeta meta{BeliefSource::ActionFeedback, clamp01(params.rho_fail), t};

    auto node_for = [&](const std::string& id) -> BeliefNode& {
        auto it = b.nodes.find(id);
        if (it != b.nodes.end()) return it->second;
        BeliefNode bn;
        bn.instance_id = id;
        bn.label = id;
        bn.meta = BeliefMeta{BeliefSource::Hypothesis, clamp01(params.rho_fail), std::nullopt};
        return b.nodes.emplace(id, std::move(bn)).first->second;
    };
    auto mark_unparsed = [&](const std::string& id, const std::string& text) {
        BeliefNode& bn = node_for(id);
        bn.states["feedback"] = SlotValue{text, true};
        bn.meta = meta;
    };

    if (!fb.violated) {
        // Failure without a predicate (e.g. an effect-integrity fault): leave a
        // marker on the action's object when there is one.
        if (fb.action.object) mark_unparsed(*fb.action.object, fb.violated_text);
        return;
    }

    const Predicate& p = *fb.violated;
    switch (p.kind) {
    case PredicateKind::At: {
        BeliefNode& bn = node_for(p.args.at(0));
        // "not at <area>" only contradicts a belief that places the object
        // there. A believed position elsewhere is consistent with the failure
        // and survives untouched, confidence included.
        if (!bn.position || bn.position->hypothesis || bn.position->value == p.args.at(1)) {
            bn.position = SlotValue{"!" + p.args.at(1), true};
            bn.meta = meta;
        }
        break;
    }
    case PredicateKind::State: {
        BeliefNode& bn = node_for(p.args.at(0));
        if (p.args.size() == 2) bn.states["state"] = SlotValue{"!" + p.args.at(1), true};
        else bn.states[p.args.at(1)] = SlotValue{"!" + p.args.at(2), true};
        bn.meta = meta;
        break;
    }
    case PredicateKind::Hand: {
        // Proprioceptive requirement; the only graph-mappable piece is the
        // named content, which gains a marker.
        const std::string& content = p.args.at(1);
        if (content != "empty") mark_unparsed(content, fb.violated_text);
        break;
    }
    case PredicateKind::Contains:
        // Blame the claimed occupant, not the container: it is the occupant
        // binding the planner got wrong, and demoting it lets the next plan
        // rank a different candidate.
        mark_unparsed(p.args.at(1), fb.violated_text);
        break;
    case PredicateKind::AgentAt:
        break; // nothing in the belief graph to contradict
    }
}

} // namespace

BeliefGraph update(BeliefGraph b, const Observation& obs, const Feedback* fb,
                   const BeliefParams& params) {
    const int t = obs.step;
    b.current_step = t;

    // ---- Pass 1: observation integration ----
    std::set<std::string> visible;
    for (const Node& n : obs.init_view) visible.insert(n.instance_id);
    for (const std::string& id : obs.delta.disappeared) visible.erase(id);
    for (const Node& n : obs.delta.appeared) visible.insert(n.instance_id);

    // The anchor image of this area shows its episode-start contents; objects
    // the agent has never heard of enter belief from it.
    for (const Node& n : obs.init_view)
        if (!b.nodes.count(n.instance_id))
            b.nodes.emplace(n.instance_id,
                            node_from_world(n, BeliefSource::InitialObservation, 1.0, t));

    // Seeing a known object again refreshes its timestamp (and nothing else).
    for (const std::string& id : visible) {
        auto it = b.nodes.find(id);
        if (it != b.nodes.end()) it->second.meta.last_observed_step = t;
    }

    for (const Node& n : obs.delta.appeared) {
        auto it = b.nodes.find(n.instance_id);
        BeliefNode bn = node_from_world(n, BeliefSource::StateChange, 1.0, t);
        if (it != b.nodes.end()) it->second = std::move(bn);
        else b.nodes.emplace(n.instance_id, std::move(bn));
    }
    for (const AttrChange& c : obs.delta.changed) {
        auto it = b.nodes.find(c.instance_id);
        if (it == b.nodes.end())
            throw SimError("KeyError", "delta changes unknown instance '" + c.instance_id + "'");
        write_facet(it->second, c.slot, SlotValue{c.new_value, false});
        it->second.meta = BeliefMeta{BeliefSource::StateChange, 1.0, t};
    }
    for (const std::string& id : obs.delta.disappeared) {
        auto it = b.nodes.find(id);
        if (it == b.nodes.end())
            throw SimError("KeyError", "delta drops unknown instance '" + id + "'");
        // Out of sight is not gone: keep the node, lower the confidence.
        it->second.meta.source = BeliefSource::StateChange;
        it->second.meta.confidence = clamp01(params.rho_absent);
        it->second.meta.last_observed_step = t;
    }
    for (const EdgeChange& ec : obs.delta.edge_changes) {
        if (ec.added) b.edges.insert(ec.edge);
        else b.edges.erase(ec.edge);
    }

    // ---- Pass 2: feedback integration ----
    if (fb != nullptr) {
        if (fb->outcome == Outcome::Success) {
            for (const std::optional<std::string>& ref : {fb->action.object, fb->action.target}) {
                if (!ref) continue;
                auto it = b.nodes.find(*ref);
                if (it != b.nodes.end()) it->second.meta.confidence = 1.0;
            }
        } else if (fb->outcome == Outcome::Fail) {
            apply_failure(b, *fb, params, t);
        }
        // NO_RULE: a vocabulary error says nothing about world state.
    }
    return b;
}

BeliefGraph init_from_observation(const Observation& obs, const BeliefParams& params) {
    return update(BeliefGraph{}, obs, nullptr, params);
}

std::vector<std::string> flag_stale(const BeliefGraph& b, int delta_stale) {
    std::vector<std::string> out;
    for (const auto& [id, n] : b.nodes) {
        if (!n.meta.last_observed_step ||
            b.current_step - *n.meta.last_observed_step > delta_stale)
            out.push_back(id);
    }
    return out;
}

BeliefGraph integrate_visual_report(BeliefGraph b, const VisualReport& report,
                                    const BeliefParams& params, int step) {
    for (const VisualReport::Entry& e : report.entries) {
        BeliefNode bn;
        bn.instance_id = e.instance_id;
        bn.label = e.label;
        bn.position = SlotValue{e.area, false};
        if (e.state) bn.states["state"] = SlotValue{*e.state, false};
        for (const auto& [k, v] : e.state_slots) bn.states[k] = SlotValue{v, false};
        if (e.amount) bn.states["amount"] = SlotValue{to_string(*e.amount), false};
        bn.meta = BeliefMeta{BeliefSource::VlmExploration, clamp01(params.vlm_confidence), step};
        b.nodes[e.instance_id] = std::move(bn);
        if (e.container) b.edges.insert(Edge{*e.container, EdgeKind::Contains, e.instance_id});
    }
    return b;
}

namespace {

bool observable_from(const BeliefNode& n, const std::string& area) {
    return n.position && !n.position->hypothesis && n.position->value == area;
}

void prune_edges(BeliefGraph& b) {
    for (auto it = b.edges.begin(); it != b.edges.end();)
        it = (!b.nodes.count(it->src) || !b.nodes.count(it->dst)) ? b.edges.erase(it)
                                                                  : std::next(it);
}

} // namespace

BeliefGraph apply_forgetting(BeliefGraph b, const ForgettingConfig& cfg,
                             const std::string& current_area, std::mt19937_64& rng) {
    switch (cfg.mode) {
    case MemoryMode::Full:
        return b;
    case MemoryMode::None: {
        for (auto it = b.nodes.begin(); it != b.nodes.end();)
            it = observable_from(it->second, current_area) ? std::next(it) : b.nodes.erase(it);
        prune_edges(b);
        return b;
    }
    case MemoryMode::Bounded: {
        if (static_cast<int>(b.nodes.size()) > cfg.cap) {
            // Evict lowest confidence first, oldest first on ties.
            std::vector<const BeliefNode*> order;
            for (const auto& [id, n] : b.nodes) order.push_back(&n);
            std::sort(order.begin(), order.end(), [](const BeliefNode* a, const BeliefNode* c) {
                int sa = a->meta.last_observed_step.value_or(-1);
                int sc = c->meta.last_observed_step.value_or(-1);
                return std::tie(a->meta.confidence, sa, a->instance_id) <
                       std::tie(c->meta.confidence, sc, c->instance_id);
            });
            std::size_t excess = b.nodes.size() - static_cast<std::size_t>(cfg.cap);
            for (std::size_t i = 0; i < excess; ++i) b.nodes.erase(order[i]->instance_id);
        }
        // Independent decay outside the current area. Iteration over the map
        // is id-ordered, so the draw sequence is reproducible.
        for (auto it = b.nodes.begin(); it != b.nodes.end();) {
            if (observable_from(it->second, current_area)) {
                ++it;
                continue;
            }
            double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            it = (u < cfg.rate) ? b.nodes.erase(it) : std::next(it);
        }
        prune_edges(b);
        return b;
    }
    }
    return b;
}

namespace {

nlohmann::ordered_json slot_value_to_json(const SlotValue& v) {
    if (!v.hypothesis) return nlohmann::ordered_json(v.value);
    nlohmann::ordered_json j;
    j["value"] = v.value;
    j["hypothesis"] = true;
    return j;
}

} // namespace

nlohmann::ordered_json serialize_belief(const BeliefGraph& b) {
    nlohmann::ordered_json j;
    j["format"] = "hworld-belief";
    j["version"] = 1;
    j["current_step"] = b.current_step;
    auto nodes = nlohmann::ordered_json::array();
    for (const auto& [id, n] : b.nodes) {
        nlohmann::ordered_json nj;
        nj["instance_id"] = n.instance_id;
        nj["label"] = n.label;
        nj["position"] = n.position ? slot_value_to_json(*n.position)
                                    : nlohmann::ordered_json(nullptr);
        auto states = nlohmann::ordered_json::object();
        for (const auto& [k, v] : n.states) states[k] = slot_value_to_json(v);
        nj["states"] = std::move(states);
        nlohmann::ordered_json meta;
        meta["source"] = to_string(n.meta.source);
        meta["confidence"] = n.meta.confidence;
        meta["last_observed_step"] = n.meta.last_observed_step
                                         ? nlohmann::ordered_json(*n.meta.last_observed_step)
                                         : nlohmann::ordered_json(nullptr);
        nj["meta"] = std::move(meta);
        nodes.push_back(std::move(nj));
    }
    j["nodes"] = std::move(nodes);
    auto edges = nlohmann::ordered_json::array();
    for (const Edge& e : b.edges)
        edges.push_back(nlohmann::ordered_json::array({e.src, to_string(e.kind), e.dst}));
    j["edges"] = std::move(edges);
    return j;
}

BeliefGraph parse_belief(const nlohmann::json& j) {
    if (j.value("format", "") != "hworld-belief" || j.value("version", 0) != 1)
        throw FormatError("not a serialized belief graph");
    auto slot_value_from = [](const nlohmann::json& v) {
        SlotValue sv;
        if (v.is_string()) {
            sv.value = v.get<std::string>();
        } else {
            sv.value = v.at("value").get<std::string>();
            sv.hypothesis = v.value("hypothesis", false);
        }
        return sv;
    };
    BeliefGraph b;
    b.current_step = j.at("current_step").get<int>();
    for (const auto& nj : j.at("nodes")) {
        BeliefNode n;
        n.instance_id = nj.at("instance_id").get<std::string>();
        n.label = nj.at("label").get<std::string>();
        if (!nj.at("position").is_null()) n.position = slot_value_from(nj.at("position"));
        for (auto it = nj.at("states").begin(); it != nj.at("states").end(); ++it)
            n.states[it.key()] = slot_value_from(it.value());
        const auto& meta = nj.at("meta");
        n.meta.source = belief_source_from_string(meta.at("source").get<std::string>());
        n.meta.confidence = meta.at("confidence").get<double>();
        if (!meta.at("last_observed_step").is_null())
            n.meta.last_observed_step = meta.at("last_observed_step").get<int>();
        b.nodes[n.instance_id] = std::move(n);
    }
    for (const auto& ej : j.at("edges"))
        b.edges.insert(Edge{ej.at(0).get<std::string>(),
                            edge_kind_from_string(ej.at(1).get<std::string>()),
                            ej.at(2).get<std::string>()});
    return b;
}

std::string belief_digest(const BeliefGraph& b) { return fnv1a_hex(serialize_belief(b).dump()); }

} // namespace hworld
