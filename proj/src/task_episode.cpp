#include "hworld/task_episode.hpp"

namespace hworld {

namespace {

std::string resolve_ref(const std::string& s, const Binding& binding, const Skill& skill) {
    if (s.size() > 1 && s[0] == '?') {
        auto it = binding.find(s.substr(1));
        if (it == binding.end())
            throw UnboundVariable("skill '" + skill.skill_id + "' role '" + s + "' is unbound");
        return it->second;
    }
    return s;
}

PrimitiveAction instantiate(const ActionTemplate& t, const Binding& binding, const Skill& skill) {
    PrimitiveAction a;
    a.type = t.type;
    if (t.object) a.object = resolve_ref(*t.object, binding, skill);
    if (t.target) a.target = resolve_ref(*t.target, binding, skill);
    return a;
}

} // namespace

std::vector<PrimitiveAction> expand_skill(const Skill& skill, const Binding& binding) {
    std::vector<PrimitiveAction> out;
    for (const ActionTemplate& t : skill.pre) out.push_back(instantiate(t, binding, skill));
    out.push_back(instantiate(skill.center, binding, skill));
    for (const ActionTemplate& t : skill.post) out.push_back(instantiate(t, binding, skill));
    return out;
}

namespace {

std::vector<const Node*> select(const WorldGraph& g, const std::string& sel, bool is_label) {
    std::vector<const Node*> out;
    if (is_label) {
        for (const auto& [id, n] : g.nodes())
            if (n.kind != NodeKind::Area && n.label == sel) out.push_back(&n);
    } else if (const Node* n = g.find(sel)) {
        out.push_back(n);
    }
    return out;
}

bool slot_holds(const Node& n, const std::string& slot, const std::string& value) {
    if (slot == "exists") return value == "true"; // the node was found
    if (slot == "location") return n.location && *n.location == value;
    if (slot == "state") return n.state && *n.state == value;
    if (slot == "amount") return n.amount && to_string(*n.amount) == value;
    if (slot.rfind("state.", 0) == 0) {
        auto it = n.state_slots.find(slot.substr(6));
        return it != n.state_slots.end() && it->second == value;
    }
    return false;
}

bool clause_holds(const GoalClause& c, const WorldGraph& g) {
    if (c.kind == GoalClause::Kind::Slot) {
        auto candidates = select(g, c.selector, c.selector_is_label);
        if (c.slot == "exists" && c.value == "false") return candidates.empty();
        for (const Node* n : candidates)
            if (slot_holds(*n, c.slot, c.value)) return true;
        return false;
    }
    auto containers = select(g, c.container, c.container_is_label);
    auto objects = select(g, c.object, c.object_is_label);
    for (const Node* cn : containers)
        for (const Node* on : objects)
            if (g.has_edge(cn->instance_id, c.relation, on->instance_id)) return true;
    return false;
}

} // namespace

std::string render_goal_clause(const GoalClause& c) {
    if (c.kind == GoalClause::Kind::Slot)
        return c.selector + (c.selector_is_label ? "[label]" : "") + "." + c.slot + " = " + c.value;
    return to_string(c.relation) + "(" + c.container + (c.container_is_label ? "[label]" : "") +
           ", " + c.object + (c.object_is_label ? "[label]" : "") + ")";
}

nlohmann::ordered_json goal_clause_to_json(const GoalClause& c) {
    nlohmann::ordered_json j;
    if (c.kind == GoalClause::Kind::Slot) {
        j[c.selector_is_label ? "label" : "object"] = c.selector;
        j["slot"] = c.slot;
        j["value"] = c.value;
        return j;
    }
    j["relation"] = to_string(c.relation);
    j[c.container_is_label ? "container_label" : "container"] = c.container;
    j[c.object_is_label ? "object_label" : "object"] = c.object;
    return j;
}

GoalClause goal_clause_from_json(const nlohmann::json& j) {
    GoalClause c;
    if (j.contains("relation")) {
        c.kind = GoalClause::Kind::Relation;
        c.relation = edge_kind_from_string(j.at("relation").get<std::string>());
        if (c.relation != EdgeKind::Contains && c.relation != EdgeKind::Supports)
            throw FormatError("relation clauses accept 'contains' or 'supports'");
        if (j.contains("container_label")) {
            c.container = j.at("container_label").get<std::string>();
            c.container_is_label = true;
        } else {
            c.container = j.at("container").get<std::string>();
        }
        if (j.contains("object_label")) {
            c.object = j.at("object_label").get<std::string>();
            c.object_is_label = true;
        } else {
            c.object = j.at("object").get<std::string>();
        }
        return c;
    }
    c.kind = GoalClause::Kind::Slot;
    if (j.contains("label")) {
        c.selector = j.at("label").get<std::string>();
        c.selector_is_label = true;
    } else {
        c.selector = j.at("object").get<std::string>();
    }
    c.slot = j.at("slot").get<std::string>();
    c.value = j.at("value").get<std::string>();
    return c;
}

bool check_goal(const GoalPredicate& goal, const WorldGraph& g) {
    for (const GoalClause& c : goal)
        if (!clause_holds(c, g)) return false;
    return true;
}

bool check_goal(const GoalPredicate& goal, const WorldGraph& g,
                const std::set<std::string>& known_labels) {
    for (const GoalClause& c : goal) {
        if (c.kind == GoalClause::Kind::Slot) {
            if (c.selector_is_label && !known_labels.count(c.selector))
                throw UnknownLabel("goal names label '" + c.selector +
                                   "' outside the scenario vocabulary");
        } else {
            if (c.container_is_label && !known_labels.count(c.container))
                throw UnknownLabel("goal names label '" + c.container +
                                   "' outside the scenario vocabulary");
            if (c.object_is_label && !known_labels.count(c.object))
                throw UnknownLabel("goal names label '" + c.object +
                                   "' outside the scenario vocabulary");
        }
    }
    return check_goal(goal, g);
}

} // namespace hworld
