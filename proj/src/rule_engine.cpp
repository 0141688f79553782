#include "hworld/rule_engine.hpp"

#include <algorithm>

namespace hworld {

std::string to_string(const PrimitiveAction& a) {
    std::string s = a.type + "(";
    if (a.object) s += *a.object;
    if (a.target) s += (a.object ? ", " : "") + *a.target;
    return s + ")";
}

nlohmann::ordered_json action_to_json(const PrimitiveAction& a) {
    nlohmann::ordered_json j;
    j["type"] = a.type;
    j["object"] = a.object ? nlohmann::ordered_json(*a.object) : nlohmann::ordered_json(nullptr);
    j["target"] = a.target ? nlohmann::ordered_json(*a.target) : nlohmann::ordered_json(nullptr);
    return j;
}

PrimitiveAction action_from_json(const nlohmann::json& j) {
    PrimitiveAction a;
    a.type = j.at("type").get<std::string>();
    if (j.contains("object") && !j.at("object").is_null())
        a.object = j.at("object").get<std::string>();
    if (j.contains("target") && !j.at("target").is_null())
        a.target = j.at("target").get<std::string>();
    return a;
}

nlohmann::ordered_json agent_to_json(const AgentPhysState& a) {
    nlohmann::ordered_json j;
    j["area"] = a.current_area;
    j["left_hand"] = a.left_hand ? nlohmann::ordered_json(*a.left_hand) : nullptr;
    j["right_hand"] = a.right_hand ? nlohmann::ordered_json(*a.right_hand) : nullptr;
    return j;
}

AgentPhysState agent_from_json(const nlohmann::json& j) {
    AgentPhysState a;
    a.current_area = j.at("area").get<std::string>();
    if (j.contains("left_hand") && !j.at("left_hand").is_null())
        a.left_hand = j.at("left_hand").get<std::string>();
    if (j.contains("right_hand") && !j.at("right_hand").is_null())
        a.right_hand = j.at("right_hand").get<std::string>();
    return a;
}

std::string to_string(PredicateKind k) {
    switch (k) {
    case PredicateKind::At: return "at";
    case PredicateKind::State: return "state";
    case PredicateKind::Contains: return "contains";
    case PredicateKind::AgentAt: return "agent_at";
    case PredicateKind::Hand: return "hand";
    }
    return "at";
}

PredicateKind predicate_kind_from_string(const std::string& s) {
    if (s == "at") return PredicateKind::At;
    if (s == "state") return PredicateKind::State;
    if (s == "contains") return PredicateKind::Contains;
    if (s == "agent_at") return PredicateKind::AgentAt;
    if (s == "hand") return PredicateKind::Hand;
    throw FormatError("unknown predicate kind '" + s + "'");
}

std::string render_predicate(const Predicate& p) {
    std::string s = to_string(p.kind) + "(";
    if (p.kind == PredicateKind::State && p.args.size() == 3) {
        s += p.args[0] + ", " + p.args[1] + "=" + p.args[2];
    } else {
        for (std::size_t i = 0; i < p.args.size(); ++i) {
            if (i) s += ", ";
            s += p.args[i];
        }
    }
    return s + ")";
}

std::string to_string(Outcome o) {
    switch (o) {
    case Outcome::Success: return "SUCCESS";
    case Outcome::Fail: return "FAIL";
    case Outcome::NoRule: return "NO_RULE";
    }
    return "SUCCESS";
}

Outcome outcome_from_string(const std::string& s) {
    if (s == "SUCCESS") return Outcome::Success;
    if (s == "FAIL") return Outcome::Fail;
    if (s == "NO_RULE") return Outcome::NoRule;
    throw FormatError("unknown outcome '" + s + "'");
}

nlohmann::ordered_json feedback_to_json(const Feedback& fb) {
    nlohmann::ordered_json j;
    j["outcome"] = to_string(fb.outcome);
    j["action"] = action_to_json(fb.action);
    if (fb.violated) {
        nlohmann::ordered_json v;
        v["kind"] = to_string(fb.violated->kind);
        v["args"] = fb.violated->args;
        j["violated"] = std::move(v);
    } else {
        j["violated"] = nullptr;
    }
    j["violated_text"] = fb.violated_text;
    j["diff_hint"] = fb.diff_hint;
    return j;
}

Feedback feedback_from_json(const nlohmann::json& j) {
    Feedback fb;
    fb.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    fb.action = action_from_json(j.at("action"));
    if (j.contains("violated") && !j.at("violated").is_null()) {
        Predicate p;
        p.kind = predicate_kind_from_string(j.at("violated").at("kind").get<std::string>());
        p.args = j.at("violated").at("args").get<std::vector<std::string>>();
        fb.violated = std::move(p);
    }
    fb.violated_text = j.value("violated_text", "");
    if (j.contains("diff_hint")) fb.diff_hint = j.at("diff_hint").get<std::vector<std::string>>();
    return fb;
}

std::optional<std::string> RuleBase::normalize(const std::string& verb) const {
    auto it = verb_map_.find(verb);
    if (it != verb_map_.end()) return it->second;
    // Normalized types are part of the vocabulary even without an alias row.
    for (const auto& [raw, norm] : verb_map_)
        if (norm == verb) return verb;
    for (const WorldRule& r : rules_)
        if (r.pattern.type == verb) return verb;
    return std::nullopt;
}

namespace {

bool unify_arg(const PatternArg& pat, const std::string& arg, const WorldGraph& g,
               Binding& binding) {
    switch (pat.match) {
    case PatternArg::Match::Any:
        break;
    case PatternArg::Match::Literal:
        if (arg != pat.value) return false;
        break;
    case PatternArg::Match::Area:
        if (!g.is_area(arg)) return false;
        break;
    case PatternArg::Match::Label: {
        const Node* n = g.find(arg);
        if (n != nullptr && n->label != pat.value) return false;
        // A dangling id (no live node) unifies provisionally so the
        // precondition check can surface the state error.
        break;
    }
    }
    if (!pat.var.empty()) binding[pat.var] = arg;
    return true;
}

} // namespace

std::optional<RuleBase::MatchResult> RuleBase::match_rule(const PrimitiveAction& action,
                                                          const WorldGraph& g) const {
    for (const WorldRule& r : rules_) {
        if (r.pattern.type != action.type) continue;
        if (r.pattern.object.has_value() != action.object.has_value()) continue;
        if (r.pattern.target.has_value() != action.target.has_value()) continue;
        Binding b;
        if (r.pattern.object && !unify_arg(*r.pattern.object, *action.object, g, b)) continue;
        if (r.pattern.target && !unify_arg(*r.pattern.target, *action.target, g, b)) continue;
        return MatchResult{&r, std::move(b)};
    }
    return std::nullopt;
}

namespace {

bool is_var(const std::string& s) { return s.size() > 1 && s[0] == '?'; }

std::string resolve_term(const std::string& s, const Binding& binding,
                         const AgentPhysState& agent) {
    if (s == "@agent_area") return agent.current_area;
    if (is_var(s)) {
        auto it = binding.find(s.substr(1));
        if (it == binding.end()) throw UnboundVariable("variable '" + s + "' is unbound");
        return it->second;
    }
    return s;
}

bool eval_predicate(const Predicate& p, const std::vector<std::string>& args, const WorldGraph& g,
                    const AgentPhysState& agent) {
    switch (p.kind) {
    case PredicateKind::At: {
        const Node* n = g.find(args.at(0));
        return n != nullptr && n->location && *n->location == args.at(1);
    }
    case PredicateKind::State: {
        const Node* n = g.find(args.at(0));
        if (n == nullptr) return false;
        if (args.size() == 2) return n->state && *n->state == args.at(1);
        const std::string& key = args.at(1);
        if (key == "amount") return n->amount && to_string(*n->amount) == args.at(2);
        auto it = n->state_slots.find(key);
        return it != n->state_slots.end() && it->second == args.at(2);
    }
    case PredicateKind::Contains:
        return g.has_edge(args.at(0), EdgeKind::Contains, args.at(1));
    case PredicateKind::AgentAt:
        return agent.current_area == args.at(0);
    case PredicateKind::Hand: {
        const std::string& sel = args.at(0);
        const std::string& content = args.at(1);
        auto hand_is = [&](const std::optional<std::string>& h) {
            return content == "empty" ? !h.has_value() : h == content;
        };
        if (sel == "left") return hand_is(agent.left_hand);
        if (sel == "right") return hand_is(agent.right_hand);
        return hand_is(agent.left_hand) || hand_is(agent.right_hand);
    }
    }
    return false;
}

Predicate grounded_predicate(const Predicate& p, const std::vector<std::string>& args) {
    Predicate out;
    out.kind = p.kind;
    out.args = args;
    return out;
}

} // namespace

PrecondResult check_preconditions(const WorldRule& rule, const WorldGraph& g,
                                  const AgentPhysState& agent, Binding binding) {
    for (const Predicate& p : rule.preconditions) {
        // Ground what the current binding covers; note at most one open variable.
        std::vector<std::string> args(p.args.size());
        int open = -1;
        for (std::size_t i = 0; i < p.args.size(); ++i) {
            const std::string& a = p.args[i];
            if (a == "@agent_area") {
                args[i] = agent.current_area;
            } else if (is_var(a)) {
                auto it = binding.find(a.substr(1));
                if (it != binding.end()) {
                    args[i] = it->second;
                } else {
                    if (open >= 0)
                        throw UnboundVariable("rule '" + rule.rule_id +
                                              "' has two open variables in one predicate");
                    open = static_cast<int>(i);
                }
            } else {
                args[i] = a;
            }
        }

        if (open < 0) {
            if (!eval_predicate(p, args, g, agent)) {
                PrecondResult r;
                r.ok = false;
                r.violated = grounded_predicate(p, args);
                r.binding = std::move(binding);
                return r;
            }
            continue;
        }

        // Existential grounding: try label-matching instances in id order and
        // commit the first that satisfies this predicate. No backtracking.
        const std::string var = p.args[static_cast<std::size_t>(open)].substr(1);
        auto lit = rule.var_labels.find(var);
        const std::string label = lit == rule.var_labels.end() ? "" : lit->second;
        bool satisfied = false;
        for (const auto& [id, n] : g.nodes()) {
            if (n.kind == NodeKind::Area) continue;
            if (!label.empty() && n.label != label) continue;
            args[static_cast<std::size_t>(open)] = id;
            if (eval_predicate(p, args, g, agent)) {
                binding[var] = id;
                satisfied = true;
                break;
            }
        }
        if (!satisfied) {
            // Render the open slot as its label so the failure reads naturally.
            args[static_cast<std::size_t>(open)] = label.empty() ? ("?" + var) : label;
            PrecondResult r;
            r.ok = false;
            r.violated = grounded_predicate(p, args);
            r.binding = std::move(binding);
            return r;
        }
    }
    PrecondResult r;
    r.ok = true;
    r.binding = std::move(binding);
    return r;
}

namespace {

/// Resolves a node reference in an edge/remove effect: a variable, a node
/// template id from this grounding, or a literal id.
std::string resolve_node_ref(const std::string& s, const Binding& binding,
                             const std::map<std::string, std::string>& template_ids,
                             const AgentPhysState& agent) {
    auto it = template_ids.find(s);
    if (it != template_ids.end()) return it->second;
    return resolve_term(s, binding, agent);
}

std::string uniquify(const std::string& tmpl, const WorldGraph& g,
                     const std::set<std::string>& claimed) {
    auto pos = tmpl.find("{n}");
    if (pos == std::string::npos) return tmpl;
    for (int n = 1;; ++n) {
        std::string candidate = tmpl.substr(0, pos) + std::to_string(n) + tmpl.substr(pos + 3);
        if (g.find(candidate) == nullptr && !claimed.count(candidate)) return candidate;
    }
}

} // namespace

GroundedEffects ground_effects(const WorldGraph& g, const WorldRule& rule, const Binding& binding,
                               const AgentPhysState& agent) {
    GroundedEffects out;
    std::map<std::string, std::string> template_ids;
    std::set<std::string> claimed;

    for (const NodeTemplate& t : rule.effects.node_add) {
        Node n;
        n.instance_id = uniquify(t.instance_id, g, claimed);
        claimed.insert(n.instance_id);
        template_ids[t.instance_id] = n.instance_id;
        n.label = t.label;
        n.kind = t.kind;
        if (t.location == "@held") n.location = std::nullopt;
        else if (t.location == "@agent_area") n.location = agent.current_area;
        else if (!t.location.empty()) n.location = resolve_term(t.location, binding, agent);
        n.state = t.state;
        n.state_slots = t.state_slots;
        n.amount = t.amount;
        out.nodes_added.push_back(std::move(n));
    }
    for (const std::string& ref : rule.effects.node_remove)
        out.nodes_removed.push_back(resolve_node_ref(ref, binding, template_ids, agent));
    for (const EdgeTemplate& e : rule.effects.edge_add)
        out.edges_added.insert(Edge{resolve_node_ref(e.src, binding, template_ids, agent), e.kind,
                                    resolve_node_ref(e.dst, binding, template_ids, agent)});
    for (const EdgeTemplate& e : rule.effects.edge_remove)
        out.edges_removed.insert(Edge{resolve_node_ref(e.src, binding, template_ids, agent), e.kind,
                                      resolve_node_ref(e.dst, binding, template_ids, agent)});
    for (const AttrUpdate& u : rule.effects.attr_updates) {
        AttrUpdate w;
        w.node = resolve_node_ref(u.node, binding, template_ids, agent);
        w.slot = u.slot;
        if (u.value == "@held") w.value = "@held";
        else if (u.value == "@agent_area") w.value = agent.current_area;
        else w.value = resolve_term(u.value, binding, agent);
        out.attr_writes.push_back(std::move(w));
    }
    // Removing a node always removes its incident edges as well.
    for (const std::string& id : out.nodes_removed)
        for (const Edge& e : g.edges())
            if (e.src == id || e.dst == id) out.edges_removed.insert(e);
    return out;
}

/// Sole owner of WorldGraph mutation (friend of WorldGraph). Everything else
/// in the codebase sees snapshots only through the const interface.
class EffectApplier {
public:
    static WorldGraph apply(const WorldGraph& g, const WorldRule& rule, const Binding& binding,
                            AgentPhysState& agent);
};

WorldGraph apply_rule(const WorldGraph& g, const WorldRule& rule, const Binding& binding,
                      AgentPhysState& agent) {
    return EffectApplier::apply(g, rule, binding, agent);
}

WorldGraph EffectApplier::apply(const WorldGraph& g, const WorldRule& rule, const Binding& binding,
                                AgentPhysState& agent) {
    GroundedEffects fx = ground_effects(g, rule, binding, agent);
    WorldGraph out = g;
    AgentPhysState next_agent = agent;

    for (const std::string& id : fx.nodes_removed) {
        if (out.nodes_.erase(id) == 0)
            throw EffectIntegrityError("rule '" + rule.rule_id + "' removes missing node '" + id +
                                       "'");
        for (auto it = out.edges_.begin(); it != out.edges_.end();)
            it = (it->src == id || it->dst == id) ? out.edges_.erase(it) : std::next(it);
    }
    for (const Node& n : fx.nodes_added) {
        if (!out.nodes_.emplace(n.instance_id, n).second)
            throw EffectIntegrityError("rule '" + rule.rule_id + "' adds duplicate node '" +
                                       n.instance_id + "'");
    }
    for (const Edge& e : fx.edges_removed) {
        // Edges of removed nodes are already gone; anything else must exist.
        if (out.edges_.erase(e) == 0 && out.nodes_.count(e.src) && out.nodes_.count(e.dst))
            throw EffectIntegrityError("rule '" + rule.rule_id + "' removes absent edge " + e.src +
                                       " -" + to_string(e.kind) + "-> " + e.dst);
    }
    for (const Edge& e : fx.edges_added) {
        if (!out.edges_.insert(e).second)
            throw EffectIntegrityError("rule '" + rule.rule_id + "' re-adds existing edge " +
                                       e.src + " -" + to_string(e.kind) + "-> " + e.dst);
    }
    for (const AttrUpdate& w : fx.attr_writes) {
        auto it = out.nodes_.find(w.node);
        if (it == out.nodes_.end())
            throw EffectIntegrityError("rule '" + rule.rule_id + "' updates missing node '" +
                                       w.node + "'");
        Node& n = it->second;
        if (w.slot == "state") n.state = w.value;
        else if (w.slot == "amount") n.amount = amount_from_string(w.value);
        else if (w.slot == "location") n.location =
            w.value == "@held" ? std::optional<std::string>{} : std::optional<std::string>{w.value};
        else if (w.slot.rfind("state.", 0) == 0) n.state_slots[w.slot.substr(6)] = w.value;
        else throw EffectIntegrityError("rule '" + rule.rule_id + "' writes unknown slot '" +
                                        w.slot + "'");
    }

    for (const AgentUpdate& u : rule.effects.agent_updates) {
        switch (u.kind) {
        case AgentUpdate::Kind::HandHoldingSet: {
            std::string held = resolve_term(u.arg, binding, agent);
            std::optional<std::string> value =
                u.value == "empty" ? std::optional<std::string>{}
                                   : std::optional<std::string>{resolve_term(u.value, binding, agent)};
            if (next_agent.left_hand == held) next_agent.left_hand = value;
            else if (next_agent.right_hand == held) next_agent.right_hand = value;
            else throw EffectIntegrityError("rule '" + rule.rule_id + "' expects a hand holding '" +
                                            held + "'");
            break;
        }
        case AgentUpdate::Kind::EmptyHandSet: {
            std::string value = resolve_term(u.value, binding, agent);
            if (!next_agent.left_hand) next_agent.left_hand = value;
            else if (!next_agent.right_hand) next_agent.right_hand = value;
            else throw EffectIntegrityError("rule '" + rule.rule_id +
                                            "' needs an empty hand and both are full");
            break;
        }
        case AgentUpdate::Kind::MoveTo: {
            std::string area = resolve_term(u.value, binding, agent);
            if (!out.is_area(area))
                throw EffectIntegrityError("rule '" + rule.rule_id + "' moves agent to unknown '" +
                                           area + "'");
            next_agent.current_area = area;
            break;
        }
        }
    }

    out.step_ = g.step() + 1;
    try {
        validate_graph(out);
    } catch (const SimError& e) {
        throw EffectIntegrityError("rule '" + rule.rule_id + "' breaks a graph invariant: " +
                                   e.what());
    }
    agent = next_agent;
    return out;
}

ExecResult execute_primitive(const WorldGraph& g, const AgentPhysState& agent,
                             const RuleBase& rules, const PrimitiveAction& action) {
    ExecResult r{g, agent, Feedback{}};
    r.feedback.action = action;

    std::optional<std::string> norm = rules.normalize(action.type);
    if (!norm) {
        r.feedback.outcome = Outcome::NoRule;
        r.feedback.violated_text = "no rule for action " + to_string(action);
        return r;
    }
    PrimitiveAction act = action;
    act.type = *norm;
    r.feedback.action = act;

    auto match = rules.match_rule(act, g);
    if (!match) {
        r.feedback.outcome = Outcome::NoRule;
        r.feedback.violated_text = "no rule for action " + to_string(act);
        return r;
    }

    PrecondResult pre = check_preconditions(*match->rule, g, agent, match->binding);
    if (!pre.ok) {
        r.feedback.outcome = Outcome::Fail;
        r.feedback.violated = pre.violated;
        r.feedback.violated_text = render_predicate(pre.violated);
        return r;
    }

    try {
        AgentPhysState next = agent;
        WorldGraph out = apply_rule(g, *match->rule, pre.binding, next);
        r.graph = std::move(out);
        r.agent = next;
        r.feedback.outcome = Outcome::Success;
        return r;
    } catch (const EffectIntegrityError& e) {
        r.feedback.outcome = Outcome::Fail;
        r.feedback.violated_text = e.what();
        return r;
    }
}

} // namespace hworld
