#include "hworld/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

namespace hworld {

namespace {

using ojson = nlohmann::ordered_json;

// Conversion failure inside one scenario element. Caught per top-level entry
// so a single bad rule does not mask diagnostics for the rest of the file.
struct ConvErr {
    std::string code;
    std::string msg;
};

[[noreturn]] void bail(const std::string& code, const std::string& msg) {
    throw ConvErr{code, msg};
}

int line_of_byte(const std::string& text, size_t byte) {
    int line = 1;
    for (size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

const ojson& need(const ojson& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) bail("missing-field", std::string("missing field '") + key + "'");
    return j.at(key);
}

std::string need_str(const ojson& j, const char* key) {
    const ojson& v = need(j, key);
    if (!v.is_string()) bail("bad-type", std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

std::string opt_str(const ojson& j, const char* key, const std::string& dflt = "") {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return dflt;
    if (!j.at(key).is_string()) bail("bad-type", std::string("field '") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

std::map<std::string, std::string> opt_str_map(const ojson& j, const char* key) {
    std::map<std::string, std::string> out;
    if (!j.is_object() || !j.contains(key)) return out;
    const ojson& v = j.at(key);
    if (!v.is_object()) bail("bad-type", std::string("field '") + key + "' must be an object");
    for (auto it = v.begin(); it != v.end(); ++it) {
        if (!it.value().is_string()) bail("bad-type", std::string("'") + key + "' values must be strings");
        out[it.key()] = it.value().get<std::string>();
    }
    return out;
}

Node object_from_doc(const ojson& j) {
    Node n;
    n.instance_id = need_str(j, "instance_id");
    n.label = need_str(j, "label");
    n.kind = node_kind_from_string(opt_str(j, "kind", "object"));
    if (j.contains("location") && !j.at("location").is_null()) n.location = need_str(j, "location");
    if (j.contains("state") && !j.at("state").is_null()) n.state = need_str(j, "state");
    n.state_slots = opt_str_map(j, "slots");
    if (j.contains("amount") && !j.at("amount").is_null())
        n.amount = amount_from_string(need_str(j, "amount"));
    for (auto it = j.begin(); it != j.end(); ++it) {
        std::string k = it.key();
        if (k != "instance_id" && k != "label" && k != "kind" && k != "location" && k != "state" &&
            k != "slots" && k != "amount")
            bail("unknown-field", "unknown object field '" + k + "'");
    }
    return n;
}

Edge edge_from_doc(const ojson& j) {
    Edge e;
    e.src = need_str(j, "src");
    e.kind = edge_kind_from_string(need_str(j, "kind"));
    e.dst = need_str(j, "dst");
    return e;
}

PatternArg pattern_arg_from_doc(const ojson& j) {
    PatternArg a;
    if (j.is_string()) { // bare string means a positional literal
        a.match = PatternArg::Match::Literal;
        a.value = j.get<std::string>();
        return a;
    }
    if (!j.is_object()) bail("bad-type", "action argument must be a string or an object");
    if (j.contains("literal")) {
        a.match = PatternArg::Match::Literal;
        a.value = need_str(j, "literal");
        a.var = opt_str(j, "var");
        return a;
    }
    a.var = need_str(j, "var");
    if (j.contains("label")) {
        a.match = PatternArg::Match::Label;
        a.value = need_str(j, "label");
    } else if (j.contains("area") && j.at("area").is_boolean() && j.at("area").get<bool>()) {
        a.match = PatternArg::Match::Area;
    } else {
        a.match = PatternArg::Match::Any;
    }
    return a;
}

Predicate predicate_from_doc(const ojson& j) {
    Predicate p;
    p.kind = predicate_kind_from_string(need_str(j, "pred"));
    const ojson& args = need(j, "args");
    if (!args.is_array()) bail("bad-type", "'args' must be an array");
    for (const ojson& a : args) {
        if (!a.is_string()) bail("bad-type", "predicate arguments must be strings");
        p.args.push_back(a.get<std::string>());
    }
    return p;
}

NodeTemplate node_template_from_doc(const ojson& j) {
    NodeTemplate t;
    t.instance_id = need_str(j, "instance_id");
    t.label = need_str(j, "label");
    t.kind = node_kind_from_string(opt_str(j, "kind", "object"));
    t.location = need_str(j, "location");
    if (j.contains("state") && !j.at("state").is_null()) t.state = need_str(j, "state");
    t.state_slots = opt_str_map(j, "slots");
    if (j.contains("amount") && !j.at("amount").is_null())
        t.amount = amount_from_string(need_str(j, "amount"));
    return t;
}

EdgeTemplate edge_template_from_doc(const ojson& j) {
    EdgeTemplate t;
    t.src = need_str(j, "src");
    t.kind = edge_kind_from_string(need_str(j, "kind"));
    t.dst = need_str(j, "dst");
    return t;
}

AgentUpdate agent_update_from_doc(const ojson& j) {
    AgentUpdate u;
    std::string op = need_str(j, "op");
    if (op == "hand_holding_set") {
        u.kind = AgentUpdate::Kind::HandHoldingSet;
        u.arg = need_str(j, "arg");
        u.value = need_str(j, "value");
    } else if (op == "empty_hand_set") {
        u.kind = AgentUpdate::Kind::EmptyHandSet;
        u.value = need_str(j, "value");
    } else if (op == "move_to") {
        u.kind = AgentUpdate::Kind::MoveTo;
        u.value = need_str(j, "value");
    } else {
        bail("bad-agent-update", "unknown agent update op '" + op + "'");
    }
    return u;
}

EffectSet effects_from_doc(const ojson& j) {
    EffectSet e;
    if (!j.is_object()) bail("bad-type", "'effects' must be an object");
    if (j.contains("node_add"))
        for (const ojson& t : j.at("node_add")) e.node_add.push_back(node_template_from_doc(t));
    if (j.contains("node_remove"))
        for (const ojson& t : j.at("node_remove")) {
            if (!t.is_string()) bail("bad-type", "'node_remove' entries must be strings");
            e.node_remove.push_back(t.get<std::string>());
        }
    if (j.contains("edge_add"))
        for (const ojson& t : j.at("edge_add")) e.edge_add.push_back(edge_template_from_doc(t));
    if (j.contains("edge_remove"))
        for (const ojson& t : j.at("edge_remove")) e.edge_remove.push_back(edge_template_from_doc(t));
    if (j.contains("attr_updates"))
        for (const ojson& t : j.at("attr_updates"))
            e.attr_updates.push_back({need_str(t, "node"), need_str(t, "slot"), need_str(t, "value")});
    if (j.contains("agent_updates"))
        for (const ojson& t : j.at("agent_updates")) e.agent_updates.push_back(agent_update_from_doc(t));
    return e;
}

WorldRule rule_from_doc(const ojson& j) {
    WorldRule r;
    r.rule_id = need_str(j, "rule_id");
    const ojson& act = need(j, "action");
    r.pattern.type = need_str(act, "type");
    if (act.contains("object")) r.pattern.object = pattern_arg_from_doc(act.at("object"));
    if (act.contains("target")) r.pattern.target = pattern_arg_from_doc(act.at("target"));
    r.var_labels = opt_str_map(j, "vars");
    if (j.contains("preconditions"))
        for (const ojson& p : j.at("preconditions")) r.preconditions.push_back(predicate_from_doc(p));
    if (j.contains("effects")) r.effects = effects_from_doc(j.at("effects"));
    r.source = opt_str(j, "source");
    return r;
}

ActionTemplate action_template_from_doc(const ojson& j) {
    ActionTemplate t;
    t.type = need_str(j, "type");
    if (j.contains("object") && !j.at("object").is_null()) t.object = need_str(j, "object");
    if (j.contains("target") && !j.at("target").is_null()) t.target = need_str(j, "target");
    return t;
}

Skill skill_from_doc(const ojson& j) {
    Skill s;
    s.skill_id = need_str(j, "skill_id");
    if (j.contains("roles")) {
        const ojson& roles = j.at("roles");
        if (!roles.is_object()) bail("bad-type", "'roles' must be an object");
        for (auto it = roles.begin(); it != roles.end(); ++it) {
            RoleSpec spec;
            spec.label = need_str(it.value(), "label");
            spec.facets = opt_str_map(it.value(), "facets");
            s.roles[it.key()] = spec;
        }
    }
    if (j.contains("pre"))
        for (const ojson& a : j.at("pre")) s.pre.push_back(action_template_from_doc(a));
    s.center = action_template_from_doc(need(j, "center"));
    if (j.contains("post"))
        for (const ojson& a : j.at("post")) s.post.push_back(action_template_from_doc(a));
    s.source = opt_str(j, "source");
    return s;
}

GoalClause goal_clause_from_doc(const ojson& j) {
    try {
        return goal_clause_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        bail("bad-goal", e.what());
    }
}

Task task_from_doc(const ojson& j) {
    Task t;
    t.task_id = need_str(j, "task_id");
    t.instruction = need_str(j, "instruction");
    for (const ojson& c : need(j, "goal")) t.goal.push_back(goal_clause_from_doc(c));
    if (j.contains("gt_skills"))
        for (const ojson& s : j.at("gt_skills")) {
            GtSkillRef ref;
            ref.skill_id = need_str(s, "skill");
            for (const auto& [k, v] : opt_str_map(s, "bind")) ref.binding[k] = v;
            t.gt_skills.push_back(ref);
        }
    if (j.contains("key_actions"))
        for (const ojson& k : j.at("key_actions")) {
            if (!k.is_array() || k.size() != 2 || !k[0].is_string() || !k[1].is_string())
                bail("bad-key-action", "key_actions entries are [type, label] pairs");
            t.key_actions.emplace_back(k[0].get<std::string>(), k[1].get<std::string>());
        }
    return t;
}

PlanTemplate template_from_doc(const ojson& j) {
    PlanTemplate t;
    for (const ojson& c : need(j, "match")) t.match.push_back(goal_clause_from_doc(c));
    for (const ojson& s : need(j, "skills")) {
        if (!s.is_string()) bail("bad-type", "'skills' entries must be strings");
        t.skills.push_back(s.get<std::string>());
    }
    return t;
}

// Labels that can ever exist in this scenario: declared objects plus nodes
// any rule can create.
std::set<std::string> collect_labels(const ScenarioFile& sf) {
    std::set<std::string> labels;
    for (const Node& n : sf.objects) labels.insert(n.label);
    for (const WorldRule& r : sf.rules)
        for (const NodeTemplate& t : r.effects.node_add) labels.insert(t.label);
    return labels;
}

// Slot vocabulary: declared lists plus every value the initial world or a
// node template already uses.
std::map<std::string, std::set<std::string>> collect_vocab(const ScenarioFile& sf) {
    std::map<std::string, std::set<std::string>> vocab;
    for (const auto& [slot, vals] : sf.state_vocabulary)
        vocab[slot].insert(vals.begin(), vals.end());
    auto absorb = [&](const std::optional<std::string>& state,
                      const std::map<std::string, std::string>& slots) {
        if (state) vocab["state"].insert(*state);
        for (const auto& [k, v] : slots) vocab["state." + k].insert(v);
    };
    for (const Node& n : sf.objects) absorb(n.state, n.state_slots);
    for (const WorldRule& r : sf.rules)
        for (const NodeTemplate& t : r.effects.node_add) absorb(t.state, t.state_slots);
    return vocab;
}

Episode build_episode(const ScenarioFile& sf) {
    Episode ep;
    ep.episode_id = sf.name;
    ep.init.areas = sf.areas;
    ep.init.nodes = sf.objects;
    ep.init.edges = sf.relations;
    ep.start_area = sf.start_area;
    ep.anchors = sf.anchors;
    ep.rules.set_verb_map(sf.verb_map);
    for (const WorldRule& r : sf.rules) ep.rules.add_rule(r);
    for (const Skill& s : sf.skills) {
        if (ep.skills.count(s.skill_id))
            throw FormatError("duplicate skill id '" + s.skill_id + "'");
        ep.skills[s.skill_id] = s;
    }
    ep.tasks = sf.tasks;
    ep.templates = sf.templates;
    ep.known_labels = collect_labels(sf);
    return ep;
}

// Key-action label for an action argument: declared instances and rule
// products report their label, areas and positional literals report the id.
std::string label_for_key(const std::string& arg, const ScenarioFile& sf) {
    for (const Node& n : sf.objects)
        if (n.instance_id == arg) return n.label;
    return arg;
}

void default_key_actions(Episode& ep, const ScenarioFile& sf) {
    for (Task& t : ep.tasks) {
        if (!t.key_actions.empty()) continue;
        for (const GtSkillRef& ref : t.gt_skills) {
            auto it = ep.skills.find(ref.skill_id);
            if (it == ep.skills.end()) continue; // validation reports this
            const ActionTemplate& center = it->second.center;
            std::string type = ep.rules.normalize(center.type).value_or(center.type);
            std::string label;
            if (center.object) {
                std::string arg = *center.object;
                if (arg.size() > 1 && arg[0] == '?') {
                    auto b = ref.binding.find(arg.substr(1));
                    arg = b == ref.binding.end() ? arg : b->second;
                }
                label = label_for_key(arg, sf);
            }
            t.key_actions.emplace_back(type, label);
        }
    }
}

std::string first_unsatisfied_clause(const GoalPredicate& goal, const WorldGraph& g) {
    for (const GoalClause& c : goal)
        if (!check_goal(GoalPredicate{c}, g)) return render_goal_clause(c);
    return "";
}

void write_text_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + p.string());
    out << content;
}

std::string read_text_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw FormatError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

std::string format_diagnostic(const Diagnostic& d) {
    return d.severity + ": " + d.code + ": " + d.message +
           (d.location.empty() ? "" : " (" + d.location + ")");
}

ParseResult parse_scenario(const std::string& text) {
    ParseResult out;
    ojson doc;
    try {
        doc = ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        out.diagnostics.push_back(
            {"error", "json-syntax", e.what(), "line " + std::to_string(line_of_byte(text, e.byte))});
        return out;
    }
    if (!doc.is_object()) {
        out.diagnostics.push_back({"error", "bad-document", "scenario document must be a JSON object", ""});
        return out;
    }

    ScenarioFile sf;
    sf.raw = doc;
    std::vector<Diagnostic>& diags = out.diagnostics;
    auto guard = [&](const std::string& where, auto&& fn) {
        try {
            fn();
        } catch (const ConvErr& e) {
            diags.push_back({"error", e.code, e.msg, where});
        } catch (const SimError& e) {
            diags.push_back({"error", e.code(), e.what(), where});
        } catch (const nlohmann::json::exception& e) {
            diags.push_back({"error", "bad-json-shape", e.what(), where});
        }
    };

    guard("/name", [&] { sf.name = need_str(doc, "name"); });
    guard("/start_area", [&] { sf.start_area = need_str(doc, "start_area"); });
    guard("/areas", [&] {
        for (const ojson& a : need(doc, "areas")) {
            if (!a.is_string()) bail("bad-type", "'areas' entries must be strings");
            sf.areas.push_back(a.get<std::string>());
        }
    });
    guard("/anchors", [&] { sf.anchors = opt_str_map(doc, "anchors"); });

    if (doc.contains("objects")) {
        std::map<std::string, size_t> seen;
        const ojson& arr = doc.at("objects");
        for (size_t i = 0; i < arr.size(); ++i) {
            std::string where = "/objects[" + std::to_string(i) + "]";
            guard(where, [&] {
                Node n = object_from_doc(arr[i]);
                auto it = seen.find(n.instance_id);
                if (it != seen.end())
                    bail("duplicate-instance", "instance '" + n.instance_id +
                                                   "' already declared at /objects[" +
                                                   std::to_string(it->second) + "]");
                seen[n.instance_id] = i;
                sf.objects.push_back(std::move(n));
            });
        }
    }

    if (doc.contains("relations")) {
        const ojson& arr = doc.at("relations");
        for (size_t i = 0; i < arr.size(); ++i)
            guard("/relations[" + std::to_string(i) + "]",
                  [&] { sf.relations.push_back(edge_from_doc(arr[i])); });
    }

    guard("/verb_normalization", [&] { sf.verb_map = opt_str_map(doc, "verb_normalization"); });
    guard("/state_vocabulary", [&] {
        if (!doc.contains("state_vocabulary")) return;
        const ojson& v = doc.at("state_vocabulary");
        if (!v.is_object()) bail("bad-type", "'state_vocabulary' must be an object");
        for (auto it = v.begin(); it != v.end(); ++it) {
            std::vector<std::string> vals;
            for (const ojson& s : it.value()) {
                if (!s.is_string()) bail("bad-type", "vocabulary values must be strings");
                vals.push_back(s.get<std::string>());
            }
            sf.state_vocabulary[it.key()] = vals;
        }
    });

    if (doc.contains("rules")) {
        const ojson& arr = doc.at("rules");
        for (size_t i = 0; i < arr.size(); ++i)
            guard("/rules[" + std::to_string(i) + "]",
                  [&] { sf.rules.push_back(rule_from_doc(arr[i])); });
    }
    if (doc.contains("skills")) {
        const ojson& arr = doc.at("skills");
        for (size_t i = 0; i < arr.size(); ++i)
            guard("/skills[" + std::to_string(i) + "]",
                  [&] { sf.skills.push_back(skill_from_doc(arr[i])); });
    }
    if (doc.contains("tasks")) {
        const ojson& arr = doc.at("tasks");
        for (size_t i = 0; i < arr.size(); ++i)
            guard("/tasks[" + std::to_string(i) + "]",
                  [&] { sf.tasks.push_back(task_from_doc(arr[i])); });
    }
    if (doc.contains("heuristic_templates")) {
        const ojson& arr = doc.at("heuristic_templates");
        for (size_t i = 0; i < arr.size(); ++i)
            guard("/heuristic_templates[" + std::to_string(i) + "]",
                  [&] { sf.templates.push_back(template_from_doc(arr[i])); });
    }

    for (const Diagnostic& d : diags)
        if (d.severity == "error") return out;
    out.scenario = std::move(sf);
    return out;
}

ValidationReport validate_scenario(const ScenarioFile& sf) {
    ValidationReport report;
    auto add = [&](const std::string& id, const std::vector<std::string>& problems) {
        CheckResult c{id, problems.empty(), ""};
        std::string joined;
        for (const std::string& p : problems) {
            if (!joined.empty()) joined += "; ";
            joined += p;
        }
        c.detail = joined;
        report.checks.push_back(std::move(c));
    };

    std::set<std::string> area_set(sf.areas.begin(), sf.areas.end());
    std::map<std::string, const Node*> instances;
    for (const Node& n : sf.objects) instances[n.instance_id] = &n;
    std::map<std::string, const Skill*> skills;
    for (const Skill& s : sf.skills) skills[s.skill_id] = &s;

    // -- structure: ids, references, anomalies ------------------------------
    std::vector<std::string> structural;
    if (!area_set.count(sf.start_area))
        structural.push_back("start_area '" + sf.start_area + "' is not a declared area");
    if (sf.areas.size() != area_set.size()) structural.push_back("duplicate area ids");
    for (const std::string& a : sf.areas)
        if (!sf.anchors.count(a)) structural.push_back("area '" + a + "' has no anchor image");
    for (const auto& [a, ref] : sf.anchors)
        if (!area_set.count(a)) structural.push_back("anchor for unknown area '" + a + "'");
    for (const Node& n : sf.objects) {
        if (!n.location)
            structural.push_back("object '" + n.instance_id + "' has no initial location");
        else if (!area_set.count(*n.location))
            structural.push_back("object '" + n.instance_id + "' placed in unknown area '" +
                                 *n.location + "'");
        if (area_set.count(n.instance_id))
            structural.push_back("instance id '" + n.instance_id + "' collides with an area id");
    }
    for (size_t i = 0; i < sf.relations.size(); ++i) {
        const Edge& e = sf.relations[i];
        if (e.kind == EdgeKind::LocatedIn)
            structural.push_back("relations[" + std::to_string(i) +
                                 "]: located_in is derived from locations, not declared");
        if (!instances.count(e.src) && !area_set.count(e.src))
            structural.push_back("relations[" + std::to_string(i) + "]: unknown src '" + e.src + "'");
        if (!instances.count(e.dst) && !area_set.count(e.dst))
            structural.push_back("relations[" + std::to_string(i) + "]: unknown dst '" + e.dst + "'");
    }
    {
        std::set<std::string> ids;
        for (const WorldRule& r : sf.rules)
            if (!ids.insert(r.rule_id).second)
                structural.push_back("duplicate rule id '" + r.rule_id + "'");
    }
    {
        std::set<std::string> ids;
        for (const Skill& s : sf.skills)
            if (!ids.insert(s.skill_id).second)
                structural.push_back("duplicate skill id '" + s.skill_id + "'");
    }
    {
        std::set<std::string> ids;
        for (const Task& t : sf.tasks)
            if (!ids.insert(t.task_id).second)
                structural.push_back("duplicate task id '" + t.task_id + "'");
    }
    for (const Skill& s : sf.skills) {
        auto check_ref = [&](const std::optional<std::string>& arg, const std::string& where) {
            if (!arg || arg->empty() || (*arg)[0] != '?') return;
            if (!s.roles.count(arg->substr(1)))
                structural.push_back("skill '" + s.skill_id + "' " + where + " references undeclared role '" +
                                     arg->substr(1) + "'");
        };
        auto sweep = [&](const ActionTemplate& a, const std::string& where) {
            check_ref(a.object, where);
            check_ref(a.target, where);
        };
        for (const ActionTemplate& a : s.pre) sweep(a, "pre");
        sweep(s.center, "center");
        for (const ActionTemplate& a : s.post) sweep(a, "post");
    }
    for (const Task& t : sf.tasks) {
        if (t.gt_skills.empty())
            structural.push_back("task '" + t.task_id + "' has an empty ground-truth chain");
        for (const GtSkillRef& ref : t.gt_skills) {
            auto it = skills.find(ref.skill_id);
            if (it == skills.end()) {
                structural.push_back("task '" + t.task_id + "' references unknown skill '" +
                                     ref.skill_id + "'");
                continue;
            }
            for (const auto& [role, spec] : it->second->roles)
                if (!ref.binding.count(role))
                    structural.push_back("task '" + t.task_id + "' leaves role '" + role +
                                         "' of skill '" + ref.skill_id + "' unbound");
            for (const auto& [role, id] : ref.binding) {
                if (!it->second->roles.count(role))
                    structural.push_back("task '" + t.task_id + "' binds undeclared role '" + role +
                                         "' of skill '" + ref.skill_id + "'");
                if (!instances.count(id))
                    structural.push_back("task '" + t.task_id + "' binds role '" + role +
                                         "' to unknown instance '" + id + "'");
            }
        }
    }
    for (size_t i = 0; i < sf.templates.size(); ++i)
        for (const std::string& sid : sf.templates[i].skills)
            if (!skills.count(sid))
                structural.push_back("heuristic_templates[" + std::to_string(i) +
                                     "] references unknown skill '" + sid + "'");
    // Rule effect hygiene: every variable must be introduced by the action
    // pattern or by a declared existential, and each precondition may
    // introduce at most one new variable.
    for (const WorldRule& r : sf.rules) {
        std::set<std::string> bound;
        if (r.pattern.object && !r.pattern.object->var.empty()) bound.insert(r.pattern.object->var);
        if (r.pattern.target && !r.pattern.target->var.empty()) bound.insert(r.pattern.target->var);
        auto is_var = [](const std::string& s) { return s.size() > 1 && s[0] == '?'; };
        for (size_t i = 0; i < r.preconditions.size(); ++i) {
            int fresh = 0;
            for (const std::string& a : r.preconditions[i].args) {
                if (!is_var(a)) continue;
                std::string v = a.substr(1);
                if (bound.count(v)) continue;
                if (!r.var_labels.count(v)) {
                    structural.push_back("rule '" + r.rule_id + "' precondition " + std::to_string(i) +
                                         " uses variable '?" + v + "' with no declared label");
                    bound.insert(v); // report once
                    continue;
                }
                ++fresh;
                bound.insert(v);
                if (fresh > 1)
                    structural.push_back("rule '" + r.rule_id + "' precondition " + std::to_string(i) +
                                         " opens more than one variable");
            }
        }
        auto check_term = [&](const std::string& term, const std::string& where) {
            if (is_var(term) && !bound.count(term.substr(1)))
                structural.push_back("rule '" + r.rule_id + "' " + where + " uses unbound variable '" +
                                     term + "'");
        };
        for (const std::string& n : r.effects.node_remove) check_term(n, "node_remove");
        for (const EdgeTemplate& e : r.effects.edge_add) {
            check_term(e.src, "edge_add");
            check_term(e.dst, "edge_add");
        }
        for (const EdgeTemplate& e : r.effects.edge_remove) {
            check_term(e.src, "edge_remove");
            check_term(e.dst, "edge_remove");
        }
        for (const AttrUpdate& u : r.effects.attr_updates) {
            check_term(u.node, "attr_updates");
            check_term(u.value, "attr_updates");
        }
        for (const AgentUpdate& u : r.effects.agent_updates) {
            if (!u.arg.empty()) check_term(u.arg, "agent_updates");
            check_term(u.value, "agent_updates");
        }
    }
    add("structure", structural);

    // -- verbs-normalized ----------------------------------------------------
    std::vector<std::string> verb_problems;
    std::set<std::string> rule_types;
    for (const WorldRule& r : sf.rules) rule_types.insert(r.pattern.type);
    for (const auto& [raw, norm] : sf.verb_map)
        if (!rule_types.count(norm))
            verb_problems.push_back("alias '" + raw + "' normalizes to '" + norm +
                                    "' which names no rule");
    auto normalizes = [&](const std::string& verb) {
        if (sf.verb_map.count(verb) || rule_types.count(verb)) return true;
        for (const auto& [raw, norm] : sf.verb_map)
            if (norm == verb) return true;
        return false;
    };
    for (const Skill& s : sf.skills) {
        auto sweep = [&](const ActionTemplate& a) {
            if (!normalizes(a.type))
                verb_problems.push_back("skill '" + s.skill_id + "' uses verb '" + a.type +
                                        "' outside the normalization table");
        };
        for (const ActionTemplate& a : s.pre) sweep(a);
        sweep(s.center);
        for (const ActionTemplate& a : s.post) sweep(a);
    }
    add("verbs-normalized", verb_problems);

    // -- actions-covered: every expanded GT primitive has a rule -------------
    std::vector<std::string> coverage_problems;
    std::map<std::string, std::vector<PrimitiveAction>> chains; // task -> expansion
    for (const Task& t : sf.tasks) {
        for (const GtSkillRef& ref : t.gt_skills) {
            auto it = skills.find(ref.skill_id);
            if (it == skills.end()) continue; // already a structure failure
            try {
                std::vector<PrimitiveAction> prims = expand_skill(*it->second, ref.binding);
                auto& chain = chains[t.task_id];
                chain.insert(chain.end(), prims.begin(), prims.end());
            } catch (const SimError& e) {
                coverage_problems.push_back("task '" + t.task_id + "' skill '" + ref.skill_id +
                                            "': " + e.what());
            }
        }
        for (const PrimitiveAction& a : chains[t.task_id])
            if (!normalizes(a.type))
                coverage_problems.push_back("task '" + t.task_id + "' uses action '" + to_string(a) +
                                            "' no rule can accept");
    }
    add("actions-covered", coverage_problems);

    // -- storage-pairing: open/close balance per GT chain --------------------
    std::vector<std::string> pairing_problems;
    for (const Task& t : sf.tasks) {
        std::map<std::string, int> balance;
        for (const PrimitiveAction& a : chains[t.task_id]) {
            if (!a.object) continue;
            std::string norm;
            if (auto it = sf.verb_map.find(a.type); it != sf.verb_map.end()) norm = it->second;
            else norm = a.type;
            if (norm == "open") balance[*a.object] += 1;
            if (norm == "close") balance[*a.object] -= 1;
        }
        for (const auto& [obj, bal] : balance) {
            if (bal != 0)
                pairing_problems.push_back("task '" + t.task_id + "': open/close imbalance of " +
                                           std::to_string(bal) + " on '" + obj + "'");
            auto it = instances.find(obj);
            if (it == instances.end())
                pairing_problems.push_back("task '" + t.task_id + "': opens unknown container '" +
                                           obj + "'");
            else if (!it->second->state || (*it->second->state != "open" && *it->second->state != "closed"))
                pairing_problems.push_back("task '" + t.task_id + "': '" + obj +
                                           "' has no open/closed state to toggle");
        }
    }
    add("storage-pairing", pairing_problems);

    // -- state-vocabulary -----------------------------------------------------
    std::vector<std::string> vocab_problems;
    std::map<std::string, std::set<std::string>> vocab = collect_vocab(sf);
    auto literal = [](const std::string& v) {
        return v.empty() || (v[0] != '?' && v[0] != '@');
    };
    auto check_value = [&](const std::string& slot, const std::string& value, const std::string& where) {
        if (!literal(value)) return;
        if (slot == "amount") {
            try {
                amount_from_string(value);
            } catch (const SimError&) {
                vocab_problems.push_back(where + ": '" + value + "' is not an amount");
            }
            return;
        }
        if (slot == "location") {
            if (!area_set.count(value))
                vocab_problems.push_back(where + ": location '" + value + "' is not a declared area");
            return;
        }
        auto it = vocab.find(slot);
        if (it == vocab.end() || !it->second.count(value))
            vocab_problems.push_back(where + ": value '" + value + "' not in vocabulary for slot '" +
                                     slot + "'");
    };
    for (const WorldRule& r : sf.rules)
        for (size_t i = 0; i < r.effects.attr_updates.size(); ++i) {
            const AttrUpdate& u = r.effects.attr_updates[i];
            check_value(u.slot, u.value,
                        "rule '" + r.rule_id + "' attr_updates[" + std::to_string(i) + "]");
        }
    for (const Task& t : sf.tasks)
        for (const GoalClause& c : t.goal) {
            if (c.kind != GoalClause::Kind::Slot || c.slot == "exists") continue;
            check_value(c.slot, c.value, "task '" + t.task_id + "' goal");
        }
    for (const Skill& s : sf.skills)
        for (const auto& [role, spec] : s.roles)
            for (const auto& [slot, value] : spec.facets)
                check_value(slot == "state" || slot == "amount" || slot == "location" ? slot
                                                                                      : "state." + slot,
                            value, "skill '" + s.skill_id + "' role '" + role + "'");
    add("state-vocabulary", vocab_problems);

    // -- goal-labels ----------------------------------------------------------
    std::vector<std::string> label_problems;
    std::set<std::string> labels = collect_labels(sf);
    auto check_selector = [&](bool is_label, const std::string& sel, const std::string& where) {
        if (is_label) {
            if (!labels.count(sel))
                label_problems.push_back(where + ": label '" + sel + "' can never occur");
        } else if (!instances.count(sel) && !area_set.count(sel)) {
            label_problems.push_back(where + ": unknown instance '" + sel + "'");
        }
    };
    for (const Task& t : sf.tasks) {
        for (const GoalClause& c : t.goal) {
            std::string where = "task '" + t.task_id + "' goal";
            if (c.kind == GoalClause::Kind::Slot) {
                check_selector(c.selector_is_label, c.selector, where);
            } else {
                check_selector(c.container_is_label, c.container, where);
                // Relation objects are frequently rule products; labels cover
                // them, concrete ids must exist up front.
                check_selector(c.object_is_label, c.object, where);
            }
        }
        for (const auto& [type, label] : t.key_actions)
            if (!label.empty() && !labels.count(label) && !area_set.count(label) &&
                !instances.count(label))
                label_problems.push_back("task '" + t.task_id + "' key action label '" + label +
                                         "' can never occur");
    }
    add("goal-labels", label_problems);

    return report;
}

nlohmann::ordered_json record_to_json(const TransitionRecord& r) {
    ojson j;
    j["skill_id"] = r.skill_id;
    j["order"] = r.order;
    j["pre_digest"] = r.pre_digest;
    j["pre_agent"] = agent_to_json(r.pre_agent);
    ojson prims = ojson::array();
    for (const PrimitiveAction& a : r.primitives) prims.push_back(action_to_json(a));
    j["primitives"] = prims;
    j["post_digest"] = r.post_digest;
    j["post_agent"] = agent_to_json(r.post_agent);
    j["delta"] = delta_to_json(r.delta);
    j["exec_meta"] = r.exec_meta;
    return j;
}

TransitionRecord record_from_json(const nlohmann::json& j) {
    TransitionRecord r;
    r.skill_id = j.at("skill_id").get<std::string>();
    r.order = j.at("order").get<int>();
    r.pre_digest = j.at("pre_digest").get<std::string>();
    r.pre_agent = agent_from_json(j.at("pre_agent"));
    for (const auto& a : j.at("primitives")) r.primitives.push_back(action_from_json(a));
    r.post_digest = j.at("post_digest").get<std::string>();
    r.post_agent = agent_from_json(j.at("post_agent"));
    r.delta = delta_from_json(j.at("delta"));
    r.exec_meta = j.at("exec_meta").get<std::string>();
    return r;
}

CompiledEpisode compile_episode(const ScenarioFile& sf) {
    CompiledEpisode ce;
    ce.episode = build_episode(sf);
    default_key_actions(ce.episode, sf);
    ce.scenario_doc = sf.raw;

    WorldGraph g = WorldGraph::instantiate(ce.episode.init);
    AgentPhysState agent;
    agent.current_area = sf.start_area;
    ce.init = g;
    ce.start_agent = agent;
    ce.snapshots[snapshot_hash(g)] = g;

    for (const Task& task : ce.episode.tasks) {
        TaskGroundTruth tg;
        tg.pre = g;
        tg.pre_agent = agent;
        std::vector<TransitionRecord> task_records;
        int order = 0;
        for (const GtSkillRef& ref : task.gt_skills) {
            auto it = ce.episode.skills.find(ref.skill_id);
            if (it == ce.episode.skills.end())
                throw ReplayFailure("task '" + task.task_id + "' references unknown skill '" +
                                    ref.skill_id + "'");
            std::vector<PrimitiveAction> prims = expand_skill(it->second, ref.binding);
            TransitionRecord rec;
            rec.skill_id = ref.skill_id;
            rec.order = order++;
            rec.pre_digest = snapshot_hash(g);
            rec.pre_agent = agent;
            WorldGraph pre = g;
            for (size_t i = 0; i < prims.size(); ++i) {
                ExecResult res = execute_primitive(g, agent, ce.episode.rules, prims[i]);
                if (res.feedback.outcome != Outcome::Success)
                    throw ReplayFailure("task '" + task.task_id + "', skill '" + ref.skill_id +
                                        "', action " + std::to_string(i) + " (" +
                                        to_string(prims[i]) + "): " + to_string(res.feedback.outcome) +
                                        " " + res.feedback.violated_text);
                g = std::move(res.graph);
                agent = res.agent;
            }
            rec.primitives = prims;
            rec.post_digest = snapshot_hash(g);
            rec.post_agent = agent;
            rec.delta = graph_diff_full(pre, g);
            rec.exec_meta = "ok";
            ce.snapshots[rec.post_digest] = g;
            tg.gt_primitives.insert(tg.gt_primitives.end(), prims.begin(), prims.end());
            task_records.push_back(std::move(rec));
        }
        if (!check_goal(task.goal, g, ce.episode.known_labels))
            throw ReplayFailure("task '" + task.task_id + "': goal not satisfied after GT chain: " +
                                first_unsatisfied_clause(task.goal, g));
        tg.gt_end = g;
        tg.gt_end_agent = agent;
        tg.changed = compute_changed_slots(tg.pre, g);
        tg.budget = 4 * static_cast<int>(tg.gt_primitives.size());
        ce.gt.push_back(std::move(tg));
        ce.records.push_back(std::move(task_records));
    }
    return ce;
}

void write_episode_dir(const CompiledEpisode& ce, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "snapshots");
    fs::create_directories(fs::path(dir) / "records");

    ojson manifest;
    manifest["format"] = "hworld-episode";
    manifest["version"] = 1;
    manifest["episode_id"] = ce.episode.episode_id;
    manifest["start_area"] = ce.episode.start_area;
    manifest["start_agent"] = agent_to_json(ce.start_agent);
    manifest["init_digest"] = snapshot_hash(ce.init);
    ojson tasks = ojson::array();
    for (size_t i = 0; i < ce.episode.tasks.size(); ++i) {
        const Task& t = ce.episode.tasks[i];
        const TaskGroundTruth& tg = ce.gt[i];
        ojson tj;
        tj["task_id"] = t.task_id;
        tj["instruction"] = t.instruction;
        tj["pre_digest"] = snapshot_hash(tg.pre);
        tj["pre_agent"] = agent_to_json(tg.pre_agent);
        tj["post_digest"] = snapshot_hash(tg.gt_end);
        tj["post_agent"] = agent_to_json(tg.gt_end_agent);
        tj["budget"] = tg.budget;
        ojson prims = ojson::array();
        for (const PrimitiveAction& a : tg.gt_primitives) prims.push_back(action_to_json(a));
        tj["gt_primitives"] = prims;
        ojson keys = ojson::array();
        for (const auto& [type, label] : t.key_actions) keys.push_back(ojson::array({type, label}));
        tj["key_actions"] = keys;
        ojson changed = ojson::array();
        for (const ChangedSlot& c : tg.changed) changed.push_back(changed_slot_to_json(c));
        tj["changed_slots"] = changed;
        tasks.push_back(std::move(tj));
    }
    manifest["tasks"] = tasks;
    manifest["scenario"] = ce.scenario_doc;
    write_text_file(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");

    for (const auto& [digest, graph] : ce.snapshots)
        write_text_file(fs::path(dir) / "snapshots" / (digest + ".json"),
                        serialize_graph(graph).dump(2) + "\n");

    for (size_t i = 0; i < ce.records.size(); ++i) {
        ojson rj;
        rj["task_id"] = ce.episode.tasks[i].task_id;
        ojson recs = ojson::array();
        for (const TransitionRecord& r : ce.records[i]) recs.push_back(record_to_json(r));
        rj["records"] = recs;
        write_text_file(fs::path(dir) / "records" / (ce.episode.tasks[i].task_id + ".json"),
                        rj.dump(2) + "\n");
    }
}

CompiledEpisode load_episode_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    ojson manifest = ojson::parse(read_text_file(fs::path(dir) / "manifest.json"));
    if (manifest.value("format", "") != "hworld-episode" || manifest.value("version", 0) != 1)
        throw FormatError("not an episode directory: " + dir);

    ParseResult parsed = parse_scenario(manifest.at("scenario").dump());
    if (!parsed.ok()) {
        std::string first = parsed.diagnostics.empty() ? "unknown error"
                                                       : format_diagnostic(parsed.diagnostics[0]);
        throw FormatError("embedded scenario does not parse: " + first);
    }

    CompiledEpisode ce;
    ce.episode = build_episode(*parsed.scenario);
    default_key_actions(ce.episode, *parsed.scenario);
    ce.scenario_doc = parsed.scenario->raw;
    ce.init = WorldGraph::instantiate(ce.episode.init);
    ce.start_agent = agent_from_json(manifest.at("start_agent"));
    if (snapshot_hash(ce.init) != manifest.at("init_digest").get<std::string>())
        throw InitMismatch("episode dir init digest does not match the embedded scenario");

    for (const auto& entry : fs::directory_iterator(fs::path(dir) / "snapshots")) {
        if (entry.path().extension() != ".json") continue;
        WorldGraph g = parse_graph(nlohmann::json::parse(read_text_file(entry.path())));
        std::string digest = snapshot_hash(g);
        if (digest != entry.path().stem().string())
            throw FormatError("snapshot " + entry.path().filename().string() +
                              " does not match its digest");
        ce.snapshots[digest] = std::move(g);
    }

    const ojson& tasks = manifest.at("tasks");
    if (tasks.size() != ce.episode.tasks.size())
        throw FormatError("manifest task count does not match the embedded scenario");
    for (size_t i = 0; i < tasks.size(); ++i) {
        const ojson& tj = tasks[i];
        if (tj.at("task_id").get<std::string>() != ce.episode.tasks[i].task_id)
            throw FormatError("manifest task order does not match the embedded scenario");
        TaskGroundTruth tg;
        tg.pre = ce.snapshots.at(tj.at("pre_digest").get<std::string>());
        tg.pre_agent = agent_from_json(tj.at("pre_agent"));
        tg.gt_end = ce.snapshots.at(tj.at("post_digest").get<std::string>());
        tg.gt_end_agent = agent_from_json(tj.at("post_agent"));
        for (const auto& a : tj.at("gt_primitives")) tg.gt_primitives.push_back(action_from_json(a));
        for (const auto& c : tj.at("changed_slots")) tg.changed.push_back(changed_slot_from_json(c));
        tg.budget = tj.at("budget").get<int>();
        ce.gt.push_back(std::move(tg));
        // key_actions in the manifest override the defaults derived above
        std::vector<std::pair<std::string, std::string>> keys;
        for (const auto& k : tj.at("key_actions"))
            keys.emplace_back(k[0].get<std::string>(), k[1].get<std::string>());
        ce.episode.tasks[i].key_actions = std::move(keys);

        ojson rj = ojson::parse(
            read_text_file(fs::path(dir) / "records" / (ce.episode.tasks[i].task_id + ".json")));
        std::vector<TransitionRecord> recs;
        for (const auto& r : rj.at("records")) recs.push_back(record_from_json(r));
        ce.records.push_back(std::move(recs));
    }
    return ce;
}

AuditReport audit_compiled(const CompiledEpisode& ce) {
    AuditReport rep;

    // Coverage: replayed record primitives must be exactly the authored
    // expansions, position by position.
    int authored_total = 0, covered = 0;
    for (size_t i = 0; i < ce.episode.tasks.size(); ++i) {
        const Task& t = ce.episode.tasks[i];
        std::vector<PrimitiveAction> authored;
        for (const GtSkillRef& ref : t.gt_skills) {
            auto it = ce.episode.skills.find(ref.skill_id);
            if (it == ce.episode.skills.end()) continue;
            std::vector<PrimitiveAction> prims = expand_skill(it->second, ref.binding);
            authored.insert(authored.end(), prims.begin(), prims.end());
        }
        std::vector<PrimitiveAction> recorded;
        if (i < ce.records.size())
            for (const TransitionRecord& r : ce.records[i])
                recorded.insert(recorded.end(), r.primitives.begin(), r.primitives.end());
        authored_total += static_cast<int>(authored.size());
        for (size_t k = 0; k < authored.size(); ++k)
            if (k < recorded.size() && recorded[k] == authored[k]) ++covered;
    }
    rep.coverage = authored_total == 0 ? 1.0 : double(covered) / double(authored_total);

    // Hallucination: every symbol in a record must trace back to a
    // declaration (instance, area, rule verb, node template, vocabulary).
    std::set<std::string> known_ids;
    for (const auto& [id, node] : ce.init.nodes()) known_ids.insert(id);
    std::vector<std::regex> template_ids;
    std::set<std::string> rule_verbs;
    for (const WorldRule& r : ce.episode.rules.rules()) {
        rule_verbs.insert(r.pattern.type);
        for (const NodeTemplate& t : r.effects.node_add) {
            std::string pat;
            for (char c : t.instance_id) {
                if (std::string("\\^$.|?*+()[]{}").find(c) != std::string::npos) pat += '\\';
                pat += c;
            }
            size_t brace = pat.find("\\{n\\}");
            if (brace != std::string::npos) pat.replace(brace, 5, "[0-9]+");
            template_ids.emplace_back("^" + pat + "$");
        }
    }
    auto id_known = [&](const std::string& id) {
        if (known_ids.count(id)) return true;
        for (const std::regex& re : template_ids)
            if (std::regex_match(id, re)) return true;
        return false;
    };
    int symbols = 0, unknown = 0;
    auto tally_id = [&](const std::string& id) {
        ++symbols;
        if (!id_known(id)) {
            ++unknown;
            rep.notes.push_back("undeclared id '" + id + "' in records");
        }
    };
    for (const auto& task_records : ce.records)
        for (const TransitionRecord& r : task_records) {
            for (const PrimitiveAction& a : r.primitives) {
                ++symbols;
                if (!rule_verbs.count(a.type) &&
                    !ce.episode.rules.normalize(a.type).has_value()) {
                    ++unknown;
                    rep.notes.push_back("undeclared verb '" + a.type + "' in records");
                }
            }
            for (const AttrChange& c : r.delta.changed) tally_id(c.instance_id);
            for (const Node& n : r.delta.appeared) {
                tally_id(n.instance_id);
                ++symbols;
                if (!ce.episode.known_labels.count(n.label)) {
                    ++unknown;
                    rep.notes.push_back("undeclared label '" + n.label + "' in records");
                }
            }
            for (const std::string& id : r.delta.disappeared) tally_id(id);
            for (const EdgeChange& ec : r.delta.edge_changes) {
                tally_id(ec.edge.src);
                tally_id(ec.edge.dst);
            }
        }
    rep.hallucination_rate = symbols == 0 ? 0.0 : double(unknown) / double(symbols);

    // Missing key state: goal clauses must hold on the task's final snapshot.
    int clauses = 0, unsatisfied = 0;
    for (size_t i = 0; i < ce.episode.tasks.size() && i < ce.gt.size(); ++i)
        for (const GoalClause& c : ce.episode.tasks[i].goal) {
            ++clauses;
            if (!check_goal(GoalPredicate{c}, ce.gt[i].gt_end)) {
                ++unsatisfied;
                rep.notes.push_back("task '" + ce.episode.tasks[i].task_id +
                                    "': unsatisfied at chain end: " + render_goal_clause(c));
            }
        }
    rep.missing_key_state_rate = clauses == 0 ? 0.0 : double(unsatisfied) / double(clauses);

    // Replay: every record must re-execute from its pre snapshot to its post
    // digest and agent state.
    int records = 0, replayed = 0;
    for (const auto& task_records : ce.records)
        for (const TransitionRecord& r : task_records) {
            ++records;
            auto it = ce.snapshots.find(r.pre_digest);
            if (it == ce.snapshots.end()) {
                rep.notes.push_back("record '" + r.skill_id + "': missing pre snapshot");
                continue;
            }
            WorldGraph g = it->second;
            AgentPhysState agent = r.pre_agent;
            bool ok = true;
            for (const PrimitiveAction& a : r.primitives) {
                ExecResult res = execute_primitive(g, agent, ce.episode.rules, a);
                if (res.feedback.outcome != Outcome::Success) {
                    ok = false;
                    rep.notes.push_back("record '" + r.skill_id + "': replay step failed: " +
                                        to_string(a));
                    break;
                }
                g = std::move(res.graph);
                agent = res.agent;
            }
            if (ok && snapshot_hash(g) == r.post_digest && agent == r.post_agent)
                ++replayed;
            else if (ok)
                rep.notes.push_back("record '" + r.skill_id + "': replay diverged from post digest");
        }
    rep.replay_success_rate = records == 0 ? 1.0 : double(replayed) / double(records);

    // Temporal consistency: orders ascend, digests chain within a task, and
    // consecutive tasks hand the world over without resets.
    int checks = 0, violations = 0;
    for (size_t i = 0; i < ce.records.size(); ++i) {
        const auto& recs = ce.records[i];
        for (size_t k = 0; k < recs.size(); ++k) {
            ++checks;
            if (recs[k].order != static_cast<int>(k)) {
                ++violations;
                rep.notes.push_back("task '" + ce.episode.tasks[i].task_id + "' record " +
                                    std::to_string(k) + ": out-of-order index");
            }
            if (k > 0) {
                ++checks;
                if (recs[k].pre_digest != recs[k - 1].post_digest) {
                    ++violations;
                    rep.notes.push_back("task '" + ce.episode.tasks[i].task_id + "' record " +
                                        std::to_string(k) + ": digest chain break");
                }
            }
        }
        if (i < ce.gt.size() && !recs.empty()) {
            ++checks;
            if (recs.front().pre_digest != snapshot_hash(ce.gt[i].pre)) ++violations;
            ++checks;
            if (recs.back().post_digest != snapshot_hash(ce.gt[i].gt_end)) ++violations;
        }
        if (i > 0 && i < ce.gt.size()) {
            ++checks;
            if (snapshot_hash(ce.gt[i].pre) != snapshot_hash(ce.gt[i - 1].gt_end)) {
                ++violations;
                rep.notes.push_back("task '" + ce.episode.tasks[i].task_id +
                                    "': world was reset between tasks");
            }
        }
    }
    rep.temporal_error_rate = checks == 0 ? 0.0 : double(violations) / double(checks);

    return rep;
}

} // namespace hworld
