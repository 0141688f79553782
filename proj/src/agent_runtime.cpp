#include "hworld/agent_runtime.hpp"

#include <algorithm>

namespace hworld {

namespace {

// Belief projected onto a graph view so goal clauses can be checked against
// what the agent thinks is true. Hypothesis positions ("not at X") carry no
// usable location and project as absent; the "feedback" marker facet is
// internal and skipped.
WorldGraph project_belief(const BeliefGraph& b) {
    std::map<std::string, Node> nodes;
    for (const auto& [id, bn] : b.nodes) {
        Node n;
        n.instance_id = id;
        n.label = bn.label;
        n.kind = NodeKind::Object;
        if (bn.position && !bn.position->hypothesis && bn.position->value != "(held)")
            n.location = bn.position->value;
        for (const auto& [facet, sv] : bn.states) {
            if (facet == "feedback" || sv.hypothesis) continue;
            if (facet == "state") n.state = sv.value;
            else if (facet == "amount") {
                try {
                    n.amount = amount_from_string(sv.value);
                } catch (const SimError&) {
                }
            } else n.state_slots[facet] = sv.value;
        }
        nodes[id] = std::move(n);
    }
    return subgraph_from_parts({}, std::move(nodes), b.edges, b.current_step);
}

std::vector<std::string> unsatisfied_clauses(const GoalPredicate& goal, const WorldGraph& view) {
    std::vector<std::string> out;
    for (const GoalClause& c : goal)
        if (!check_goal(GoalPredicate{c}, view)) out.push_back(render_goal_clause(c));
    return out;
}

bool clause_matches(const GoalClause& pat, const GoalClause& c) {
    if (pat.kind != c.kind) return false;
    auto wild = [](const std::string& s) { return s == "*"; };
    if (pat.kind == GoalClause::Kind::Slot) {
        if (!wild(pat.selector) &&
            (pat.selector != c.selector || pat.selector_is_label != c.selector_is_label))
            return false;
        if (pat.slot != c.slot) return false;
        return wild(pat.value) || pat.value == c.value;
    }
    if (pat.relation != c.relation) return false;
    if (!wild(pat.container) &&
        (pat.container != c.container || pat.container_is_label != c.container_is_label))
        return false;
    if (!wild(pat.object) && (pat.object != c.object || pat.object_is_label != c.object_is_label))
        return false;
    return true;
}

bool template_matches(const PlanTemplate& t, const GoalPredicate& goal) {
    for (const GoalClause& pat : t.match) {
        bool any = false;
        for (const GoalClause& c : goal)
            if (clause_matches(pat, c)) {
                any = true;
                break;
            }
        if (!any) return false;
    }
    return !t.match.empty();
}

std::vector<PlanStep> drop_completed(const std::vector<std::string>& skills, size_t completed) {
    std::vector<PlanStep> out;
    for (size_t i = completed; i < skills.size(); ++i) out.push_back({skills[i], {}});
    return out;
}

} // namespace

PlanResponse HeuristicPlanner::plan(const PlanRequest& req) {
    PlanResponse resp;
    WorldGraph believed = project_belief(req.belief);
    if (check_goal(req.goal, believed)) return resp; // nothing left to do as far as we know
    for (const PlanTemplate& t : episode_->templates) {
        if (!template_matches(t, req.goal)) continue;
        resp.steps = drop_completed(t.skills, req.completed.size());
        return resp;
    }
    resp.give_up = true;
    return resp;
}

RepairResponse HeuristicPlanner::repair(const RepairRequest& req) {
    RepairResponse resp;
    if (!req.feedback.violated) return resp;
    const Predicate& v = *req.feedback.violated;
    switch (v.kind) {
    case PredicateKind::At: {
        // Wrong place: go to where we believe the object is. A negated, held,
        // or empty position gives the repair nothing to aim at; replanning
        // (and its oracle sweep) is the recovery for those.
        if (v.args.empty()) return resp;
        auto it = req.belief.nodes.find(v.args[0]);
        if (it == req.belief.nodes.end() || !it->second.position) return resp;
        const std::string& area = it->second.position->value;
        if (area.empty() || area == "(held)" || area[0] == '!') return resp;
        resp.correction = PrimitiveAction{"go_to", area, std::nullopt};
        return resp;
    }
    case PredicateKind::State: {
        // Open/closed mismatches are the only state the agent can toggle
        // blindly.
        if (v.args.size() < 2) return resp;
        const std::string& want = v.args.back();
        if (want == "closed") resp.correction = PrimitiveAction{"close", v.args[0], std::nullopt};
        if (want == "open") resp.correction = PrimitiveAction{"open", v.args[0], std::nullopt};
        return resp;
    }
    case PredicateKind::Hand: {
        // A rule wanted a specific object in hand.
        if (v.args.size() == 2 && v.args[1] != "empty")
            resp.correction = PrimitiveAction{"pick_up", v.args[1], std::nullopt};
        return resp;
    }
    default: return resp;
    }
}

PlanResponse ScriptedPlanner::plan(const PlanRequest& req) {
    PlanResponse resp;
    auto it = plans_.find(req.task_id);
    if (it == plans_.end()) {
        resp.give_up = true;
        return resp;
    }
    const std::vector<PlanStep>& steps = it->second;
    for (size_t i = req.completed.size(); i < steps.size(); ++i) resp.steps.push_back(steps[i]);
    return resp;
}

RepairResponse ScriptedPlanner::repair(const RepairRequest&) { return {}; }

std::string log_to_jsonl(const TaskRunLog& log) {
    std::string out;
    for (const nlohmann::ordered_json& e : log.events) out += e.dump() + "\n";
    return out;
}

std::optional<std::string> bind_instance(const BeliefGraph& belief, const AgentPhysState& agent,
                                         const RoleSpec& spec) {
    auto facets_ok = [&](const BeliefNode& n) {
        for (const auto& [facet, want] : spec.facets) {
            auto it = n.states.find(facet);
            if (it == n.states.end() || it->second.value != want) return false;
        }
        return true;
    };
    // Hands first: a held matching instance wins outright.
    for (const std::optional<std::string>& hand : {agent.left_hand, agent.right_hand}) {
        if (!hand) continue;
        auto it = belief.nodes.find(*hand);
        if (it != belief.nodes.end() && it->second.label == spec.label && facets_ok(it->second))
            return *hand;
    }
    const BeliefNode* best = nullptr;
    for (const auto& [id, n] : belief.nodes) {
        if (n.label != spec.label || !facets_ok(n)) continue;
        if (!best) {
            best = &n;
            continue;
        }
        bool n_hyp = !n.position || n.position->hypothesis;
        bool b_hyp = !best->position || best->position->hypothesis;
        if (n_hyp != b_hyp) {
            if (b_hyp) best = &n;
            continue;
        }
        if (n.meta.confidence != best->meta.confidence) {
            if (n.meta.confidence > best->meta.confidence) best = &n;
            continue;
        }
        int n_seen = n.meta.last_observed_step.value_or(-1);
        int b_seen = best->meta.last_observed_step.value_or(-1);
        if (n_seen != b_seen) {
            if (n_seen > b_seen) best = &n;
            continue;
        }
        // id ascending: the map iterates in id order, keep the earlier one
    }
    if (!best) return std::nullopt;
    return best->instance_id;
}

VisualReport visual_oracle(const WorldGraph& g, const std::string& area) {
    if (!g.is_area(area)) throw UnknownArea("visual oracle aimed at unknown area '" + area + "'");
    VisualReport rep;
    rep.area = area;
    for (const auto& [id, n] : g.nodes()) {
        if (n.kind == NodeKind::Area || !n.location || *n.location != area) continue;
        VisualReport::Entry e;
        e.instance_id = id;
        e.label = n.label;
        e.area = area;
        std::vector<std::string> containers = g.containers_of(id);
        if (!containers.empty()) e.container = containers.front();
        e.state = n.state;
        e.state_slots = n.state_slots;
        e.amount = n.amount;
        rep.entries.push_back(std::move(e));
    }
    return rep;
}

namespace {

// Destination for the implicit navigation step in front of a skill: the
// believed position of the first primitive's object. Explicit go_to plans,
// held objects and hypothesis positions route nowhere.
std::optional<std::string> route_destination(const std::vector<PrimitiveAction>& prims,
                                             const BeliefGraph& belief, const AgentPhysState& agent,
                                             const RuleBase& rules) {
    if (prims.empty() || !prims[0].object) return std::nullopt;
    if (rules.normalize(prims[0].type).value_or(prims[0].type) == "go_to") return std::nullopt;
    const std::string& id = *prims[0].object;
    if (agent.holds(id)) return std::nullopt;
    auto it = belief.nodes.find(id);
    if (it == belief.nodes.end() || !it->second.position || it->second.position->hypothesis)
        return std::nullopt;
    const std::string& area = it->second.position->value;
    if (area.empty() || area == "(held)" || area == agent.current_area) return std::nullopt;
    return area;
}

struct TaskCtx {
    WorldGraph* world;
    AgentPhysState* agent;
    BeliefGraph* belief;
    const CompiledEpisode* ce;
    const RunConfig* cfg;
    TaskRunLog* log;
    const Task* task;
    PlannerInterface* planner;
    int budget = 0;
    Observation obs;
};

Observation observe_now(TaskCtx& ctx) {
    const std::string& area = ctx.agent->current_area;
    auto it = ctx.ce->episode.anchors.find(area);
    std::string image = it == ctx.ce->episode.anchors.end() ? "" : it->second;
    return observe(ctx.ce->init, *ctx.world, area, image);
}

void log_event(TaskCtx& ctx, nlohmann::ordered_json e) { ctx.log->events.push_back(std::move(e)); }

std::vector<std::string> belief_hints(TaskCtx& ctx) {
    if (ctx.cfg->interface != "diff") return {};
    return unsatisfied_clauses(ctx.task->goal, project_belief(*ctx.belief));
}

bool goal_reached(TaskCtx& ctx) {
    return check_goal(ctx.task->goal, *ctx.world, ctx.ce->episode.known_labels);
}

// Submits one primitive: executes, advances the world, observes, updates
// belief, logs. Returns the feedback. `kind` tags the log line ("action",
// "route", "repair", "retry").
Feedback submit(TaskCtx& ctx, const PrimitiveAction& a, const char* kind) {
    ExecResult res = execute_primitive(*ctx.world, *ctx.agent, ctx.ce->episode.rules, a);
    ctx.log->counters.steps += 1;
    ctx.log->attempted.push_back(a);
    if (res.feedback.outcome == Outcome::Success) {
        ctx.log->counters.valid += 1;
        *ctx.world = std::move(res.graph);
        *ctx.agent = res.agent;
    }
    if (ctx.cfg->interface == "diff" && res.feedback.outcome != Outcome::Success)
        res.feedback.diff_hint = belief_hints(ctx);
    ctx.obs = observe_now(ctx);
    *ctx.belief = update(*ctx.belief, ctx.obs, &res.feedback, ctx.cfg->belief);
    ctx.planner->on_observation(ctx.obs);
    ctx.planner->on_feedback(res.feedback);
    nlohmann::ordered_json e;
    e["event"] = kind;
    e["action"] = action_to_json(a);
    e["outcome"] = to_string(res.feedback.outcome);
    if (res.feedback.outcome != Outcome::Success) e["violated"] = res.feedback.violated_text;
    if (!res.feedback.diff_hint.empty()) e["diff_hint"] = res.feedback.diff_hint;
    e["steps_used"] = ctx.log->counters.steps;
    log_event(ctx, std::move(e));
    return res.feedback;
}

} // namespace

TaskRunLog run_task(WorldGraph& world, AgentPhysState& agent, BeliefGraph& belief,
                    const CompiledEpisode& ce, size_t task_index, PlannerInterface& planner,
                    const RunConfig& cfg) {
    const Task& task = ce.episode.tasks.at(task_index);
    const TaskGroundTruth& gt = ce.gt.at(task_index);

    TaskRunLog log;
    log.task_id = task.task_id;

    TaskCtx ctx{&world, &agent, &belief, &ce, &cfg, &log, &task, &planner, 0, {}};
    ctx.budget = cfg.step_budget_factor * static_cast<int>(gt.gt_primitives.size());

    {
        nlohmann::ordered_json e;
        e["event"] = "task_start";
        e["task_id"] = task.task_id;
        e["instruction"] = task.instruction;
        e["budget"] = ctx.budget;
        e["interface"] = cfg.interface;
        log_event(ctx, std::move(e));
    }
    planner.on_task_context(task, agent);

    ctx.obs = observe_now(ctx);
    belief = update(belief, ctx.obs, nullptr, cfg.belief);
    planner.on_observation(ctx.obs);
    {
        nlohmann::ordered_json e;
        e["event"] = "observation";
        e["area"] = ctx.obs.area;
        e["world_step"] = ctx.obs.step;
        e["digest"] = observation_digest(ctx.obs);
        log_event(ctx, std::move(e));
    }

    auto finish = [&](const std::string& status) {
        log.status = status;
        log.goal_reached = goal_reached(ctx);
        nlohmann::ordered_json e;
        e["event"] = "task_end";
        e["status"] = status;
        e["goal"] = log.goal_reached;
        e["steps"] = log.counters.steps;
        e["valid"] = log.counters.valid;
        e["replans"] = log.counters.replans;
        e["repairs"] = log.counters.repairs;
        e["oracle_queries"] = log.counters.oracle_queries;
        log_event(ctx, std::move(e));
        return log;
    };

    if (goal_reached(ctx)) return finish("goal");

    std::vector<std::string> completed;
    std::string failure_text;
    int replans = 0;

    while (true) {
        PlanRequest req;
        req.task_id = task.task_id;
        req.instruction = task.instruction;
        req.goal = task.goal;
        req.observation = ctx.obs;
        req.belief = belief;
        req.completed = completed;
        req.failure_text = failure_text;
        req.diff_hint = belief_hints(ctx);
        req.replans_used = replans;

        PlanResponse resp;
        try {
            resp = planner.plan(req);
        } catch (const SimError& e) {
            nlohmann::ordered_json ev;
            ev["event"] = "planner_error";
            ev["error"] = std::string(e.what());
            log_event(ctx, std::move(ev));
            return finish("planner_error");
        }
        {
            nlohmann::ordered_json e;
            e["event"] = "plan";
            nlohmann::ordered_json steps = nlohmann::ordered_json::array();
            for (const PlanStep& s : resp.steps) {
                nlohmann::ordered_json sj;
                sj["skill"] = s.skill_id;
                nlohmann::ordered_json bj = nlohmann::ordered_json::object();
                for (const auto& [role, id] : s.binding) bj[role] = id;
                sj["bind"] = bj;
                steps.push_back(std::move(sj));
            }
            e["steps"] = steps;
            e["give_up"] = resp.give_up;
            e["replans_used"] = replans;
            log_event(ctx, std::move(e));
        }
        if (resp.give_up || resp.steps.empty()) return finish("gave_up");

        bool want_replan = false;
        for (const PlanStep& ps : resp.steps) {
            auto sit = ce.episode.skills.find(ps.skill_id);
            if (sit == ce.episode.skills.end()) {
                nlohmann::ordered_json e;
                e["event"] = "planner_error";
                e["error"] = "unknown skill '" + ps.skill_id + "'";
                log_event(ctx, std::move(e));
                return finish("planner_error");
            }
            const Skill& skill = sit->second;
            bool explicit_bind = !ps.binding.empty();

            Binding binding = ps.binding;
            for (const auto& [role, spec] : skill.roles) {
                if (binding.count(role)) continue;
                auto pick = bind_instance(belief, agent, spec);
                bool trigger = !pick.has_value();
                if (pick && !agent.holds(*pick)) {
                    const BeliefNode& n = belief.nodes.at(*pick);
                    bool here = n.position && !n.position->hypothesis &&
                                n.position->value == agent.current_area;
                    if (!here && n.meta.confidence < cfg.oracle_trigger) trigger = true;
                }
                if (!trigger) {
                    binding[role] = *pick;
                    continue;
                }
                // Visual oracle sweep: scenario area order, skipping where we
                // stand, stopping at the first report that yields a usable
                // candidate. Always followed by a replan so the planner sees
                // the refreshed belief.
                bool found = false;
                for (const std::string& area : ce.episode.init.areas) {
                    if (area == agent.current_area) continue;
                    VisualReport rep = visual_oracle(world, area);
                    belief = integrate_visual_report(belief, rep, cfg.belief, belief.current_step);
                    log.counters.oracle_queries += 1;
                    nlohmann::ordered_json e;
                    e["event"] = "oracle";
                    e["area"] = area;
                    e["entries"] = rep.entries.size();
                    e["role"] = role;
                    log_event(ctx, std::move(e));
                    auto re = bind_instance(belief, agent, spec);
                    if (re && (agent.holds(*re) ||
                               belief.nodes.at(*re).meta.confidence >= cfg.oracle_trigger)) {
                        found = true;
                        break;
                    }
                }
                failure_text = found ? ""
                                     : "no candidate for role '" + role + "' (label '" +
                                           spec.label + "') after oracle sweep";
                want_replan = true;
                break;
            }
            if (want_replan) break;

            std::vector<PrimitiveAction> prims;
            try {
                prims = expand_skill(skill, binding);
            } catch (const SimError& e) {
                failure_text = e.what();
                want_replan = true;
                break;
            }
            if (!explicit_bind) {
                auto dest = route_destination(prims, belief, agent, ce.episode.rules);
                if (dest) prims.insert(prims.begin(), PrimitiveAction{"go_to", *dest, std::nullopt});
            }

            bool skill_ok = true;
            for (const PrimitiveAction& prim : prims) {
                if (log.counters.steps >= ctx.budget) return finish("budget");
                Feedback fb = submit(ctx, prim, "action");
                if (goal_reached(ctx)) return finish("goal");
                if (fb.outcome == Outcome::Success) continue;

                bool repaired = false;
                for (int attempt = 0; attempt < cfg.repair_cap && !repaired; ++attempt) {
                    RepairRequest rr{prim, fb, belief, attempt};
                    RepairResponse rresp;
                    try {
                        rresp = planner.repair(rr);
                    } catch (const SimError&) {
                        rresp = {}; // malformed suggestion burns the attempt
                    }
                    log.counters.repairs += 1;
                    if (!rresp.correction) {
                        nlohmann::ordered_json e;
                        e["event"] = "repair";
                        e["attempt"] = attempt + 1;
                        e["correction"] = nullptr;
                        log_event(ctx, std::move(e));
                        break;
                    }
                    {
                        nlohmann::ordered_json e;
                        e["event"] = "repair";
                        e["attempt"] = attempt + 1;
                        e["correction"] = action_to_json(*rresp.correction);
                        log_event(ctx, std::move(e));
                    }
                    if (log.counters.steps >= ctx.budget) return finish("budget");
                    submit(ctx, *rresp.correction, "repair_action");
                    if (goal_reached(ctx)) return finish("goal");
                    if (log.counters.steps >= ctx.budget) return finish("budget");
                    fb = submit(ctx, prim, "retry");
                    if (goal_reached(ctx)) return finish("goal");
                    repaired = fb.outcome == Outcome::Success;
                }
                if (!repaired) {
                    failure_text = fb.violated_text.empty() ? ("action failed: " + to_string(prim))
                                                            : fb.violated_text;
                    skill_ok = false;
                    break;
                }
            }
            if (!skill_ok) {
                want_replan = true;
                break;
            }
            completed.push_back(ps.skill_id);
        }

        if (!want_replan) {
            // Every planned skill ran to completion but the goal still does
            // not hold; ask the planner again with that on record.
            failure_text = "plan completed without reaching the goal";
        }
        replans += 1;
        log.counters.replans = replans;
        if (replans > cfg.replan_budget) return finish("replans_exhausted");
    }
}

EpisodeRunLog run_episode(const CompiledEpisode& ce, PlannerInterface& planner,
                          const RunConfig& cfg) {
    EpisodeRunLog out;
    out.episode_id = ce.episode.episode_id;

    WorldGraph world = ce.init;
    AgentPhysState agent = ce.start_agent;

    std::string image;
    if (auto it = ce.episode.anchors.find(agent.current_area); it != ce.episode.anchors.end())
        image = it->second;
    Observation first = observe(ce.init, world, agent.current_area, image);
    BeliefGraph belief = init_from_observation(first, cfg.belief);

    std::mt19937_64 rng(cfg.seed);
    for (size_t i = 0; i < ce.episode.tasks.size(); ++i) {
        if (i > 0) belief = apply_forgetting(belief, cfg.forgetting, agent.current_area, rng);
        out.tasks.push_back(run_task(world, agent, belief, ce, i, planner, cfg));
    }
    out.final_belief = std::move(belief);
    out.final_world = std::move(world);
    return out;
}

ScoreCard score_run(const CompiledEpisode& ce, const EpisodeRunLog& run, const ScoreConfig& cfg) {
    std::vector<std::string> labels(ce.episode.known_labels.begin(),
                                    ce.episode.known_labels.end());
    std::vector<TaskScore> scores;
    for (size_t i = 0; i < run.tasks.size() && i < ce.gt.size(); ++i)
        scores.push_back(score_task(ce.episode.rules, ce.episode.tasks[i], ce.gt[i],
                                    run.tasks[i].attempted, labels, cfg));
    return summarize(std::move(scores));
}

} // namespace hworld
