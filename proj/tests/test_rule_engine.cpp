// Rule matching, precondition unification, effect application, and the
// failure-idempotence / determinism properties of execute_primitive.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "hworld/observation.hpp"
#include "hworld/rule_engine.hpp"

using namespace hworld;

namespace {

Node object(const std::string& id, const std::string& label, const std::string& loc) {
    Node n;
    n.instance_id = id;
    n.label = label;
    n.location = loc;
    return n;
}

PatternArg any_var(const std::string& var) {
    PatternArg a;
    a.match = PatternArg::Match::Any;
    a.var = var;
    return a;
}

PatternArg label_var(const std::string& var, const std::string& label) {
    PatternArg a;
    a.match = PatternArg::Match::Label;
    a.var = var;
    a.value = label;
    return a;
}

PatternArg area_var(const std::string& var) {
    PatternArg a;
    a.match = PatternArg::Match::Area;
    a.var = var;
    return a;
}

Predicate pred(PredicateKind k, std::vector<std::string> args) { return {k, std::move(args)}; }

/// Two areas, a capsule and a cup on the table, a closed box holding a spare
/// capsule in the pantry. Rules: go_to, pick_up, open, drop, brew (creates a
/// product), eat (removes a node).
struct Fixture {
    WorldGraph g;
    AgentPhysState agent;
    RuleBase rules;

    Fixture() {
        ScenarioInit init;
        init.areas = {"table_area", "pantry"};
        init.nodes = {object("capsule_01", "capsule", "table_area"),
                      object("cup_01", "cup", "table_area"),
                      object("box_01", "box", "pantry"),
                      object("capsule_02", "capsule", "pantry")};
        init.nodes[2].state = "closed";
        init.edges = {{"box_01", EdgeKind::Contains, "capsule_02"}};
        g = WorldGraph::instantiate(init);
        agent.current_area = "table_area";

        rules.set_verb_map({{"grab", "pick_up"}, {"walk_to", "go_to"}});

        WorldRule go_to;
        go_to.rule_id = "go_to";
        go_to.pattern.type = "go_to";
        go_to.pattern.object = area_var("l");
        go_to.effects.agent_updates = {{AgentUpdate::Kind::MoveTo, "", "?l"}};
        rules.add_rule(go_to);

        WorldRule pick_up;
        pick_up.rule_id = "pick_up";
        pick_up.pattern.type = "pick_up";
        pick_up.pattern.object = any_var("x");
        pick_up.preconditions = {pred(PredicateKind::At, {"?x", "@agent_area"}),
                                 pred(PredicateKind::Hand, {"any", "empty"})};
        pick_up.effects.attr_updates = {{"?x", "location", "@held"}};
        pick_up.effects.agent_updates = {{AgentUpdate::Kind::EmptyHandSet, "", "?x"}};
        rules.add_rule(pick_up);

        WorldRule open;
        open.rule_id = "open";
        open.pattern.type = "open";
        open.pattern.object = any_var("c");
        open.preconditions = {pred(PredicateKind::At, {"?c", "@agent_area"}),
                              pred(PredicateKind::State, {"?c", "closed"})};
        open.effects.attr_updates = {{"?c", "state", "open"}};
        rules.add_rule(open);

        WorldRule drop;
        drop.rule_id = "drop";
        drop.pattern.type = "drop";
        drop.pattern.object = any_var("x");
        drop.preconditions = {pred(PredicateKind::Hand, {"any", "?x"})};
        drop.effects.attr_updates = {{"?x", "location", "@agent_area"}};
        drop.effects.agent_updates = {{AgentUpdate::Kind::HandHoldingSet, "?x", "empty"}};
        rules.add_rule(drop);

        WorldRule brew;
        brew.rule_id = "brew";
        brew.pattern.type = "brew";
        brew.pattern.object = label_var("c", "cup");
        brew.preconditions = {pred(PredicateKind::At, {"?c", "@agent_area"})};
        NodeTemplate coffee;
        coffee.instance_id = "coffee_{n}";
        coffee.label = "coffee";
        coffee.kind = NodeKind::Substance;
        coffee.location = "@agent_area";
        coffee.amount = Amount::Full;
        brew.effects.node_add = {coffee};
        brew.effects.edge_add = {{EdgeKind::Contains, "?c", "coffee_{n}"}};
        rules.add_rule(brew);

        WorldRule eat;
        eat.rule_id = "eat";
        eat.pattern.type = "eat";
        eat.pattern.object = any_var("x");
        eat.preconditions = {pred(PredicateKind::At, {"?x", "@agent_area"})};
        eat.effects.node_remove = {"?x"};
        rules.add_rule(eat);
    }
};

PrimitiveAction act(const std::string& type, const std::string& object) {
    return {type, object, std::nullopt};
}

} // namespace

TEST_CASE("verb normalization maps synonyms and passes canon verbs through") {
    Fixture f;
    CHECK(f.rules.normalize("grab") == "pick_up");
    CHECK(f.rules.normalize("pick_up") == "pick_up");
    CHECK(f.rules.normalize("juggle") == std::nullopt);
}

TEST_CASE("first matching rule in load order wins") {
    Fixture f;
    WorldRule shadow;
    shadow.rule_id = "pick_up_shadow";
    shadow.pattern.type = "pick_up";
    shadow.pattern.object = label_var("x", "cup");
    RuleBase reordered;
    reordered.add_rule(shadow);
    for (const WorldRule& r : f.rules.rules()) reordered.add_rule(r);

    auto m = reordered.match_rule(act("pick_up", "cup_01"), f.g);
    REQUIRE(m.has_value());
    CHECK(m->rule->rule_id == "pick_up_shadow");

    // The label-restricted rule does not shadow non-cup objects.
    m = reordered.match_rule(act("pick_up", "capsule_01"), f.g);
    REQUIRE(m.has_value());
    CHECK(m->rule->rule_id == "pick_up");
}

TEST_CASE("unknown verbs produce NO_RULE and leave the world untouched") {
    Fixture f;
    std::string before = snapshot_hash(f.g);
    ExecResult r = execute_primitive(f.g, f.agent, f.rules, act("juggle", "cup_01"));
    CHECK(r.feedback.outcome == Outcome::NoRule);
    CHECK(snapshot_hash(r.graph) == before);
    CHECK(r.graph == f.g);
    CHECK(r.agent == f.agent);
    CHECK(r.graph.step() == f.g.step());
}

TEST_CASE("precondition failure reports the earliest violated atom") {
    Fixture f;
    f.agent.current_area = "pantry";
    ExecResult r = execute_primitive(f.g, f.agent, f.rules, act("pick_up", "cup_01"));
    CHECK(r.feedback.outcome == Outcome::Fail);
    REQUIRE(r.feedback.violated.has_value());
    CHECK(r.feedback.violated->kind == PredicateKind::At);
    CHECK(r.feedback.violated_text == "at(cup_01, pantry)");
    CHECK(r.graph == f.g);
    CHECK(r.agent == f.agent);
}

TEST_CASE("a dangling id unifies provisionally and fails on state, not vocabulary") {
    Fixture f;
    ExecResult r = execute_primitive(f.g, f.agent, f.rules, act("pick_up", "ghost_07"));
    CHECK(r.feedback.outcome == Outcome::Fail);
    REQUIRE(r.feedback.violated.has_value());
    CHECK(r.feedback.violated_text == "at(ghost_07, table_area)");
}

TEST_CASE("execute_primitive is a pure function of its inputs") {
    Fixture f;
    ExecResult a = execute_primitive(f.g, f.agent, f.rules, act("pick_up", "capsule_01"));
    ExecResult b = execute_primitive(f.g, f.agent, f.rules, act("pick_up", "capsule_01"));
    CHECK(a.graph == b.graph);
    CHECK(a.agent == b.agent);
    CHECK(feedback_to_json(a.feedback).dump() == feedback_to_json(b.feedback).dump());

    // Deletion is not reversible, but replaying it from the same snapshot
    // twice still lands on the same world.
    ExecResult e1 = execute_primitive(f.g, f.agent, f.rules, act("eat", "capsule_01"));
    ExecResult e2 = execute_primitive(f.g, f.agent, f.rules, act("eat", "capsule_01"));
    CHECK(e1.feedback.outcome == Outcome::Success);
    CHECK(snapshot_hash(e1.graph) == snapshot_hash(e2.graph));
    CHECK(e1.graph.find("capsule_01") == nullptr);
}

TEST_CASE("pick_up moves the object into the first empty hand") {
    Fixture f;
    ExecResult brewed = execute_primitive(f.g, f.agent, f.rules, act("brew", "cup_01"));
    REQUIRE(brewed.feedback.outcome == Outcome::Success);

    ExecResult r = execute_primitive(brewed.graph, brewed.agent, f.rules,
                                     act("pick_up", "capsule_01"));
    REQUIRE(r.feedback.outcome == Outcome::Success);
    CHECK(r.agent.left_hand == "capsule_01");
    CHECK_FALSE(r.agent.right_hand.has_value());
    CHECK_FALSE(r.graph.find("capsule_01")->location.has_value());
    CHECK(r.graph.step() == brewed.graph.step() + 1);

    ExecResult r2 = execute_primitive(r.graph, r.agent, f.rules, act("pick_up", "cup_01"));
    REQUIRE(r2.feedback.outcome == Outcome::Success);
    CHECK(r2.agent.left_hand == "capsule_01");
    CHECK(r2.agent.right_hand == "cup_01");

    // Both hands full: the hand precondition fails before any effect runs.
    ExecResult r3 = execute_primitive(r2.graph, r2.agent, f.rules, act("pick_up", "coffee_1"));
    CHECK(r3.feedback.outcome == Outcome::Fail);
    CHECK(r3.feedback.violated_text == "hand(any, empty)");
}

TEST_CASE("drop clears the holding hand and grounds the object") {
    Fixture f;
    ExecResult held = execute_primitive(f.g, f.agent, f.rules, act("pick_up", "capsule_01"));
    ExecResult r = execute_primitive(held.graph, held.agent, f.rules, act("drop", "capsule_01"));
    REQUIRE(r.feedback.outcome == Outcome::Success);
    CHECK_FALSE(r.agent.left_hand.has_value());
    CHECK(r.graph.find("capsule_01")->location == "table_area");

    // Dropping something nobody holds violates the hand precondition.
    ExecResult r2 = execute_primitive(r.graph, r.agent, f.rules, act("drop", "capsule_01"));
    CHECK(r2.feedback.outcome == Outcome::Fail);
}

TEST_CASE("node templates mint fresh ids and ground placeholders") {
    Fixture f;
    ExecResult one = execute_primitive(f.g, f.agent, f.rules, act("brew", "cup_01"));
    REQUIRE(one.feedback.outcome == Outcome::Success);
    const Node* c1 = one.graph.find("coffee_1");
    REQUIRE(c1 != nullptr);
    CHECK(c1->label == "coffee");
    CHECK(c1->kind == NodeKind::Substance);
    CHECK(c1->location == "table_area");
    CHECK(c1->amount == Amount::Full);
    CHECK(one.graph.has_edge("cup_01", EdgeKind::Contains, "coffee_1"));

    // The placeholder always takes the smallest free integer.
    ExecResult two = execute_primitive(one.graph, one.agent, f.rules, act("brew", "cup_01"));
    REQUIRE(two.feedback.outcome == Outcome::Success);
    CHECK(two.graph.find("coffee_2") != nullptr);
    ExecResult gone = execute_primitive(two.graph, two.agent, f.rules, act("eat", "coffee_1"));
    ExecResult three = execute_primitive(gone.graph, gone.agent, f.rules, act("brew", "cup_01"));
    CHECK(three.graph.find("coffee_1") != nullptr);
}

TEST_CASE("node removal deletes incident edges") {
    Fixture f;
    ExecResult brewed = execute_primitive(f.g, f.agent, f.rules, act("brew", "cup_01"));
    ExecResult r = execute_primitive(brewed.graph, brewed.agent, f.rules, act("eat", "cup_01"));
    REQUIRE(r.feedback.outcome == Outcome::Success);
    CHECK(r.graph.find("cup_01") == nullptr);
    for (const Edge& e : r.graph.edges()) {
        CHECK(e.src != "cup_01");
        CHECK(e.dst != "cup_01");
    }
    validate_graph(r.graph);
}

TEST_CASE("agent update errors surface as Fail and leave the inputs alone") {
    Fixture f;
    std::string before = snapshot_hash(f.g);

    // hand_holding_set on an object no hand holds is an effect-integrity
    // fault, not a precondition failure.
    WorldRule bad;
    bad.rule_id = "bad_clear";
    bad.pattern.type = "bad_clear";
    bad.pattern.object = any_var("x");
    bad.effects.agent_updates = {{AgentUpdate::Kind::HandHoldingSet, "?x", "empty"}};
    RuleBase rules = f.rules;
    rules.add_rule(bad);

    ExecResult r = execute_primitive(f.g, f.agent, rules, act("bad_clear", "cup_01"));
    CHECK(r.feedback.outcome == Outcome::Fail);
    CHECK(r.feedback.violated_text.find("EffectIntegrityError") != std::string::npos);
    CHECK(snapshot_hash(r.graph) == before);
    CHECK(r.agent == f.agent);
}

TEST_CASE("move_to rejects a non-area destination") {
    Fixture f;
    ExecResult r = execute_primitive(f.g, f.agent, f.rules, act("go_to", "cup_01"));
    // The area pattern does not unify with an object id, so no rule matches.
    CHECK(r.feedback.outcome == Outcome::NoRule);

    ExecResult ok = execute_primitive(f.g, f.agent, f.rules, act("go_to", "pantry"));
    REQUIRE(ok.feedback.outcome == Outcome::Success);
    CHECK(ok.agent.current_area == "pantry");
    CHECK(snapshot_hash(ok.graph) == snapshot_hash(f.g)); // agent state is not graph state
}

TEST_CASE("grounded effects equal the observed diff footprint") {
    Fixture f;
    auto m = f.rules.match_rule(act("brew", "cup_01"), f.g);
    REQUIRE(m.has_value());
    PrecondResult pc = check_preconditions(*m->rule, f.g, f.agent, m->binding);
    REQUIRE(pc.ok);
    GroundedEffects fx = ground_effects(f.g, *m->rule, pc.binding, f.agent);

    AgentPhysState agent = f.agent;
    WorldGraph after = apply_rule(f.g, *m->rule, pc.binding, agent);
    DeltaSet d = graph_diff_full(f.g, after);

    REQUIRE(fx.nodes_added.size() == 1);
    REQUIRE(d.appeared.size() == 1);
    CHECK(fx.nodes_added[0] == d.appeared[0]);
    CHECK(fx.nodes_removed.empty());
    CHECK(d.disappeared.empty());
    REQUIRE(d.edge_changes.size() == 1);
    CHECK(d.edge_changes[0].added);
    CHECK(fx.edges_added.count(d.edge_changes[0].edge) == 1);
    CHECK(fx.attr_writes.empty());
    CHECK(d.changed.empty());
}

TEST_CASE("failure idempotence holds under random action fuzz") {
    Fixture f;
    std::mt19937_64 rng(11);
    std::vector<std::string> verbs = {"pick_up", "open", "drop", "brew", "eat", "go_to", "juggle"};
    std::vector<std::string> args = {"cup_01", "capsule_01", "capsule_02", "box_01",
                                     "pantry", "table_area", "ghost_07"};
    WorldGraph g = f.g;
    AgentPhysState agent = f.agent;
    int failures = 0;
    for (int i = 0; i < 500; ++i) {
        PrimitiveAction a{verbs[rng() % verbs.size()], args[rng() % args.size()], std::nullopt};
        std::string before = snapshot_hash(g);
        ExecResult r = execute_primitive(g, agent, f.rules, a);
        if (r.feedback.outcome != Outcome::Success) {
            ++failures;
            CHECK(snapshot_hash(r.graph) == before);
            CHECK(r.agent == agent);
        }
        validate_graph(r.graph);
        g = r.graph;
        agent = r.agent;
    }
    CHECK(failures > 0); // the fuzz actually exercised the failure path
}

TEST_CASE("existential variables ground to the first candidate by id") {
    Fixture f;
    WorldRule fetch;
    fetch.rule_id = "fetch_any";
    fetch.pattern.type = "fetch_any";
    fetch.pattern.object = label_var("c", "cup");
    fetch.var_labels = {{"k", "capsule"}};
    fetch.preconditions = {pred(PredicateKind::At, {"?k", "@agent_area"})};
    fetch.effects.attr_updates = {{"?k", "location", "pantry"}};
    RuleBase rules = f.rules;
    rules.add_rule(fetch);

    ExecResult r = execute_primitive(f.g, f.agent, rules, act("fetch_any", "cup_01"));
    REQUIRE(r.feedback.outcome == Outcome::Success);
    // capsule_01 sorts before capsule_02 and sits in the agent's area.
    CHECK(r.graph.find("capsule_01")->location == "pantry");
    CHECK(r.graph.find("capsule_02")->location == "pantry");
}

TEST_CASE("action and feedback json round-trip") {
    PrimitiveAction a{"insert", "capsule_01", "machine_01"};
    CHECK(action_from_json(action_to_json(a)) == a);
    CHECK(to_string(a) == "insert(capsule_01, machine_01)");

    Fixture f;
    f.agent.current_area = "pantry";
    ExecResult r = execute_primitive(f.g, f.agent, f.rules, act("pick_up", "cup_01"));
    Feedback back = feedback_from_json(feedback_to_json(r.feedback));
    CHECK(back.outcome == r.feedback.outcome);
    CHECK(back.violated_text == r.feedback.violated_text);
    CHECK(back.action == r.feedback.action);
    REQUIRE(back.violated.has_value());
    CHECK(*back.violated == *r.feedback.violated);
}
