// Graph construction, canonical serialization, digests, and the structural
// invariants every later module leans on.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hworld/world_graph.hpp"

using namespace hworld;

namespace {

Node area(const std::string& id) {
    Node n;
    n.instance_id = id;
    n.label = id;
    n.kind = NodeKind::Area;
    return n;
}

Node object(const std::string& id, const std::string& label, const std::string& loc) {
    Node n;
    n.instance_id = id;
    n.label = label;
    n.location = loc;
    return n;
}

ScenarioInit kitchen_init() {
    ScenarioInit init;
    init.areas = {"kitchen", "pantry"};
    init.nodes = {object("cup_01", "cup", "kitchen"), object("box_01", "box", "pantry"),
                  object("capsule_01", "capsule", "pantry")};
    init.nodes[1].state = "closed";
    init.nodes[0].amount = Amount::Empty;
    init.edges = {{"box_01", EdgeKind::Contains, "capsule_01"}};
    return init;
}

} // namespace

TEST_CASE("instantiate builds the declared graph") {
    WorldGraph g = WorldGraph::instantiate(kitchen_init());
    CHECK(g.nodes().size() == 5);
    CHECK(g.areas() == std::vector<std::string>{"kitchen", "pantry"});
    CHECK(g.is_area("kitchen"));
    CHECK_FALSE(g.is_area("cup_01"));
    CHECK(g.has_edge("box_01", EdgeKind::Contains, "capsule_01"));

    const Node* cup = g.find("cup_01");
    REQUIRE(cup != nullptr);
    CHECK(cup->label == "cup");
    CHECK(cup->location == "kitchen");
    CHECK(cup->amount == Amount::Empty);

    CHECK(g.find("ghost_99") == nullptr);
}

TEST_CASE("instantiate rejects malformed inits") {
    SUBCASE("duplicate instance id") {
        ScenarioInit init = kitchen_init();
        init.nodes.push_back(object("cup_01", "cup", "kitchen"));
        CHECK_THROWS_AS(WorldGraph::instantiate(init), DuplicateInstanceId);
    }
    SUBCASE("undeclared location") {
        ScenarioInit init = kitchen_init();
        init.nodes.push_back(object("plate_01", "plate", "garage"));
        CHECK_THROWS_AS(WorldGraph::instantiate(init), UnknownAreaReference);
    }
    SUBCASE("containment cycle") {
        ScenarioInit init = kitchen_init();
        init.nodes.push_back(object("bag_01", "bag", "pantry"));
        init.edges.insert(init.edges.end(), {{"capsule_01", EdgeKind::Contains, "bag_01"},
                                             {"bag_01", EdgeKind::Contains, "box_01"}});
        CHECK_THROWS_AS(WorldGraph::instantiate(init), ContainmentCycle);
    }
}

TEST_CASE("instantiate is deterministic") {
    WorldGraph a = WorldGraph::instantiate(kitchen_init());
    WorldGraph b = WorldGraph::instantiate(kitchen_init());
    CHECK(a == b);
    CHECK(snapshot_hash(a) == snapshot_hash(b));
    CHECK(serialize_graph(a).dump() == serialize_graph(b).dump());
}

TEST_CASE("adjacency queries are sorted and read-only") {
    ScenarioInit init = kitchen_init();
    init.nodes.push_back(object("tray_01", "tray", "kitchen"));
    init.edges.push_back({"tray_01", EdgeKind::Supports, "cup_01"});
    init.edges.push_back({"box_01", EdgeKind::Contains, "cup_01"});
    WorldGraph g = WorldGraph::instantiate(init);
    std::string before = snapshot_hash(g);

    CHECK(g.containers_of("cup_01") == std::vector<std::string>{"box_01"});
    CHECK(g.supporters_of("cup_01") == std::vector<std::string>{"tray_01"});
    CHECK(g.contents_of("box_01") == std::vector<std::string>{"capsule_01", "cup_01"});
    CHECK(g.contents_of("cup_01").empty());
    CHECK(g.find("tray_01") != nullptr);
    validate_graph(g);

    CHECK(snapshot_hash(g) == before);
}

TEST_CASE("node json round-trip keeps every field") {
    Node n = object("machine_01", "coffee_machine", "kitchen");
    n.state = "closed";
    n.state_slots = {{"loaded", "true"}, {"power", "off"}};
    n.amount = Amount::Partial;

    Node back = node_from_json(node_to_json(n));
    CHECK(back == n);

    SUBCASE("facets serialize as state.<key>") {
        nlohmann::ordered_json j = node_to_json(n);
        CHECK(j.contains("state.loaded"));
        CHECK(j.contains("state.power"));
        CHECK(j["state.loaded"] == "true");
    }
    SUBCASE("absent optionals are omitted") {
        nlohmann::ordered_json j = node_to_json(area("kitchen"));
        CHECK_FALSE(j.contains("location"));
        CHECK_FALSE(j.contains("state"));
        CHECK_FALSE(j.contains("amount"));
    }
}

TEST_CASE("graph serialization round-trips and dumps stably") {
    WorldGraph g = WorldGraph::instantiate(kitchen_init());
    nlohmann::ordered_json doc = serialize_graph(g);
    WorldGraph back = parse_graph(doc);
    CHECK(back == g);
    CHECK(serialize_graph(back).dump() == doc.dump());
    CHECK(doc.contains("areas"));
    CHECK(doc.contains("nodes"));
    CHECK(doc.contains("edges"));
}

TEST_CASE("snapshot hash ignores the step counter") {
    WorldGraph g = WorldGraph::instantiate(kitchen_init());
    nlohmann::ordered_json doc = serialize_graph(g);
    doc["step"] = 17;
    WorldGraph later = parse_graph(doc);
    CHECK(later.step() == 17);
    CHECK(snapshot_hash(later) == snapshot_hash(g));
    CHECK(snapshot_hash(later).size() == 16);
}

TEST_CASE("snapshot hash separates distinct content") {
    WorldGraph g = WorldGraph::instantiate(kitchen_init());
    ScenarioInit moved = kitchen_init();
    moved.nodes[0].location = "pantry";
    CHECK(snapshot_hash(WorldGraph::instantiate(moved)) != snapshot_hash(g));
}

TEST_CASE("validate_graph catches each structural break") {
    WorldGraph good = WorldGraph::instantiate(kitchen_init());
    auto nodes = good.nodes();
    auto edges = good.edges();
    auto areas = good.areas();

    SUBCASE("valid graph passes") { validate_graph(good); }
    SUBCASE("area carrying a location") {
        auto broken = nodes;
        broken["pantry"].location = "kitchen";
        CHECK_THROWS_AS(validate_graph(subgraph_from_parts(areas, broken, edges, 0)),
                        FormatError);
    }
    SUBCASE("object in an undeclared area") {
        auto broken = nodes;
        broken["cup_01"].location = "attic";
        CHECK_THROWS_AS(validate_graph(subgraph_from_parts(areas, broken, edges, 0)),
                        UnknownAreaReference);
    }
    SUBCASE("edge onto a dead node") {
        auto broken = edges;
        broken.insert({"box_01", EdgeKind::Contains, "ghost_99"});
        CHECK_THROWS_AS(validate_graph(subgraph_from_parts(areas, nodes, broken, 0)),
                        FormatError);
    }
    SUBCASE("self edge") {
        auto broken = edges;
        broken.insert({"cup_01", EdgeKind::Supports, "cup_01"});
        // Self edges are degenerate one-node loops and classify as cycles.
        CHECK_THROWS_AS(validate_graph(subgraph_from_parts(areas, nodes, broken, 0)),
                        ContainmentCycle);
    }
    SUBCASE("containment cycle") {
        auto broken = edges;
        broken.insert({"capsule_01", EdgeKind::Contains, "box_01"});
        CHECK_THROWS_AS(validate_graph(subgraph_from_parts(areas, nodes, broken, 0)),
                        ContainmentCycle);
    }
}

TEST_CASE("held objects carry no location") {
    ScenarioInit init = kitchen_init();
    Node held;
    held.instance_id = "knife_01";
    held.label = "knife";
    init.nodes.push_back(held);
    WorldGraph g = WorldGraph::instantiate(init);
    const Node* knife = g.find("knife_01");
    REQUIRE(knife != nullptr);
    CHECK_FALSE(knife->location.has_value());
    validate_graph(g);
}

TEST_CASE("fnv1a_hex is stable across calls") {
    CHECK(fnv1a_hex("") == fnv1a_hex(""));
    CHECK(fnv1a_hex("a") != fnv1a_hex("b"));
    CHECK(fnv1a_hex("payload").size() == 16);
}
