// Wire protocol: message framing, codecs, channels, the remote planner
// proxy, and equivalence between in-process and wire-driven runs.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fstream>
#include <sstream>

#include "hworld/protocol.hpp"

using namespace hworld;

namespace {

CompiledEpisode corpus(const std::string& name) {
    std::ifstream in(std::string(HWORLD_SCENARIO_DIR) + "/" + name + ".scn");
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    ParseResult pr = parse_scenario(ss.str());
    REQUIRE(pr.ok());
    return compile_episode(*pr.scenario);
}

ScriptedPlanner gt_scripted(const CompiledEpisode& ce) {
    ScriptedPlanner p;
    for (const Task& t : ce.episode.tasks) {
        std::vector<PlanStep> steps;
        for (const GtSkillRef& ref : t.gt_skills) steps.push_back({ref.skill_id, ref.binding});
        p.set_plan(t.task_id, std::move(steps));
    }
    return p;
}

/// Records every line that crosses in either direction.
class TeeChannel : public Channel {
public:
    explicit TeeChannel(Channel& inner) : inner_(&inner) {}
    void send_line(const std::string& line) override {
        wire += line + "\n";
        inner_->send_line(line);
    }
    std::optional<std::string> recv_line() override {
        std::optional<std::string> line = inner_->recv_line();
        if (line) wire += *line + "\n";
        return line;
    }
    std::string wire;

private:
    Channel* inner_;
};

/// Forks a child that speaks for the planner side of `theirs`, then runs `fn`
/// in the parent against `ours`. The child's exit status is checked.
template <typename ChildFn, typename ParentFn>
void with_wire_peer(ChildFn&& child_fn, ParentFn&& parent_fn) {
    auto [ours, theirs] = pipe_channel_pair();
    pid_t pid = fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
        ours.reset();
        int rc = 0;
        try {
            child_fn(*theirs);
        } catch (...) {
            rc = 1;
        }
        theirs.reset();
        _exit(rc);
    }
    theirs.reset();
    parent_fn(*ours);
    ours.reset();
    int status = 0;
    REQUIRE(waitpid(pid, &status, 0) == pid);
    CHECK(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
}

PlanRequest sample_plan_request() {
    PlanRequest req;
    req.task_id = "t1";
    req.instruction = "make coffee";
    GoalClause c;
    c.selector = "cup_01";
    c.slot = "amount";
    c.value = "full";
    req.goal = {c};
    req.observation.area = "kitchen";
    req.observation.step = 3;
    Node seen;
    seen.instance_id = "cup_01";
    seen.label = "cup";
    seen.location = "kitchen";
    req.observation.init_view = {seen};
    BeliefNode bn;
    bn.instance_id = "cup_01";
    bn.label = "cup";
    bn.position = SlotValue{"kitchen", false};
    bn.meta.last_observed_step = 3;
    req.belief.nodes["cup_01"] = bn;
    req.belief.current_step = 3;
    req.completed = {"go_to_kitchen"};
    req.failure_text = "at(cup_01, pantry)";
    req.diff_hint = {"cup_01.amount = full"};
    req.replans_used = 1;
    return req;
}

} // namespace

TEST_CASE("messages are single json lines and reject malformed input") {
    Message m{"PLAN_RESPONSE", {{"steps", nlohmann::ordered_json::array()}, {"give_up", false}}};
    std::string line = encode_message(m);
    CHECK(line.find('\n') == std::string::npos);
    Message back = decode_message(line);
    CHECK(back.kind == m.kind);
    CHECK(back.body.dump() == m.body.dump());

    CHECK_THROWS_AS(decode_message("not json"), ProtocolViolation);
    CHECK_THROWS_AS(decode_message("[1, 2]"), ProtocolViolation);
    CHECK_THROWS_AS(decode_message(R"({"body": {}})"), ProtocolViolation);
    CHECK_THROWS_AS(decode_message(R"({"kind": 7, "body": {}})"), ProtocolViolation);
    CHECK_THROWS_AS(decode_message(R"({"kind": "X"})"), ProtocolViolation);
}

TEST_CASE("request and response codecs round-trip") {
    PlanRequest req = sample_plan_request();
    nlohmann::ordered_json j = plan_request_to_json(req);
    PlanRequest back = plan_request_from_json(j);
    CHECK(plan_request_to_json(back).dump() == j.dump());
    CHECK(back.task_id == req.task_id);
    CHECK(back.belief == req.belief);
    CHECK(back.replans_used == 1);

    PlanResponse resp;
    resp.steps = {{"fetch_capsule", {{"x", "capsule_01"}}}, {"brew", {}}};
    PlanResponse resp_back = plan_response_from_json(plan_response_to_json(resp));
    REQUIRE(resp_back.steps.size() == 2);
    CHECK(resp_back.steps[0].skill_id == "fetch_capsule");
    CHECK(resp_back.steps[0].binding.at("x") == "capsule_01");
    CHECK_FALSE(resp_back.give_up);

    PlanResponse quit;
    quit.give_up = true;
    CHECK(plan_response_from_json(plan_response_to_json(quit)).give_up);

    RepairRequest rr;
    rr.failed = {"pick_up", "cup_01", std::nullopt};
    rr.feedback.outcome = Outcome::Fail;
    rr.feedback.action = rr.failed;
    rr.feedback.violated = Predicate{PredicateKind::At, {"cup_01", "kitchen"}};
    rr.feedback.violated_text = "at(cup_01, kitchen)";
    rr.repairs_used = 2;
    nlohmann::ordered_json rj = repair_request_to_json(rr);
    RepairRequest rr_back = repair_request_from_json(rj);
    CHECK(repair_request_to_json(rr_back).dump() == rj.dump());
    CHECK(rr_back.repairs_used == 2);

    RepairResponse none;
    CHECK_FALSE(repair_response_from_json(repair_response_to_json(none)).correction.has_value());
    RepairResponse some;
    some.correction = PrimitiveAction{"go_to", "pantry", std::nullopt};
    RepairResponse some_back = repair_response_from_json(repair_response_to_json(some));
    REQUIRE(some_back.correction.has_value());
    CHECK(*some_back.correction == *some.correction);
}

TEST_CASE("pipe channels deliver lines in order and signal eof") {
    auto [a, b] = pipe_channel_pair();
    a->send_line("first");
    a->send_line("second\n"); // an already-terminated line gains no blank
    CHECK(b->recv_line() == "first");
    CHECK(b->recv_line() == "second");
    b->send_line("reply");
    CHECK(a->recv_line() == "reply");
    b.reset();
    CHECK(a->recv_line() == std::nullopt);
}

TEST_CASE("serve_planner answers requests until RUN_END") {
    CompiledEpisode ce = corpus("twocups");
    with_wire_peer(
        [&](Channel& ch) {
            ScriptedPlanner sp = gt_scripted(ce);
            serve_planner(ch, sp);
        },
        [&](Channel& ch) {
            PlanRequest req = sample_plan_request();
            req.task_id = ce.episode.tasks[0].task_id;
            req.completed.clear();
            ch.send_line(encode_message({"PLAN_REQUEST", plan_request_to_json(req)}));
            Message m = decode_message(*ch.recv_line());
            CHECK(m.kind == "PLAN_RESPONSE");
            PlanResponse resp = plan_response_from_json(m.body);
            CHECK(resp.steps.size() == ce.episode.tasks[0].gt_skills.size());

            RepairRequest rr;
            rr.failed = {"pick_up", "cup_01", std::nullopt};
            ch.send_line(encode_message({"REPAIR_REQUEST", repair_request_to_json(rr)}));
            m = decode_message(*ch.recv_line());
            CHECK(m.kind == "REPAIR_RESPONSE");
            CHECK_FALSE(repair_response_from_json(m.body).correction.has_value());

            ch.send_line(encode_message({"RUN_END", nlohmann::ordered_json::object()}));
        });
}

TEST_CASE("a remote planner mirrors the in-process run byte for byte") {
    for (const std::string name : {"twocups", "coffee"}) {
        CAPTURE(name);
        CompiledEpisode ce = corpus(name);
        RunConfig cfg;
        cfg.seed = 3;

        ScriptedPlanner local = gt_scripted(ce);
        CompiledEpisode ce_local = corpus(name);
        EpisodeRunLog in_process = run_episode(ce_local, local, cfg);

        EpisodeRunLog wire;
        ScoreCard wire_card;
        with_wire_peer(
            [&](Channel& ch) {
                ScriptedPlanner sp = gt_scripted(ce);
                serve_planner(ch, sp);
            },
            [&](Channel& ch) { wire = serve_session(ch, ce, cfg, {}, &wire_card); });

        REQUIRE(wire.tasks.size() == in_process.tasks.size());
        for (size_t i = 0; i < wire.tasks.size(); ++i)
            CHECK(log_to_jsonl(wire.tasks[i]) == log_to_jsonl(in_process.tasks[i]));
        CHECK(belief_digest(wire.final_belief) == belief_digest(in_process.final_belief));
        CHECK(scorecard_to_json(wire_card).dump() ==
              scorecard_to_json(score_run(ce_local, in_process)).dump());
        CHECK(wire_card.episode_tsr == 1.0);
    }
}

TEST_CASE("the wire carries belief and observations, never the hidden graph") {
    CompiledEpisode ce = corpus("juice");
    REQUIRE(ce.init.find("secret_tin_99") != nullptr); // the decoy is really there

    TeeChannel* tee_ptr = nullptr;
    with_wire_peer(
        [&](Channel& ch) {
            HeuristicPlanner hp(ce.episode);
            serve_planner(ch, hp);
        },
        [&](Channel& ch) {
            TeeChannel tee(ch);
            tee_ptr = &tee;
            ScoreCard card;
            serve_session(tee, ce, {}, {}, &card);
            CHECK(card.episode_tsr == 1.0);

            CHECK(tee.wire.find("secret_tin_99") == std::string::npos);
            CHECK(tee.wire.find("\"pantry\"") == std::string::npos);
            // Every line is a well-formed protocol message.
            std::istringstream lines(tee.wire);
            std::string line;
            int count = 0;
            while (std::getline(lines, line)) {
                Message m = decode_message(line);
                CHECK_FALSE(m.kind.empty());
                ++count;
            }
            CHECK(count > 10);
        });
    (void)tee_ptr;
}

TEST_CASE("a malformed repair response burns the attempt, not the task") {
    with_wire_peer(
        [&](Channel& ch) {
            // Answer the repair request with garbage, then a wrong kind, then
            // disconnect mid-request.
            std::optional<std::string> line = ch.recv_line();
            if (!line) throw ProtocolViolation("expected first REPAIR_REQUEST");
            ch.send_line("this is not json");
            line = ch.recv_line();
            if (!line) throw ProtocolViolation("expected second REPAIR_REQUEST");
            ch.send_line(encode_message({"PLAN_RESPONSE", nlohmann::ordered_json::object()}));
            line = ch.recv_line();
            if (!line) throw ProtocolViolation("expected third REPAIR_REQUEST");
        },
        [&](Channel& ch) {
            RemotePlanner rp(ch);
            RepairRequest rr;
            rr.failed = {"pick_up", "cup_01", std::nullopt};
            CHECK_FALSE(rp.repair(rr).correction.has_value()); // garbage line
            CHECK_FALSE(rp.repair(rr).correction.has_value()); // wrong kind
            CHECK_FALSE(rp.repair(rr).correction.has_value()); // disconnect
        });
}

TEST_CASE("plan requests demand a well-formed answer") {
    with_wire_peer(
        [&](Channel& ch) {
            std::optional<std::string> line = ch.recv_line();
            if (!line) throw ProtocolViolation("expected PLAN_REQUEST");
            ch.send_line(encode_message({"REPAIR_RESPONSE", nlohmann::ordered_json::object()}));
            // Second request gets silence: channel closes on child exit.
            ch.recv_line();
        },
        [&](Channel& ch) {
            RemotePlanner rp(ch);
            CHECK_THROWS_AS(rp.plan(sample_plan_request()), ProtocolViolation);
            CHECK_THROWS_AS(rp.plan(sample_plan_request()), ProtocolViolation);
        });
}

TEST_CASE("tcp channels behave like pipes") {
    int listen_fd = tcp_listen(0);
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    REQUIRE(getsockname(listen_fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0);
    unsigned short port = ntohs(addr.sin_port);

    pid_t pid = fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
        close(listen_fd);
        int rc = 0;
        try {
            int fd = tcp_connect("127.0.0.1", port);
            FdChannel ch(fd, dup(fd));
            ch.send_line("ping");
            if (ch.recv_line() != "pong") rc = 1;
        } catch (...) {
            rc = 1;
        }
        _exit(rc);
    }
    int conn = tcp_accept(listen_fd);
    close(listen_fd);
    FdChannel ch(conn, dup(conn));
    CHECK(ch.recv_line() == "ping");
    ch.send_line("pong");
    int status = 0;
    REQUIRE(waitpid(pid, &status, 0) == pid);
    CHECK(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);

    CHECK_THROWS_AS(tcp_connect("127.0.0.1", 1), ProtocolViolation);
}
