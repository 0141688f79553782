#include "hworld/protocol.hpp"

#include <cerrno>
#include <cstring>

#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

namespace hworld {

namespace {

const char* kPlanRequest = "PLAN_REQUEST";
const char* kPlanResponse = "PLAN_RESPONSE";
const char* kRepairRequest = "REPAIR_REQUEST";
const char* kRepairResponse = "REPAIR_RESPONSE";
const char* kTaskContext = "TASK_CONTEXT";
const char* kObservation = "OBSERVATION";
const char* kFeedback = "FEEDBACK";
const char* kRunEnd = "RUN_END";

[[noreturn]] void sys_fail(const std::string& what) {
    throw ProtocolViolation(what + ": " + std::strerror(errno));
}

} // namespace

std::string encode_message(const Message& m) {
    nlohmann::ordered_json j;
    j["kind"] = m.kind;
    j["body"] = m.body;
    return j.dump();
}

Message decode_message(const std::string& line) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolViolation(std::string("malformed message: ") + e.what());
    }
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string() || !j.contains("body"))
        throw ProtocolViolation("message must be {\"kind\": string, \"body\": object}");
    return Message{j.at("kind").get<std::string>(), j.at("body")};
}

FdChannel::FdChannel(int read_fd, int write_fd, bool owns)
    : read_fd_(read_fd), write_fd_(write_fd), owns_(owns) {}

FdChannel::~FdChannel() {
    if (!owns_) return;
    ::close(read_fd_);
    if (write_fd_ != read_fd_) ::close(write_fd_);
}

void FdChannel::send_line(const std::string& line) {
    std::string out = line;
    if (out.empty() || out.back() != '\n') out += '\n';
    size_t off = 0;
    while (off < out.size()) {
        ssize_t n = ::write(write_fd_, out.data() + off, out.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            sys_fail("write");
        }
        off += size_t(n);
    }
}

std::optional<std::string> FdChannel::recv_line() {
    while (true) {
        size_t pos = buf_.find('\n');
        if (pos != std::string::npos) {
            std::string line = buf_.substr(0, pos);
            buf_.erase(0, pos + 1);
            return line;
        }
        char tmp[4096];
        ssize_t n = ::read(read_fd_, tmp, sizeof tmp);
        if (n < 0) {
            if (errno == EINTR) continue;
            sys_fail("read");
        }
        if (n == 0) {
            if (buf_.empty()) return std::nullopt;
            std::string line = std::move(buf_);
            buf_.clear();
            return line;
        }
        buf_.append(tmp, size_t(n));
    }
}

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> pipe_channel_pair() {
    int ab[2], ba[2];
    if (::pipe(ab) != 0) sys_fail("pipe");
    if (::pipe(ba) != 0) sys_fail("pipe");
    auto a = std::make_unique<FdChannel>(ba[0], ab[1]);
    auto b = std::make_unique<FdChannel>(ab[0], ba[1]);
    return {std::move(a), std::move(b)};
}

int tcp_listen(unsigned short port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) sys_fail("socket");
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        sys_fail("bind");
    }
    if (::listen(fd, 1) != 0) {
        ::close(fd);
        sys_fail("listen");
    }
    return fd;
}

int tcp_accept(int listen_fd) {
    int fd = ::accept(listen_fd, nullptr, nullptr);
    if (fd < 0) sys_fail("accept");
    return fd;
}

int tcp_connect(const std::string& host, unsigned short port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res);
    if (rc != 0) throw ProtocolViolation(std::string("getaddrinfo: ") + gai_strerror(rc));
    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw ProtocolViolation("cannot connect to " + host + ":" + std::to_string(port));
    return fd;
}

nlohmann::ordered_json plan_request_to_json(const PlanRequest& req) {
    nlohmann::ordered_json j;
    j["task_id"] = req.task_id;
    j["instruction"] = req.instruction;
    nlohmann::ordered_json goal = nlohmann::ordered_json::array();
    for (const GoalClause& c : req.goal) goal.push_back(goal_clause_to_json(c));
    j["goal"] = goal;
    j["observation"] = observation_to_json(req.observation);
    j["belief"] = serialize_belief(req.belief);
    j["completed"] = req.completed;
    j["failure_text"] = req.failure_text;
    j["diff_hint"] = req.diff_hint;
    j["replans_used"] = req.replans_used;
    return j;
}

PlanRequest plan_request_from_json(const nlohmann::json& j) {
    PlanRequest req;
    req.task_id = j.at("task_id").get<std::string>();
    req.instruction = j.at("instruction").get<std::string>();
    for (const auto& c : j.at("goal")) req.goal.push_back(goal_clause_from_json(c));
    req.observation = observation_from_json(j.at("observation"));
    req.belief = parse_belief(j.at("belief"));
    req.completed = j.at("completed").get<std::vector<std::string>>();
    req.failure_text = j.at("failure_text").get<std::string>();
    req.diff_hint = j.at("diff_hint").get<std::vector<std::string>>();
    req.replans_used = j.at("replans_used").get<int>();
    return req;
}

nlohmann::ordered_json plan_response_to_json(const PlanResponse& resp) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    for (const PlanStep& s : resp.steps) {
        nlohmann::ordered_json sj;
        sj["skill"] = s.skill_id;
        nlohmann::ordered_json bind = nlohmann::ordered_json::object();
        for (const auto& [role, id] : s.binding) bind[role] = id;
        sj["bind"] = bind;
        steps.push_back(std::move(sj));
    }
    j["steps"] = steps;
    j["give_up"] = resp.give_up;
    return j;
}

PlanResponse plan_response_from_json(const nlohmann::json& j) {
    PlanResponse resp;
    try {
        for (const auto& sj : j.at("steps")) {
            PlanStep s;
            s.skill_id = sj.at("skill").get<std::string>();
            if (sj.contains("bind"))
                for (auto it = sj.at("bind").begin(); it != sj.at("bind").end(); ++it)
                    s.binding[it.key()] = it.value().get<std::string>();
            resp.steps.push_back(std::move(s));
        }
        resp.give_up = j.value("give_up", false);
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolViolation(std::string("malformed PLAN_RESPONSE: ") + e.what());
    }
    return resp;
}

nlohmann::ordered_json repair_request_to_json(const RepairRequest& req) {
    nlohmann::ordered_json j;
    j["failed"] = action_to_json(req.failed);
    j["feedback"] = feedback_to_json(req.feedback);
    j["belief"] = serialize_belief(req.belief);
    j["repairs_used"] = req.repairs_used;
    return j;
}

RepairRequest repair_request_from_json(const nlohmann::json& j) {
    RepairRequest req;
    req.failed = action_from_json(j.at("failed"));
    req.feedback = feedback_from_json(j.at("feedback"));
    req.belief = parse_belief(j.at("belief"));
    req.repairs_used = j.at("repairs_used").get<int>();
    return req;
}

nlohmann::ordered_json repair_response_to_json(const RepairResponse& resp) {
    nlohmann::ordered_json j;
    j["correction"] = resp.correction ? action_to_json(*resp.correction)
                                      : nlohmann::ordered_json(nullptr);
    return j;
}

RepairResponse repair_response_from_json(const nlohmann::json& j) {
    RepairResponse resp;
    try {
        if (j.contains("correction") && !j.at("correction").is_null())
            resp.correction = action_from_json(j.at("correction"));
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolViolation(std::string("malformed REPAIR_RESPONSE: ") + e.what());
    }
    return resp;
}

PlanResponse RemotePlanner::plan(const PlanRequest& req) {
    ch_->send_line(encode_message({kPlanRequest, plan_request_to_json(req)}));
    std::optional<std::string> line = ch_->recv_line();
    if (!line) throw ProtocolViolation("planner disconnected during PLAN_REQUEST");
    Message m = decode_message(*line);
    if (m.kind != kPlanResponse)
        throw ProtocolViolation("expected PLAN_RESPONSE, got " + m.kind);
    return plan_response_from_json(m.body);
}

RepairResponse RemotePlanner::repair(const RepairRequest& req) {
    // Any malformed or missing answer burns the attempt instead of aborting
    // the task; the runtime retries the original action regardless.
    try {
        ch_->send_line(encode_message({kRepairRequest, repair_request_to_json(req)}));
        std::optional<std::string> line = ch_->recv_line();
        if (!line) return {};
        Message m = decode_message(*line);
        if (m.kind != kRepairResponse) return {};
        return repair_response_from_json(m.body);
    } catch (const SimError&) {
        return {};
    }
}

void RemotePlanner::on_task_context(const Task& task, const AgentPhysState& agent) {
    nlohmann::ordered_json body;
    body["task_id"] = task.task_id;
    body["instruction"] = task.instruction;
    nlohmann::ordered_json goal = nlohmann::ordered_json::array();
    for (const GoalClause& c : task.goal) goal.push_back(goal_clause_to_json(c));
    body["goal"] = goal;
    nlohmann::ordered_json skills = nlohmann::ordered_json::array();
    if (episode_)
        for (const auto& [id, s] : episode_->skills) skills.push_back(id);
    body["skills"] = skills;
    body["agent"] = agent_to_json(agent);
    ch_->send_line(encode_message({kTaskContext, body}));
}

void RemotePlanner::on_observation(const Observation& obs) {
    ch_->send_line(encode_message({kObservation, observation_to_json(obs)}));
}

void RemotePlanner::on_feedback(const Feedback& fb) {
    ch_->send_line(encode_message({kFeedback, feedback_to_json(fb)}));
}

void RemotePlanner::send_run_end(const nlohmann::ordered_json& scorecard) {
    ch_->send_line(encode_message({kRunEnd, scorecard}));
}

void serve_planner(Channel& ch, PlannerInterface& impl) {
    while (std::optional<std::string> line = ch.recv_line()) {
        Message m = decode_message(*line);
        if (m.kind == kPlanRequest) {
            PlanResponse resp = impl.plan(plan_request_from_json(m.body));
            ch.send_line(encode_message({kPlanResponse, plan_response_to_json(resp)}));
        } else if (m.kind == kRepairRequest) {
            RepairResponse resp = impl.repair(repair_request_from_json(m.body));
            ch.send_line(encode_message({kRepairResponse, repair_response_to_json(resp)}));
        } else if (m.kind == kTaskContext) {
            Task t;
            t.task_id = m.body.at("task_id").get<std::string>();
            t.instruction = m.body.at("instruction").get<std::string>();
            for (const auto& c : m.body.at("goal")) t.goal.push_back(goal_clause_from_json(c));
            impl.on_task_context(t, agent_from_json(m.body.at("agent")));
        } else if (m.kind == kObservation) {
            impl.on_observation(observation_from_json(m.body));
        } else if (m.kind == kFeedback) {
            impl.on_feedback(feedback_from_json(m.body));
        } else if (m.kind == kRunEnd) {
            return;
        } else {
            throw ProtocolViolation("unknown message kind " + m.kind);
        }
    }
}

EpisodeRunLog serve_session(Channel& ch, const CompiledEpisode& ce, const RunConfig& cfg,
                            const ScoreConfig& score_cfg, ScoreCard* card_out) {
    RemotePlanner planner(ch, &ce.episode);
    EpisodeRunLog run = run_episode(ce, planner, cfg);
    ScoreCard card = score_run(ce, run, score_cfg);
    if (card_out) *card_out = card;
    try {
        planner.send_run_end(scorecard_to_json(card));
    } catch (const SimError&) {
        // client already gone; the run is still scored locally
    }
    return run;
}

} // namespace hworld
