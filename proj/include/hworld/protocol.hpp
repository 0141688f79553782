#pragma once

#include <memory>
#include <utility>

#include "hworld/agent_runtime.hpp"

namespace hworld {

/// Wire message: one JSON object per line, {"kind": ..., "body": {...}}.
/// Kinds: TASK_CONTEXT, OBSERVATION, FEEDBACK, PLAN_REQUEST, PLAN_RESPONSE,
/// REPAIR_REQUEST, REPAIR_RESPONSE, RUN_END. The wire never carries the
/// hidden graph; belief and observations are the only state that crosses.
struct Message {
    std::string kind;
    nlohmann::ordered_json body;
};

std::string encode_message(const Message& m); // single line, '\n' terminated
Message decode_message(const std::string& line); // throws ProtocolViolation

/// Blocking line transport.
class Channel {
public:
    virtual ~Channel() = default;
    virtual void send_line(const std::string& line) = 0;
    /// One line without its terminator; nullopt on clean EOF.
    virtual std::optional<std::string> recv_line() = 0;
};

/// Channel over a pair of file descriptors (pipe ends, a socket passed twice,
/// or stdio). Owns and closes the descriptors unless told otherwise.
class FdChannel : public Channel {
public:
    FdChannel(int read_fd, int write_fd, bool owns = true);
    ~FdChannel() override;
    FdChannel(const FdChannel&) = delete;
    FdChannel& operator=(const FdChannel&) = delete;

    void send_line(const std::string& line) override;
    std::optional<std::string> recv_line() override;

private:
    int read_fd_;
    int write_fd_;
    bool owns_;
    std::string buf_;
};

/// Two connected in-process channels (two pipes crossed); first talks to
/// second. Used by tests and by the subprocess planner launcher.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> pipe_channel_pair();

/// Minimal TCP plumbing; every call throws ProtocolViolation on failure.
int tcp_listen(unsigned short port);              // returns listening fd
int tcp_accept(int listen_fd);                    // returns connection fd
int tcp_connect(const std::string& host, unsigned short port);

// Request/response codecs shared by both sides of the wire.
nlohmann::ordered_json plan_request_to_json(const PlanRequest& req);
PlanRequest plan_request_from_json(const nlohmann::json& j);
nlohmann::ordered_json plan_response_to_json(const PlanResponse& resp);
PlanResponse plan_response_from_json(const nlohmann::json& j);
nlohmann::ordered_json repair_request_to_json(const RepairRequest& req);
RepairRequest repair_request_from_json(const nlohmann::json& j);
nlohmann::ordered_json repair_response_to_json(const RepairResponse& resp);
RepairResponse repair_response_from_json(const nlohmann::json& j);

/// Planner proxy speaking the wire protocol. A malformed or missing
/// REPAIR_RESPONSE consumes the repair attempt (no correction); a malformed
/// PLAN_RESPONSE or a disconnect during planning raises ProtocolViolation,
/// which the runtime reports as a planner error and scores the task as-is.
class RemotePlanner : public PlannerInterface {
public:
    /// `ep` (optional) lets TASK_CONTEXT announce the skill vocabulary the
    /// client may draw plans from.
    explicit RemotePlanner(Channel& ch, const Episode* ep = nullptr) : ch_(&ch), episode_(ep) {}

    PlanResponse plan(const PlanRequest& req) override;
    RepairResponse repair(const RepairRequest& req) override;
    void on_task_context(const Task& task, const AgentPhysState& agent) override;
    void on_observation(const Observation& obs) override;
    void on_feedback(const Feedback& fb) override;

    void send_run_end(const nlohmann::ordered_json& scorecard);

private:
    Channel* ch_;
    const Episode* episode_;
};

/// Client-side loop: answers PLAN_REQUEST/REPAIR_REQUEST with `impl`,
/// forwards pushes to its hooks, returns on RUN_END or EOF. Throws
/// ProtocolViolation on an unknown message kind.
void serve_planner(Channel& ch, PlannerInterface& impl);

/// Server side of one full episode over an established channel: drives
/// run_episode with a RemotePlanner, then sends RUN_END with the scorecard.
EpisodeRunLog serve_session(Channel& ch, const CompiledEpisode& ce, const RunConfig& cfg,
                            const ScoreConfig& score_cfg, ScoreCard* card_out = nullptr);

} // namespace hworld
