// hworld: scenario compiler, episode runner, scorer, and protocol endpoints.
//
// Exit status is 0 iff the command completed without errors; diagnostics go
// to stderr as "error: <code>: <message>" lines. Task failures inside a run
// are results, not errors.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>

#include "hworld/protocol.hpp"

namespace {

using namespace hworld;

int env_int(const char* name, int dflt) {
    const char* v = std::getenv(name);
    return v ? std::atoi(v) : dflt;
}

double env_double(const char* name, double dflt) {
    const char* v = std::getenv(name);
    return v ? std::atof(v) : dflt;
}

// Flag defaults come from the environment so CI can pin budgets and belief
// parameters without touching every invocation.
RunConfig config_from_env() {
    RunConfig cfg;
    cfg.belief.rho_absent = env_double("HWORLD_RHO_ABSENT", cfg.belief.rho_absent);
    cfg.belief.rho_fail = env_double("HWORLD_RHO_FAIL", cfg.belief.rho_fail);
    cfg.belief.delta_stale = env_int("HWORLD_DELTA_STALE", cfg.belief.delta_stale);
    cfg.belief.vlm_confidence = env_double("HWORLD_VLM_CONFIDENCE", cfg.belief.vlm_confidence);
    cfg.step_budget_factor = env_int("HWORLD_STEP_BUDGET_FACTOR", cfg.step_budget_factor);
    cfg.replan_budget = env_int("HWORLD_REPLAN_BUDGET", cfg.replan_budget);
    cfg.repair_cap = env_int("HWORLD_REPAIR_CAP", cfg.repair_cap);
    cfg.oracle_trigger = env_double("HWORLD_ORACLE_TRIGGER", cfg.oracle_trigger);
    cfg.forgetting.cap = env_int("HWORLD_MEMORY_CAP", cfg.forgetting.cap);
    cfg.forgetting.rate = env_double("HWORLD_MEMORY_RATE", cfg.forgetting.rate);
    return cfg;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path);
    out << content;
}

// Parses a scenario file, printing every diagnostic; exits via return code
// when the text is unusable.
std::optional<ScenarioFile> parse_or_report(const std::string& path) {
    ParseResult pr = parse_scenario(read_file(path));
    for (const Diagnostic& d : pr.diagnostics) std::cerr << format_diagnostic(d) << "\n";
    return pr.scenario;
}

std::string run_log_text(const EpisodeRunLog& run) {
    std::string out;
    for (const TaskRunLog& t : run.tasks) out += log_to_jsonl(t);
    return out;
}

struct ChildPlanner {
    pid_t pid = -1;
    std::unique_ptr<FdChannel> channel;
};

ChildPlanner spawn_planner(const std::string& cmd) {
    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0)
        throw ProtocolViolation("cannot create planner pipes");
    pid_t pid = fork();
    if (pid < 0) throw ProtocolViolation("cannot fork planner process");
    if (pid == 0) {
        dup2(to_child[0], STDIN_FILENO);
        dup2(from_child[1], STDOUT_FILENO);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    ChildPlanner child;
    child.pid = pid;
    child.channel = std::make_unique<FdChannel>(from_child[0], to_child[1]);
    return child;
}

std::pair<std::string, unsigned short> split_endpoint(const std::string& endpoint) {
    auto pos = endpoint.rfind(':');
    if (pos == std::string::npos)
        throw ProtocolViolation("endpoint must be host:port, got '" + endpoint + "'");
    return {endpoint.substr(0, pos),
            static_cast<unsigned short>(std::stoi(endpoint.substr(pos + 1)))};
}

unsigned short bound_port(int listen_fd) {
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    if (getsockname(listen_fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0)
        throw ProtocolViolation("getsockname failed");
    return ntohs(addr.sin_port);
}

ScriptedPlanner gt_scripted(const Episode& ep) {
    ScriptedPlanner planner;
    for (const Task& t : ep.tasks) {
        std::vector<PlanStep> steps;
        for (const GtSkillRef& ref : t.gt_skills) steps.push_back({ref.skill_id, ref.binding});
        planner.set_plan(t.task_id, std::move(steps));
    }
    return planner;
}

int cmd_compile(const std::string& path, std::string out_dir) {
    std::optional<ScenarioFile> sf = parse_or_report(path);
    if (!sf) return 1;
    ValidationReport report = validate_scenario(*sf);
    if (!report.all_pass()) {
        for (const CheckResult& c : report.checks)
            if (!c.pass) std::cerr << "error: validation: " << c.check_id << ": " << c.detail << "\n";
        return 1;
    }
    CompiledEpisode ce = compile_episode(*sf);
    if (out_dir.empty())
        out_dir = std::filesystem::path(path).stem().string() + "_episode";
    write_episode_dir(ce, out_dir);
    size_t records = 0;
    for (const auto& r : ce.records) records += r.size();
    std::cout << "episode " << ce.episode.episode_id << ": " << ce.episode.tasks.size()
              << " tasks, " << records << " records\n"
              << "wrote " << out_dir << "\n";
    return 0;
}

int cmd_validate(const std::string& path) {
    std::optional<ScenarioFile> sf = parse_or_report(path);
    if (!sf) return 1;
    ValidationReport report = validate_scenario(*sf);
    for (const CheckResult& c : report.checks) {
        std::cout << c.check_id << (c.pass ? ": pass" : ": fail: " + c.detail) << "\n";
    }
    return report.all_pass() ? 0 : 1;
}

int cmd_audit(const std::string& dir) {
    CompiledEpisode ce = load_episode_dir(dir);
    AuditReport rep = audit_compiled(ce);
    char buf[64];
    auto line = [&](const char* name, double v) {
        std::snprintf(buf, sizeof(buf), "%s %.4f", name, v);
        std::cout << buf << "\n";
    };
    line("coverage", rep.coverage);
    line("hallucination_rate", rep.hallucination_rate);
    line("missing_key_state_rate", rep.missing_key_state_rate);
    line("replay_success_rate", rep.replay_success_rate);
    line("temporal_error_rate", rep.temporal_error_rate);
    for (const std::string& n : rep.notes) std::cout << "# " << n << "\n";
    return 0;
}

int cmd_run(const std::string& dir, const std::string& planner_kind, const std::string& planner_cmd,
            const std::string& connect, RunConfig cfg, const std::string& out_path,
            const std::string& scorecard_path) {
    CompiledEpisode ce = load_episode_dir(dir);
    EpisodeRunLog run;
    ScoreCard card;

    if (planner_kind == "heuristic") {
        HeuristicPlanner planner(ce.episode);
        run = run_episode(ce, planner, cfg);
        card = score_run(ce, run);
    } else if (planner_kind == "external") {
        if (!planner_cmd.empty()) {
            ChildPlanner child = spawn_planner(planner_cmd);
            run = serve_session(*child.channel, ce, cfg, {}, &card);
            child.channel.reset(); // closes the pipes so the child sees EOF
            int status = 0;
            waitpid(child.pid, &status, 0);
        } else if (!connect.empty()) {
            auto [host, port] = split_endpoint(connect);
            int fd = tcp_connect(host, port);
            FdChannel ch(fd, dup(fd));
            run = serve_session(ch, ce, cfg, {}, &card);
        } else {
            std::cerr << "error: usage: --planner external needs --planner-cmd or --connect\n";
            return 1;
        }
    } else {
        std::cerr << "error: usage: unknown planner '" << planner_kind << "'\n";
        return 1;
    }

    write_file(out_path, run_log_text(run));
    if (!scorecard_path.empty()) write_file(scorecard_path, scorecard_to_json(card).dump(2) + "\n");
    std::cout << scorecard_to_tsv(card);
    return 0;
}

int cmd_score(const std::string& dir, const std::string& logs_path, const std::string& out_path) {
    CompiledEpisode ce = load_episode_dir(dir);
    std::map<std::string, std::vector<PrimitiveAction>> attempted;
    std::istringstream in(read_file(logs_path));
    std::string line;
    std::string current;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json e;
        try {
            e = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError(logs_path + ":" + std::to_string(lineno) + ": " + ex.what());
        }
        std::string kind = e.value("event", "");
        if (kind == "task_start") {
            current = e.at("task_id").get<std::string>();
            attempted[current].clear();
        } else if (e.contains("action") && e.contains("outcome") && !current.empty()) {
            attempted[current].push_back(action_from_json(e.at("action")));
        }
    }

    std::vector<std::string> labels(ce.episode.known_labels.begin(),
                                    ce.episode.known_labels.end());
    std::vector<TaskScore> scores;
    for (size_t i = 0; i < ce.episode.tasks.size(); ++i) {
        const Task& task = ce.episode.tasks[i];
        auto it = attempted.find(task.task_id);
        if (it == attempted.end()) {
            std::cerr << "note: task '" << task.task_id << "' absent from log, skipped\n";
            continue;
        }
        scores.push_back(score_task(ce.episode.rules, task, ce.gt[i], it->second, labels));
    }
    ScoreCard card = summarize(std::move(scores));
    if (!out_path.empty()) write_file(out_path, scorecard_to_json(card).dump(2) + "\n");
    std::cout << scorecard_to_tsv(card);
    return 0;
}

int cmd_bootstrap(const std::string& pairs_path, int resamples, uint64_t seed, double ci) {
    nlohmann::json doc = nlohmann::json::parse(read_file(pairs_path));
    std::vector<double> a = doc.at("a").get<std::vector<double>>();
    std::vector<double> b = doc.at("b").get<std::vector<double>>();
    BootstrapResult r = paired_bootstrap(a, b, resamples, seed, ci);
    nlohmann::ordered_json out;
    out["delta"] = r.delta;
    out["ci_lo"] = r.ci_lo;
    out["ci_hi"] = r.ci_hi;
    out["p_value"] = r.p_value;
    out["resamples"] = r.resamples;
    std::cout << out.dump() << "\n";
    return 0;
}

int cmd_serve(const std::string& dir, int port, int sessions, const std::string& prefix,
              const RunConfig& cfg) {
    CompiledEpisode ce = load_episode_dir(dir);
    int listen_fd = tcp_listen(static_cast<unsigned short>(port));
    std::cout << "listening on " << bound_port(listen_fd) << "\n" << std::flush;
    for (int i = 0; i < sessions; ++i) {
        int cfd = tcp_accept(listen_fd);
        FdChannel ch(cfd, dup(cfd));
        ScoreCard card;
        EpisodeRunLog run;
        try {
            run = serve_session(ch, ce, cfg, {}, &card);
        } catch (const SimError& e) {
            std::cerr << "error: " << e.what() << "\n";
            continue;
        }
        std::string base = prefix + "_" + std::to_string(i + 1);
        write_file(base + ".jsonl", run_log_text(run));
        write_file(base + "_scorecard.json", scorecard_to_json(card).dump(2) + "\n");
        std::cout << "session " << (i + 1) << ": wrote " << base << ".jsonl\n" << std::flush;
    }
    close(listen_fd);
    return 0;
}

int cmd_client(const std::string& dir) {
    CompiledEpisode ce = load_episode_dir(dir);
    ScriptedPlanner planner = gt_scripted(ce.episode);
    FdChannel ch(STDIN_FILENO, STDOUT_FILENO, /*owns=*/false);
    serve_planner(ch, planner);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    std::signal(SIGPIPE, SIG_IGN);

    CLI::App app{"hidden-world household simulator"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string episode_dir;
    std::string out_dir;
    auto* compile = app.add_subcommand("compile", "validate a scenario and emit an episode dir");
    compile->add_option("scenario", scenario_path, "scenario file")->required();
    compile->add_option("-o,--out", out_dir, "output directory (default: <stem>_episode)");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "run scenario checks and report");
    validate->add_option("scenario", validate_path, "scenario file")->required();

    std::string audit_dir;
    auto* audit = app.add_subcommand("audit", "print audit metrics for a compiled episode");
    audit->add_option("episode", audit_dir, "episode directory")->required();

    RunConfig cfg = config_from_env();
    std::string planner_kind = "heuristic";
    std::string planner_cmd;
    std::string connect;
    std::string memory = "full";
    std::string run_dir;
    std::string run_out = "run_log.jsonl";
    std::string run_scorecard;
    auto* run = app.add_subcommand("run", "run an episode and emit TaskRunLogs");
    run->add_option("episode", run_dir, "episode directory")->required();
    run->add_option("--planner", planner_kind, "heuristic|external")
        ->check(CLI::IsMember({"heuristic", "external"}));
    run->add_option("--planner-cmd", planner_cmd, "external planner command (stdio protocol)");
    run->add_option("--connect", connect, "external planner endpoint host:port");
    run->add_option("--interface", cfg.interface, "flow|diff")
        ->check(CLI::IsMember({"flow", "diff"}));
    run->add_option("--memory", memory, "full|none|bounded")
        ->check(CLI::IsMember({"full", "none", "bounded"}));
    run->add_option("--memory-cap", cfg.forgetting.cap, "bounded memory node cap");
    run->add_option("--memory-rate", cfg.forgetting.rate, "bounded memory drop rate");
    run->add_option("--seed", cfg.seed, "run seed (forgetting randomness)");
    run->add_option("--out", run_out, "run log path (JSONL)");
    run->add_option("--scorecard", run_scorecard, "scorecard JSON path");

    std::string score_dir;
    std::string score_logs;
    std::string score_out;
    auto* score = app.add_subcommand("score", "score a run log against an episode");
    score->add_option("episode", score_dir, "episode directory")->required();
    score->add_option("logs", score_logs, "run log (JSONL)")->required();
    score->add_option("--out", score_out, "scorecard JSON path");

    std::string pairs_path;
    int resamples = 10000;
    uint64_t bs_seed = 0;
    double ci = 0.95;
    auto* bootstrap = app.add_subcommand("bootstrap", "paired bootstrap over metric pairs");
    bootstrap->add_option("pairs", pairs_path, "JSON file {\"a\": [...], \"b\": [...]}")->required();
    bootstrap->add_option("--resamples", resamples, "bootstrap resamples");
    bootstrap->add_option("--seed", bs_seed, "bootstrap seed");
    bootstrap->add_option("--ci", ci, "confidence level");

    std::string serve_dir;
    int port = 0;
    int sessions = 1;
    std::string prefix = "serve";
    auto* serve = app.add_subcommand("serve", "serve episodes over the wire protocol");
    serve->add_option("episode", serve_dir, "episode directory")->required();
    serve->add_option("--listen", port, "TCP port (0 picks one; printed on stdout)");
    serve->add_option("--sessions", sessions, "sessions to serve before exiting");
    serve->add_option("--out-prefix", prefix, "transcript file prefix");

    std::string client_dir;
    auto* client = app.add_subcommand("client", "scripted GT planner client on stdio");
    client->add_option("episode", client_dir, "episode directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*compile) return cmd_compile(scenario_path, out_dir);
        if (*validate) return cmd_validate(validate_path);
        if (*audit) return cmd_audit(audit_dir);
        if (*run) {
            cfg.forgetting.mode = memory_mode_from_string(memory);
            return cmd_run(run_dir, planner_kind, planner_cmd, connect, cfg, run_out,
                           run_scorecard);
        }
        if (*score) return cmd_score(score_dir, score_logs, score_out);
        if (*bootstrap) return cmd_bootstrap(pairs_path, resamples, bs_seed, ci);
        if (*serve) {
            cfg.forgetting.mode = memory_mode_from_string(memory);
            return cmd_serve(serve_dir, port, sessions, prefix, cfg);
        }
        if (*client) return cmd_client(client_dir);
    } catch (const SimError& e) {
        std::cerr << "error: " << e.what() << "\n"; // what() is "code: message"
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
