#include "hworld/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace hworld {

namespace {

std::string joined(std::vector<std::string> parts) {
    std::sort(parts.begin(), parts.end());
    std::string out;
    for (const std::string& p : parts) {
        if (!out.empty()) out += "+";
        out += p;
    }
    return out;
}

// Comparison slots present on a node: identity attributes are fixed, state
// facets contribute one slot each.
std::set<std::string> slots_of(const Node& n) {
    std::set<std::string> s{"location", "containment", "support"};
    if (n.state) s.insert("state");
    for (const auto& [k, v] : n.state_slots) s.insert("state." + k);
    if (n.amount) s.insert("amount");
    return s;
}

} // namespace

std::string slot_value(const WorldGraph& g, const std::string& object, const std::string& attr) {
    const Node* n = g.find(object);
    if (!n) return kAbsentSlot;
    if (attr == "location") return n->location ? *n->location : std::string("(held)");
    if (attr == "containment") {
        std::vector<std::string> c = g.containers_of(object);
        return c.empty() ? std::string("(none)") : joined(std::move(c));
    }
    if (attr == "support") {
        std::vector<std::string> s = g.supporters_of(object);
        return s.empty() ? std::string("(none)") : joined(std::move(s));
    }
    if (attr == "state") return n->state ? *n->state : kAbsentSlot;
    if (attr == "amount") return n->amount ? to_string(*n->amount) : kAbsentSlot;
    if (attr.rfind("state.", 0) == 0) {
        auto it = n->state_slots.find(attr.substr(6));
        return it == n->state_slots.end() ? kAbsentSlot : it->second;
    }
    return kAbsentSlot;
}

std::vector<ChangedSlot> compute_changed_slots(const WorldGraph& pre, const WorldGraph& post) {
    std::vector<ChangedSlot> out;
    std::set<std::string> ids;
    for (const auto& [id, n] : pre.nodes())
        if (n.kind != NodeKind::Area) ids.insert(id);
    for (const auto& [id, n] : post.nodes())
        if (n.kind != NodeKind::Area) ids.insert(id);
    for (const std::string& id : ids) {
        std::set<std::string> attrs;
        if (const Node* n = pre.find(id)) attrs.merge(slots_of(*n));
        if (const Node* n = post.find(id)) attrs.merge(slots_of(*n));
        // A node absent on one side differs in every slot it carries on the
        // other; "location" alone already flags creation/removal, the rest
        // pin down what the new node looks like.
        for (const std::string& attr : attrs) {
            std::string a = slot_value(pre, id, attr);
            std::string b = slot_value(post, id, attr);
            if (a != b) out.push_back({id, attr, a, b});
        }
    }
    return out;
}

nlohmann::ordered_json changed_slot_to_json(const ChangedSlot& c) {
    nlohmann::ordered_json j;
    j["object"] = c.object;
    j["attr"] = c.attr;
    j["init_value"] = c.init_value;
    j["gt_value"] = c.gt_value;
    return j;
}

ChangedSlot changed_slot_from_json(const nlohmann::json& j) {
    ChangedSlot c;
    c.object = j.at("object").get<std::string>();
    c.attr = j.at("attr").get<std::string>();
    c.init_value = j.at("init_value").get<std::string>();
    c.gt_value = j.at("gt_value").get<std::string>();
    return c;
}

double action_f1(const std::vector<PrimitiveAction>& predicted,
                 const std::vector<PrimitiveAction>& gt, const ScoreConfig& cfg) {
    if (predicted.empty() && gt.empty()) return cfg.both_empty_f1;
    if (predicted.empty() || gt.empty()) return cfg.one_empty_f1;
    std::map<std::string, int> want;
    for (const PrimitiveAction& a : gt) ++want[a.type];
    int tp = 0;
    for (const PrimitiveAction& a : predicted) {
        auto it = want.find(a.type);
        if (it != want.end() && it->second > 0) {
            --it->second;
            ++tp;
        }
    }
    if (tp == 0) return 0.0;
    double precision = double(tp) / double(predicted.size());
    double recall = double(tp) / double(gt.size());
    return 2.0 * precision * recall / (precision + recall);
}

ReplayOutcome replay_predicted(const RuleBase& rules, const TaskGroundTruth& gt,
                               const std::vector<PrimitiveAction>& predicted) {
    ReplayOutcome out;
    out.end = gt.pre;
    out.end_agent = gt.pre_agent;
    for (const PrimitiveAction& a : predicted) {
        ++out.attempted;
        ExecResult res = execute_primitive(out.end, out.end_agent, rules, a);
        if (res.feedback.outcome == Outcome::Success) {
            ++out.valid;
            out.valid_actions.push_back(res.feedback.action); // normalized verb
            out.end = std::move(res.graph);
            out.end_agent = res.agent;
        }
    }
    return out;
}

TaskScore score_task(const RuleBase& rules, const Task& task, const TaskGroundTruth& gt,
                     const std::vector<PrimitiveAction>& predicted,
                     const std::vector<std::string>& known_labels, const ScoreConfig& cfg) {
    TaskScore s;
    s.task_id = task.task_id;
    s.budget = gt.budget;
    s.f1 = action_f1(predicted, gt.gt_primitives, cfg);

    ReplayOutcome rep = replay_predicted(rules, gt, predicted);
    s.attempted = rep.attempted;
    s.valid = rep.valid;
    s.validity = rep.attempted == 0 ? cfg.empty_attempt_validity
                                    : double(rep.valid) / double(rep.attempted);

    if (gt.changed.empty()) {
        s.wsr = cfg.empty_changed_wsr;
    } else {
        int hit = 0;
        for (const ChangedSlot& c : gt.changed)
            if (slot_value(rep.end, c.object, c.attr) == c.gt_value) ++hit;
        s.wsr = double(hit) / double(gt.changed.size());
    }

    std::set<std::string> labels(known_labels.begin(), known_labels.end());
    bool goal_ok = labels.empty() ? check_goal(task.goal, rep.end)
                                  : check_goal(task.goal, rep.end, labels);
    s.tsr = (goal_ok && rep.attempted <= gt.budget) ? 1.0 : 0.0;

    if (task.key_actions.empty()) {
        s.tcr = cfg.empty_key_tcr;
    } else {
        // Labels for predicted arguments come from the replay world as the
        // action executed; the pre-state resolves most, rule products resolve
        // against the end state.
        std::multiset<std::pair<std::string, std::string>> have;
        for (const PrimitiveAction& a : rep.valid_actions) {
            std::string label;
            if (a.object) {
                const Node* n = gt.pre.find(*a.object);
                if (!n) n = rep.end.find(*a.object);
                label = n ? n->label : *a.object;
            }
            have.insert({a.type, label});
        }
        int done = 0;
        for (const auto& key : task.key_actions) {
            auto it = have.find(key);
            if (it != have.end()) {
                have.erase(it);
                ++done;
            }
        }
        s.tcr = double(done) / double(task.key_actions.size());
    }
    return s;
}

ScoreCard summarize(std::vector<TaskScore> tasks) {
    ScoreCard sc;
    sc.tasks = std::move(tasks);
    if (sc.tasks.empty()) {
        sc.episode_tsr = 1.0;
        return sc;
    }
    double n = double(sc.tasks.size());
    bool all = true;
    for (const TaskScore& t : sc.tasks) {
        sc.mean_f1 += t.f1;
        sc.mean_wsr += t.wsr;
        sc.goal_tsr += t.tsr;
        sc.mean_tcr += t.tcr;
        sc.mean_validity += t.validity;
        all = all && t.tsr == 1.0;
    }
    sc.mean_f1 /= n;
    sc.mean_wsr /= n;
    sc.goal_tsr /= n;
    sc.mean_tcr /= n;
    sc.mean_validity /= n;
    sc.episode_tsr = all ? 1.0 : 0.0;
    return sc;
}

nlohmann::ordered_json scorecard_to_json(const ScoreCard& sc) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json tasks = nlohmann::ordered_json::array();
    for (const TaskScore& t : sc.tasks) {
        nlohmann::ordered_json tj;
        tj["task_id"] = t.task_id;
        tj["action_f1"] = t.f1;
        tj["wsr"] = t.wsr;
        tj["tsr"] = t.tsr;
        tj["tcr"] = t.tcr;
        tj["validity"] = t.validity;
        tj["attempted"] = t.attempted;
        tj["valid"] = t.valid;
        tj["budget"] = t.budget;
        tasks.push_back(std::move(tj));
    }
    j["tasks"] = tasks;
    j["mean_action_f1"] = sc.mean_f1;
    j["mean_wsr"] = sc.mean_wsr;
    j["goal_tsr"] = sc.goal_tsr;
    j["episode_tsr"] = sc.episode_tsr;
    j["mean_tcr"] = sc.mean_tcr;
    j["mean_validity"] = sc.mean_validity;
    return j;
}

std::string scorecard_to_tsv(const ScoreCard& sc) {
    std::string out = "task_id\taction_f1\twsr\ttsr\ttcr\tvalidity\tattempted\tvalid\tbudget\n";
    char buf[64];
    auto fmt = [&](double v) {
        snprintf(buf, sizeof buf, "%.4f", v);
        return std::string(buf);
    };
    for (const TaskScore& t : sc.tasks)
        out += t.task_id + "\t" + fmt(t.f1) + "\t" + fmt(t.wsr) + "\t" + fmt(t.tsr) + "\t" +
               fmt(t.tcr) + "\t" + fmt(t.validity) + "\t" + std::to_string(t.attempted) + "\t" +
               std::to_string(t.valid) + "\t" + std::to_string(t.budget) + "\n";
    out += "mean\t" + fmt(sc.mean_f1) + "\t" + fmt(sc.mean_wsr) + "\t" + fmt(sc.goal_tsr) + "\t" +
           fmt(sc.mean_tcr) + "\t" + fmt(sc.mean_validity) + "\t-\t-\t-\n";
    return out;
}

std::vector<double> aggregate_long_horizon(const std::vector<std::vector<double>>& per_episode) {
    if (per_episode.empty()) return {};
    size_t len = per_episode[0].size();
    for (const auto& ep : per_episode) len = std::min(len, ep.size());
    std::vector<double> out(len, 0.0);
    for (const auto& ep : per_episode)
        for (size_t i = 0; i < len; ++i) out[i] += ep[i];
    for (double& v : out) v /= double(per_episode.size());
    return out;
}

BootstrapResult paired_bootstrap(const std::vector<double>& a, const std::vector<double>& b,
                                 int resamples, uint64_t seed, double ci) {
    if (a.size() != b.size())
        throw LengthMismatch("paired bootstrap requires equal-length samples (" +
                             std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    BootstrapResult out;
    out.resamples = resamples;
    if (a.empty() || resamples <= 0) return out;

    size_t n = a.size();
    std::vector<double> diffs(n);
    double mean = 0.0;
    for (size_t i = 0; i < n; ++i) {
        diffs[i] = a[i] - b[i];
        mean += diffs[i];
    }
    mean /= double(n);
    out.delta = mean;

    std::mt19937_64 gen(seed);
    std::vector<double> means(resamples);
    int le = 0, ge = 0;
    for (int r = 0; r < resamples; ++r) {
        double m = 0.0;
        for (size_t i = 0; i < n; ++i) m += diffs[gen() % n];
        m /= double(n);
        means[r] = m;
        if (m <= 0.0) ++le;
        if (m >= 0.0) ++ge;
    }
    std::sort(means.begin(), means.end());
    double alpha = (1.0 - ci) / 2.0;
    auto pick = [&](double q) {
        double pos = q * double(resamples - 1);
        size_t lo = size_t(std::floor(pos));
        size_t hi = size_t(std::ceil(pos));
        double frac = pos - double(lo);
        return means[lo] * (1.0 - frac) + means[hi] * frac;
    };
    out.ci_lo = pick(alpha);
    out.ci_hi = pick(1.0 - alpha);
    double p_lo = double(le) / double(resamples);
    double p_hi = double(ge) / double(resamples);
    out.p_value = std::min(1.0, 2.0 * std::min(p_lo, p_hi));
    return out;
}

} // namespace hworld
