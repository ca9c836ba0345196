#include "mrc/memory.hpp"

#include <algorithm>
#include <stdexcept>

#include "mrc/world.hpp"

namespace mrc {

const char* to_string(Speaker s) {
    switch (s) {
        case Speaker::general_planner: return "general_planner";
        case Speaker::subgroup_manager: return "subgroup_manager";
        case Speaker::executor: return "executor";
    }
    return "?";
}

void ContextMemory::advance_cycle(int cycle) {
    if (cycle < latest_cycle_) {
        throw std::invalid_argument("cycle regression: " + std::to_string(cycle) +
                                    " after " + std::to_string(latest_cycle_));
    }
    latest_cycle_ = cycle;
}

void ContextMemory::record(DialogueTurn turn) {
    advance_cycle(turn.cycle);
    ++seq_;
    if (turn.speaker == Speaker::general_planner) last_proposal_seq_ = seq_;
    turns_.push_back(std::move(turn));
}

void ContextMemory::record(AgentFeedback feedback) {
    advance_cycle(feedback.cycle);
    ++seq_;
    feedback_seq_.push_back(seq_);
    agent_feedback_.push_back(std::move(feedback));
}

void ContextMemory::record(EnvFeedback feedback) {
    advance_cycle(feedback.step);
    ++seq_;
    env_feedback_.push_back(std::move(feedback));
}

void ContextMemory::set_assignments(int cycle,
                                    const std::map<int, std::vector<AgentId>>& groups) {
    advance_cycle(cycle);
    assignments_ = groups;
    assignments_cycle_ = cycle;
}

PlannerContext ContextMemory::context_for_planner() const {
    if (env_feedback_.empty()) throw std::runtime_error("world not yet stepped");

    PlannerContext ctx;
    ctx.ablations = ablations_;
    ctx.latest_env = env_feedback_.back();
    if (ablations_.no_feedback) ctx.latest_env.conflicts.clear();

    if (!ablations_.no_history) {
        const std::size_t n = std::min<std::size_t>(5, turns_.size());
        ctx.recent_turns.assign(turns_.end() - n, turns_.end());
    }
    if (!ablations_.no_feedback) {
        for (std::size_t i = 0; i < agent_feedback_.size(); ++i) {
            if (feedback_seq_[i] > last_proposal_seq_) {
                ctx.recent_agent_feedback.push_back(agent_feedback_[i]);
            }
        }
    }
    return ctx;
}

SubgroupContext ContextMemory::context_for_subgroup(int gid) const {
    auto it = assignments_.find(gid);
    if (it == assignments_.end() || assignments_cycle_ != latest_cycle_) {
        throw std::invalid_argument("unknown group id " + std::to_string(gid));
    }

    SubgroupContext ctx;
    ctx.gid = gid;
    ctx.members = it->second;
    ctx.ablations = ablations_;

    if (!env_feedback_.empty()) {
        for (const auto& obs : env_feedback_.back().state_updates) {
            if (std::find(ctx.members.begin(), ctx.members.end(), obs.observer) !=
                ctx.members.end()) {
                ctx.observations.push_back(obs);
            }
        }
    }

    if (!ablations_.no_history) {
        std::vector<DialogueTurn> relevant;
        for (const auto& t : turns_) {
            const bool member_executor =
                t.speaker == Speaker::executor &&
                std::find(ctx.members.begin(), ctx.members.end(), t.speaker_id) !=
                    ctx.members.end();
            const bool own_manager =
                t.speaker == Speaker::subgroup_manager && t.speaker_id == gid;
            const bool planner = t.speaker == Speaker::general_planner;
            if (!(member_executor || own_manager || planner)) continue;
            if (ablations_.no_feedback && t.speaker == Speaker::executor) continue;
            relevant.push_back(t);
        }
        const std::size_t n = std::min<std::size_t>(5, relevant.size());
        ctx.recent_turns.assign(relevant.end() - n, relevant.end());
    }
    return ctx;
}

nlohmann::json to_json(const DialogueTurn& t) {
    return nlohmann::json{{"cycle", t.cycle},
                          {"speaker", to_string(t.speaker)},
                          {"speaker_id", t.speaker_id},
                          {"content", t.content}};
}

nlohmann::json to_json(const AgentFeedback& f) {
    return nlohmann::json{{"agent", f.agent},
                          {"cycle", f.cycle},
                          {"success", f.success},
                          {"diagnostic", f.diagnostic}};
}

nlohmann::json ContextMemory::to_json() const {
    nlohmann::json turns = nlohmann::json::array();
    for (const auto& t : turns_) turns.push_back(mrc::to_json(t));
    nlohmann::json feedback = nlohmann::json::array();
    for (const auto& f : agent_feedback_) feedback.push_back(mrc::to_json(f));
    nlohmann::json env = nlohmann::json::array();
    for (const auto& e : env_feedback_) env.push_back(mrc::to_json(e));
    return nlohmann::json{{"turns", turns},
                          {"agent_feedback", feedback},
                          {"env_feedback", env},
                          {"ablations",
                           {{"no_history", ablations_.no_history},
                            {"no_feedback", ablations_.no_feedback},
                            {"no_grouping", ablations_.no_grouping}}}};
}

}  // namespace mrc
