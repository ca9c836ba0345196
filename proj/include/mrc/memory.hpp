#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mrc/types.hpp"

#include "json.hpp"

namespace mrc {

enum class Speaker { general_planner, subgroup_manager, executor };

const char* to_string(Speaker s);

struct DialogueTurn {
    int cycle = 0;
    Speaker speaker = Speaker::general_planner;
    int speaker_id = 0;  // gid for managers, agent id for executors
    std::string content;
};

struct AgentFeedback {
    AgentId agent = 0;
    int cycle = 0;
    bool success = false;
    std::string diagnostic;
};

struct AblationFlags {
    bool no_history = false;
    bool no_feedback = false;
    bool no_grouping = false;
};

struct PlannerContext {
    std::vector<DialogueTurn> recent_turns;  // at most 5
    EnvFeedback latest_env;
    std::vector<AgentFeedback> recent_agent_feedback;  // since last proposal
    AblationFlags ablations;
};

struct SubgroupContext {
    int gid = 0;
    std::vector<AgentId> members;
    std::vector<Observation> observations;   // restricted to members
    std::vector<DialogueTurn> recent_turns;  // at most 5, relevant speakers only
    AblationFlags ablations;
};

/// Append-only episode memory with windowed views (5-turn history, latest
/// environment feedback) and the ablation switches.
class ContextMemory {
public:
    explicit ContextMemory(AblationFlags ablations = {}) : ablations_(ablations) {}

    /// Throws std::invalid_argument on cycle regression.
    void record(DialogueTurn turn);
    void record(AgentFeedback feedback);
    void record(EnvFeedback feedback);

    /// Register the current cycle's grouping so subgroup views can be served.
    void set_assignments(int cycle, const std::map<int, std::vector<AgentId>>& groups);

    /// Throws std::runtime_error("world not yet stepped") before any EnvFeedback.
    PlannerContext context_for_planner() const;

    /// Throws std::invalid_argument for a gid absent from the current cycle.
    SubgroupContext context_for_subgroup(int gid) const;

    const std::vector<DialogueTurn>& turns() const { return turns_; }
    const std::vector<AgentFeedback>& agent_feedback() const { return agent_feedback_; }
    const std::vector<EnvFeedback>& env_feedback() const { return env_feedback_; }
    const AblationFlags& ablations() const { return ablations_; }
    int latest_cycle() const { return latest_cycle_; }

    nlohmann::json to_json() const;

private:
    void advance_cycle(int cycle);

    std::vector<DialogueTurn> turns_;
    std::vector<AgentFeedback> agent_feedback_;
    std::vector<EnvFeedback> env_feedback_;
    std::map<int, std::vector<AgentId>> assignments_;
    int assignments_cycle_ = -1;
    AblationFlags ablations_;
    int latest_cycle_ = 0;
    // Insertion index of the last general-planner turn, for the
    // "feedback since last proposal" window.
    std::size_t last_proposal_seq_ = 0;
    std::vector<std::size_t> feedback_seq_;
    std::size_t seq_ = 0;
};

nlohmann::json to_json(const DialogueTurn& t);
nlohmann::json to_json(const AgentFeedback& f);

}  // namespace mrc
