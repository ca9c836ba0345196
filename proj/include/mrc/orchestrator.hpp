#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mrc/backends.hpp"
#include "mrc/command.hpp"
#include "mrc/memory.hpp"
#include "mrc/world.hpp"

namespace mrc {

struct SubgroupAssignment {
    int gid = 0;
    std::vector<std::pair<std::string, int>> members;
    std::string subtask;
};

struct Proposal {
    std::string situation_analysis;
    std::string spatial_analysis;
    std::string task_decomposition;
    std::string grouping_strategy;
    std::string subgoal_assignment;
    std::string coordination_strategy;
    std::string risk_assessment;
    std::vector<SubgroupAssignment> assignments;
};

/// Parses the labeled seven-section proposal plus the Assignments block.
/// Returns nullopt (with an error message) on malformed text or a partition
/// violation.
struct ProposalParse {
    std::optional<Proposal> proposal;
    std::string error;
};
ProposalParse parse_proposal(const std::string& text);

struct ExecutorDecision {
    AgentId agent = 0;
    StructuredCommand command;
    bool execute = false;
    AgentFeedback feedback;
};

struct CycleRecord {
    int cycle = 0;
    Proposal proposal;
    std::string proposal_text;
    std::map<int, std::vector<RawCommand>> subgroup_commands;
    std::vector<ExecutorDecision> decisions;
    std::vector<FailureFeedback> verification_failures;
    EnvFeedback env_feedback;
    std::vector<SkillRecord> skill_records;

    nlohmann::json to_json() const;
    /// One line of the scene-dynamics log (groups and subtasks).
    nlohmann::json dynamics_line() const;
    /// One line of the parallel-execution log (per-agent skills).
    nlohmann::json execution_line() const;
};

struct TaskSpec {
    int id = 1;
    std::string name = "Task1";
    Difficulty difficulty = Difficulty::easy;
    std::uint64_t seed = 0;
    int gt_steps = 7;
    std::vector<std::string> blocked_anchors;  // hard tasks only

    TaskBrief brief() const;
    static std::vector<TaskSpec> default_tasks();
};

struct EpisodeResult {
    TaskSpec task;
    int trial = 0;
    bool success = false;
    int steps = 0;
    std::string label = "default";
    nlohmann::json log;
};

struct OrchestratorConfig {
    AblationFlags ablations;
    VerifyConfig verify;
    SkillConfig skills = SkillConfig::defaults();
    SceneConfig scene = SceneConfig::defaults();
    PromptTemplate planner_template = default_template(BackendRole::general_planner);
    PromptTemplate manager_template = default_template(BackendRole::subgroup_manager);
    PromptTemplate executor_template = default_template(BackendRole::executor);
    int max_proposal_retries = 2;
    /// Extra steps reported by a timed-out episode beyond the consumed budget.
    int timeout_step_penalty = 0;
};

/// Executor-side feasibility re-check. Rule checks are authoritative; the
/// backend's reply is advisory text recorded in the dialogue.
ExecutorDecision executor_decide(const StructuredCommand& cmd,
                                 const SkillInvocation& invocation,
                                 const AgentState& agent, const Observation& obs,
                                 Backend& backend,
                                 const OrchestratorConfig& cfg, int cycle);

class Orchestrator {
public:
    Orchestrator(World& world, ContextMemory& memory, Backend& backend,
                 OrchestratorConfig cfg, const TaskBrief& task);

    CycleRecord run_cycle(int cycle);

private:
    Proposal plan(int cycle, CycleRecord& record);
    std::map<std::string, std::string> planner_values(const PlannerContext& ctx) const;
    nlohmann::json planner_context_json(int cycle, const PlannerContext& ctx) const;

    World& world_;
    ContextMemory& memory_;
    Backend& backend_;
    OrchestratorConfig cfg_;
    TaskBrief task_;
    std::vector<VerificationResult> deferred_;
};

EpisodeResult run_episode(const TaskSpec& task, Backend& backend,
                          std::uint64_t seed, const OrchestratorConfig& cfg,
                          int trial = 0, const std::string& label = "default");

}  // namespace mrc
