#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mrc/config.hpp"
#include "mrc/types.hpp"

namespace mrc {

struct RawCommand {
    std::string text;
};

/// One planner command after regex parsing: group id, addressed agents,
/// optional object and location, skill verb.
struct StructuredCommand {
    int group = 0;
    std::vector<std::pair<std::string, int>> agents;
    std::optional<std::pair<std::string, int>> object;
    std::optional<std::string> location_name;
    std::optional<Pose2D> location_pose;
    SkillVerb verb = SkillVerb::wait;

    bool operator==(const StructuredCommand& o) const;
};

enum class VerifyStage { capability, selection, parsing, judge, execution };
enum class FailureCategory {
    improper_grouping,
    incorrect_agent_selection,
    state_inconsistency
};

const char* to_string(VerifyStage s);
const char* to_string(FailureCategory c);

struct FailureFeedback {
    RawCommand command;
    VerifyStage stage = VerifyStage::parsing;
    FailureCategory category = FailureCategory::state_inconsistency;
    std::string diagnostic;
};

struct VerificationResult {
    RawCommand raw;
    std::optional<StructuredCommand> command;     // parsing output
    double capability_score = 0.0;                // S1
    std::vector<SkillInvocation> invocations;     // S2 selection, P structure
    bool judge_pass = false;                      // J
    bool accepted = false;
    bool deferred = false;
    std::optional<std::string> rejection_reason;
    std::optional<FailureFeedback> feedback;
    int attempts = 1;
};

/// Everything verification is allowed to read. No world handle: verify works
/// from the subgroup's observations plus static scene knowledge.
struct VerifyContext {
    std::vector<AgentState> agents;
    std::vector<Observation> observations;
    std::vector<Obstacle> known_obstacles;  // walls and blockers from the scene brief
    const SceneConfig* scene = nullptr;
    VerifyConfig cfg;
    // Backend-mode capability confidence; unset means rule-mode 0/1 scoring.
    std::function<double(const StructuredCommand&)> capability_scorer;
};

struct ParseResult {
    std::optional<StructuredCommand> command;
    std::string error;  // names the missing or malformed field
};

ParseResult parse_command(const RawCommand& raw);
std::string render(const StructuredCommand& cmd);

struct StageResult {
    bool pass = false;
    double score = 0.0;
    std::string diagnostic;
    std::optional<FailureCategory> category;
};

StageResult verify_capability(const StructuredCommand& cmd,
                              const std::vector<AgentState>& agents,
                              double tau_c,
                              const std::function<double(const StructuredCommand&)>&
                                  scorer = nullptr);

struct SelectionResult {
    bool pass = false;
    std::vector<SkillInvocation> invocations;
    std::string diagnostic;
};

SelectionResult select_action(const StructuredCommand& cmd, const VerifyContext& ctx);

StageResult judge(const StructuredCommand& cmd,
                  const std::vector<SkillInvocation>& invocations,
                  const VerifyContext& ctx);

VerificationResult verify(const RawCommand& raw, const VerifyContext& ctx);

/// Re-verify deferred commands against fresh observations; drop entries that
/// have exhausted the retry budget.
std::vector<VerificationResult> reconsider_deferred(
    const std::vector<VerificationResult>& pending, const VerifyContext& new_ctx);

}  // namespace mrc
