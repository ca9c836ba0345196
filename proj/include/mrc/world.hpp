#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mrc/config.hpp"
#include "mrc/skills.hpp"
#include "mrc/types.hpp"

#include "json.hpp"

namespace mrc {

enum class Difficulty { easy, hard };

const char* to_string(Difficulty d);

/// Per-agent record of what happened to its skill inside one step.
struct SkillRecord {
    AgentId agent = 0;
    SkillVerb verb = SkillVerb::wait;
    bool success = false;
    std::optional<FailureReason> failure_reason;
    std::string diagnostic;
};

struct StepResult {
    EnvFeedback feedback;
    std::vector<SkillRecord> records;
};

/// The planar kinematic world: synchronous step semantics, partial
/// observability, conflict detection.
class World {
public:
    World(SceneConfig scene, SkillConfig skills, WorldState state);

    static World init_scene(std::uint64_t seed, Difficulty difficulty,
                            SceneConfig scene = SceneConfig::defaults(),
                            SkillConfig skills = SkillConfig::defaults());

    const WorldState& state() const { return state_; }
    const SceneConfig& scene() const { return scene_; }
    const SkillConfig& skills() const { return skills_; }

    /// Throws std::invalid_argument("no such agent") for unknown ids.
    Observation observe(AgentId agent) const;
    std::vector<Observation> observe_all() const;

    /// One synchronous round. Agents absent from `actions` wait.
    StepResult step(const std::map<AgentId, SkillInvocation>& actions);

    bool check_assembly_complete() const;

    /// A component is blocked while a blocker sits within blocking_radius.
    bool component_blocked(const ComponentState& c) const;

    nlohmann::json state_to_json() const;
    static WorldState state_from_json(const nlohmann::json& j);

private:
    SkillOutcome execute_skill(const SkillInvocation& inv, Rng& rng) const;
    SkillOutcome agv_move(const AgentState& agent, const Pose2D& target, Rng& rng) const;
    SkillOutcome agv_push(const AgentState& agent, const ComponentState& object,
                          const Pose2D& target, Rng& rng) const;

    SceneConfig scene_;
    SkillConfig skills_;
    WorldState state_;
    std::unique_ptr<FailureLayer> failures_;
};

/// Walls and, on hard difficulty, the corner blockers. Shared by scene
/// initialization and by planners that know the static layout a priori.
std::vector<Obstacle> static_obstacles(const SceneConfig& scene,
                                       Difficulty difficulty);

/// True when the two swept trajectories approach within `threshold` at some
/// matched path fraction, closer than they are at either endpoint pair.
/// Departing from or arriving next to a peer is not an overlap.
bool paths_overlap(const std::vector<Pose2D>& a, const std::vector<Pose2D>& b,
                   double threshold);

nlohmann::json to_json(const Pose2D& p);
Pose2D pose_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Observation& o);
nlohmann::json to_json(const EnvFeedback& f);
nlohmann::json to_json(const ConflictReport& c);

}  // namespace mrc
