#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mrc/geometry.hpp"

namespace mrc {

using AgentId = int;
using ComponentId = int;
using ObstacleId = int;

enum class AgentKind { arm, agv, humanoid };

enum class ObstacleKind { wall, blocker };

enum class SkillVerb { check, pick, move, push, walk, carry, wait };

const char* to_string(AgentKind k);
const char* to_string(ObstacleKind k);
const char* to_string(SkillVerb v);
std::optional<SkillVerb> verb_from_string(const std::string& s);

/// Skill vocabulary per robot type.
bool verb_allowed(AgentKind kind, SkillVerb verb);

struct Obstacle {
    ObstacleId id = 0;
    std::string name;
    Pose2D center;
    double half_x = 0.0;
    double half_y = 0.0;
    ObstacleKind kind = ObstacleKind::wall;

    Rect footprint() const { return Rect{center.x, center.y, half_x, half_y}; }
};

struct ComponentState {
    ComponentId id = 0;
    std::string name;
    Pose2D pose;
    bool attached = false;
    std::optional<AgentId> carrier;
};

struct AgentState {
    AgentId id = 0;
    std::string name;
    AgentKind kind = AgentKind::agv;
    Pose2D pose;
    std::optional<ComponentId> holding;
    bool busy = false;
    double reach = 0.0;  // arm only
};

struct WorldState {
    std::vector<AgentState> agents;
    std::vector<ComponentState> components;
    std::vector<Obstacle> obstacles;
    int step = 0;
    std::uint64_t rng_seed = 0;

    const AgentState* find_agent(AgentId id) const;
    AgentState* find_agent(AgentId id);
    const AgentState* find_agent(const std::string& name) const;
    const ComponentState* find_component(ComponentId id) const;
    ComponentState* find_component(ComponentId id);
    const ComponentState* find_component(const std::string& name) const;
    const Obstacle* find_obstacle(ObstacleId id) const;
    const Obstacle* find_obstacle(const std::string& name) const;
};

struct VisibleAgent {
    AgentId id = 0;
    Pose2D pose;
};

struct VisibleComponent {
    ComponentId id = 0;
    Pose2D pose;
    bool attached = false;
};

struct Observation {
    AgentId observer = 0;
    std::vector<VisibleAgent> visible_agents;
    std::vector<VisibleComponent> visible_components;
    AgentState self_state;
};

enum class ConflictKind { same_object, path_overlap };

struct ConflictReport {
    AgentId agent_a = 0;
    AgentId agent_b = 0;
    ConflictKind kind = ConflictKind::same_object;
    std::string detail;
};

struct EnvFeedback {
    int step = 0;
    std::vector<Observation> state_updates;  // one per agent
    std::vector<ConflictReport> conflicts;
};

/// A skill request bound to one agent, as produced by command verification.
struct SkillInvocation {
    AgentId agent = 0;
    SkillVerb verb = SkillVerb::wait;
    std::optional<int> object;               // component or blocker id
    std::optional<Pose2D> location;          // resolved target position
    std::optional<std::string> location_name;
};

enum class FailureReason { infeasible, conflict, stochastic, unreachable };

const char* to_string(FailureReason r);

struct SkillOutcome {
    bool success = false;
    Pose2D new_agent_pose;
    std::optional<std::pair<int, Pose2D>> moved_object;  // component or blocker
    std::optional<FailureReason> failure_reason;
    std::string diagnostic;
    std::vector<Pose2D> trajectory;  // swept agent path, for conflict checks
    bool attached = false;           // magnetic attachment fired
    bool is_wait = false;
};

}  // namespace mrc
