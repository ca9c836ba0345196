#include "mrc/types.hpp"

#include <algorithm>

namespace mrc {

const char* to_string(AgentKind k) {
    switch (k) {
        case AgentKind::arm: return "arm";
        case AgentKind::agv: return "agv";
        case AgentKind::humanoid: return "humanoid";
    }
    return "?";
}

const char* to_string(ObstacleKind k) {
    return k == ObstacleKind::wall ? "wall" : "blocker";
}

const char* to_string(SkillVerb v) {
    switch (v) {
        case SkillVerb::check: return "check";
        case SkillVerb::pick: return "pick";
        case SkillVerb::move: return "move";
        case SkillVerb::push: return "push";
        case SkillVerb::walk: return "walk";
        case SkillVerb::carry: return "carry";
        case SkillVerb::wait: return "wait";
    }
    return "?";
}

const char* to_string(FailureReason r) {
    switch (r) {
        case FailureReason::infeasible: return "infeasible";
        case FailureReason::conflict: return "conflict";
        case FailureReason::stochastic: return "stochastic";
        case FailureReason::unreachable: return "unreachable";
    }
    return "?";
}

std::optional<SkillVerb> verb_from_string(const std::string& s) {
    std::string lower = s;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "check") return SkillVerb::check;
    if (lower == "pick") return SkillVerb::pick;
    if (lower == "move") return SkillVerb::move;
    if (lower == "push") return SkillVerb::push;
    if (lower == "walk") return SkillVerb::walk;
    if (lower == "carry") return SkillVerb::carry;
    if (lower == "wait") return SkillVerb::wait;
    return std::nullopt;
}

bool verb_allowed(AgentKind kind, SkillVerb verb) {
    if (verb == SkillVerb::wait) return true;
    switch (kind) {
        case AgentKind::arm:
            return verb == SkillVerb::check || verb == SkillVerb::pick;
        case AgentKind::agv:
            return verb == SkillVerb::move || verb == SkillVerb::push;
        case AgentKind::humanoid:
            return verb == SkillVerb::walk || verb == SkillVerb::carry;
    }
    return false;
}

const AgentState* WorldState::find_agent(AgentId id) const {
    for (const auto& a : agents)
        if (a.id == id) return &a;
    return nullptr;
}

AgentState* WorldState::find_agent(AgentId id) {
    for (auto& a : agents)
        if (a.id == id) return &a;
    return nullptr;
}

const AgentState* WorldState::find_agent(const std::string& name) const {
    for (const auto& a : agents)
        if (a.name == name) return &a;
    return nullptr;
}

const ComponentState* WorldState::find_component(ComponentId id) const {
    for (const auto& c : components)
        if (c.id == id) return &c;
    return nullptr;
}

ComponentState* WorldState::find_component(ComponentId id) {
    for (auto& c : components)
        if (c.id == id) return &c;
    return nullptr;
}

const ComponentState* WorldState::find_component(const std::string& name) const {
    for (const auto& c : components)
        if (c.name == name) return &c;
    return nullptr;
}

const Obstacle* WorldState::find_obstacle(ObstacleId id) const {
    for (const auto& o : obstacles)
        if (o.id == id) return &o;
    return nullptr;
}

const Obstacle* WorldState::find_obstacle(const std::string& name) const {
    for (const auto& o : obstacles)
        if (o.name == name) return &o;
    return nullptr;
}

}  // namespace mrc
