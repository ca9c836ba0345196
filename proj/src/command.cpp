#include "mrc/command.hpp"

#include <algorithm>
#include <cstdio>
#include <regex>
#include <set>
#include <sstream>

namespace mrc {

const char* to_string(VerifyStage s) {
    switch (s) {
        case VerifyStage::capability: return "capability";
        case VerifyStage::selection: return "selection";
        case VerifyStage::parsing: return "parsing";
        case VerifyStage::judge: return "judge";
        case VerifyStage::execution: return "execution";
    }
    return "?";
}

const char* to_string(FailureCategory c) {
    switch (c) {
        case FailureCategory::improper_grouping: return "improper_grouping";
        case FailureCategory::incorrect_agent_selection:
            return "incorrect_agent_selection";
        case FailureCategory::state_inconsistency: return "state_inconsistency";
    }
    return "?";
}

bool StructuredCommand::operator==(const StructuredCommand& o) const {
    return group == o.group && agents == o.agents && object == o.object &&
           location_name == o.location_name && location_pose == o.location_pose &&
           verb == o.verb;
}

ParseResult parse_command(const RawCommand& raw) {
    static const std::regex group_re(R"(^\s*group\s+(-?\d+)\s*:\s*(.*?)\s*$)",
                                     std::regex::icase);
    static const std::regex agents_re(
        R"(^agent\s+([A-Za-z_]\w*\s*\(\s*\d+\s*\)(?:\s*,\s*[A-Za-z_]\w*\s*\(\s*\d+\s*\))*)\s*(.*)$)",
        std::regex::icase);
    static const std::regex one_agent_re(R"(([A-Za-z_]\w*)\s*\(\s*(\d+)\s*\))");
    static const std::regex verb_re(R"(^\[\s*(\w+)\s*\]\s*(.*)$)");
    static const std::regex object_re(
        R"(^([A-Za-z_]\w*)\s*\(\s*(\d+)\s*\)\s*(.*)$)");
    static const std::regex loc_re(
        R"(^(?:to|on|at)\s+(?:([A-Za-z_]\w*)|\(\s*(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\s*,\s*(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\s*\))\s*$)",
        std::regex::icase);

    std::smatch m;
    if (!std::regex_match(raw.text, m, group_re)) {
        return {std::nullopt, "missing group field"};
    }
    StructuredCommand cmd;
    cmd.group = std::stoi(m[1].str());
    std::string rest = m[2].str();

    if (!std::regex_match(rest, m, agents_re)) {
        return {std::nullopt, "missing agent field"};
    }
    const std::string agent_list = m[1].str();
    rest = m[2].str();
    for (auto it = std::sregex_iterator(agent_list.begin(), agent_list.end(),
                                        one_agent_re);
         it != std::sregex_iterator(); ++it) {
        cmd.agents.emplace_back((*it)[1].str(), std::stoi((*it)[2].str()));
    }
    std::set<int> ids;
    for (const auto& [name, id] : cmd.agents) {
        if (!ids.insert(id).second) {
            return {std::nullopt, "duplicate agent id in command"};
        }
    }

    if (!std::regex_match(rest, m, verb_re)) {
        return {std::nullopt, "missing verb field"};
    }
    auto verb = verb_from_string(m[1].str());
    if (!verb) return {std::nullopt, "unknown verb: " + m[1].str()};
    cmd.verb = *verb;
    rest = m[2].str();

    if (std::regex_match(rest, m, object_re)) {
        cmd.object = {m[1].str(), std::stoi(m[2].str())};
        rest = m[3].str();
    }
    if (!rest.empty()) {
        if (!std::regex_match(rest, m, loc_re)) {
            return {std::nullopt, "malformed location field: " + rest};
        }
        if (m[1].matched) {
            cmd.location_name = m[1].str();
        } else {
            cmd.location_pose = Pose2D(std::stod(m[2].str()), std::stod(m[3].str()));
        }
    }
    return {cmd, ""};
}

std::string render(const StructuredCommand& cmd) {
    std::ostringstream os;
    os << "group " << cmd.group << ": agent ";
    for (std::size_t i = 0; i < cmd.agents.size(); ++i) {
        if (i) os << ", ";
        os << cmd.agents[i].first << "(" << cmd.agents[i].second << ")";
    }
    os << " [" << to_string(cmd.verb) << "]";
    if (cmd.object) os << " " << cmd.object->first << "(" << cmd.object->second << ")";
    if (cmd.location_name) {
        os << " to " << *cmd.location_name;
    } else if (cmd.location_pose) {
        char buf[80];
        // Shortest representation that survives a parse round trip exactly.
        std::snprintf(buf, sizeof(buf), " to (%.17g, %.17g)", cmd.location_pose->x,
                      cmd.location_pose->y);
        os << buf;
    }
    return os.str();
}

StageResult verify_capability(
    const StructuredCommand& cmd, const std::vector<AgentState>& agents,
    double tau_c,
    const std::function<double(const StructuredCommand&)>& scorer) {
    StageResult r;
    for (const auto& [name, id] : cmd.agents) {
        const auto it = std::find_if(agents.begin(), agents.end(),
                                     [&](const AgentState& a) { return a.id == id; });
        if (it == agents.end()) {
            r.diagnostic = "unknown agent id " + std::to_string(id);
            r.category = FailureCategory::incorrect_agent_selection;
            return r;
        }
        if (it->name != name) {
            r.diagnostic = "agent name/id mismatch: " + name + "(" +
                           std::to_string(id) + ") is " + it->name;
            r.category = FailureCategory::incorrect_agent_selection;
            return r;
        }
    }
    if (scorer) {
        r.score = std::clamp(scorer(cmd), 0.0, 1.0);
    } else {
        r.score = 1.0;
        for (const auto& [name, id] : cmd.agents) {
            const auto it =
                std::find_if(agents.begin(), agents.end(),
                             [&](const AgentState& a) { return a.id == id; });
            if (!verb_allowed(it->kind, cmd.verb)) r.score = 0.0;
        }
    }
    r.pass = r.score >= tau_c;
    if (!r.pass) {
        r.diagnostic = std::string("capability confidence ") +
                       std::to_string(r.score) + " below threshold for verb [" +
                       to_string(cmd.verb) + "]";
        r.category = FailureCategory::incorrect_agent_selection;
    }
    return r;
}

SelectionResult select_action(const StructuredCommand& cmd, const VerifyContext& ctx) {
    SelectionResult r;
    std::optional<Pose2D> location = cmd.location_pose;
    if (cmd.location_name) {
        if (!ctx.scene) {
            r.diagnostic = "no scene to resolve location " + *cmd.location_name;
            return r;
        }
        try {
            location = ctx.scene->resolve_location(*cmd.location_name);
        } catch (const std::invalid_argument&) {
            r.diagnostic = "unknown location: " + *cmd.location_name;
            return r;
        }
    }
    for (const auto& [name, id] : cmd.agents) {
        const auto it = std::find_if(ctx.agents.begin(), ctx.agents.end(),
                                     [&](const AgentState& a) { return a.id == id; });
        if (it == ctx.agents.end()) {
            r.diagnostic = "unknown agent id " + std::to_string(id);
            return r;
        }
        if (!verb_allowed(it->kind, cmd.verb)) {
            r.diagnostic = std::string("skill [") + to_string(cmd.verb) +
                           "] not available for " + name;
            return r;
        }
        SkillInvocation inv;
        inv.agent = id;
        inv.verb = cmd.verb;
        if (cmd.verb != SkillVerb::wait) {
            if (cmd.object) inv.object = cmd.object->second;
            inv.location = location;
            inv.location_name = cmd.location_name;
        }
        r.invocations.push_back(std::move(inv));
    }
    r.pass = true;
    return r;
}

namespace {

bool verb_needs_object(SkillVerb v) {
    return v == SkillVerb::check || v == SkillVerb::pick || v == SkillVerb::push ||
           v == SkillVerb::carry;
}

bool verb_needs_location(SkillVerb v) {
    return v == SkillVerb::pick || v == SkillVerb::move || v == SkillVerb::push ||
           v == SkillVerb::walk || v == SkillVerb::carry;
}

}  // namespace

StageResult judge(const StructuredCommand& cmd,
                  const std::vector<SkillInvocation>& invocations,
                  const VerifyContext& ctx) {
    StageResult r;
    r.category = FailureCategory::state_inconsistency;

    for (const auto& inv : invocations) {
        if (verb_needs_object(inv.verb) && !inv.object) {
            r.diagnostic = std::string("format: verb [") + to_string(inv.verb) +
                           "] requires an object";
            return r;
        }
        if (verb_needs_location(inv.verb) && !inv.location) {
            r.diagnostic = std::string("format: verb [") + to_string(inv.verb) +
                           "] requires a location";
            return r;
        }
    }

    auto observed_component = [&](int id) -> const VisibleComponent* {
        for (const auto& obs : ctx.observations) {
            for (const auto& c : obs.visible_components) {
                if (c.id == id) return &c;
            }
        }
        return nullptr;
    };
    auto known_blocker = [&](int id) -> const Obstacle* {
        for (const auto& o : ctx.known_obstacles) {
            if (o.id == id && o.kind == ObstacleKind::blocker) return &o;
        }
        return nullptr;
    };

    for (const auto& inv : invocations) {
        if (!inv.object) continue;
        if (!observed_component(*inv.object) && !known_blocker(*inv.object)) {
            r.diagnostic = "semantics: object " + std::to_string(*inv.object) +
                           " not present in the subgroup's observations";
            return r;
        }
    }

    for (const auto& inv : invocations) {
        const auto it = std::find_if(ctx.agents.begin(), ctx.agents.end(),
                                     [&](const AgentState& a) { return a.id == inv.agent; });
        if (it == ctx.agents.end()) continue;
        if (inv.verb == SkillVerb::pick) {
            const VisibleComponent* c = observed_component(*inv.object);
            if (c && distance(c->pose, it->pose) > it->reach) {
                r.diagnostic = "feasibility: object " + std::to_string(*inv.object) +
                               " is outside the arm's reach";
                r.category = FailureCategory::incorrect_agent_selection;
                return r;
            }
            if (inv.location && distance(*inv.location, it->pose) > it->reach) {
                r.diagnostic = "feasibility: target location is outside the arm's reach";
                r.category = FailureCategory::incorrect_agent_selection;
                return r;
            }
        }
        if (inv.location && ctx.scene &&
            !ctx.scene->bounds.contains(inv.location->x, inv.location->y)) {
            r.diagnostic = "feasibility: target location is outside the workspace";
            return r;
        }
    }

    for (std::size_t i = 0; i < invocations.size(); ++i) {
        for (std::size_t j = i + 1; j < invocations.size(); ++j) {
            if (invocations[i].object && invocations[j].object &&
                *invocations[i].object == *invocations[j].object) {
                r.diagnostic = "safety: two invocations in the batch name object " +
                               std::to_string(*invocations[i].object);
                return r;
            }
        }
    }

    r.pass = true;
    r.category.reset();
    (void)cmd;
    return r;
}

VerificationResult verify(const RawCommand& raw, const VerifyContext& ctx) {
    VerificationResult result;
    result.raw = raw;

    auto reject = [&](VerifyStage stage, FailureCategory category,
                      const std::string& diag) {
        result.rejection_reason = diag;
        result.feedback = FailureFeedback{raw, stage, category, diag};
    };

    ParseResult parsed = parse_command(raw);
    if (!parsed.command) {
        reject(VerifyStage::parsing, FailureCategory::state_inconsistency,
               parsed.error);
        return result;
    }
    result.command = parsed.command;

    StageResult cap = verify_capability(*parsed.command, ctx.agents,
                                        ctx.cfg.capability_threshold,
                                        ctx.capability_scorer);
    result.capability_score = cap.score;
    if (!cap.pass) {
        // Backend-mode low-but-nonzero confidence defers rather than rejects.
        if (ctx.capability_scorer && cap.score > 0.0) result.deferred = true;
        reject(VerifyStage::capability,
               cap.category.value_or(FailureCategory::incorrect_agent_selection),
               cap.diagnostic);
        return result;
    }

    SelectionResult sel = select_action(*parsed.command, ctx);
    if (!sel.pass) {
        reject(VerifyStage::selection, FailureCategory::incorrect_agent_selection,
               sel.diagnostic);
        return result;
    }
    result.invocations = sel.invocations;

    StageResult verdict = judge(*parsed.command, sel.invocations, ctx);
    result.judge_pass = verdict.pass;
    if (!verdict.pass) {
        reject(VerifyStage::judge,
               verdict.category.value_or(FailureCategory::state_inconsistency),
               verdict.diagnostic);
        return result;
    }

    result.accepted = true;
    return result;
}

std::vector<VerificationResult> reconsider_deferred(
    const std::vector<VerificationResult>& pending, const VerifyContext& new_ctx) {
    std::vector<VerificationResult> out;
    for (const auto& entry : pending) {
        if (!entry.deferred) {
            out.push_back(entry);
            continue;
        }
        VerificationResult r = verify(entry.raw, new_ctx);
        r.attempts = entry.attempts + 1;
        if (!r.accepted && r.attempts >= new_ctx.cfg.deferred_retry_budget) {
            r.deferred = false;  // dropped; feedback already carries the reason
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace mrc
