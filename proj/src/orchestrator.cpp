#include "mrc/orchestrator.hpp"

#include <algorithm>
#include <regex>
#include <set>
#include <sstream>

namespace mrc {

// ------------------------------------------------------------ proposal text

ProposalParse parse_proposal(const std::string& text) {
    static const std::vector<std::string> headers = {
        "Situation Analysis", "Spatial Analysis",   "Task Decomposition",
        "Grouping Strategy",  "Subgoal Assignment", "Coordination Strategy",
        "Risk Assessment"};

    Proposal p;
    std::vector<std::string*> slots = {
        &p.situation_analysis, &p.spatial_analysis,    &p.task_decomposition,
        &p.grouping_strategy,  &p.subgoal_assignment,  &p.coordination_strategy,
        &p.risk_assessment};

    for (std::size_t i = 0; i < headers.size(); ++i) {
        const std::string label = headers[i] + ":";
        const auto pos = text.find(label);
        if (pos == std::string::npos) {
            return {std::nullopt, "missing section: " + headers[i]};
        }
        std::size_t end = text.size();
        const std::string next_label =
            i + 1 < headers.size() ? headers[i + 1] + ":" : "Assignments:";
        const auto next = text.find(next_label, pos);
        if (next != std::string::npos) end = next;
        std::string body = text.substr(pos + label.size(), end - pos - label.size());
        while (!body.empty() && (body.back() == '\n' || body.back() == ' ')) {
            body.pop_back();
        }
        while (!body.empty() && (body.front() == '\n' || body.front() == ' ')) {
            body.erase(body.begin());
        }
        if (body.empty()) return {std::nullopt, "empty section: " + headers[i]};
        *slots[i] = body;
    }

    const auto apos = text.find("Assignments:");
    if (apos == std::string::npos) {
        return {std::nullopt, "missing Assignments block"};
    }
    static const std::regex line_re(
        R"(^\s*-\s*group\s+(\d+)\s*:\s*agents\s+(.*?)\s*;\s*subtask\s*:\s*(.*?)\s*$)");
    static const std::regex member_re(R"(([A-Za-z_]\w*)\s*\(\s*(\d+)\s*\))");

    std::istringstream lines(text.substr(apos));
    std::string line;
    std::getline(lines, line);  // the "Assignments:" line itself
    std::set<int> seen_agents;
    while (std::getline(lines, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::smatch m;
        if (!std::regex_match(line, m, line_re)) {
            return {std::nullopt, "malformed assignment line: " + line};
        }
        SubgroupAssignment a;
        a.gid = std::stoi(m[1].str());
        a.subtask = m[3].str();
        const std::string members = m[2].str();
        for (auto it = std::sregex_iterator(members.begin(), members.end(),
                                            member_re);
             it != std::sregex_iterator(); ++it) {
            const int id = std::stoi((*it)[2].str());
            if (!seen_agents.insert(id).second) {
                return {std::nullopt,
                        "agent " + std::to_string(id) + " assigned twice"};
            }
            a.members.emplace_back((*it)[1].str(), id);
        }
        if (a.members.empty()) {
            return {std::nullopt, "assignment with no members: " + line};
        }
        p.assignments.push_back(std::move(a));
    }
    if (p.assignments.empty()) return {std::nullopt, "no assignments"};
    return {p, ""};
}

// ----------------------------------------------------------------- tasks

TaskBrief TaskSpec::brief() const {
    TaskBrief b;
    b.task_id = id;
    b.name = name;
    b.difficulty = difficulty;
    b.gt_steps = gt_steps;
    b.blocked_anchors = blocked_anchors;
    return b;
}

std::vector<TaskSpec> TaskSpec::default_tasks() {
    std::vector<TaskSpec> tasks(4);
    tasks[0] = {1, "Task1", Difficulty::easy, 11, 7, {}};
    tasks[1] = {2, "Task2", Difficulty::easy, 22, 7, {}};
    tasks[2] = {3, "Task3", Difficulty::hard, 33, 9, {"nw", "sw", "se"}};
    tasks[3] = {4, "Task4", Difficulty::hard, 44, 9, {"ne", "sw", "se"}};
    return tasks;
}

// ------------------------------------------------------------- text builders

namespace {

std::string observations_text(const EnvFeedback& env) {
    std::ostringstream os;
    for (const auto& obs : env.state_updates) {
        os << "agent " << obs.self_state.name << "(" << obs.self_state.id
           << ") at (" << obs.self_state.pose.x << ", " << obs.self_state.pose.y
           << ") sees:";
        if (obs.visible_agents.empty() && obs.visible_components.empty()) {
            os << " nothing";
        }
        for (const auto& a : obs.visible_agents) {
            os << " agent#" << a.id << "@(" << a.pose.x << "," << a.pose.y << ")";
        }
        for (const auto& c : obs.visible_components) {
            os << " component#" << c.id << "@(" << c.pose.x << "," << c.pose.y
               << ")" << (c.attached ? "[attached]" : "");
        }
        os << "\n";
    }
    for (const auto& c : env.conflicts) {
        os << c.detail << "\n";
    }
    return os.str();
}

std::string observations_text(const std::vector<Observation>& observations) {
    EnvFeedback env;
    env.state_updates = observations;
    return observations_text(env);
}

std::string capabilities_text(const std::vector<AgentState>& agents) {
    std::ostringstream os;
    for (const auto& a : agents) {
        os << a.name << "(" << a.id << "): " << to_string(a.kind);
        if (a.kind == AgentKind::arm) os << ", reach " << a.reach << " m";
        os << "\n";
    }
    return os.str();
}

std::string skills_text() {
    return "arm: [check] [pick] [wait]\n"
           "agv: [move] [push] [wait]\n"
           "humanoid: [walk] [carry] [wait]\n";
}

std::string history_text(const std::vector<DialogueTurn>& turns) {
    if (turns.empty()) return "(none)";
    std::ostringstream os;
    for (const auto& t : turns) {
        os << "[cycle " << t.cycle << ", " << to_string(t.speaker) << " "
           << t.speaker_id << "] " << t.content << "\n";
    }
    return os.str();
}

std::string task_text(const TaskBrief& task) {
    std::ostringstream os;
    os << task.name << " (" << to_string(task.difficulty)
       << "): assemble the trunk and four wheels at the arm's sockets.";
    if (!task.blocked_anchors.empty()) {
        os << " Blocked corridors:";
        for (const auto& a : task.blocked_anchors) os << " " << a;
        os << ".";
    }
    return os.str();
}

}  // namespace

// --------------------------------------------------------------- executor

ExecutorDecision executor_decide(const StructuredCommand& cmd,
                                 const SkillInvocation& invocation,
                                 const AgentState& agent, const Observation& obs,
                                 Backend& backend, const OrchestratorConfig& cfg,
                                 int cycle) {
    ExecutorDecision d;
    d.agent = agent.id;
    d.command = cmd;
    d.feedback.agent = agent.id;
    d.feedback.cycle = cycle;

    if (!verb_allowed(agent.kind, invocation.verb)) {
        d.feedback.diagnostic =
            std::string("incorrect agent selection: skill [") +
            to_string(invocation.verb) + "] is not available to " + agent.name;
        return d;
    }
    if (invocation.verb == SkillVerb::pick && agent.holding.has_value()) {
        d.feedback.diagnostic =
            "state inconsistency: gripper already holding component " +
            std::to_string(*agent.holding);
        return d;
    }

    BackendRequest req;
    req.role = BackendRole::executor;
    req.cycle = cycle;
    req.key = std::to_string(cycle) + "/executor/" + std::to_string(agent.id);
    req.context = {{"cycle", cycle},
                   {"agent", agent.id},
                   {"command", render(cmd)}};
    req.rendered_prompt = render_prompt(
        cfg.executor_template,
        {{"agent_name", agent.name},
         {"agent_id", std::to_string(agent.id)},
         {"action", render(cmd)},
         {"observations", observations_text(std::vector<Observation>{obs})}});
    const BackendResponse resp = backend.respond(req);
    if (resp.text.rfind("idle", 0) == 0) {
        d.feedback.diagnostic = resp.text.size() > 6 ? resp.text.substr(6)
                                                     : "declined by executor";
        return d;
    }

    d.execute = true;
    d.feedback.success = true;
    d.feedback.diagnostic = "executing";
    return d;
}

// ------------------------------------------------------------- orchestrator

Orchestrator::Orchestrator(World& world, ContextMemory& memory, Backend& backend,
                           OrchestratorConfig cfg, const TaskBrief& task)
    : world_(world), memory_(memory), backend_(backend), cfg_(std::move(cfg)),
      task_(task) {}

nlohmann::json Orchestrator::planner_context_json(int cycle,
                                                  const PlannerContext& ctx) const {
    nlohmann::json agents = nlohmann::json::array();
    for (const auto& a : world_.state().agents) {
        nlohmann::json ja{{"id", a.id}, {"name", a.name},
                          {"kind", to_string(a.kind)}};
        if (a.kind == AgentKind::arm) ja["reach"] = a.reach;
        agents.push_back(std::move(ja));
    }
    nlohmann::json components = nlohmann::json::array();
    for (const auto& c : world_.state().components) {
        components.push_back({{"id", c.id}, {"name", c.name}});
    }
    nlohmann::json feedback = nlohmann::json::array();
    for (const auto& f : ctx.recent_agent_feedback) feedback.push_back(to_json(f));
    nlohmann::json locations;
    for (const auto& [name, pose] : world_.scene().named_locations) {
        locations[name] = {pose.x, pose.y};
    }
    return nlohmann::json{
        {"cycle", cycle},
        {"task",
         {{"task_id", task_.task_id},
          {"name", task_.name},
          {"difficulty", to_string(task_.difficulty)},
          {"gt_steps", task_.gt_steps},
          {"blocked_anchors", task_.blocked_anchors}}},
        {"agents", agents},
        {"components", components},
        {"observations", to_json(ctx.latest_env)},
        {"agent_feedback", feedback},
        {"ablations",
         {{"no_history", cfg_.ablations.no_history},
          {"no_feedback", cfg_.ablations.no_feedback},
          {"no_grouping", cfg_.ablations.no_grouping}}},
        {"locations", locations}};
}

std::map<std::string, std::string> Orchestrator::planner_values(
    const PlannerContext& ctx) const {
    std::string obs = observations_text(ctx.latest_env);
    if (!ctx.recent_agent_feedback.empty()) {
        std::ostringstream os;
        os << obs;
        for (const auto& f : ctx.recent_agent_feedback) {
            os << "feedback agent#" << f.agent << ": "
               << (f.success ? "ok" : "failed") << " (" << f.diagnostic << ")\n";
        }
        obs = os.str();
    }
    return {{"task", task_text(task_)},
            {"capabilities", capabilities_text(world_.state().agents)},
            {"skills", skills_text()},
            {"observations", obs},
            {"history", history_text(ctx.recent_turns)}};
}

Proposal Orchestrator::plan(int cycle, CycleRecord& record) {
    const PlannerContext ctx = memory_.context_for_planner();

    BackendRequest req;
    req.role = BackendRole::general_planner;
    req.cycle = cycle;
    req.context = planner_context_json(cycle, ctx);
    req.rendered_prompt = render_prompt(cfg_.planner_template, planner_values(ctx));

    Proposal proposal;
    bool parsed = false;
    for (int attempt = 0; attempt <= cfg_.max_proposal_retries; ++attempt) {
        req.key = std::to_string(cycle) + "/general_planner/" +
                  std::to_string(attempt);
        const BackendResponse resp = backend_.respond(req);
        ProposalParse pp = parse_proposal(resp.text);
        if (pp.proposal) {
            proposal = std::move(*pp.proposal);
            record.proposal_text = resp.text;
            parsed = true;
            break;
        }
        record.proposal_text = resp.text;
    }
    if (!parsed || cfg_.ablations.no_grouping) {
        SubgroupAssignment all;
        all.gid = 1;
        all.subtask = "complete the assembly";
        for (const auto& a : world_.state().agents) {
            all.members.emplace_back(a.name, a.id);
        }
        if (!parsed) {
            proposal = Proposal{"fallback", "fallback", "fallback", "fallback",
                                "fallback", "fallback", "fallback", {}};
        }
        proposal.assignments = {all};
    }
    return proposal;
}

CycleRecord Orchestrator::run_cycle(int cycle) {
    CycleRecord record;
    record.cycle = cycle;
    record.proposal = plan(cycle, record);

    memory_.record(DialogueTurn{cycle, Speaker::general_planner, 0,
                                record.proposal_text});
    std::map<int, std::vector<AgentId>> groups;
    for (const auto& a : record.proposal.assignments) {
        for (const auto& [name, id] : a.members) groups[a.gid].push_back(id);
    }
    memory_.set_assignments(cycle, groups);

    std::map<AgentId, SkillInvocation> actions;
    auto try_schedule = [&](const ExecutorDecision& d,
                            const SkillInvocation& inv) {
        ExecutorDecision out = d;
        if (out.execute) {
            if (actions.count(d.agent)) {
                out.execute = false;
                out.feedback.success = false;
                out.feedback.diagnostic =
                    "state inconsistency: agent already commanded this cycle";
            } else {
                actions[d.agent] = inv;
            }
        }
        record.decisions.push_back(out);
        if (!out.execute) memory_.record(out.feedback);
    };

    // Deferred commands from earlier cycles get one more look with fresh
    // observations before this cycle's planning output is executed.
    if (!deferred_.empty()) {
        VerifyContext vctx;
        vctx.agents = world_.state().agents;
        vctx.observations = memory_.env_feedback().back().state_updates;
        vctx.known_obstacles = world_.state().obstacles;
        vctx.scene = &world_.scene();
        vctx.cfg = cfg_.verify;
        std::vector<VerificationResult> next;
        for (auto& r : reconsider_deferred(deferred_, vctx)) {
            if (r.accepted && r.command) {
                for (const auto& inv : r.invocations) {
                    const AgentState* agent = world_.state().find_agent(inv.agent);
                    if (!agent) continue;
                    Observation obs;
                    for (const auto& o : vctx.observations) {
                        if (o.observer == inv.agent) obs = o;
                    }
                    try_schedule(executor_decide(*r.command, inv, *agent, obs,
                                                 backend_, cfg_, cycle),
                                 inv);
                }
            } else if (r.deferred) {
                next.push_back(std::move(r));
            } else if (r.feedback) {
                record.verification_failures.push_back(*r.feedback);
            }
        }
        deferred_ = std::move(next);
    }

    for (const auto& assignment : record.proposal.assignments) {
        SubgroupContext sctx = memory_.context_for_subgroup(assignment.gid);

        std::vector<AgentState> member_states;
        nlohmann::json members = nlohmann::json::array();
        for (const auto& [name, id] : assignment.members) {
            if (const AgentState* a = world_.state().find_agent(id)) {
                member_states.push_back(*a);
                members.push_back({{"id", a->id},
                                   {"name", a->name},
                                   {"kind", to_string(a->kind)}});
            }
        }

        BackendRequest req;
        req.role = BackendRole::subgroup_manager;
        req.cycle = cycle;
        req.key = std::to_string(cycle) + "/subgroup_manager/" +
                  std::to_string(assignment.gid);
        nlohmann::json obs_json = nlohmann::json::array();
        for (const auto& o : sctx.observations) obs_json.push_back(to_json(o));
        nlohmann::json history = nlohmann::json::array();
        for (const auto& t : sctx.recent_turns) history.push_back(to_json(t));
        req.context = {{"cycle", cycle},
                       {"gid", assignment.gid},
                       {"subtask", assignment.subtask},
                       {"members", members},
                       {"observations", obs_json},
                       {"history", history}};
        req.rendered_prompt = render_prompt(
            cfg_.manager_template,
            {{"task", task_text(task_) + " Subgroup subtask: " +
                          assignment.subtask},
             {"capabilities", capabilities_text(member_states)},
             {"skills", skills_text()},
             {"observations", observations_text(sctx.observations)},
             {"history", history_text(sctx.recent_turns)}});
        BackendResponse resp;
        try {
            resp = backend_.respond(req);
        } catch (const BackendError& e) {
            memory_.record(DialogueTurn{cycle, Speaker::subgroup_manager,
                                        assignment.gid,
                                        std::string("manager failed: ") +
                                            e.what()});
            continue;  // members of this subgroup wait this cycle
        }
        memory_.record(DialogueTurn{cycle, Speaker::subgroup_manager,
                                    assignment.gid, resp.text});

        std::istringstream lines(resp.text);
        std::string line;
        while (std::getline(lines, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            RawCommand raw{line};
            record.subgroup_commands[assignment.gid].push_back(raw);

            VerifyContext vctx;
            vctx.agents = member_states;
            vctx.observations = sctx.observations;
            vctx.known_obstacles = world_.state().obstacles;
            vctx.scene = &world_.scene();
            vctx.cfg = cfg_.verify;
            VerificationResult vr = verify(raw, vctx);
            if (vr.deferred) {
                deferred_.push_back(vr);
                if (vr.feedback) {
                    record.verification_failures.push_back(*vr.feedback);
                }
                continue;
            }
            if (!vr.accepted) {
                if (vr.feedback) {
                    record.verification_failures.push_back(*vr.feedback);
                    AgentFeedback fb;
                    fb.agent = vr.command && !vr.command->agents.empty()
                                   ? vr.command->agents.front().second
                                   : 0;
                    fb.cycle = cycle;
                    fb.success = false;
                    fb.diagnostic = std::string(to_string(vr.feedback->category)) +
                                    ": " + vr.feedback->diagnostic;
                    if (fb.agent != 0) memory_.record(fb);
                }
                continue;
            }
            for (const auto& inv : vr.invocations) {
                const AgentState* agent = world_.state().find_agent(inv.agent);
                if (!agent) continue;
                Observation obs;
                obs.observer = inv.agent;
                for (const auto& o : sctx.observations) {
                    if (o.observer == inv.agent) obs = o;
                }
                try_schedule(executor_decide(*vr.command, inv, *agent, obs,
                                             backend_, cfg_, cycle),
                             inv);
            }
        }
    }

    StepResult step = world_.step(actions);
    record.env_feedback = step.feedback;
    record.skill_records = step.records;
    memory_.record(step.feedback);
    for (const auto& rec : step.records) {
        AgentFeedback fb{rec.agent, cycle, rec.success, rec.diagnostic};
        if (fb.diagnostic.empty()) {
            fb.diagnostic = rec.success ? "ok" : "failed";
        }
        memory_.record(fb);
        if (rec.verb != SkillVerb::wait) {
            std::ostringstream os;
            os << "agent " << rec.agent << " [" << to_string(rec.verb) << "] "
               << (rec.success ? "succeeded" : "failed: " + fb.diagnostic);
            memory_.record(DialogueTurn{cycle, Speaker::executor, rec.agent,
                                        os.str()});
        }
    }
    return record;
}

// ------------------------------------------------------------ serialization

nlohmann::json CycleRecord::to_json() const {
    nlohmann::json commands;
    for (const auto& [gid, list] : subgroup_commands) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& c : list) arr.push_back(c.text);
        commands[std::to_string(gid)] = arr;
    }
    nlohmann::json decisions_json = nlohmann::json::array();
    for (const auto& d : decisions) {
        decisions_json.push_back({{"agent", d.agent},
                                  {"command", render(d.command)},
                                  {"decision", d.execute ? "execute" : "idle"},
                                  {"diagnostic", d.feedback.diagnostic}});
    }
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : verification_failures) {
        failures.push_back({{"command", f.command.text},
                            {"stage", to_string(f.stage)},
                            {"category", to_string(f.category)},
                            {"diagnostic", f.diagnostic}});
    }
    nlohmann::json skills = nlohmann::json::array();
    for (const auto& r : skill_records) {
        skills.push_back({{"agent", r.agent},
                          {"verb", to_string(r.verb)},
                          {"success", r.success},
                          {"diagnostic", r.diagnostic}});
    }
    return nlohmann::json{{"cycle", cycle},
                          {"proposal", proposal_text},
                          {"subgroup_commands", commands},
                          {"decisions", decisions_json},
                          {"verification_failures", failures},
                          {"env_feedback", mrc::to_json(env_feedback)},
                          {"skills", skills}};
}

nlohmann::json CycleRecord::dynamics_line() const {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& a : proposal.assignments) {
        nlohmann::json members = nlohmann::json::array();
        for (const auto& [name, id] : a.members) members.push_back(id);
        groups.push_back(
            {{"gid", a.gid}, {"members", members}, {"subtask", a.subtask}});
    }
    return nlohmann::json{{"cycle", cycle}, {"groups", groups}};
}

nlohmann::json CycleRecord::execution_line() const {
    nlohmann::json skills = nlohmann::json::array();
    for (const auto& r : skill_records) {
        skills.push_back({{"agent", r.agent},
                          {"verb", to_string(r.verb)},
                          {"success", r.success}});
    }
    return nlohmann::json{{"cycle", cycle}, {"skills", skills}};
}

// ---------------------------------------------------------------- episode

EpisodeResult run_episode(const TaskSpec& task, Backend& backend,
                          std::uint64_t seed, const OrchestratorConfig& cfg,
                          int trial, const std::string& label) {
    SceneConfig scene = cfg.scene;
    scene.blocked_anchors = task.blocked_anchors;
    World world = World::init_scene(seed, task.difficulty, scene, cfg.skills);
    ContextMemory memory(cfg.ablations);
    RecordingBackend recorder(backend);
    recorder.begin_episode(task.brief(), seed);

    EnvFeedback initial;
    initial.step = 0;
    initial.state_updates = world.observe_all();
    memory.record(initial);

    Orchestrator orch(world, memory, recorder, cfg, task.brief());

    EpisodeResult result;
    result.task = task;
    result.trial = trial;
    result.label = label;

    const int budget = 2 * task.gt_steps;
    nlohmann::json cycles = nlohmann::json::array();
    nlohmann::json dynamics = nlohmann::json::array();
    nlohmann::json execution = nlohmann::json::array();
    for (int cycle = 1; cycle <= budget; ++cycle) {
        CycleRecord rec = orch.run_cycle(cycle);
        cycles.push_back(rec.to_json());
        dynamics.push_back(rec.dynamics_line());
        execution.push_back(rec.execution_line());
        if (world.check_assembly_complete()) {
            result.success = true;
            result.steps = cycle;
            break;
        }
    }
    if (!result.success) result.steps = budget + cfg.timeout_step_penalty;

    result.log = nlohmann::json{
        {"task",
         {{"id", task.id},
          {"name", task.name},
          {"difficulty", to_string(task.difficulty)},
          {"gt_steps", task.gt_steps},
          {"blocked_anchors", task.blocked_anchors}}},
        {"seed", seed},
        {"trial", trial},
        {"label", label},
        {"success", result.success},
        {"steps", result.steps},
        {"cycles", cycles},
        {"dynamics", dynamics},
        {"execution", execution},
        {"backend_io", recorder.log()},
        {"memory", memory.to_json()},
        {"final_state", world.state_to_json()}};
    return result;
}

}  // namespace mrc
