#include "mrc/backends.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"

#include "mrc/skills.hpp"

namespace mrc {

const char* to_string(BackendRole r) {
    switch (r) {
        case BackendRole::general_planner: return "general_planner";
        case BackendRole::subgroup_manager: return "subgroup_manager";
        case BackendRole::executor: return "executor";
        case BackendRole::capability_scorer: return "capability_scorer";
    }
    return "?";
}

// ---------------------------------------------------------------- templates

PromptTemplate default_template(BackendRole role) {
    PromptTemplate t;
    t.role = role;
    switch (role) {
        case BackendRole::general_planner:
            t.text =
                "You are the general proposal planner of a heterogeneous robot "
                "team.\n"
                "Task: {task}\n"
                "Robot capabilities:\n{capabilities}\n"
                "Available skills:\n{skills}\n"
                "Current observations:\n{observations}\n"
                "Recent dialogue:\n{history}\n"
                "Respond with seven labeled sections (Situation Analysis, Spatial "
                "Analysis, Task Decomposition, Grouping Strategy, Subgoal "
                "Assignment, Coordination Strategy, Risk Assessment) followed by "
                "an Assignments block, one line per group:\n"
                "- group <gid>: agents <name>(<id>), ...; subtask: <text>\n";
            break;
        case BackendRole::subgroup_manager:
            t.text =
                "You are the manager of one robot subgroup.\n"
                "Task: {task}\n"
                "Subgroup capabilities:\n{capabilities}\n"
                "Available skills:\n{skills}\n"
                "Subgroup observations:\n{observations}\n"
                "Recent dialogue:\n{history}\n"
                "Issue at most one command per member using the grammar:\n"
                "group <gid>: agent <name>(<id>) [<verb>] <object>(<id>) "
                "to <location>\n";
            break;
        case BackendRole::executor:
            t.text =
                "You are robot {agent_name} (id {agent_id}).\n"
                "Assigned action: {action}\n"
                "Your observation:\n{observations}\n"
                "Check the action against your physical constraints and reply "
                "'execute' or 'idle: <reason>'.\n";
            break;
        case BackendRole::capability_scorer:
            t.text =
                "Rate from 0 to 1 how capable the named agents are of the "
                "command: {action}\n";
            break;
    }
    return t;
}

PromptTemplate load_template(BackendRole role, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open prompt template: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return PromptTemplate{role, os.str()};
}

std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& values) {
    static const std::regex placeholder(R"(\{([a-z_]+)\})");
    std::string out;
    std::string rest = tmpl.text;
    std::smatch m;
    while (std::regex_search(rest, m, placeholder)) {
        out += m.prefix();
        auto it = values.find(m[1].str());
        if (it == values.end()) {
            throw std::runtime_error("unresolved placeholder {" + m[1].str() + "}");
        }
        out += it->second;
        rest = m.suffix();
    }
    out += rest;
    return out;
}

// --------------------------------------------------------------- HTTP client

HttpBackendConfig HttpBackendConfig::from_environment() {
    HttpBackendConfig c;
    if (const char* v = std::getenv("MRC_ENDPOINT")) c.endpoint = v;
    if (const char* v = std::getenv("MRC_API_KEY")) c.api_key = v;
    if (const char* v = std::getenv("MRC_MODEL")) c.model = v;
    if (const char* v = std::getenv("MRC_TEMPERATURE")) c.temperature = std::stod(v);
    return c;
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig config)
    : config_(std::move(config)) {
    if (config_.endpoint.empty()) {
        throw BackendError("http backend: no endpoint configured");
    }
}

BackendResponse HttpChatBackend::respond(const BackendRequest& request) {
    nlohmann::json body{
        {"model", config_.model},
        {"temperature", config_.temperature},
        {"messages",
         {{{"role", "system"},
           {"content", std::string("You are acting as the ") +
                           to_string(request.role) +
                           " of a multi-robot assembly team."}},
          {{"role", "user"}, {"content", request.rendered_prompt}}}}};

    std::string last_error;
    for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(500 * (1 << (attempt - 1))));
        }
        httplib::Client client(config_.endpoint);
        client.set_connection_timeout(config_.connect_timeout_seconds);
        client.set_read_timeout(config_.read_timeout_seconds);
        httplib::Headers headers;
        if (!config_.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + config_.api_key);
        }
        const auto start = std::chrono::steady_clock::now();
        auto res = client.Post(config_.path, headers, body.dump(),
                               "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 400 && res->status < 500) {
            throw BackendError("http backend: status " +
                               std::to_string(res->status) + ": " + res->body);
        }
        if (res->status >= 500) {
            last_error = "server status " + std::to_string(res->status);
            continue;
        }
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            last_error = std::string("malformed response body: ") + e.what();
            continue;
        }
        BackendResponse out;
        try {
            out.text = parsed.at("choices").at(0).at("message").at("content")
                           .get<std::string>();
        } catch (const nlohmann::json::exception&) {
            last_error = "response missing choices[0].message.content";
            continue;
        }
        if (parsed.contains("usage")) {
            out.prompt_tokens = parsed["usage"].value("prompt_tokens", 0);
            out.completion_tokens = parsed["usage"].value("completion_tokens", 0);
        }
        out.latency_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        return out;
    }
    throw BackendError("http backend: retries exhausted: " + last_error);
}

// ------------------------------------------------------------ shared helpers

namespace {

std::string proposal_text(
    const TaskBrief& task, int cycle,
    const std::vector<std::pair<int, std::pair<std::vector<std::pair<std::string, int>>,
                                               std::string>>>& groups) {
    std::ostringstream os;
    os << "Situation Analysis: cycle " << cycle << " of " << task.name
       << ", assembling the trunk and four wheels.\n";
    os << "Spatial Analysis: components start at the four corner anchors; the arm "
          "is fixed at the workspace center.\n";
    os << "Task Decomposition: explore anchors, clear obstructions, deliver "
          "components to assembly slots, attach in sequence.\n";
    os << "Grouping Strategy: mobile robots fetch in parallel while the arm "
          "assembles; group sizes minimize path interference.\n";
    os << "Subgoal Assignment: each group advances its pending deliveries or "
          "assembly this cycle.\n";
    os << "Coordination Strategy: deliveries target separated slots; agents near "
          "a shared corridor stagger their motion.\n";
    os << "Risk Assessment: stochastic skill failures are retried next cycle; "
          "conflicting paths yield and re-plan.\n";
    os << "Assignments:\n";
    for (const auto& [gid, body] : groups) {
        os << "- group " << gid << ": agents ";
        const auto& members = body.first;
        for (std::size_t i = 0; i < members.size(); ++i) {
            if (i) os << ", ";
            os << members[i].first << "(" << members[i].second << ")";
        }
        os << "; subtask: " << body.second << "\n";
    }
    return os.str();
}

}  // namespace

// ----------------------------------------------------------- always-wait

BackendResponse AlwaysWaitBackend::respond(const BackendRequest& request) {
    BackendResponse out;
    if (request.role == BackendRole::general_planner) {
        std::vector<std::pair<std::string, int>> members;
        for (const auto& a : request.context.at("agents")) {
            members.emplace_back(a.at("name").get<std::string>(),
                                 a.at("id").get<int>());
        }
        TaskBrief task;
        task.name = request.context.at("task").at("name").get<std::string>();
        out.text = proposal_text(task, request.cycle,
                                 {{1, {members, "hold position"}}});
    } else if (request.role == BackendRole::subgroup_manager) {
        std::ostringstream os;
        const int gid = request.context.at("gid").get<int>();
        for (const auto& m : request.context.at("members")) {
            os << "group " << gid << ": agent " << m.at("name").get<std::string>()
               << "(" << m.at("id").get<int>() << ") [wait]\n";
        }
        out.text = os.str();
    } else {
        out.text = "execute";
    }
    return out;
}

// -------------------------------------------------------------- scripted

namespace {

/// A trajectory forecast obtained by running the world's own planners.
/// When every leg so far reduced to the direct segment the forecast is
/// byte-identical to what the world will execute; otherwise the RRT sample
/// stream differs and comparisons carry an extra margin.
struct PredictedPath {
    std::vector<Pose2D> traj;
    Pose2D end;
    bool exact = false;
    bool ok = false;
};

PredictedPath predict_drive(const Pose2D& start, const Pose2D& goal,
                            const std::vector<Obstacle>& obstacles,
                            const SceneConfig& scene, const SkillConfig& skills,
                            std::uint64_t seed) {
    PredictedPath out;
    out.end = goal;
    out.exact = segment_collision_free(start, goal, obstacles,
                                       skills.rrt.collision_resolution);
    Rng rng(seed);
    std::optional<Path> path;
    try {
        path = rrt_plan(start, goal, obstacles, scene.bounds, skills.rrt, rng);
    } catch (const std::invalid_argument&) {
        return out;
    }
    if (!path) return out;
    auto traj = follow_path_diff_drive(start, *path, skills.drive);
    if (!traj) return out;
    out.traj = std::move(*traj);
    out.end = out.traj.back();
    out.ok = true;
    return out;
}

/// True when two forecast trajectories would trip the world's conflict rule.
bool predicted_clash(const PredictedPath& a, const PredictedPath& b,
                     double conflict_distance) {
    if (!a.ok || !b.ok) return false;
    const double margin = (a.exact && b.exact) ? 0.0 : 1.5;
    return paths_overlap(a.traj, b.traj, conflict_distance + margin);
}

}  // namespace

struct ScriptedBackend::State {
    struct Action {
        SkillVerb verb = SkillVerb::wait;
        std::string object;
        int object_id = -1;
        std::string location;
        std::string pre_observed;  // component name that must be known
        std::string pre_cleared;   // anchor whose blocker must be gone
        int earliest = 0;
        std::string clears;  // anchor this action clears on success
    };

    TaskBrief task;
    int cycle = 0;

    std::map<int, Pose2D> component_pose;
    std::set<int> component_known;
    std::set<int> component_attached;
    std::map<int, Pose2D> agent_pose;
    std::map<int, double> agent_reach;
    std::map<int, std::string> agent_name;
    std::map<std::string, int> component_id;
    std::set<std::string> cleared;

    std::map<int, std::vector<Action>> scripts;
    std::map<int, std::size_t> cursor;
    std::map<int, Action> issued;
    std::map<int, int> defer;

    std::map<int, std::string> decided;  // agent id -> command body
    std::vector<std::pair<int, std::pair<std::vector<std::pair<std::string, int>>,
                                         std::string>>> groups;

    static std::string body_for(const Action& a);
    void build_scripts();
    void ingest(const nlohmann::json& ctx);
    void decide(const nlohmann::json& ctx);
};

void ScriptedBackend::State::build_scripts() {
    using A = Action;
    auto move = [](const std::string& loc) {
        A a;
        a.verb = SkillVerb::move;
        a.location = loc;
        return a;
    };
    auto push = [this](const std::string& comp, const std::string& loc,
                       const std::string& needs_clear, int earliest) {
        A a;
        a.verb = SkillVerb::push;
        a.object = comp;
        a.object_id = component_id.at(comp);
        a.location = loc;
        a.pre_observed = comp;
        a.pre_cleared = needs_clear;
        a.earliest = earliest;
        return a;
    };
    auto walk = [](const std::string& loc) {
        A a;
        a.verb = SkillVerb::walk;
        a.location = loc;
        return a;
    };
    auto carry = [this](const std::string& comp, const std::string& loc,
                        const std::string& clears_anchor) {
        A a;
        a.verb = SkillVerb::carry;
        a.object = comp;
        a.object_id = component_id.at(comp);
        a.location = loc;
        if (clears_anchor.empty()) a.pre_observed = comp;
        a.clears = clears_anchor;
        return a;
    };

    scripts.clear();
    cursor.clear();

    const std::string free_anchor =
        std::find(task.blocked_anchors.begin(), task.blocked_anchors.end(),
                  "ne") == task.blocked_anchors.end()
            ? "ne"
            : "nw";

    auto blocker_name = [&](const std::string& anchor) {
        const auto it = std::find(task.blocked_anchors.begin(),
                                  task.blocked_anchors.end(), anchor);
        const int idx = static_cast<int>(it - task.blocked_anchors.begin());
        return "blocker_" + std::to_string(idx + 1);
    };
    auto blocker_id = [&](const std::string& anchor) {
        const auto it = std::find(task.blocked_anchors.begin(),
                                  task.blocked_anchors.end(), anchor);
        return 20 + static_cast<int>(it - task.blocked_anchors.begin());
    };

    // Humanoid script first: its forecast walk/carry itinerary drives both
    // the AGV-to-anchor assignment and the stagger of the opening moves.
    std::vector<Action> humanoid_actions;
    auto clear_pair = [&](const std::string& anchor) {
        humanoid_actions.push_back(walk("blocker_approach_" + anchor));
        Action c;
        c.verb = SkillVerb::carry;
        c.object = blocker_name(anchor);
        c.object_id = blocker_id(anchor);
        c.location = "drop_" + anchor;
        c.clears = anchor;
        humanoid_actions.push_back(c);
    };
    if (task.blocked_anchors.empty()) {
        // The direct line to the stacked anchor clips the south-east wall, so
        // the walk stages below the wall band; both legs are then straight
        // segments the forecast reproduces exactly. The arm's pick rate stays
        // the bottleneck, so the extra leg costs no steps.
        humanoid_actions = {walk("(1.4, -7.5)"), walk("approach_se"),
                            carry("trunk", "slot_se", ""),
                            walk("(1.4, -7.5)"), walk("approach_se"),
                            carry("wheel_4", "slot_e", "")};
    } else if (free_anchor == "ne") {
        // Clear order nw, sw, se; the sw push waits out the humanoid's
        // south-crossing walk.
        clear_pair("nw");
        clear_pair("sw");
        clear_pair("se");
    } else {
        // Clear order ne, se, sw; the trunk push is held until the stacked
        // anchor is clear so the assembly finishes on schedule.
        clear_pair("ne");
        clear_pair("se");
        clear_pair("sw");
    }

    // Forecast the humanoid's per-cycle trajectories with the planners the
    // world itself runs, carrying the layout changes its drops cause forward.
    SceneConfig scene = SceneConfig::defaults();
    scene.blocked_anchors = task.blocked_anchors;
    const SkillConfig skills = SkillConfig::no_failures();
    std::vector<PredictedPath> humanoid_plan;
    {
        WorldState sim;
        sim.obstacles = static_obstacles(scene, task.difficulty);
        for (const auto& a : scene.anchors) {
            for (const auto& cname : a.components) {
                ComponentState c;
                c.id = component_id.count(cname) ? component_id.at(cname) : -1;
                c.name = cname;
                c.pose = a.position;
                sim.components.push_back(c);
            }
        }
        AgentState hum;
        hum.id = 5;
        hum.name = "humanoid";
        hum.kind = AgentKind::humanoid;
        hum.pose = agent_pose.count(5) ? agent_pose[5] : Pose2D(0, 0);
        Rng rng(derive_seed(0x5C81B7, static_cast<std::uint64_t>(task.task_id)));
        auto resolve = [&](const std::string& loc) {
            if (!loc.empty() && loc.front() == '(') {
                double x = 0.0;
                double y = 0.0;
                std::sscanf(loc.c_str(), "(%lf, %lf)", &x, &y);
                return Pose2D(x, y);
            }
            return scene.resolve_location(loc);
        };
        bool chain_exact = true;
        for (const auto& a : humanoid_actions) {
            const Pose2D target = resolve(a.location);
            std::vector<Obstacle> check = sim.obstacles;
            if (a.object_id >= 20) {
                std::erase_if(check,
                              [&](const Obstacle& o) { return o.id == a.object_id; });
            }
            const bool direct = segment_collision_free(
                hum.pose, target, check, skills.rrt.collision_resolution);
            SkillOutcome outc = humanoid_skill(
                hum, a.verb,
                a.object_id >= 0 ? std::optional<int>(a.object_id) : std::nullopt,
                target, sim, skills, scene.bounds, rng);
            chain_exact = chain_exact && direct && outc.success;
            PredictedPath p;
            p.ok = outc.success;
            p.traj = outc.trajectory;
            p.end = outc.new_agent_pose;
            p.exact = chain_exact;
            humanoid_plan.push_back(std::move(p));
            if (!outc.success) break;
            hum.pose = outc.new_agent_pose;
            if (outc.moved_object) {
                const auto& [oid, pose] = *outc.moved_object;
                for (auto& o : sim.obstacles) {
                    if (o.id == oid) o.center = pose;
                }
                for (auto& c : sim.components) {
                    if (c.id == oid) c.pose = pose;
                }
            }
        }
    }

    // Forecast every AGV-to-lookout opening move once, then pick the
    // assignment that minimizes travel while avoiding forecast conflicts
    // with the humanoid's first walk and between the AGVs themselves.
    const std::vector<Obstacle> statics = static_obstacles(scene, task.difficulty);
    std::map<std::pair<int, std::string>, PredictedPath> drive_pred;
    const std::vector<std::string> anchor_names = {"ne", "nw", "sw"};
    for (int agv = 2; agv <= 4; ++agv) {
        for (std::size_t k = 0; k < anchor_names.size(); ++k) {
            const Pose2D spawn =
                agent_pose.count(agv) ? agent_pose[agv] : Pose2D(0, 0);
            drive_pred[{agv, anchor_names[k]}] = predict_drive(
                spawn, scene.resolve_location("lookout_" + anchor_names[k]),
                statics, scene, skills,
                derive_seed(0xD21E77, static_cast<std::uint64_t>(agv), k));
        }
    }
    auto clash = [&](const PredictedPath& a, const PredictedPath& b) {
        return predicted_clash(a, b, skills.conflict_distance);
    };
    std::vector<std::string> order = anchor_names;
    std::vector<std::string> best = order;
    double best_cost = std::numeric_limits<double>::max();
    do {
        double cost = 0.0;
        const PredictedPath* mv[3];
        for (int i = 0; i < 3; ++i) {
            mv[i] = &drive_pred.at({2 + i, order[i]});
            cost += mv[i]->ok ? path_length(mv[i]->traj) : 1000.0;
            if (!humanoid_plan.empty() && clash(*mv[i], humanoid_plan.front())) {
                cost += 1000.0;
            }
        }
        for (int i = 0; i < 3; ++i) {
            for (int j = i + 1; j < 3; ++j) {
                if (clash(*mv[i], *mv[j])) cost += 1000.0;
            }
        }
        if (cost < best_cost) {
            best_cost = cost;
            best = order;
        }
    } while (std::next_permutation(order.begin(), order.end()));
    std::map<std::string, int> agv_of;
    for (int i = 0; i < 3; ++i) agv_of[best[i]] = 2 + i;

    const std::map<std::string, std::string> wheel_by_anchor = {
        {"ne", "wheel_1"}, {"nw", "wheel_2"}, {"sw", "wheel_3"}};

    if (task.blocked_anchors.empty()) {
        for (const auto& [anchor, wheel] : wheel_by_anchor) {
            scripts[agv_of.at(anchor)] = {
                move("lookout_" + anchor), push(wheel, "slot_" + anchor, "", 0)};
        }
    } else {
        // Hard tasks: one anchor is free; its AGV double-serves the stacked
        // south-east anchor once the humanoid has cleared it.
        if (free_anchor == "ne") {
            scripts[agv_of.at("sw")] = {move("lookout_sw"),
                                        push("wheel_3", "slot_sw", "sw", 6)};
        } else {
            scripts[agv_of.at("ne")] = {move("lookout_ne"),
                                        push("wheel_1", "slot_ne", "ne", 0)};
        }
        for (const auto& anchor : anchor_names) {
            const int agv = agv_of.at(anchor);
            if (scripts.count(agv)) continue;
            const std::string clear_req = anchor == free_anchor ? "" : anchor;
            scripts[agv] = {
                move("lookout_" + anchor),
                push(wheel_by_anchor.at(anchor), "slot_" + anchor, clear_req, 0)};
        }
        const int runner = agv_of.at(free_anchor);
        const int trunk_earliest = free_anchor == "nw" ? 6 : 0;
        // The runner relocates toward the trunk while the humanoid is busy
        // in a far corner. When nw is free the humanoid clears se on cycles
        // 3-4, so the relocation waits until 5; otherwise se is cleared last
        // and cycle 4 is safe. The trunk push is gated on the cleared anchor
        // anyway, so this defers nothing.
        Action relocate = move("lookout_se");
        relocate.earliest = free_anchor == "nw" ? 5 : 4;
        scripts[runner].push_back(relocate);
        scripts[runner].push_back(push("trunk", "slot_se", "se", trunk_earliest));
        scripts[runner].push_back(push("wheel_4", "slot_e", "se", 0));
    }
    scripts[5] = std::move(humanoid_actions);

    // Stagger the opening moves: each AGV takes the earliest cycle, within
    // the slack its later pushes allow, whose forecast trajectory avoids the
    // humanoid's itinerary and the peers already scheduled for that cycle.
    auto window_for = [&](const std::string& anchor) {
        if (task.blocked_anchors.empty()) return 2;
        if (anchor == free_anchor) return 2;  // serves the stacked anchor later
        return anchor == "sw" ? 4 : 3;
    };
    std::vector<std::string> sched = anchor_names;
    std::sort(sched.begin(), sched.end(),
              [&](const std::string& a, const std::string& b) {
                  return std::pair(window_for(a), agv_of.at(a)) <
                         std::pair(window_for(b), agv_of.at(b));
              });
    std::map<std::string, int> scheduled;  // anchor -> opening-move cycle
    for (const auto& anchor : sched) {
        const PredictedPath& mine = drive_pred.at({agv_of.at(anchor), anchor});
        const int window = window_for(anchor);
        int chosen = window;
        for (int c = 1; c <= window; ++c) {
            bool clear = true;
            if (c - 1 < static_cast<int>(humanoid_plan.size()) &&
                clash(mine, humanoid_plan[c - 1])) {
                clear = false;
            }
            for (const auto& [other, oc] : scheduled) {
                if (oc == c &&
                    clash(mine, drive_pred.at({agv_of.at(other), other}))) {
                    clear = false;
                }
            }
            if (clear) {
                chosen = c;
                break;
            }
        }
        scheduled[anchor] = chosen;
        scripts[agv_of.at(anchor)][0].earliest = chosen;
    }
}

void ScriptedBackend::State::ingest(const nlohmann::json& ctx) {
    cycle = ctx.at("cycle").get<int>();

    for (const auto& a : ctx.at("agents")) {
        const int id = a.at("id").get<int>();
        agent_name[id] = a.at("name").get<std::string>();
        if (a.contains("reach")) agent_reach[id] = a.at("reach").get<double>();
    }
    const auto& env = ctx.at("observations");
    for (const auto& obs : env.at("state_updates")) {
        const auto& self = obs.at("self");
        agent_pose[self.at("id").get<int>()] = pose_from_json(self.at("pose"));
        for (const auto& c : obs.at("visible_components")) {
            const int id = c.at("id").get<int>();
            component_pose[id] = pose_from_json(c.at("pose"));
            component_known.insert(id);
            if (c.at("attached").get<bool>()) component_attached.insert(id);
        }
    }

    if (component_id.empty()) {
        for (const auto& c : ctx.at("components")) {
            component_id[c.at("name").get<std::string>()] = c.at("id").get<int>();
        }
        build_scripts();
    }

    static const std::regex conflict_re(R"(conflict: (?:agents|paths of agents) (\d+) and (\d+))");
    for (const auto& f : ctx.at("agent_feedback")) {
        const int agent = f.at("agent").get<int>();
        const auto it = issued.find(agent);
        if (it == issued.end()) continue;
        if (f.at("success").get<bool>()) {
            if (!it->second.clears.empty()) cleared.insert(it->second.clears);
            auto cur = cursor.find(agent);
            if (cur != cursor.end() && cur->second < scripts[agent].size() &&
                body_for(scripts[agent][cur->second]) == body_for(it->second)) {
                ++cur->second;
            }
        } else {
            const std::string diag = f.at("diagnostic").get<std::string>();
            std::smatch m;
            if (std::regex_search(diag, m, conflict_re)) {
                const int a = std::stoi(m[1].str());
                const int b = std::stoi(m[2].str());
                const int other = agent == a ? b : a;
                // Deterministic stagger: the humanoid drives the critical
                // path, so its peer yields; otherwise the higher id yields.
                if (agent != 5 && (other == 5 || agent > other)) defer[agent] = 1;
            }
        }
    }
    issued.clear();
}

std::string ScriptedBackend::State::body_for(const Action& a) {
    std::ostringstream os;
    os << "[" << to_string(a.verb) << "]";
    if (!a.object.empty()) os << " " << a.object << "(" << a.object_id << ")";
    if (!a.location.empty()) os << " to " << a.location;
    return os.str();
}

void ScriptedBackend::State::decide(const nlohmann::json& ctx) {
    decided.clear();
    groups.clear();

    for (auto& [agent, script] : scripts) {
        if (!cursor.count(agent)) cursor[agent] = 0;
        auto d = defer.find(agent);
        if (d != defer.end() && d->second > 0) {
            --d->second;
            continue;
        }
        if (cursor[agent] >= script.size()) continue;
        const Action& a = script[cursor[agent]];
        if (cycle < a.earliest) continue;
        if (!a.pre_cleared.empty() && !cleared.count(a.pre_cleared)) continue;
        if (!a.pre_observed.empty()) {
            const int cid = component_id.at(a.pre_observed);
            if (!component_known.count(cid)) continue;
        }
        decided[agent] = body_for(a);
        issued[agent] = a;
    }

    // The arm reacts: pick the lowest-id known, unattached component that has
    // reached a slot within reach.
    const Pose2D arm = agent_pose.count(1) ? agent_pose[1] : Pose2D(0, -2);
    const double reach = agent_reach.count(1) ? agent_reach[1] : 0.855;
    int best = -1;
    for (const auto& [name, id] : component_id) {
        if (!component_known.count(id) || component_attached.count(id)) continue;
        if (distance(component_pose[id], arm) > reach) continue;
        if (best < 0 || id < best) best = id;
    }
    if (best >= 0) {
        std::string name;
        for (const auto& [n, id] : component_id) {
            if (id == best) name = n;
        }
        Action a;
        a.verb = SkillVerb::pick;
        a.object = name;
        a.object_id = best;
        a.location = "socket_" + name;
        decided[1] = body_for(a);
        issued[1] = a;
    }

    const bool no_grouping =
        ctx.contains("ablations") &&
        ctx.at("ablations").value("no_grouping", false);
    auto named = [&](std::initializer_list<int> ids) {
        std::vector<std::pair<std::string, int>> out;
        for (int id : ids) out.emplace_back(agent_name[id], id);
        return out;
    };
    if (no_grouping) {
        groups.push_back({1, {named({1, 2, 3, 4, 5}), "complete the assembly"}});
    } else if (cycle <= 1) {
        groups.push_back({1, {named({2, 3, 4}), "explore anchors and fetch wheels"}});
        groups.push_back(
            {2, {named({5}), task.blocked_anchors.empty()
                                 ? "deliver the trunk and the stacked wheel"
                                 : "clear the blocked corridors"}});
        groups.push_back({3, {named({1}), "assemble delivered components"}});
    } else {
        groups.push_back({1, {named({2, 3, 4, 5}), "fetch, clear, and deliver"}});
        groups.push_back({2, {named({1}), "assemble delivered components"}});
    }
}

ScriptedBackend::ScriptedBackend() : state_(std::make_unique<State>()) {}
ScriptedBackend::~ScriptedBackend() = default;

void ScriptedBackend::begin_episode(const TaskBrief& task, std::uint64_t seed) {
    (void)seed;
    state_ = std::make_unique<State>();
    state_->task = task;
}

BackendResponse ScriptedBackend::respond(const BackendRequest& request) {
    BackendResponse out;
    switch (request.role) {
        case BackendRole::general_planner: {
            state_->ingest(request.context);
            state_->decide(request.context);
            out.text = proposal_text(state_->task, request.cycle, state_->groups);
            break;
        }
        case BackendRole::subgroup_manager: {
            const int gid = request.context.at("gid").get<int>();
            std::ostringstream os;
            for (const auto& m : request.context.at("members")) {
                const int id = m.at("id").get<int>();
                const std::string name = m.at("name").get<std::string>();
                const auto it = state_->decided.find(id);
                os << "group " << gid << ": agent " << name << "(" << id << ") "
                   << (it == state_->decided.end() ? std::string("[wait]")
                                                   : it->second)
                   << "\n";
            }
            out.text = os.str();
            break;
        }
        case BackendRole::executor:
            out.text = "execute";
            break;
        case BackendRole::capability_scorer:
            out.text = "1.0";
            break;
    }
    return out;
}

// ---------------------------------------------------------------- replay

ReplayBackend::ReplayBackend(const nlohmann::json& backend_io) {
    for (const auto& entry : backend_io) {
        responses_[entry.at("key").get<std::string>()] =
            entry.at("response").get<std::string>();
    }
}

BackendResponse ReplayBackend::respond(const BackendRequest& request) {
    const auto it = responses_.find(request.key);
    if (it == responses_.end()) {
        throw BackendError("replay divergence at cycle " +
                           std::to_string(request.cycle) + ", role " +
                           to_string(request.role) + ", key " + request.key);
    }
    return BackendResponse{it->second, std::nullopt, std::nullopt, std::nullopt};
}

void RecordingBackend::begin_episode(const TaskBrief& task, std::uint64_t seed) {
    inner_.begin_episode(task, seed);
    log_ = nlohmann::json::array();
}

BackendResponse RecordingBackend::respond(const BackendRequest& request) {
    BackendResponse r = inner_.respond(request);
    log_.push_back({{"key", request.key},
                    {"cycle", request.cycle},
                    {"role", to_string(request.role)},
                    {"response", r.text}});
    return r;
}

}  // namespace mrc
