#include "mrc/world.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mrc {

const char* to_string(Difficulty d) { return d == Difficulty::easy ? "easy" : "hard"; }

World::World(SceneConfig scene, SkillConfig skills, WorldState state)
    : scene_(std::move(scene)), skills_(std::move(skills)), state_(std::move(state)) {
    failures_ = std::make_unique<FailureLayer>(
        skills_, derive_seed(state_.rng_seed, 0xFA11));
}

std::vector<Obstacle> static_obstacles(const SceneConfig& scene,
                                       Difficulty difficulty) {
    std::vector<Obstacle> out;

    // Static walls, one near each workspace corner.
    int oid = 30;
    for (const auto& a : scene.anchors) {
        Obstacle wall;
        wall.id = oid++;
        wall.name = "wall_" + a.name;
        wall.center =
            Pose2D(a.position.x > 0 ? 4.5 : -4.5, a.position.y > 0 ? 6.5 : -6.5);
        wall.half_x = 2.5;
        wall.half_y = 0.5;
        wall.kind = ObstacleKind::wall;
        out.push_back(wall);
    }
    if (difficulty == Difficulty::hard) {
        int bid = 20;
        int bn = 1;
        for (const auto& name : scene.blocked_anchors) {
            const AnchorSpec* a = scene.find_anchor(name);
            if (!a) throw std::runtime_error("blocked anchor not in scene: " + name);
            Obstacle b;
            b.id = bid++;
            b.name = "blocker_" + std::to_string(bn++);
            b.center = a->blocker_position;
            b.half_x = 0.5;
            b.half_y = 0.5;
            b.kind = ObstacleKind::blocker;
            out.push_back(b);
        }
    }
    return out;
}

World World::init_scene(std::uint64_t seed, Difficulty difficulty,
                        SceneConfig scene, SkillConfig skills) {
    WorldState s;
    s.rng_seed = seed;
    Rng rng(derive_seed(seed, 0x5CE7E));

    s.obstacles = static_obstacles(scene, difficulty);

    // Components at the corner anchors; the "se" anchor stacks two.
    int cid = 10;
    auto component_id = [&](const std::string& name) {
        return name == "trunk" ? 14 : cid++;
    };
    for (const auto& a : scene.anchors) {
        for (const auto& cname : a.components) {
            ComponentState c;
            c.id = component_id(cname);
            c.name = cname;
            c.pose = a.position;
            s.components.push_back(c);
        }
    }
    std::sort(s.components.begin(), s.components.end(),
              [](const auto& x, const auto& y) { return x.id < y.id; });

    AgentState arm;
    arm.id = 1;
    arm.name = "arm";
    arm.kind = AgentKind::arm;
    arm.pose = scene.arm_position;
    arm.reach = scene.arm_reach;
    s.agents.push_back(arm);

    auto sample_pose = [&](const Bounds& range) {
        return Pose2D(rng.uniform(range.xmin, range.xmax),
                      rng.uniform(range.ymin, range.ymax),
                      rng.uniform(-std::numbers::pi, std::numbers::pi));
    };
    auto clear_of = [&](const Pose2D& p, double min_dist) {
        for (const auto& a : s.agents) {
            if (a.kind == AgentKind::arm) continue;
            if (distance(a.pose, p) < min_dist) return false;
        }
        return true;
    };

    for (int i = 1; i <= 3; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            Pose2D p = sample_pose(scene.agv_range);
            if (!point_collision_free(p.x, p.y, s.obstacles)) continue;
            if (!clear_of(p, scene.agv_clearance)) continue;
            AgentState agv;
            agv.id = 1 + i;
            agv.name = "agv_" + std::to_string(i);
            agv.kind = AgentKind::agv;
            agv.pose = p;
            s.agents.push_back(agv);
            placed = true;
            break;
        }
        if (!placed) throw std::runtime_error("init_scene: could not place AGVs");
    }

    const double h = scene.humanoid_region_half;
    bool placed = false;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Pose2D p = sample_pose(Bounds{-h, h, -h, h});
        if (!point_collision_free(p.x, p.y, s.obstacles)) continue;
        if (difficulty == Difficulty::easy &&
            !clear_of(p, scene.humanoid_clearance_easy)) {
            continue;
        }
        AgentState hum;
        hum.id = 5;
        hum.name = "humanoid";
        hum.kind = AgentKind::humanoid;
        hum.pose = p;
        s.agents.push_back(hum);
        placed = true;
        break;
    }
    if (!placed) throw std::runtime_error("init_scene: could not place humanoid");

    return World(std::move(scene), std::move(skills), std::move(s));
}

Observation World::observe(AgentId agent) const {
    const AgentState* self = state_.find_agent(agent);
    if (!self) throw std::invalid_argument("no such agent");

    Observation obs;
    obs.observer = agent;
    obs.self_state = *self;
    for (const auto& a : state_.agents) {
        if (a.id == agent) continue;
        if (distance(a.pose, self->pose) <= scene_.perception_radius) {
            obs.visible_agents.push_back({a.id, a.pose});
        }
    }
    for (const auto& c : state_.components) {
        if (distance(c.pose, self->pose) <= scene_.perception_radius) {
            obs.visible_components.push_back({c.id, c.pose, c.attached});
        }
    }
    return obs;
}

std::vector<Observation> World::observe_all() const {
    std::vector<Observation> out;
    out.reserve(state_.agents.size());
    for (const auto& a : state_.agents) out.push_back(observe(a.id));
    return out;
}

bool World::check_assembly_complete() const {
    return std::all_of(state_.components.begin(), state_.components.end(),
                       [](const ComponentState& c) { return c.attached; });
}

bool World::component_blocked(const ComponentState& c) const {
    for (const auto& o : state_.obstacles) {
        if (o.kind != ObstacleKind::blocker) continue;
        if (distance(o.center, c.pose) <= scene_.blocking_radius) return true;
    }
    return false;
}

SkillOutcome World::agv_move(const AgentState& agent, const Pose2D& target,
                             Rng& rng) const {
    SkillOutcome out;
    out.new_agent_pose = agent.pose;
    out.trajectory = {agent.pose};
    if (!scene_.bounds.contains(target.x, target.y)) {
        out.failure_reason = FailureReason::infeasible;
        out.diagnostic = "target outside workspace";
        return out;
    }
    std::optional<Path> path;
    try {
        path = rrt_plan(agent.pose, target, state_.obstacles, scene_.bounds,
                        skills_.rrt, rng);
    } catch (const std::invalid_argument&) {
        out.failure_reason = FailureReason::infeasible;
        out.diagnostic = "start or goal in collision";
        return out;
    }
    if (!path) {
        out.failure_reason = FailureReason::unreachable;
        out.diagnostic = "no path to target";
        return out;
    }
    auto traj = follow_path_diff_drive(agent.pose, *path, skills_.drive);
    if (!traj) {
        out.failure_reason = FailureReason::infeasible;
        out.diagnostic = "path tracking diverged";
        return out;
    }
    out.trajectory = std::move(*traj);
    out.new_agent_pose = out.trajectory.back();
    out.success = true;
    return out;
}

SkillOutcome World::agv_push(const AgentState& agent, const ComponentState& object,
                             const Pose2D& target, Rng& rng) const {
    SkillOutcome out;
    out.new_agent_pose = agent.pose;
    out.trajectory = {agent.pose};

    if (object.attached || object.carrier.has_value()) {
        out.failure_reason = FailureReason::infeasible;
        out.diagnostic = "component " + object.name + " cannot be pushed";
        return out;
    }
    if (component_blocked(object)) {
        out.failure_reason = FailureReason::infeasible;
        out.diagnostic = "component " + object.name +
                         " is blocked by an obstacle that must be cleared";
        return out;
    }
    if (!scene_.bounds.contains(target.x, target.y)) {
        out.failure_reason = FailureReason::infeasible;
        out.diagnostic = "target outside workspace";
        return out;
    }

    std::vector<Pose2D> traj;

    // Approach leg: drive to the component.
    if (distance(agent.pose, object.pose) > skills_.drive.goal_tolerance) {
        SkillOutcome approach = agv_move(agent, object.pose, rng);
        if (!approach.success) {
            approach.diagnostic = "approach: " + approach.diagnostic;
            return approach;
        }
        traj = std::move(approach.trajectory);
    } else {
        traj.push_back(agent.pose);
    }

    // Transport leg: planned path with the component coupled to the AGV,
    // ending at a standoff point; then a straight final placement segment.
    const double res = skills_.rrt.collision_resolution;
    const double dist_to_target = distance(object.pose, target);
    Pose2D standoff = target;
    if (dist_to_target > 1.0) {
        const double ux = (object.pose.x - target.x) / dist_to_target;
        const double uy = (object.pose.y - target.y) / dist_to_target;
        standoff = Pose2D(target.x + ux, target.y + uy);
        std::optional<Path> transport;
        try {
            transport = rrt_plan(object.pose, standoff, state_.obstacles,
                                 scene_.bounds, skills_.rrt, rng);
        } catch (const std::invalid_argument&) {
            out.failure_reason = FailureReason::infeasible;
            out.diagnostic = "transport start or standoff in collision";
            return out;
        }
        if (!transport) {
            out.failure_reason = FailureReason::unreachable;
            out.diagnostic = "no transport path to target";
            return out;
        }
        for (std::size_t i = 0; i + 1 < transport->waypoints.size(); ++i) {
            const auto& a = transport->waypoints[i];
            const auto& b = transport->waypoints[i + 1];
            const int n = std::max(1, static_cast<int>(std::ceil(distance(a, b) / 0.1)));
            for (int k = (i == 0 ? 0 : 1); k <= n; ++k) {
                traj.push_back(lerp_along(a, b, static_cast<double>(k) / n));
            }
        }
    }
    auto finalleg = straight_line_delivery(standoff, target, state_.obstacles, res);
    if (!finalleg) {
        out.failure_reason = FailureReason::infeasible;
        out.diagnostic = "final placement segment blocked";
        return out;
    }
    traj.insert(traj.end(), finalleg->begin(), finalleg->end());

    out.trajectory = std::move(traj);
    out.moved_object = {object.id, target};
    // The AGV parks just behind the delivered component.
    const Pose2D& prev = standoff;
    const double d = distance(prev, target);
    if (d > 1e-9) {
        const double ux = (prev.x - target.x) / d;
        const double uy = (prev.y - target.y) / d;
        out.new_agent_pose =
            Pose2D(target.x + 0.35 * ux, target.y + 0.35 * uy,
                   std::atan2(-uy, -ux));
    } else {
        out.new_agent_pose = out.trajectory.back();
    }
    out.success = true;
    return out;
}

SkillOutcome World::execute_skill(const SkillInvocation& inv, Rng& rng) const {
    const AgentState* agent = state_.find_agent(inv.agent);
    SkillOutcome out;
    if (!agent) {
        out.failure_reason = FailureReason::infeasible;
        out.diagnostic = "state inconsistency: no such agent";
        return out;
    }
    out.new_agent_pose = agent->pose;
    out.trajectory = {agent->pose};

    if (inv.verb == SkillVerb::wait) {
        out.success = true;
        out.is_wait = true;
        return out;
    }
    if (!verb_allowed(agent->kind, inv.verb)) {
        out.failure_reason = FailureReason::infeasible;
        out.diagnostic = std::string("skill [") + to_string(inv.verb) +
                         "] not available for robot type " + to_string(agent->kind);
        return out;
    }

    switch (inv.verb) {
        case SkillVerb::check: {
            const ComponentState* c = inv.object ? state_.find_component(*inv.object)
                                                 : nullptr;
            if (!c) {
                out.failure_reason = FailureReason::infeasible;
                out.diagnostic = "state inconsistency: unknown object";
                return out;
            }
            out.success = true;
            out.diagnostic = c->name + (arm_check(*agent, *c) ? " is within reach"
                                                              : " is out of reach");
            return out;
        }
        case SkillVerb::pick: {
            const ComponentState* c = inv.object ? state_.find_component(*inv.object)
                                                 : nullptr;
            if (!c || !inv.location) {
                out.failure_reason = FailureReason::infeasible;
                out.diagnostic = "state inconsistency: unknown object or location";
                return out;
            }
            if (agent->holding.has_value()) {
                out.failure_reason = FailureReason::infeasible;
                out.diagnostic = "state inconsistency: gripper already holding";
                return out;
            }
            ArmPickContext ctx;
            ctx.magnet_range = skills_.magnet_range;
            auto sit = scene_.sockets.find(c->name);
            ctx.socket = sit != scene_.sockets.end()
                             ? scene_.resolve_location(sit->second)
                             : *inv.location;
            return arm_pick(*agent, *c, *inv.location, ctx, skills_.impedance);
        }
        case SkillVerb::move: {
            if (!inv.location) {
                out.failure_reason = FailureReason::infeasible;
                out.diagnostic = "state inconsistency: missing target location";
                return out;
            }
            return agv_move(*agent, *inv.location, rng);
        }
        case SkillVerb::push: {
            const ComponentState* c = inv.object ? state_.find_component(*inv.object)
                                                 : nullptr;
            if (!c || !inv.location) {
                out.failure_reason = FailureReason::infeasible;
                out.diagnostic = "state inconsistency: unknown object or location";
                return out;
            }
            return agv_push(*agent, *c, *inv.location, rng);
        }
        case SkillVerb::walk:
        case SkillVerb::carry: {
            if (!inv.location) {
                out.failure_reason = FailureReason::infeasible;
                out.diagnostic = "state inconsistency: missing target location";
                return out;
            }
            return humanoid_skill(*agent, inv.verb, inv.object, *inv.location,
                                  state_, skills_, scene_.bounds, rng);
        }
        default:
            out.failure_reason = FailureReason::infeasible;
            out.diagnostic = "unsupported skill";
            return out;
    }
}

bool paths_overlap(const std::vector<Pose2D>& a, const std::vector<Pose2D>& b,
                   double threshold) {
    if (a.size() < 2 || b.size() < 2) return false;
    const double la = path_length(a);
    const double lb = path_length(b);
    if (la < 1e-9 || lb < 1e-9) return false;

    auto at_fraction = [](const std::vector<Pose2D>& pts, double total, double f) {
        double target = f * total;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            const double seg = distance(pts[i], pts[i + 1]);
            if (acc + seg >= target) {
                const double t = seg > 1e-12 ? (target - acc) / seg : 0.0;
                return lerp_along(pts[i], pts[i + 1], t);
            }
            acc += seg;
        }
        return pts.back();
    };

    const int n = 100;
    double min_d = std::numeric_limits<double>::max();
    for (int i = 0; i <= n; ++i) {
        const double f = static_cast<double>(i) / n;
        min_d = std::min(min_d, distance(at_fraction(a, la, f), at_fraction(b, lb, f)));
    }
    const double d0 = distance(a.front(), b.front());
    const double d1 = distance(a.back(), b.back());
    // Only a genuine crossing counts: the pair must come closer than it is
    // at departure and at arrival.
    return min_d < threshold && min_d + 1e-9 < std::min(d0, d1);
}

StepResult World::step(const std::map<AgentId, SkillInvocation>& actions) {
    struct Pending {
        AgentId agent;
        SkillInvocation inv;
        SkillOutcome outcome;
    };
    std::vector<Pending> pending;
    for (const auto& agent : state_.agents) {
        auto it = actions.find(agent.id);
        SkillInvocation inv;
        if (it != actions.end()) {
            inv = it->second;
            inv.agent = agent.id;
        } else {
            inv.agent = agent.id;
            inv.verb = SkillVerb::wait;
        }
        Rng rng(derive_seed(state_.rng_seed, 0x57E9 + state_.step, agent.id));
        Pending p{agent.id, inv, execute_skill(inv, rng)};
        pending.push_back(std::move(p));
    }

    // Conflict detection on pre-application trajectories.
    std::vector<ConflictReport> conflicts;
    auto mark_conflict = [&](Pending& x, Pending& y, ConflictKind kind,
                             const std::string& detail) {
        ConflictReport r;
        r.agent_a = std::min(x.agent, y.agent);
        r.agent_b = std::max(x.agent, y.agent);
        r.kind = kind;
        r.detail = detail;
        conflicts.push_back(std::move(r));
        for (Pending* p : {&x, &y}) {
            p->outcome.success = false;
            p->outcome.attached = false;
            p->outcome.moved_object.reset();
            p->outcome.failure_reason = FailureReason::conflict;
            p->outcome.diagnostic = detail;
        }
    };
    for (std::size_t i = 0; i < pending.size(); ++i) {
        for (std::size_t j = i + 1; j < pending.size(); ++j) {
            Pending& x = pending[i];
            Pending& y = pending[j];
            if (x.inv.verb == SkillVerb::wait || y.inv.verb == SkillVerb::wait) continue;
            if (x.inv.object && y.inv.object && *x.inv.object == *y.inv.object) {
                std::ostringstream os;
                os << "conflict: agents " << x.agent << " and " << y.agent
                   << " both target object " << *x.inv.object;
                mark_conflict(x, y, ConflictKind::same_object, os.str());
                continue;
            }
            if (x.outcome.success && y.outcome.success &&
                paths_overlap(x.outcome.trajectory, y.outcome.trajectory,
                              skills_.conflict_distance)) {
                std::ostringstream os;
                os << "conflict: paths of agents " << x.agent << " and " << y.agent
                   << " cross within " << skills_.conflict_distance << " m";
                mark_conflict(x, y, ConflictKind::path_overlap, os.str());
            }
        }
    }

    // Stochastic failure layer, in agent-id order.
    for (auto& p : pending) {
        if (!p.outcome.is_wait) p.outcome = failures_->apply(std::move(p.outcome), p.inv.verb);
    }

    // Atomic application.
    for (auto& p : pending) {
        if (!p.outcome.success || p.outcome.is_wait) continue;

        Pose2D np = p.outcome.new_agent_pose;
        np = Pose2D(scene_.bounds.clamp_x(np.x), scene_.bounds.clamp_y(np.y), np.heading);
        if (!point_collision_free(np.x, np.y, state_.obstacles)) {
            p.outcome.success = false;
            p.outcome.failure_reason = FailureReason::infeasible;
            p.outcome.diagnostic = "final pose inside an obstacle";
            continue;
        }
        if (AgentState* a = state_.find_agent(p.agent)) a->pose = np;

        if (p.outcome.moved_object) {
            const auto& [oid, pose] = *p.outcome.moved_object;
            if (ComponentState* c = state_.find_component(oid)) {
                c->pose = Pose2D(scene_.bounds.clamp_x(pose.x),
                                 scene_.bounds.clamp_y(pose.y), pose.heading);
                if (p.outcome.attached) {
                    auto sit = scene_.sockets.find(c->name);
                    if (sit != scene_.sockets.end()) {
                        magnetic_attach(*c, scene_.resolve_location(sit->second),
                                        skills_.magnet_range);
                    }
                }
            } else {
                for (auto& o : state_.obstacles) {
                    if (o.id == oid) o.center = pose;
                }
            }
        }
    }

    state_.step += 1;

    StepResult result;
    result.feedback.step = state_.step;
    result.feedback.state_updates = observe_all();
    result.feedback.conflicts = std::move(conflicts);
    for (const auto& p : pending) {
        SkillRecord rec;
        rec.agent = p.agent;
        rec.verb = p.inv.verb;
        rec.success = p.outcome.success;
        rec.failure_reason = p.outcome.failure_reason;
        rec.diagnostic = p.outcome.diagnostic;
        result.records.push_back(std::move(rec));
    }
    return result;
}

nlohmann::json to_json(const Pose2D& p) {
    return nlohmann::json{{"x", p.x}, {"y", p.y}, {"heading", p.heading}};
}

Pose2D pose_from_json(const nlohmann::json& j) {
    return Pose2D(j.at("x").get<double>(), j.at("y").get<double>(),
                  j.value("heading", 0.0));
}

nlohmann::json to_json(const Observation& o) {
    nlohmann::json agents = nlohmann::json::array();
    for (const auto& a : o.visible_agents) {
        agents.push_back({{"id", a.id}, {"pose", to_json(a.pose)}});
    }
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : o.visible_components) {
        comps.push_back(
            {{"id", c.id}, {"pose", to_json(c.pose)}, {"attached", c.attached}});
    }
    return nlohmann::json{{"observer", o.observer},
                          {"visible_agents", agents},
                          {"visible_components", comps},
                          {"self", {{"id", o.self_state.id},
                                    {"name", o.self_state.name},
                                    {"kind", to_string(o.self_state.kind)},
                                    {"pose", to_json(o.self_state.pose)}}}};
}

nlohmann::json to_json(const ConflictReport& c) {
    return nlohmann::json{{"agents", {c.agent_a, c.agent_b}},
                          {"kind", c.kind == ConflictKind::same_object
                                       ? "same_object"
                                       : "path_overlap"},
                          {"detail", c.detail}};
}

nlohmann::json to_json(const EnvFeedback& f) {
    nlohmann::json updates = nlohmann::json::array();
    for (const auto& o : f.state_updates) updates.push_back(to_json(o));
    nlohmann::json conflicts = nlohmann::json::array();
    for (const auto& c : f.conflicts) conflicts.push_back(to_json(c));
    return nlohmann::json{
        {"step", f.step}, {"state_updates", updates}, {"conflicts", conflicts}};
}

nlohmann::json World::state_to_json() const {
    nlohmann::json agents = nlohmann::json::array();
    for (const auto& a : state_.agents) {
        nlohmann::json ja{{"id", a.id},
                          {"name", a.name},
                          {"kind", to_string(a.kind)},
                          {"pose", to_json(a.pose)},
                          {"busy", a.busy}};
        if (a.holding) ja["holding"] = *a.holding;
        if (a.kind == AgentKind::arm) ja["reach"] = a.reach;
        agents.push_back(std::move(ja));
    }
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : state_.components) {
        nlohmann::json jc{{"id", c.id},
                          {"name", c.name},
                          {"pose", to_json(c.pose)},
                          {"attached", c.attached}};
        if (c.carrier) jc["carrier"] = *c.carrier;
        comps.push_back(std::move(jc));
    }
    nlohmann::json obstacles = nlohmann::json::array();
    for (const auto& o : state_.obstacles) {
        obstacles.push_back({{"id", o.id},
                             {"name", o.name},
                             {"center", to_json(o.center)},
                             {"half_extents", {o.half_x, o.half_y}},
                             {"kind", to_string(o.kind)}});
    }
    return nlohmann::json{{"agents", agents},
                          {"components", comps},
                          {"obstacles", obstacles},
                          {"step", state_.step},
                          {"rng_seed", state_.rng_seed}};
}

WorldState World::state_from_json(const nlohmann::json& j) {
    WorldState s;
    s.step = j.at("step").get<int>();
    s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    for (const auto& ja : j.at("agents")) {
        AgentState a;
        a.id = ja.at("id").get<int>();
        a.name = ja.at("name").get<std::string>();
        const std::string kind = ja.at("kind").get<std::string>();
        a.kind = kind == "arm" ? AgentKind::arm
                               : (kind == "agv" ? AgentKind::agv : AgentKind::humanoid);
        a.pose = pose_from_json(ja.at("pose"));
        a.busy = ja.value("busy", false);
        if (ja.contains("holding")) a.holding = ja["holding"].get<int>();
        if (ja.contains("reach")) a.reach = ja["reach"].get<double>();
        s.agents.push_back(std::move(a));
    }
    for (const auto& jc : j.at("components")) {
        ComponentState c;
        c.id = jc.at("id").get<int>();
        c.name = jc.at("name").get<std::string>();
        c.pose = pose_from_json(jc.at("pose"));
        c.attached = jc.value("attached", false);
        if (jc.contains("carrier")) c.carrier = jc["carrier"].get<int>();
        s.components.push_back(std::move(c));
    }
    for (const auto& jo : j.at("obstacles")) {
        Obstacle o;
        o.id = jo.at("id").get<int>();
        o.name = jo.at("name").get<std::string>();
        o.center = pose_from_json(jo.at("center"));
        o.half_x = jo.at("half_extents").at(0).get<double>();
        o.half_y = jo.at("half_extents").at(1).get<double>();
        o.kind = jo.at("kind").get<std::string>() == "wall" ? ObstacleKind::wall
                                                            : ObstacleKind::blocker;
        s.obstacles.push_back(std::move(o));
    }
    return s;
}

}  // namespace mrc
