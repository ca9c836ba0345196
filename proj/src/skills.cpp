#include "mrc/skills.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mrc {

ImpedanceState ImpedanceState::with_default_gains(double kp) {
    ImpedanceState s;
    s.kp = kp;
    s.kv = 2.0 * std::sqrt(kp);
    return s;
}

bool point_collision_free(double x, double y, const std::vector<Obstacle>& obstacles) {
    for (const auto& o : obstacles) {
        if (o.footprint().contains(x, y)) return false;
    }
    return true;
}

bool segment_collision_free(const Pose2D& a, const Pose2D& b,
                            const std::vector<Obstacle>& obstacles,
                            double resolution) {
    const double len = distance(a, b);
    const int n = std::max(1, static_cast<int>(std::ceil(len / resolution)));
    for (int i = 0; i <= n; ++i) {
        const double t = static_cast<double>(i) / n;
        const double x = a.x + (b.x - a.x) * t;
        const double y = a.y + (b.y - a.y) * t;
        if (!point_collision_free(x, y, obstacles)) return false;
    }
    return true;
}

bool path_collision_free(const Path& path, const std::vector<Obstacle>& obstacles,
                         double resolution) {
    if (path.waypoints.empty()) return true;
    for (std::size_t i = 0; i + 1 < path.waypoints.size(); ++i) {
        if (!segment_collision_free(path.waypoints[i], path.waypoints[i + 1],
                                    obstacles, resolution)) {
            return false;
        }
    }
    return true;
}

double path_length(const std::vector<Pose2D>& waypoints) {
    double len = 0.0;
    for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
        len += distance(waypoints[i], waypoints[i + 1]);
    }
    return len;
}

namespace {

struct TreeNode {
    Pose2D pose;
    int parent = -1;
    double cost = 0.0;
};

std::vector<int> k_nearest(const std::vector<TreeNode>& nodes, const Pose2D& p, int k) {
    std::vector<int> idx(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) idx[i] = static_cast<int>(i);
    const int kk = std::min<int>(k, static_cast<int>(nodes.size()));
    std::partial_sort(idx.begin(), idx.begin() + kk, idx.end(), [&](int a, int b) {
        return distance(nodes[a].pose, p) < distance(nodes[b].pose, p);
    });
    idx.resize(kk);
    return idx;
}

/// Greedy shortcutting: replace waypoint runs by direct segments where free.
std::vector<Pose2D> shortcut(std::vector<Pose2D> pts,
                             const std::vector<Obstacle>& obstacles,
                             double resolution) {
    for (int pass = 0; pass < 2; ++pass) {
        std::vector<Pose2D> out;
        std::size_t i = 0;
        out.push_back(pts.front());
        while (i + 1 < pts.size()) {
            std::size_t j = pts.size() - 1;
            while (j > i + 1 &&
                   !segment_collision_free(pts[i], pts[j], obstacles, resolution)) {
                --j;
            }
            out.push_back(pts[j]);
            i = j;
        }
        pts = std::move(out);
    }
    return pts;
}

}  // namespace

std::optional<Path> rrt_plan(const Pose2D& start, const Pose2D& goal,
                             const std::vector<Obstacle>& obstacles,
                             const Bounds& bounds, const RrtConfig& cfg, Rng& rng) {
    if (!point_collision_free(start.x, start.y, obstacles)) {
        throw std::invalid_argument("rrt_plan: start in collision");
    }
    if (!point_collision_free(goal.x, goal.y, obstacles)) {
        throw std::invalid_argument("rrt_plan: goal in collision");
    }

    // Trivial case: direct segment.
    if (segment_collision_free(start, goal, obstacles, cfg.collision_resolution)) {
        Path p;
        p.waypoints = {start, goal};
        p.length = distance(start, goal);
        return p;
    }

    std::vector<TreeNode> nodes;
    nodes.push_back({start, -1, 0.0});
    int goal_node = -1;

    for (int it = 0; it < cfg.max_samples; ++it) {
        Pose2D sample = (rng.uniform() < cfg.goal_bias)
                            ? goal
                            : Pose2D(rng.uniform(bounds.xmin, bounds.xmax),
                                     rng.uniform(bounds.ymin, bounds.ymax));

        // Nearest node, steer by one step.
        int nearest = 0;
        double best = std::numeric_limits<double>::max();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const double d = distance(nodes[i].pose, sample);
            if (d < best) {
                best = d;
                nearest = static_cast<int>(i);
            }
        }
        if (best < 1e-9) continue;
        const double t = std::min(1.0, cfg.step_size / best);
        Pose2D candidate(nodes[nearest].pose.x + (sample.x - nodes[nearest].pose.x) * t,
                         nodes[nearest].pose.y + (sample.y - nodes[nearest].pose.y) * t);
        if (!point_collision_free(candidate.x, candidate.y, obstacles)) continue;

        // Choose the cheapest feasible parent among the k nearest, then rewire.
        auto neighbors = k_nearest(nodes, candidate, cfg.rewire_count);
        int parent = -1;
        double parent_cost = std::numeric_limits<double>::max();
        for (int n : neighbors) {
            const double c = nodes[n].cost + distance(nodes[n].pose, candidate);
            if (c < parent_cost &&
                segment_collision_free(nodes[n].pose, candidate, obstacles,
                                       cfg.collision_resolution)) {
                parent = n;
                parent_cost = c;
            }
        }
        if (parent < 0) continue;
        const int new_idx = static_cast<int>(nodes.size());
        nodes.push_back({candidate, parent, parent_cost});
        for (int n : neighbors) {
            const double through = parent_cost + distance(candidate, nodes[n].pose);
            if (through + 1e-12 < nodes[n].cost &&
                segment_collision_free(candidate, nodes[n].pose, obstacles,
                                       cfg.collision_resolution)) {
                nodes[n].parent = new_idx;
                nodes[n].cost = through;
            }
        }
        if (distance(candidate, goal) <= cfg.goal_tolerance) {
            goal_node = new_idx;
            break;
        }
    }
    if (goal_node < 0) return std::nullopt;

    std::vector<Pose2D> pts;
    for (int n = goal_node; n >= 0; n = nodes[n].parent) pts.push_back(nodes[n].pose);
    std::reverse(pts.begin(), pts.end());
    if (distance(pts.back(), goal) > 1e-9 &&
        segment_collision_free(pts.back(), goal, obstacles, cfg.collision_resolution)) {
        pts.push_back(goal);
    }
    pts = shortcut(std::move(pts), obstacles, cfg.collision_resolution);

    Path p;
    p.waypoints = std::move(pts);
    p.length = path_length(p.waypoints);
    return p;
}

namespace {

struct DensePath {
    std::vector<Pose2D> pts;
    std::vector<double> arc;  // cumulative length
    double total = 0.0;

    Pose2D at_arc(double s) const {
        s = std::clamp(s, 0.0, total);
        auto it = std::lower_bound(arc.begin(), arc.end(), s);
        if (it == arc.begin()) return pts.front();
        const std::size_t j = static_cast<std::size_t>(it - arc.begin());
        const double s0 = arc[j - 1];
        const double s1 = arc[j];
        const double t = s1 > s0 ? (s - s0) / (s1 - s0) : 0.0;
        return lerp_along(pts[j - 1], pts[j], t);
    }
};

DensePath densify(const std::vector<Pose2D>& waypoints, double spacing) {
    DensePath d;
    if (waypoints.empty()) return d;
    d.pts.push_back(waypoints.front());
    d.arc.push_back(0.0);
    for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
        const double seg = distance(waypoints[i], waypoints[i + 1]);
        const int n = std::max(1, static_cast<int>(std::ceil(seg / spacing)));
        for (int k = 1; k <= n; ++k) {
            const double t = static_cast<double>(k) / n;
            d.pts.push_back(lerp_along(waypoints[i], waypoints[i + 1], t));
            d.arc.push_back(d.arc.back() + seg / n);
        }
    }
    d.total = d.arc.back();
    return d;
}

}  // namespace

std::optional<std::vector<Pose2D>> follow_path_diff_drive(const Pose2D& pose,
                                                          const Path& path,
                                                          const DriveConfig& cfg) {
    if (path.waypoints.empty()) return std::vector<Pose2D>{pose};
    if (path.waypoints.size() == 1 || path.length < 1e-9) {
        return std::vector<Pose2D>{pose};
    }
    if (distance(pose, path.waypoints.front()) > 0.5) return std::nullopt;

    const DensePath dense = densify(path.waypoints, 0.05);
    Pose2D cur = pose;
    std::vector<Pose2D> traj{cur};
    double progress = 0.0;
    const Pose2D goal = path.waypoints.back();
    const int max_iter =
        static_cast<int>(path.length / (cfg.v_max * cfg.dt)) * 4 + 400;

    for (int it = 0; it < max_iter; ++it) {
        if (distance(cur, goal) <= cfg.goal_tolerance) return traj;

        // Advance progress to the closest dense point in a window ahead.
        double best_d = std::numeric_limits<double>::max();
        double best_s = progress;
        for (double s = progress; s <= std::min(dense.total, progress + 1.0); s += 0.05) {
            const Pose2D p = dense.at_arc(s);
            const double d = distance(cur, p);
            if (d < best_d) {
                best_d = d;
                best_s = s;
            }
        }
        progress = best_s;
        if (best_d > cfg.cross_track_limit) return std::nullopt;

        const Pose2D target = dense.at_arc(std::min(dense.total, progress + cfg.lookahead));
        const double dx = target.x - cur.x;
        const double dy = target.y - cur.y;
        const double dist_t = std::hypot(dx, dy);
        const double alpha = normalize_angle(std::atan2(dy, dx) - cur.heading);

        double v, omega;
        if (std::abs(alpha) > 1.0) {
            // Rotate in place until roughly aligned.
            v = 0.0;
            omega = std::clamp(alpha / cfg.dt, -cfg.omega_max, cfg.omega_max);
        } else {
            const double remaining = dense.total - progress + distance(cur, dense.at_arc(progress));
            v = std::min(cfg.v_max, remaining / cfg.dt);
            const double curvature = dist_t > 1e-6 ? 2.0 * std::sin(alpha) / dist_t : 0.0;
            omega = std::clamp(v * curvature, -cfg.omega_max, cfg.omega_max);
        }
        cur = Pose2D(cur.x + v * std::cos(cur.heading) * cfg.dt,
                     cur.y + v * std::sin(cur.heading) * cfg.dt,
                     cur.heading + omega * cfg.dt);
        traj.push_back(cur);
    }
    return std::nullopt;
}

std::optional<std::vector<Pose2D>> straight_line_delivery(
    const Pose2D& pose, const Pose2D& target,
    const std::vector<Obstacle>& obstacles, double resolution) {
    if (!segment_collision_free(pose, target, obstacles, resolution)) {
        return std::nullopt;
    }
    const double len = distance(pose, target);
    if (len < 1e-12) return std::vector<Pose2D>{pose};
    const int n = static_cast<int>(std::ceil(len / resolution));
    std::vector<Pose2D> traj;
    traj.reserve(n + 1);
    for (int i = 0; i < n; ++i) {
        traj.push_back(lerp_along(pose, target, static_cast<double>(i) / n));
    }
    traj.push_back(lerp_along(pose, target, 1.0));
    traj.back() = Pose2D(target.x, target.y, traj.back().heading);
    return traj;
}

ImpedanceState impedance_track(ImpedanceState state, double target, double dt,
                               int n_steps) {
    if (dt <= 0.0) throw std::invalid_argument("impedance_track: dt must be positive");
    const double kp = state.kp;
    const double kv = state.kv;
    auto accel = [&](double x, double v) { return kp * (target - x) - kv * v; };
    double x = state.position;
    double v = state.velocity;
    for (int i = 0; i < n_steps; ++i) {
        const double k1x = v;
        const double k1v = accel(x, v);
        const double k2x = v + 0.5 * dt * k1v;
        const double k2v = accel(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v);
        const double k3x = v + 0.5 * dt * k2v;
        const double k3v = accel(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v);
        const double k4x = v + dt * k3v;
        const double k4v = accel(x + dt * k3x, v + dt * k3v);
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    state.position = x;
    state.velocity = v;
    return state;
}

bool arm_check(const AgentState& arm, const ComponentState& object) {
    return distance(arm.pose, object.pose) <= arm.reach;
}

SkillOutcome magnetic_attach(ComponentState& component, const Pose2D& socket,
                             double magnet_range) {
    SkillOutcome out;
    if (distance(component.pose, socket) > magnet_range) {
        out.success = false;
        out.failure_reason = FailureReason::infeasible;
        out.diagnostic = "component outside magnetic range of socket";
        return out;
    }
    component.pose = socket;
    component.attached = true;
    component.carrier.reset();
    out.success = true;
    out.attached = true;
    return out;
}

namespace {

/// Run one impedance phase per axis; returns the worst-axis residual error.
double impedance_phase(Pose2D& tool, const Pose2D& target,
                       const ImpedanceConfig& imp, int n_steps) {
    auto sx = ImpedanceState::with_default_gains(imp.kp);
    sx.position = tool.x;
    auto sy = ImpedanceState::with_default_gains(imp.kp);
    sy.position = tool.y;
    sx = impedance_track(sx, target.x, imp.dt, n_steps);
    sy = impedance_track(sy, target.y, imp.dt, n_steps);
    tool = Pose2D(sx.position, sy.position);
    return distance(tool, target);
}

}  // namespace

SkillOutcome arm_pick(const AgentState& arm, const ComponentState& object,
                      const Pose2D& location, const ArmPickContext& ctx,
                      const ImpedanceConfig& imp) {
    SkillOutcome out;
    out.new_agent_pose = arm.pose;
    out.trajectory = {arm.pose};

    if (distance(arm.pose, object.pose) > arm.reach) {
        out.failure_reason = FailureReason::unreachable;
        out.diagnostic = "object " + object.name + " out of reach (" +
                         std::to_string(distance(arm.pose, object.pose)) + " m > " +
                         std::to_string(arm.reach) + " m)";
        return out;
    }
    if (distance(arm.pose, location) > arm.reach) {
        out.failure_reason = FailureReason::infeasible;
        out.diagnostic = "target location out of reach";
        return out;
    }
    if (object.attached || object.carrier.has_value()) {
        out.failure_reason = FailureReason::infeasible;
        out.diagnostic = "object already attached or carried";
        return out;
    }

    // Coarse approach to the gripper-closing threshold, then fine adjustment
    // down to the grasp radius.
    Pose2D tool = arm.pose;
    if (impedance_phase(tool, object.pose, imp, imp.coarse_steps) >
        imp.gripper_threshold) {
        out.failure_reason = FailureReason::infeasible;
        out.diagnostic = "coarse motion did not converge";
        return out;
    }
    if (impedance_phase(tool, object.pose, imp, imp.fine_steps) > imp.grasp_radius) {
        out.failure_reason = FailureReason::infeasible;
        out.diagnostic = "fine adjustment did not converge";
        return out;
    }

    out.success = true;
    out.moved_object = {object.id, location};
    // Attachment fires only when the release point is inside the magnetic
    // range of the component's socket.
    out.attached = distance(location, ctx.socket) <= ctx.magnet_range;
    return out;
}

SkillOutcome humanoid_skill(const AgentState& agent, SkillVerb verb,
                            std::optional<int> object, const Pose2D& target,
                            const WorldState& world, const SkillConfig& cfg,
                            const Bounds& bounds, Rng& rng) {
    SkillOutcome out;
    out.new_agent_pose = agent.pose;
    out.trajectory = {agent.pose};

    std::vector<Obstacle> obstacles = world.obstacles;
    const Obstacle* carried_blocker = nullptr;
    const ComponentState* carried_component = nullptr;

    if (verb == SkillVerb::carry) {
        if (!object) {
            out.failure_reason = FailureReason::infeasible;
            out.diagnostic = "carry requires an object";
            return out;
        }
        if (const ComponentState* c = world.find_component(*object)) {
            if (c->attached) {
                out.failure_reason = FailureReason::infeasible;
                out.diagnostic = "component already attached";
                return out;
            }
            if (agent.holding != c->id &&
                distance(agent.pose, c->pose) > cfg.pickup_radius) {
                out.failure_reason = FailureReason::infeasible;
                out.diagnostic = "object beyond pickup radius";
                return out;
            }
            carried_component = c;
        } else if (const Obstacle* b = world.find_obstacle(*object)) {
            if (b->kind != ObstacleKind::blocker) {
                out.failure_reason = FailureReason::infeasible;
                out.diagnostic = "only blockers can be carried";
                return out;
            }
            const Rect fp = b->footprint();
            const double gap = std::max(
                {std::abs(agent.pose.x - fp.cx) - fp.hx,
                 std::abs(agent.pose.y - fp.cy) - fp.hy, 0.0});
            if (gap > cfg.pickup_radius) {
                out.failure_reason = FailureReason::infeasible;
                out.diagnostic = "blocker beyond pickup radius";
                return out;
            }
            carried_blocker = b;
            // The carried blocker stops being part of the collision space.
            std::erase_if(obstacles, [&](const Obstacle& o) { return o.id == b->id; });
        } else {
            out.failure_reason = FailureReason::infeasible;
            out.diagnostic = "no such object";
            return out;
        }
    }

    std::optional<Path> path;
    try {
        path = rrt_plan(agent.pose, target, obstacles, bounds, cfg.rrt, rng);
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

    const DensePath dense = densify(path->waypoints, 0.1);
    out.trajectory = dense.pts;
    out.new_agent_pose = path->waypoints.back();
    if (carried_component) out.moved_object = {carried_component->id, target};
    if (carried_blocker) out.moved_object = {carried_blocker->id, target};
    if (out.moved_object) {
        // Set the load down at the target and retreat along the planned path
        // until clear of the dropped footprint, so the parked pose stays
        // collision free for the next plan.
        const double clear_cheb = carried_blocker ? 0.6 : 0.0;
        const Pose2D end = dense.pts.back();
        std::size_t pick = dense.pts.size() - 1;
        for (std::size_t i = dense.pts.size(); i-- > 0;) {
            const double back = dense.total - dense.arc[i];
            const double cheb = std::max(std::abs(dense.pts[i].x - end.x),
                                         std::abs(dense.pts[i].y - end.y));
            pick = i;
            if (back >= 0.9 && cheb > clear_cheb) break;
        }
        if (pick + 1 < dense.pts.size()) {
            out.new_agent_pose =
                Pose2D(dense.pts[pick].x, dense.pts[pick].y, end.heading);
            out.trajectory.push_back(out.new_agent_pose);
        }
    }
    out.success = true;
    return out;
}

FailureLayer::FailureLayer(const SkillConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), rng_(seed) {}

SkillOutcome FailureLayer::apply(SkillOutcome outcome, SkillVerb verb) {
    if (!outcome.success) return outcome;
    if (cfg_.inject_failure && cfg_.inject_failure->verb == verb) {
        const int count = ++success_counts_[verb];
        if (count == cfg_.inject_failure->occurrence) {
            outcome.success = false;
            outcome.attached = false;
            outcome.moved_object.reset();
            outcome.failure_reason = FailureReason::stochastic;
            outcome.diagnostic = "injected execution failure";
            return outcome;
        }
    }
    return apply_stochastic_failure(std::move(outcome), verb, rng_, cfg_);
}

SkillOutcome apply_stochastic_failure(SkillOutcome outcome, SkillVerb verb,
                                      Rng& rng, const SkillConfig& cfg) {
    if (!outcome.success) return outcome;
    const double rate = cfg.failure_rate(verb);
    if (rate <= 0.0) return outcome;
    if (rng.uniform() < rate) {
        outcome.success = false;
        outcome.attached = false;
        outcome.moved_object.reset();
        outcome.failure_reason = FailureReason::stochastic;
        outcome.diagnostic = "stochastic execution failure";
    }
    return outcome;
}

}  // namespace mrc
