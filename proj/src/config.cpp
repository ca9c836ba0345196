#include "mrc/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

namespace mrc {

namespace {

Pose2D slot_at(const Pose2D& arm, double bearing_deg) {
    const double r = 0.75;
    const double th = bearing_deg * std::numbers::pi / 180.0;
    return Pose2D(arm.x + r * std::cos(th), arm.y + r * std::sin(th));
}

}  // namespace

SceneConfig SceneConfig::defaults() {
    SceneConfig c;

    auto make_anchor = [](const std::string& name, double ax, double ay,
                          std::vector<std::string> comps) {
        AnchorSpec a;
        a.name = name;
        a.position = Pose2D(ax, ay);
        const double sx = ax > 0 ? 1.0 : -1.0;
        const double sy = ay > 0 ? 1.0 : -1.0;
        a.observe_point = Pose2D(sx * 0.8, sy * 7.6);
        a.blocker_position = Pose2D(sx * 3.0, sy * 8.0);
        a.drop_point = Pose2D(sx * 5.3, sy * 4.6);
        a.components = std::move(comps);
        return a;
    };
    c.anchors.push_back(make_anchor("ne", 4.0, 8.0, {"wheel_1"}));
    c.anchors.push_back(make_anchor("nw", -4.0, 8.0, {"wheel_2"}));
    c.anchors.push_back(make_anchor("sw", -4.0, -8.0, {"wheel_3"}));
    c.anchors.push_back(make_anchor("se", 4.0, -8.0, {"trunk", "wheel_4"}));

    const Pose2D arm = c.arm_position;
    c.named_locations["assembly_zone"] = Pose2D(arm.x, arm.y + 0.75);
    c.named_locations["slot_ne"] = slot_at(arm, 60.0);
    c.named_locations["slot_nw"] = slot_at(arm, 120.0);
    c.named_locations["slot_sw"] = slot_at(arm, 235.0);
    c.named_locations["slot_se"] = slot_at(arm, 305.0);
    c.named_locations["slot_e"] = slot_at(arm, 0.0);
    c.named_locations["socket_trunk"] = Pose2D(arm.x, arm.y - 0.6);
    c.named_locations["socket_wheel_1"] = Pose2D(arm.x - 0.3, arm.y - 0.4);
    c.named_locations["socket_wheel_2"] = Pose2D(arm.x + 0.3, arm.y - 0.4);
    c.named_locations["socket_wheel_3"] = Pose2D(arm.x - 0.3, arm.y - 0.75);
    c.named_locations["socket_wheel_4"] = Pose2D(arm.x + 0.3, arm.y - 0.75);
    c.sockets = {{"trunk", "socket_trunk"},
                 {"wheel_1", "socket_wheel_1"},
                 {"wheel_2", "socket_wheel_2"},
                 {"wheel_3", "socket_wheel_3"},
                 {"wheel_4", "socket_wheel_4"}};
    for (const auto& a : c.anchors) {
        c.named_locations["anchor_" + a.name] = a.position;
        c.named_locations["lookout_" + a.name] = a.observe_point;
        c.named_locations["drop_" + a.name] = a.drop_point;
        const double sx = a.position.x > 0 ? 1.0 : -1.0;
        // Close enough for a humanoid pickup, clear of the component itself.
        c.named_locations["approach_" + a.name] =
            Pose2D(a.position.x - sx * 0.45, a.position.y);
        // Within grab range of a blocker parked at blocker_position.
        c.named_locations["blocker_approach_" + a.name] =
            Pose2D(a.blocker_position.x - sx * 0.9, a.blocker_position.y);
    }
    return c;
}

Pose2D SceneConfig::resolve_location(const std::string& name) const {
    auto it = named_locations.find(name);
    if (it == named_locations.end()) {
        throw std::invalid_argument("unknown location: " + name);
    }
    return it->second;
}

const AnchorSpec* SceneConfig::find_anchor(const std::string& name) const {
    for (const auto& a : anchors)
        if (a.name == name) return &a;
    return nullptr;
}

std::map<SkillVerb, double> SkillConfig::default_failure_rates() {
    return {{SkillVerb::move, 0.05},  {SkillVerb::walk, 0.05},
            {SkillVerb::push, 0.10},  {SkillVerb::carry, 0.10},
            {SkillVerb::pick, 0.05},  {SkillVerb::check, 0.0},
            {SkillVerb::wait, 0.0}};
}

double SkillConfig::failure_rate(SkillVerb v) const {
    auto it = failure_rates.find(v);
    return it == failure_rates.end() ? 0.0 : it->second;
}

SkillConfig SkillConfig::defaults() { return SkillConfig{}; }

SkillConfig SkillConfig::no_failures() {
    SkillConfig c;
    for (auto& [verb, rate] : c.failure_rates) rate = 0.0;
    return c;
}

namespace {

Pose2D pose_of(const nlohmann::json& j) {
    return Pose2D(j.at(0).get<double>(), j.at(1).get<double>());
}

}  // namespace

SceneConfig load_scene_config(const std::string& path) {
    SceneConfig c = SceneConfig::defaults();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scene config: " + path);
    nlohmann::json j;
    in >> j;
    if (j.contains("perception_radius")) c.perception_radius = j["perception_radius"];
    if (j.contains("blocking_radius")) c.blocking_radius = j["blocking_radius"];
    if (j.contains("agv_clearance")) c.agv_clearance = j["agv_clearance"];
    if (j.contains("blocked_anchors"))
        c.blocked_anchors = j["blocked_anchors"].get<std::vector<std::string>>();
    if (j.contains("named_locations")) {
        for (auto& [name, p] : j["named_locations"].items())
            c.named_locations[name] = pose_of(p);
    }
    return c;
}

SkillConfig load_skill_config(const std::string& path) {
    SkillConfig c = SkillConfig::defaults();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open skill config: " + path);
    nlohmann::json j;
    in >> j;
    if (j.contains("failure_rates")) {
        for (auto& [verb, rate] : j["failure_rates"].items()) {
            auto v = verb_from_string(verb);
            if (!v) throw std::runtime_error("unknown verb in failure_rates: " + verb);
            c.failure_rates[*v] = rate.get<double>();
        }
    }
    if (j.contains("drive")) {
        const auto& d = j["drive"];
        if (d.contains("v_max")) c.drive.v_max = d["v_max"];
        if (d.contains("omega_max")) c.drive.omega_max = d["omega_max"];
        if (d.contains("dt")) c.drive.dt = d["dt"];
        if (d.contains("lookahead")) c.drive.lookahead = d["lookahead"];
    }
    if (j.contains("rrt")) {
        const auto& r = j["rrt"];
        if (r.contains("step_size")) c.rrt.step_size = r["step_size"];
        if (r.contains("goal_bias")) c.rrt.goal_bias = r["goal_bias"];
        if (r.contains("max_samples")) c.rrt.max_samples = r["max_samples"];
        if (r.contains("rewire_count")) c.rrt.rewire_count = r["rewire_count"];
    }
    if (j.contains("inject_failure")) {
        FailureInjection inj;
        auto v = verb_from_string(j["inject_failure"].at("verb").get<std::string>());
        if (!v) throw std::runtime_error("unknown verb in inject_failure");
        inj.verb = *v;
        inj.occurrence = j["inject_failure"].value("occurrence", 1);
        c.inject_failure = inj;
    }
    return c;
}

}  // namespace mrc
