#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mrc/geometry.hpp"
#include "mrc/types.hpp"

namespace mrc {

/// One corner anchor of the workspace: a component drop site plus the
/// derived observation / blocker / clearing positions used around it.
struct AnchorSpec {
    std::string name;          // ne, nw, sw, se
    Pose2D position;
    Pose2D observe_point;      // where a searching robot can see the anchor
    Pose2D blocker_position;   // where the hard-mode blocker sits
    Pose2D drop_point;         // where cleared blockers are parked
    std::vector<std::string> components;  // component names placed here
};

struct SceneConfig {
    Bounds bounds{-6.0, 6.0, -10.0, 10.0};
    double perception_radius = 5.0;
    double agv_clearance = 0.5;
    double humanoid_clearance_easy = 1.0;
    double humanoid_region_half = 1.5;   // ||.||_inf bound on humanoid start
    Bounds agv_range{-3.0, 3.0, -5.0, 5.0};
    Pose2D arm_position{0.0, -2.0, 0.0};
    double arm_reach = 0.855;
    double blocking_radius = 1.2;        // blocker within this of a component blocks it

    std::vector<AnchorSpec> anchors;
    std::map<std::string, Pose2D> named_locations;  // sockets, slots, zones, ...
    std::map<std::string, std::string> sockets;     // component name -> socket name

    /// Anchors that receive a blocker in the hard setting.
    std::vector<std::string> blocked_anchors{"nw", "sw", "se"};

    static SceneConfig defaults();
    Pose2D resolve_location(const std::string& name) const;
    const AnchorSpec* find_anchor(const std::string& name) const;
};

struct RrtConfig {
    double step_size = 0.3;
    double goal_bias = 0.1;
    int max_samples = 5000;
    int rewire_count = 32;
    double collision_resolution = 0.1;
    double goal_tolerance = 0.1;
};

struct DriveConfig {
    double v_max = 1.0;
    double omega_max = 2.0;
    double dt = 0.05;
    double lookahead = 0.3;
    double goal_tolerance = 0.1;
    double cross_track_limit = 1.0;
};

struct ImpedanceConfig {
    double kp = 5.0;
    double dt = 0.01;
    int coarse_steps = 2000;
    int fine_steps = 2000;
    double gripper_threshold = 0.05;  // coarse phase gate
    double grasp_radius = 0.03;       // fine phase gate
};

/// Forces the n-th otherwise-successful execution of `verb` to fail,
/// for failure-recovery experiments.
struct FailureInjection {
    SkillVerb verb = SkillVerb::move;
    int occurrence = 1;
};

struct SkillConfig {
    RrtConfig rrt;
    DriveConfig drive;
    ImpedanceConfig impedance;
    double magnet_range = 0.03;
    double pickup_radius = 0.5;
    double conflict_distance = 0.5;
    std::map<SkillVerb, double> failure_rates = default_failure_rates();
    std::optional<FailureInjection> inject_failure;

    static std::map<SkillVerb, double> default_failure_rates();
    double failure_rate(SkillVerb v) const;
    static SkillConfig defaults();
    static SkillConfig no_failures();
};

struct VerifyConfig {
    double capability_threshold = 0.5;  // tau_c
    int deferred_retry_budget = 3;
};

/// Load overrides from a JSON config file on top of built-in defaults.
SceneConfig load_scene_config(const std::string& path);
SkillConfig load_skill_config(const std::string& path);

}  // namespace mrc
