#pragma once

#include <optional>
#include <vector>

#include "mrc/config.hpp"
#include "mrc/rng.hpp"
#include "mrc/types.hpp"

namespace mrc {

struct Path {
    std::vector<Pose2D> waypoints;
    double length = 0.0;
};

/// Second-order point-mass tracker state (one axis pair).
struct ImpedanceState {
    double position = 0.0;
    double velocity = 0.0;
    double kp = 5.0;
    double kv = 0.0;  // defaults to 2*sqrt(kp) (critical damping)

    static ImpedanceState with_default_gains(double kp);
};

/// True if the straight segment a->b stays clear of every obstacle footprint,
/// sampled at `resolution`.
bool segment_collision_free(const Pose2D& a, const Pose2D& b,
                            const std::vector<Obstacle>& obstacles,
                            double resolution);

bool point_collision_free(double x, double y, const std::vector<Obstacle>& obstacles);

/// Independent re-check of a full path at the given resolution.
bool path_collision_free(const Path& path, const std::vector<Obstacle>& obstacles,
                         double resolution);

double path_length(const std::vector<Pose2D>& waypoints);

/// RRT* in the planar workspace. Deterministic for a fixed rng.
/// Returns nullopt when no path is found within the sample budget.
/// Throws std::invalid_argument when start or goal is in collision.
std::optional<Path> rrt_plan(const Pose2D& start, const Pose2D& goal,
                             const std::vector<Obstacle>& obstacles,
                             const Bounds& bounds, const RrtConfig& cfg, Rng& rng);

/// Unicycle-model pure pursuit along a planned path. Returns the swept
/// trajectory; nullopt when tracking diverges past the cross-track limit.
std::optional<std::vector<Pose2D>> follow_path_diff_drive(const Pose2D& pose,
                                                          const Path& path,
                                                          const DriveConfig& cfg);

/// Final placement leg: straight-line interpolation at the collision
/// resolution, ending exactly at target. Nullopt when the segment collides.
std::optional<std::vector<Pose2D>> straight_line_delivery(
    const Pose2D& pose, const Pose2D& target,
    const std::vector<Obstacle>& obstacles, double resolution);

/// Integrate acceleration = kp*(target - x) - kv*v for n_steps (unit mass,
/// classic RK4).
ImpedanceState impedance_track(ImpedanceState state, double target, double dt,
                               int n_steps);

bool arm_check(const AgentState& arm, const ComponentState& object);

/// Snap a component onto its socket when within the magnetic range.
SkillOutcome magnetic_attach(ComponentState& component, const Pose2D& socket,
                             double magnet_range);

struct ArmPickContext {
    Pose2D socket;           // assembly socket for this component
    double magnet_range = 0.03;
};

SkillOutcome arm_pick(const AgentState& arm, const ComponentState& object,
                      const Pose2D& location, const ArmPickContext& ctx,
                      const ImpedanceConfig& imp);

SkillOutcome humanoid_skill(const AgentState& agent, SkillVerb verb,
                            std::optional<int> object, const Pose2D& target,
                            const WorldState& world, const SkillConfig& cfg,
                            const Bounds& bounds, Rng& rng);

/// Stochastic failure layer; counts successful applications per verb so a
/// configured injection can convert exactly the n-th one.
class FailureLayer {
public:
    FailureLayer(const SkillConfig& cfg, std::uint64_t seed);

    SkillOutcome apply(SkillOutcome outcome, SkillVerb verb);

private:
    SkillConfig cfg_;
    Rng rng_;
    std::map<SkillVerb, int> success_counts_;
};

SkillOutcome apply_stochastic_failure(SkillOutcome outcome, SkillVerb verb,
                                      Rng& rng, const SkillConfig& cfg);

}  // namespace mrc
