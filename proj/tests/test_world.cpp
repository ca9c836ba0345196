#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "mrc/world.hpp"

using namespace mrc;

namespace {

const AgentState& agent(const World& w, int id) {
    const AgentState* a = w.state().find_agent(id);
    REQUIRE(a != nullptr);
    return *a;
}

}  // namespace

TEST_CASE("init_scene lays out the easy benchmark scene") {
    World w = World::init_scene(11, Difficulty::easy);
    const WorldState& s = w.state();

    REQUIRE(s.agents.size() == 5);
    CHECK(agent(w, 1).kind == AgentKind::arm);
    CHECK(agent(w, 1).pose == Pose2D(0.0, -2.0));
    CHECK(agent(w, 1).reach == doctest::Approx(0.855));
    for (int id : {2, 3, 4}) {
        const AgentState& a = agent(w, id);
        CHECK(a.kind == AgentKind::agv);
        CHECK(a.pose.x >= -3.0);
        CHECK(a.pose.x <= 3.0);
        CHECK(a.pose.y >= -5.0);
        CHECK(a.pose.y <= 5.0);
    }
    const AgentState& hum = agent(w, 5);
    CHECK(hum.kind == AgentKind::humanoid);
    CHECK(std::max(std::abs(hum.pose.x), std::abs(hum.pose.y)) <= 1.5);
    // Easy spawn keeps 1 m clearance to the AGVs.
    for (int id : {2, 3, 4}) {
        CHECK(distance(hum.pose, agent(w, id).pose) >= 1.0);
    }

    REQUIRE(s.components.size() == 5);
    auto comp = [&](int id) {
        const ComponentState* c = s.find_component(id);
        REQUIRE(c != nullptr);
        return *c;
    };
    CHECK(comp(10).name == "wheel_1");
    CHECK(comp(10).pose == Pose2D(4.0, 8.0));
    CHECK(comp(11).name == "wheel_2");
    CHECK(comp(11).pose == Pose2D(-4.0, 8.0));
    CHECK(comp(12).name == "wheel_3");
    CHECK(comp(12).pose == Pose2D(-4.0, -8.0));
    CHECK(comp(13).name == "wheel_4");
    CHECK(comp(13).pose == Pose2D(4.0, -8.0));
    CHECK(comp(14).name == "trunk");
    CHECK(comp(14).pose == Pose2D(4.0, -8.0));

    // Four corner walls, no blockers on easy.
    int walls = 0, blockers = 0;
    for (const auto& o : s.obstacles) {
        if (o.kind == ObstacleKind::wall) ++walls;
        if (o.kind == ObstacleKind::blocker) ++blockers;
    }
    CHECK(walls == 4);
    CHECK(blockers == 0);
    const Obstacle* wall = s.find_obstacle("wall_se");
    REQUIRE(wall != nullptr);
    CHECK(wall->center == Pose2D(4.5, -6.5));
    CHECK(wall->half_x == doctest::Approx(2.5));
    CHECK(wall->half_y == doctest::Approx(0.5));
}

TEST_CASE("hard difficulty adds blockers at the configured anchors") {
    SceneConfig scene = SceneConfig::defaults();
    scene.blocked_anchors = {"nw", "sw", "se"};
    World w = World::init_scene(33, Difficulty::hard, scene);
    std::vector<const Obstacle*> blockers;
    for (const auto& o : w.state().obstacles) {
        if (o.kind == ObstacleKind::blocker) blockers.push_back(&o);
    }
    REQUIRE(blockers.size() == 3);
    CHECK(blockers[0]->id == 20);
    CHECK(blockers[0]->name == "blocker_1");
    CHECK(blockers[0]->center == Pose2D(-3.0, 8.0));   // nw
    CHECK(blockers[1]->center == Pose2D(-3.0, -8.0));  // sw
    CHECK(blockers[2]->center == Pose2D(3.0, -8.0));   // se
    for (const auto* b : blockers) {
        CHECK(b->half_x == doctest::Approx(0.5));
        CHECK(b->half_y == doctest::Approx(0.5));
    }

    // Blocked components are within the blocking radius of their blocker.
    const ComponentState* wheel_2 = w.state().find_component("wheel_2");
    REQUIRE(wheel_2 != nullptr);
    CHECK(w.component_blocked(*wheel_2));
    const ComponentState* wheel_1 = w.state().find_component("wheel_1");
    REQUIRE(wheel_1 != nullptr);
    CHECK(!w.component_blocked(*wheel_1));
}

TEST_CASE("static_obstacles is the single source for walls and blockers") {
    SceneConfig scene = SceneConfig::defaults();
    scene.blocked_anchors = {"ne", "sw", "se"};
    auto easy = static_obstacles(scene, Difficulty::easy);
    CHECK(easy.size() == 4);
    auto hard = static_obstacles(scene, Difficulty::hard);
    CHECK(hard.size() == 7);
    World w = World::init_scene(44, Difficulty::hard, scene);
    REQUIRE(w.state().obstacles.size() == hard.size());
    for (std::size_t i = 0; i < hard.size(); ++i) {
        CHECK(w.state().obstacles[i].id == hard[i].id);
        CHECK(w.state().obstacles[i].center == hard[i].center);
    }
}

TEST_CASE("init_scene is deterministic per seed") {
    World a = World::init_scene(7, Difficulty::easy);
    World b = World::init_scene(7, Difficulty::easy);
    World c = World::init_scene(8, Difficulty::easy);
    CHECK(a.state_to_json() == b.state_to_json());
    CHECK(a.state_to_json() != c.state_to_json());
}

TEST_CASE("observation honors the perception radius") {
    World w = World::init_scene(11, Difficulty::easy);
    Observation obs = w.observe(1);  // arm at the center
    CHECK(obs.observer == 1);
    for (const auto& a : obs.visible_agents) {
        CHECK(distance(a.pose, w.state().find_agent(1)->pose) <= 5.0);
    }
    // Corner components sit ~9 m from the arm: outside the radius.
    for (const auto& c : obs.visible_components) {
        CHECK(distance(c.pose, w.state().find_agent(1)->pose) <= 5.0);
    }
    CHECK(obs.visible_components.empty());
    CHECK_THROWS_AS(w.observe(42), std::invalid_argument);
    CHECK(w.observe_all().size() == 5);
}

TEST_CASE("paths_overlap flags genuine crossings only") {
    auto line = [](Pose2D a, Pose2D b) {
        return std::vector<Pose2D>{a, b};
    };
    // Perpendicular crossing at the midpoint.
    CHECK(paths_overlap(line({-2, 0}, {2, 0}), line({0, -2}, {0, 2}), 0.5));
    // Far-apart parallels never meet.
    CHECK(!paths_overlap(line({-2, 0}, {2, 0}), line({-2, 3}, {2, 3}), 0.5));
    // Departing from adjacent starts: endpoint distance equals the minimum,
    // so no conflict is declared.
    CHECK(!paths_overlap(line({0, 0}, {4, 0}), line({0.3, 0}, {4.3, 0}), 0.5));
    // Arriving next to each other likewise.
    CHECK(!paths_overlap(line({-4, 0.3}, {0, 0.3}), line({-4, 0}, {0, 0}), 0.5));
    // Empty trajectories cannot conflict.
    CHECK(!paths_overlap({}, line({0, 0}, {1, 0}), 0.5));
}

TEST_CASE("step executes verified invocations and reports per-agent records") {
    SkillConfig skills = SkillConfig::no_failures();
    World w = World::init_scene(11, Difficulty::easy, SceneConfig::defaults(), skills);

    SkillInvocation move;
    move.agent = 2;
    move.verb = SkillVerb::move;
    move.location = w.scene().resolve_location("lookout_ne");
    move.location_name = "lookout_ne";
    StepResult r = w.step({{2, move}});
    CHECK(r.feedback.step == 1);
    CHECK(w.state().step == 1);
    REQUIRE(r.records.size() == 5);  // absent agents wait
    int executed = 0;
    for (const auto& rec : r.records) {
        if (rec.agent == 2) {
            CHECK(rec.verb == SkillVerb::move);
            CHECK(rec.success);
            ++executed;
        } else {
            CHECK(rec.verb == SkillVerb::wait);
        }
    }
    CHECK(executed == 1);
    CHECK(distance(w.state().find_agent(2)->pose,
                   w.scene().resolve_location("lookout_ne")) <= 0.2);
}

TEST_CASE("two agents targeting one object raise a same-object conflict") {
    SkillConfig skills = SkillConfig::no_failures();
    World w = World::init_scene(11, Difficulty::easy, SceneConfig::defaults(), skills);

    auto push = [&](int agent) {
        SkillInvocation inv;
        inv.agent = agent;
        inv.verb = SkillVerb::push;
        inv.object = 10;
        inv.location = w.scene().resolve_location("slot_ne");
        return inv;
    };
    StepResult r = w.step({{2, push(2)}, {3, push(3)}});
    REQUIRE(r.feedback.conflicts.size() == 1);
    CHECK(r.feedback.conflicts[0].kind == ConflictKind::same_object);
    for (const auto& rec : r.records) {
        if (rec.agent == 2 || rec.agent == 3) {
            CHECK(!rec.success);
            CHECK(rec.failure_reason == FailureReason::conflict);
        }
    }
    // The component did not move.
    CHECK(w.state().find_component(10)->pose == Pose2D(4.0, 8.0));
}

TEST_CASE("assembly completes when all five components are attached") {
    World w = World::init_scene(11, Difficulty::easy);
    CHECK(!w.check_assembly_complete());
    WorldState s = w.state();
    for (auto& c : s.components) c.attached = true;
    World done(w.scene(), w.skills(), s);
    CHECK(done.check_assembly_complete());
}

TEST_CASE("world state survives a JSON round trip") {
    World w = World::init_scene(22, Difficulty::hard);
    nlohmann::json j = w.state_to_json();
    WorldState restored = World::state_from_json(j);
    World w2(w.scene(), w.skills(), restored);
    CHECK(w2.state_to_json() == j);
    CHECK(restored.agents.size() == w.state().agents.size());
    CHECK(restored.components.size() == w.state().components.size());
    CHECK(restored.obstacles.size() == w.state().obstacles.size());
    CHECK(restored.rng_seed == w.state().rng_seed);
}
