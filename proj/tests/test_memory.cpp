#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mrc/memory.hpp"
#include "mrc/rng.hpp"

using namespace mrc;

namespace {

DialogueTurn turn(int cycle, Speaker s, int id, const std::string& text) {
    return DialogueTurn{cycle, s, id, text};
}

EnvFeedback env_at(int step) {
    EnvFeedback e;
    e.step = step;
    return e;
}

}  // namespace

TEST_CASE("planner context window keeps the five most recent turns") {
    ContextMemory mem;
    mem.record(env_at(0));
    for (int i = 1; i <= 12; ++i) {
        mem.record(turn(1, Speaker::executor, 2, "turn " + std::to_string(i)));
    }
    auto ctx = mem.context_for_planner();
    REQUIRE(ctx.recent_turns.size() == 5);
    for (int i = 0; i < 5; ++i) {
        CHECK(ctx.recent_turns[i].content == "turn " + std::to_string(8 + i));
    }
}

TEST_CASE("planner context requires an initial environment snapshot") {
    ContextMemory mem;
    CHECK_THROWS_AS(mem.context_for_planner(), std::runtime_error);
    mem.record(env_at(0));
    CHECK_NOTHROW(mem.context_for_planner());
}

TEST_CASE("cycle regression is rejected") {
    ContextMemory mem;
    mem.record(env_at(0));
    mem.record(turn(3, Speaker::general_planner, 0, "plan"));
    CHECK_THROWS_AS(mem.record(turn(2, Speaker::executor, 1, "late")),
                    std::invalid_argument);
    CHECK_THROWS_AS(mem.record(AgentFeedback{1, 2, true, "late"}),
                    std::invalid_argument);
    CHECK_NOTHROW(mem.record(turn(3, Speaker::executor, 1, "same cycle ok")));
}

TEST_CASE("agent feedback window covers only entries since the last proposal") {
    ContextMemory mem;
    mem.record(env_at(0));
    mem.record(AgentFeedback{2, 1, false, "before first proposal"});
    mem.record(turn(1, Speaker::general_planner, 0, "proposal A"));
    mem.record(AgentFeedback{3, 1, false, "after A"});
    mem.record(AgentFeedback{4, 1, true, "also after A"});
    auto ctx = mem.context_for_planner();
    REQUIRE(ctx.recent_agent_feedback.size() == 2);
    CHECK(ctx.recent_agent_feedback[0].agent == 3);
    CHECK(ctx.recent_agent_feedback[1].agent == 4);

    mem.record(turn(2, Speaker::general_planner, 0, "proposal B"));
    CHECK(mem.context_for_planner().recent_agent_feedback.empty());
}

TEST_CASE("latest environment feedback wins") {
    ContextMemory mem;
    mem.record(env_at(0));
    EnvFeedback later;
    later.step = 2;
    later.conflicts.push_back({2, 3, ConflictKind::path_overlap, "paths cross"});
    mem.record(later);
    auto ctx = mem.context_for_planner();
    CHECK(ctx.latest_env.step == 2);
    REQUIRE(ctx.latest_env.conflicts.size() == 1);
    CHECK(ctx.latest_env.conflicts[0].detail == "paths cross");
}

TEST_CASE("subgroup context filters observations and dialogue by membership") {
    ContextMemory mem;
    EnvFeedback env;
    env.step = 0;
    for (int id : {1, 2, 3, 4, 5}) {
        Observation obs;
        obs.observer = id;
        env.state_updates.push_back(obs);
    }
    mem.record(env);
    mem.record(turn(1, Speaker::general_planner, 0, "plan"));
    mem.record(turn(1, Speaker::subgroup_manager, 1, "g1 orders"));
    mem.record(turn(1, Speaker::subgroup_manager, 2, "g2 orders"));
    mem.record(turn(1, Speaker::executor, 2, "agv report"));
    mem.record(turn(1, Speaker::executor, 5, "humanoid report"));
    mem.set_assignments(1, {{1, {2, 3}}, {2, {1, 4, 5}}});

    auto g1 = mem.context_for_subgroup(1);
    CHECK(g1.members == std::vector<AgentId>{2, 3});
    REQUIRE(g1.observations.size() == 2);
    CHECK(g1.observations[0].observer == 2);
    for (const auto& t : g1.recent_turns) {
        const bool visible = t.speaker == Speaker::general_planner ||
                             (t.speaker == Speaker::subgroup_manager && t.speaker_id == 1) ||
                             (t.speaker == Speaker::executor && t.speaker_id == 2);
        CHECK(visible);
    }
    CHECK_THROWS_AS(mem.context_for_subgroup(9), std::invalid_argument);
}

TEST_CASE("stale assignments from an earlier cycle are not served") {
    ContextMemory mem;
    mem.record(env_at(0));
    mem.set_assignments(1, {{1, {2}}});
    mem.record(turn(2, Speaker::general_planner, 0, "new cycle"));
    CHECK_THROWS_AS(mem.context_for_subgroup(1), std::invalid_argument);
}

TEST_CASE("ablation flags empty the matching context sections") {
    SUBCASE("no_history") {
        ContextMemory mem(AblationFlags{true, false, false});
        mem.record(env_at(0));
        mem.record(turn(1, Speaker::general_planner, 0, "plan"));
        mem.record(turn(1, Speaker::executor, 2, "report"));
        mem.set_assignments(1, {{1, {2}}});
        CHECK(mem.context_for_planner().recent_turns.empty());
        CHECK(mem.context_for_subgroup(1).recent_turns.empty());
    }
    SUBCASE("no_feedback") {
        ContextMemory mem(AblationFlags{false, true, false});
        EnvFeedback env;
        env.step = 0;
        env.conflicts.push_back({2, 3, ConflictKind::same_object, "clash"});
        mem.record(env);
        mem.record(turn(1, Speaker::general_planner, 0, "plan"));
        mem.record(AgentFeedback{2, 1, false, "failed"});
        auto ctx = mem.context_for_planner();
        CHECK(ctx.recent_agent_feedback.empty());
        CHECK(ctx.latest_env.conflicts.empty());
    }
}

TEST_CASE("random insertion sequences never overflow the window") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        ContextMemory mem;
        mem.record(env_at(0));
        int cycle = 1;
        const int n = 1 + static_cast<int>(rng.uniform_index(100));
        int turns_recorded = 0;
        for (int i = 0; i < n; ++i) {
            const auto kind = rng.uniform_index(3);
            if (kind == 0) {
                mem.record(turn(cycle, Speaker::executor, 2, "t" + std::to_string(i)));
                ++turns_recorded;
            } else if (kind == 1) {
                mem.record(AgentFeedback{2, cycle, true, "fb"});
            } else if (rng.uniform() < 0.3) {
                ++cycle;
                mem.record(env_at(cycle));
            }
        }
        auto ctx = mem.context_for_planner();
        CHECK(ctx.recent_turns.size() <= 5);
        CHECK(ctx.recent_turns.size() ==
              std::min<std::size_t>(5, static_cast<std::size_t>(turns_recorded)));
        if (!ctx.recent_turns.empty()) {
            CHECK(ctx.recent_turns.back().content == mem.turns().back().content);
        }
    }
}

TEST_CASE("memory serializes its full record") {
    ContextMemory mem;
    mem.record(env_at(0));
    mem.record(turn(1, Speaker::general_planner, 0, "plan"));
    mem.record(AgentFeedback{2, 1, true, "ok"});
    auto j = mem.to_json();
    CHECK(j.at("turns").size() == 1);
    CHECK(j.at("agent_feedback").size() == 1);
    CHECK(j.at("env_feedback").size() == 1);
    CHECK(j.at("ablations").at("no_history") == false);
}
