#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mrc/command.hpp"
#include "mrc/config.hpp"
#include "mrc/rng.hpp"

using namespace mrc;

namespace {

std::vector<AgentState> team() {
    std::vector<AgentState> agents(5);
    agents[0] = {1, "arm", AgentKind::arm, Pose2D(0, -2), std::nullopt, false, 0.855};
    agents[1] = {2, "agv_1", AgentKind::agv, Pose2D(1, 0)};
    agents[2] = {3, "agv_2", AgentKind::agv, Pose2D(-1, 0)};
    agents[3] = {4, "agv_3", AgentKind::agv, Pose2D(0, 1)};
    agents[4] = {5, "humanoid", AgentKind::humanoid, Pose2D(0, 0)};
    return agents;
}

VerifyContext context(const SceneConfig& scene,
                      const std::vector<AgentState>& agents) {
    VerifyContext ctx;
    ctx.agents = agents;
    ctx.scene = &scene;
    for (const auto& a : agents) {
        Observation obs;
        obs.observer = a.id;
        obs.self_state = a;
        obs.visible_components.push_back({10, Pose2D(0.2, -1.8), false});
        ctx.observations.push_back(obs);
    }
    return ctx;
}

}  // namespace

TEST_CASE("parse_command accepts the full grammar") {
    auto r = parse_command({"group 1: agent agv_1(2) [push] wheel_1(10) to slot_ne"});
    REQUIRE(r.command.has_value());
    CHECK(r.command->group == 1);
    REQUIRE(r.command->agents.size() == 1);
    CHECK(r.command->agents[0] == std::pair<std::string, int>("agv_1", 2));
    CHECK(r.command->verb == SkillVerb::push);
    REQUIRE(r.command->object.has_value());
    CHECK(r.command->object->first == "wheel_1");
    CHECK(r.command->object->second == 10);
    CHECK(r.command->location_name == "slot_ne");

    SUBCASE("multiple agents") {
        auto m = parse_command(
            {"group 2: agent agv_1(2), agv_2(3) [move] to lookout_ne"});
        REQUIRE(m.command.has_value());
        CHECK(m.command->agents.size() == 2);
        CHECK(!m.command->object.has_value());
    }
    SUBCASE("coordinate location") {
        auto c = parse_command({"group 1: agent humanoid(5) [walk] to (1.5, -7.25)"});
        REQUIRE(c.command.has_value());
        REQUIRE(c.command->location_pose.has_value());
        CHECK(c.command->location_pose->x == doctest::Approx(1.5));
        CHECK(c.command->location_pose->y == doctest::Approx(-7.25));
    }
    SUBCASE("alternate prepositions and spacing") {
        CHECK(parse_command({"group 1: agent arm(1) [pick] trunk(14) at socket_trunk"})
                  .command.has_value());
        CHECK(parse_command({"  group  3 :  agent  arm ( 1 )  [ check ]  trunk ( 14 )"})
                  .command.has_value());
    }
    SUBCASE("bare wait") {
        auto w = parse_command({"group 1: agent agv_1(2) [wait]"});
        REQUIRE(w.command.has_value());
        CHECK(w.command->verb == SkillVerb::wait);
    }
}

TEST_CASE("parse_command names the failing field") {
    CHECK(parse_command({"agent agv_1(2) [move] to slot_ne"}).error ==
          "missing group field");
    CHECK(parse_command({"group 1: [move] to slot_ne"}).error ==
          "missing agent field");
    CHECK(parse_command({"group 1: agent agv_1(2) move to slot_ne"}).error ==
          "missing verb field");
    CHECK(parse_command({"group 1: agent agv_1(2) [teleport] to slot_ne"}).error ==
          "unknown verb: teleport");
    CHECK(parse_command({"group 1: agent agv_1(2), agv_2(2) [wait]"}).error ==
          "duplicate agent id in command");
    CHECK(parse_command({"group 1: agent agv_1(2) [move] to"})
              .error.rfind("malformed location", 0) == 0);
    CHECK(!parse_command({""}).command.has_value());
    CHECK(!parse_command({"complete nonsense"}).command.has_value());
}

TEST_CASE("render and parse are inverse on randomized commands") {
    Rng rng(2024);
    const std::vector<std::string> names = {"arm", "agv_1", "agv_2", "humanoid"};
    const std::vector<std::string> locs = {"slot_ne", "lookout_sw", "drop_se"};
    const std::vector<SkillVerb> verbs = {SkillVerb::check, SkillVerb::pick,
                                          SkillVerb::move,  SkillVerb::push,
                                          SkillVerb::walk,  SkillVerb::carry,
                                          SkillVerb::wait};
    for (int i = 0; i < 2000; ++i) {
        StructuredCommand cmd;
        cmd.group = 1 + static_cast<int>(rng.uniform_index(4));
        const int n_agents = 1 + static_cast<int>(rng.uniform_index(3));
        for (int k = 0; k < n_agents; ++k) {
            cmd.agents.emplace_back(names[rng.uniform_index(names.size())],
                                    10 * (k + 1) + static_cast<int>(rng.uniform_index(9)));
        }
        cmd.verb = verbs[rng.uniform_index(verbs.size())];
        if (rng.uniform() < 0.6) {
            cmd.object = {"wheel_1", 10 + static_cast<int>(rng.uniform_index(5))};
        }
        if (rng.uniform() < 0.5) {
            cmd.location_name = locs[rng.uniform_index(locs.size())];
        } else if (rng.uniform() < 0.7) {
            cmd.location_pose = Pose2D(rng.uniform(-6.0, 6.0), rng.uniform(-10.0, 10.0));
        }
        auto round = parse_command({render(cmd)});
        REQUIRE(round.command.has_value());
        CHECK(*round.command == cmd);
    }
}

TEST_CASE("verify_capability scores verb fit in rule mode") {
    auto agents = team();
    StructuredCommand cmd;
    cmd.group = 1;
    cmd.agents = {{"agv_1", 2}};
    cmd.verb = SkillVerb::move;
    auto ok = verify_capability(cmd, agents, 0.5);
    CHECK(ok.pass);
    CHECK(ok.score == doctest::Approx(1.0));

    cmd.verb = SkillVerb::walk;  // an AGV cannot walk
    auto bad = verify_capability(cmd, agents, 0.5);
    CHECK(!bad.pass);
    CHECK(bad.score == doctest::Approx(0.0));
    CHECK(bad.category == FailureCategory::incorrect_agent_selection);

    SUBCASE("name/id mismatch is caught") {
        cmd.verb = SkillVerb::move;
        cmd.agents = {{"agv_2", 2}};
        auto r = verify_capability(cmd, agents, 0.5);
        CHECK(!r.pass);
        CHECK(r.diagnostic.find("mismatch") != std::string::npos);
    }
    SUBCASE("external scorer is clamped and compared against tau_c") {
        cmd.verb = SkillVerb::move;
        cmd.agents = {{"agv_1", 2}};
        auto high = verify_capability(cmd, agents, 0.5,
                                      [](const StructuredCommand&) { return 3.0; });
        CHECK(high.pass);
        CHECK(high.score == doctest::Approx(1.0));
        auto low = verify_capability(cmd, agents, 0.5,
                                     [](const StructuredCommand&) { return 0.3; });
        CHECK(!low.pass);
        CHECK(low.score == doctest::Approx(0.3));
    }
}

TEST_CASE("select_action resolves locations and binds invocations") {
    SceneConfig scene = SceneConfig::defaults();
    auto ctx = context(scene, team());

    StructuredCommand cmd;
    cmd.group = 1;
    cmd.agents = {{"agv_1", 2}};
    cmd.verb = SkillVerb::move;
    cmd.location_name = "lookout_ne";
    auto r = select_action(cmd, ctx);
    REQUIRE(r.pass);
    REQUIRE(r.invocations.size() == 1);
    CHECK(r.invocations[0].agent == 2);
    CHECK(r.invocations[0].location->x ==
          doctest::Approx(scene.resolve_location("lookout_ne").x));

    cmd.location_name = "narnia";
    CHECK(!select_action(cmd, ctx).pass);

    cmd.location_name = "lookout_ne";
    cmd.verb = SkillVerb::carry;  // AGVs cannot carry
    auto mis = select_action(cmd, ctx);
    CHECK(!mis.pass);
    CHECK(mis.diagnostic.find("not available") != std::string::npos);
}

TEST_CASE("judge enforces format, semantics, feasibility, and safety") {
    SceneConfig scene = SceneConfig::defaults();
    auto ctx = context(scene, team());

    auto invoke = [&](const std::string& text) {
        auto parsed = parse_command({text});
        REQUIRE(parsed.command.has_value());
        auto sel = select_action(*parsed.command, ctx);
        REQUIRE(sel.pass);
        return std::pair(*parsed.command, sel.invocations);
    };

    SUBCASE("push without an object fails format") {
        StructuredCommand cmd;
        cmd.agents = {{"agv_1", 2}};
        cmd.verb = SkillVerb::push;
        SkillInvocation inv;
        inv.agent = 2;
        inv.verb = SkillVerb::push;
        inv.location = Pose2D(0, 0);
        auto r = judge(cmd, {inv}, ctx);
        CHECK(!r.pass);
        CHECK(r.diagnostic.rfind("format", 0) == 0);
    }
    SUBCASE("move without a location fails format") {
        StructuredCommand cmd;
        cmd.agents = {{"agv_1", 2}};
        cmd.verb = SkillVerb::move;
        SkillInvocation inv;
        inv.agent = 2;
        inv.verb = SkillVerb::move;
        auto r = judge(cmd, {inv}, ctx);
        CHECK(!r.pass);
        CHECK(r.diagnostic.rfind("format", 0) == 0);
    }
    SUBCASE("object absent from observations fails semantics") {
        auto [cmd, invs] = invoke("group 1: agent agv_1(2) [push] wheel_3(12) to slot_sw");
        auto r = judge(cmd, invs, ctx);
        CHECK(!r.pass);
        CHECK(r.diagnostic.rfind("semantics", 0) == 0);
    }
    SUBCASE("arm pick outside reach fails feasibility") {
        auto [cmd, invs] = invoke("group 1: agent arm(1) [pick] wheel_1(10) to slot_ne");
        // Move the observed component out of the arm's reach.
        for (auto& obs : ctx.observations) {
            for (auto& c : obs.visible_components) c.pose = Pose2D(3.0, 3.0);
        }
        auto r = judge(cmd, invs, ctx);
        CHECK(!r.pass);
        CHECK(r.diagnostic.find("reach") != std::string::npos);
        CHECK(r.category == FailureCategory::incorrect_agent_selection);
    }
    SUBCASE("target outside the workspace fails feasibility") {
        auto [cmd, invs] = invoke("group 1: agent agv_1(2) [move] to (5, 11)");
        auto r = judge(cmd, invs, ctx);
        CHECK(!r.pass);
        CHECK(r.diagnostic.find("workspace") != std::string::npos);
    }
    SUBCASE("two invocations naming one object fail safety") {
        auto [cmd, invs] = invoke("group 1: agent agv_1(2), agv_2(3) [push] wheel_1(10) to slot_ne");
        auto r = judge(cmd, invs, ctx);
        CHECK(!r.pass);
        CHECK(r.diagnostic.rfind("safety", 0) == 0);
    }
    SUBCASE("a clean command passes") {
        auto [cmd, invs] = invoke("group 1: agent agv_1(2) [push] wheel_1(10) to slot_ne");
        CHECK(judge(cmd, invs, ctx).pass);
    }
}

TEST_CASE("verify runs the stages in order and reports the failing stage") {
    SceneConfig scene = SceneConfig::defaults();
    auto ctx = context(scene, team());

    auto good = verify({"group 1: agent agv_1(2) [push] wheel_1(10) to slot_ne"}, ctx);
    CHECK(good.accepted);
    CHECK(good.judge_pass);
    CHECK(good.invocations.size() == 1);

    auto unparsed = verify({"gibberish"}, ctx);
    CHECK(!unparsed.accepted);
    CHECK(unparsed.feedback->stage == VerifyStage::parsing);

    // A kind-mismatched verb must die at capability, before judge runs.
    auto mismatched = verify({"group 1: agent agv_1(2) [carry] wheel_1(10) to slot_ne"}, ctx);
    CHECK(!mismatched.accepted);
    CHECK(!mismatched.judge_pass);
    CHECK(mismatched.feedback->stage == VerifyStage::capability);

    auto unknown_loc = verify({"group 1: agent agv_1(2) [move] to narnia"}, ctx);
    CHECK(!unknown_loc.accepted);
    CHECK(unknown_loc.feedback->stage == VerifyStage::selection);

    auto unseen = verify({"group 1: agent agv_1(2) [push] wheel_3(12) to slot_sw"}, ctx);
    CHECK(!unseen.accepted);
    CHECK(unseen.feedback->stage == VerifyStage::judge);
}

TEST_CASE("low-but-nonzero backend confidence defers; retries respect the budget") {
    SceneConfig scene = SceneConfig::defaults();
    auto ctx = context(scene, team());
    ctx.capability_scorer = [](const StructuredCommand&) { return 0.2; };
    ctx.cfg.deferred_retry_budget = 3;

    auto first = verify({"group 1: agent agv_1(2) [move] to lookout_ne"}, ctx);
    CHECK(!first.accepted);
    CHECK(first.deferred);

    // Still under-confident: one retry, still deferred.
    auto second = reconsider_deferred({first}, ctx);
    REQUIRE(second.size() == 1);
    CHECK(second[0].deferred);
    CHECK(second[0].attempts == 2);

    // Third attempt hits the budget and is dropped from the deferred pool.
    auto third = reconsider_deferred(second, ctx);
    CHECK(!third[0].deferred);
    CHECK(!third[0].accepted);

    // Confidence recovering lets the retry through.
    auto relaxed = ctx;
    relaxed.capability_scorer = [](const StructuredCommand&) { return 0.9; };
    auto retried = reconsider_deferred({first}, relaxed);
    CHECK(retried[0].accepted);
}
