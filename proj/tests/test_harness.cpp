#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mrc/harness.hpp"

using namespace mrc;

namespace {

EpisodeResult episode(int task_id, const std::string& name, int trial,
                      bool success, int steps, const std::string& label = "default") {
    EpisodeResult r;
    r.task.id = task_id;
    r.task.name = name;
    r.trial = trial;
    r.success = success;
    r.steps = steps;
    r.label = label;
    return r;
}

}  // namespace

TEST_CASE("compute_metrics reproduces hand-computed SR and AS") {
    // Task 1: successes with 7 and 9 steps, one failure at 14.
    // Task 2: both trials succeed in 8.
    std::vector<EpisodeResult> eps = {
        episode(1, "Task1", 0, true, 7),  episode(1, "Task1", 1, true, 9),
        episode(1, "Task1", 2, false, 14), episode(2, "Task2", 0, true, 8),
        episode(2, "Task2", 1, true, 8),
    };
    RunReport rep = compute_metrics(eps);
    REQUIRE(rep.per_task.size() == 2);
    CHECK(rep.per_task[0].task_id == 1);
    CHECK(rep.per_task[0].trials == 3);
    CHECK(rep.per_task[0].sr == doctest::Approx(2.0 / 3.0));
    CHECK(rep.per_task[0].as == doctest::Approx(10.0));  // (7 + 9 + 14) / 3
    CHECK(rep.per_task[1].sr == doctest::Approx(1.0));
    CHECK(rep.per_task[1].as == doctest::Approx(8.0));
    // Overall values are macro averages over tasks, like the benchmark's
    // "Average" column.
    CHECK(rep.overall_sr == doctest::Approx((2.0 / 3.0 + 1.0) / 2.0));
    CHECK(rep.overall_as == doctest::Approx((10.0 + 8.0) / 2.0));
    CHECK(rep.label == "default");
}

TEST_CASE("compute_metrics rejects empty or mixed-label input") {
    CHECK_THROWS_AS(compute_metrics({}), std::invalid_argument);
    std::vector<EpisodeResult> mixed = {episode(1, "Task1", 0, true, 7, "a"),
                                        episode(1, "Task1", 1, true, 7, "b")};
    CHECK_THROWS_AS(compute_metrics(mixed), std::invalid_argument);
}

TEST_CASE("emit_report renders both formats") {
    RunReport rep = compute_metrics({episode(1, "Task1", 0, true, 7),
                                     episode(3, "Task3", 0, true, 9)});
    const std::string table = emit_report(rep, ReportFormat::table);
    CHECK(table.find("Task1") != std::string::npos);
    CHECK(table.find("Task3") != std::string::npos);
    CHECK(table.find("1.000") != std::string::npos);  // SR column
    CHECK(table.find("7.0") != std::string::npos);    // AS column

    const auto parsed = nlohmann::json::parse(emit_report(rep, ReportFormat::json));
    CHECK(parsed.at("per_task").size() == 2);
    CHECK(parsed.at("overall").at("sr").get<double>() == doctest::Approx(1.0));
    CHECK(parsed.at("overall").at("as").get<double>() == doctest::Approx(8.0));
}

TEST_CASE("run_suite derives per-trial seeds and aggregates the report") {
    ScriptedBackend backend;
    OrchestratorConfig cfg;
    cfg.skills = SkillConfig::no_failures();
    auto tasks = TaskSpec::default_tasks();
    tasks.resize(2);  // the two easy tasks keep this test fast
    SuiteResult suite = run_suite(tasks, backend, 2, cfg, 5);

    REQUIRE(suite.episodes.size() == 4);
    CHECK(suite.report.per_task.size() == 2);
    CHECK(suite.report.overall_sr == doctest::Approx(1.0));
    CHECK(suite.report.overall_as == doctest::Approx(7.0));
    for (const auto& ep : suite.episodes) {
        CHECK(ep.log.at("seed") ==
              derive_seed(5, ep.task.id, static_cast<std::uint64_t>(ep.trial)));
    }
    // Distinct trials get distinct worlds.
    CHECK(suite.episodes[0].log.at("seed") != suite.episodes[1].log.at("seed"));

    // Same suite seed reproduces the same logs.
    ScriptedBackend backend2;
    SuiteResult again = run_suite(tasks, backend2, 2, cfg, 5);
    for (std::size_t i = 0; i < suite.episodes.size(); ++i) {
        CHECK(suite.episodes[i].log.dump() == again.episodes[i].log.dump());
    }
}

TEST_CASE("run_ablation switches the matching flag and labels the report") {
    ScriptedBackend backend;
    OrchestratorConfig cfg;
    cfg.skills = SkillConfig::no_failures();
    auto tasks = TaskSpec::default_tasks();
    tasks.resize(1);
    SuiteResult suite = run_ablation(AblationKind::no_history, tasks, backend, 1,
                                     cfg, 5);
    REQUIRE(suite.episodes.size() == 1);
    CHECK(suite.report.label == to_string(AblationKind::no_history));
    CHECK(suite.episodes[0].log.at("memory").at("ablations").at("no_history") == true);
    // The scripted pipeline does not depend on dialogue history.
    CHECK(suite.report.overall_sr == doctest::Approx(1.0));
}
