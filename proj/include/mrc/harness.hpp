#pragma once

#include <string>
#include <vector>

#include "mrc/orchestrator.hpp"

namespace mrc {

struct TaskMetrics {
    int task_id = 0;
    std::string name;
    double sr = 0.0;
    double as = 0.0;
    int trials = 0;
};

struct RunReport {
    std::vector<TaskMetrics> per_task;
    double overall_sr = 0.0;
    double overall_as = 0.0;
    std::string label = "default";

    nlohmann::json to_json() const;
};

struct SuiteResult {
    std::vector<EpisodeResult> episodes;
    RunReport report;
};

/// Runs trials x |tasks| episodes with per-trial seeds derived from
/// (suite_seed, task id, trial index) and aggregates SR/AS.
SuiteResult run_suite(const std::vector<TaskSpec>& tasks, Backend& backend,
                      int trials, const OrchestratorConfig& cfg,
                      std::uint64_t suite_seed, const std::string& label = "default");

/// Throws std::invalid_argument on an empty result set or mixed labels.
RunReport compute_metrics(const std::vector<EpisodeResult>& results);

enum class AblationKind { no_history, no_feedback, no_grouping };

const char* to_string(AblationKind k);

SuiteResult run_ablation(AblationKind kind, const std::vector<TaskSpec>& tasks,
                         Backend& backend, int trials,
                         const OrchestratorConfig& base_cfg,
                         std::uint64_t suite_seed);

enum class ReportFormat { table, json };

std::string emit_report(const RunReport& report, ReportFormat format);

}  // namespace mrc
