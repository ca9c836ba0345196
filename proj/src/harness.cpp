#include "mrc/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "mrc/rng.hpp"

namespace mrc {

const char* to_string(AblationKind k) {
    switch (k) {
        case AblationKind::no_history: return "no_history";
        case AblationKind::no_feedback: return "no_feedback";
        case AblationKind::no_grouping: return "no_grouping";
    }
    return "?";
}

SuiteResult run_suite(const std::vector<TaskSpec>& tasks, Backend& backend,
                      int trials, const OrchestratorConfig& cfg,
                      std::uint64_t suite_seed, const std::string& label) {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    SuiteResult out;
    for (const auto& task : tasks) {
        for (int trial = 0; trial < trials; ++trial) {
            const std::uint64_t seed = derive_seed(
                suite_seed, static_cast<std::uint64_t>(task.id),
                static_cast<std::uint64_t>(trial));
            out.episodes.push_back(
                run_episode(task, backend, seed, cfg, trial, label));
        }
    }
    out.report = compute_metrics(out.episodes);
    return out;
}

RunReport compute_metrics(const std::vector<EpisodeResult>& results) {
    if (results.empty()) throw std::invalid_argument("no episode results");
    const std::string& label = results.front().label;
    for (const auto& r : results) {
        if (r.label != label) {
            throw std::invalid_argument("mixed labels in result set: " + label +
                                        " vs " + r.label);
        }
    }

    std::map<int, TaskMetrics> by_task;
    std::map<int, std::pair<int, int>> tally;  // task -> (successes, total steps)
    for (const auto& r : results) {
        TaskMetrics& m = by_task[r.task.id];
        m.task_id = r.task.id;
        m.name = r.task.name;
        m.trials += 1;
        auto& [succ, steps] = tally[r.task.id];
        succ += r.success ? 1 : 0;
        steps += r.steps;
    }

    RunReport report;
    report.label = label;
    double sr_sum = 0.0;
    double as_sum = 0.0;
    for (auto& [id, m] : by_task) {
        m.sr = static_cast<double>(tally[id].first) / m.trials;
        m.as = static_cast<double>(tally[id].second) / m.trials;
        sr_sum += m.sr;
        as_sum += m.as;
        report.per_task.push_back(m);
    }
    report.overall_sr = sr_sum / static_cast<double>(report.per_task.size());
    report.overall_as = as_sum / static_cast<double>(report.per_task.size());
    return report;
}

SuiteResult run_ablation(AblationKind kind, const std::vector<TaskSpec>& tasks,
                         Backend& backend, int trials,
                         const OrchestratorConfig& base_cfg,
                         std::uint64_t suite_seed) {
    OrchestratorConfig cfg = base_cfg;
    switch (kind) {
        case AblationKind::no_history: cfg.ablations.no_history = true; break;
        case AblationKind::no_feedback: cfg.ablations.no_feedback = true; break;
        case AblationKind::no_grouping: cfg.ablations.no_grouping = true; break;
    }
    return run_suite(tasks, backend, trials, cfg, suite_seed, to_string(kind));
}

nlohmann::json RunReport::to_json() const {
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& m : per_task) {
        tasks.push_back({{"task_id", m.task_id},
                         {"name", m.name},
                         {"sr", m.sr},
                         {"as", m.as},
                         {"trials", m.trials}});
    }
    return nlohmann::json{{"label", label},
                          {"per_task", tasks},
                          {"overall", {{"sr", overall_sr}, {"as", overall_as}}}};
}

std::string emit_report(const RunReport& report, ReportFormat format) {
    if (format == ReportFormat::json) return report.to_json().dump(2) + "\n";

    std::ostringstream os;
    os << "Label: " << report.label << "\n";
    os << "Metric";
    for (const auto& m : report.per_task) os << "  " << m.name;
    os << "  Average\n";
    char buf[32];
    os << "SR    ";
    for (const auto& m : report.per_task) {
        std::snprintf(buf, sizeof(buf), "  %.3f", m.sr);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "  %.3f\n", report.overall_sr);
    os << buf;
    os << "AS    ";
    for (const auto& m : report.per_task) {
        std::snprintf(buf, sizeof(buf), "  %.1f", m.as);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "  %.1f\n", report.overall_as);
    os << buf;
    return os.str();
}

}  // namespace mrc
