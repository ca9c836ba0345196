#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrc/memory.hpp"
#include "mrc/types.hpp"
#include "mrc/world.hpp"

#include "json.hpp"

namespace mrc {

enum class BackendRole { general_planner, subgroup_manager, executor, capability_scorer };

const char* to_string(BackendRole r);

struct BackendRequest {
    BackendRole role = BackendRole::general_planner;
    int cycle = 0;
    /// Stable lookup key: "<cycle>/<role>/<gid-or-agent>". Drives replay.
    std::string key;
    std::string rendered_prompt;
    /// Structured mirror of the prompt so deterministic backends need no NLP.
    nlohmann::json context;
};

struct BackendResponse {
    std::string text;
    std::optional<int> prompt_tokens;
    std::optional<int> completion_tokens;
    std::optional<double> latency_seconds;
};

struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TaskBrief {
    int task_id = 1;
    std::string name;
    Difficulty difficulty = Difficulty::easy;
    int gt_steps = 7;
    std::vector<std::string> blocked_anchors;  // empty on easy tasks
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual void begin_episode(const TaskBrief& task, std::uint64_t seed) {
        (void)task;
        (void)seed;
    }
    virtual BackendResponse respond(const BackendRequest& request) = 0;
};

struct PromptTemplate {
    BackendRole role = BackendRole::general_planner;
    std::string text;  // named placeholders in braces
};

PromptTemplate default_template(BackendRole role);
PromptTemplate load_template(BackendRole role, const std::string& path);

/// Deterministic substitution; throws std::runtime_error on an unresolved
/// placeholder.
std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& values);

struct HttpBackendConfig {
    std::string endpoint;  // e.g. http://host:port
    std::string path = "/v1/chat/completions";
    std::string api_key;
    std::string model = "gpt-4-0125-preview";
    double temperature = 0.0;
    int max_attempts = 3;
    int connect_timeout_seconds = 10;
    int read_timeout_seconds = 120;

    static HttpBackendConfig from_environment();
};

class HttpChatBackend : public Backend {
public:
    explicit HttpChatBackend(HttpBackendConfig config);
    BackendResponse respond(const BackendRequest& request) override;

private:
    HttpBackendConfig config_;
};

/// Deterministic rule-based oracle standing in for the LLM. Keeps a
/// per-episode blackboard updated from the planner-role context each cycle;
/// subgroup and executor calls read it without mutating, so managers may run
/// in any order.
class ScriptedBackend : public Backend {
public:
    ScriptedBackend();
    ~ScriptedBackend() override;
    void begin_episode(const TaskBrief& task, std::uint64_t seed) override;
    BackendResponse respond(const BackendRequest& request) override;

private:
    struct State;
    std::unique_ptr<State> state_;
};

/// Emits a single all-agents group and [wait] for everyone. Exercises the
/// budget path: every episode times out at exactly 2x the ground-truth steps.
class AlwaysWaitBackend : public Backend {
public:
    BackendResponse respond(const BackendRequest& request) override;
};

/// Replays the request/response pairs captured in an episode log.
class ReplayBackend : public Backend {
public:
    /// `backend_io` is the episode log's array of {key, response} entries.
    explicit ReplayBackend(const nlohmann::json& backend_io);
    BackendResponse respond(const BackendRequest& request) override;

private:
    std::map<std::string, std::string> responses_;
};

/// Wraps another backend and records request/response pairs for replay.
class RecordingBackend : public Backend {
public:
    explicit RecordingBackend(Backend& inner) : inner_(inner) {}
    void begin_episode(const TaskBrief& task, std::uint64_t seed) override;
    BackendResponse respond(const BackendRequest& request) override;
    const nlohmann::json& log() const { return log_; }

private:
    Backend& inner_;
    nlohmann::json log_ = nlohmann::json::array();
};

}  // namespace mrc
